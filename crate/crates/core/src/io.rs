//! File formats: attention bundles, PAGs (JSON and DOT) and CI traces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attnmat::{validate_attention, AttentionMatrix, MatrixError};
use crate::discovery::DiscoveryTrace;
use crate::matrix::Matrix;
use crate::pag::{Mark, Pag};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported format_version {0} (expected {BUNDLE_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("head {head}: matrix has {rows} rows, bundle declares n = {n}")]
    ShapeMismatch { head: usize, rows: usize, n: usize },
    #[error("head {head}: ragged matrix")]
    Ragged { head: usize },
    #[error("head {head}: {source}")]
    InvalidHead {
        head: usize,
        #[source]
        source: MatrixError,
    },
    #[error("PAG references node {node} but declares n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLabel {
    Legal,
    Illegal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadMatrix {
    pub head_index: usize,
    pub matrix: Vec<Vec<f64>>,
}

/// Attention matrices of every head for one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionBundle {
    pub format_version: u32,
    pub sequence_id: String,
    pub n: usize,
    pub heads: Vec<HeadMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeLabel>,
}

impl AttentionBundle {
    pub fn from_heads(
        sequence_id: impl Into<String>,
        heads: &[AttentionMatrix],
        outcome: Option<OutcomeLabel>,
    ) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            sequence_id: sequence_id.into(),
            n: heads.first().map_or(0, AttentionMatrix::n),
            heads: heads
                .iter()
                .enumerate()
                .map(|(head_index, a)| HeadMatrix {
                    head_index,
                    matrix: a.matrix().to_rows(),
                })
                .collect(),
            outcome,
        }
    }

    /// Parses and checks the envelope; heads are validated separately by
    /// [`AttentionBundle::attention_heads`].
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let b: AttentionBundle = serde_json::from_str(text)?;
        if b.format_version != BUNDLE_FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(b.format_version));
        }
        Ok(b)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// Validates every head independently.
    pub fn attention_heads(&self) -> Vec<(usize, Result<AttentionMatrix, FormatError>)> {
        self.heads
            .iter()
            .map(|h| {
                let head = h.head_index;
                let res = if h.matrix.len() != self.n {
                    Err(FormatError::ShapeMismatch {
                        head,
                        rows: h.matrix.len(),
                        n: self.n,
                    })
                } else {
                    Matrix::from_rows(&h.matrix)
                        .ok_or(FormatError::Ragged { head })
                        .and_then(|m| {
                            validate_attention(m).map_err(|source| FormatError::InvalidHead { head, source })
                        })
                };
                (head, res)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub mark_a: Mark,
    pub mark_b: Mark,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepsetRecord {
    pub pair: [usize; 2],
    pub set: Vec<usize>,
}

/// Serialized PAG: edges with endpoint marks plus recorded sepsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PagDocument {
    pub n: usize,
    pub edges: Vec<EdgeRecord>,
    pub sepsets: Vec<SepsetRecord>,
}

impl PagDocument {
    pub fn from_pag(g: &Pag) -> Self {
        Self {
            n: g.n(),
            edges: g
                .edges()
                .into_iter()
                .map(|e| EdgeRecord {
                    a: e.a,
                    b: e.b,
                    mark_a: e.mark_a,
                    mark_b: e.mark_b,
                })
                .collect(),
            sepsets: g
                .sepsets()
                .map(|((a, b), s)| SepsetRecord {
                    pair: [a, b],
                    set: s.to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_pag(&self) -> Result<Pag, FormatError> {
        let mut g = Pag::empty(self.n);
        let check = |v: usize| {
            if v < self.n {
                Ok(())
            } else {
                Err(FormatError::NodeOutOfRange { node: v, n: self.n })
            }
        };
        for s in &self.sepsets {
            let [a, b] = s.pair;
            check(a)?;
            check(b)?;
            for &v in &s.set {
                check(v)?;
            }
            // a transient edge carries the sepset in
            g.add_edge(a, b, Mark::Circle, Mark::Circle)
                .map_err(|_| FormatError::NodeOutOfRange { node: a, n: self.n })?;
            g.remove_edge_with_sepset(a, b, &s.set).expect("edge just added");
        }
        for e in &self.edges {
            check(e.a)?;
            check(e.b)?;
            g.add_edge(e.a, e.b, e.mark_a, e.mark_b)
                .map_err(|_| FormatError::NodeOutOfRange { node: e.a, n: self.n })?;
        }
        Ok(g)
    }
}

pub fn pag_to_json(g: &Pag) -> String {
    let mut s = serde_json::to_string_pretty(&PagDocument::from_pag(g)).expect("PAG serializes");
    s.push('\n');
    s
}

pub fn pag_from_json(text: &str) -> Result<Pag, FormatError> {
    let doc: PagDocument = serde_json::from_str(text)?;
    doc.to_pag()
}

fn dot_arrow(m: Mark) -> &'static str {
    match m {
        Mark::Circle => "odot",
        Mark::Arrow => "normal",
        Mark::Tail => "none",
    }
}

/// Graphviz rendering; `arrowtail` is the mark at the first node.
pub fn pag_to_dot(g: &Pag, name: &str) -> String {
    let mut s = String::new();
    writeln!(s, "graph \"{}\" {{", name.replace('"', "\\\"")).unwrap();
    writeln!(s, "  node [shape=circle];").unwrap();
    for v in 0..g.n() {
        writeln!(s, "  {v};").unwrap();
    }
    for e in g.edges() {
        writeln!(
            s,
            "  {} -- {} [dir=both, arrowtail={}, arrowhead={}];",
            e.a,
            e.b,
            dot_arrow(e.mark_a),
            dot_arrow(e.mark_b)
        )
        .unwrap();
    }
    s.push_str("}\n");
    s
}

pub fn trace_to_json(t: &DiscoveryTrace) -> String {
    let mut s = serde_json::to_string_pretty(t).expect("trace serializes");
    s.push('\n');
    s
}

pub fn trace_from_json(text: &str) -> Result<DiscoveryTrace, FormatError> {
    Ok(serde_json::from_str(text)?)
}
