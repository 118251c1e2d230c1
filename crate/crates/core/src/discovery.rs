//! Recursive structure learning under a known causal order.
//!
//! Token `t` can only be influenced by tokens `< t`, so the graph over a prefix
//! never changes when later tokens are appended. Each step connects the new
//! token to every earlier one and runs a restricted ICD pass over just those
//! new edges.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attnmat::{
    correlation, covariance, to_uni_triangular, AttentionMatrix, CorrelationMatrix, EffectMatrix,
    MatrixError,
};
use crate::citest::{ci_test, CiConfig, CiError, CiRecord};
use crate::fci::{possible_d_sep, subsets};
use crate::pag::{orient, Mark, OrientationConfig, Pag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscoveryError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error("head {head}: expected {expected} tokens, got {got}")]
    ShapeMismatch { head: usize, expected: usize, got: usize },
    #[error("head {head}: {source}")]
    Head {
        head: usize,
        #[source]
        source: Box<DiscoveryError>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTrace {
    pub records: Vec<CiRecord>,
    /// Every test attempted, including ones whose statistic was undefined
    /// (singular sub-correlation, too few samples) and left no record.
    pub tests_performed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscoveryResult {
    pub pag: Pag,
    pub trace: DiscoveryTrace,
    pub head_index: usize,
}

pub fn learn_structure(a: &AttentionMatrix, cfg: &CiConfig) -> Result<DiscoveryResult, DiscoveryError> {
    learn_structure_with(a, cfg, &OrientationConfig::default())
}

pub fn learn_structure_with(
    a: &AttentionMatrix,
    cfg: &CiConfig,
    orientation: &OrientationConfig,
) -> Result<DiscoveryResult, DiscoveryError> {
    learn_from_effect(&to_uni_triangular(a), cfg, orientation)
}

pub fn learn_from_effect(
    m: &EffectMatrix,
    cfg: &CiConfig,
    orientation: &OrientationConfig,
) -> Result<DiscoveryResult, DiscoveryError> {
    let r = correlation(&covariance(m))?;
    learn_from_correlation(&r, cfg, orientation)
}

/// Discovery over an arbitrary correlation matrix whose index order is a
/// valid causal order.
pub fn learn_from_correlation(
    r: &CorrelationMatrix,
    cfg: &CiConfig,
    orientation: &OrientationConfig,
) -> Result<DiscoveryResult, DiscoveryError> {
    cfg.validate()?;
    let n = r.n();
    let mut g = Pag::empty(0);
    let mut trace = DiscoveryTrace::default();
    for _ in 0..n {
        let t = g.add_node();
        for j in 0..t {
            g.add_edge(j, t, Mark::Circle, Mark::Circle)
                .expect("nodes in range");
        }
        let edges: Vec<(usize, usize)> = (0..t).map(|j| (j, t)).collect();
        icd_refine(&edges, &mut g, r, cfg, orientation, &mut trace)?;
    }
    Ok(DiscoveryResult {
        pag: g,
        trace,
        head_index: 0,
    })
}

/// Learns only the edges in `edges`, which must all be present in `g`.
///
/// Radius `r` tries conditioning sets of size `r` from [`pd_sep_range`];
/// the first independence removes the edge. The graph is re-oriented after
/// every radius. Stops once no remaining edge has a Possible-D-Sep pool large
/// enough to supply a set of the next size.
pub fn icd_refine(
    edges: &[(usize, usize)],
    g: &mut Pag,
    r: &CorrelationMatrix,
    cfg: &CiConfig,
    orientation: &OrientationConfig,
    trace: &mut DiscoveryTrace,
) -> Result<(), DiscoveryError> {
    let mut radius = 0;
    while radius <= g.n() {
        let live: Vec<(usize, usize)> = edges.iter().copied().filter(|&(x, y)| g.is_adjacent(x, y)).collect();
        let done = live.is_empty()
            || (radius > 0 && live.iter().all(|&(x, y)| sep_pool(x, y, g).len() < radius));
        if done {
            break;
        }
        for (x, y) in live {
            if !g.is_adjacent(x, y) {
                continue;
            }
            for z in pd_sep_range(x, y, radius, g) {
                trace.tests_performed += 1;
                let record = match ci_test(r, x, y, &z, cfg) {
                    Ok(rec) => rec,
                    // no defined statistic: keep the edge
                    Err(CiError::SingularSubmatrix { .. } | CiError::InsufficientSamples { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                let independent = record.independent;
                trace.records.push(record);
                if independent {
                    g.remove_edge_with_sepset(x, y, &z).expect("edge checked above");
                    break;
                }
            }
        }
        orient(g, orientation);
        radius += 1;
    }
    Ok(())
}

/// `(PDS(x) ∪ PDS(y)) \ {x, y}`, ascending.
fn sep_pool(x: usize, y: usize, g: &Pag) -> Vec<usize> {
    let mut pool: BTreeSet<usize> = possible_d_sep(g, x);
    pool.extend(possible_d_sep(g, y));
    pool.remove(&x);
    pool.remove(&y);
    pool.into_iter().collect()
}

/// Skeleton distances from `src`, ignoring the edge `src – skip`.
fn distances(g: &Pag, src: usize, skip: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if dist[w] == usize::MAX && !(v == src && w == skip) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Candidate conditioning sets of size `r` for the edge `x – y`, in
/// lexicographic order.
///
/// Members come from Possible-D-Sep of either endpoint and must lie within
/// `r` skeleton hops of `x` or of `y`, not counting the edge itself.
pub fn pd_sep_range(x: usize, y: usize, r: usize, g: &Pag) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![Vec::new()];
    }
    let dx = distances(g, x, y);
    let dy = distances(g, y, x);
    let pool: Vec<usize> = sep_pool(x, y, g)
        .into_iter()
        .filter(|&z| dx[z].min(dy[z]) <= r)
        .collect();
    subsets(&pool, r)
}

/// One independent discovery per head, run in parallel. Heads whose size
/// differs from the first head's fail with [`DiscoveryError::ShapeMismatch`].
pub fn learn_all_heads(
    heads: &[AttentionMatrix],
    cfg: &CiConfig,
) -> Vec<Result<DiscoveryResult, DiscoveryError>> {
    let expected = heads.first().map_or(0, AttentionMatrix::n);
    heads
        .par_iter()
        .enumerate()
        .map(|(head, a)| {
            if a.n() != expected {
                return Err(DiscoveryError::ShapeMismatch {
                    head,
                    expected,
                    got: a.n(),
                });
            }
            learn_structure(a, cfg)
                .map(|mut res| {
                    res.head_index = head;
                    res
                })
                .map_err(|e| DiscoveryError::Head {
                    head,
                    source: Box::new(e),
                })
        })
        .collect()
}
