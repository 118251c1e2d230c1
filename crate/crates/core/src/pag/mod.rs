//! Partial ancestral graphs: a mixed graph with circle, arrow and tail endpoint
//! marks plus the separating sets recorded when edges were removed.

mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rules::{apply_fci_rules, orient, orient_v_structures, OrientationConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Circle,
    Arrow,
    Tail,
}

impl Mark {
    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Circle => "circle",
            Mark::Arrow => "arrow",
            Mark::Tail => "tail",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PagError {
    #[error("no edge between {0} and {1}")]
    NoSuchEdge(usize, usize),
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("self-edge at node {0}")]
    SelfEdge(usize),
}

/// One edge with the mark at each endpoint, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub mark_a: Mark,
    pub mark_b: Mark,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pag {
    n: usize,
    /// `marks[a * n + b]` is the mark at `b` on edge `a – b`.
    marks: Vec<Option<Mark>>,
    sepsets: BTreeMap<(usize, usize), Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Pag {
    /// Graph over `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            marks: vec![None; n * n],
            sepsets: BTreeMap::new(),
        }
    }

    /// Complete graph with circle marks everywhere.
    pub fn complete_over(n: usize) -> Self {
        let mut g = Self::empty(n);
        for a in 0..n {
            for b in 0..a {
                g.marks[a * n + b] = Some(Mark::Circle);
                g.marks[b * n + a] = Some(Mark::Circle);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Appends an isolated node and returns its index.
    pub fn add_node(&mut self) -> usize {
        let old = self.n;
        let n = old + 1;
        let mut marks = vec![None; n * n];
        for a in 0..old {
            marks[a * n..a * n + old].copy_from_slice(&self.marks[a * old..(a + 1) * old]);
        }
        self.n = n;
        self.marks = marks;
        old
    }

    #[inline]
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.marks[a * self.n + b].is_some()
    }

    /// Mark at `node` on the edge `node – other`.
    #[inline]
    pub fn mark_at(&self, node: usize, other: usize) -> Option<Mark> {
        self.marks[other * self.n + node]
    }

    /// Sets the mark at `node` on edge `node – other`. Panics if absent.
    pub fn set_mark(&mut self, node: usize, other: usize, mark: Mark) {
        let slot = &mut self.marks[other * self.n + node];
        assert!(slot.is_some(), "no edge {other} - {node}");
        *slot = Some(mark);
    }

    pub fn add_edge(&mut self, a: usize, b: usize, mark_a: Mark, mark_b: Mark) -> Result<(), PagError> {
        if a >= self.n {
            return Err(PagError::NodeOutOfRange(a));
        }
        if b >= self.n {
            return Err(PagError::NodeOutOfRange(b));
        }
        if a == b {
            return Err(PagError::SelfEdge(a));
        }
        self.marks[b * self.n + a] = Some(mark_a);
        self.marks[a * self.n + b] = Some(mark_b);
        self.sepsets.remove(&key(a, b));
        Ok(())
    }

    /// Removes `a – b` and records the separating set that justified it.
    pub fn remove_edge_with_sepset(
        &mut self,
        a: usize,
        b: usize,
        sepset: &[usize],
    ) -> Result<(), PagError> {
        if a >= self.n || b >= self.n || !self.is_adjacent(a, b) {
            return Err(PagError::NoSuchEdge(a, b));
        }
        self.marks[a * self.n + b] = None;
        self.marks[b * self.n + a] = None;
        let mut s = sepset.to_vec();
        s.sort_unstable();
        self.sepsets.insert(key(a, b), s);
        Ok(())
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sepsets.get(&key(a, b)).map(Vec::as_slice)
    }

    pub fn sepsets(&self) -> impl Iterator<Item = ((usize, usize), &[usize])> {
        self.sepsets.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    /// Neighbors of `a` in ascending order.
    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&b| self.is_adjacent(a, b))
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if let (Some(mark_a), Some(mark_b)) = (self.mark_at(a, b), self.mark_at(b, a)) {
                    out.push(Edge { a, b, mark_a, mark_b });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.marks.iter().filter(|m| m.is_some()).count() / 2
    }

    /// Unordered adjacent pairs, ascending.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        self.edges().iter().map(|e| (e.a, e.b)).collect()
    }

    /// Resets every endpoint to a circle; sepsets are kept.
    pub fn reset_marks(&mut self) {
        for m in self.marks.iter_mut().flatten() {
            *m = Mark::Circle;
        }
    }

    /// `a ↔ b`.
    pub fn is_bidirected(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b) == Some(Mark::Arrow) && self.mark_at(b, a) == Some(Mark::Arrow)
    }

    pub fn has_bidirected_edge(&self) -> bool {
        self.edges()
            .iter()
            .any(|e| e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow)
    }

    /// `a → b`: tail at `a`, arrow at `b`.
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b) == Some(Mark::Tail) && self.mark_at(b, a) == Some(Mark::Arrow)
    }

    /// Induced subgraph over the first `m` nodes, sepsets included.
    pub fn prefix(&self, m: usize) -> Pag {
        let m = m.min(self.n);
        let mut g = Pag::empty(m);
        for a in 0..m {
            for b in 0..m {
                g.marks[a * m + b] = self.marks[a * self.n + b];
            }
        }
        g.sepsets = self
            .sepsets
            .iter()
            .filter(|((a, b), _)| *a < m && *b < m)
            .map(|(&k, v)| (k, v.clone()))
            .collect();
        g
    }
}

/// Same node count, same skeleton and the same mark at every endpoint.
/// Separating sets are not compared.
pub fn pag_equal(g1: &Pag, g2: &Pag) -> bool {
    g1.n == g2.n && g1.marks == g2.marks
}
