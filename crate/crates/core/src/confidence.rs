//! Structural confidence of a learned graph: entropy of the p-values that
//! judged independence minus entropy of those that judged dependence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citest::{t_interval, CiError, CiRecord, TInterval, TTestKind};
use crate::discovery::{DiscoveryResult, DiscoveryTrace};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfidenceError {
    #[error("no discovery results to aggregate")]
    EmptyResults,
    #[error("entropy needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error(transparent)]
    Ci(#[from] CiError),
}

/// Which CI records enter the score, by conditioning-set size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    /// Marginal tests only.
    Cond0,
    /// Exactly one conditioning node.
    Cond1,
    /// At most one conditioning node.
    Cond01,
    #[default]
    All,
}

impl Filter {
    pub const ALL_FILTERS: [Filter; 4] = [Filter::Cond0, Filter::Cond1, Filter::Cond01, Filter::All];

    pub fn keeps(self, cond_size: usize) -> bool {
        match self {
            Filter::Cond0 => cond_size == 0,
            Filter::Cond1 => cond_size == 1,
            Filter::Cond01 => cond_size <= 1,
            Filter::All => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Filter::Cond0 => "cond0",
            Filter::Cond1 => "cond1",
            Filter::Cond01 => "cond01",
            Filter::All => "all",
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cond0" => Ok(Filter::Cond0),
            "cond1" => Ok(Filter::Cond1),
            "cond01" => Ok(Filter::Cond01),
            "all" => Ok(Filter::All),
            other => Err(format!("unknown filter '{other}' (expected cond0, cond1, cond01 or all)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub alpha: f64,
    pub filter: Filter,
    pub p_ind: Vec<f64>,
    pub p_dep: Vec<f64>,
    pub h_ind: f64,
    pub h_dep: f64,
    pub r_score: f64,
    /// Either population is empty.
    pub degenerate: bool,
}

/// Splits the filtered trace at `alpha`; `p = alpha` counts as independent.
pub fn split_pvalues(records: &[CiRecord], alpha: f64, filter: Filter) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter(|r| filter.keeps(r.cond_size))
        .map(|r| r.p_value)
        .partition(|&p| p >= alpha)
}

/// Plug-in Shannon entropy (nats) of the histogram of `pvals` over `bins`
/// equal cells on `[0, 1]`. `p = 1` falls in the last cell. Empty input gives 0.
pub fn pvalue_entropy(pvals: &[f64], bins: usize) -> Result<f64, ConfidenceError> {
    if bins < 2 {
        return Err(ConfidenceError::TooFewBins(bins));
    }
    if pvals.is_empty() {
        return Ok(0.0);
    }
    let mut counts = vec![0usize; bins];
    for &p in pvals {
        let cell = ((p * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[cell] += 1;
    }
    let total = pvals.len() as f64;
    // `0.0 -` rather than negation keeps a single occupied cell at +0
    Ok(0.0
        - counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / total;
            q * q.ln()
        })
        .sum::<f64>())
}

pub fn confidence_score(
    trace: &DiscoveryTrace,
    alpha: f64,
    filter: Filter,
    bins: usize,
) -> Result<ConfidenceReport, ConfidenceError> {
    let (p_ind, p_dep) = split_pvalues(&trace.records, alpha, filter);
    let h_ind = pvalue_entropy(&p_ind, bins)?;
    let h_dep = pvalue_entropy(&p_dep, bins)?;
    Ok(ConfidenceReport {
        alpha,
        filter,
        degenerate: p_ind.is_empty() || p_dep.is_empty(),
        p_ind,
        p_dep,
        h_ind,
        h_dep,
        r_score: h_ind - h_dep,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    /// Mean head score.
    pub score: f64,
    pub heads: usize,
    pub degenerate_heads: usize,
    pub per_head: Vec<ConfidenceReport>,
}

/// Mean of the per-head scores. Degenerate heads still count.
pub fn sequence_score(
    results: &[DiscoveryResult],
    alpha: f64,
    filter: Filter,
    bins: usize,
) -> Result<SequenceScore, ConfidenceError> {
    if results.is_empty() {
        return Err(ConfidenceError::EmptyResults);
    }
    let per_head = results
        .iter()
        .map(|r| confidence_score(&r.trace, alpha, filter, bins))
        .collect::<Result<Vec<_>, _>>()?;
    let score = per_head.iter().map(|r| r.r_score).sum::<f64>() / per_head.len() as f64;
    Ok(SequenceScore {
        score,
        heads: per_head.len(),
        degenerate_heads: per_head.iter().filter(|r| r.degenerate).count(),
        per_head,
    })
}

/// Difference of group means with a 95% unpaired t-interval. Welch unless
/// `kind` asks for the pooled-variance test.
pub fn group_difference(
    scores_a: &[f64],
    scores_b: &[f64],
    kind: TTestKind,
) -> Result<TInterval, ConfidenceError> {
    Ok(t_interval(scores_a, scores_b, 0.95, kind)?)
}
