//! Partial-correlation conditional-independence tests with Fisher z p-values,
//! plus the unpaired t machinery used for group comparisons.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use libm::erfc;
use thiserror::Error;

use crate::attnmat::CorrelationMatrix;

/// Largest admissible condition number of a sub-correlation matrix.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;
/// `|ρ|` is clamped to this value so that exact collinearity yields `p = 0`.
pub const MAX_ABS_CORRELATION: f64 = 1.0 - 1e-12;
/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Default `|ρ|` threshold for exact-independence mode.
pub const DEFAULT_EXACT_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CiError {
    #[error("invalid CI configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid node indices ({i}, {j}) with conditioning set {cond:?}")]
    InvalidIndices { i: usize, j: usize, cond: Vec<usize> },
    #[error("sub-correlation over {nodes:?} is singular (condition number {condition:e})")]
    SingularSubmatrix { nodes: Vec<usize>, condition: f64 },
    #[error("insufficient samples: n_eff {n_eff} with conditioning size {cond_size}")]
    InsufficientSamples { n_eff: usize, cond_size: usize },
    #[error("each sample needs at least 2 elements")]
    TooFewSamples,
    #[error("zero variance in both samples; t-statistic undefined")]
    DegenerateVariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub alpha: f64,
    pub n_eff: usize,
    /// When set, the verdict is `|ρ| < threshold` instead of `p ≥ alpha`.
    /// Used with noise-free synthetic covariances.
    pub exact_threshold: Option<f64>,
}

impl CiConfig {
    pub fn new(alpha: f64, n_eff: usize) -> Result<Self, CiError> {
        let cfg = Self {
            alpha,
            n_eff,
            exact_threshold: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exact(threshold: f64, n_eff: usize) -> Result<Self, CiError> {
        let cfg = Self {
            alpha: DEFAULT_ALPHA,
            n_eff,
            exact_threshold: Some(threshold),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CiError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CiError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_eff < 5 {
            return Err(CiError::InvalidConfig(format!(
                "n_eff must be at least 5, got {}",
                self.n_eff
            )));
        }
        if let Some(t) = self.exact_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(CiError::InvalidConfig(format!(
                    "exact threshold must lie in (0, 1), got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// One conditional-independence test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub i: usize,
    pub j: usize,
    pub cond: Vec<usize>,
    pub p_value: f64,
    pub independent: bool,
    pub cond_size: usize,
}

fn check_indices(n: usize, i: usize, j: usize, cond: &[usize]) -> Result<(), CiError> {
    let bad = i == j
        || i >= n
        || j >= n
        || cond.iter().any(|&k| k >= n || k == i || k == j)
        || (1..cond.len()).any(|a| cond[..a].contains(&cond[a]));
    if bad {
        return Err(CiError::InvalidIndices {
            i,
            j,
            cond: cond.to_vec(),
        });
    }
    Ok(())
}

/// `ρ(i, j | cond)` from the precision matrix of the sub-correlation over
/// `{i, j} ∪ cond`. The empty conditioning set reads `R(i, j)` directly.
pub fn partial_correlation(
    r: &CorrelationMatrix,
    i: usize,
    j: usize,
    cond: &[usize],
) -> Result<f64, CiError> {
    check_indices(r.n(), i, j, cond)?;
    let rho = if cond.is_empty() {
        r.get(i, j)
    } else {
        let mut nodes = Vec::with_capacity(cond.len() + 2);
        nodes.push(i);
        nodes.push(j);
        nodes.extend_from_slice(cond);
        let sub = r.matrix().principal_submatrix(&nodes).to_dmatrix();
        let eig = SymmetricEigen::new(sub);
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION_NUMBER {
            let mut sorted = nodes.clone();
            sorted.sort_unstable();
            return Err(CiError::SingularSubmatrix {
                nodes: sorted,
                condition,
            });
        }
        // P = V Λ⁻¹ Vᵀ, only the three entries we need.
        let v = &eig.eigenvectors;
        let k = eig.eigenvalues.len();
        let p = |a: usize, b: usize| -> f64 {
            (0..k).map(|c| v[(a, c)] * v[(b, c)] / eig.eigenvalues[c]).sum()
        };
        -p(0, 1) / (p(0, 0) * p(1, 1)).sqrt()
    };
    Ok(rho.clamp(-MAX_ABS_CORRELATION, MAX_ABS_CORRELATION))
}

/// Standard normal CDF.
///
/// Uses the fdlibm `erfc` port from `libm`, accurate to about one ulp over the
/// whole real line, so the tail is not lost to cancellation.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided Fisher-z p-value for a (partial) correlation.
pub fn fisher_z_pvalue(r: f64, n_eff: usize, cond_size: usize) -> Result<f64, CiError> {
    let dof = n_eff as i64 - cond_size as i64 - 3;
    if dof < 1 {
        return Err(CiError::InsufficientSamples { n_eff, cond_size });
    }
    let r = r.clamp(-MAX_ABS_CORRELATION, MAX_ABS_CORRELATION);
    let z = r.atanh();
    let stat = (dof as f64).sqrt() * z.abs();
    // 2·(1 − Φ(s)) = erfc(s/√2)
    Ok(erfc(stat / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

/// Runs one test. The boundary `p = alpha` counts as independent.
pub fn ci_test(
    r: &CorrelationMatrix,
    i: usize,
    j: usize,
    cond: &[usize],
    cfg: &CiConfig,
) -> Result<CiRecord, CiError> {
    let rho = partial_correlation(r, i, j, cond)?;
    let mut cond_sorted = cond.to_vec();
    cond_sorted.sort_unstable();
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let (p_value, independent) = match cfg.exact_threshold {
        Some(t) => {
            let independent = rho.abs() < t;
            // Without enough samples the exact verdict still stands; the
            // recorded p-value is then the degenerate 0/1 value.
            let p = fisher_z_pvalue(rho, cfg.n_eff, cond.len())
                .unwrap_or(if independent { 1.0 } else { 0.0 });
            (p, independent)
        }
        None => {
            let p = fisher_z_pvalue(rho, cfg.n_eff, cond.len())?;
            (p, p >= cfg.alpha)
        }
    };
    Ok(CiRecord {
        i: lo,
        j: hi,
        cond_size: cond_sorted.len(),
        cond: cond_sorted,
        p_value,
        independent,
    })
}

/// Result of an unpaired two-sample t-test on `mean(a) − mean(b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TInterval {
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided p-value of the t statistic.
    pub p_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Welch,
    Pooled,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unpaired t-test with Welch–Satterthwaite degrees of freedom.
///
/// Both samples having zero variance is reported as
/// [`CiError::DegenerateVariance`] rather than an infinite statistic.
pub fn welch_t_interval(a: &[f64], b: &[f64], confidence: f64) -> Result<TInterval, CiError> {
    t_interval(a, b, confidence, TTestKind::Welch)
}

pub fn t_interval(
    a: &[f64],
    b: &[f64],
    confidence: f64,
    kind: TTestKind,
) -> Result<TInterval, CiError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CiError::TooFewSamples);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CiError::InvalidConfig(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (se, df) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (se2.sqrt(), df)
        }
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((sp2 * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
    };
    if se == 0.0 {
        return Err(CiError::DegenerateVariance);
    }
    let mean_diff = ma - mb;
    let t = mean_diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let crit = dist.inverse_cdf(0.5 + confidence / 2.0);
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TInterval {
        mean_diff,
        t,
        df,
        ci_low: mean_diff - crit * se,
        ci_high: mean_diff + crit * se,
        p_value,
    })
}
