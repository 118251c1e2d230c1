//! Synthetic attention bundles with known ground truth.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attnmat::{synthesize_attention, validate_attention, AttentionMatrix, EffectMatrix};
use crate::io::{AttentionBundle, OutcomeLabel};
use crate::matrix::Matrix;
use crate::pag::Pag;
use crate::scmsim::{effect_matrix, observed_effect_matrix, oracle_fci, random_scm, Scm, ScmError, ScmParams};

/// Attempts per head to find a latent model whose observed effect matrix
/// has no negative entry.
pub const MAX_NONNEGATIVE_RESAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("no latent model with a nonnegative observed effect matrix after {MAX_NONNEGATIVE_RESAMPLES} draws")]
    NoNonnegativeModel,
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Attention synthesized exactly from a sparse SCM.
    #[default]
    Clean,
    /// The sparse SCM plus weak edges between every ordered pair, so that
    /// true independences become near-independences with spread p-values.
    Noisy,
    /// I.i.d. uniform row weights, normalized; no causal structure.
    Random,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Clean => "clean",
            SynthKind::Noisy => "noisy",
            SynthKind::Random => "random",
        })
    }
}

impl FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clean" => Ok(SynthKind::Clean),
            "noisy" => Ok(SynthKind::Noisy),
            "random" => Ok(SynthKind::Random),
            other => Err(format!("unknown kind '{other}' (expected clean, noisy or random)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub kind: SynthKind,
    /// Tokens per sequence, latents included.
    pub n: usize,
    pub heads: usize,
    pub density: f64,
    pub latents: usize,
    /// Upper bound of the extra weight added to every cell in `Noisy` mode.
    pub jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: SynthKind::Clean,
            n: 10,
            heads: 4,
            density: 0.25,
            latents: 0,
            jitter: 0.05,
        }
    }
}

/// One bundle plus the ground-truth PAG of each head (absent for random heads).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthItem {
    pub bundle: AttentionBundle,
    pub truth: Vec<Option<Pag>>,
}

/// Adds `U(0, max_weight)` to every strictly-lower cell.
pub fn jitter(scm: &Scm, max_weight: f64, seed: u64) -> Scm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scm.clone();
    for (i, row) in out.g.iter_mut().enumerate() {
        for w in row.iter_mut().take(i) {
            *w += rng.random::<f64>() * max_weight;
        }
    }
    out
}

/// Lower-triangular attention with i.i.d. `U(0, 1)` weights per row, normalized.
pub fn random_attention(n: usize, seed: u64) -> AttentionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        // keep the diagonal away from zero
        let w: Vec<f64> = (0..=i).map(|_| rng.random::<f64>().max(1e-12)).collect();
        let total: f64 = w.iter().sum();
        for (j, x) in w.iter().enumerate() {
            m.set(i, j, x / total);
        }
    }
    validate_attention(m).expect("row-stochastic by construction")
}

fn nonnegative(m: &EffectMatrix) -> bool {
    let n = m.n();
    (0..n).all(|i| (0..n).all(|j| m.get(i, j) >= 0.0))
}

fn structured_head(cfg: &SynthConfig, seed: u64) -> Result<(AttentionMatrix, Pag), SynthError> {
    let params = ScmParams::new(cfg.n, cfg.density).with_latents(cfg.latents);
    if cfg.latents == 0 {
        let scm = random_scm(&params, seed)?;
        let truth = oracle_fci(&scm.dag(), &[]);
        let source = match cfg.kind {
            SynthKind::Noisy => jitter(&scm, cfg.jitter, seed ^ 0x9e37_79b9_7f4a_7c15),
            _ => scm,
        };
        let a = synthesize_attention(&effect_matrix(&source)).expect("nonnegative weights");
        return Ok((a, truth));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_NONNEGATIVE_RESAMPLES {
        let scm = random_scm(&params, rng.random())?;
        let source = match cfg.kind {
            SynthKind::Noisy => jitter(&scm, cfg.jitter, rng.random()),
            _ => scm.clone(),
        };
        let m = observed_effect_matrix(&source)?;
        if nonnegative(&m) {
            let a = synthesize_attention(&m).expect("checked nonnegative");
            return Ok((a, oracle_fci(&scm.dag(), &scm.latents)));
        }
    }
    Err(SynthError::NoNonnegativeModel)
}

/// Structured bundles are labeled legal and random ones illegal, so the
/// scoring pipeline can compare the two groups.
pub fn synth_bundle(cfg: &SynthConfig, seed: u64, sequence_id: &str) -> Result<SynthItem, SynthError> {
    if cfg.heads == 0 {
        return Err(SynthError::InvalidParams("at least one head required".into()));
    }
    if cfg.jitter < 0.0 {
        return Err(SynthError::InvalidParams(format!("jitter must be nonnegative, got {}", cfg.jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head_seeds: Vec<u64> = (0..cfg.heads).map(|_| rng.random()).collect();
    let mut heads = Vec::with_capacity(cfg.heads);
    let mut truth = Vec::with_capacity(cfg.heads);
    for &s in &head_seeds {
        match cfg.kind {
            SynthKind::Random => {
                heads.push(random_attention(cfg.n - cfg.latents, s));
                truth.push(None);
            }
            _ => {
                let (a, t) = structured_head(cfg, s)?;
                heads.push(a);
                truth.push(Some(t));
            }
        }
    }
    let outcome = match cfg.kind {
        SynthKind::Random => OutcomeLabel::Illegal,
        _ => OutcomeLabel::Legal,
    };
    Ok(SynthItem {
        bundle: AttentionBundle::from_heads(sequence_id, &heads, Some(outcome)),
        truth,
    })
}

/// The three-token chain `0 → 1 → 2` with unit weights.
pub fn chain_fixture() -> SynthItem {
    let scm = Scm::chain(3, 1.0);
    let a = synthesize_attention(&effect_matrix(&scm)).expect("chain is nonnegative");
    SynthItem {
        bundle: AttentionBundle::from_heads("chain", &[a], Some(OutcomeLabel::Legal)),
        truth: vec![Some(oracle_fci(&scm.dag(), &[]))],
    }
}
