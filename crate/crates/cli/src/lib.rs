//! Batch front end: discovery, scoring, synthesis, pruning masks and n-gram
//! statistics over files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attncausal::citest::{CiConfig, DEFAULT_EXACT_THRESHOLD};
use attncausal::confidence::{Filter, DEFAULT_BINS};
use attncausal::harness::PruneOrder;
use attncausal::io::AttentionBundle;
use attncausal::AttentionMatrix;
use clap::{Args, Parser, Subcommand};

pub mod discover;
pub mod ngram;
pub mod prune;
pub mod score;
pub mod synth;

#[derive(Debug, Parser)]
#[command(name = "attncausal", version, about = "Causal structure learning from attention matrices")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct GlobalOpts {
    /// Significance level of the CI tests.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub alpha: f64,
    /// Effective sample size for the Fisher z-test. Defaults to the sequence
    /// length (at least 5).
    #[arg(long = "n-eff", global = true)]
    pub n_eff: Option<usize>,
    /// Histogram bins for p-value entropy.
    #[arg(long, global = true, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, global = true, default_value_t = Filter::All)]
    pub filter: Filter,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Decide independence by |partial correlation| < threshold instead of p >= alpha.
    #[arg(long = "exact-ci", global = true)]
    pub exact_ci: bool,
    #[arg(long = "exact-threshold", global = true, default_value_t = DEFAULT_EXACT_THRESHOLD)]
    pub exact_threshold: f64,
    /// n-gram matches count only at the end of training sequences.
    #[arg(long = "anchor-end", global = true)]
    pub anchor_end: bool,
    /// Report all four conditioning-size filters.
    #[arg(long, global = true)]
    pub ablation: bool,
    /// asc prunes low-confidence heads, desc high-confidence ones.
    #[arg(long, global = true, default_value_t = PruneOrder::Asc)]
    pub order: PruneOrder,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            n_eff: None,
            bins: DEFAULT_BINS,
            filter: Filter::All,
            seed: 0,
            exact_ci: false,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            anchor_end: false,
            ablation: false,
            order: PruneOrder::Asc,
            out: PathBuf::from("."),
        }
    }
}

impl GlobalOpts {
    /// CI configuration for a sequence of `n` tokens.
    pub fn ci_config(&self, n: usize) -> Result<CiConfig> {
        let n_eff = self.n_eff.unwrap_or(n.max(5));
        let cfg = if self.exact_ci {
            CiConfig {
                alpha: self.alpha,
                ..CiConfig::exact(self.exact_threshold, n_eff)?
            }
        } else {
            CiConfig::new(self.alpha, n_eff)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filters(&self) -> Vec<Filter> {
        if self.ablation {
            Filter::ALL_FILTERS.to_vec()
        } else {
            vec![self.filter]
        }
    }

    pub fn check(&self) -> Result<()> {
        anyhow::ensure!(self.bins >= 2, "--bins must be at least 2, got {}", self.bins);
        anyhow::ensure!(
            self.alpha > 0.0 && self.alpha < 1.0,
            "--alpha must lie in (0, 1), got {}",
            self.alpha
        );
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn one PAG per head; writes PAG JSON, DOT and CI traces.
    Discover(discover::DiscoverArgs),
    /// Structural confidence per head and per sequence.
    Score(score::ScoreArgs),
    /// Generate synthetic bundles with ground-truth PAGs.
    Synth(synth::SynthArgs),
    /// Percentile pruning masks and accuracy curves.
    Prune(prune::PruneArgs),
    /// n-gram occurrence means between two token datasets.
    Ngram(ngram::NgramArgs),
}

/// Items that failed; the run still writes every successful output.
#[derive(Debug, Default)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn merge(&mut self, other: RunReport) {
        self.written.extend(other.written);
        self.failures.extend(other.failures);
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run(cli: &Cli) -> Result<RunReport> {
    cli.global.check()?;
    fs::create_dir_all(&cli.global.out)
        .with_context(|| format!("creating output directory {}", cli.global.out.display()))?;
    match &cli.command {
        Command::Discover(a) => discover::cmd_discover(&cli.global, a),
        Command::Score(a) => score::cmd_score(&cli.global, a),
        Command::Synth(a) => synth::cmd_synth(&cli.global, a),
        Command::Prune(a) => prune::cmd_prune(&cli.global, a),
        Command::Ngram(a) => ngram::cmd_ngram(&cli.global, a),
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Reduces a sequence id to a safe file stem.
pub fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "_".to_string()
    } else {
        s
    }
}

/// Reads and parses a bundle; errors name the file and the JSON position.
pub fn load_bundle(path: &Path) -> Result<AttentionBundle> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    AttentionBundle::from_json(&text).with_context(|| format!("{}", path.display()))
}

/// Valid heads of a bundle plus one message per invalid head.
pub fn bundle_heads(path: &Path, b: &AttentionBundle) -> (Vec<(usize, AttentionMatrix)>, Vec<String>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (head, res) in b.attention_heads() {
        match res {
            Ok(a) => ok.push((head, a)),
            Err(e) => bad.push(format!("{}: {e}", path.display())),
        }
    }
    (ok, bad)
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad list item '{t}': {e}"))
        })
        .collect()
}
