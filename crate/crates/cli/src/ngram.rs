use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attncausal::harness::{ngram_occurrence_mean, NgramOptions, SequenceDataset};
use clap::Args;
use serde::Serialize;

use crate::{parse_list, write_atomic, GlobalOpts, RunReport};

#[derive(Debug, Args)]
pub struct NgramArgs {
    /// SequenceDataset JSON: {"vocab_size": V, "sequences": [[...], ...]}.
    #[arg(long)]
    pub train: PathBuf,
    /// Probe dataset; omitted means the training set probes itself.
    #[arg(long)]
    pub probe: Option<PathBuf>,
    /// Comma-separated trim lengths.
    #[arg(long)]
    pub ell: String,
    /// Comma-separated n-gram lengths.
    #[arg(long)]
    pub n: String,
    /// The probe sequences are the training sequences; each skips itself.
    #[arg(long = "self-probe")]
    pub self_probe: bool,
}

#[derive(Debug, Serialize)]
struct Row {
    ell: usize,
    n: usize,
    mean: f64,
    probes_used: usize,
    train_used: usize,
    skipped_probe: usize,
    skipped_train: usize,
}

pub fn load_dataset(path: &Path) -> Result<SequenceDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: SequenceDataset = serde_json::from_str(&text).with_context(|| path.display().to_string())?;
    // deserialization skips the token range check
    SequenceDataset::new(raw.vocab_size(), raw.sequences().to_vec()).with_context(|| path.display().to_string())
}

/// Writes `<out>/ngram.csv`, one row per valid (ell, n) pair.
pub fn cmd_ngram(opts: &GlobalOpts, args: &NgramArgs) -> Result<RunReport> {
    let train = load_dataset(&args.train)?;
    let self_probe = args.self_probe || args.probe.is_none();
    let probe = match (&args.probe, self_probe) {
        (Some(p), false) => load_dataset(p)?,
        _ => train.clone(),
    };
    let ells: Vec<usize> = parse_list(&args.ell)?;
    let ns: Vec<usize> = parse_list(&args.n)?;
    let ngram_opts = NgramOptions {
        anchor_end: opts.anchor_end,
        exclude_self: self_probe,
    };
    let mut report = RunReport::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    for &ell in &ells {
        for &n in &ns {
            match ngram_occurrence_mean(&train, &probe, ell, n, ngram_opts) {
                Ok(r) => w.serialize(Row {
                    ell,
                    n,
                    mean: r.mean,
                    probes_used: r.probes_used,
                    train_used: r.train_used,
                    skipped_probe: r.skipped_probe.len(),
                    skipped_train: r.skipped_train.len(),
                })?,
                Err(e) => report.failures.push(format!("ell {ell}, n {n}: {e}")),
            }
        }
    }
    let path = opts.out.join("ngram.csv");
    write_atomic(&path, &String::from_utf8(w.into_inner().context("flushing n-gram table")?)?)?;
    report.written.push(path);
    Ok(report)
}
