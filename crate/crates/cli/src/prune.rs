use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attncausal::harness::{
    accuracy_curve, percentile_thresholds, prune_masks, AccuracyCurve, HeadScore, HeadScoreTable, Outcome,
    PruneMaskSet,
};
use clap::Args;
use serde::{de::DeserializeOwned, Serialize};

use crate::{parse_list, to_json_pretty, write_atomic, GlobalOpts, RunReport};

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// CSV with columns sequence_id, head_index, r_score.
    #[arg(long)]
    pub scores: PathBuf,
    /// CSV with columns percentile, sequence_id, legal; enables the accuracy curve.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Comma-separated pruning percentiles in (0, 100).
    #[arg(long, default_value = "10,20,30,40,50,60,70,80,90")]
    pub percentiles: String,
}

#[derive(Debug, Serialize)]
pub struct MaskEntry {
    pub percentile: f64,
    pub pruned: usize,
    #[serde(flatten)]
    pub set: PruneMaskSet,
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.with_context(|| path.display().to_string()))
        .collect()
}

pub fn masks(table: &HeadScoreTable, percentiles: &[f64], opts: &GlobalOpts) -> Result<Vec<MaskEntry>> {
    let thresholds = percentile_thresholds(table, percentiles)?;
    Ok(percentiles
        .iter()
        .zip(thresholds)
        .map(|(&percentile, t)| {
            let set = prune_masks(table, t, opts.order);
            MaskEntry {
                percentile,
                pruned: set.pruned_count(),
                set,
            }
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    auc: f64,
    auc_raw: f64,
    auc_per_range: f64,
}

/// Writes `<out>/masks.json`, and with outcomes also `<out>/curve.csv` and
/// `<out>/curve.json` (areas under the normalized and raw curves).
pub fn cmd_prune(opts: &GlobalOpts, args: &PruneArgs) -> Result<RunReport> {
    let rows: Vec<HeadScore> = read_csv(&args.scores)?;
    let table = HeadScoreTable::new(rows).with_context(|| args.scores.display().to_string())?;
    let percentiles: Vec<f64> = parse_list(&args.percentiles)?;
    let mut report = RunReport::default();

    let entries = masks(&table, &percentiles, opts)?;
    let path = opts.out.join("masks.json");
    write_atomic(&path, &to_json_pretty(&entries))?;
    report.written.push(path);

    if let Some(outcomes) = &args.outcomes {
        let rows: Vec<Outcome> = read_csv(outcomes)?;
        let curve: AccuracyCurve = accuracy_curve(&rows).with_context(|| outcomes.display().to_string())?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &curve.points {
            w.serialize(p)?;
        }
        let csv_path = opts.out.join("curve.csv");
        write_atomic(&csv_path, &String::from_utf8(w.into_inner().context("flushing curve")?)?)?;
        let json_path = opts.out.join("curve.json");
        let summary = CurveSummary {
            auc: curve.auc,
            auc_raw: curve.auc_raw,
            auc_per_range: curve.auc_per_range,
        };
        write_atomic(&json_path, &to_json_pretty(&summary))?;
        report.written.extend([csv_path, json_path]);
    }
    Ok(report)
}
