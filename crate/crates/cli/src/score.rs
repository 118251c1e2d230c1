use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attncausal::citest::{TInterval, TTestKind};
use attncausal::confidence::{confidence_score, group_difference, sequence_score, ConfidenceReport, Filter};
use attncausal::harness::{confidence_accuracy_bins, BinnedAccuracy, HeadScore};
use attncausal::io::{trace_from_json, OutcomeLabel};
use attncausal::{learn_structure, DiscoveryResult};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::{bundle_heads, load_bundle, to_json_pretty, write_atomic, GlobalOpts, RunReport};

/// Bins for the confidence/accuracy table.
pub const ACCURACY_BINS: usize = 5;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Attention bundle JSON files.
    #[arg(required_unless_present = "traces")]
    pub bundles: Vec<PathBuf>,
    /// Saved discovery traces (from `discover`) to score directly.
    #[arg(long = "trace")]
    pub traces: Vec<PathBuf>,
    /// Pooled-variance t-test instead of Welch for the legal/illegal comparison.
    #[arg(long)]
    pub pooled: bool,
}

#[derive(Debug, Serialize)]
pub struct HeadEntry {
    pub head_index: usize,
    pub tests_performed: usize,
    pub scores: BTreeMap<Filter, ConfidenceReport>,
}

#[derive(Debug, Serialize)]
pub struct SequenceSummary {
    pub score: f64,
    pub heads: usize,
    pub degenerate_heads: usize,
}

#[derive(Debug, Serialize)]
pub struct SequenceEntry {
    pub sequence_id: String,
    pub outcome: Option<OutcomeLabel>,
    pub heads: Vec<HeadEntry>,
    pub sequence_scores: BTreeMap<Filter, SequenceSummary>,
}

/// Legal minus illegal sequence scores.
#[derive(Debug, Serialize)]
pub struct GroupComparison {
    pub legal: usize,
    pub illegal: usize,
    pub test: TTestKind,
    pub interval: Option<TInterval>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct TraceEntry {
    pub path: String,
    pub scores: BTreeMap<Filter, ConfidenceReport>,
}

#[derive(Debug, Serialize)]
pub struct ScoreReport {
    pub alpha: f64,
    pub bins: usize,
    pub n_eff: Option<usize>,
    pub filters: Vec<Filter>,
    pub sequences: Vec<SequenceEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceEntry>,
    pub group_difference: BTreeMap<Filter, GroupComparison>,
    /// Fraction legal in equal-count bins of sequence score.
    pub accuracy_bins: BTreeMap<Filter, Option<BinnedAccuracy>>,
}

fn score_bundle(opts: &GlobalOpts, path: &Path) -> (Option<SequenceEntry>, Vec<String>) {
    let bundle = match load_bundle(path) {
        Ok(b) => b,
        Err(e) => return (None, vec![format!("{e:#}")]),
    };
    let (heads, mut failures) = bundle_heads(path, &bundle);
    let mut results: Vec<DiscoveryResult> = Vec::new();
    for (head, a) in heads {
        match opts.ci_config(a.n()).and_then(|cfg| Ok(learn_structure(&a, &cfg)?)) {
            Ok(mut r) => {
                r.head_index = head;
                results.push(r);
            }
            Err(e) => failures.push(format!("{}: head {head}: {e:#}", path.display())),
        }
    }
    if results.is_empty() {
        if failures.is_empty() {
            failures.push(format!("{}: bundle has no heads", path.display()));
        }
        return (None, failures);
    }
    let mut heads: Vec<HeadEntry> = results
        .iter()
        .map(|r| HeadEntry {
            head_index: r.head_index,
            tests_performed: r.trace.tests_performed,
            scores: BTreeMap::new(),
        })
        .collect();
    let mut sequence_scores = BTreeMap::new();
    for filter in opts.filters() {
        match sequence_score(&results, opts.alpha, filter, opts.bins) {
            Ok(s) => {
                for (entry, rep) in heads.iter_mut().zip(s.per_head) {
                    entry.scores.insert(filter, rep);
                }
                sequence_scores.insert(
                    filter,
                    SequenceSummary {
                        score: s.score,
                        heads: s.heads,
                        degenerate_heads: s.degenerate_heads,
                    },
                );
            }
            Err(e) => failures.push(format!("{}: filter {filter}: {e}", path.display())),
        }
    }
    let entry = SequenceEntry {
        sequence_id: bundle.sequence_id,
        outcome: bundle.outcome,
        heads,
        sequence_scores,
    };
    (Some(entry), failures)
}

fn score_trace(opts: &GlobalOpts, path: &Path) -> Result<TraceEntry> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = trace_from_json(&text).with_context(|| path.display().to_string())?;
    let mut scores = BTreeMap::new();
    for filter in opts.filters() {
        scores.insert(filter, confidence_score(&trace, opts.alpha, filter, opts.bins)?);
    }
    Ok(TraceEntry {
        path: path.display().to_string(),
        scores,
    })
}

fn compare(seqs: &[SequenceEntry], filter: Filter, kind: TTestKind) -> GroupComparison {
    let group = |label| -> Vec<f64> {
        seqs.iter()
            .filter(|s| s.outcome == Some(label))
            .filter_map(|s| s.sequence_scores.get(&filter).map(|x| x.score))
            .collect()
    };
    let (legal, illegal) = (group(OutcomeLabel::Legal), group(OutcomeLabel::Illegal));
    let (interval, note) = match group_difference(&legal, &illegal, kind) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    GroupComparison {
        legal: legal.len(),
        illegal: illegal.len(),
        test: kind,
        interval,
        note,
    }
}

fn accuracy_bins(seqs: &[SequenceEntry], filter: Filter) -> Option<BinnedAccuracy> {
    let (scores, flags): (Vec<f64>, Vec<bool>) = seqs
        .iter()
        .filter_map(|s| Some((s.sequence_scores.get(&filter)?.score, s.outcome? == OutcomeLabel::Legal)))
        .unzip();
    confidence_accuracy_bins(&scores, &flags, ACCURACY_BINS).ok()
}

/// Scores every bundle; the report lists sequences in input order.
pub fn build_report(opts: &GlobalOpts, args: &ScoreArgs) -> (ScoreReport, Vec<String>) {
    let scored: Vec<_> = args.bundles.par_iter().map(|p| score_bundle(opts, p)).collect();
    let mut failures = Vec::new();
    let mut sequences = Vec::new();
    for (entry, f) in scored {
        failures.extend(f);
        sequences.extend(entry);
    }
    let mut traces = Vec::new();
    for p in &args.traces {
        match score_trace(opts, p) {
            Ok(t) => traces.push(t),
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    let kind = if args.pooled { TTestKind::Pooled } else { TTestKind::Welch };
    let filters = opts.filters();
    let group_difference = filters.iter().map(|&f| (f, compare(&sequences, f, kind))).collect();
    let accuracy_bins = filters.iter().map(|&f| (f, accuracy_bins(&sequences, f))).collect();
    let report = ScoreReport {
        alpha: opts.alpha,
        bins: opts.bins,
        n_eff: opts.n_eff,
        filters,
        sequences,
        traces,
        group_difference,
        accuracy_bins,
    };
    (report, failures)
}

/// Writes `<out>/score.json` and `<out>/head_scores.csv` (the `--filter` variant).
pub fn cmd_score(opts: &GlobalOpts, args: &ScoreArgs) -> Result<RunReport> {
    let (report, failures) = build_report(opts, args);
    let mut run = RunReport {
        failures,
        ..Default::default()
    };
    let json = opts.out.join("score.json");
    write_atomic(&json, &to_json_pretty(&report))?;
    run.written.push(json);

    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &report.sequences {
        for h in &s.heads {
            if let Some(rep) = h.scores.get(&opts.filter) {
                w.serialize(HeadScore {
                    sequence_id: s.sequence_id.clone(),
                    head_index: h.head_index,
                    r_score: rep.r_score,
                })?;
            }
        }
    }
    let bytes = w.into_inner().context("flushing head score table")?;
    let csv_path = opts.out.join("head_scores.csv");
    write_atomic(&csv_path, &String::from_utf8(bytes)?)?;
    run.written.push(csv_path);
    Ok(run)
}
