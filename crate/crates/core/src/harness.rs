//! Experiment plumbing: confidence-based head pruning masks, accuracy curves
//! from externally labeled outcomes, confidence-vs-accuracy binning and
//! n-gram occurrence statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("score table is empty")]
    EmptyTable,
    #[error("duplicate score row for sequence '{sequence_id}', head {head_index}")]
    DuplicateRow { sequence_id: String, head_index: usize },
    #[error("percentile {0} outside (0, 100)")]
    InvalidPercentile(f64),
    #[error("no outcome for sequence '{1}' at percentile {0}")]
    MissingOutcome(f64, String),
    #[error("no outcomes supplied")]
    EmptyOutcomes,
    #[error("no unpruned (percentile 0) outcomes to normalize by")]
    MissingBaseline,
    #[error("unpruned accuracy is zero; normalized curve undefined")]
    ZeroBaseline,
    #[error("{scores} scores but {flags} flags")]
    LengthMismatch { scores: usize, flags: usize },
    #[error("bin count {bins} invalid for {points} points")]
    InvalidBinCount { bins: usize, points: usize },
    #[error("token {token} in sequence {sequence} exceeds vocabulary size {vocab}")]
    TokenOutOfRange { sequence: usize, token: u32, vocab: u32 },
    #[error("n-gram length {n} must satisfy 1 <= n < ell = {ell}")]
    InvalidNgram { n: usize, ell: usize },
    #[error("no usable sequences in {0} dataset")]
    EmptyDataset(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub sequence_id: String,
    pub head_index: usize,
    pub r_score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadScoreTable {
    rows: Vec<HeadScore>,
}

impl HeadScoreTable {
    pub fn new(rows: Vec<HeadScore>) -> Result<Self, HarnessError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((r.sequence_id.as_str(), r.head_index)) {
                return Err(HarnessError::DuplicateRow {
                    sequence_id: r.sequence_id.clone(),
                    head_index: r.head_index,
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[HeadScore] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sequence ids in ascending order.
    pub fn sequences(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.sequence_id.as_str()).collect()
    }
}

/// Nearest-rank percentiles of all scores: the `⌈p·N/100⌉`-th smallest.
pub fn percentile_thresholds(table: &HeadScoreTable, percentiles: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    let mut sorted: Vec<f64> = table.rows.iter().map(|r| r.r_score).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    percentiles
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p < 100.0) {
                return Err(HarnessError::InvalidPercentile(p));
            }
            let rank = ((p * n as f64 / 100.0).ceil() as usize).clamp(1, n);
            Ok(sorted[rank - 1])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneOrder {
    /// Prune heads scoring below the threshold.
    #[default]
    Asc,
    /// Prune heads scoring above it (reverse-order control).
    Desc,
}

impl fmt::Display for PruneOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneOrder::Asc => "asc",
            PruneOrder::Desc => "desc",
        })
    }
}

impl FromStr for PruneOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => Ok(PruneOrder::Asc),
            "desc" | "descending" => Ok(PruneOrder::Desc),
            other => Err(format!("unknown order '{other}' (expected asc or desc)")),
        }
    }
}

/// Heads to prune per sequence at one threshold. Every sequence of the table
/// has an entry, possibly empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneMaskSet {
    pub threshold: f64,
    pub order: PruneOrder,
    pub masks: BTreeMap<String, Vec<usize>>,
}

impl PruneMaskSet {
    pub fn pruned_count(&self) -> usize {
        self.masks.values().map(Vec::len).sum()
    }
}

pub fn prune_masks(table: &HeadScoreTable, threshold: f64, order: PruneOrder) -> PruneMaskSet {
    let mut masks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in &table.rows {
        let entry = masks.entry(r.sequence_id.clone()).or_default();
        let prune = match order {
            PruneOrder::Asc => r.r_score < threshold,
            PruneOrder::Desc => r.r_score > threshold,
        };
        if prune {
            entry.push(r.head_index);
        }
    }
    for heads in masks.values_mut() {
        heads.sort_unstable();
    }
    PruneMaskSet {
        threshold,
        order,
        masks,
    }
}

/// Legality of one generated continuation with heads pruned at `percentile`
/// (0 means nothing pruned).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub percentile: f64,
    pub sequence_id: String,
    pub legal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub percentile: f64,
    pub accuracy: f64,
    /// `accuracy` divided by the unpruned accuracy.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub points: Vec<CurvePoint>,
    /// Trapezoid area under the normalized curve, in percentile units.
    pub auc: f64,
    /// Same area under the raw accuracies.
    pub auc_raw: f64,
    /// `auc` divided by the covered percentile range.
    pub auc_per_range: f64,
}

/// Accuracy per pruning percentile, normalized by the percentile-0 accuracy.
/// Every sequence seen anywhere must have an outcome at every percentile.
pub fn accuracy_curve(outcomes: &[Outcome]) -> Result<AccuracyCurve, HarnessError> {
    if outcomes.is_empty() {
        return Err(HarnessError::EmptyOutcomes);
    }
    let sequences: BTreeSet<&str> = outcomes.iter().map(|o| o.sequence_id.as_str()).collect();
    let mut by_pct: Vec<(f64, BTreeMap<&str, bool>)> = Vec::new();
    for o in outcomes {
        match by_pct.iter_mut().find(|(p, _)| *p == o.percentile) {
            Some((_, m)) => {
                m.insert(&o.sequence_id, o.legal);
            }
            None => by_pct.push((o.percentile, BTreeMap::from([(o.sequence_id.as_str(), o.legal)]))),
        }
    }
    by_pct.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut raw = Vec::with_capacity(by_pct.len());
    for (p, m) in &by_pct {
        if let Some(missing) = sequences.iter().find(|s| !m.contains_key(*s)) {
            return Err(HarnessError::MissingOutcome(*p, missing.to_string()));
        }
        let legal = m.values().filter(|&&l| l).count();
        raw.push((*p, legal as f64 / m.len() as f64));
    }
    let baseline = raw
        .iter()
        .find(|(p, _)| *p == 0.0)
        .map(|&(_, a)| a)
        .ok_or(HarnessError::MissingBaseline)?;
    if baseline == 0.0 {
        return Err(HarnessError::ZeroBaseline);
    }
    let points: Vec<CurvePoint> = raw
        .iter()
        .map(|&(percentile, accuracy)| CurvePoint {
            percentile,
            accuracy,
            normalized: accuracy / baseline,
        })
        .collect();
    let trapezoid = |f: fn(&CurvePoint) -> f64| -> f64 {
        points
            .windows(2)
            .map(|w| (w[1].percentile - w[0].percentile) * (f(&w[0]) + f(&w[1])) / 2.0)
            .sum()
    };
    let auc = trapezoid(|c| c.normalized);
    let auc_raw = trapezoid(|c| c.accuracy);
    let range = points.last().map_or(0.0, |c| c.percentile) - points[0].percentile;
    Ok(AccuracyCurve {
        auc_per_range: if range > 0.0 { auc / range } else { 0.0 },
        points,
        auc,
        auc_raw,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBin {
    pub r_low: f64,
    pub r_high: f64,
    pub mean_accuracy: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedAccuracy {
    pub bins: Vec<AccuracyBin>,
    pub overall_accuracy: f64,
}

/// Equal-count bins over ascending score. When the points do not divide
/// evenly the earlier bins take one extra point each; ties keep input order.
pub fn confidence_accuracy_bins(
    scores: &[f64],
    flags: &[bool],
    bin_count: usize,
) -> Result<BinnedAccuracy, HarnessError> {
    if scores.len() != flags.len() {
        return Err(HarnessError::LengthMismatch {
            scores: scores.len(),
            flags: flags.len(),
        });
    }
    let n = scores.len();
    if n == 0 || bin_count == 0 || bin_count > n {
        return Err(HarnessError::InvalidBinCount {
            bins: bin_count,
            points: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (base, extra) = (n / bin_count, n % bin_count);
    let mut bins = Vec::with_capacity(bin_count);
    let mut start = 0;
    for b in 0..bin_count {
        let size = base + usize::from(b < extra);
        let members = &order[start..start + size];
        let legal = members.iter().filter(|&&i| flags[i]).count();
        bins.push(AccuracyBin {
            r_low: scores[members[0]],
            r_high: scores[members[size - 1]],
            mean_accuracy: legal as f64 / size as f64,
            count: size,
        });
        start += size;
    }
    Ok(BinnedAccuracy {
        bins,
        overall_accuracy: flags.iter().filter(|&&f| f).count() as f64 / n as f64,
    })
}

/// Token sequences over `0..vocab_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    vocab_size: u32,
    sequences: Vec<Vec<u32>>,
}

impl SequenceDataset {
    pub fn new(vocab_size: u32, sequences: Vec<Vec<u32>>) -> Result<Self, HarnessError> {
        for (sequence, seq) in sequences.iter().enumerate() {
            if let Some(&token) = seq.iter().find(|&&t| t >= vocab_size) {
                return Err(HarnessError::TokenOutOfRange {
                    sequence,
                    token,
                    vocab: vocab_size,
                });
            }
        }
        Ok(Self {
            vocab_size,
            sequences,
        })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn sequences(&self) -> &[Vec<u32>] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NgramOptions {
    /// Count a match only at the end of the trimmed training sequence.
    pub anchor_end: bool,
    /// The probe set is the training set; probe `i` is not matched against
    /// training sequence `i` and the divisor drops by one.
    pub exclude_self: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NgramReport {
    pub mean: f64,
    pub probes_used: usize,
    pub train_used: usize,
    /// Indices of sequences shorter than `ell`.
    pub skipped_probe: Vec<usize>,
    pub skipped_train: Vec<usize>,
}

fn count_occurrences(hay: &[u32], gram: &[u32], anchor_end: bool) -> u64 {
    if anchor_end {
        u64::from(hay.ends_with(gram))
    } else {
        hay.windows(gram.len()).filter(|w| *w == gram).count() as u64
    }
}

/// Sequences trimmed to `ell` with their indices, plus the indices too short.
fn trimmed(d: &SequenceDataset, ell: usize) -> (Vec<(usize, &[u32])>, Vec<usize>) {
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    for (i, s) in d.sequences.iter().enumerate() {
        if s.len() >= ell {
            used.push((i, &s[..ell]));
        } else {
            skipped.push(i);
        }
    }
    (used, skipped)
}

/// Mean over probes of (occurrences of the probe's final `n`-gram across the
/// training sequences, all trimmed to `ell`) / (number of training sequences).
pub fn ngram_occurrence_mean(
    train: &SequenceDataset,
    probe: &SequenceDataset,
    ell: usize,
    n: usize,
    opts: NgramOptions,
) -> Result<NgramReport, HarnessError> {
    if n == 0 || n >= ell {
        return Err(HarnessError::InvalidNgram { n, ell });
    }
    let (train_used, skipped_train) = trimmed(train, ell);
    let (probe_used, skipped_probe) = trimmed(probe, ell);
    let divisor = train_used.len().saturating_sub(usize::from(opts.exclude_self));
    if divisor == 0 {
        return Err(HarnessError::EmptyDataset("train"));
    }
    if probe_used.is_empty() {
        return Err(HarnessError::EmptyDataset("probe"));
    }
    let total: u64 = probe_used
        .iter()
        .map(|&(pi, p)| {
            let gram = &p[ell - n..];
            train_used
                .iter()
                .filter(|&&(ti, _)| !(opts.exclude_self && ti == pi))
                .map(|&(_, t)| count_occurrences(t, gram, opts.anchor_end))
                .sum::<u64>()
        })
        .sum();
    Ok(NgramReport {
        mean: total as f64 / (divisor as f64 * probe_used.len() as f64),
        probes_used: probe_used.len(),
        train_used: train_used.len(),
        skipped_probe,
        skipped_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[(&str, usize, f64)]) -> HeadScoreTable {
        HeadScoreTable::new(
            rows.iter()
                .map(|&(s, h, r)| HeadScore {
                    sequence_id: s.to_string(),
                    head_index: h,
                    r_score: r,
                })
                .collect(),
        )
        .unwrap()
    }

    fn outcome(p: f64, s: &str, legal: bool) -> Outcome {
        Outcome {
            percentile: p,
            sequence_id: s.to_string(),
            legal,
        }
    }

    fn ds(seqs: &[&[u32]]) -> SequenceDataset {
        SequenceDataset::new(30, seqs.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn percentile_examples() {
        let t = table(&[("a", 0, 0.3), ("a", 1, 0.1), ("b", 0, 0.4), ("b", 1, 0.2)]);
        assert_eq!(percentile_thresholds(&t, &[50.0]).unwrap(), vec![0.2]);
        assert_eq!(percentile_thresholds(&t, &[1e-9]).unwrap(), vec![0.1]);
        assert_eq!(percentile_thresholds(&t, &[75.0, 99.0]).unwrap(), vec![0.3, 0.4]);
        let flat = table(&[("a", 0, 0.5), ("a", 1, 0.5), ("b", 0, 0.5)]);
        assert_eq!(percentile_thresholds(&flat, &[10.0, 50.0, 90.0]).unwrap(), vec![0.5; 3]);
        assert_eq!(
            percentile_thresholds(&HeadScoreTable::default(), &[50.0]),
            Err(HarnessError::EmptyTable)
        );
        assert_eq!(percentile_thresholds(&t, &[100.0]), Err(HarnessError::InvalidPercentile(100.0)));
    }

    #[test]
    fn decile_ranks_are_exact() {
        // 30·10/100 is exactly 3; 0.3·10 is not
        let rows: Vec<(String, usize, f64)> = (0..10).map(|h| ("s".to_string(), h, h as f64)).collect();
        let t = table(&rows.iter().map(|(s, h, r)| (s.as_str(), *h, *r)).collect::<Vec<_>>());
        let pct: Vec<f64> = (1..10).map(|k| 10.0 * k as f64).collect();
        assert_eq!(
            percentile_thresholds(&t, &pct).unwrap(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        );
    }

    #[test]
    fn duplicate_rows_rejected() {
        let rows = vec![
            HeadScore { sequence_id: "a".into(), head_index: 0, r_score: 0.1 },
            HeadScore { sequence_id: "a".into(), head_index: 0, r_score: 0.2 },
        ];
        assert!(matches!(HeadScoreTable::new(rows), Err(HarnessError::DuplicateRow { .. })));
    }

    #[test]
    fn prune_mask_examples() {
        let t = table(&[("s", 0, 0.1), ("s", 1, 0.9), ("u", 0, 0.5)]);
        let below = prune_masks(&t, 0.0, PruneOrder::Asc);
        assert_eq!(below.pruned_count(), 0);
        assert_eq!(below.masks.len(), 2);
        let asc = prune_masks(&t, 0.5, PruneOrder::Asc);
        assert_eq!(asc.masks["s"], vec![0]);
        assert!(asc.masks["u"].is_empty());
        let desc = prune_masks(&t, 0.5, PruneOrder::Desc);
        assert_eq!(desc.masks["s"], vec![1]);
    }

    #[test]
    fn accuracy_curve_examples() {
        let flat = accuracy_curve(&[
            outcome(0.0, "a", true),
            outcome(50.0, "a", true),
            outcome(100.0, "a", true),
        ])
        .unwrap();
        assert!(flat.points.iter().all(|p| p.normalized == 1.0));
        assert_eq!(flat.auc, 100.0);
        assert_eq!(flat.auc_per_range, 1.0);

        let halved = accuracy_curve(&[
            outcome(0.0, "a", true),
            outcome(0.0, "b", true),
            outcome(100.0, "a", true),
            outcome(100.0, "b", false),
        ])
        .unwrap();
        assert_eq!(halved.auc, 75.0);
        assert_eq!(halved.auc_per_range, 0.75);

        assert_eq!(accuracy_curve(&[]), Err(HarnessError::EmptyOutcomes));
        assert_eq!(
            accuracy_curve(&[outcome(0.0, "a", true), outcome(10.0, "b", true)]),
            Err(HarnessError::MissingOutcome(0.0, "b".into()))
        );
        assert_eq!(
            accuracy_curve(&[outcome(10.0, "a", true)]),
            Err(HarnessError::MissingBaseline)
        );
    }

    #[test]
    fn normalization_halves_raw_curve() {
        let c = accuracy_curve(&[
            outcome(0.0, "a", true),
            outcome(0.0, "b", false),
            outcome(10.0, "a", false),
            outcome(10.0, "b", false),
        ])
        .unwrap();
        assert_eq!(c.points[0].accuracy, 0.5);
        assert_eq!(c.points[0].normalized, 1.0);
        assert_eq!(c.auc, 5.0);
        assert_eq!(c.auc_raw, 2.5);
    }

    #[test]
    fn binning_examples() {
        let b = confidence_accuracy_bins(&[0.3, 0.1, 0.2], &[true; 3], 2).unwrap();
        assert!(b.bins.iter().all(|x| x.mean_accuracy == 1.0));
        let ranked = confidence_accuracy_bins(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true], 2).unwrap();
        assert!(ranked.bins[0].mean_accuracy < ranked.bins[1].mean_accuracy);
        assert_eq!((ranked.bins[1].r_low, ranked.bins[1].r_high), (0.8, 0.9));
        assert_eq!(ranked.overall_accuracy, 0.5);
        let scores: Vec<f64> = (0..10).map(f64::from).collect();
        let ten = confidence_accuracy_bins(&scores, &[true; 10], 3).unwrap();
        assert_eq!(ten.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert_eq!(
            confidence_accuracy_bins(&[0.1], &[true, false], 1),
            Err(HarnessError::LengthMismatch { scores: 1, flags: 2 })
        );
    }

    #[test]
    fn ngram_examples() {
        let (a, b, c, x) = (0, 1, 2, 3);
        let r = ngram_occurrence_mean(&ds(&[&[a, b, c]]), &ds(&[&[a, b, c]]), 3, 2, NgramOptions::default()).unwrap();
        assert_eq!(r.mean, 1.0);
        let r = ngram_occurrence_mean(&ds(&[&[a, b, c]]), &ds(&[&[c, c, x]]), 3, 2, NgramOptions::default()).unwrap();
        assert_eq!(r.mean, 0.0);
        let r = ngram_occurrence_mean(&ds(&[&[a, a, a]]), &ds(&[&[x, a, a]]), 3, 2, NgramOptions::default()).unwrap();
        assert_eq!(r.mean, 2.0);
        let anchored = NgramOptions { anchor_end: true, ..Default::default() };
        let r = ngram_occurrence_mean(&ds(&[&[a, a, a]]), &ds(&[&[x, a, a]]), 3, 2, anchored).unwrap();
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn ngram_trims_skips_and_excludes_self() {
        let train = ds(&[&[0, 1, 2, 9], &[5, 1, 2], &[1, 2]]);
        let r = ngram_occurrence_mean(&train, &train, 3, 2, NgramOptions::default()).unwrap();
        assert_eq!(r.skipped_train, vec![2]);
        assert_eq!(r.skipped_probe, vec![2]);
        // each probe's gram (1,2) occurs once in each of the 2 used sequences
        assert_eq!(r.mean, 1.0);

        let (a, b, c, x) = (0, 1, 2, 3);
        let train = ds(&[&[a, b, c], &[x, b, c], &[x, x, x]]);
        let r = ngram_occurrence_mean(&train, &train, 3, 2, NgramOptions::default()).unwrap();
        assert_eq!(r.mean, 6.0 / 9.0);
        let own = NgramOptions { exclude_self: true, ..Default::default() };
        let r = ngram_occurrence_mean(&train, &train, 3, 2, own).unwrap();
        assert_eq!(r.mean, 2.0 / 6.0);
        assert_eq!(
            ngram_occurrence_mean(&train, &train, 3, 3, NgramOptions::default()),
            Err(HarnessError::InvalidNgram { n: 3, ell: 3 })
        );
        assert!(SequenceDataset::new(3, vec![vec![0, 3]]).is_err());
    }

    fn dataset_strategy() -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0u32..3, 0..8), 1..8)
    }

    proptest! {
        #[test]
        fn asc_and_desc_partition_non_boundary_heads(
            scores in prop::collection::vec(-2.0f64..2.0, 1..12),
            pick in 0usize..12,
        ) {
            let rows: Vec<HeadScore> = scores.iter().enumerate().map(|(h, &r)| HeadScore {
                sequence_id: format!("s{}", h % 3),
                head_index: h,
                r_score: r,
            }).collect();
            let t = HeadScoreTable::new(rows).unwrap();
            let thr = scores[pick % scores.len()];
            let asc = prune_masks(&t, thr, PruneOrder::Asc);
            let desc = prune_masks(&t, thr, PruneOrder::Desc);
            for r in t.rows() {
                let in_asc = asc.masks[&r.sequence_id].contains(&r.head_index);
                let in_desc = desc.masks[&r.sequence_id].contains(&r.head_index);
                prop_assert_eq!(in_asc || in_desc, r.r_score != thr);
                prop_assert!(!(in_asc && in_desc));
            }
        }

        #[test]
        fn baseline_point_is_one(flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..20)) {
            prop_assume!(flags.iter().any(|f| f.0));
            let mut outcomes = Vec::new();
            for (i, &(base, pruned)) in flags.iter().enumerate() {
                outcomes.push(outcome(0.0, &i.to_string(), base));
                outcomes.push(outcome(30.0, &i.to_string(), pruned));
            }
            let c = accuracy_curve(&outcomes).unwrap();
            prop_assert_eq!(c.points[0].normalized, 1.0);
        }

        #[test]
        fn ngram_mean_ignores_order(train in dataset_strategy(), probe in dataset_strategy()) {
            let (t, p) = (ds_owned(train.clone()), ds_owned(probe.clone()));
            let mut tr = train;
            tr.reverse();
            let mut pr = probe;
            pr.rotate_left(1);
            let a = ngram_occurrence_mean(&t, &p, 3, 2, NgramOptions::default());
            let b = ngram_occurrence_mean(&ds_owned(tr), &ds_owned(pr), 3, 2, NgramOptions::default());
            prop_assert_eq!(a.map(|r| r.mean), b.map(|r| r.mean));
        }

        #[test]
        fn ngram_mean_non_increasing_in_n(train in dataset_strategy(), probe in dataset_strategy()) {
            let (t, p) = (ds_owned(train), ds_owned(probe));
            let means: Vec<f64> = (1..6)
                .filter_map(|n| ngram_occurrence_mean(&t, &p, 6, n, NgramOptions::default()).ok())
                .map(|r| r.mean)
                .collect();
            prop_assert!(means.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    fn ds_owned(seqs: Vec<Vec<u32>>) -> SequenceDataset {
        SequenceDataset::new(3, seqs).unwrap()
    }
}
