//! Separability and stratification statistics.
//!
//! Baseline scores in `[0, 1]` and CCI scores in `[-1, 1]` go through the same
//! code without rescaling.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::MetricsError;

pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const DEFAULT_LOWER_CATCHALL: f64 = 0.1;

/// Scores within this distance of a bin edge count as on the edge.
const EDGE_EPS: f64 = 1e-9;

fn check_classes(positives: &[f64], negatives: &[f64]) -> Result<(), MetricsError> {
    if positives.is_empty() {
        return Err(MetricsError::EmptyClass("positive"));
    }
    if negatives.is_empty() {
        return Err(MetricsError::EmptyClass("negative"));
    }
    Ok(())
}

/// Mann-Whitney AUC: the probability a positive outscores a negative, ties
/// counting one half. Computed from mid-ranks in `O(n log n)`.
pub fn roc_auc(positives: &[f64], negatives: &[f64]) -> Result<f64, MetricsError> {
    check_classes(positives, negatives)?;
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let tied_positives = all[i..=j].iter().filter(|(_, p)| *p).count();
        positive_rank_sum += mid_rank * tied_positives as f64;
        i = j + 1;
    }

    let n_pos = positives.len() as f64;
    let n_neg = negatives.len() as f64;
    let u = positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Items scoring at or above this value are called positive; absent for the origin.
    pub threshold: Option<f64>,
}

/// ROC points from `(0, 0)` to `(1, 1)`, one step per distinct score.
pub fn roc_curve(positives: &[f64], negatives: &[f64]) -> Result<Vec<RocPoint>, MetricsError> {
    check_classes(positives, negatives)?;
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (n_pos, n_neg) = (positives.len() as f64, negatives.len() as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg,
            tpr: tp as f64 / n_pos,
            threshold: Some(threshold),
        });
    }
    Ok(points)
}

/// Trapezoidal area under a polyline of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Median; an even count averages the two middle order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMedians {
    pub c_median: f64,
    pub g_median: f64,
    pub delta: f64,
}

pub fn class_medians(positives: &[f64], negatives: &[f64]) -> Result<ClassMedians, MetricsError> {
    check_classes(positives, negatives)?;
    let c_median = median(positives).expect("non-empty");
    let g_median = median(negatives).expect("non-empty");
    Ok(ClassMedians {
        c_median,
        g_median,
        delta: c_median - g_median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub auc: f64,
    pub c_median: f64,
    pub g_median: f64,
    pub delta: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub roc_points: Vec<RocPoint>,
}

pub fn separability(positives: &[f64], negatives: &[f64]) -> Result<SeparabilityReport, MetricsError> {
    let medians = class_medians(positives, negatives)?;
    Ok(SeparabilityReport {
        auc: roc_auc(positives, negatives)?,
        c_median: medians.c_median,
        g_median: medians.g_median,
        delta: medians.delta,
        n_positive: positives.len(),
        n_negative: negatives.len(),
        roc_points: roc_curve(positives, negatives)?,
    })
}

/// An item and its score, for binning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub score: f64,
}

/// Half-open interval `(lower, upper]`; no lower bound for the catch-all bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreBin {
    pub lower: Option<f64>,
    pub upper: f64,
    pub item_ids: Vec<String>,
}

impl ScoreBin {
    /// Row label in the `CCI ≤ 0.1` / `0.1 < CCI ≤ 0.2` style.
    pub fn label(&self) -> String {
        match self.lower {
            None => format!("CCI ≤ {}", fmt_edge(self.upper)),
            Some(lower) => format!("{} < CCI ≤ {}", fmt_edge(lower), fmt_edge(self.upper)),
        }
    }

    pub fn contains(&self, score: f64) -> bool {
        score <= self.upper + EDGE_EPS && self.lower.is_none_or(|l| score > l + EDGE_EPS)
    }
}

fn fmt_edge(x: f64) -> String {
    let s = x.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{x:.1}")
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Partitions items into a catch-all bin `score ≤ lower_catchall` followed by
/// `(a, a + width]` bins up to at least 1.0 (further if some score exceeds it).
pub fn bin_by_cci(
    items: &[ScoredItem],
    width: f64,
    lower_catchall: f64,
) -> Result<Vec<ScoreBin>, MetricsError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(MetricsError::InvalidWidth(width));
    }
    let max_score = items
        .iter()
        .map(|i| i.score)
        .filter(|s| s.is_finite())
        .fold(1.0f64, f64::max);
    let n_regular = (((max_score - lower_catchall) / width) - EDGE_EPS).ceil().max(0.0) as usize;

    let mut bins = vec![ScoreBin {
        lower: None,
        upper: snap(lower_catchall),
        item_ids: Vec::new(),
    }];
    for k in 0..n_regular {
        bins.push(ScoreBin {
            lower: Some(snap(lower_catchall + k as f64 * width)),
            upper: snap(lower_catchall + (k + 1) as f64 * width),
            item_ids: Vec::new(),
        });
    }

    for item in items {
        // NaN has no ordering; keep it visible in the catch-all rather than dropping it.
        let idx = bins
            .iter()
            .position(|b| item.score <= b.upper + EDGE_EPS)
            .unwrap_or(0);
        bins[idx].item_ids.push(item.item_id.clone());
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub range: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub n_items: usize,
    pub correct_by_model: BTreeMap<String, usize>,
    /// Absent for empty bins.
    pub accuracy_by_model: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratificationTable {
    pub models: Vec<String>,
    pub bins: Vec<AccuracyRow>,
    pub overall: AccuracyRow,
}

impl StratificationTable {
    pub fn total_items(&self) -> usize {
        self.overall.n_items
    }
}

/// Per-bin and overall accuracy for every model seen in `predictions`.
///
/// `predictions` maps item id to model id to whether that model answered correctly.
pub fn stratified_accuracy(
    bins: &[ScoreBin],
    predictions: &BTreeMap<String, BTreeMap<String, bool>>,
) -> Result<StratificationTable, MetricsError> {
    let models: Vec<String> = bins
        .iter()
        .flat_map(|b| &b.item_ids)
        .filter_map(|id| predictions.get(id))
        .flat_map(|m| m.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let tally = |ids: &mut dyn Iterator<Item = &String>| -> Result<(usize, BTreeMap<String, usize>), MetricsError> {
        let mut n = 0;
        let mut correct: BTreeMap<String, usize> = models.iter().map(|m| (m.clone(), 0)).collect();
        for id in ids {
            n += 1;
            let flags = predictions.get(id);
            for model in &models {
                let flag = flags.and_then(|f| f.get(model)).ok_or_else(|| {
                    MetricsError::MissingPrediction {
                        item_id: id.clone(),
                        model: model.clone(),
                    }
                })?;
                if *flag {
                    *correct.get_mut(model).expect("seeded") += 1;
                }
            }
        }
        Ok((n, correct))
    };
    let row = |range: String, lower, upper, n: usize, correct: BTreeMap<String, usize>| {
        let accuracy_by_model = correct
            .iter()
            .map(|(m, &c)| (m.clone(), (n > 0).then(|| c as f64 / n as f64)))
            .collect();
        AccuracyRow {
            range,
            lower,
            upper,
            n_items: n,
            correct_by_model: correct,
            accuracy_by_model,
        }
    };

    let mut rows = Vec::with_capacity(bins.len());
    for bin in bins {
        let (n, correct) = tally(&mut bin.item_ids.iter())?;
        rows.push(row(bin.label(), bin.lower, Some(bin.upper), n, correct));
    }
    let (n, correct) = tally(&mut bins.iter().flat_map(|b| &b.item_ids))?;
    let overall = row("Overall Accuracy".to_owned(), None, None, n, correct);

    Ok(StratificationTable {
        models,
        bins: rows,
        overall,
    })
}

/// Brute-force pairwise AUC; kept public so callers can cross-check [`roc_auc`].
pub fn pairwise_auc(positives: &[f64], negatives: &[f64]) -> Result<f64, MetricsError> {
    check_classes(positives, negatives)?;
    let mut credit = 0.0;
    for &p in positives {
        for &n in negatives {
            credit += match p.partial_cmp(&n) {
                Some(Ordering::Greater) => 1.0,
                Some(Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    Ok(credit / (positives.len() * negatives.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(scores: &[f64]) -> Vec<ScoredItem> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoredItem {
                item_id: format!("i{i}"),
                score,
            })
            .collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3, 0.5], &[0.3, 0.5]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.4], &[0.6, 0.1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[], &[0.1]), Err(MetricsError::EmptyClass("positive")));
        assert_eq!(roc_auc(&[0.1], &[]), Err(MetricsError::EmptyClass("negative")));
    }

    #[test]
    fn curve_examples() {
        let c = roc_curve(&[1.0], &[0.0]).unwrap();
        let xy: Vec<(f64, f64)> = c.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(xy, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);

        let c = roc_curve(&[0.9, 0.8, 0.7], &[0.1, 0.2]).unwrap();
        assert!(c.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));

        let c = roc_curve(&[0.9, 0.4], &[0.6, 0.1]).unwrap();
        assert_eq!(trapezoid_area(&c), 0.75);
    }

    #[test]
    fn tied_scores_collapse_into_one_step() {
        let c = roc_curve(&[0.5, 0.5], &[0.5]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(trapezoid_area(&c), 0.5);
    }

    #[test]
    fn medians() {
        let m = class_medians(&[0.2, 0.8, 0.9], &[0.1, 0.3]).unwrap();
        assert_eq!((m.c_median, m.g_median), (0.8, 0.2));
        assert!((m.delta - 0.6).abs() < 1e-15);
        assert_eq!(class_medians(&[0.5], &[0.5]).unwrap().delta, 0.0);
        let m = class_medians(&[0.836; 7], &[0.063; 4]).unwrap();
        assert_eq!((m.c_median, m.g_median), (0.836, 0.063));
    }

    #[test]
    fn default_bins_match_table_layout() {
        let bins = bin_by_cci(&[], DEFAULT_BIN_WIDTH, DEFAULT_LOWER_CATCHALL).unwrap();
        let labels: Vec<String> = bins.iter().map(ScoreBin::label).collect();
        assert_eq!(labels.len(), 10);
        assert_eq!(labels[0], "CCI ≤ 0.1");
        assert_eq!(labels[1], "0.1 < CCI ≤ 0.2");
        assert_eq!(labels[2], "0.2 < CCI ≤ 0.3");
        assert_eq!(labels[9], "0.9 < CCI ≤ 1.0");
    }

    #[test]
    fn boundaries_and_negatives() {
        let bins = bin_by_cci(&items(&[0.2, -0.4, 0.1, 0.1000001, 1.0, 0.3]), 0.1, 0.1).unwrap();
        assert_eq!(bins[0].item_ids, vec!["i1", "i2"]);
        assert_eq!(bins[1].item_ids, vec!["i0", "i3"]);
        assert_eq!(bins[2].item_ids, vec!["i5"]);
        assert_eq!(bins[9].item_ids, vec!["i4"]);
        // arithmetic noise right at an edge stays in the lower bin
        let noisy = 0.9 - (0.3 + 0.5) / 2.0 - 0.2; // ~0.3 give or take an ulp
        let bins = bin_by_cci(&items(&[noisy]), 0.1, 0.1).unwrap();
        assert_eq!(bins[2].item_ids.len(), 1);
    }

    #[test]
    fn bins_extend_past_one_when_needed() {
        let bins = bin_by_cci(&items(&[1.25]), 0.1, 0.1).unwrap();
        assert_eq!(bins.last().unwrap().upper, 1.3);
        assert_eq!(bins.last().unwrap().item_ids, vec!["i0"]);
        assert!(bin_by_cci(&[], 0.0, 0.1).is_err());
    }

    fn preds(rows: &[(&str, &[(&str, bool)])]) -> BTreeMap<String, BTreeMap<String, bool>> {
        rows.iter()
            .map(|(id, flags)| {
                (
                    id.to_string(),
                    flags.iter().map(|(m, c)| (m.to_string(), *c)).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn hand_counted_accuracy() {
        let bins = vec![
            ScoreBin {
                lower: None,
                upper: 0.1,
                item_ids: vec!["a".into(), "b".into()],
            },
            ScoreBin {
                lower: Some(0.1),
                upper: 0.2,
                item_ids: vec!["c".into(), "d".into(), "e".into()],
            },
            ScoreBin {
                lower: Some(0.2),
                upper: 0.3,
                item_ids: vec![],
            },
        ];
        let p = preds(&[
            ("a", &[("m", true)]),
            ("b", &[("m", false)]),
            ("c", &[("m", true)]),
            ("d", &[("m", true)]),
            ("e", &[("m", true)]),
        ]);
        let t = stratified_accuracy(&bins, &p).unwrap();
        assert_eq!(t.bins[0].accuracy_by_model["m"], Some(0.5));
        assert_eq!(t.bins[1].accuracy_by_model["m"], Some(1.0));
        assert_eq!(t.bins[2].accuracy_by_model["m"], None);
        assert_eq!(t.bins[2].n_items, 0);
        assert_eq!(t.overall.accuracy_by_model["m"], Some(0.8));
    }

    #[test]
    fn missing_prediction() {
        let bins = vec![ScoreBin {
            lower: None,
            upper: 0.1,
            item_ids: vec!["a".into(), "b".into()],
        }];
        let p = preds(&[("a", &[("m", true), ("n", true)]), ("b", &[("m", true)])]);
        assert_eq!(
            stratified_accuracy(&bins, &p),
            Err(MetricsError::MissingPrediction {
                item_id: "b".into(),
                model: "n".into()
            })
        );
    }

    fn quantized() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..=100).prop_map(|x| f64::from(x) / 100.0), 1..40)
    }

    proptest! {
        #[test]
        fn auc_matches_pairs_and_trapezoids(p in quantized(), n in quantized()) {
            let auc = roc_auc(&p, &n).unwrap();
            prop_assert!((auc - pairwise_auc(&p, &n).unwrap()).abs() < 1e-9);
            prop_assert!((auc - trapezoid_area(&roc_curve(&p, &n).unwrap())).abs() < 1e-9);
        }

        #[test]
        fn auc_is_rank_invariant_and_antisymmetric(p in quantized(), n in quantized()) {
            let auc = roc_auc(&p, &n).unwrap();
            let f = |x: &f64| (3.0 * x).exp() - 7.0;
            let pt: Vec<f64> = p.iter().map(f).collect();
            let nt: Vec<f64> = n.iter().map(f).collect();
            prop_assert!((auc - roc_auc(&pt, &nt).unwrap()).abs() < 1e-12);
            prop_assert!((1.0 - auc - roc_auc(&n, &p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn curve_is_monotone(p in quantized(), n in quantized()) {
            let c = roc_curve(&p, &n).unwrap();
            prop_assert_eq!((c[0].fpr, c[0].tpr), (0.0, 0.0));
            let last = c.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in c.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
        }

        #[test]
        fn bins_partition_items(scores in prop::collection::vec(-1.0f64..=1.0, 0..200)) {
            let its = items(&scores);
            let bins = bin_by_cci(&its, 0.1, 0.1).unwrap();
            let total: usize = bins.iter().map(|b| b.item_ids.len()).sum();
            prop_assert_eq!(total, its.len());
            for item in &its {
                let homes = bins.iter().filter(|b| b.item_ids.contains(&item.item_id)).count();
                prop_assert_eq!(homes, 1);
                let bin = bins.iter().find(|b| b.item_ids.contains(&item.item_id)).unwrap();
                prop_assert!(bin.contains(item.score));
            }
        }
    }
}
