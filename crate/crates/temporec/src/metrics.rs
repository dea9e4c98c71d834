//! Top-K ranking metrics for implicit feedback.
//!
//! Input items are removed from the candidate pool before ranking, score
//! ties break toward the lower item index, and per-user results aggregate
//! by plain averaging. Recall normalizes by `min(K, |targets|)`; the
//! recency-weighted hit sum is reported both raw (range `[0, K]`) and
//! normalized by the same denominator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::split::EvalSplit;

/// Top `k` item indices by descending score, ties broken by ascending item
/// index. Items listed in `exclude` (sorted ascending) never appear.
pub fn rank_top_k(scores: &[f64], k: usize, exclude: &[usize]) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::ContractViolation(
            "ranking depth K must be >= 1".into(),
        ));
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score for item {pos}")));
    }
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|i| exclude.binary_search(i).is_err())
        .collect();
    candidates.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores checked finite")
            .then(a.cmp(&b))
    });
    candidates.truncate(k);
    Ok(candidates)
}

/// Metrics for one user's ranked list against held-out targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub hits: usize,
    pub recall: f64,
    pub precision: f64,
    pub recency: f64,
    pub recency_normalized: f64,
}

/// Score a ranked list. `targets` must be sorted ascending and nonempty;
/// `weights` is the per-item recency weight vector over the full catalog.
pub fn user_metrics(
    ranked: &[usize],
    targets: &[usize],
    weights: &[f64],
    k: usize,
) -> Result<UserMetrics> {
    if targets.is_empty() {
        return Err(Error::ContractViolation(
            "metrics require at least one target item".into(),
        ));
    }
    if k == 0 {
        return Err(Error::ContractViolation(
            "ranking depth K must be >= 1".into(),
        ));
    }
    let mut hits = 0usize;
    let mut recency = 0.0;
    for &item in ranked.iter().take(k) {
        if targets.binary_search(&item).is_ok() {
            hits += 1;
            recency += weights[item];
        }
    }
    let denom = k.min(targets.len()) as f64;
    Ok(UserMetrics {
        hits,
        recall: hits as f64 / denom,
        precision: hits as f64 / k as f64,
        recency,
        recency_normalized: recency / denom,
    })
}

/// Mean metrics over the evaluated user population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub n_users: usize,
    pub recall: f64,
    pub precision: f64,
    pub recency: f64,
    pub recency_normalized: f64,
}

#[derive(Debug, Default, Clone)]
pub struct MetricAccumulator {
    n: usize,
    recall: f64,
    precision: f64,
    recency: f64,
    recency_normalized: f64,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, m: &UserMetrics) {
        self.n += 1;
        self.recall += m.recall;
        self.precision += m.precision;
        self.recency += m.recency;
        self.recency_normalized += m.recency_normalized;
    }

    pub fn finish(self) -> Result<MetricSummary> {
        if self.n == 0 {
            return Err(Error::EmptySplit("no users were evaluated".into()));
        }
        let n = self.n as f64;
        Ok(MetricSummary {
            n_users: self.n,
            recall: self.recall / n,
            precision: self.precision / n,
            recency: self.recency / n,
            recency_normalized: self.recency_normalized / n,
        })
    }
}

/// Anything that can score the full catalog for a user given their input
/// items (sorted ascending).
pub trait ScoreProvider {
    fn n_items(&self) -> usize;
    fn score(&self, input_items: &[usize]) -> Result<Vec<f64>>;
}

/// One evaluation result at a single ranking depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KReport {
    pub k: usize,
    pub summary: MetricSummary,
}

/// Evaluate a scorer over every user of a split at each requested depth.
/// Users are visited in split order (ascending user index), so aggregate
/// sums are reproducible.
pub fn evaluate_split(
    provider: &dyn ScoreProvider,
    split: &EvalSplit,
    ks: &[usize],
    weights: &[f64],
) -> Result<Vec<KReport>> {
    if ks.is_empty() {
        return Err(Error::InvalidConfig("no ranking depths requested".into()));
    }
    if weights.len() != provider.n_items() {
        return Err(Error::DimensionMismatch {
            expected: provider.n_items(),
            got: weights.len(),
        });
    }
    let max_k = *ks.iter().max().expect("nonempty");
    let mut accs: Vec<MetricAccumulator> = ks.iter().map(|_| MetricAccumulator::new()).collect();
    for holdout in &split.users {
        let inputs = holdout.input_items();
        let targets = holdout.target_items();
        let scores = provider.score(&inputs)?;
        if scores.len() != provider.n_items() {
            return Err(Error::DimensionMismatch {
                expected: provider.n_items(),
                got: scores.len(),
            });
        }
        let ranked = rank_top_k(&scores, max_k, &inputs)?;
        for (acc, &k) in accs.iter_mut().zip(ks) {
            acc.add(&user_metrics(&ranked, &targets, weights, k)?);
        }
    }
    accs.into_iter()
        .zip(ks)
        .map(|(acc, &k)| {
            Ok(KReport {
                k,
                summary: acc.finish()?,
            })
        })
        .collect()
}

/// Serializable evaluation record for one protocol and depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub protocol: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_users: usize,
    pub recall: f64,
    pub precision: f64,
    pub recency: f64,
    pub recency_normalized: f64,
}

impl MetricReport {
    pub fn new(protocol: &str, report: &KReport) -> Self {
        MetricReport {
            protocol: protocol.to_string(),
            k: report.k,
            n_users: report.summary.n_users,
            recall: report.summary.recall,
            precision: report.summary.precision,
            recency: report.summary.recency,
            recency_normalized: report.summary.recency_normalized,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_masks_inputs_and_orders_by_score() {
        let scores = [0.9, 0.1, 0.8, 0.7, 0.3, 0.75];
        let ranked = rank_top_k(&scores, 3, &[0]).unwrap();
        assert_eq!(ranked, vec![2, 5, 3]);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        let scores = [0.5, 0.5, 0.5, 0.2];
        assert_eq!(rank_top_k(&scores, 2, &[]).unwrap(), vec![0, 1]);
        assert_eq!(rank_top_k(&scores, 4, &[]).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn ranking_rejects_nan_scores() {
        let scores = [0.1, f64::NAN];
        assert!(rank_top_k(&scores, 1, &[]).is_err());
    }

    #[test]
    fn metrics_hand_computed() {
        // ranked [2, 5, 3], targets {3, 5}: both hit.
        let weights = [1.0, 0.04, 0.3, 1.0, 0.55, 0.3];
        let m = user_metrics(&[2, 5, 3], &[3, 5], &weights, 3).unwrap();
        assert_eq!(m.hits, 2);
        assert!((m.recall - 1.0).abs() < 1e-15); // 2 / min(3, 2)
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recency - 1.3).abs() < 1e-15); // w[5] + w[3]
        assert!((m.recency_normalized - 0.65).abs() < 1e-15);
    }

    #[test]
    fn recall_normalizes_by_min_of_k_and_targets() {
        let weights = [1.0; 10];
        // |targets| = 3 < K = 5, 2 hits
        let m = user_metrics(&[0, 1, 2, 3, 4], &[1, 3, 9], &weights, 5).unwrap();
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.precision - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn raw_recency_reaches_k_when_all_hits_are_new() {
        let weights = [1.0; 4];
        let m = user_metrics(&[0, 1, 2], &[0, 1, 2, 3], &weights, 3).unwrap();
        assert_eq!(m.recency, 3.0);
        assert_eq!(m.recency_normalized, 1.0);
    }

    #[test]
    fn empty_targets_rejected() {
        let weights = [1.0; 4];
        assert!(user_metrics(&[0, 1], &[], &weights, 2).is_err());
    }

    #[test]
    fn accumulator_averages() {
        let weights = [1.0, 0.5];
        let mut acc = MetricAccumulator::new();
        acc.add(&user_metrics(&[0], &[0], &weights, 1).unwrap()); // recall 1, recency 1
        acc.add(&user_metrics(&[0], &[1], &weights, 1).unwrap()); // recall 0, recency 0
        let s = acc.finish().unwrap();
        assert_eq!(s.n_users, 2);
        assert!((s.recall - 0.5).abs() < 1e-15);
        assert!((s.recency - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_population_is_error() {
        assert!(MetricAccumulator::new().finish().is_err());
    }

    struct ConstantScores(Vec<f64>);

    impl ScoreProvider for ConstantScores {
        fn n_items(&self) -> usize {
            self.0.len()
        }
        fn score(&self, _inputs: &[usize]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn split_evaluation_aggregates_over_users() {
        use crate::split::{EvalSplit, Exclusions, Phase, Protocol, UserHoldout};
        let split = EvalSplit {
            phase: Phase::Development,
            protocol: Protocol::Traditional,
            cutoff_time: None,
            holdout_fraction: Some(0.2),
            users: vec![
                UserHoldout {
                    user: 0,
                    inputs: vec![(1, 0)],
                    targets: vec![(2, 1)],
                    withheld: vec![],
                },
                UserHoldout {
                    user: 1,
                    inputs: vec![(1, 1)],
                    targets: vec![(2, 3)],
                    withheld: vec![],
                },
            ],
            exclusions: Exclusions::default(),
        };
        // scores favor items 1 then 2 then 3; item 0 masked for user 0,
        // item 1 masked for user 1
        let provider = ConstantScores(vec![0.4, 0.9, 0.8, 0.1]);
        let weights = vec![1.0, 0.5, 1.0, 0.25];
        let reports = evaluate_split(&provider, &split, &[2], &weights).unwrap();
        let s = reports[0].summary;
        // user 0 ranks [1, 2], hits target 1 -> recall 1, recency w[1]=0.5
        // user 1 ranks [2, 0], misses target 3 -> recall 0
        assert_eq!(s.n_users, 2);
        assert!((s.recall - 0.5).abs() < 1e-15);
        assert!((s.recency - 0.25).abs() < 1e-15);

        let report = MetricReport::new("traditional", &reports[0]);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"protocol\":\"traditional\""));
        assert!(json.contains("\"K\":2"));
    }
}
