//! Classification metrics over probability/label pairs.
//!
//! Precision, recall, and F1 are computed per class and averaged weighted
//! by class support. AUC is the Mann-Whitney rank statistic over the
//! positive-class probability, with tied probabilities receiving their
//! average rank; it is undefined (None, null in JSON) when only one class
//! is present.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub confusion: Confusion,
}

fn ratio(num: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        0.0
    } else {
        num / denom
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// Rank-statistic AUC with average ranks for ties.
pub fn auc(probabilities: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(probabilities.len(), labels.len());
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]));
    let mut ranks = vec![0.0; probabilities.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probabilities[order[j + 1]] == probabilities[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let positive_rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = positive_rank_sum - (positives * (positives + 1)) as f64 / 2.0;
    Some(u / (positives * negatives) as f64)
}

/// Score thresholded predictions (0.5, ties positive) against labels.
pub fn evaluate_predictions(probabilities: &[f64], labels: &[u8]) -> MetricsReport {
    assert_eq!(probabilities.len(), labels.len());
    assert!(!labels.is_empty(), "metrics over an empty set");
    assert!(labels.iter().all(|&l| l <= 1), "labels must be 0 or 1");

    let mut c = Confusion {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (&p, &l) in probabilities.iter().zip(labels) {
        let predicted = u8::from(p >= 0.5);
        match (predicted, l) {
            (1, 1) => c.true_positive += 1,
            (1, 0) => c.false_positive += 1,
            (0, 0) => c.true_negative += 1,
            (0, 1) => c.false_negative += 1,
            _ => unreachable!(),
        }
    }

    let (tp, fp, tn, fal_n) = (
        c.true_positive as f64,
        c.false_positive as f64,
        c.true_negative as f64,
        c.false_negative as f64,
    );
    let total = c.total() as f64;
    let support_pos = tp + fal_n;
    let support_neg = tn + fp;

    let precision_pos = ratio(tp, tp + fp);
    let recall_pos = ratio(tp, support_pos);
    let precision_neg = ratio(tn, tn + fal_n);
    let recall_neg = ratio(tn, support_neg);

    let weighted = |pos: f64, neg: f64| (support_pos * pos + support_neg * neg) / total;

    MetricsReport {
        accuracy: (tp + tn) / total,
        precision: weighted(precision_pos, precision_neg),
        recall: weighted(recall_pos, recall_neg),
        f1: weighted(
            f1_of(precision_pos, recall_pos),
            f1_of(precision_neg, recall_neg),
        ),
        auc: auc(probabilities, labels),
        confusion: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every positive/negative pair compared directly, ties worth half.
    fn auc_oracle(probabilities: &[f64], labels: &[u8]) -> Option<f64> {
        let mut pairs = 0usize;
        let mut score = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if li != 1 {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj != 0 {
                    continue;
                }
                pairs += 1;
                if probabilities[i] > probabilities[j] {
                    score += 1.0;
                } else if probabilities[i] == probabilities[j] {
                    score += 0.5;
                }
            }
        }
        if pairs == 0 {
            None
        } else {
            Some(score / pairs as f64)
        }
    }

    #[test]
    fn three_sample_report_matches_hand_computation() {
        let probs = [0.9, 0.2, 0.8];
        let labels = [1, 0, 0];
        let r = evaluate_predictions(&probs, &labels);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.auc, Some(1.0));
        assert_eq!(
            r.confusion,
            Confusion {
                true_positive: 1,
                false_positive: 1,
                true_negative: 1,
                false_negative: 0,
            }
        );
        assert_eq!(r.confusion.total(), 3);
    }

    #[test]
    fn rank_auc_agrees_with_all_pairs_oracle() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(5..60);
            let probs: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(0..=10) as f64) / 10.0)
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            let fast = auc(&probs, &labels);
            let slow = auc_oracle(&probs, &labels);
            match (fast, slow) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-12, "seed {}: {} vs {}", seed, a, b)
                }
                other => panic!("seed {}: {:?}", seed, other),
            }
        }
    }

    #[test]
    fn perfect_and_inverted_separation_hit_the_extremes() {
        let labels = [1, 1, 0, 0];
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &labels), Some(1.0));
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels), Some(0.0));
    }

    #[test]
    fn single_class_sets_have_no_auc() {
        assert_eq!(auc(&[0.3, 0.7], &[1, 1]), None);
        assert_eq!(auc(&[0.3, 0.7], &[0, 0]), None);
        let r = evaluate_predictions(&[0.9, 0.8], &[1, 1]);
        assert_eq!(r.auc, None);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn random_predictor_sits_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let probs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let a = auc(&probs, &labels).unwrap();
        assert!((0.47..=0.53).contains(&a), "auc {}", a);
    }

    #[test]
    fn all_metrics_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(1..40);
            let probs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            let r = evaluate_predictions(&probs, &labels);
            for v in [r.accuracy, r.precision, r.recall, r.f1] {
                assert!((0.0..=1.0).contains(&v), "{:?}", r);
            }
            if let Some(a) = r.auc {
                assert!((0.0..=1.0).contains(&a));
            }
            assert_eq!(r.confusion.total(), n);
        }
    }

    #[test]
    fn report_serializes_missing_auc_as_null() {
        let r = evaluate_predictions(&[0.9], &[1]);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"auc\":null"), "{}", json);
    }
}
