//! Area under the ROC curve via the Mann-Whitney rank statistic.

use crate::error::{Error, Result};

/// AUC with average ranks for ties: exactly the probability that a random
/// positive outranks a random negative, ties counting one half. Equals
/// brute-force pair counting to the last bit (all intermediates are
/// half-integers well inside exact f64 range).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({n_pos} positives, {n_neg} negatives)"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores checked finite")
            .then(a.cmp(&b))
    });

    // sum of average ranks over the positives, walking tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group [i, j) shares the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) pair-counting oracle, ties worth one half.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_ranking() {
        let a = auc(&[0.9, 0.8, 0.1], &[true, false, false]).unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn full_tie_is_half() {
        let a = auc(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!(a, 0.5);
    }

    #[test]
    fn hand_counted_three_quarters() {
        // pairs: (.35 > .1) yes, (.35 > .4) no, (.8 > .1) yes, (.8 > .4) yes
        let a = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(a, 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(auc(&[0.3, 0.4], &[true, true]).is_err());
        assert!(auc(&[0.3, 0.4], &[false, false]).is_err());
    }

    #[test]
    fn matches_pair_counting_with_heavy_ties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(2..60);
            // coarse grid forces ties
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..7) as f64 / 7.0).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let n_pos = labels.iter().filter(|&&l| l).count();
            if n_pos == 0 || n_pos == n {
                continue;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairs(&scores, &labels);
            assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn invariant_under_strictly_increasing_transforms() {
        let scores = [0.1, 0.7, 0.3, 0.3, 0.9, 0.2];
        let labels = [false, true, false, true, true, false];
        let base = auc(&scores, &labels).unwrap();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3) + 11.0).collect();
        assert_eq!(auc(&cubed, &labels).unwrap(), base);
        let scaled: Vec<f64> = scores.iter().map(|s| s * 1e6 - 3.0).collect();
        assert_eq!(auc(&scaled, &labels).unwrap(), base);
    }
}
