//! RBF kernel machinery for distribution alignment.
//!
//! A set of P sample sets (one per item kind, already mapped into the
//! unified space) is compared through kernel mean embeddings. The mean maps
//! themselves are never materialized: every inner product between embedded
//! distributions reduces to an average of pairwise kernel values (the kernel
//! trick), collected in a P x P block of Gram means.
//!
//! Two independent routes to the same scalar are kept side by side:
//!
//! * [`distributional_variance`] goes through the Gram block: the mean of
//!   the diagonal minus the mean over all blocks. This is the brute-force
//!   oracle.
//! * [`alignment_loss`] sums per-pair coefficients directly over all sample
//!   pairs, the rearranged form actually minimized during training.
//!
//! The two must agree to 1e-10; the acceptance suite sweeps this over random
//! instances.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// RBF kernel configuration: `kappa(x, x') = exp(-bandwidth * ||x - x'||^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let mut dist = 0.0;
        for (a, b) in x.iter().zip(y) {
            let d = a - b;
            dist += d * d;
        }
        (-self.bandwidth * dist).exp()
    }
}

/// P x P block of mean pairwise kernel values between sample sets, plus the
/// per-set sample counts.
#[derive(Clone, Debug)]
pub struct GramBlock {
    pub means: DenseMatrix,
    pub counts: Vec<usize>,
}

fn validate_sets(sets: &[DenseMatrix]) -> Result<usize> {
    if sets.is_empty() {
        return Err(Error::Data("no sample sets given".into()));
    }
    let d = sets[0].cols();
    for (i, s) in sets.iter().enumerate() {
        if s.rows() == 0 {
            return Err(Error::Data(format!("sample set {i} is empty")));
        }
        if s.cols() != d {
            return Err(Error::ShapeMismatch {
                op: "sample_sets",
                details: format!("set {i} has dim {}, expected {d}", s.cols()),
            });
        }
    }
    Ok(d)
}

/// Mean pairwise kernel value per pair of sets:
/// `G[i, j] = (1 / (N_i N_j)) sum_k sum_l kappa(x_k^i, x_l^j)`.
pub fn gram_block(sets: &[DenseMatrix], spec: KernelSpec) -> Result<GramBlock> {
    validate_sets(sets)?;
    let p = sets.len();
    let mut means = DenseMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let (a, b) = (&sets[i], &sets[j]);
            let mut total = 0.0;
            for k in 0..a.rows() {
                let xk = &a.values()[k * a.cols()..(k + 1) * a.cols()];
                for l in 0..b.rows() {
                    let yl = &b.values()[l * b.cols()..(l + 1) * b.cols()];
                    total += spec.eval(xk, yl);
                }
            }
            let mean = total / (a.rows() as f64 * b.rows() as f64);
            means.set(i, j, mean);
            means.set(j, i, mean);
        }
    }
    Ok(GramBlock {
        means,
        counts: sets.iter().map(DenseMatrix::rows).collect(),
    })
}

/// Empirical distributional variance over the Gram block:
/// mean of the diagonal minus the mean over all P^2 blocks. Nonnegative;
/// zero iff all embedded distributions coincide.
///
/// This is the oracle the alignment loss is checked against.
pub fn distributional_variance(sets: &[DenseMatrix], spec: KernelSpec) -> Result<f64> {
    let gram = gram_block(sets, spec)?;
    let p = gram.counts.len();
    let mut trace = 0.0;
    let mut total = 0.0;
    for i in 0..p {
        trace += gram.means.get(i, i);
        for j in 0..p {
            total += gram.means.get(i, j);
        }
    }
    let pf = p as f64;
    Ok(trace / pf - total / (pf * pf))
}

/// Alignment loss: the distributional variance rearranged into one sum of
/// per-pair coefficients,
/// `A = sum_{i,j,k,l} c_ij kappa(x_k^i, x_l^j)` with
/// `c_ii = (P-1) / (P^2 N_i^2)` and `c_ij = -1 / (P^2 N_i N_j)` for `i != j`.
///
/// Computed as a direct quadruple sum, deliberately not via the Gram block,
/// so the two routes stay independent.
pub fn alignment_loss(sets: &[DenseMatrix], spec: KernelSpec) -> Result<f64> {
    validate_sets(sets)?;
    let p = sets.len();
    let pf = p as f64;
    let mut acc = 0.0;
    for i in 0..p {
        let a = &sets[i];
        let ni = a.rows() as f64;
        for j in 0..p {
            let b = &sets[j];
            let nj = b.rows() as f64;
            let coeff = if i == j {
                (pf - 1.0) / (pf * pf * ni * ni)
            } else {
                -1.0 / (pf * pf * ni * nj)
            };
            if coeff == 0.0 {
                continue;
            }
            let mut block = 0.0;
            for k in 0..a.rows() {
                let xk = &a.values()[k * a.cols()..(k + 1) * a.cols()];
                for l in 0..b.rows() {
                    let yl = &b.values()[l * b.cols()..(l + 1) * b.cols()];
                    block += spec.eval(xk, yl);
                }
            }
            acc += coeff * block;
        }
    }
    Ok(acc)
}

/// Median-heuristic bandwidth: `1 / (2 * median pairwise squared distance)`
/// over the pooled samples. Falls back to 1.0 (with a warning) when every
/// pooled sample is identical. Estimated once on the first training batch
/// and frozen thereafter.
pub fn median_bandwidth(sets: &[DenseMatrix]) -> Result<f64> {
    validate_sets(sets)?;
    let total: usize = sets.iter().map(DenseMatrix::rows).sum();
    if total < 2 {
        return Err(Error::Data(
            "median bandwidth needs at least 2 pooled samples".into(),
        ));
    }
    let d = sets[0].cols();
    let mut pooled: Vec<&[f64]> = Vec::with_capacity(total);
    for s in sets {
        for k in 0..s.rows() {
            pooled.push(&s.values()[k * d..(k + 1) * d]);
        }
    }
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            let mut sq = 0.0;
            for (a, b) in pooled[i].iter().zip(pooled[j]) {
                let diff = a - b;
                sq += diff * diff;
            }
            dists.push(sq);
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("squared distances are finite"));
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median <= 0.0 {
        log::warn!("all pooled samples identical; falling back to bandwidth 1.0");
        return Ok(1.0);
    }
    Ok(1.0 / (2.0 * median))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn random_sets(rng: &mut ChaCha8Rng, p: usize, d: usize) -> Vec<DenseMatrix> {
        (0..p)
            .map(|_| {
                let n = rng.random_range(1..=12);
                DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
            })
            .collect()
    }

    #[test]
    fn single_sample_gram_is_one() {
        let spec = KernelSpec::new(0.5).unwrap();
        let g = gram_block(&[set(&[vec![1.5, -2.0]])], spec).unwrap();
        assert_eq!(g.means.get(0, 0), 1.0);
    }

    #[test]
    fn identical_sets_give_equal_entries() {
        let spec = KernelSpec::new(1.0).unwrap();
        let s = set(&[vec![0.0], vec![1.0]]);
        let g = gram_block(&[s.clone(), s], spec).unwrap();
        let v = g.means.get(0, 0);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g.means.get(i, j), v);
            }
        }
    }

    #[test]
    fn two_point_instance_hand_values() {
        // P=2, N=1, x1=[0], x2=[1], lambda=1:
        // G = [[1, e^-1], [e^-1, 1]]
        // V = (1/2)*2 - (1/4)*(2 + 2e^-1) = 0.5 - 0.5 e^-1
        let spec = KernelSpec::new(1.0).unwrap();
        let sets = vec![set(&[vec![0.0]]), set(&[vec![1.0]])];
        let g = gram_block(&sets, spec).unwrap();
        let e1 = (-1.0f64).exp();
        assert!((g.means.get(0, 1) - e1).abs() < 1e-15);
        assert!((g.means.get(1, 1) - 1.0).abs() < 1e-15);

        let expected = 0.5 - 0.5 * e1;
        let v = distributional_variance(&sets, spec).unwrap();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.3160603).abs() < 1e-7);

        let a = alignment_loss(&sets, spec).unwrap();
        assert!((a - expected).abs() < 1e-15);
    }

    #[test]
    fn single_set_variance_and_loss_vanish() {
        let spec = KernelSpec::new(2.0).unwrap();
        let sets = vec![set(&[vec![0.3, 0.1], vec![-1.0, 2.0]])];
        assert_eq!(distributional_variance(&sets, spec).unwrap(), 0.0);
        assert_eq!(alignment_loss(&sets, spec).unwrap(), 0.0);
    }

    #[test]
    fn identical_sets_vanish() {
        let spec = KernelSpec::new(0.8).unwrap();
        let s = set(&[vec![0.2, -0.4], vec![1.0, 0.0], vec![-0.7, 0.9]]);
        let sets = vec![s.clone(), s.clone(), s];
        assert!(distributional_variance(&sets, spec).unwrap().abs() <= 1e-12);
        assert!(alignment_loss(&sets, spec).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn loss_equals_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(401);
        for _ in 0..25 {
            let p = rng.random_range(2..=4);
            let d = rng.random_range(1..=6);
            let sets = random_sets(&mut rng, p, d);
            let spec = KernelSpec::new(rng.random_range(0.05..3.0)).unwrap();
            let a = alignment_loss(&sets, spec).unwrap();
            let v = distributional_variance(&sets, spec).unwrap();
            assert!(
                (a - v).abs() <= 1e-10 * v.abs().max(1.0),
                "A={a} vs V={v}"
            );
            assert!(a >= -1e-12, "negative alignment loss {a}");
        }
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let sets = random_sets(&mut rng, 3, 4);
        let spec = KernelSpec::new(0.6).unwrap();
        let base = alignment_loss(&sets, spec).unwrap();
        let offset: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let shifted: Vec<DenseMatrix> = sets
            .iter()
            .map(|s| DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| s.get(i, j) + offset[j]))
            .collect();
        let moved = alignment_loss(&shifted, spec).unwrap();
        assert!((base - moved).abs() <= 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn permutation_invariance() {
        let spec = KernelSpec::new(1.2).unwrap();
        let s1 = set(&[vec![0.0], vec![1.0], vec![2.0]]);
        let s2 = set(&[vec![5.0], vec![4.0]]);
        let base = alignment_loss(&[s1.clone(), s2.clone()], spec).unwrap();
        let s1_perm = set(&[vec![2.0], vec![0.0], vec![1.0]]);
        let within = alignment_loss(&[s1_perm, s2.clone()], spec).unwrap();
        assert!((base - within).abs() <= 1e-14);
        let relabeled = alignment_loss(&[s2, s1], spec).unwrap();
        assert!((base - relabeled).abs() <= 1e-14);
    }

    #[test]
    fn separated_sets_are_detected() {
        // sets of identical points, far apart relative to the bandwidth
        let spec = KernelSpec::new(0.25).unwrap();
        let gap = 10.0 / spec.bandwidth.sqrt();
        let sets: Vec<DenseMatrix> = (0..3)
            .map(|i| {
                let c = i as f64 * gap;
                set(&[vec![c], vec![c], vec![c], vec![c]])
            })
            .collect();
        let a = alignment_loss(&sets, spec).unwrap();
        let p = 3.0f64;
        assert!(a > 0.1 * (p - 1.0) / (p * p), "A = {a}");
    }

    #[test]
    fn median_bandwidth_hand_value() {
        // pooled {[0], [2]}: single pairwise squared distance 4
        // lambda = 1 / (2 * 4) = 0.125
        let sets = vec![set(&[vec![0.0]]), set(&[vec![2.0]])];
        assert_eq!(median_bandwidth(&sets).unwrap(), 0.125);
    }

    #[test]
    fn median_bandwidth_degenerate_falls_back() {
        let sets = vec![set(&[vec![1.0], vec![1.0], vec![1.0]])];
        assert_eq!(median_bandwidth(&sets).unwrap(), 1.0);
    }

    #[test]
    fn empty_set_rejected() {
        let spec = KernelSpec::new(1.0).unwrap();
        let sets = vec![set(&[vec![0.0]]), DenseMatrix::zeros(0, 1)];
        assert!(gram_block(&sets, spec).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = KernelSpec::new(1.0).unwrap();
        let sets = vec![set(&[vec![0.0]]), set(&[vec![0.0, 1.0]])];
        assert!(alignment_loss(&sets, spec).is_err());
    }
}
