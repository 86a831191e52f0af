//! Seeded k-means with k-means++ initialization.

use rand::Rng;

use crate::data::stream_rng;
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

pub struct KMeansOutcome {
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment pass; non-increasing.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from a k-means++ start, until the assignment fixpoint or
/// `max_iter`. Deterministic given the seed; an emptied cluster keeps its
/// previous centroid.
pub fn kmeans(data: &DenseMatrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansOutcome> {
    let (n, d) = data.shape();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} outside 1..={n}")));
    }
    let row = |i: usize| &data.values()[i * d..(i + 1) * d];
    let mut rng = stream_rng(seed, 3);

    // k-means++ seeding: next centroid weighted by squared distance to the
    // nearest chosen one
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(row(rng.random_range(0..n)).to_vec());
    let mut best_d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = best_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut x = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in best_d2.iter().enumerate() {
                if x < w {
                    chosen = i;
                    break;
                }
                x -= w;
            }
            chosen
        } else {
            // all remaining mass at the chosen points (duplicates)
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for i in 0..n {
            let dd = sq_dist(row(i), &c);
            if dd < best_d2[i] {
                best_d2[i] = dd;
            }
        }
        centroids.push(c);
    }

    let mut assignments = vec![0usize; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let mut best = 0;
            let mut best_dd = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let dd = sq_dist(row(i), centroid);
                if dd < best_dd {
                    best_dd = dd;
                    best = c;
                }
            }
            inertia += best_dd;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed && trace.len() > 1 {
            break;
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; d]; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (cent, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *cent = s / counts[c] as f64;
                }
            }
        }
    }

    Ok(KMeansOutcome {
        assignments,
        inertia: trace.last().copied().unwrap_or(0.0),
        iterations,
        inertia_trace: trace,
    })
}
