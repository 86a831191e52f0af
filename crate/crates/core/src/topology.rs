//! Second-order topology preservation between raw attribute space and the
//! unified space.
//!
//! Per item kind the covariance of the raw encoded attributes is compared to
//! the covariance of the mapped representations via a squared Frobenius
//! distance. Covariances of different widths are zero-padded to a common
//! size. Divisors follow the sample-covariance convention (n-1, n): one
//! sample yields the zero matrix and constant columns yield zero rows.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Raw-side and mapped-side covariances, zero-padded to a common width.
#[derive(Clone, Debug)]
pub struct CovariancePair {
    pub raw: DenseMatrix,
    pub mapped: DenseMatrix,
}

impl CovariancePair {
    /// Pad both covariances to `max` of their widths.
    pub fn new(raw: DenseMatrix, mapped: DenseMatrix) -> Self {
        let s = raw.rows().max(mapped.rows());
        Self {
            raw: raw.pad_to(s),
            mapped: mapped.pad_to(s),
        }
    }
}

/// Sample covariance `C = (1/(n-1)) (D'D - (1/n)(1'D)'(1'D))` of an
/// `n x d` sample matrix; the zero matrix when `n = 1`.
pub fn covariance(samples: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, d) = samples.shape();
    if n == 0 {
        return Err(Error::Data("covariance of an empty sample set".into()));
    }
    if n == 1 {
        return Ok(DenseMatrix::zeros(d, d));
    }
    let mut col_sums = vec![0.0; d];
    for row in samples.values().chunks(d) {
        for (s, &v) in col_sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let gram = samples.transpose().matmul(samples)?;
    let nf = n as f64;
    Ok(DenseMatrix::from_fn(d, d, |i, j| {
        (gram.get(i, j) - col_sums[i] * col_sums[j] / nf) / (nf - 1.0)
    }))
}

/// Topology loss `T = sum_i (1/(4 N_i)) ||C_raw^i - C_mapped^i||_F^2` over
/// per-kind batches. Batch `i` must have the same sample count on both
/// sides; covariances are zero-padded to a common width before differencing.
///
/// This is the pure oracle; the differentiable version is assembled from
/// graph primitives in the model and must agree with this value.
pub fn topology_loss(raw: &[DenseMatrix], mapped: &[DenseMatrix]) -> Result<f64> {
    if raw.len() != mapped.len() {
        return Err(Error::Data(format!(
            "{} raw batches vs {} mapped batches",
            raw.len(),
            mapped.len()
        )));
    }
    let mut total = 0.0;
    for (i, (r, m)) in raw.iter().zip(mapped).enumerate() {
        if r.rows() != m.rows() {
            return Err(Error::Data(format!(
                "kind {i}: {} raw samples vs {} mapped samples",
                r.rows(),
                m.rows()
            )));
        }
        let pair = CovariancePair::new(covariance(r)?, covariance(m)?);
        let diff = pair.raw.sub(&pair.mapped)?;
        total += diff.frobenius_sq() / (4.0 * r.rows() as f64);
    }
    Ok(total)
}
