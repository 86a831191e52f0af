//! Sparse interaction vectors.
//!
//! A user's row of the rating matrix (over all items) or an item's column
//! (over all users). At real-data scale these rows are ~3e5 wide, so they are
//! stored as sorted (index, value) pairs and consumed by the towers through a
//! sparse-dense product that is mathematically identical to the dense affine
//! map on the concatenated input.

use crate::tensor::DenseMatrix;

/// Sparse vector with a fixed logical length. Zero values are not stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    len: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    /// Build from (index, value) pairs. Later duplicates overwrite earlier
    /// ones; zero values are dropped.
    pub fn from_pairs(len: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for (i, v) in pairs {
            debug_assert!((i as usize) < len, "index {i} out of range {len}");
            match entries.iter_mut().find(|(j, _)| *j == i) {
                Some(slot) => slot.1 = v,
                None => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(i, _)| i);
        Self { len, entries }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Accumulate `out += value * weights[index, :]` over the stored entries.
    /// `weights` is `len x h`; `out` is one output row of width `h`.
    pub fn accumulate_product(&self, weights: &DenseMatrix, out: &mut [f64]) {
        debug_assert_eq!(weights.rows(), self.len);
        debug_assert_eq!(weights.cols(), out.len());
        let h = weights.cols();
        let w = weights.values();
        for &(i, v) in &self.entries {
            let row = &w[i as usize * h..(i as usize + 1) * h];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += v * wv;
            }
        }
    }
}
