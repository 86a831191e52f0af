//! Attribute schemas and fixed-width encoding.
//!
//! Categorical attributes are one-hot over a level vocabulary; numeric
//! attributes are z-scored. Vocabularies and normalization statistics come
//! from the train split only (items and users referenced by at least one
//! train interaction), so changing validation or test interactions can never
//! change an encoding. Unknown categorical levels and missing values encode
//! to zero blocks.

use super::{HeteroDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// A raw attribute cell.
#[derive(Clone, Debug, PartialEq)]
pub enum AttrValue {
    Missing,
    Numeric(f64),
    Categorical(String),
}

/// How one attribute encodes. Stats start empty and are filled by
/// [`finalize_schemas`]; a `locked` vocabulary (declared in a manifest) is
/// never re-inferred.
#[derive(Clone, Debug, PartialEq)]
pub enum AttrEncoding {
    Categorical { levels: Vec<String>, locked: bool },
    Numeric { mean: f64, std: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttrSpec {
    pub name: String,
    pub encoding: AttrEncoding,
}

impl AttrSpec {
    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            encoding: AttrEncoding::Categorical {
                levels: Vec::new(),
                locked: false,
            },
        }
    }

    pub fn categorical_with_levels(name: impl Into<String>, mut levels: Vec<String>) -> Self {
        levels.sort();
        levels.dedup();
        Self {
            name: name.into(),
            encoding: AttrEncoding::Categorical {
                levels,
                locked: true,
            },
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            encoding: AttrEncoding::Numeric {
                mean: 0.0,
                std: 1.0,
            },
        }
    }

    fn width(&self) -> usize {
        match &self.encoding {
            AttrEncoding::Categorical { levels, .. } => levels.len(),
            AttrEncoding::Numeric { .. } => 1,
        }
    }
}

/// Ordered attribute specs for one entity kind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSchema {
    pub attrs: Vec<AttrSpec>,
}

impl FeatureSchema {
    pub fn new(attrs: Vec<AttrSpec>) -> Self {
        Self { attrs }
    }

    /// Total encoded width: vocabulary size per categorical attribute, one
    /// slot per numeric attribute.
    pub fn encoded_dim(&self) -> usize {
        self.attrs.iter().map(AttrSpec::width).sum()
    }

    /// Encode one record into a dense vector of length `encoded_dim`.
    pub fn encode(&self, values: &[AttrValue]) -> Result<Vec<f64>> {
        if values.len() != self.attrs.len() {
            return Err(Error::Data(format!(
                "record has {} attrs, schema expects {}",
                values.len(),
                self.attrs.len()
            )));
        }
        let mut out = Vec::with_capacity(self.encoded_dim());
        for (spec, value) in self.attrs.iter().zip(values) {
            match (&spec.encoding, value) {
                (AttrEncoding::Categorical { levels, .. }, v) => {
                    let hit = match v {
                        AttrValue::Categorical(s) => levels.binary_search(s).ok(),
                        // unknown type or missing: all-zero block
                        _ => None,
                    };
                    let start = out.len();
                    out.resize(start + levels.len(), 0.0);
                    if let Some(i) = hit {
                        out[start + i] = 1.0;
                    }
                }
                (AttrEncoding::Numeric { mean, std }, v) => {
                    let z = match v {
                        AttrValue::Numeric(x) => {
                            let denom = if *std > 1e-12 { *std } else { 1.0 };
                            (x - mean) / denom
                        }
                        _ => 0.0, // missing encodes to the mean
                    };
                    out.push(z);
                }
            }
        }
        Ok(out)
    }

    /// Encode a batch of records into a matrix, one row per record.
    pub fn encode_matrix<'a>(
        &self,
        records: impl IntoIterator<Item = &'a [AttrValue]>,
    ) -> Result<DenseMatrix> {
        let d = self.encoded_dim();
        let mut flat = Vec::new();
        let mut n = 0;
        for rec in records {
            flat.extend(self.encode(rec)?);
            n += 1;
        }
        DenseMatrix::from_flat(n, d, flat)
    }

    fn fit_stats(&mut self, records: &[&[AttrValue]]) {
        for (a, spec) in self.attrs.iter_mut().enumerate() {
            match &mut spec.encoding {
                AttrEncoding::Categorical { levels, locked } => {
                    if *locked {
                        continue;
                    }
                    let mut seen: Vec<String> = records
                        .iter()
                        .filter_map(|r| match &r[a] {
                            AttrValue::Categorical(s) => Some(s.clone()),
                            _ => None,
                        })
                        .collect();
                    seen.sort();
                    seen.dedup();
                    *levels = seen;
                }
                AttrEncoding::Numeric { mean, std } => {
                    let vals: Vec<f64> = records
                        .iter()
                        .filter_map(|r| match &r[a] {
                            AttrValue::Numeric(x) => Some(*x),
                            _ => None,
                        })
                        .collect();
                    if vals.is_empty() {
                        *mean = 0.0;
                        *std = 1.0;
                        continue;
                    }
                    let n = vals.len() as f64;
                    let m = vals.iter().sum::<f64>() / n;
                    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                    *mean = m;
                    *std = var.sqrt();
                }
            }
        }
    }
}

/// Fit vocabularies and normalization statistics from the train split.
///
/// Items and users referenced by at least one train interaction contribute;
/// a kind with no train coverage falls back to its whole catalog so encoding
/// stays defined.
pub fn finalize_schemas(ds: &mut HeteroDataset) -> Result<()> {
    let mut train_users = vec![false; ds.num_users()];
    let mut train_items: Vec<Vec<bool>> = ds
        .catalogs
        .iter()
        .map(|c| vec![false; c.items.len()])
        .collect();
    for i in &ds.interactions {
        if i.split == Split::Train {
            train_users[i.user as usize] = true;
            train_items[i.kind as usize][i.item as usize] = true;
        }
    }

    for (k, catalog) in ds.catalogs.iter_mut().enumerate() {
        let covered: Vec<&[AttrValue]> = catalog
            .items
            .iter()
            .zip(&train_items[k])
            .filter(|(_, &hit)| hit)
            .map(|(it, _)| it.attrs.as_slice())
            .collect();
        let records: Vec<&[AttrValue]> = if covered.is_empty() {
            catalog.items.iter().map(|it| it.attrs.as_slice()).collect()
        } else {
            covered
        };
        catalog.schema.fit_stats(&records);
    }

    if !ds.user_schema.attrs.is_empty() {
        let covered: Vec<&[AttrValue]> = ds
            .users
            .iter()
            .zip(&train_users)
            .filter(|(_, &hit)| hit)
            .map(|(u, _)| u.attrs.as_slice())
            .collect();
        let records: Vec<&[AttrValue]> = if covered.is_empty() {
            ds.users.iter().map(|u| u.attrs.as_slice()).collect()
        } else {
            covered
        };
        ds.user_schema.fit_stats(&records);
    }
    Ok(())
}
