//! Cosine similarity matrices and embedding export for external plotting.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::HeteroDataset;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::DenseMatrix;

/// Cosine similarity between the rows of two equally wide matrices. Entries
/// involving a zero vector are undefined and marked NaN.
pub fn similarity_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op: "similarity_matrix",
            details: format!("{} vs {} columns", a.cols(), b.cols()),
        });
    }
    let d = a.cols();
    let norm = |m: &DenseMatrix, i: usize| -> f64 {
        m.values()[i * d..(i + 1) * d]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    };
    let mut out = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        let na = norm(a, i);
        let ra = &a.values()[i * d..(i + 1) * d];
        let mut row = Vec::with_capacity(b.rows());
        for j in 0..b.rows() {
            let nb = norm(b, j);
            if na == 0.0 || nb == 0.0 {
                row.push(f64::NAN);
                continue;
            }
            let dot: f64 = ra.iter().zip(&b.values()[j * d..(j + 1) * d]).map(|(x, y)| x * y).sum();
            row.push(dot / (na * nb));
        }
        out.push(row);
    }
    Ok(out)
}

/// Write a labeled similarity matrix as tab-separated text (undefined
/// entries print as `nan`).
pub fn write_similarity_tsv(
    path: impl AsRef<Path>,
    row_labels: &[String],
    col_labels: &[String],
    matrix: &[Vec<f64>],
) -> Result<()> {
    if matrix.len() != row_labels.len()
        || matrix.first().is_some_and(|r| r.len() != col_labels.len())
    {
        return Err(Error::Data("labels do not match the matrix shape".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "\t{}", col_labels.join("\t"))?;
    for (label, row) in row_labels.iter().zip(matrix) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{label}\t{}", cells.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

/// Export every item's unified representation: `id  kind  x0 x1 ...`, full
/// float precision so a parse recovers identical values.
pub fn export_embeddings(
    params: &ModelParams,
    ds: &HeteroDataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let d = params.config.unified_dim;
    let coord_names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    writeln!(w, "id\tkind\t{}", coord_names.join("\t"))?;
    for kind in 0..ds.num_kinds() {
        let mapped = params.map_catalog(ds, kind as u16)?;
        for (i, item) in ds.catalogs[kind].items.iter().enumerate() {
            let coords: Vec<String> = mapped.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}\t{}\t{}", item.id, ds.kinds[kind], coords.join("\t"))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::testutil::tiny_dataset;
    use crate::data::finalize_schemas;
    use crate::model::{BandwidthConfig, ModelConfig, ModelDims};

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn self_similarity_is_one_orthogonal_is_zero() {
        let a = m(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let s = similarity_matrix(&a, &a).unwrap();
        assert!((s[0][0] - 1.0).abs() < 1e-15);
        assert!((s[1][1] - 1.0).abs() < 1e-15);
        assert!(s[0][1].abs() < 1e-15);
    }

    #[test]
    fn zero_vector_marks_undefined() {
        let a = m(&[vec![0.0, 0.0]]);
        let b = m(&[vec![1.0, 1.0]]);
        let s = similarity_matrix(&a, &b).unwrap();
        assert!(s[0][0].is_nan());
    }

    #[test]
    fn export_writes_one_row_per_item_and_roundtrips() {
        let mut ds = tiny_dataset();
        finalize_schemas(&mut ds).unwrap();
        let config = ModelConfig {
            unified_dim: 3,
            embedding_dim: 3,
            mapping_hidden: vec![4],
            tower_hidden: vec![4],
            alpha: 1.0,
            beta: 1.0,
            bandwidth: BandwidthConfig::Fixed(1.0),
            mapping_relu_output: false,
        };
        let params = ModelParams::init(config, ModelDims::from_dataset(&ds), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embeddings.tsv");
        export_embeddings(&params, &ds, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + ds.num_items());
        // kinds column matches catalog membership and floats roundtrip
        let mapped0 = params.map_catalog(&ds, 0).unwrap();
        let first: Vec<&str> = lines[1].split('\t').collect();
        assert_eq!(first[0], "b0");
        assert_eq!(first[1], "book");
        for (j, cell) in first[2..].iter().enumerate() {
            let parsed: f64 = cell.parse().unwrap();
            assert_eq!(parsed.to_bits(), mapped0.get(0, j).to_bits());
        }
    }
}
