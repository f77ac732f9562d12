//! JSON formats for vectors and matrices; complex values are `[re, im]` pairs.
//!
//! ```json
//! {"dim": 2, "entries": [[0.6, 0.0], [0.0, 0.8]]}
//! {"rows": 2, "cols": 2, "entries": [[1, 0], [0, 0], [0, 0], [1, 0]]}
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::MatrixBlockEncoding;
use crate::error::{AsqError, Result};
use crate::numeric::DenseVector;

#[derive(Serialize, Deserialize)]
struct VectorFile {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

fn to_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

pub fn vector_from_json(text: &str) -> Result<DenseVector> {
    let file: VectorFile = serde_json::from_str(text)?;
    if file.entries.len() != file.dim {
        return Err(AsqError::DimensionMismatch { expected: file.dim, got: file.entries.len() });
    }
    DenseVector::new(to_complex(&file.entries))
}

pub fn vector_to_json(v: &DenseVector) -> String {
    let file = VectorFile { dim: v.dim(), entries: v.entries().iter().map(|z| [z.re, z.im]).collect() };
    serde_json::to_string(&file).expect("plain data serializes")
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<DenseVector> {
    vector_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_vector(path: impl AsRef<Path>, v: &DenseVector) -> Result<()> {
    Ok(std::fs::write(path, vector_to_json(v))?)
}

/// Parses a matrix; `prep_cost` is the abstract cost per state preparation.
pub fn matrix_from_json(text: &str, prep_cost: f64) -> Result<MatrixBlockEncoding> {
    let file: MatrixFile = serde_json::from_str(text)?;
    MatrixBlockEncoding::new(file.rows, file.cols, to_complex(&file.entries), prep_cost)
}

pub fn matrix_to_json(m: &MatrixBlockEncoding) -> String {
    let entries = (0..m.rows())
        .flat_map(|i| (0..m.cols()).map(move |k| (i, k)))
        .map(|(i, k)| {
            let z = m.entry(i, k);
            [z.re, z.im]
        })
        .collect();
    serde_json::to_string(&MatrixFile { rows: m.rows(), cols: m.cols(), entries }).expect("plain data serializes")
}

pub fn load_matrix(path: impl AsRef<Path>, prep_cost: f64) -> Result<MatrixBlockEncoding> {
    matrix_from_json(&std::fs::read_to_string(path)?, prep_cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_round_trip() {
        let v = DenseVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, -0.8)]).unwrap();
        assert_eq!(vector_from_json(&vector_to_json(&v)).unwrap(), v);
        assert!(vector_from_json(r#"{"dim": 3, "entries": [[1, 0]]}"#).is_err());
        assert!(matches!(vector_from_json("{"), Err(AsqError::Parse(_))));
    }

    #[test]
    fn matrix_round_trip() {
        let m = matrix_from_json(r#"{"rows": 2, "cols": 2, "entries": [[0.6,0],[0,0],[0,0],[0,0.8]]}"#, 1.0).unwrap();
        assert_eq!(m.entry(1, 1), Complex64::new(0.0, 0.8));
        let again = matrix_from_json(&matrix_to_json(&m), 1.0).unwrap();
        assert_eq!(again.entry(0, 0), Complex64::new(0.6, 0.0));
    }
}
