//! The matrix file format and its mapping onto core types.
//!
//! Complex numbers are always two-element `[re, im]` arrays:
//!
//! ```json
//! {
//!   "dim": 2,
//!   "entries": [[[2.0,0.0],[3.0,0.0]],[[3.0,0.0],[5.0,0.0]]],
//!   "loop_vector": [[7.0,0.0],[11.0,0.0]]
//! }
//! ```
//!
//! `loop_vector` is optional. Schema violations (dim mismatch, wrong row or
//! vector lengths) are treated as malformed input, distinct from the
//! mathematical dimension errors the core operations raise.

use loophaf::{Complex64, LoopVector, SymmetricMatrix};
use serde::{Deserialize, Serialize};

use crate::config::INGEST_ASYMMETRY_TOL;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_vector: Option<Vec<[f64; 2]>>,
}

/// A malformed file: not JSON, or inconsistent with its own `dim`.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl MatrixFile {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let file: MatrixFile =
            serde_json::from_str(text).map_err(|e| SchemaError(format!("invalid JSON: {e}")))?;
        if file.entries.len() != file.dim {
            return Err(SchemaError(format!(
                "entries has {} rows but dim is {}",
                file.entries.len(),
                file.dim
            )));
        }
        for (i, row) in file.entries.iter().enumerate() {
            if row.len() != file.dim {
                return Err(SchemaError(format!(
                    "row {} has length {} but dim is {}",
                    i,
                    row.len(),
                    file.dim
                )));
            }
        }
        if let Some(v) = &file.loop_vector {
            if v.len() != file.dim {
                return Err(SchemaError(format!(
                    "loop_vector has length {} but dim is {}",
                    v.len(),
                    file.dim
                )));
            }
        }
        Ok(file)
    }

    pub fn matrix(&self) -> loophaf::Result<SymmetricMatrix> {
        let rows: Vec<Vec<Complex64>> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .collect();
        SymmetricMatrix::from_rows(&rows, INGEST_ASYMMETRY_TOL)
    }

    pub fn loop_vector(&self) -> Option<LoopVector> {
        self.loop_vector.as_ref().map(|v| {
            LoopVector::from_entries(v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        })
    }

    /// Real parts of the entries, for covariance input; `Err` when any
    /// imaginary component is nonzero.
    pub fn real_entries(&self) -> Result<Vec<Vec<f64>>, SchemaError> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &[re, im])| {
                        if im != 0.0 {
                            Err(SchemaError(format!(
                                "covariance entry ({i},{j}) has nonzero imaginary part {im}"
                            )))
                        } else {
                            Ok(re)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Real parts of the loop vector interpreted as the mean; zero when the
    /// field is absent.
    pub fn real_mean(&self) -> Result<Vec<f64>, SchemaError> {
        match &self.loop_vector {
            None => Ok(vec![0.0; self.dim]),
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(i, &[re, im])| {
                    if im != 0.0 {
                        Err(SchemaError(format!(
                            "mean entry {i} has nonzero imaginary part {im}"
                        )))
                    } else {
                        Ok(re)
                    }
                })
                .collect(),
        }
    }

    pub fn from_parts(matrix: &SymmetricMatrix, loop_vector: Option<&LoopVector>) -> Self {
        let entries = matrix
            .rows()
            .into_iter()
            .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            dim: matrix.dim(),
            entries,
            loop_vector: loop_vector
                .map(|v| v.entries().iter().map(|z| [z.re, z.im]).collect()),
        }
    }
}
