use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{ComplexMatrix, C64};

/// JSON form of a square matrix: `{"dim": d, "real": [...], "imag": [...]}`.
///
/// `real` and `imag` are row-major, either nested rows or one flat list;
/// `imag` may be omitted for real matrices. Serialization emits nested rows.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixLiteral {
    pub dim: usize,
    pub real: Entries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<Entries>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entries {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Entries {
    fn flatten(&self, dim: usize, what: &str) -> Result<Vec<f64>> {
        let flat: Vec<f64> = match self {
            Entries::Rows(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config(format!("{what} part is not {dim}x{dim}")));
                }
                rows.iter().flatten().copied().collect()
            }
            Entries::Flat(v) => v.clone(),
        };
        if flat.len() != dim * dim {
            return Err(Error::Config(format!("{what} part has {} entries, expected {}", flat.len(), dim * dim)));
        }
        Ok(flat)
    }
}

impl MatrixLiteral {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let re = self.real.flatten(self.dim, "real")?;
        let im = match &self.imag {
            Some(e) => e.flatten(self.dim, "imag")?,
            None => vec![0.0; self.dim * self.dim],
        };
        ComplexMatrix::from_vec(self.dim, self.dim, re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect())
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let d = m.rows();
        let rows = |f: fn(C64) -> f64| (0..d).map(|i| (0..d).map(|j| f(m.get(i, j))).collect()).collect();
        Self { dim: d, real: Entries::Rows(rows(|z| z.re)), imag: Some(Entries::Rows(rows(|z| z.im))) }
    }
}

impl serde::Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixLiteral::from_matrix(self).serialize(s)
    }
}
