//! JSON wire formats shared by the library and the CLI.
//!
//! The matrix format is `{"n": N, "re": [[...]], "im": [[...]]}` with
//! row-major nested arrays; every CLI command that reads or writes a matrix
//! uses it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Row-major complex matrix in split real/imaginary form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let cols = m.ncols();
        let re = (0..n)
            .map(|i| (0..cols).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..cols).map(|j| m[(i, j)].im).collect())
            .collect();
        MatrixJson { n, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.n;
        let check = |rows: &Vec<Vec<f64>>, name: &str| -> Result<()> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Parse(format!(
                    "field '{name}' must be an {n}x{n} array"
                )));
            }
            Ok(())
        };
        check(&self.re, "re")?;
        check(&self.im, "im")?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

/// Spinor as `{"x": [re, im], "y": [re, im]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinorJson {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = linalg::random_ginibre(&mut rng, 4);
        let json = serde_json::to_string(&MatrixJson::from_matrix(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let bad = MatrixJson {
            n: 3,
            re: vec![vec![0.0; 3]; 2],
            im: vec![vec![0.0; 3]; 3],
        };
        assert!(bad.to_matrix().is_err());
    }
}
