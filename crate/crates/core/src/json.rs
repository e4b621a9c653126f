//! Matrix exchange format shared by every module and the CLI:
//! `{"rows": r, "cols": c, "re": [...], "im": [...]}`, row-major.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixJson { rows, cols, re, im }
    }
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let re = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|ij| m[ij]).collect();
        MatrixJson {
            rows,
            cols,
            re,
            im: vec![0.0; rows * cols],
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Shape("matrix must have positive rows and cols".into()));
        }
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Shape(format!(
                "rows*cols = {n} but re has {} and im has {} entries",
                self.re.len(),
                self.im.len()
            )));
        }
        if !self.re.iter().chain(&self.im).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            Complex::new(self.re[k], self.im[k])
        }))
    }

    /// Real part only; fails if any imaginary part exceeds `tol`.
    pub fn to_real_matrix(&self, tol: f64) -> Result<DMatrix<f64>> {
        let m = self.to_matrix()?;
        if m.iter().any(|z| z.im.abs() > tol) {
            return Err(Error::InvalidInput("expected a real matrix".into()));
        }
        Ok(m.map(|z| z.re))
    }
}

pub fn matrix_to_value(m: &CMatrix) -> serde_json::Value {
    serde_json::to_value(MatrixJson::from(m)).expect("matrix serialises")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;
    use crate::rng::stream;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_through_json_text(seed in any::<u64>(), n in 1usize..6) {
            let m = random_hermitian(n, &mut stream(seed, 0));
            let text = serde_json::to_string(&MatrixJson::from(&m)).unwrap();
            let back: MatrixJson = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_matrix().unwrap(), m);
        }
    }

    #[test]
    fn layout_is_row_major() {
        let j: MatrixJson =
            serde_json::from_str(r#"{"rows":2,"cols":3,"re":[0,1,2,3,4,5],"im":[0,0,0,0,0,1]}"#)
                .unwrap();
        let m = j.to_matrix().unwrap();
        assert_eq!(m[(0, 2)].re, 2.0);
        assert_eq!(m[(1, 0)].re, 3.0);
        assert_eq!(m[(1, 2)].im, 1.0);
    }

    #[test]
    fn rejects_length_mismatch() {
        let j = MatrixJson {
            rows: 2,
            cols: 2,
            re: vec![1.0; 3],
            im: vec![0.0; 4],
        };
        assert!(matches!(j.to_matrix(), Err(Error::Shape(_))));
    }
}
