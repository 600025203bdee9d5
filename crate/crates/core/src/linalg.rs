//! Minimal dense linear algebra for the ridge solver.

use crate::{Error, Result, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// How small a Cholesky pivot may get before the system counts as singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotTolerance {
    /// Any strictly positive pivot is accepted.
    Positive,
    /// Pivot must exceed `sqrt(eps) * max diagonal`; rejects systems whose
    /// condition number is too large for the solution to be meaningful.
    WellConditioned,
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>, tol: PivotTolerance) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(T::zero(), T::max);
    let threshold = match tol {
        PivotTolerance::Positive => T::zero(),
        PivotTolerance::WellConditioned => T::epsilon().sqrt() * max_diag,
    };
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d <= threshold {
            return Err(Error::Numerical(format!(
                "normal-equations matrix is singular or ill-conditioned (pivot {} at column {j} of {n}); use a positive ridge penalty",
                d
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn cholesky_solve<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    tol: PivotTolerance,
) -> Result<DenseMatrix<T>> {
    assert_eq!(a.rows(), b.rows(), "right-hand side shape mismatch");
    let l = cholesky(a, tol)?;
    let n = a.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        // Forward substitution L z = b.
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s = s - l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // Back substitution L^T x = z.
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let b = DenseMatrix::from_rows(&[vec![2.0], vec![1.0]]);
        let x = cholesky_solve(&a, &b, PivotTolerance::WellConditioned).unwrap();
        // 4x + 2y = 2, 2x + 3y = 1  ->  x = 0.5, y = 0
        assert!((x[(0, 0)] - 0.5_f64).abs() < 1e-14);
        assert!(x[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn detects_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]);
        assert!(matches!(
            cholesky_solve(&a, &b, PivotTolerance::WellConditioned),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn works_in_f32() {
        let a = DenseMatrix::<f32>::from_rows(&[vec![2.0, 0.0], vec![0.0, 8.0]]);
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 8.0]]);
        let x = cholesky_solve(&a, &b, PivotTolerance::Positive).unwrap();
        assert_eq!(x, DenseMatrix::from_rows(&[vec![0.5, 1.0], vec![0.5, 1.0]]));
    }
}
