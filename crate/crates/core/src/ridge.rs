//! Multi-output ridge regression in closed form.
//!
//! Minimizes `||X W - Y||^2 + lambda ||W||^2` column by column. When the
//! design has no more columns than rows (or `lambda = 0`) the primal normal
//! equations `(X^T X + lambda I) W = X^T Y` are solved directly. With more
//! columns than rows and `lambda > 0` the algebraically identical dual form
//! `W = X^T (X X^T + lambda I)^{-1} Y` is used, which keeps the factorized
//! system at `n x n`.

use crate::linalg::{cholesky_solve, DenseMatrix, PivotTolerance};
use crate::{Error, Result, Scalar};

/// Row-sparse design matrix over a compact column space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign<T> {
    rows: Vec<Vec<(usize, T)>>,
    ncols: usize,
}

impl<T: Scalar> SparseDesign<T> {
    /// Each row must have strictly increasing column indices below `ncols`.
    pub fn new(rows: Vec<Vec<(usize, T)>>, ncols: usize) -> Self {
        debug_assert!(rows
            .iter()
            .all(|r| r.windows(2).all(|w| w[0].0 < w[1].0) && r.iter().all(|&(c, _)| c < ncols)));
        SparseDesign { rows, ncols }
    }

    pub fn from_dense(x: &DenseMatrix<T>) -> Self {
        let rows = (0..x.rows())
            .map(|i| {
                x.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != T::zero())
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        SparseDesign { rows, ncols: x.cols() }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    /// `X W`
    pub fn mul(&self, w: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(w.rows(), self.ncols);
        let mut out = DenseMatrix::zeros(self.nrows(), w.cols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                for (o, wv) in out.row_mut(i).iter_mut().zip(w.row(c)) {
                    *o = *o + v * *wv;
                }
            }
        }
        out
    }

    /// `X^T M`
    pub fn tmul(&self, m: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(m.rows(), self.nrows());
        let mut out = DenseMatrix::zeros(self.ncols, m.cols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                for (o, mv) in out.row_mut(c).iter_mut().zip(m.row(i)) {
                    *o = *o + v * *mv;
                }
            }
        }
        out
    }

    fn gram(&self) -> DenseMatrix<T> {
        let mut g = DenseMatrix::zeros(self.ncols, self.ncols);
        for row in &self.rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    g[(a, b)] = g[(a, b)] + va * vb;
                }
            }
        }
        g
    }

    fn kernel(&self) -> DenseMatrix<T> {
        let n = self.nrows();
        let mut k = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = sparse_dot(&self.rows[i], &self.rows[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

fn sparse_dot<T: Scalar>(a: &[(usize, T)], b: &[(usize, T)]) -> T {
    let (mut i, mut j) = (0, 0);
    let mut s = T::zero();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s = s + a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// Which form of the normal equations was factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Primal,
    Dual,
}

/// Ridge weights (`ncols x targets`) for the given design and targets.
pub fn fit_ridge<T: Scalar>(x: &SparseDesign<T>, y: &DenseMatrix<T>, lambda: T) -> Result<(DenseMatrix<T>, Solver)> {
    if x.nrows() == 0 {
        return Err(Error::Validation("ridge regression needs at least one row".into()));
    }
    if y.rows() != x.nrows() {
        return Err(Error::Validation(format!(
            "design has {} rows but targets have {}",
            x.nrows(),
            y.rows()
        )));
    }
    if !lambda.is_finite() || lambda < T::zero() {
        return Err(Error::Config(format!(
            "ridge lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if !y.is_finite() {
        return Err(Error::Validation("targets contain non-finite values".into()));
    }
    let tol = if lambda == T::zero() {
        PivotTolerance::WellConditioned
    } else {
        PivotTolerance::Positive
    };
    if x.ncols() <= x.nrows() || lambda == T::zero() {
        let mut a = x.gram();
        for i in 0..a.rows() {
            a[(i, i)] = a[(i, i)] + lambda;
        }
        let b = x.tmul(y);
        let w = cholesky_solve(&a, &b, tol).map_err(|e| annotate_singular(e, lambda))?;
        Ok((w, Solver::Primal))
    } else {
        let mut k = x.kernel();
        for i in 0..k.rows() {
            k[(i, i)] = k[(i, i)] + lambda;
        }
        let alpha = cholesky_solve(&k, y, tol)?;
        Ok((x.tmul(&alpha), Solver::Dual))
    }
}

fn annotate_singular<T: Scalar>(e: Error, lambda: T) -> Error {
    match e {
        Error::Numerical(msg) if lambda == T::zero() => {
            Error::Numerical(format!("lambda = 0 with a rank-deficient design: {msg}"))
        }
        other => other,
    }
}

/// `||X W - Y||^2 + lambda ||W||^2`
pub fn ridge_loss<T: Scalar>(x: &SparseDesign<T>, y: &DenseMatrix<T>, w: &DenseMatrix<T>, lambda: T) -> T {
    let pred = x.mul(w);
    let resid: T = pred
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, t)| (*p - *t) * (*p - *t))
        .sum();
    let penalty: T = w.as_slice().iter().map(|v| *v * *v).sum();
    resid + lambda * penalty
}

/// `2 X^T (X W - Y) + 2 lambda W`
pub fn ridge_gradient<T: Scalar>(
    x: &SparseDesign<T>,
    y: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    lambda: T,
) -> DenseMatrix<T> {
    let mut resid = x.mul(w);
    for i in 0..resid.rows() {
        for (r, t) in resid.row_mut(i).iter_mut().zip(y.row(i)) {
            *r = *r - *t;
        }
    }
    let g = x.tmul(&resid);
    let two = T::one() + T::one();
    DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| two * g[(i, j)] + two * lambda * w[(i, j)])
}
