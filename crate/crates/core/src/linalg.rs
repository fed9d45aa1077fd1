//! Dense real linear algebra: row reduction, numerical rank and nullspace
//! vectors.
//!
//! Everything here works on small, well-scaled systems (a few hundred
//! columns at most), so a dense Gauss-Jordan elimination with partial
//! pivoting is all that is needed. Tolerances are relative to the largest
//! absolute entry of the input.

use crate::error::{Error, Result};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::InvalidInput(format!(
                "matrix {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Appends one row, as used when deflating a nullspace.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows > 0 && row.len() != self.cols {
            return Err(Error::InvalidInput(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.cols
            )));
        }
        if self.rows == 0 {
            self.cols = row.len();
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                k / self.cols.max(1),
                k % self.cols.max(1)
            ))),
            None => Ok(()),
        }
    }
}

/// Reduced row echelon form of a matrix together with its pivot structure.
#[derive(Clone, Debug)]
pub struct Echelon {
    reduced: Matrix,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl Echelon {
    /// Gauss-Jordan elimination with partial pivoting. A column whose best
    /// remaining pivot is at most `tol` times the largest entry of `a` is
    /// treated as free.
    pub fn compute(a: &Matrix, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        a.check_finite()?;
        let threshold = tol * a.max_abs();
        let mut m = a.clone();
        let (rows, cols) = (m.rows, m.cols);
        let mut pivots = Vec::new();
        let mut free = Vec::new();
        let mut row = 0;
        for col in 0..cols {
            if row == rows {
                free.push(col);
                continue;
            }
            let (best, best_abs) = (row..rows)
                .map(|r| (r, m.get(r, col).abs()))
                .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best_abs <= threshold || best_abs == 0.0 {
                free.push(col);
                continue;
            }
            if best != row {
                for c in 0..cols {
                    m.data.swap(best * cols + c, row * cols + c);
                }
            }
            let inv = 1.0 / m.get(row, col);
            for c in col..cols {
                let v = m.get(row, c) * inv;
                m.set(row, c, v);
            }
            for r in 0..rows {
                if r == row {
                    continue;
                }
                let factor = m.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for c in col..cols {
                    let v = m.get(r, c) - factor * m.get(row, c);
                    m.set(r, c, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        Ok(Self {
            reduced: m,
            pivots,
            free,
        })
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_columns(&self) -> &[usize] {
        &self.pivots
    }

    pub fn free_columns(&self) -> &[usize] {
        &self.free
    }

    /// Nullspace vector obtained by setting free column `f` to one and
    /// back-substituting the pivot variables, scaled to unit max-norm.
    pub fn null_vector_for(&self, f: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.reduced.cols];
        v[f] = 1.0;
        for (k, &pc) in self.pivots.iter().enumerate() {
            v[pc] = -self.reduced.get(k, f);
        }
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter_mut().for_each(|x| *x /= scale);
        v
    }

    /// One nullspace vector per free column, in column order.
    pub fn null_vectors(&self) -> Vec<Vec<f64>> {
        self.free.iter().map(|&f| self.null_vector_for(f)).collect()
    }
}

/// Numerical rank of `a`.
pub fn rank(a: &Matrix, tol: f64) -> Result<usize> {
    Ok(Echelon::compute(a, tol)?.rank())
}

/// A nonzero vector `r` with `‖r‖∞ = 1` and `A r ≈ 0`, built from the first
/// free column of the reduced echelon form. `None` when `a` has full column
/// rank.
pub fn nullspace_vector(a: &Matrix, tol: f64) -> Result<Option<Vec<f64>>> {
    if a.cols == 0 {
        return Err(Error::InvalidInput("matrix has no columns".into()));
    }
    let ech = Echelon::compute(a, tol)?;
    Ok(ech.free.first().map(|&f| ech.null_vector_for(f)))
}

/// All nullspace vectors read off the free columns (a basis of the numerical
/// nullspace).
pub fn nullspace_basis(a: &Matrix, tol: f64) -> Result<Vec<Vec<f64>>> {
    Ok(Echelon::compute(a, tol)?.null_vectors())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &Matrix, r: &[f64]) -> f64 {
        a.mul_vec(r).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn single_equation_two_unknowns() {
        let a = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let r = nullspace_vector(&a, DEFAULT_RANK_TOL).unwrap().unwrap();
        assert_eq!(r, vec![-1.0, 1.0]);
    }

    #[test]
    fn identity_has_trivial_nullspace() {
        let a = Matrix::identity(2);
        assert!(nullspace_vector(&a, DEFAULT_RANK_TOL).unwrap().is_none());
    }

    #[test]
    fn two_row_chain() {
        let a = Matrix::from_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]).unwrap();
        let r = nullspace_vector(&a, DEFAULT_RANK_TOL).unwrap().unwrap();
        // proportional to (1, -1, 1)
        assert!((r[0] - r[2]).abs() < 1e-12);
        assert!((r[0] + r[1]).abs() < 1e-12);
        assert!((r.iter().fold(0.0f64, |m, x| m.max(x.abs())) - 1.0).abs() < 1e-12);
        assert!(residual(&a, &r) < 1e-12);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&Matrix::zeros(3, 4), DEFAULT_RANK_TOL).unwrap(), 0);
        assert_eq!(rank(&Matrix::identity(3), DEFAULT_RANK_TOL).unwrap(), 3);
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(rank(&a, DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn non_finite_is_rejected() {
        let a = Matrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(rank(&a, 1e-9), Err(Error::InvalidInput(_))));
        assert!(matches!(nullspace_vector(&a, 1e-9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(Matrix::from_rows(&rows).is_err());
    }

    #[test]
    fn more_columns_than_rows_always_has_nullspace() {
        let a = Matrix::from_rows(&[[3.0, -1.0, 2.0, 5.0], [1.0, 1.0, 1.0, 1.0]]).unwrap();
        let basis = nullspace_basis(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.len(), 2);
        for r in &basis {
            assert!(residual(&a, r) <= 1e-12 * a.norm_inf());
        }
    }
}
