//! Compressed sparse row operators and SPD solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Relative residual every successful solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// A real sparse matrix in CSR form with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept so that operators assembled from the same
    /// triplet positions share a sparsity pattern.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of range");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    /// `y = A^T x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, a) in self.row(i) {
                    y[j] += a * xi;
                }
            }
        }
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }

    /// `x^T A y`.
    pub fn bilinear_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// `a * self + b * other` for operators with identical patterns.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert!(self.same_pattern(other), "operators must share a sparsity pattern");
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        out
    }

    /// Symmetric elimination of constrained rows and columns: their entries
    /// become zero and the diagonal becomes one. The pattern is kept.
    pub fn eliminate(&mut self, constrained: &[bool]) {
        assert_eq!(constrained.len(), self.nrows);
        assert_eq!(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if constrained[i] || constrained[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        // CSR of a symmetric matrix is its CSC.
        let sym = SymbolicSparseColMatRef::new_checked(self.nrows, self.ncols, &self.row_ptr, None, &self.col_idx);
        SparseColMatRef::new(sym, &self.values)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn relative_residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> f64 {
    let r = a.apply(x);
    let num: f64 = r.iter().zip(b).map(|(ri, bi)| (ri - bi).powi(2)).sum::<f64>().sqrt();
    num / norm(b)
}

/// A reusable solver for a symmetric positive definite operator.
///
/// Uses a sparse Cholesky factorization; when the factorization is not
/// available or the residual check fails, falls back to Jacobi-preconditioned
/// conjugate gradients.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    operator: SparseOperator,
    symbolic: Option<SymbolicLlt<usize>>,
    factor: Option<Llt<usize, f64>>,
}

impl SpdSolver {
    pub fn new(operator: SparseOperator) -> Result<Self> {
        if operator.nrows != operator.ncols {
            return Err(Error::DimensionMismatch { expected: operator.nrows, found: operator.ncols });
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let symbolic = SymbolicLlt::try_new(operator.as_faer().symbolic(), Side::Lower).ok();
        let factor =
            symbolic.as_ref().and_then(|s| Llt::try_new_with_symbolic(s.clone(), operator.as_faer(), Side::Lower).ok());
        Ok(Self { operator, symbolic, factor })
    }

    /// Replaces the operator by one with the same pattern, reusing the
    /// symbolic factorization.
    pub fn refactor(&mut self, operator: SparseOperator) -> Result<()> {
        if !operator.same_pattern(&self.operator) {
            *self = Self::new(operator)?;
            return Ok(());
        }
        self.factor = self
            .symbolic
            .as_ref()
            .and_then(|s| Llt::try_new_with_symbolic(s.clone(), operator.as_faer(), Side::Lower).ok());
        self.operator = operator;
        Ok(())
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    pub fn dim(&self) -> usize {
        self.operator.nrows
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        if b.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; n]);
        }
        let mut guess = None;
        if let Some(factor) = &self.factor {
            let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
            let sol = factor.solve(&rhs);
            let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
            if x.iter().all(|v| v.is_finite()) {
                if relative_residual(&self.operator, &x, b) <= SOLVE_TOLERANCE {
                    return Ok(x);
                }
                guess = Some(x);
            }
        }
        conjugate_gradient(&self.operator, b, guess, SOLVE_TOLERANCE, 20 * n + 100)
    }
}

/// Solves `A x = b` for SPD `A`.
pub fn solve_spd(a: &SparseOperator, b: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::new(a.clone())?.solve(b)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(
    a: &SparseOperator,
    b: &[f64],
    guess: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = guess.unwrap_or_else(|| vec![0.0; n]);
    let ax = a.apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(x);
        }
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SolverFailure { residual: res, iterations: it });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        res = norm(&r) / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let gamma = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + gamma * p[i];
        }
    }
    // Recursive residual can drift; confirm with the true one.
    let true_res = relative_residual(a, &x, b);
    if true_res <= tol {
        Ok(x)
    } else {
        Err(Error::SolverFailure { residual: true_res, iterations: max_iter })
    }
}
