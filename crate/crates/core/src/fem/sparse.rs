//! Compressed-row symmetric matrices and SPD solvers.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Largest dimension for which a dense Cholesky factorization is attempted
/// when conjugate gradients stall.
pub const DENSE_FALLBACK_MAX_DIM: usize = 2000;

/// Default relative residual for [`solve_spd`].
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// Square matrix in compressed-row layout. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds the zero matrix on a sparsity pattern given as sorted column
    /// lists per row.
    pub fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            dim: rows.len(),
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let rows: Vec<Vec<usize>> = (0..dim).map(|i| vec![i]).collect();
        let mut m = Self::from_pattern(&rows);
        m.values.fill(1.0);
        m
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows: Vec<Vec<usize>> = (0..a.nrows())
            .map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(&rows);
        for i in 0..a.nrows() {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn zero_values(&mut self) {
        self.values.fill(0.0);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterator over stored `(row, col, value)` triples.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim, (0..self.dim).map(|i| self.get(i, i)))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    /// `A * M` for a dense `M`.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let col: Vec<f64> = m.column(c).iter().copied().collect();
            let mut y = vec![0.0; self.dim];
            self.mul_vec_into(&col, &mut y);
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// `self + c * other` on an identical pattern.
    pub fn axpy(&self, c: f64, other: &SparseSymMatrix) -> Result<SparseSymMatrix> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::InvalidInput("sparsity patterns differ".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += c * w;
        }
        Ok(out)
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub dense_fallback: bool,
}

/// Solves `A x = b` for SPD `A` to relative residual `tol`.
///
/// Jacobi-preconditioned conjugate gradients; a dense Cholesky factorization
/// takes over for dimensions up to [`DENSE_FALLBACK_MAX_DIM`] when CG does not
/// reach `tol` within its iteration cap.
pub fn solve_spd(a: &SparseSymMatrix, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    solve_spd_report(a, b, tol).map(|(x, _)| x)
}

pub fn solve_spd_report(
    a: &SparseSymMatrix,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, SolveReport)> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("solver tolerance must be positive, got {tol}")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((
            DVector::zeros(a.dim()),
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                dense_fallback: false,
            },
        ));
    }
    let cap = 10 * a.dim() + 100;
    match pcg(a, b, tol, cap) {
        Ok(r) => Ok(r),
        Err(e) if a.dim() <= DENSE_FALLBACK_MAX_DIM => {
            let chol = a.to_dense().cholesky().ok_or_else(|| {
                Error::Solver(format!("matrix is not positive definite ({e})"))
            })?;
            let x = chol.solve(b);
            let rel = (a.mul_vec(&x) - b).norm() / bnorm;
            if rel > tol {
                return Err(Error::Solver(format!(
                    "dense fallback residual {rel:e} exceeds tolerance {tol:e}"
                )));
            }
            Ok((
                x,
                SolveReport {
                    iterations: 0,
                    relative_residual: rel,
                    dense_fallback: true,
                },
            ))
        }
        Err(e) => Err(e),
    }
}

fn pcg(
    a: &SparseSymMatrix,
    b: &DVector<f64>,
    tol: f64,
    cap: usize,
) -> Result<(DVector<f64>, SolveReport)> {
    let n = a.dim();
    let bnorm = b.norm();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Solver("non-positive diagonal entry".into()));
    }
    let inv_diag = diag.map(|d| 1.0 / d);
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 0..cap {
        a.mul_vec_into(p.as_slice(), ap.as_mut_slice());
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!(
                "conjugate gradients hit non-positive curvature {pap:e} at step {it}"
            )));
        }
        let step = rz / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        // Recompute the true residual near convergence to avoid drift.
        if r.norm() <= tol * bnorm {
            let true_res = (b - a.mul_vec(&x)).norm() / bnorm;
            if true_res <= tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: it + 1,
                        relative_residual: true_res,
                        dense_fallback: false,
                    },
                ));
            }
            r = b - a.mul_vec(&x);
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        p = &z + (rz_new / rz) * &p;
        rz = rz_new;
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not reach {tol:e} within {cap} iterations"
    )))
}
