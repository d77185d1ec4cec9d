//! Reduced Galerkin systems and the Richardson iteration
//! `c <- (I - (alpha B_a0)^-1 B_v) c + (alpha B_a0)^-1 f_N`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::coeff::CoefficientField;
use crate::fem::Problem;
use crate::table::{num, Table};
use crate::{Error, Result};

/// Reduced matrices for one coefficient `v` in a fixed basis `Q`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub alpha: f64,
    /// `Q^T K(a0) Q`.
    pub b_a0: DMatrix<f64>,
    pub chol_b_a0: Cholesky<f64, Dyn>,
    /// `Q^T F`.
    pub f_n: DVector<f64>,
    /// `Q^T K(v) Q`.
    pub b_v: DMatrix<f64>,
    /// `I - (alpha B_a0)^-1 B_v`.
    pub a_v: DMatrix<f64>,
    /// `(alpha B_a0)^-1 f_N`.
    pub g: DVector<f64>,
}

/// Coefficient-independent part of the reduced systems for a basis.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    alpha: f64,
    basis: DMatrix<f64>,
    b_a0: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    f_n: DVector<f64>,
    g: DVector<f64>,
}

impl ReducedOperator {
    pub fn new(problem: &Problem, basis: &DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != problem.space().num_free() || basis.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: problem.space().num_free(),
                found: basis.nrows(),
            });
        }
        let b_a0 = problem.energy_gram(basis);
        let b_a0 = 0.5 * (&b_a0 + b_a0.transpose());
        let chol = b_a0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("reduced nominal matrix is not positive definite".into()))?;
        let f_n = basis.tr_mul(problem.load());
        let g = chol.solve(&f_n) / problem.alpha();
        Ok(Self {
            alpha: problem.alpha(),
            basis: basis.clone(),
            b_a0,
            chol,
            f_n,
            g,
        })
    }

    pub fn size(&self) -> usize {
        self.basis.ncols()
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn b_a0(&self) -> &DMatrix<f64> {
        &self.b_a0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `(alpha B_a0)^-1 m`.
    pub fn solve_nominal(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(m) / self.alpha
    }

    pub fn system(&self, problem: &Problem, v: &CoefficientField) -> Result<ReducedSystem> {
        let k = problem.stiffness(v)?;
        Ok(self.system_from_b_v(self.basis.tr_mul(&k.mul_dense(&self.basis))))
    }

    /// System for a coefficient given by its values at the quadrature points.
    pub fn system_sampled(&self, problem: &Problem, samples: &[f64]) -> ReducedSystem {
        let k = problem.space().assemble_stiffness_sampled(samples);
        self.system_from_b_v(self.basis.tr_mul(&k.mul_dense(&self.basis)))
    }

    pub fn system_from_b_v(&self, b_v: DMatrix<f64>) -> ReducedSystem {
        let b_v = 0.5 * (&b_v + b_v.transpose());
        let n = self.size();
        let a_v = DMatrix::identity(n, n) - self.chol.solve(&b_v) / self.alpha;
        ReducedSystem {
            alpha: self.alpha,
            b_a0: self.b_a0.clone(),
            chol_b_a0: self.chol.clone(),
            f_n: self.f_n.clone(),
            b_v,
            a_v,
            g: self.g.clone(),
        }
    }
}

/// One-shot assembly of the reduced system of `v` in the basis columns.
pub fn assemble_reduced(problem: &Problem, basis: &DMatrix<f64>, v: &CoefficientField) -> Result<ReducedSystem> {
    ReducedOperator::new(problem, basis)?.system(problem, v)
}

impl ReducedSystem {
    pub fn size(&self) -> usize {
        self.g.len()
    }

    /// Dense solution of `B_v c = f_N`.
    pub fn direct_solve(&self) -> Result<DVector<f64>> {
        let chol = self
            .b_v
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("reduced matrix B_v is not positive definite".into()))?;
        Ok(chol.solve(&self.f_n))
    }

    /// One Richardson step.
    pub fn step(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.a_v * c + &self.g
    }
}

/// Spectral norm by power iteration on `A^T A`, to relative tolerance
/// `1e-12` within `10^4` iterations.
pub fn contraction_norm(a: &DMatrix<f64>) -> Result<f64> {
    spectral_norm(a, 1e-12, 10_000)
}

pub fn spectral_norm(a: &DMatrix<f64>, tol: f64, cap: usize) -> Result<f64> {
    let ata = a.tr_mul(a);
    let n = ata.nrows();
    if n == 0 || ata.amax() == 0.0 {
        return Ok(0.0);
    }
    // Deterministic start with components along every coordinate.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..cap {
        let y = &ata * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        let next = x.dot(&y);
        x = y / ny;
        if (next - lambda).abs() <= tol * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        lambda = next;
    }
    Err(Error::Solver(format!(
        "power iteration did not settle to {tol:e} within {cap} steps"
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub c: DVector<f64>,
    pub k: usize,
    /// `c^(0), ..., c^(k)`.
    pub iterates: Vec<DVector<f64>>,
}

impl IterationState {
    pub fn norms(&self) -> Vec<f64> {
        self.iterates.iter().map(|c| c.norm()).collect()
    }
}

/// `k_steps` Richardson steps from `c^(0) = e1`.
pub fn iterate(system: &ReducedSystem, k_steps: usize) -> IterationState {
    let mut c = DVector::zeros(system.size());
    c[0] = 1.0;
    let mut iterates = Vec::with_capacity(k_steps + 1);
    iterates.push(c.clone());
    for _ in 0..k_steps {
        c = system.step(&c);
        iterates.push(c.clone());
    }
    IterationState {
        c,
        k: k_steps,
        iterates,
    }
}

/// Step count `K` for a target accuracy `epsilon`.
pub fn choose_k(alpha: f64, beta: f64, f_dual_norm: f64, epsilon: f64) -> Result<usize> {
    if !(alpha > 0.0 && beta >= 0.0 && beta < alpha) {
        return Err(Error::InvalidInput(format!(
            "need 0 <= beta < alpha, got alpha={alpha}, beta={beta}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(f_dual_norm > 0.0) {
        return Err(Error::InvalidInput("source dual norm must be positive".into()));
    }
    if beta == 0.0 {
        return Ok(1);
    }
    let num = (epsilon / 2.0).ln().abs() + (f_dual_norm.ln() - (alpha - beta).ln()).abs();
    Ok((num / (beta / alpha).ln().abs()).ceil() as usize)
}

/// `sqrt(d^T G d)` with `d = c - c_ref`.
pub fn reduced_energy_error(gram: &DMatrix<f64>, c: &DVector<f64>, c_ref: &DVector<f64>) -> f64 {
    let d = c - c_ref;
    d.dot(&(gram * &d)).max(0.0).sqrt()
}

/// CSV columns `k,ell2_norm,energy_error_vs_direct`.
pub fn history_table(state: &IterationState, gram: &DMatrix<f64>, direct: &DVector<f64>) -> Table {
    let mut t = Table::new(&["k", "ell2_norm", "energy_error_vs_direct"]);
    for (k, c) in state.iterates.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            num(c.norm()),
            num(reduced_energy_error(gram, c, direct)),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{CoefficientField as C, DataFamily, FamilyKind, Mode};
    use crate::fem::{FemSpace, ProblemConfig};
    use crate::locate::PointLocator;
    use crate::mesh::{Mesh, Polygon};
    use crate::reduced_basis::{generate_snapshots, weak_greedy, ReducedBasis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    const ALPHA: f64 = 1.0;
    const BETA: f64 = 0.5;

    fn family() -> DataFamily {
        DataFamily::new(
            FamilyKind::Parametric {
                modes: vec![
                    Mode::SinSin { kx: 1.0, ky: 1.0 },
                    Mode::CosCos { kx: 1.0, ky: 1.0 },
                    Mode::SinCos { kx: 2.0, ky: 1.0 },
                    Mode::CosSin { kx: 1.0, ky: 3.0 },
                ],
                amplitude: 1.0,
            },
            ALPHA,
            BETA,
        )
        .unwrap()
    }

    fn setup() -> (Problem, ReducedBasis) {
        let space = Arc::new(FemSpace::new(Arc::new(Mesh::unit_square(8).unwrap()), 1).unwrap());
        let cfg = ProblemConfig::with_unit_nominal(ALPHA, BETA, C::Constant(1.0)).unwrap();
        let p = Problem::normalized(space, cfg).unwrap();
        let snaps = generate_snapshots(&p, &family(), &Polygon::unit_square(), 30, 1, 30).unwrap();
        let (b, _) = weak_greedy(&p, &snaps, 6, 1.0).unwrap();
        (p, b)
    }

    fn tests_fields(count: usize) -> Vec<C> {
        crate::coeff::sample_family(&family(), &Polygon::unit_square(), count, 99, 30).unwrap()
    }

    fn e1(n: usize) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[0] = 1.0;
        e
    }

    #[test]
    fn nominal_in_ortho_basis_is_identity_and_g_is_e1() {
        let (p, b) = setup();
        let s = assemble_reduced(&p, b.ortho(), &C::Constant(1.0)).unwrap();
        assert!((&s.b_v - DMatrix::identity(7, 7)).amax() < 1e-10);
        assert!((&s.g - e1(7)).amax() < 1e-10);
        let raw = assemble_reduced(&p, b.psi(), &C::Constant(1.0)).unwrap();
        assert!((&raw.g - e1(7)).amax() < 1e-10);
    }

    #[test]
    fn piecewise_constant_hand_quadrature() {
        let mesh = Arc::new(Mesh::unit_square(3).unwrap());
        let space = Arc::new(FemSpace::new(mesh.clone(), 1).unwrap());
        let cfg = ProblemConfig::with_unit_nominal(ALPHA, BETA, C::Constant(1.0)).unwrap();
        let p = Problem::new(space.clone(), cfg).unwrap();
        let vals: Vec<f64> = (0..mesh.num_triangles()).map(|t| 0.6 + 0.05 * (t % 7) as f64).collect();
        let loc = PointLocator::new(&mesh);
        let vt = vals.clone();
        let v = C::from_fn("pc", move |x| vt[loc.locate(x).unwrap().0]);
        let q = DMatrix::from_fn(space.num_free(), 2, |i, j| ((i + 1) as f64).powi(j as i32 + 1).sin());
        let s = assemble_reduced(&p, &q, &v).unwrap();
        // Hand oracle: constant gradients of P1 functions on each triangle.
        let grad = |col: usize, t: usize| -> [f64; 2] {
            let full = space.expand(&q.column(col).into_owned());
            let tri = mesh.triangles()[t];
            let pt = mesh.triangle_points(t);
            let (x0, y0) = (pt[0][0], pt[0][1]);
            let (a, b) = ([pt[1][0] - x0, pt[1][1] - y0], [pt[2][0] - x0, pt[2][1] - y0]);
            let (du1, du2) = (full[tri[1]] - full[tri[0]], full[tri[2]] - full[tri[0]]);
            let det = a[0] * b[1] - a[1] * b[0];
            [(du1 * b[1] - du2 * a[1]) / det, (du2 * a[0] - du1 * b[0]) / det]
        };
        for i in 0..2 {
            for j in 0..2 {
                let mut h = 0.0;
                for t in 0..mesh.num_triangles() {
                    let (gi, gj) = (grad(i, t), grad(j, t));
                    h += vals[t] * mesh.triangle_area(t) * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
                assert!((s.b_v[(i, j)] - h).abs() < 1e-12 * h.abs().max(1.0));
            }
        }
    }

    #[test]
    fn contraction_bounds() {
        let (p, b) = setup();
        let op = ReducedOperator::new(&p, b.ortho()).unwrap();
        let nominal = op.system(&p, &C::Constant(ALPHA)).unwrap();
        assert!(contraction_norm(&nominal.a_v).unwrap() < 1e-10);
        for v in tests_fields(10) {
            let s = op.system(&p, &v).unwrap();
            let c = contraction_norm(&s.a_v).unwrap();
            let svd = s.a_v.clone().singular_values().max();
            assert!((c - svd).abs() < 1e-10);
            assert!(c <= BETA / ALPHA + 1e-10, "{c}");
        }
    }

    #[test]
    fn power_iteration_matches_svd() {
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -0.1, 0.2, 0.05, 0.4, -0.3, 0.1, 0.0, 0.25]);
        let svd = a.clone().singular_values().max();
        assert!((contraction_norm(&a).unwrap() - svd).abs() < 1e-10);
        assert_eq!(contraction_norm(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn nominal_fixed_point_in_one_step() {
        let (p, b) = setup();
        let s = assemble_reduced(&p, b.ortho(), &C::Constant(ALPHA)).unwrap();
        let st = iterate(&s, 3);
        assert_eq!(st.iterates[0].norm(), 1.0);
        for c in &st.iterates[1..] {
            assert!((c - e1(7)).amax() < 1e-12);
        }
    }

    #[test]
    fn geometric_convergence_and_bounds() {
        let (p, b) = setup();
        let op = ReducedOperator::new(&p, b.ortho()).unwrap();
        let fnorm = p.dual_norm_of_load().unwrap();
        let q = BETA / ALPHA;
        for v in tests_fields(20) {
            let s = op.system(&p, &v).unwrap();
            let direct = s.direct_solve().unwrap();
            let st = iterate(&s, 50);
            let g = &s.b_a0;
            let errs: Vec<f64> = st.iterates.iter().map(|c| reduced_energy_error(g, c, &direct)).collect();
            for k in 0..50 {
                if errs[k] > 1e-14 {
                    assert!(errs[k + 1] <= (q + 1e-8) * errs[k]);
                }
                assert!(errs[k] <= q.powi(k as i32 + 1) * fnorm / (ALPHA - BETA) + 1e-8);
                let cn = st.iterates[k].norm();
                assert!(cn <= q.powi(k as i32) + ALPHA / (ALPHA - BETA) + 1e-8);
            }
            let long = iterate(&s, 200);
            assert!((&long.c - &direct).norm() < 1e-10);
        }
    }

    #[test]
    fn choose_k_formula() {
        assert_eq!(choose_k(1.0, 0.5, 1.0, 1e-3).unwrap(), 12);
        assert_eq!(choose_k(1.0, 0.0, 1.0, 1e-3).unwrap(), 1);
        let mut last = usize::MAX;
        for e in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5] {
            let k = choose_k(1.0, 0.5, 1.0, e).unwrap();
            assert!(k <= last);
            last = k;
        }
        // ||f|| = alpha - beta removes the second term.
        let k = choose_k(2.0, 0.5, 1.5, 1e-2).unwrap();
        assert_eq!(k, ((1e-2f64 / 2.0).ln().abs() / (0.25f64).ln().abs()).ceil() as usize);
        assert!(choose_k(1.0, 1.0, 1.0, 1e-2).is_err());
        assert!(choose_k(1.0, 0.5, 1.0, 1.5).is_err());
    }

    #[test]
    fn reduced_energy_error_cases() {
        let (p, b) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = b.size();
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(reduced_energy_error(&b.gram(), &c, &c), 0.0);
        let go = p.energy_gram(b.ortho());
        assert!((reduced_energy_error(&go, &c, &d) - (&c - &d).norm()).abs() < 1e-12);
        let full = p.energy_norm(&(b.synthesize(&c).unwrap() - b.synthesize(&d).unwrap()));
        assert!((reduced_energy_error(&p.energy_gram(b.psi()), &c, &d) - full).abs() < 1e-10);
    }

    #[test]
    fn history_csv_columns() {
        let (p, b) = setup();
        let s = assemble_reduced(&p, b.ortho(), &tests_fields(1)[0]).unwrap();
        let st = iterate(&s, 4);
        let t = history_table(&st, &s.b_a0, &s.direct_solve().unwrap());
        assert_eq!(t.columns, vec!["k", "ell2_norm", "energy_error_vs_direct"]);
        assert_eq!(t.rows.len(), 5);
    }
}
