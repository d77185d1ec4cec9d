//! Lagrange P1/P2 finite elements with homogeneous Dirichlet conditions.
//!
//! Dirichlet conditions are imposed by eliminating boundary dofs, so every
//! [`FemVector`] lives on the free dofs only and the stiffness matrix of a
//! positive coefficient is positive definite.

mod quadrature;
mod sparse;

pub use quadrature::TriangleRule;
pub use sparse::{
    solve_spd, solve_spd_report, SolveReport, SparseSymMatrix, DEFAULT_SOLVER_TOL,
    DENSE_FALLBACK_MAX_DIM,
};

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::coeff::{lagrange_shape, CoefficientField, PiecewiseField};
use crate::locate::PointLocator;
use crate::mesh::{midpoint, Mesh};
use crate::{Error, Point, Result};

/// Coefficient vector over the free dofs of a [`FemSpace`].
pub type FemVector = DVector<f64>;

/// Per-element quadrature data.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    /// Physical quadrature points.
    pub points: Vec<Point>,
    /// Weights including the element area.
    pub weights: Vec<f64>,
    /// `values[q][i]`: local basis function `i` at point `q`.
    pub values: Vec<Vec<f64>>,
    /// `grads[q][i]`: gradient of local basis function `i` at point `q`.
    pub grads: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    dof_coords: Vec<Point>,
    triangle_dofs: Arc<Vec<Vec<usize>>>,
    free_dofs: Vec<usize>,
    constrained_dofs: Vec<usize>,
    /// Global dof to free index.
    free_index: Vec<Option<usize>>,
    elements: Vec<ElementQuadrature>,
    pattern: SparseSymMatrix,
    locator: Arc<PointLocator>,
}

impl FemSpace {
    /// Builds the space with the default degree-4 quadrature rule.
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Self::with_rule(mesh, degree, &TriangleRule::degree4())
    }

    pub fn with_rule(mesh: Arc<Mesh>, degree: usize, rule: &TriangleRule) -> Result<Self> {
        let (locator, triangle_dofs) = PiecewiseField::layout(&mesh, degree)?;
        let table = mesh.edge_table();
        let mut dof_coords = mesh.nodes().to_vec();
        let mut on_boundary = mesh.boundary_flags().to_vec();
        if degree == 2 {
            let bset: BTreeSet<[usize; 2]> = mesh.boundary_edges().iter().copied().collect();
            for e in &table.edges {
                dof_coords.push(midpoint(mesh.nodes()[e[0]], mesh.nodes()[e[1]]));
                on_boundary.push(bset.contains(e));
            }
        }
        let mut free_index = vec![None; dof_coords.len()];
        let mut free_dofs = Vec::new();
        let mut constrained_dofs = Vec::new();
        for (d, &b) in on_boundary.iter().enumerate() {
            if b {
                constrained_dofs.push(d);
            } else {
                free_index[d] = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        let elements = (0..mesh.num_triangles())
            .map(|t| element_quadrature(&mesh, t, degree, rule))
            .collect();
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); free_dofs.len()];
        for dofs in triangle_dofs.iter() {
            for &a in dofs {
                let Some(i) = free_index[a] else { continue };
                for &b in dofs {
                    if let Some(j) = free_index[b] {
                        rows[i].insert(j);
                    }
                }
            }
        }
        let rows: Vec<Vec<usize>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        let pattern = SparseSymMatrix::from_pattern(&rows);
        Ok(Self {
            mesh,
            degree,
            dof_coords,
            triangle_dofs: Arc::new(triangle_dofs),
            free_dofs,
            constrained_dofs,
            free_index,
            elements,
            pattern,
            locator: Arc::new(locator),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn triangle_dofs(&self, t: usize) -> &[usize] {
        &self.triangle_dofs[t]
    }

    pub fn elements(&self) -> &[ElementQuadrature] {
        &self.elements
    }

    /// All quadrature points, element by element.
    pub fn quadrature_points(&self) -> Vec<Point> {
        self.elements.iter().flat_map(|e| e.points.iter().copied()).collect()
    }

    /// Samples a field at every quadrature point, rejecting non-finite values.
    pub fn sample_at_quadrature(&self, a: &CoefficientField) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.elements.len() * 6);
        for e in &self.elements {
            for &p in &e.points {
                let v = a.eval(p)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("field value {v} at {p:?}")));
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// `int a grad(phi_j) . grad(phi_i)` over free dofs.
    pub fn assemble_stiffness(&self, a: &CoefficientField) -> Result<SparseSymMatrix> {
        let samples = self.sample_at_quadrature(a)?;
        Ok(self.assemble_stiffness_sampled(&samples))
    }

    /// Stiffness for coefficient values given at the quadrature points.
    pub fn assemble_stiffness_sampled(&self, samples: &[f64]) -> SparseSymMatrix {
        let mut k = self.pattern.clone();
        let mut offset = 0;
        for (t, e) in self.elements.iter().enumerate() {
            let dofs = &self.triangle_dofs[t];
            let nloc = dofs.len();
            let mut local = vec![0.0; nloc * nloc];
            for (q, w) in e.weights.iter().enumerate() {
                let aw = w * samples[offset + q];
                let g = &e.grads[q];
                for i in 0..nloc {
                    for j in 0..nloc {
                        local[i * nloc + j] += aw * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
            offset += e.weights.len();
            for i in 0..nloc {
                let Some(fi) = self.free_index[dofs[i]] else { continue };
                for j in 0..nloc {
                    if let Some(fj) = self.free_index[dofs[j]] {
                        k.add(fi, fj, local[i * nloc + j]);
                    }
                }
            }
        }
        k
    }

    /// `int f phi_i` over free dofs.
    pub fn assemble_load(&self, f: &CoefficientField) -> Result<FemVector> {
        let samples = self.sample_at_quadrature(f)?;
        let mut out = DVector::zeros(self.num_free());
        let mut offset = 0;
        for (t, e) in self.elements.iter().enumerate() {
            let dofs = &self.triangle_dofs[t];
            for (q, w) in e.weights.iter().enumerate() {
                let fw = w * samples[offset + q];
                for (i, &d) in dofs.iter().enumerate() {
                    if let Some(fi) = self.free_index[d] {
                        out[fi] += fw * e.values[q][i];
                    }
                }
            }
            offset += e.weights.len();
        }
        Ok(out)
    }

    /// Global dof vector (zeros on the boundary) for a free-dof vector.
    pub fn expand(&self, v: &FemVector) -> Vec<f64> {
        let mut full = vec![0.0; self.num_dofs()];
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = v[i];
        }
        full
    }

    /// The finite element function as a pointwise field.
    pub fn as_field(&self, v: &FemVector) -> Result<PiecewiseField> {
        PiecewiseField::with_layout(
            self.mesh.clone(),
            self.locator.clone(),
            self.triangle_dofs.clone(),
            self.degree,
            self.expand(v),
        )
    }

    /// Nodal interpolant restricted to the free dofs.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> FemVector {
        DVector::from_iterator(
            self.num_free(),
            self.free_dofs.iter().map(|&d| f(self.dof_coords[d])),
        )
    }

    /// Gradient of a finite element function at quadrature point `q` of element `t`.
    pub fn gradient_at(&self, full: &[f64], t: usize, q: usize) -> [f64; 2] {
        let e = &self.elements[t];
        let mut g = [0.0; 2];
        for (i, &d) in self.triangle_dofs[t].iter().enumerate() {
            g[0] += full[d] * e.grads[q][i][0];
            g[1] += full[d] * e.grads[q][i][1];
        }
        g
    }
}

fn element_quadrature(mesh: &Mesh, t: usize, degree: usize, rule: &TriangleRule) -> ElementQuadrature {
    let p = mesh.triangle_points(t);
    let area = mesh.triangle_area(t);
    // grad(lambda_i) = perp(p_{i+2} - p_{i+1}) / (2 area)
    let gl: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
    });
    let mut out = ElementQuadrature {
        points: Vec::with_capacity(rule.len()),
        weights: Vec::with_capacity(rule.len()),
        values: Vec::with_capacity(rule.len()),
        grads: Vec::with_capacity(rule.len()),
    };
    for (l, w) in &rule.points {
        out.points.push([
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]);
        out.weights.push(w * area);
        out.values.push(lagrange_shape(degree, *l));
        let grads = match degree {
            1 => gl.to_vec(),
            _ => {
                let lin = |c: f64, g: [f64; 2]| [c * g[0], c * g[1]];
                let add = |a: [f64; 2], b: [f64; 2]| [a[0] + b[0], a[1] + b[1]];
                vec![
                    lin(4.0 * l[0] - 1.0, gl[0]),
                    lin(4.0 * l[1] - 1.0, gl[1]),
                    lin(4.0 * l[2] - 1.0, gl[2]),
                    add(lin(4.0 * l[2], gl[1]), lin(4.0 * l[1], gl[2])),
                    add(lin(4.0 * l[0], gl[2]), lin(4.0 * l[2], gl[0])),
                    add(lin(4.0 * l[1], gl[0]), lin(4.0 * l[0], gl[1])),
                ]
            }
        };
        out.grads.push(grads);
    }
    out
}

/// Problem data `(alpha, beta, a0, f)`.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub beta: f64,
    pub a0: CoefficientField,
    pub f: CoefficientField,
}

impl ProblemConfig {
    pub fn new(alpha: f64, beta: f64, a0: CoefficientField, f: CoefficientField) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && beta < alpha) {
            return Err(Error::InvalidInput(format!(
                "need 0 < beta < alpha, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta, a0, f })
    }

    /// `a0 = 1` with the given source.
    pub fn with_unit_nominal(alpha: f64, beta: f64, f: CoefficientField) -> Result<Self> {
        Self::new(alpha, beta, CoefficientField::Constant(1.0), f)
    }
}

/// A [`FemSpace`] together with problem data and the cached nominal
/// stiffness `K(a0)` that defines the energy norm.
#[derive(Debug)]
pub struct Problem {
    space: Arc<FemSpace>,
    config: ProblemConfig,
    k_a0: SparseSymMatrix,
    load: FemVector,
    /// Factor applied to `config.f`.
    source_scale: f64,
    tol: f64,
}

/// Galerkin solution plus the sampled range of the coefficient it used.
#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    pub u: FemVector,
    pub coeff_min: f64,
    pub coeff_max: f64,
}

impl Problem {
    pub fn new(space: Arc<FemSpace>, config: ProblemConfig) -> Result<Self> {
        let k_a0 = space.assemble_stiffness(&config.a0)?;
        let a0_samples = space.sample_at_quadrature(&config.a0)?;
        if a0_samples.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput("nominal coefficient a0 must be positive".into()));
        }
        let load = space.assemble_load(&config.f)?;
        Ok(Self {
            space,
            config,
            k_a0,
            load,
            source_scale: 1.0,
            tol: DEFAULT_SOLVER_TOL,
        })
    }

    /// Like [`Problem::new`] but rescales the source so that
    /// `||S(alpha a0)||_Y = 1`, i.e. the discrete dual norm of `f` equals `alpha`.
    pub fn normalized(space: Arc<FemSpace>, config: ProblemConfig) -> Result<Self> {
        let mut p = Self::new(space, config)?;
        let d = p.dual_norm_of_load()?;
        if !(d > 0.0) {
            return Err(Error::InvalidInput("source vanishes on this space".into()));
        }
        let s = p.config.alpha / d;
        p.load *= s;
        p.source_scale = s;
        Ok(p)
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn source_scale(&self) -> f64 {
        self.source_scale
    }

    pub fn solver_tol(&self) -> f64 {
        self.tol
    }

    pub fn set_solver_tol(&mut self, tol: f64) {
        self.tol = tol;
    }

    /// `K(a0)`.
    pub fn nominal_stiffness(&self) -> &SparseSymMatrix {
        &self.k_a0
    }

    /// Load vector of the (possibly rescaled) source.
    pub fn load(&self) -> &FemVector {
        &self.load
    }

    pub fn stiffness(&self, a: &CoefficientField) -> Result<SparseSymMatrix> {
        self.space.assemble_stiffness(a)
    }

    pub fn energy_inner(&self, u: &FemVector, v: &FemVector) -> f64 {
        self.k_a0.bilinear(u, v)
    }

    /// `sqrt(v^T K(a0) v)`.
    pub fn energy_norm(&self, v: &FemVector) -> f64 {
        self.energy_inner(v, v).max(0.0).sqrt()
    }

    /// Discrete Riesz representer: `K(a0) r = F`.
    pub fn riesz(&self, functional: &FemVector) -> Result<FemVector> {
        solve_spd(&self.k_a0, functional, self.tol)
    }

    /// Discrete dual norm of a functional given by its load vector.
    pub fn dual_norm(&self, functional: &FemVector) -> Result<f64> {
        let r = self.riesz(functional)?;
        Ok(self.energy_norm(&r))
    }

    /// Discrete dual norm of the problem's source.
    pub fn dual_norm_of_load(&self) -> Result<f64> {
        self.dual_norm(&self.load)
    }

    /// Discrete dual norm of an arbitrary source field (unscaled).
    pub fn dual_norm_of(&self, f: &CoefficientField) -> Result<f64> {
        self.dual_norm(&self.space.assemble_load(f)?)
    }

    /// `S^{Y_h}(a)`; `a` must lie in `D(alpha, beta)` at every quadrature point.
    pub fn galerkin_solve(&self, a: &CoefficientField) -> Result<FemVector> {
        self.galerkin_solve_checked(a).map(|s| s.u)
    }

    pub fn galerkin_solve_checked(&self, a: &CoefficientField) -> Result<GalerkinSolution> {
        let samples = self.space.sample_at_quadrature(a)?;
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let slack = crate::coeff::MEMBERSHIP_SLACK;
        if min < alpha - beta - slack || max > alpha + beta + slack {
            let (imin, imax) = argminmax(&samples);
            let pts = self.space.quadrature_points();
            return Err(Error::Membership {
                alpha,
                beta,
                min,
                min_at: pts[imin],
                max,
                max_at: pts[imax],
            });
        }
        let k = self.space.assemble_stiffness_sampled(&samples);
        let u = solve_spd(&k, &self.load, self.tol)?;
        Ok(GalerkinSolution {
            u,
            coeff_min: min,
            coeff_max: max,
        })
    }

    /// Solve without the admissibility check (any positive coefficient).
    pub fn solve_unchecked(&self, a: &CoefficientField) -> Result<FemVector> {
        let k = self.space.assemble_stiffness(a)?;
        solve_spd(&k, &self.load, self.tol)
    }

    /// Gram matrix `V^T K(a0) V` of the columns of `V`.
    pub fn energy_gram(&self, columns: &DMatrix<f64>) -> DMatrix<f64> {
        let kv = self.k_a0.mul_dense(columns);
        columns.transpose() * kv
    }
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[imin] {
            imin = i;
        }
        if x > v[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Writes one value per line with 17 significant digits.
pub fn write_vector_csv<W: Write>(v: &[f64], mut out: W) -> Result<()> {
    for x in v {
        writeln!(out, "{x:.16e}")?;
    }
    Ok(())
}

pub fn read_vector_csv(s: &str) -> Result<Vec<f64>> {
    s.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad value {l:?}")))
        })
        .collect()
}
