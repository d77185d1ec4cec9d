//! Coefficient fields, data families and admissibility checks.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::locate::PointLocator;
use crate::mesh::{Mesh, Polygon};
use crate::{Error, Point, Result};

/// Membership in `D(alpha, beta)` is decided with this slack on grid samples.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// A scalar field that can be plugged into [`CoefficientField::Dyn`].
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn eval(&self, x: Point) -> Result<f64>;
}

/// A smooth elementary function of the plane.
///
/// Trigonometric modes use frequencies in units of pi: `SinSin { kx, ky }` is
/// `sin(kx*pi*x) * sin(ky*pi*y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mode {
    SinSin { kx: f64, ky: f64 },
    SinCos { kx: f64, ky: f64 },
    CosSin { kx: f64, ky: f64 },
    CosCos { kx: f64, ky: f64 },
    Exp { cx: f64, cy: f64 },
    Monomial { px: u32, py: u32 },
}

impl Mode {
    pub fn eval(&self, x: Point) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Mode::SinSin { kx, ky } => (kx * PI * x[0]).sin() * (ky * PI * x[1]).sin(),
            Mode::SinCos { kx, ky } => (kx * PI * x[0]).sin() * (ky * PI * x[1]).cos(),
            Mode::CosSin { kx, ky } => (kx * PI * x[0]).cos() * (ky * PI * x[1]).sin(),
            Mode::CosCos { kx, ky } => (kx * PI * x[0]).cos() * (ky * PI * x[1]).cos(),
            Mode::Exp { cx, cy } => (cx * x[0] + cy * x[1]).exp(),
            Mode::Monomial { px, py } => x[0].powi(px as i32) * x[1].powi(py as i32),
        }
    }

    /// Upper bound of `max_{|nu| = order} sup |d^nu mode|` over the box
    /// `[-r, r]^2` (trigonometric bounds are global).
    pub fn derivative_bound(&self, order: u32, r: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Mode::SinSin { kx, ky }
            | Mode::SinCos { kx, ky }
            | Mode::CosSin { kx, ky }
            | Mode::CosCos { kx, ky } => (PI * kx.abs().max(ky.abs())).powi(order as i32),
            Mode::Exp { cx, cy } => {
                cx.abs().max(cy.abs()).powi(order as i32) * ((cx.abs() + cy.abs()) * r).exp()
            }
            Mode::Monomial { px, py } => {
                let deg = px + py;
                if order > deg {
                    return 0.0;
                }
                // crude: falling factorial times r^(deg-order)
                let fall: f64 = (0..order).map(|i| (deg - i) as f64).product();
                fall * r.powi((deg - order) as i32)
            }
        }
    }
}

/// `alpha + sum_k coefficients[k] * modes[k](x)`; `beta` is the family bound
/// the field was drawn for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricField {
    pub kind: String,
    pub alpha: f64,
    pub beta: f64,
    pub modes: Vec<Mode>,
    pub coefficients: Vec<f64>,
}

impl ParametricField {
    pub fn new(alpha: f64, beta: f64, modes: Vec<Mode>, coefficients: Vec<f64>) -> Result<Self> {
        if modes.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: coefficients.len(),
            });
        }
        Ok(Self {
            kind: "parametric".into(),
            alpha,
            beta,
            modes,
            coefficients,
        })
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.alpha
            + self
                .modes
                .iter()
                .zip(&self.coefficients)
                .map(|(m, c)| c * m.eval(x))
                .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        if f.modes.len() != f.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: f.modes.len(),
                found: f.coefficients.len(),
            });
        }
        Ok(f)
    }
}

/// Continuous piecewise-polynomial field given by Lagrange nodal values
/// (P1: one value per mesh node; P2: nodes followed by edge midpoints in
/// edge-table order).
#[derive(Debug, Clone)]
pub struct PiecewiseField {
    mesh: Arc<Mesh>,
    locator: Arc<PointLocator>,
    triangle_dofs: Arc<Vec<Vec<usize>>>,
    degree: usize,
    values: Vec<f64>,
}

impl PiecewiseField {
    pub fn new(mesh: Arc<Mesh>, degree: usize, values: Vec<f64>) -> Result<Self> {
        let (locator, dofs) = Self::layout(&mesh, degree)?;
        Self::with_layout(mesh, Arc::new(locator), Arc::new(dofs), degree, values)
    }

    /// Local-to-global Lagrange dof map for P1/P2 on `mesh`.
    pub fn layout(mesh: &Mesh, degree: usize) -> Result<(PointLocator, Vec<Vec<usize>>)> {
        let dofs = match degree {
            1 => mesh.triangles().iter().map(|t| t.to_vec()).collect(),
            2 => {
                let table = mesh.edge_table();
                let n = mesh.num_nodes();
                mesh.triangles()
                    .iter()
                    .zip(&table.triangle_edges)
                    .map(|(t, e)| vec![t[0], t[1], t[2], n + e[0], n + e[1], n + e[2]])
                    .collect()
            }
            _ => return Err(Error::InvalidInput(format!("degree must be 1 or 2, got {degree}"))),
        };
        Ok((PointLocator::new(mesh), dofs))
    }

    pub fn with_layout(
        mesh: Arc<Mesh>,
        locator: Arc<PointLocator>,
        triangle_dofs: Arc<Vec<Vec<usize>>>,
        degree: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = match degree {
            1 => mesh.num_nodes(),
            _ => mesh.num_nodes() + mesh.edge_table().edges.len(),
        };
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            mesh,
            locator,
            triangle_dofs,
            degree,
            values,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        let (t, l) = self
            .locator
            .locate(x)
            .ok_or_else(|| Error::InvalidInput(format!("point {x:?} outside the field mesh")))?;
        let dofs = &self.triangle_dofs[t];
        let shape = lagrange_shape(self.degree, l);
        Ok(shape
            .iter()
            .zip(dofs)
            .map(|(s, &d)| s * self.values[d])
            .sum())
    }
}

/// Lagrange shape functions in barycentric coordinates; P2 edge functions
/// follow the "edge k is opposite vertex k" convention.
pub fn lagrange_shape(degree: usize, l: [f64; 3]) -> Vec<f64> {
    match degree {
        1 => l.to_vec(),
        _ => vec![
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
            4.0 * l[0] * l[1],
        ],
    }
}

/// A coefficient field `a: Omega -> R`.
#[derive(Debug, Clone)]
pub enum CoefficientField {
    Constant(f64),
    Parametric(ParametricField),
    Piecewise(PiecewiseField),
    /// `offset + sum_k weight_k * field_k`.
    Affine {
        offset: f64,
        terms: Vec<(f64, Arc<CoefficientField>)>,
    },
    /// `a_min + |inner|`.
    AbsShift {
        inner: Arc<CoefficientField>,
        a_min: f64,
    },
    Dyn(Arc<dyn ScalarField>),
}

impl CoefficientField {
    pub fn eval(&self, x: Point) -> Result<f64> {
        match self {
            CoefficientField::Constant(c) => Ok(*c),
            CoefficientField::Parametric(p) => Ok(p.eval(x)),
            CoefficientField::Piecewise(p) => p.eval(x),
            CoefficientField::Affine { offset, terms } => {
                let mut s = *offset;
                for (w, f) in terms {
                    s += w * f.eval(x)?;
                }
                Ok(s)
            }
            CoefficientField::AbsShift { inner, a_min } => Ok(a_min + inner.eval(x)?.abs()),
            CoefficientField::Dyn(f) => f.eval(x),
        }
    }

    pub fn eval_many(&self, xs: &[Point]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Wraps a closure as a field.
    pub fn from_fn<F>(name: &'static str, f: F) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        CoefficientField::Dyn(Arc::new(FnField { name, f }))
    }

    pub fn scaled(&self, c: f64) -> Self {
        CoefficientField::Affine {
            offset: 0.0,
            terms: vec![(c, Arc::new(self.clone()))],
        }
    }

    pub fn sum(&self, other: &CoefficientField) -> Self {
        CoefficientField::Affine {
            offset: 0.0,
            terms: vec![(1.0, Arc::new(self.clone())), (1.0, Arc::new(other.clone()))],
        }
    }
}

struct FnField<F> {
    name: &'static str,
    f: F,
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.name)
    }
}

impl<F: Fn(Point) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn eval(&self, x: Point) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// `x -> a_min + |a(x)|`.
pub fn abs_shift(a: &CoefficientField, a_min: f64) -> CoefficientField {
    CoefficientField::AbsShift {
        inner: Arc::new(a.clone()),
        a_min,
    }
}

/// Sample extrema of a field over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    pub member: bool,
    pub min: f64,
    pub min_at: Point,
    pub max: f64,
    pub max_at: Point,
}

impl MembershipReport {
    /// Smallest `beta'` with the samples inside `[alpha - beta', alpha + beta']`.
    pub fn envelope(&self, alpha: f64) -> f64 {
        (alpha - self.min).max(self.max - alpha)
    }
}

/// Sample points of a `grid_n x grid_n` lattice over the bounding box of
/// `domain` that lie in the closed domain.
pub fn sample_grid(domain: &Polygon, grid_n: usize) -> Vec<Point> {
    let (lo, hi) = domain.bounding_box();
    let step = |k: usize, i: usize| {
        if i == grid_n - 1 {
            hi[k]
        } else {
            lo[k] + (hi[k] - lo[k]) * (i as f64 / (grid_n - 1) as f64)
        }
    };
    let mut pts = Vec::with_capacity(grid_n * grid_n);
    for j in 0..grid_n {
        for i in 0..grid_n {
            let p = [step(0, i), step(1, j)];
            if domain.contains(p) {
                pts.push(p);
            }
        }
    }
    pts
}

/// Extrema of `a` over grid samples; membership in `D(alpha, beta)` means
/// `min >= alpha - beta` and `max <= alpha + beta` (with [`MEMBERSHIP_SLACK`]).
pub fn sample_extrema(a: &CoefficientField, points: &[Point]) -> Result<(f64, Point, f64, Point)> {
    let mut min = (f64::INFINITY, [0.0; 2]);
    let mut max = (f64::NEG_INFINITY, [0.0; 2]);
    for &p in points {
        let v = a.eval(p)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("coefficient value {v} at {p:?}")));
        }
        if v < min.0 {
            min = (v, p);
        }
        if v > max.0 {
            max = (v, p);
        }
    }
    Ok((min.0, min.1, max.0, max.1))
}

pub fn membership(
    a: &CoefficientField,
    alpha: f64,
    beta: f64,
    domain: &Polygon,
    grid_n: usize,
) -> Result<MembershipReport> {
    if grid_n < 2 {
        return Err(Error::InvalidInput(format!("grid_n must be >= 2, got {grid_n}")));
    }
    let pts = sample_grid(domain, grid_n);
    let (min, min_at, max, max_at) = sample_extrema(a, &pts)?;
    Ok(MembershipReport {
        member: min >= alpha - beta - MEMBERSHIP_SLACK && max <= alpha + beta + MEMBERSHIP_SLACK,
        min,
        min_at,
        max,
        max_at,
    })
}

/// How a family draws its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// The single coefficient `alpha * a0` with `a0 = 1`.
    Nominal,
    /// `alpha + amplitude * beta * sum_k y_k m_k / sum_k sup|m_k|`, `y` uniform in `[-1,1]^d`.
    Parametric { modes: Vec<Mode>, amplitude: f64 },
    /// Trigonometric sum with geometrically decaying weights `decay^k`; the
    /// constant `A` of `|v|_{W^{m,inf}} <= A^{m+1} m!` is reported for `m <= 4`.
    Analytic {
        modes: Vec<Mode>,
        decay: f64,
        amplitude: f64,
    },
    /// Cosine series `cos(j pi x) cos(k pi y)`, `1 <= j + k`, `j, k < modes_per_axis`,
    /// with weights `(j^2 + k^2)^(-smoothness/2)`, scaled so that the order-`m`
    /// seminorm is at most `radius`.
    SobolevBall {
        m: u32,
        radius: f64,
        modes_per_axis: usize,
        smoothness: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFamily {
    #[serde(flatten)]
    pub kind: FamilyKind,
    pub alpha: f64,
    pub beta: f64,
}

impl DataFamily {
    pub fn new(kind: FamilyKind, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < alpha) {
            return Err(Error::InvalidInput(format!(
                "family bounds need 0 < beta < alpha, got alpha={alpha}, beta={beta}"
            )));
        }
        match &kind {
            FamilyKind::Parametric { amplitude, .. }
            | FamilyKind::Analytic { amplitude, .. }
            | FamilyKind::SobolevBall { amplitude, .. }
                if !(*amplitude > 0.0 && *amplitude <= 1.0) =>
            {
                return Err(Error::InvalidInput(format!(
                    "amplitude must lie in (0,1], got {amplitude}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, alpha, beta })
    }

    /// Modes and per-mode scale `s_k`; member = `alpha + sum_k s_k y_k m_k`.
    fn scaled_modes(&self) -> (Vec<Mode>, Vec<f64>) {
        match &self.kind {
            FamilyKind::Nominal => (Vec::new(), Vec::new()),
            FamilyKind::Parametric { modes, amplitude } => {
                let total: f64 = modes.iter().map(|m| m.derivative_bound(0, 1.0)).sum();
                let s = amplitude * self.beta / total;
                (modes.clone(), vec![s; modes.len()])
            }
            FamilyKind::Analytic {
                modes,
                decay,
                amplitude,
            } => {
                let w: Vec<f64> = (0..modes.len()).map(|k| decay.powi(k as i32)).collect();
                let total: f64 = w
                    .iter()
                    .zip(modes)
                    .map(|(w, m)| w * m.derivative_bound(0, 1.0))
                    .sum();
                let s = amplitude * self.beta / total;
                (modes.clone(), w.iter().map(|w| w * s).collect())
            }
            FamilyKind::SobolevBall {
                m,
                radius,
                modes_per_axis,
                smoothness,
                amplitude,
            } => {
                let mut modes = Vec::new();
                let mut w = Vec::new();
                for j in 0..*modes_per_axis {
                    for k in 0..*modes_per_axis {
                        if j + k == 0 {
                            continue;
                        }
                        modes.push(Mode::CosCos {
                            kx: j as f64,
                            ky: k as f64,
                        });
                        w.push(((j * j + k * k) as f64).powf(-smoothness / 2.0));
                    }
                }
                let sup: f64 = w.iter().sum();
                let semi: f64 = w
                    .iter()
                    .zip(&modes)
                    .map(|(w, md)| w * md.derivative_bound(*m, 1.0))
                    .sum();
                let s = (amplitude * self.beta / sup).min(radius / semi);
                (modes, w.iter().map(|w| w * s).collect())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.scaled_modes().0.len()
    }

    /// Member for parameter vector `y` in `[-1,1]^d`.
    pub fn member(&self, y: &[f64]) -> Result<ParametricField> {
        let (modes, scale) = self.scaled_modes();
        if y.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: y.len(),
            });
        }
        let coefficients = scale.iter().zip(y).map(|(s, y)| s * y).collect();
        ParametricField::new(self.alpha, self.beta, modes, coefficients)
    }

    /// `count` deterministic members drawn with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<ParametricField>> {
        if count == 0 {
            return Err(Error::InvalidInput("count must be >= 1".into()));
        }
        let d = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                self.member(&y)
            })
            .collect()
    }

    /// `A` such that `max_{|nu| <= m} sup |d^nu v| <= A^{m+1} m!` for every
    /// member and `m = 0..=4` (trigonometric bounds, so domain-independent).
    pub fn analytic_constant(&self) -> f64 {
        let (modes, scale) = self.scaled_modes();
        let mut a: f64 = 0.0;
        let mut fact = 1.0;
        for m in 0..=4u32 {
            if m > 0 {
                fact *= m as f64;
            }
            let mut bound: f64 = modes
                .iter()
                .zip(&scale)
                .map(|(md, s)| s * md.derivative_bound(m, 1.0))
                .sum();
            if m == 0 {
                bound += self.alpha;
            }
            a = a.max((bound / fact).powf(1.0 / (m + 1) as f64));
        }
        a
    }
}

/// Draws `count` members and checks each against `D(alpha, beta)`.
pub fn sample_family(
    family: &DataFamily,
    domain: &Polygon,
    count: usize,
    seed: u64,
    grid_n: usize,
) -> Result<Vec<CoefficientField>> {
    let members: Vec<CoefficientField> = match family.kind {
        FamilyKind::Nominal => {
            if count == 0 {
                return Err(Error::InvalidInput("count must be >= 1".into()));
            }
            vec![CoefficientField::Constant(family.alpha); count]
        }
        _ => family
            .sample(count, seed)?
            .into_iter()
            .map(CoefficientField::Parametric)
            .collect(),
    };
    for a in &members {
        let r = membership(a, family.alpha, family.beta, domain, grid_n)?;
        if !r.member {
            return Err(Error::Membership {
                alpha: family.alpha,
                beta: family.beta,
                min: r.min,
                min_at: r.min_at,
                max: r.max,
                max_at: r.max_at,
            });
        }
    }
    Ok(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square() -> Polygon {
        Polygon::unit_square()
    }

    #[test]
    fn constant_midpoint_is_member() {
        let r = membership(&CoefficientField::Constant(1.0), 1.0, 0.2, &square(), 5).unwrap();
        assert!(r.member);
    }

    #[test]
    fn boundary_cases() {
        let (alpha, beta) = (1.0, 0.5);
        let a = CoefficientField::from_fn("bump", move |x| {
            alpha + beta * (PI * x[0]).sin() * (PI * x[1]).sin()
        });
        assert!(membership(&a, alpha, beta, &square(), 41).unwrap().member);
        let b = CoefficientField::Constant(alpha + 2.0 * beta);
        assert!(!membership(&b, alpha, beta, &square(), 41).unwrap().member);
    }

    #[test]
    fn membership_min_witness_matches_dense_grid() {
        let a = CoefficientField::from_fn("cc", |x| 1.0 + 0.4 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos());
        let r = membership(&a, 1.0, 0.5, &square(), 101).unwrap();
        assert!(r.member);
        // Dense 1000 x 1000 oracle over the same closed square.
        let mut best = (f64::INFINITY, [0.0; 2]);
        for j in 0..1000 {
            for i in 0..1000 {
                let p = [i as f64 / 999.0, j as f64 / 999.0];
                let v = 1.0 + 0.4 * (3.0 * p[0]).cos() * (2.0 * p[1]).cos();
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
        assert!((r.min_at[0] - best.1[0]).abs() <= 0.011);
        assert!((r.min_at[1] - best.1[1]).abs() <= 0.011);
        assert!((r.min - best.0).abs() < 1e-3);
    }

    #[test]
    fn membership_rejects_tiny_grid() {
        assert!(membership(&CoefficientField::Constant(1.0), 1.0, 0.5, &square(), 1).is_err());
    }

    #[test]
    fn membership_monotone_in_beta() {
        let a = CoefficientField::from_fn("s", |x| 1.0 + 0.3 * (5.0 * x[0]).sin());
        for &b in &[0.1, 0.29, 0.3, 0.31, 0.6] {
            let at = membership(&a, 1.0, b, &square(), 21).unwrap().member;
            let later = membership(&a, 1.0, b + 0.05, &square(), 21).unwrap().member;
            assert!(!at || later);
        }
    }

    fn four_mode_family() -> DataFamily {
        DataFamily::new(
            FamilyKind::Parametric {
                modes: vec![
                    Mode::SinSin { kx: 1.0, ky: 1.0 },
                    Mode::CosCos { kx: 1.0, ky: 2.0 },
                    Mode::SinCos { kx: 2.0, ky: 1.0 },
                    Mode::CosSin { kx: 3.0, ky: 1.0 },
                ],
                amplitude: 0.9,
            },
            1.0,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let fam = four_mode_family();
        let a = fam.sample(10, 7).unwrap();
        let b = fam.sample(10, 7).unwrap();
        assert_eq!(a, b);
        let fa = sample_family(&fam, &square(), 10, 7, 11).unwrap();
        let fb = sample_family(&fam, &square(), 10, 7, 11).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            for p in sample_grid(&square(), 7) {
                assert_eq!(x.eval(p).unwrap(), y.eval(p).unwrap());
            }
        }
    }

    #[test]
    fn analytic_family_members_are_admissible() {
        let fam = DataFamily::new(
            FamilyKind::Analytic {
                modes: (1..=6)
                    .map(|k| Mode::SinSin {
                        kx: k as f64,
                        ky: 1.0,
                    })
                    .collect(),
                decay: 0.5,
                amplitude: 0.95,
            },
            1.0,
            0.5,
        )
        .unwrap();
        let members = sample_family(&fam, &square(), 50, 3, 31).unwrap();
        assert_eq!(members.len(), 50);
        assert!(fam.analytic_constant() > 0.0);
    }

    #[test]
    fn sobolev_ball_seminorm_by_finite_differences() {
        let radius = 40.0;
        let fam = DataFamily::new(
            FamilyKind::SobolevBall {
                m: 2,
                radius,
                modes_per_axis: 6,
                smoothness: 3.0,
                amplitude: 0.9,
            },
            1.0,
            0.5,
        )
        .unwrap();
        let members = sample_family(&fam, &square(), 5, 11, 41).unwrap();
        let h = 1e-3;
        for a in &members {
            let f = |x: f64, y: f64| a.eval([x, y]).unwrap();
            let mut semi: f64 = 0.0;
            for j in 1..40 {
                for i in 1..40 {
                    let (x, y) = (i as f64 / 40.0, j as f64 / 40.0);
                    let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
                    let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
                    let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h)
                        + f(x - h, y - h))
                        / (4.0 * h * h);
                    semi = semi.max(fxx.abs()).max(fyy.abs()).max(fxy.abs());
                }
            }
            assert!(semi <= radius * (1.0 + 1e-4), "seminorm {semi}");
        }
    }

    #[test]
    fn abs_shift_cases() {
        let pos = CoefficientField::from_fn("p", |x| 0.2 + x[0]);
        let shifted = abs_shift(&pos, 0.1);
        let neg = abs_shift(&pos.scaled(-1.0), 0.1);
        for p in sample_grid(&square(), 9) {
            assert_eq!(shifted.eval(p).unwrap(), 0.1 + pos.eval(p).unwrap());
            assert_eq!(shifted.eval(p).unwrap(), neg.eval(p).unwrap());
        }
        let s = CoefficientField::from_fn("s", |x| (2.0 * PI * x[0]).sin());
        let r = membership(&abs_shift(&s, 0.1), 0.6, 0.5, &square(), 201).unwrap();
        assert!((r.min - 0.1).abs() < 1e-12);
        assert!((r.max - 1.1).abs() < 1e-12);
        assert!(r.min >= 0.1);
    }

    #[test]
    fn affine_fields_are_linear() {
        let f1 = Arc::new(CoefficientField::from_fn("a", |x| x[0] * x[1]));
        let f2 = Arc::new(CoefficientField::from_fn("b", |x| (x[0] - x[1]).exp()));
        let comb = CoefficientField::Affine {
            offset: 0.0,
            terms: vec![(0.3, f1.clone()), (-1.7, f2.clone())],
        };
        for p in sample_grid(&square(), 9) {
            let direct = 0.3 * f1.eval(p).unwrap() - 1.7 * f2.eval(p).unwrap();
            assert!((comb.eval(p).unwrap() - direct).abs() <= 1e-14);
        }
    }

    #[test]
    fn parametric_json_round_trip() {
        let f = four_mode_family().sample(1, 5).unwrap().remove(0);
        let s = f.to_json().unwrap();
        assert!(s.contains("\"kind\": \"parametric\""));
        assert_eq!(ParametricField::from_json(&s).unwrap(), f);
    }

    #[test]
    fn family_rejects_bad_bounds() {
        assert!(DataFamily::new(FamilyKind::Nominal, 1.0, 1.0).is_err());
        assert!(DataFamily::new(FamilyKind::Nominal, 1.0, 0.0).is_err());
    }

    #[test]
    fn piecewise_p2_reproduces_quadratics() {
        let mesh = Arc::new(Mesh::unit_square(3).unwrap());
        let table = mesh.edge_table();
        let q = |p: Point| 1.0 + p[0] * p[0] - 2.0 * p[0] * p[1] + 0.5 * p[1];
        let mut values: Vec<f64> = mesh.nodes().iter().map(|&p| q(p)).collect();
        values.extend(table.edges.iter().map(|e| {
            q(crate::mesh::midpoint(mesh.nodes()[e[0]], mesh.nodes()[e[1]]))
        }));
        let f = PiecewiseField::new(mesh, 2, values).unwrap();
        for p in sample_grid(&square(), 13) {
            assert!((f.eval(p).unwrap() - q(p)).abs() < 1e-13);
        }
    }
}
