//! Linear point-query encoders `a -> (a(x_1), ..., a(x_M))` and their
//! reconstruction systems.
//!
//! Two kinds are provided: Lagrange nodal interpolation on a coefficient mesh,
//! and piecewise tensor Gauss-Lobatto interpolation on the barycentric quad
//! split of a triangulation. Both are interpolatory, so `encode` applied to a
//! reconstruction returns the encoded vector.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeff::{lagrange_shape, sample_grid, CoefficientField, PiecewiseField, ScalarField};
use crate::fem::FemSpace;
use crate::locate::PointLocator;
use crate::mesh::{midpoint, Mesh, Polygon, QuadSplit};
use crate::{Error, Point, Result};

/// Default lattice resolution for sup-norm estimates.
pub const DEFAULT_ERROR_GRID: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    Nodal { degree: usize },
    Gll { p: usize },
}

#[derive(Debug)]
enum Layout {
    Nodal {
        degree: usize,
        triangle_dofs: Vec<Vec<usize>>,
    },
    Gll {
        split: QuadSplit,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        /// Channel of each tensor node, `(p+1)^2` per quad, row `j` (eta) major.
        quad_channels: Vec<Vec<usize>>,
    },
}

#[derive(Debug)]
pub struct Encoder {
    kind: EncoderKind,
    mesh: Arc<Mesh>,
    locator: PointLocator,
    query_points: Vec<Point>,
    layout: Layout,
}

impl Encoder {
    /// Lagrange interpolation on all dofs (boundary included) of `space`.
    pub fn nodal(space: &FemSpace) -> Result<Self> {
        Self::nodal_on_mesh(space.mesh().clone(), space.degree())
    }

    pub fn nodal_on_mesh(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        let (locator, triangle_dofs) = PiecewiseField::layout(&mesh, degree)?;
        let mut query_points = mesh.nodes().to_vec();
        if degree == 2 {
            for e in &mesh.edge_table().edges {
                query_points.push(midpoint(mesh.nodes()[e[0]], mesh.nodes()[e[1]]));
            }
        }
        Ok(Self {
            kind: EncoderKind::Nodal { degree },
            mesh,
            locator,
            query_points,
            layout: Layout::Nodal {
                degree,
                triangle_dofs,
            },
        })
    }

    /// Continuous piecewise tensor GLL interpolation of degree `p` on the
    /// quad split of `mesh`.
    pub fn gll(mesh: Arc<Mesh>, p: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidInput("GLL degree must be >= 1".into()));
        }
        let split = QuadSplit::new(&mesh)?;
        let nodes = gll_nodes(p);
        let weights = barycentric_weights(&nodes);
        let (lo, hi) = mesh.bounding_box();
        let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let tol = 1e-10 * diam;
        let mut query_points: Vec<Point> = Vec::new();
        let mut hash: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut quad_channels = Vec::with_capacity(split.quads().len());
        for q in split.quads() {
            let mut ch = Vec::with_capacity((p + 1) * (p + 1));
            for &eta in &nodes {
                for &xi in &nodes {
                    let x = q.map(xi, eta);
                    let cell = ((x[0] / (4.0 * tol)).floor() as i64, (x[1] / (4.0 * tol)).floor() as i64);
                    let mut found = None;
                    'search: for dx in -1..=1 {
                        for dy in -1..=1 {
                            if let Some(list) = hash.get(&(cell.0 + dx, cell.1 + dy)) {
                                for &c in list {
                                    let y = query_points[c];
                                    if (x[0] - y[0]).abs() <= tol && (x[1] - y[1]).abs() <= tol {
                                        found = Some(c);
                                        break 'search;
                                    }
                                }
                            }
                        }
                    }
                    let c = found.unwrap_or_else(|| {
                        query_points.push(x);
                        hash.entry(cell).or_default().push(query_points.len() - 1);
                        query_points.len() - 1
                    });
                    ch.push(c);
                }
            }
            quad_channels.push(ch);
        }
        Ok(Self {
            kind: EncoderKind::Gll { p },
            locator: PointLocator::new(&mesh),
            mesh,
            query_points,
            layout: Layout::Gll {
                split,
                nodes,
                weights,
                quad_channels,
            },
        })
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Channel count `M`.
    pub fn m(&self) -> usize {
        self.query_points.len()
    }

    pub fn query_points(&self) -> &[Point] {
        &self.query_points
    }

    /// `E(a)`: values at the query points in channel order.
    pub fn encode(&self, a: &CoefficientField) -> Result<Vec<f64>> {
        self.query_points
            .iter()
            .map(|&x| {
                let v = a.eval(x)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("coefficient value {v} at {x:?}")))
                }
            })
            .collect()
    }

    /// Nonzero reconstruction basis values `(k, xi_k(x))` at `x`.
    pub fn basis_values(&self, x: Point) -> Result<Vec<(usize, f64)>> {
        let (t, l) = self
            .locator
            .locate(x)
            .ok_or_else(|| Error::InvalidInput(format!("point {x:?} outside the encoder mesh")))?;
        match &self.layout {
            Layout::Nodal {
                degree,
                triangle_dofs,
            } => Ok(triangle_dofs[t]
                .iter()
                .copied()
                .zip(lagrange_shape(*degree, l))
                .filter(|(_, v)| *v != 0.0)
                .collect()),
            Layout::Gll {
                split,
                nodes,
                weights,
                quad_channels,
            } => {
                let i = QuadSplit::quad_in_triangle(self.locator.triangle(t), x);
                let qi = 3 * t + i;
                let (xi, eta) = split.quads()[qi]
                    .inverse(x)
                    .ok_or_else(|| Error::Solver(format!("bilinear inversion failed at {x:?}")))?;
                let lx = lagrange_values(nodes, weights, xi.clamp(-1.0, 1.0));
                let ly = lagrange_values(nodes, weights, eta.clamp(-1.0, 1.0));
                let n = nodes.len();
                let ch = &quad_channels[qi];
                let mut out = Vec::new();
                for (j, wy) in ly.iter().enumerate() {
                    if *wy == 0.0 {
                        continue;
                    }
                    for (k, wx) in lx.iter().enumerate() {
                        if *wx != 0.0 {
                            out.push((ch[j * n + k], wx * wy));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `sum_k y_k xi_k(x)`.
    pub fn reconstruct_at(&self, y: &[f64], x: Point) -> Result<f64> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: y.len(),
            });
        }
        Ok(self.basis_values(x)?.iter().map(|&(k, v)| v * y[k]).sum())
    }

    /// The reconstruction `y . Xi` as a field.
    pub fn reconstruct(self: &Arc<Self>, y: &[f64]) -> Result<CoefficientField> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: y.len(),
            });
        }
        Ok(CoefficientField::Dyn(Arc::new(Reconstruction {
            encoder: self.clone(),
            y: y.to_vec(),
        })))
    }

    /// The basis function `xi_k` as a field.
    pub fn basis_field(self: &Arc<Self>, k: usize) -> Result<CoefficientField> {
        let mut y = vec![0.0; self.m()];
        *y.get_mut(k)
            .ok_or_else(|| Error::InvalidInput(format!("channel {k} out of range")))? = 1.0;
        self.reconstruct(&y)
    }

    /// Grid estimate of `sup |a - E(a) . Xi|` over `domain`; a lower bound of
    /// the true sup-norm error.
    pub fn encoder_error(&self, a: &CoefficientField, domain: &Polygon, grid_n: usize) -> Result<f64> {
        let y = self.encode(a)?;
        let mut err: f64 = 0.0;
        for x in sample_grid(domain, grid_n) {
            err = err.max((a.eval(x)? - self.reconstruct_at(&y, x)?).abs());
        }
        Ok(err)
    }

    /// Range of the reconstruction `y . Xi` over `points`.
    pub fn reconstruction_range(&self, y: &[f64], points: &[Point]) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in points {
            let v = self.reconstruct_at(y, x)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// Smallest `beta_tilde` with `y . Xi` inside `D(alpha, beta_tilde)` on
    /// `points`. Well-posedness downstream requires `beta_tilde < alpha`.
    pub fn envelope(&self, y: &[f64], alpha: f64, points: &[Point]) -> Result<f64> {
        let (lo, hi) = self.reconstruction_range(y, points)?;
        Ok((alpha - lo).max(hi - alpha))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = EncoderDoc {
            kind: self.kind,
            nodes: self.mesh.nodes().to_vec(),
            triangles: self.mesh.triangles().to_vec(),
            query_points: self.query_points.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds an encoder and checks that its query points match the
    /// serialized ones bit for bit.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: EncoderDoc = serde_json::from_str(s)?;
        let mesh = Arc::new(Mesh::new(doc.nodes, doc.triangles)?);
        let enc = match doc.kind {
            EncoderKind::Nodal { degree } => Self::nodal_on_mesh(mesh, degree)?,
            EncoderKind::Gll { p } => Self::gll(mesh, p)?,
        };
        if enc.query_points != doc.query_points {
            return Err(Error::Parse("query points do not match the rebuilt encoder".into()));
        }
        Ok(enc)
    }
}

#[derive(Serialize, Deserialize)]
struct EncoderDoc {
    #[serde(flatten)]
    kind: EncoderKind,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    query_points: Vec<Point>,
}

#[derive(Debug)]
struct Reconstruction {
    encoder: Arc<Encoder>,
    y: Vec<f64>,
}

impl ScalarField for Reconstruction {
    fn eval(&self, x: Point) -> Result<f64> {
        self.encoder.reconstruct_at(&self.y, x)
    }
}

/// Gauss-Lobatto-Legendre nodes on `[-1,1]`, ascending: the endpoints and the
/// roots of `P_p'`.
pub fn gll_nodes(p: usize) -> Vec<f64> {
    if p == 0 {
        return vec![0.0];
    }
    let pf = p as f64;
    let mut x: Vec<f64> = (0..=p)
        .map(|k| -(std::f64::consts::PI * k as f64 / pf).cos())
        .collect();
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for xi in x.iter_mut() {
            // Legendre recurrence up to P_p.
            let (mut p0, mut p1) = (1.0, *xi);
            for n in 2..=p {
                let n = n as f64;
                let p2 = ((2.0 * n - 1.0) * *xi * p1 - (n - 1.0) * p0) / n;
                p0 = p1;
                p1 = p2;
            }
            let (pp, pm) = if p == 1 { (*xi, 1.0) } else { (p1, p0) };
            let dx = (*xi * pp - pm) / ((pf + 1.0) * pp);
            *xi -= dx;
            change = change.max(dx.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    x[0] = -1.0;
    x[p] = 1.0;
    // Symmetrize to remove rounding asymmetry.
    for k in 0..=p / 2 {
        let s = 0.5 * (x[p - k] - x[k]);
        x[k] = -s;
        x[p - k] = s;
    }
    if p % 2 == 0 {
        x[p / 2] = 0.0;
    }
    x
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            1.0 / nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| nodes[j] - xk)
                .product::<f64>()
        })
        .collect()
}

/// Lagrange basis values at `t` (exact unit vectors at the nodes).
fn lagrange_values(nodes: &[f64], weights: &[f64], t: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&x| x == t) {
        let mut v = vec![0.0; nodes.len()];
        v[j] = 1.0;
        return v;
    }
    let terms: Vec<f64> = nodes.iter().zip(weights).map(|(x, w)| w / (t - x)).collect();
    let s: f64 = terms.iter().sum();
    terms.iter().map(|v| v / s).collect()
}
