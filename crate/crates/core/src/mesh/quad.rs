use super::{barycentric, midpoint, orient, Mesh};
use crate::{Error, Point, Result};

/// A convex quadrilateral with its bilinear parametrization over `[-1,1]^2`.
///
/// Corner order: `(-1,-1)` is the anchoring triangle vertex, `(1,-1)` the
/// midpoint of the edge to the next vertex counterclockwise, `(1,1)` the
/// barycenter and `(-1,1)` the midpoint of the edge to the previous vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub triangle: usize,
    pub local_vertex: usize,
    pub corners: [Point; 4],
}

impl Quad {
    fn shape(xi: f64, eta: f64) -> [f64; 4] {
        [
            0.25 * (1.0 - xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 + eta),
            0.25 * (1.0 - xi) * (1.0 + eta),
        ]
    }

    /// Bilinear map `G(xi, eta)`.
    pub fn map(&self, xi: f64, eta: f64) -> Point {
        let n = Self::shape(xi, eta);
        let mut p = [0.0; 2];
        for (w, c) in n.iter().zip(&self.corners) {
            p[0] += w * c[0];
            p[1] += w * c[1];
        }
        p
    }

    /// Jacobian matrix `[[dx/dxi, dx/deta], [dy/dxi, dy/deta]]`.
    pub fn jacobian(&self, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let dxi = [
            -0.25 * (1.0 - eta),
            0.25 * (1.0 - eta),
            0.25 * (1.0 + eta),
            -0.25 * (1.0 + eta),
        ];
        let deta = [
            -0.25 * (1.0 - xi),
            -0.25 * (1.0 + xi),
            0.25 * (1.0 + xi),
            0.25 * (1.0 - xi),
        ];
        let mut j = [[0.0; 2]; 2];
        for k in 0..4 {
            for d in 0..2 {
                j[d][0] += dxi[k] * self.corners[k][d];
                j[d][1] += deta[k] * self.corners[k][d];
            }
        }
        j
    }

    pub fn jacobian_det(&self, xi: f64, eta: f64) -> f64 {
        let j = self.jacobian(xi, eta);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn area(&self) -> f64 {
        let [a, b, c, d] = self.corners;
        0.5 * (orient(a, b, c) + orient(a, c, d))
    }

    /// Inverts the bilinear map by Newton's method.
    pub fn inverse(&self, x: Point) -> Option<(f64, f64)> {
        let (mut xi, mut eta) = (0.0, 0.0);
        let scale = self.area().sqrt();
        for _ in 0..50 {
            let p = self.map(xi, eta);
            let r = [p[0] - x[0], p[1] - x[1]];
            let j = self.jacobian(xi, eta);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 {
                return None;
            }
            let dxi = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let deta = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            xi -= dxi;
            eta -= deta;
            if dxi.abs() + deta.abs() < 1e-15 || r[0].hypot(r[1]) < 1e-16 * scale {
                break;
            }
        }
        Some((xi, eta))
    }
}

/// Barycentric split of every triangle into three quadrilaterals.
#[derive(Debug, Clone)]
pub struct QuadSplit {
    quads: Vec<Quad>,
}

impl QuadSplit {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let mut quads = Vec::with_capacity(3 * mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let p = mesh.triangle_points(t);
            let bary = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            for i in 0..3 {
                let q = Quad {
                    triangle: t,
                    local_vertex: i,
                    corners: [
                        p[i],
                        midpoint(p[i], p[(i + 1) % 3]),
                        bary,
                        midpoint(p[i], p[(i + 2) % 3]),
                    ],
                };
                if q.jacobian_det(-1.0, -1.0) <= 0.0
                    || q.jacobian_det(1.0, 1.0) <= 0.0
                    || q.jacobian_det(1.0, -1.0) <= 0.0
                    || q.jacobian_det(-1.0, 1.0) <= 0.0
                {
                    return Err(Error::InvalidInput(format!(
                        "bilinear map of quad {i} in triangle {t} is not bijective"
                    )));
                }
                quads.push(q);
            }
        }
        Ok(Self { quads })
    }

    pub fn quads(&self) -> &[Quad] {
        &self.quads
    }

    /// The three quads of triangle `t`.
    pub fn triangle_quads(&self, t: usize) -> &[Quad] {
        &self.quads[3 * t..3 * t + 3]
    }

    /// Which of the three quads of a triangle contains `x`: the one anchored
    /// at the vertex with the largest barycentric coordinate.
    pub fn quad_in_triangle(tri: &[Point; 3], x: Point) -> usize {
        let l = barycentric(x, tri);
        if l[0] >= l[1] && l[0] >= l[2] {
            0
        } else if l[1] >= l[2] {
            1
        } else {
            2
        }
    }
}
