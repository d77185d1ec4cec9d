//! Symmetric quadrature rules on triangles, in barycentric coordinates.

/// Quadrature points `(lambda, weight)` with weights summing to one; multiply
/// by the triangle area.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<([f64; 3], f64)>,
}

impl TriangleRule {
    /// Six-point rule exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_964_886;
        let w1 = 0.223_381_589_678_011_466;
        let a2 = 0.091_576_213_509_770_743;
        let w2 = 0.109_951_743_655_321_868;
        let mut points = Vec::with_capacity(6);
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.push(([b, a, a], w));
            points.push(([a, b, a], w));
            points.push(([a, a, b], w));
        }
        Self { points }
    }

    /// Applies `base` on each of the `4^levels` red-refinement children.
    pub fn subdivided(base: &TriangleRule, levels: u32) -> Self {
        let mut tris: Vec<[[f64; 3]; 3]> = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
        for _ in 0..levels {
            let mut next = Vec::with_capacity(4 * tris.len());
            for [a, b, c] in tris {
                let mid = |p: [f64; 3], q: [f64; 3]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            }
            tris = next;
        }
        let scale = 1.0 / tris.len() as f64;
        let mut points = Vec::new();
        for t in &tris {
            for (l, w) in &base.points {
                let mut g = [0.0; 3];
                for k in 0..3 {
                    for d in 0..3 {
                        g[d] += l[k] * t[k][d];
                    }
                }
                points.push((g, w * scale));
            }
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
