//! Point location in a triangulation via a uniform bucket grid.

use crate::mesh::{barycentric, bbox, Mesh};
use crate::Point;

#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
    triangles: Vec<[Point; 3]>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let nt = mesh.num_triangles().max(1);
        let side = ((nt as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let triangles: Vec<[Point; 3]> = (0..mesh.num_triangles())
            .map(|t| mesh.triangle_points(t))
            .collect();
        let mut out = Self {
            lo,
            cell,
            dims,
            buckets: vec![Vec::new(); side * side],
            triangles,
        };
        for t in 0..out.triangles.len() {
            let (tlo, thi) = bbox(&out.triangles[t]);
            let (i0, j0) = out.bucket_of(tlo);
            let (i1, j1) = out.bucket_of(thi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    out.buckets[j * dims[0] + i].push(t as u32);
                }
            }
        }
        out
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let f = |k: usize| {
            let v = ((p[k] - self.lo[k]) / self.cell[k]).floor();
            (v.max(0.0) as usize).min(self.dims[k] - 1)
        };
        (f(0), f(1))
    }

    /// Triangle containing `x` (closed) and its barycentric coordinates.
    ///
    /// Points slightly outside the mesh (within `1e-10` relative) snap to the
    /// nearest candidate triangle; farther points return `None`.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.bucket_of(x);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let l = barycentric(x, &self.triangles[t as usize]);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((t as usize, l));
            }
            if best.as_ref().map_or(true, |b| worst > b.2) {
                best = Some((t as usize, l, worst));
            }
        }
        best.filter(|b| b.2 >= -1e-10).map(|b| (b.0, b.1))
    }

    pub fn triangle(&self, t: usize) -> &[Point; 3] {
        &self.triangles[t]
    }
}
