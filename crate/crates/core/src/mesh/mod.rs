//! Conforming triangulations of polygons.

mod io;
mod quad;
mod refine;

pub use io::{read_mesh, write_mesh};
pub use quad::{Quad, QuadSplit};

use std::collections::BTreeMap;

use crate::{Error, Point, Result};

/// Relative tolerance used for geometric predicates.
const GEOM_EPS: f64 = 1e-12;

/// A simple polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates and stores a polygon. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        let scale = bbox_diameter(&vertices);
        if area.abs() <= GEOM_EPS * scale * scale {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a == b {
                return Err(Error::DegeneratePolygon(format!("repeated vertex {i}")));
            }
            for j in i + 1..n {
                // adjacent edges share an endpoint legitimately
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::DegeneratePolygon(format!(
                        "edges {i} and {j} intersect"
                    )));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn unit_square() -> Self {
        Self::rectangle([0.0, 0.0], [1.0, 1.0])
    }

    pub fn rectangle(lo: Point, hi: Point) -> Self {
        Self::new(vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]]).expect("valid rectangle")
    }

    /// The L-shape `(-1,1)^2 \ [0,1) x (-1,0]`; its reentrant corner is the origin.
    pub fn l_shape() -> Self {
        Self::new(vec![
            [-1.0, -1.0],
            [0.0, -1.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [-1.0, 1.0],
        ])
        .expect("valid L-shape")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        bbox(&self.vertices)
    }

    /// Vertices with interior angle greater than pi.
    pub fn reentrant_corners(&self) -> Vec<Point> {
        let n = self.vertices.len();
        (0..n)
            .filter(|&i| {
                let p = self.vertices[(i + n - 1) % n];
                let q = self.vertices[i];
                let r = self.vertices[(i + 1) % n];
                orient(p, q, r) < 0.0
            })
            .map(|i| self.vertices[i])
            .collect()
    }

    /// Closed containment test (boundary points count as inside).
    pub fn contains(&self, x: Point) -> bool {
        let n = self.vertices.len();
        let scale = bbox_diameter(&self.vertices);
        for i in 0..n {
            if point_on_segment(x, self.vertices[i], self.vertices[(i + 1) % n], scale) {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let t = (x[1] - a[1]) / (b[1] - a[1]);
                if x[0] < a[0] + t * (b[0] - a[0]) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn is_rectilinear(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            a[0] == b[0] || a[1] == b[1]
        })
    }
}

/// A conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_flags: Vec<bool>,
    boundary_edges: Vec<[usize; 2]>,
}

/// Unique edges of a mesh and the three edges of each triangle.
///
/// Local edge `k` of a triangle joins local vertices `k+1` and `k+2` (mod 3),
/// i.e. it lies opposite vertex `k`.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub edges: Vec<[usize; 2]>,
    pub triangle_edges: Vec<[usize; 3]>,
    /// Triangles adjacent to each edge (one for boundary edges).
    pub edge_triangles: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh, orienting triangles counterclockwise and deriving the boundary.
    pub fn new(nodes: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite mesh node".into()));
        }
        let scale = bbox_diameter(&nodes).max(f64::MIN_POSITIVE);
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidInput(format!("triangle {t} has out-of-range node")));
            }
            let area = orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area.abs() <= GEOM_EPS * scale * scale * 1e-6 {
                return Err(Error::InvalidInput(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut edge_count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                *edge_count.entry(edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])).or_default() += 1;
            }
        }
        if let Some((e, c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidInput(format!("edge {e:?} shared by {c} triangles")));
        }
        let boundary_edges: Vec<[usize; 2]> = edge_count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(e, _)| *e)
            .collect();
        let mut boundary_flags = vec![false; nodes.len()];
        for e in &boundary_edges {
            boundary_flags[e[0]] = true;
            boundary_flags[e[1]] = true;
        }
        Ok(Self {
            nodes,
            triangles,
            boundary_flags,
            boundary_edges,
        })
    }

    /// Structured mesh of a rectangle with `nx * ny` cells, each split along
    /// its lower-left to upper-right diagonal.
    pub fn structured_rectangle(lo: Point, hi: Point, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("cell counts must be positive".into()));
        }
        let xs: Vec<f64> = (0..=nx).map(|i| grid_coord(lo[0], hi[0], i, nx)).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| grid_coord(lo[1], hi[1], j, ny)).collect();
        Self::tensor_grid(&xs, &ys, |_| true)
    }

    /// Uniform mesh of the unit square with `n x n` cells (h = 1/n).
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::structured_rectangle([0.0, 0.0], [1.0, 1.0], n, n)
    }

    fn tensor_grid(xs: &[f64], ys: &[f64], keep: impl Fn(Point) -> bool) -> Result<Self> {
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
        let mut nodes = Vec::new();
        let mut triangles = Vec::new();
        let mut node_id = |i: usize, j: usize, nodes: &mut Vec<Point>| {
            let slot = &mut index[j * (nx + 1) + i];
            if *slot == usize::MAX {
                *slot = nodes.len();
                nodes.push([xs[i], ys[j]]);
            }
            *slot
        };
        // Rows are emitted bottom to top so node order is row-major.
        for j in 0..=ny {
            for i in 0..=nx {
                let used = [(0, 0), (1, 0), (0, 1), (1, 1)].iter().any(|&(di, dj)| {
                    let (ci, cj) = (i as isize - di, j as isize - dj);
                    ci >= 0
                        && cj >= 0
                        && (ci as usize) < nx
                        && (cj as usize) < ny
                        && keep(cell_center(xs, ys, ci as usize, cj as usize))
                });
                if used {
                    node_id(i, j, &mut nodes);
                }
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                if !keep(cell_center(xs, ys, i, j)) {
                    continue;
                }
                let a = node_id(i, j, &mut nodes);
                let b = node_id(i + 1, j, &mut nodes);
                let c = node_id(i + 1, j + 1, &mut nodes);
                let d = node_id(i, j + 1, &mut nodes);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::new(nodes, triangles)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_flags[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_flags
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.boundary_flags[i]).collect()
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * orient(a, b, c)
    }

    /// Longest edge of triangle `t`.
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.triangle_diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.triangle_diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        bbox(&self.nodes)
    }

    /// Index of a node with exactly these coordinates.
    pub fn find_node(&self, p: Point) -> Option<usize> {
        self.nodes.iter().position(|&q| q == p)
    }

    pub fn edge_table(&self) -> EdgeTable {
        let mut ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let key = edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let next = ids.len();
                ids.entry(key).or_insert(next);
            }
        }
        // Renumber in sorted key order for a layout independent of triangle order.
        let mut edges: Vec<[usize; 2]> = ids.keys().copied().collect();
        edges.sort_unstable();
        let lookup: BTreeMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut edge_triangles = vec![Vec::new(); edges.len()];
        let triangle_edges = self
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let mut out = [0; 3];
                for k in 0..3 {
                    let e = lookup[&edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])];
                    edge_triangles[e].push(t);
                    out[k] = e;
                }
                out
            })
            .collect();
        EdgeTable {
            edges,
            triangle_edges,
            edge_triangles,
        }
    }

    /// All edge lengths, in edge-table order.
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edge_table()
            .edges
            .iter()
            .map(|e| dist(self.nodes[e[0]], self.nodes[e[1]]))
            .collect()
    }

    /// Checks the simplicial-complex condition: two closed triangles meet in
    /// nothing, a shared vertex, or a shared full edge.
    ///
    /// Quadratic in the triangle count (bounding-box pruned); intended for
    /// verification on meshes with up to a few thousand triangles.
    pub fn check_conforming(&self) -> Result<()> {
        let scale = bbox_diameter(&self.nodes);
        let tol = GEOM_EPS * scale;
        let boxes: Vec<(Point, Point)> = (0..self.num_triangles())
            .map(|t| bbox(&self.triangle_points(t)))
            .collect();
        let mut order: Vec<usize> = (0..self.num_triangles()).collect();
        order.sort_by(|&a, &b| boxes[a].0[0].total_cmp(&boxes[b].0[0]));
        for (pos, &s) in order.iter().enumerate() {
            for &t in &order[pos + 1..] {
                if boxes[t].0[0] > boxes[s].1[0] + tol {
                    break;
                }
                if boxes[t].0[1] > boxes[s].1[1] + tol || boxes[s].0[1] > boxes[t].1[1] + tol {
                    continue;
                }
                self.check_pair(s, t, tol)?;
            }
        }
        Ok(())
    }

    fn check_pair(&self, s: usize, t: usize, tol: f64) -> Result<()> {
        let ps = self.triangle_points(s);
        let pt = self.triangle_points(t);
        if interiors_overlap(&ps, &pt, tol) {
            return Err(Error::InvalidInput(format!("triangles {s} and {t} overlap")));
        }
        // A vertex of one triangle touching the other must be a shared vertex.
        for (a, b, ia, pb) in [(s, t, self.triangles[s], &pt), (t, s, self.triangles[t], &ps)] {
            for &v in &ia {
                let p = self.nodes[v];
                if point_in_closed_triangle(p, pb, tol) && !self.triangles[b].contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "node {v} of triangle {a} is a hanging node of triangle {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Triangulates a polygon so that every triangle has diameter at most `h_target`.
///
/// Rectilinear polygons get a structured tensor grid over their vertex
/// coordinates; other polygons are ear-clipped and refined uniformly.
pub fn triangulate(polygon: &Polygon, h_target: f64) -> Result<Mesh> {
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(Error::InvalidInput(format!("h_target must be positive, got {h_target}")));
    }
    if polygon.is_rectilinear() {
        let spacing = h_target / std::f64::consts::SQRT_2;
        let axis = |k: usize| {
            let mut cs: Vec<f64> = polygon.vertices.iter().map(|v| v[k]).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup();
            let mut out = vec![cs[0]];
            for w in cs.windows(2) {
                let n = ((w[1] - w[0]) / spacing).ceil().max(1.0) as usize;
                for i in 1..=n {
                    out.push(grid_coord(w[0], w[1], i, n));
                }
            }
            out
        };
        let xs = axis(0);
        let ys = axis(1);
        return Mesh::tensor_grid(&xs, &ys, |c| polygon.contains(c));
    }
    let mut mesh = ear_clip(polygon)?;
    while mesh.max_diameter() > h_target {
        mesh = refine_uniform(&mesh);
    }
    Ok(mesh)
}

pub use refine::{refine_corner_graded, refine_uniform};

fn ear_clip(polygon: &Polygon) -> Result<Mesh> {
    let pts = polygon.vertices.clone();
    let mut remaining: Vec<usize> = (0..pts.len()).collect();
    let mut triangles = Vec::new();
    while remaining.len() > 3 {
        let n = remaining.len();
        let ear = (0..n).find(|&i| {
            let (a, b, c) = (remaining[(i + n - 1) % n], remaining[i], remaining[(i + 1) % n]);
            if orient(pts[a], pts[b], pts[c]) <= 0.0 {
                return false;
            }
            let tri = [pts[a], pts[b], pts[c]];
            remaining
                .iter()
                .filter(|&&v| v != a && v != b && v != c)
                .all(|&v| !point_in_closed_triangle(pts[v], &tri, 0.0))
        });
        let Some(i) = ear else {
            return Err(Error::DegeneratePolygon("ear clipping found no ear".into()));
        };
        triangles.push([remaining[(i + n - 1) % n], remaining[i], remaining[(i + 1) % n]]);
        remaining.remove(i);
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    Mesh::new(pts, triangles)
}

fn grid_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        lo
    } else if i == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / n as f64)
    }
}

fn cell_center(xs: &[f64], ys: &[f64], i: usize, j: usize) -> Point {
    [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])]
}

pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Twice the signed area of `(a, b, c)`.
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1])
        .sum::<f64>()
}

pub(crate) fn bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn bbox_diameter(v: &[Point]) -> f64 {
    let (lo, hi) = bbox(v);
    dist(lo, hi)
}

fn point_on_segment(x: Point, a: Point, b: Point, scale: f64) -> bool {
    let len = dist(a, b);
    if orient(a, b, x).abs() > GEOM_EPS * scale * len.max(scale) {
        return false;
    }
    let t = (x[0] - a[0]) * (b[0] - a[0]) + (x[1] - a[1]) * (b[1] - a[1]);
    t >= -GEOM_EPS * scale * len && t <= len * len + GEOM_EPS * scale * len
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let scale = dist(a, b).max(dist(c, d));
    point_on_segment(a, c, d, scale)
        || point_on_segment(b, c, d, scale)
        || point_on_segment(c, a, b, scale)
        || point_on_segment(d, a, b, scale)
}

/// Barycentric coordinates of `x` in the triangle.
pub(crate) fn barycentric(x: Point, tri: &[Point; 3]) -> [f64; 3] {
    let det = orient(tri[0], tri[1], tri[2]);
    let l1 = orient(x, tri[1], tri[2]) / det;
    let l2 = orient(tri[0], x, tri[2]) / det;
    [l1, l2, 1.0 - l1 - l2]
}

pub(crate) fn point_in_closed_triangle(x: Point, tri: &[Point; 3], tol: f64) -> bool {
    let scale = dist(tri[0], tri[1]).max(dist(tri[1], tri[2])).max(dist(tri[2], tri[0]));
    let rel = if scale > 0.0 { tol / scale } else { 0.0 };
    barycentric(x, tri).iter().all(|&l| l >= -rel)
}

/// Separating-axis test on the open interiors of two counterclockwise triangles.
fn interiors_overlap(p: &[Point; 3], q: &[Point; 3], tol: f64) -> bool {
    for (a, b) in [(p, q), (q, p)] {
        for k in 0..3 {
            let e0 = a[k];
            let e1 = a[(k + 1) % 3];
            let len = dist(e0, e1);
            // b lies entirely on the outer side of edge k of a (touching allowed).
            if b.iter().all(|&v| orient(e0, e1, v) <= tol * len) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_scan_max(mesh: &Mesh) -> f64 {
        mesh.triangles()
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(a, b)| dist(mesh.nodes()[a], mesh.nodes()[b]))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn coarse_square_is_two_triangles() {
        let mesh = triangulate(&Polygon::unit_square(), 1.5).unwrap();
        assert_eq!(mesh.num_triangles(), 2);
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.boundary_nodes().len(), 4);
    }

    #[test]
    fn lshape_keeps_corners() {
        let poly = Polygon::l_shape();
        let mesh = triangulate(&poly, 0.5).unwrap();
        for v in poly.vertices() {
            assert!(mesh.find_node(*v).is_some(), "corner {v:?} missing");
        }
        assert!((mesh.area() - 3.0).abs() < 1e-12);
        mesh.check_conforming().unwrap();
    }

    #[test]
    fn fine_square_respects_h() {
        let mesh = triangulate(&Polygon::unit_square(), 0.1).unwrap();
        assert!(edge_scan_max(&mesh) <= 0.1);
        mesh.check_conforming().unwrap();
    }

    #[test]
    fn general_polygon_ear_clipping() {
        let poly = Polygon::new(vec![[0.0, 0.0], [2.0, 0.0], [2.5, 1.0], [1.0, 2.0], [-0.5, 1.0]]).unwrap();
        let mesh = triangulate(&poly, 0.4).unwrap();
        assert!(mesh.max_diameter() <= 0.4);
        assert!((mesh.area() - poly.area()).abs() < 1e-12 * poly.area());
        for v in poly.vertices() {
            assert!(mesh.find_node(*v).is_some());
        }
        mesh.check_conforming().unwrap();
    }

    #[test]
    fn invalid_inputs() {
        assert!(triangulate(&Polygon::unit_square(), 0.0).is_err());
        assert!(triangulate(&Polygon::unit_square(), -1.0).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn clockwise_polygon_is_reoriented() {
        let p = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn containment_and_corners() {
        let l = Polygon::l_shape();
        assert!(l.contains([-0.5, -0.5]));
        assert!(l.contains([0.5, 0.0]));
        assert!(!l.contains([0.5, -0.5]));
        assert_eq!(l.reentrant_corners(), vec![[0.0, 0.0]]);
    }

    #[test]
    fn conformity_detects_hanging_node() {
        // Square split into two triangles on one side and a node on the diagonal.
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let tris = vec![[0, 1, 2], [0, 4, 3], [4, 2, 3]];
        let mesh = Mesh::new(nodes, tris).unwrap();
        assert!(mesh.check_conforming().is_err());
    }

    #[test]
    fn conformity_detects_overlap() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.2, 0.2], [1.2, 0.2], [0.2, 1.2]];
        let mesh = Mesh::new(nodes, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        assert!(mesh.check_conforming().is_err());
    }
}
