use std::collections::BTreeMap;

use super::{dist, edge_key, midpoint, Mesh};
use crate::{Error, Point, Result};

/// Red refinement: every triangle is split into four congruent children via
/// its edge midpoints. Existing nodes keep their indices; the midpoint of edge
/// `e` (edge-table order) becomes node `num_nodes + e`.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let table = mesh.edge_table();
    let n = mesh.num_nodes();
    let mut nodes = mesh.nodes().to_vec();
    nodes.extend(
        table
            .edges
            .iter()
            .map(|e| midpoint(mesh.nodes()[e[0]], mesh.nodes()[e[1]])),
    );
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for (tri, te) in mesh.triangles().iter().zip(&table.triangle_edges) {
        let [a, b, c] = *tri;
        // te[k] is opposite vertex k
        let mbc = n + te[0];
        let mca = n + te[1];
        let mab = n + te[2];
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }
    Mesh::new(nodes, triangles).expect("refinement of a valid mesh is valid")
}

/// Refines `levels` times uniformly, each level followed by longest-edge
/// bisection toward the listed corners.
///
/// After a uniform level with mesh width `h`, triangles at distance `r` from a
/// corner are bisected until their diameter is at most
/// `h * max(r, h^(1/grading))^(1 - grading)`. With no corners this is exactly
/// `levels` uniform refinements.
pub fn refine_corner_graded(
    mesh: &Mesh,
    corners: &[Point],
    grading: f64,
    levels: usize,
) -> Result<Mesh> {
    if !(grading > 0.0 && grading < 1.0) {
        return Err(Error::InvalidInput(format!("grading must lie in (0,1), got {grading}")));
    }
    for c in corners {
        if mesh.find_node(*c).is_none() {
            return Err(Error::InvalidInput(format!("corner {c:?} is not a mesh node")));
        }
    }
    let mut out = mesh.clone();
    for _ in 0..levels {
        out = refine_uniform(&out);
        if corners.is_empty() {
            continue;
        }
        let h = out.max_diameter();
        let floor = h.powf(1.0 / grading);
        let target = |r: f64| h * r.max(floor).powf(1.0 - grading);
        let mut bisector = Bisector::new(&out);
        // Each pass bisects every offending triangle once; converges since
        // diameters shrink geometrically and the target is bounded below.
        for _ in 0..200 {
            let marked: Vec<usize> = bisector
                .alive()
                .filter(|&t| {
                    let pts = bisector.points(t);
                    let r = corners
                        .iter()
                        .map(|c| pts.iter().map(|p| dist(*p, *c)).fold(f64::INFINITY, f64::min))
                        .fold(f64::INFINITY, f64::min);
                    bisector.diameter(t) > target(r)
                })
                .collect();
            if marked.is_empty() {
                break;
            }
            for t in marked {
                if bisector.tris[t].is_some() {
                    bisector.bisect(t);
                }
            }
        }
        out = bisector.finish();
    }
    Ok(out)
}

/// Longest-edge bisection with conforming closure (Rivara).
struct Bisector {
    nodes: Vec<Point>,
    tris: Vec<Option<[usize; 3]>>,
    edges: BTreeMap<[usize; 2], Vec<usize>>,
}

impl Bisector {
    fn new(mesh: &Mesh) -> Self {
        let mut b = Self {
            nodes: mesh.nodes().to_vec(),
            tris: Vec::new(),
            edges: BTreeMap::new(),
        };
        for tri in mesh.triangles() {
            b.push(*tri);
        }
        b
    }

    fn push(&mut self, tri: [usize; 3]) -> usize {
        let id = self.tris.len();
        self.tris.push(Some(tri));
        for k in 0..3 {
            self.edges
                .entry(edge_key(tri[k], tri[(k + 1) % 3]))
                .or_default()
                .push(id);
        }
        id
    }

    fn kill(&mut self, id: usize) -> [usize; 3] {
        let tri = self.tris[id].take().expect("alive triangle");
        for k in 0..3 {
            let key = edge_key(tri[k], tri[(k + 1) % 3]);
            let list = self.edges.get_mut(&key).expect("edge registered");
            list.retain(|&t| t != id);
            if list.is_empty() {
                self.edges.remove(&key);
            }
        }
        tri
    }

    fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tris.len()).filter(|&t| self.tris[t].is_some())
    }

    fn points(&self, t: usize) -> [Point; 3] {
        let tri = self.tris[t].expect("alive triangle");
        tri.map(|i| self.nodes[i])
    }

    fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Local index `k` such that the edge opposite vertex `k` is longest.
    /// Ties break on the smaller sorted node pair so neighbours agree.
    fn longest_edge(&self, t: usize) -> usize {
        let tri = self.tris[t].expect("alive triangle");
        (0..3)
            .max_by(|&i, &j| {
                let ei = edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let ej = edge_key(tri[(j + 1) % 3], tri[(j + 2) % 3]);
                let li = dist(self.nodes[ei[0]], self.nodes[ei[1]]);
                let lj = dist(self.nodes[ej[0]], self.nodes[ej[1]]);
                li.total_cmp(&lj).then(ej.cmp(&ei))
            })
            .expect("three edges")
    }

    fn longest_key(&self, t: usize) -> [usize; 2] {
        let tri = self.tris[t].expect("alive triangle");
        let k = self.longest_edge(t);
        edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])
    }

    fn neighbour(&self, t: usize, key: [usize; 2]) -> Option<usize> {
        self.edges
            .get(&key)
            .and_then(|l| l.iter().copied().find(|&s| s != t))
    }

    fn bisect(&mut self, t: usize) {
        let key = self.longest_key(t);
        // Make the neighbour across the edge share it as its own longest edge.
        while let Some(nb) = self.neighbour(t, key) {
            if self.longest_key(nb) == key {
                break;
            }
            self.bisect(nb);
        }
        let m = self.nodes.len();
        self.nodes.push(midpoint(self.nodes[key[0]], self.nodes[key[1]]));
        let nb = self.neighbour(t, key);
        for s in std::iter::once(t).chain(nb) {
            let k = self.longest_edge(s);
            let tri = self.kill(s);
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            self.push([a, b, m]);
            self.push([a, m, c]);
        }
    }

    fn finish(self) -> Mesh {
        let tris: Vec<[usize; 3]> = self.tris.into_iter().flatten().collect();
        Mesh::new(self.nodes, tris).expect("bisection keeps the mesh valid")
    }
}
