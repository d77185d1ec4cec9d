//! Plain-text mesh format.
//!
//! ```text
//! NODES n TRIANGLES t
//! x y boundary_flag        (n lines)
//! i j k                    (t lines, 0-based)
//! ```
//!
//! Coordinates are written with 17 significant digits so a write/read cycle
//! reproduces every node bit for bit.

use std::io::{BufRead, Write};

use super::Mesh;
use crate::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    writeln!(out, "NODES {} TRIANGLES {}", mesh.num_nodes(), mesh.num_triangles())?;
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(
            out,
            "{:.16e} {:.16e} {}",
            p[0],
            p[1],
            u8::from(mesh.is_boundary_node(i))
        )?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty mesh file".into()))??;
    let tok: Vec<&str> = header.split_whitespace().collect();
    let (n, t) = match tok.as_slice() {
        ["NODES", n, "TRIANGLES", t] => (parse::<usize>(n)?, parse::<usize>(t)?),
        _ => return Err(Error::Parse(format!("bad header: {header}"))),
    };
    let mut nodes = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("truncated node block".into()))??;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("bad node line: {line}")));
        }
        nodes.push([parse::<f64>(f[0])?, parse::<f64>(f[1])?]);
        flags.push(parse::<u8>(f[2])? != 0);
    }
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("truncated triangle block".into()))??;
        let f: Vec<usize> = line
            .split_whitespace()
            .map(parse::<usize>)
            .collect::<Result<_>>()?;
        if f.len() != 3 {
            return Err(Error::Parse(format!("bad triangle line: {line}")));
        }
        triangles.push([f[0], f[1], f[2]]);
    }
    let mesh = Mesh::new(nodes, triangles)?;
    if mesh.boundary_flags() != flags.as_slice() {
        return Err(Error::Parse(
            "boundary flags disagree with the triangulation".into(),
        ));
    }
    Ok(mesh)
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine_corner_graded, triangulate, Polygon};

    #[test]
    fn round_trip_is_bit_exact() {
        let poly = Polygon::l_shape();
        let mesh = triangulate(&poly, 0.5).unwrap();
        let mesh = refine_corner_graded(&mesh, &poly.reentrant_corners(), 0.4, 1).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_mesh("NODES 1\n".as_bytes()).is_err());
        assert!(read_mesh("NODES 3 TRIANGLES 1\n0 0 1\n1 0 1\n".as_bytes()).is_err());
        assert!(read_mesh("NODES 3 TRIANGLES 1\n0 0 1\n1 0 1\n0 1 0\n0 1 2\n".as_bytes()).is_err());
    }
}
