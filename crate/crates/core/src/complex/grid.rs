//! Deterministic builders for paths and planar grids.
//!
//! Vertices are numbered row-major, vertex `(i, j)` sits at position
//! `(x, y) = (j, i)`. Edges and faces are ordered lexicographically by their
//! stored vertex tuples.

use serde::{Deserialize, Serialize};

use super::{CellularComplex, ComplexBuilder};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Path,
    TriangulatedGrid,
    CubicalGrid,
}

impl std::str::FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(GridKind::Path),
            "triangulated_grid" | "triangulated" => Ok(GridKind::TriangulatedGrid),
            "cubical_grid" | "cubical" => Ok(GridKind::CubicalGrid),
            other => Err(Error::Argument(format!("unknown complex kind '{other}'"))),
        }
    }
}

/// Builds a complex of the given kind. `path` takes one dimension (vertex
/// count); grids take `[rows, cols]` counted in squares.
pub fn build_complex(kind: GridKind, dims: &[usize]) -> Result<CellularComplex> {
    match (kind, dims) {
        (GridKind::Path, &[n]) => path(n),
        (GridKind::TriangulatedGrid, &[r, c]) => triangulated_grid(r, c),
        (GridKind::CubicalGrid, &[r, c]) => cubical_grid(r, c),
        _ => Err(Error::Argument(format!(
            "{kind:?} does not accept dimensions {dims:?}"
        ))),
    }
}

/// Path graph `v0 -> v1 -> ... -> v_{n-1}`.
pub fn path(n: usize) -> Result<CellularComplex> {
    if n == 0 {
        return Err(Error::Argument("path needs at least one vertex".into()));
    }
    let mut b = ComplexBuilder::new();
    for i in 0..n {
        b.add_vertex_at([i as f64, 0.0]);
    }
    for i in 1..n {
        b.add_simplex(&[i - 1, i])?;
    }
    b.build()
}

fn grid_vertices(b: &mut ComplexBuilder, rows: usize, cols: usize) -> impl Fn(usize, usize) -> usize {
    for i in 0..=rows {
        for j in 0..=cols {
            b.add_vertex_at([j as f64, i as f64]);
        }
    }
    move |i, j| i * (cols + 1) + j
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument(format!(
            "grid dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// `rows x cols` squares, each split along its lower-left to upper-right
/// diagonal into two triangles.
pub fn triangulated_grid(rows: usize, cols: usize) -> Result<CellularComplex> {
    check_dims(rows, cols)?;
    let mut b = ComplexBuilder::new();
    let v = grid_vertices(&mut b, rows, cols);
    let mut edges = Vec::new();
    let mut tris = Vec::new();
    for i in 0..=rows {
        for j in 0..=cols {
            if j < cols {
                edges.push([v(i, j), v(i, j + 1)]);
            }
            if i < rows {
                edges.push([v(i, j), v(i + 1, j)]);
            }
            if i < rows && j < cols {
                edges.push([v(i, j), v(i + 1, j + 1)]);
                tris.push([v(i, j), v(i, j + 1), v(i + 1, j + 1)]);
                tris.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            }
        }
    }
    edges.sort_unstable();
    tris.sort_unstable();
    for e in &edges {
        b.add_simplex(e)?;
    }
    for t in &tris {
        b.add_simplex(t)?;
    }
    b.build()
}

/// `rows x cols` square 2-cells, each oriented clockwise in the `(x, y)` plane.
pub fn cubical_grid(rows: usize, cols: usize) -> Result<CellularComplex> {
    check_dims(rows, cols)?;
    let mut b = ComplexBuilder::new();
    let v = grid_vertices(&mut b, rows, cols);
    let mut edges = Vec::new();
    for i in 0..=rows {
        for j in 0..=cols {
            if j < cols {
                edges.push([v(i, j), v(i, j + 1)]);
            }
            if i < rows {
                edges.push([v(i, j), v(i + 1, j)]);
            }
        }
    }
    edges.sort_unstable();
    for e in &edges {
        b.add_simplex(e)?;
    }
    for i in 0..rows {
        for j in 0..cols {
            // up, right, down, left when y points up
            b.add_polygon(&[v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)])?;
        }
    }
    b.build()
}
