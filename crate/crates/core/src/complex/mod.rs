//! Finite oriented cellular complexes.
//!
//! A complex stores its cells per dimension, the signed incidence matrices
//! `B_1..B_n` (with `B_k` of shape `N_{k-1} x N_k`) and positive per-cell
//! weights. Cells are described by their geometry: an ordered simplex, an
//! oriented polygon cycle, or an explicit signed list of faces. Incidence is
//! assembled from geometry and `B_{k-1} B_k = 0` is verified exactly on every
//! build.

mod boundary;
mod cochain;
mod grid;
mod incidence;
mod io;
mod relabel;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use boundary::{boundary_of_polygon, boundary_of_simplex, canonical_cycle, sort_parity};
pub use cochain::{evaluate_cochain, ChainVec, CochainVec, DirectSumCochain};
pub use grid::{build_complex, cubical_grid, path, triangulated_grid, GridKind};
pub use incidence::Incidence;
pub use relabel::{relabel, Relabeling};

use crate::error::{Error, Result};

/// How a cell is attached to the cells one dimension below.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Vertex,
    /// Ordered vertex tuple; the order fixes the orientation.
    Simplex { vertices: Vec<usize> },
    /// Oriented vertex cycle of a 2-cell, stored from its smallest vertex.
    Polygon { cycle: Vec<usize> },
    /// Signed list of `(face id, sign)` one dimension below.
    Explicit { boundary: Vec<(usize, i8)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub dim: usize,
    pub id: usize,
    pub geometry: Geometry,
}

/// Incrementally collects cells and assembles a [`CellularComplex`].
#[derive(Clone, Debug, Default)]
pub struct ComplexBuilder {
    cells: Vec<Vec<Geometry>>,
    weights: HashMap<usize, Vec<f64>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl ComplexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, dim: usize, g: Geometry) -> usize {
        if self.cells.len() <= dim {
            self.cells.resize_with(dim + 1, Vec::new);
        }
        self.cells[dim].push(g);
        self.cells[dim].len() - 1
    }

    /// Adds `n` vertices without positions and returns the first new id.
    pub fn add_vertices(&mut self, n: usize) -> usize {
        let first = self.cells.first().map_or(0, Vec::len);
        for _ in 0..n {
            self.push(0, Geometry::Vertex);
        }
        first
    }

    /// Adds a vertex with a planar position. Positions must be given for all
    /// vertices or for none.
    pub fn add_vertex_at(&mut self, position: [f64; 2]) -> usize {
        let id = self.push(0, Geometry::Vertex);
        self.positions.get_or_insert_with(Vec::new).push(position);
        id
    }

    /// Adds an oriented simplex of dimension `vertices.len() - 1 >= 1`.
    pub fn add_simplex(&mut self, vertices: &[usize]) -> Result<usize> {
        if vertices.len() < 2 {
            return Err(Error::InvalidCell(format!(
                "simplex {vertices:?} must have at least 2 vertices; use add_vertices for 0-cells"
            )));
        }
        boundary_of_simplex(vertices)?;
        Ok(self.push(
            vertices.len() - 1,
            Geometry::Simplex {
                vertices: vertices.to_vec(),
            },
        ))
    }

    /// Adds an oriented polygonal 2-cell bounded by the given vertex cycle.
    pub fn add_polygon(&mut self, cycle: &[usize]) -> Result<usize> {
        boundary_of_polygon(cycle)?;
        Ok(self.push(
            2,
            Geometry::Polygon {
                cycle: canonical_cycle(cycle),
            },
        ))
    }

    /// Adds a `dim`-cell with an explicit signed boundary over `(dim-1)`-cells.
    pub fn add_cell(&mut self, dim: usize, boundary: Vec<(usize, i8)>) -> Result<usize> {
        if dim == 0 {
            return Err(Error::InvalidCell("0-cells have no boundary list".into()));
        }
        if let Some(&(f, s)) = boundary.iter().find(|&&(_, s)| s != 1 && s != -1) {
            return Err(Error::InvalidCell(format!(
                "boundary coefficient {s} on face {f} is not +-1"
            )));
        }
        Ok(self.push(dim, Geometry::Explicit { boundary }))
    }

    /// Sets per-cell weights for one dimension (default all 1).
    pub fn weights(&mut self, dim: usize, w: Vec<f64>) -> &mut Self {
        self.weights.insert(dim, w);
        self
    }

    pub fn build(self) -> Result<CellularComplex> {
        let ComplexBuilder {
            mut cells,
            weights,
            positions,
        } = self;
        while cells.len() > 1 && cells.last().is_some_and(Vec::is_empty) {
            cells.pop();
        }
        if cells.first().map_or(true, Vec::is_empty) {
            return Err(Error::Construction("complex has no vertices".into()));
        }
        let counts: Vec<usize> = cells.iter().map(Vec::len).collect();
        if let Some(p) = &positions {
            if p.len() != counts[0] {
                return Err(Error::Construction(format!(
                    "{} vertex positions for {} vertices",
                    p.len(),
                    counts[0]
                )));
            }
        }
        let incidence = assemble_incidence(&cells)?;
        let mut w = Vec::with_capacity(counts.len());
        for (k, &n) in counts.iter().enumerate() {
            let wk = weights.get(&k).cloned().unwrap_or_else(|| vec![1.0; n]);
            validate_weights(k, &wk, n)?;
            w.push(wk);
        }
        if let Some(k) = weights.keys().find(|&&k| k >= counts.len()) {
            return Err(Error::Construction(format!(
                "weights given for dimension {k} but the complex has top dimension {}",
                counts.len() - 1
            )));
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(dim, list)| {
                list.into_iter()
                    .enumerate()
                    .map(|(id, geometry)| Cell { dim, id, geometry })
                    .collect()
            })
            .collect();
        Ok(CellularComplex {
            cells,
            incidence,
            weights: w,
            positions,
        })
    }
}

pub(crate) fn validate_weights(dim: usize, w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Argument(format!(
            "dimension {dim}: {} weights for {n} cells",
            w.len()
        )));
    }
    if let Some((i, x)) = w.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Argument(format!(
            "dimension {dim}: weight {x} of cell {i} is not strictly positive"
        )));
    }
    Ok(())
}

fn sorted_key(v: &[usize]) -> Vec<usize> {
    let mut k = v.to_vec();
    k.sort_unstable();
    k
}

/// Assembles `B_1..B_n` from per-dimension cell geometry and checks
/// `B_{k-1} B_k = 0` exactly.
///
/// `[B_k]_{ij}` is the signed degree of `(k-1)`-cell `i` in the boundary of
/// `k`-cell `j`, relative to the stored orientation of cell `i`.
pub fn assemble_incidence(cells: &[Vec<Geometry>]) -> Result<Vec<Incidence>> {
    let n_vertices = cells.first().map_or(0, Vec::len);
    for (dim, list) in cells.iter().enumerate() {
        for (id, g) in list.iter().enumerate() {
            let ok = match g {
                Geometry::Vertex => dim == 0,
                Geometry::Simplex { vertices } => dim >= 1 && vertices.len() == dim + 1,
                Geometry::Polygon { .. } => dim == 2,
                Geometry::Explicit { .. } => dim >= 1,
            };
            if !ok {
                return Err(Error::InvalidCell(format!(
                    "{dim}-cell {id} has geometry {g:?} of the wrong dimension"
                )));
            }
            let verts: &[usize] = match g {
                Geometry::Simplex { vertices } => vertices,
                Geometry::Polygon { cycle } => cycle,
                _ => &[],
            };
            if let Some(v) = verts.iter().find(|&&v| v >= n_vertices) {
                return Err(Error::Construction(format!(
                    "{dim}-cell {id} references missing vertex {v}"
                )));
            }
        }
    }

    // key = sorted vertex set -> (id, orientation parity of stored tuple)
    let mut simplex_index: Vec<HashMap<Vec<usize>, (usize, i8)>> = Vec::with_capacity(cells.len());
    for (dim, list) in cells.iter().enumerate() {
        let mut map = HashMap::new();
        for (id, g) in list.iter().enumerate() {
            let tuple: Option<Vec<usize>> = match g {
                Geometry::Vertex => Some(vec![id]),
                Geometry::Simplex { vertices } => Some(vertices.clone()),
                _ => None,
            };
            if let Some(t) = tuple {
                if map.insert(sorted_key(&t), (id, sort_parity(&t))).is_some() {
                    return Err(Error::InvalidCell(format!(
                        "{dim}-cell {id} duplicates simplex {t:?}"
                    )));
                }
            }
        }
        simplex_index.push(map);
    }

    let mut out = Vec::new();
    for k in 1..cells.len() {
        let faces = &simplex_index[k - 1];
        let lookup = |cell: usize, key: Vec<usize>| -> Result<(usize, i8)> {
            faces.get(&key).copied().ok_or_else(|| {
                Error::Construction(format!(
                    "{k}-cell {cell}: boundary face {key:?} is not a {}-cell of the complex",
                    k - 1
                ))
            })
        };
        let mut trip = Vec::new();
        for (j, g) in cells[k].iter().enumerate() {
            match g {
                Geometry::Simplex { vertices } => {
                    for (face, sign) in boundary_of_simplex(vertices)? {
                        let (i, orient) = lookup(j, face)?;
                        trip.push((i, j, i64::from(sign * orient)));
                    }
                }
                Geometry::Polygon { cycle } => {
                    for (edge, sign) in boundary_of_polygon(cycle)? {
                        let (i, orient) = lookup(j, edge.to_vec())?;
                        trip.push((i, j, i64::from(sign * orient)));
                    }
                }
                Geometry::Explicit { boundary } => {
                    for &(i, s) in boundary {
                        if i >= cells[k - 1].len() {
                            return Err(Error::Construction(format!(
                                "{k}-cell {j} references missing {}-cell {i}",
                                k - 1
                            )));
                        }
                        trip.push((i, j, i64::from(s)));
                    }
                }
                Geometry::Vertex => unreachable!("checked above"),
            }
        }
        let b = Incidence::from_triplets(cells[k - 1].len(), cells[k].len(), trip)
            .map_err(|e| Error::Construction(format!("B_{k}: {e}")))?;
        out.push(b);
    }
    check_boundary_squared(&out)?;
    Ok(out)
}

fn check_boundary_squared(b: &[Incidence]) -> Result<()> {
    for k in 1..b.len() {
        let prod = b[k - 1].mul_exact(&b[k])?;
        if let Some(&(i, j, v)) = prod.first() {
            return Err(Error::Consistency(format!(
                "B_{} B_{} has nonzero entry {v} at ({i}, {j})",
                k,
                k + 1
            )));
        }
    }
    Ok(())
}

/// An immutable finite oriented cellular complex.
#[derive(Clone, Debug, PartialEq)]
pub struct CellularComplex {
    cells: Vec<Vec<Cell>>,
    incidence: Vec<Incidence>,
    weights: Vec<Vec<f64>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl CellularComplex {
    /// Top dimension `n`.
    pub fn dimension(&self) -> usize {
        self.cells.len() - 1
    }

    /// `N_k`, zero for `k > n`.
    pub fn count(&self, k: usize) -> usize {
        self.cells.get(k).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    pub fn total_cells(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Start of each dimension's block in the direct-sum index space.
    pub fn offsets(&self) -> Vec<usize> {
        self.cells
            .iter()
            .scan(0, |acc, c| {
                let o = *acc;
                *acc += c.len();
                Some(o)
            })
            .collect()
    }

    pub fn cells(&self, k: usize) -> &[Cell] {
        self.cells.get(k).map_or(&[], Vec::as_slice)
    }

    /// `B_k` for `1 <= k <= n`.
    pub fn boundary(&self, k: usize) -> Result<&Incidence> {
        if k == 0 || k > self.dimension() {
            return Err(Error::Argument(format!(
                "B_{k} undefined for a complex of dimension {}",
                self.dimension()
            )));
        }
        Ok(&self.incidence[k - 1])
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        self.weights.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn all_weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Returns a copy with the weights of dimension `k` replaced.
    pub fn with_weights(mut self, k: usize, w: Vec<f64>) -> Result<Self> {
        if k > self.dimension() {
            return Err(Error::Argument(format!("no dimension {k} in complex")));
        }
        validate_weights(k, &w, self.count(k))?;
        self.weights[k] = w;
        Ok(self)
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Re-checks `B_{k-1} B_k = 0` exactly.
    pub fn verify_boundary_squared(&self) -> Result<()> {
        check_boundary_squared(&self.incidence)
    }

    /// Vertex tuple of a simplex or polygon cell, in stored orientation.
    pub fn cell_vertices(&self, k: usize, id: usize) -> Option<&[usize]> {
        match &self.cells.get(k)?.get(id)?.geometry {
            Geometry::Simplex { vertices } => Some(vertices),
            Geometry::Polygon { cycle } => Some(cycle),
            _ => None,
        }
    }

    pub(crate) fn geometry(&self) -> Vec<Vec<Geometry>> {
        self.cells
            .iter()
            .map(|l| l.iter().map(|c| c.geometry.clone()).collect())
            .collect()
    }

    pub(crate) fn from_parts(
        geometry: Vec<Vec<Geometry>>,
        weights: Vec<Vec<f64>>,
        positions: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        let mut b = ComplexBuilder::new();
        b.cells = geometry;
        b.positions = positions;
        for (k, w) in weights.into_iter().enumerate() {
            b.weights(k, w);
        }
        b.build()
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = self.to_json().expect("complex serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
