//! Cochain-valued data: Karhunen-Loève edge fields, derived vertex and
//! triangle signals, grid-field projection and noisy train/test splits.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complex::{CellularComplex, CochainVec};
use crate::error::{Error, Result};
use crate::gp::{Observation, Target};
use crate::operators::{OperatorRole, SpectralBasis};

/// Eigenvalues at or below this (relative to the largest) count as zero modes.
const ZERO_MODE_TOL: f64 = 1e-9;

fn check_kl_range(basis: &SpectralBasis, k_min: usize, k_max: usize) -> Result<()> {
    if basis.role != OperatorRole::Hodge(1) {
        return Err(Error::Argument(format!(
            "edge fields need a hodge:1 basis, got {}",
            basis.role
        )));
    }
    if !(0 < k_min && k_min < k_max && k_max <= basis.len()) {
        return Err(Error::Argument(format!(
            "mode range [{k_min}, {k_max}] invalid for {} edge modes",
            basis.len()
        )));
    }
    Ok(())
}

/// `sum_{i=k_min}^{k_max} coeffs[i - k_min] u_i` over the ascending, 1-based
/// eigenbasis of the edge Laplacian.
pub fn kl_expansion(basis: &SpectralBasis, k_min: usize, k_max: usize, coeffs: &[f64]) -> Result<CochainVec> {
    check_kl_range(basis, k_min, k_max)?;
    if coeffs.len() != k_max - k_min + 1 {
        return Err(Error::Argument(format!(
            "{} coefficients for {} modes",
            coeffs.len(),
            k_max - k_min + 1
        )));
    }
    let mut values = vec![0.0; basis.len()];
    for (c, i) in coeffs.iter().zip(k_min..=k_max) {
        let u = basis.eigenvectors.column(i - 1);
        for (v, ui) in values.iter_mut().zip(u.iter()) {
            *v += c * ui;
        }
    }
    Ok(CochainVec { dim: 1, values })
}

/// Random edge field `sum xi_i u_i` with `xi_i ~ N(0, 1 / lambda_i)`.
pub fn kl_edge_field(basis: &SpectralBasis, k_min: usize, k_max: usize, seed: u64) -> Result<CochainVec> {
    kl_coefficients(basis, k_min, k_max, seed)
        .and_then(|xi| kl_expansion(basis, k_min, k_max, &xi))
}

/// The coefficients drawn by [`kl_edge_field`].
pub fn kl_coefficients(basis: &SpectralBasis, k_min: usize, k_max: usize, seed: u64) -> Result<Vec<f64>> {
    check_kl_range(basis, k_min, k_max)?;
    let top = basis.eigenvalues.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (k_min..=k_max)
        .map(|i| {
            let lambda = basis.eigenvalues[i - 1];
            if lambda <= ZERO_MODE_TOL * top {
                return Err(Error::Range(format!(
                    "edge mode {i} has eigenvalue {lambda:.3e}; zero modes have no finite variance"
                )));
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(z / lambda.sqrt())
        })
        .collect()
}

/// Vertex signal `B_1 f` and triangle signal `B_2^T f` of an edge cochain.
/// The triangle part is `None` when the complex has no 2-cells.
pub fn derive_vertex_triangle(f: &CochainVec, x: &CellularComplex) -> Result<(CochainVec, Option<CochainVec>)> {
    if f.dim != 1 || f.values.len() != x.count(1) {
        return Err(Error::Argument("expected an edge cochain on this complex".into()));
    }
    let vertex = CochainVec {
        dim: 0,
        values: x.boundary(1)?.mul_vec(&f.values),
    };
    if x.dimension() < 2 {
        log::warn!("complex has no 2-cells; only the vertex signal is derived");
        return Ok((vertex, None));
    }
    let tri = CochainVec {
        dim: 2,
        values: x.boundary(2)?.tr_mul_vec(&f.values),
    };
    Ok((vertex, Some(tri)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    Vector2,
    Pseudoscalar,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Vector2 => 2,
            _ => 1,
        }
    }

    pub fn target_dim(self) -> usize {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Vector2 => 1,
            FieldKind::Pseudoscalar => 2,
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(FieldKind::Scalar),
            "vector" | "vector2" => Ok(FieldKind::Vector2),
            "pseudoscalar" | "flux" => Ok(FieldKind::Pseudoscalar),
            _ => Err(Error::Parse(format!("unknown field kind {s:?}"))),
        }
    }
}

/// Samples on the nodes of a grid. Node `(i, j)` sits at `x = j`, `y = i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub kind: FieldKind,
    /// Node rows.
    pub rows: usize,
    /// Node columns.
    pub cols: usize,
    /// Row-major, `kind.components()` values per node.
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(kind: FieldKind, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols * kind.components() {
            return Err(Error::Argument(format!(
                "{} values for a {rows}x{cols} {kind:?} field",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("field value {v} is not finite")));
        }
        Ok(Self { kind, rows, cols, values })
    }

    /// Field sampled from `f(x, y)` on a node grid.
    pub fn from_fn(kind: FieldKind, rows: usize, cols: usize, f: impl Fn(f64, f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols * kind.components());
        for i in 0..rows {
            for j in 0..cols {
                let v = f(j as f64, i as f64);
                if v.len() != kind.components() {
                    return Err(Error::Argument("component count does not match field kind".into()));
                }
                values.extend(v);
            }
        }
        Self::new(kind, rows, cols, values)
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let c = self.kind.components();
        let s = (i * self.cols + j) * c;
        &self.values[s..s + c]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        match self.kind {
            FieldKind::Vector2 => writeln!(out, "i,j,vx,vy")?,
            _ => writeln!(out, "i,j,value")?,
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v: Vec<String> = self.at(i, j).iter().map(|x| format!("{x:e}")).collect();
                writeln!(out, "{i},{j},{}", v.join(","))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `i,j,value` or `i,j,vx,vy` rows. Every node of the bounding grid
    /// must appear exactly once.
    pub fn read_csv(path: impl AsRef<Path>, kind: FieldKind) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let width = 2 + kind.components();
        let mut rows_seen: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if n == 0 && parts[0].parse::<usize>().is_err() {
                continue;
            }
            if parts.len() != width {
                return Err(Error::Parse(format!(
                    "line {}: expected {width} columns for a {kind:?} field, found {}",
                    n + 1,
                    parts.len()
                )));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", n + 1));
            let i = parts[0].parse().map_err(|_| bad("row index"))?;
            let j = parts[1].parse().map_err(|_| bad("column index"))?;
            let v = parts[2..]
                .iter()
                .map(|p| p.parse::<f64>().map_err(|_| bad("value")))
                .collect::<Result<Vec<_>>>()?;
            rows_seen.push((i, j, v));
        }
        let rows = rows_seen.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let cols = rows_seen.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows_seen.len() != rows * cols {
            return Err(Error::Parse(format!(
                "{} rows do not cover a {rows}x{cols} node grid",
                rows_seen.len()
            )));
        }
        let c = kind.components();
        let mut values = vec![f64::NAN; rows * cols * c];
        let mut filled = vec![false; rows * cols];
        for (i, j, v) in rows_seen {
            let idx = i * cols + j;
            if std::mem::replace(&mut filled[idx], true) {
                return Err(Error::Parse(format!("node ({i}, {j}) listed twice")));
            }
            values[idx * c..(idx + 1) * c].copy_from_slice(&v);
        }
        Self::new(kind, rows, cols, values)
    }
}

/// Grid node of each vertex, from integer vertex positions.
fn vertex_nodes(field: &GridField, x: &CellularComplex) -> Result<Vec<(usize, usize)>> {
    let pos = x
        .positions()
        .ok_or_else(|| Error::Argument("complex has no vertex positions".into()))?;
    pos.iter()
        .enumerate()
        .map(|(v, p)| {
            let (j, i) = (p[0], p[1]);
            let ok = j.fract() == 0.0 && i.fract() == 0.0 && j >= 0.0 && i >= 0.0;
            if !ok || i as usize >= field.rows || j as usize >= field.cols {
                return Err(Error::Argument(format!(
                    "vertex {v} at ({}, {}) is not a node of the {}x{} field grid",
                    p[0], p[1], field.rows, field.cols
                )));
            }
            Ok((i as usize, j as usize))
        })
        .collect()
}

/// Signed shoelace area of a vertex cycle.
fn signed_area(cycle: &[usize], pos: &[[f64; 2]]) -> f64 {
    let n = cycle.len();
    (0..n)
        .map(|k| {
            let a = pos[cycle[k]];
            let b = pos[cycle[(k + 1) % n]];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Projects a node-sampled field to a cochain of matching dimension.
///
/// - scalar: vertex values copied from the nodes.
/// - vector: each edge gets `(v_tail . t + v_head . t) / 2` with `t` the unit
///   vector along the edge orientation.
/// - pseudoscalar: each face gets the mean of its corner values, negated when
///   the face is oriented clockwise.
pub fn project_field(field: &GridField, x: &CellularComplex) -> Result<CochainVec> {
    let dim = field.kind.target_dim();
    if dim > x.dimension() {
        return Err(Error::Argument(format!(
            "a {:?} field needs {dim}-cells but the complex has dimension {}",
            field.kind,
            x.dimension()
        )));
    }
    let nodes = vertex_nodes(field, x)?;
    let pos = x.positions().expect("checked above");
    let values = match field.kind {
        FieldKind::Scalar => nodes.iter().map(|&(i, j)| field.at(i, j)[0]).collect(),
        FieldKind::Vector2 => {
            let b1 = x.boundary(1)?;
            (0..x.count(1))
                .map(|e| {
                    let (mut tail, mut head) = (None, None);
                    for (v, s) in b1.column(e) {
                        if s < 0 {
                            tail = Some(v);
                        } else {
                            head = Some(v);
                        }
                    }
                    let (t, h) = tail.zip(head).ok_or_else(|| {
                        Error::Argument(format!("edge {e} does not have two distinct endpoints"))
                    })?;
                    let d = [pos[h][0] - pos[t][0], pos[h][1] - pos[t][1]];
                    let len = d[0].hypot(d[1]);
                    if len == 0.0 {
                        return Err(Error::Argument(format!("edge {e} has zero length")));
                    }
                    let dot = |v: usize| {
                        let f = field.at(nodes[v].0, nodes[v].1);
                        (f[0] * d[0] + f[1] * d[1]) / len
                    };
                    Ok(0.5 * (dot(t) + dot(h)))
                })
                .collect::<Result<Vec<f64>>>()?
        }
        FieldKind::Pseudoscalar => (0..x.count(2))
            .map(|f| {
                let cycle = x
                    .cell_vertices(2, f)
                    .ok_or_else(|| Error::Argument(format!("face {f} has no vertex cycle")))?;
                let area = signed_area(cycle, pos);
                if area == 0.0 {
                    return Err(Error::Argument(format!("face {f} is degenerate")));
                }
                let mean = cycle
                    .iter()
                    .map(|&v| field.at(nodes[v].0, nodes[v].1)[0])
                    .sum::<f64>()
                    / cycle.len() as f64;
                Ok(area.signum() * mean)
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    CochainVec::new(x, dim, values)
}

/// Per-dimension split of a cochain into observed and held-out cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionData {
    pub dim: usize,
    /// Sorted observed cell ids.
    pub observed: Vec<usize>,
    /// Noisy values at `observed`.
    pub noisy: Vec<f64>,
    /// Clean values on every cell.
    pub truth: Vec<f64>,
}

impl DimensionData {
    /// Sorted held-out cell ids.
    pub fn test(&self) -> Vec<usize> {
        let mut mask = vec![false; self.truth.len()];
        for &i in &self.observed {
            mask[i] = true;
        }
        (0..self.truth.len()).filter(|&i| !mask[i]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dims: Vec<DimensionData>,
    /// Noise variance.
    pub noise: f64,
    pub seed: u64,
}

/// Observes `floor(N * fraction)` cells of each dimension uniformly without
/// replacement and adds `N(0, noise)` noise, `noise` being a variance.
/// Dimension `d` draws from stream `d` of the seeded generator.
pub fn make_dataset(truth: &[CochainVec], fractions: &[f64], noise: f64, seed: u64) -> Result<Dataset> {
    if fractions.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} fractions for {} cochains",
            fractions.len(),
            truth.len()
        )));
    }
    if !(noise.is_finite() && noise > 0.0) {
        return Err(Error::Argument(format!("noise variance must be positive, got {noise}")));
    }
    let normal = Normal::new(0.0, noise.sqrt()).map_err(|e| Error::Argument(e.to_string()))?;
    let mut dims = Vec::with_capacity(truth.len());
    for (c, &frac) in truth.iter().zip(fractions) {
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::Argument(format!("fraction {frac} outside (0, 1]")));
        }
        let n = c.values.len();
        let count = (n as f64 * frac).floor() as usize;
        if count == 0 {
            return Err(Error::Argument(format!(
                "fraction {frac} of {n} {}-cells selects nothing",
                c.dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c.dim as u64);
        let mut observed = rand::seq::index::sample(&mut rng, n, count).into_vec();
        observed.sort_unstable();
        let noisy = observed.iter().map(|&i| c.values[i] + normal.sample(&mut rng)).collect();
        dims.push(DimensionData {
            dim: c.dim,
            observed,
            noisy,
            truth: c.values.clone(),
        });
    }
    Ok(Dataset { dims, noise, seed })
}

impl Dataset {
    pub fn observations(&self) -> Vec<Observation> {
        self.dims
            .iter()
            .flat_map(|d| {
                d.observed
                    .iter()
                    .zip(&d.noisy)
                    .map(move |(&i, &y)| Observation::cell(d.dim, i, y))
            })
            .collect()
    }

    /// Held-out targets and their clean values, grouped by dimension.
    pub fn test_set(&self) -> (Vec<Target>, Vec<f64>) {
        let mut targets = Vec::new();
        let mut truth = Vec::new();
        for d in &self.dims {
            for i in d.test() {
                targets.push(Target::cell(d.dim, i));
                truth.push(d.truth[i]);
            }
        }
        (targets, truth)
    }

    /// Rows `dim,cell_id,observed_flag,noisy_value,true_value`; the noisy
    /// value is empty for held-out cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "dim,cell_id,observed_flag,noisy_value,true_value")?;
        for d in &self.dims {
            let mut noisy = vec![None; d.truth.len()];
            for (&i, &y) in d.observed.iter().zip(&d.noisy) {
                noisy[i] = Some(y);
            }
            for (i, t) in d.truth.iter().enumerate() {
                match noisy[i] {
                    Some(y) => writeln!(out, "{},{i},1,{y:e},{t:e}", d.dim)?,
                    None => writeln!(out, "{},{i},0,,{t:e}", d.dim)?,
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, noise: f64, seed: u64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut dims: Vec<DimensionData> = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Parse(format!("line {}: malformed dataset row", n + 1));
            if p.len() != 5 {
                return Err(bad());
            }
            let dim: usize = p[0].parse().map_err(|_| bad())?;
            let id: usize = p[1].parse().map_err(|_| bad())?;
            let flag = p[2] == "1";
            let truth: f64 = p[4].parse().map_err(|_| bad())?;
            if dims.last().map_or(true, |d| d.dim != dim) {
                dims.push(DimensionData {
                    dim,
                    observed: Vec::new(),
                    noisy: Vec::new(),
                    truth: Vec::new(),
                });
            }
            let d = dims.last_mut().expect("pushed above");
            if id != d.truth.len() {
                return Err(Error::Parse(format!("line {}: cell ids must be consecutive", n + 1)));
            }
            d.truth.push(truth);
            if flag {
                d.observed.push(id);
                d.noisy.push(p[3].parse().map_err(|_| bad())?);
            }
        }
        Ok(Dataset { dims, noise, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{cubical_grid, path, relabel, triangulated_grid, ComplexBuilder, Relabeling};
    use crate::operators::{eigendecompose, hodge_laplacian, WeightSet};
    use proptest::prelude::*;
    use rand::Rng;

    fn edge_basis(x: &CellularComplex) -> SpectralBasis {
        let w = WeightSet::unit(x);
        eigendecompose(&hodge_laplacian(x, 1, &w).unwrap(), &w).unwrap()
    }

    #[test]
    fn single_mode_is_eigencochain() {
        let x = triangulated_grid(3, 3).unwrap();
        let b = edge_basis(&x);
        let f = kl_expansion(&b, 10, 11, &[1.0, 0.0]).unwrap();
        assert_eq!(f.values, b.eigenvectors.column(9).iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn kl_range_checks() {
        let x = triangulated_grid(2, 2).unwrap();
        let b = edge_basis(&x);
        assert!(kl_edge_field(&b, 0, 3, 1).is_err());
        assert!(kl_edge_field(&b, 3, 3, 1).is_err());
        assert!(kl_edge_field(&b, 3, b.len() + 1, 1).is_err());
        // a cycle graph has a harmonic edge mode at index 1
        let mut bl = ComplexBuilder::new();
        bl.add_vertices(4);
        for e in [[0, 1], [1, 2], [2, 3], [0, 3]] {
            bl.add_simplex(&e).unwrap();
        }
        let c = bl.build().unwrap();
        let cb = edge_basis(&c);
        match kl_edge_field(&cb, 1, 3, 0) {
            Err(Error::Range(m)) => assert!(m.contains("mode 1")),
            other => panic!("expected range error, got {other:?}"),
        }
        let w = WeightSet::unit(&x);
        let vb = eigendecompose(&hodge_laplacian(&x, 0, &w).unwrap(), &w).unwrap();
        assert!(kl_edge_field(&vb, 2, 3, 0).is_err());
    }

    #[test]
    fn kl_field_stays_in_band() {
        let x = triangulated_grid(4, 4).unwrap();
        let b = edge_basis(&x);
        let f = kl_edge_field(&b, 5, 20, 3).unwrap();
        for j in 0..b.len() {
            let proj: f64 = b.eigenvectors.column(j).iter().zip(&f.values).map(|(u, v)| u * v).sum();
            if !(4..20).contains(&j) {
                assert!(proj.abs() <= 1e-10, "mode {} leaks {proj}", j + 1);
            }
        }
        assert_eq!(f, kl_edge_field(&b, 5, 20, 3).unwrap());
        assert_ne!(f, kl_edge_field(&b, 5, 20, 4).unwrap());
    }

    #[test]
    fn kl_coefficient_variance() {
        let x = triangulated_grid(2, 2).unwrap();
        let b = edge_basis(&x);
        let (k_min, k_max) = (2, 6);
        let n = 10_000;
        let mut sum = vec![0.0; k_max - k_min + 1];
        for s in 0..n {
            for (acc, c) in sum.iter_mut().zip(kl_coefficients(&b, k_min, k_max, s).unwrap()) {
                *acc += c * c;
            }
        }
        for (i, acc) in sum.iter().enumerate() {
            let expect = 1.0 / b.eigenvalues[k_min - 1 + i];
            let got = acc / n as f64;
            assert!((got - expect).abs() / expect < 0.05, "mode {}: {got} vs {expect}", k_min + i);
        }
    }

    #[test]
    fn derived_signals() {
        let mut bl = ComplexBuilder::new();
        bl.add_vertices(3);
        for e in [[0, 1], [0, 2], [1, 2]] {
            bl.add_simplex(&e).unwrap();
        }
        bl.add_simplex(&[0, 1, 2]).unwrap();
        let x = bl.build().unwrap();
        let f = CochainVec::new(&x, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let (v, t) = derive_vertex_triangle(&f, &x).unwrap();
        assert_eq!(t.unwrap().values, vec![1.0]);
        assert_eq!(v.values, vec![-2.0, 0.0, 2.0]);
        let (v, t) = derive_vertex_triangle(&CochainVec::zeros(&x, 1), &x).unwrap();
        assert!(v.values.iter().chain(&t.unwrap().values).all(|&a| a == 0.0));

        let p = path(3).unwrap();
        let (_, t) = derive_vertex_triangle(&CochainVec::zeros(&p, 1), &p).unwrap();
        assert!(t.is_none());
        assert!(derive_vertex_triangle(&CochainVec::zeros(&p, 0), &p).is_err());
    }

    #[test]
    fn derived_signals_commute_with_relabeling() {
        let x = triangulated_grid(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = Relabeling::random(&x, &mut rng);
        let y = relabel(&x, &rho).unwrap();
        let f: Vec<f64> = (0..x.count(1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fy = rho.transform_vector(1, &f);
        let (vx, tx) = derive_vertex_triangle(&CochainVec::new(&x, 1, f).unwrap(), &x).unwrap();
        let (vy, ty) = derive_vertex_triangle(&CochainVec::new(&y, 1, fy).unwrap(), &y).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&rho.transform_vector(0, &vx.values), &vy.values));
        assert!(close(&rho.transform_vector(2, &tx.unwrap().values), &ty.unwrap().values));
    }

    #[test]
    fn constant_vector_field_on_cubical() {
        let x = cubical_grid(2, 2).unwrap();
        let field = GridField::from_fn(FieldKind::Vector2, 3, 3, |_, _| vec![1.0, 0.0]).unwrap();
        let f = project_field(&field, &x).unwrap();
        let pos = x.positions().unwrap();
        for e in 0..x.count(1) {
            let vs = x.cell_vertices(1, e).unwrap();
            let horizontal = pos[vs[0]][1] == pos[vs[1]][1];
            assert_eq!(f.values[e], if horizontal { 1.0 } else { 0.0 });
        }
        // constant fields are exactly curl free
        let curl = x.boundary(2).unwrap().tr_mul_vec(&f.values);
        assert!(curl.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn edge_average_of_endpoints() {
        let p = path(2).unwrap();
        let field = GridField::new(FieldKind::Vector2, 1, 2, vec![2.0, 0.0, 0.0, 5.0]).unwrap();
        assert_eq!(project_field(&field, &p).unwrap().values, vec![1.0]);
    }

    #[test]
    fn orientation_flip_negates() {
        let mut a = ComplexBuilder::new();
        a.add_vertex_at([0.0, 0.0]);
        a.add_vertex_at([1.0, 0.0]);
        a.add_simplex(&[0, 1]).unwrap();
        let mut b = ComplexBuilder::new();
        b.add_vertex_at([1.0, 0.0]);
        b.add_vertex_at([0.0, 0.0]);
        b.add_simplex(&[0, 1]).unwrap();
        let field = GridField::new(FieldKind::Vector2, 1, 2, vec![0.3, 0.1, 0.7, -0.2]).unwrap();
        let fa = project_field(&field, &a.build().unwrap()).unwrap();
        let fb = project_field(&field, &b.build().unwrap()).unwrap();
        assert_eq!(fa.values[0], -fb.values[0]);
        assert_eq!(fa.values[0], 0.5);
    }

    #[test]
    fn scalar_and_flux_projection() {
        let x = cubical_grid(2, 3).unwrap();
        let s = GridField::from_fn(FieldKind::Scalar, 3, 4, |x, y| vec![x + 10.0 * y]).unwrap();
        let f = project_field(&s, &x).unwrap();
        for (v, p) in x.positions().unwrap().iter().enumerate() {
            assert_eq!(f.values[v], p[0] + 10.0 * p[1]);
        }
        let flux = GridField::from_fn(FieldKind::Pseudoscalar, 3, 4, |_, _| vec![1.0]).unwrap();
        let g = project_field(&flux, &x).unwrap();
        assert!(g.values.iter().all(|&v| v == -1.0));
        let t = triangulated_grid(2, 3).unwrap();
        let g = project_field(&flux, &t).unwrap();
        assert!(g.values.iter().all(|&v| v.abs() == 1.0));
    }

    #[test]
    fn projection_errors() {
        let x = cubical_grid(2, 2).unwrap();
        let small = GridField::from_fn(FieldKind::Vector2, 2, 2, |_, _| vec![1.0, 0.0]).unwrap();
        assert!(project_field(&small, &x).is_err());
        let p = path(3).unwrap();
        let flux = GridField::from_fn(FieldKind::Pseudoscalar, 1, 3, |_, _| vec![1.0]).unwrap();
        assert!(project_field(&flux, &p).is_err());
        assert!(GridField::new(FieldKind::Vector2, 2, 2, vec![0.0; 4]).is_err());
    }

    #[test]
    fn grid_field_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let field = GridField::from_fn(FieldKind::Vector2, 3, 2, |x, y| vec![x * 0.1, -y / 3.0]).unwrap();
        let p = dir.path().join("f.csv");
        field.write_csv(&p).unwrap();
        assert_eq!(GridField::read_csv(&p, FieldKind::Vector2).unwrap(), field);
        assert!(GridField::read_csv(&p, FieldKind::Scalar).is_err());
        std::fs::write(&p, "i,j,value\n0,0,1\n1,1,2\n").unwrap();
        assert!(GridField::read_csv(&p, FieldKind::Scalar).is_err());
    }

    #[test]
    fn dataset_split() {
        let x = triangulated_grid(9, 9).unwrap();
        let truth: Vec<CochainVec> = (0..3)
            .map(|d| CochainVec::new(&x, d, (0..x.count(d)).map(|i| i as f64).collect()).unwrap())
            .collect();
        let ds = make_dataset(&truth, &[1.0 / 3.0; 3], 1e-2, 5).unwrap();
        let counts: Vec<usize> = ds.dims.iter().map(|d| d.observed.len()).collect();
        assert_eq!(counts, vec![33, 87, 54]);
        assert_eq!(ds, make_dataset(&truth, &[1.0 / 3.0; 3], 1e-2, 5).unwrap());
        for d in &ds.dims {
            let mut all: Vec<usize> = d.observed.iter().copied().chain(d.test()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..d.truth.len()).collect::<Vec<_>>());
        }
        assert_eq!(ds.observations().len(), 174);
        let (t, y) = ds.test_set();
        assert_eq!(t.len(), 523 - 174);
        assert_eq!(t.len(), y.len());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.write_csv(&p).unwrap();
        assert_eq!(Dataset::read_csv(&p, 1e-2, 5).unwrap(), ds);

        assert!(make_dataset(&truth, &[0.001, 0.5, 0.5], 1e-2, 1).is_err());
        assert!(make_dataset(&truth, &[0.5; 3], 0.0, 1).is_err());
        assert!(make_dataset(&truth, &[0.5; 2], 0.1, 1).is_err());
    }

    #[test]
    fn dataset_noise_level() {
        let x = triangulated_grid(20, 20).unwrap();
        let truth = vec![CochainVec::zeros(&x, 1)];
        let ds = make_dataset(&truth, &[1.0], 1e-4, 9).unwrap();
        let var = ds.dims[0].noisy.iter().map(|v| v * v).sum::<f64>() / ds.dims[0].noisy.len() as f64;
        assert!((var - 1e-4).abs() < 1e-5, "{var}");
    }

    proptest! {
        #[test]
        fn derive_is_linear(seed in 0u64..500, a in -3.0f64..3.0) {
            let x = triangulated_grid(2, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rand_f = || CochainVec::new(&x, 1, (0..x.count(1)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let (f, g) = (rand_f(), rand_f());
            let h = CochainVec::new(&x, 1, f.values.iter().zip(&g.values).map(|(p, q)| a * p + q).collect()).unwrap();
            let (vf, tf) = derive_vertex_triangle(&f, &x).unwrap();
            let (vg, tg) = derive_vertex_triangle(&g, &x).unwrap();
            let (vh, th) = derive_vertex_triangle(&h, &x).unwrap();
            for i in 0..vh.values.len() {
                prop_assert!((vh.values[i] - a * vf.values[i] - vg.values[i]).abs() < 1e-12);
            }
            let (tf, tg, th) = (tf.unwrap(), tg.unwrap(), th.unwrap());
            for i in 0..th.values.len() {
                prop_assert!((th.values[i] - a * tf.values[i] - tg.values[i]).abs() < 1e-12);
            }
        }
    }
}
