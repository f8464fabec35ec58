//! Coboundary, adjoint, Hodge Laplacian, super-Laplacian and Dirac matrices.
//!
//! Weighted forms use the diagonal inner product `<f, g>_W = f^T W g`. With
//! `d_k = B_{k+1}^T` the adjoint is `d_k^* = W_k^{-1} B_{k+1} W_{k+1}` and
//!
//! ```text
//! Delta_k = B_k^T W_{k-1}^{-1} B_k W_k + W_k^{-1} B_{k+1} W_{k+1} B_{k+1}^T
//! ```
//!
//! All matrices are dense; intended sizes are a few thousand cells at most.

mod spectral;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use spectral::{eigendecompose, SpectralBasis};

use crate::complex::{validate_weights, CellularComplex, ChainVec, CochainVec};
use crate::error::{Error, Result};

/// Positive per-cell weights `w^0..w^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    per_dim: Vec<Vec<f64>>,
}

impl WeightSet {
    /// The weights stored on the complex.
    pub fn from_complex(x: &CellularComplex) -> Self {
        Self {
            per_dim: x.all_weights().to_vec(),
        }
    }

    pub fn unit(x: &CellularComplex) -> Self {
        Self {
            per_dim: x.counts().into_iter().map(|n| vec![1.0; n]).collect(),
        }
    }

    pub fn new(x: &CellularComplex, per_dim: Vec<Vec<f64>>) -> Result<Self> {
        if per_dim.len() != x.dimension() + 1 {
            return Err(Error::Argument(format!(
                "{} weight vectors for a complex of dimension {}",
                per_dim.len(),
                x.dimension()
            )));
        }
        for (k, w) in per_dim.iter().enumerate() {
            validate_weights(k, w, x.count(k))?;
        }
        Ok(Self { per_dim })
    }

    /// `w^k`; empty above the top dimension.
    pub fn dim(&self, k: usize) -> &[f64] {
        self.per_dim.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn concat(&self) -> Vec<f64> {
        self.per_dim.iter().flatten().copied().collect()
    }

    /// Weights over the index space described by `blocks`.
    pub fn for_blocks(&self, blocks: &[Block]) -> Vec<f64> {
        blocks.iter().flat_map(|b| self.dim(b.dim).iter().copied()).collect()
    }

    pub fn is_unit(&self) -> bool {
        self.per_dim.iter().flatten().all(|&w| w == 1.0)
    }
}

/// A contiguous run of `dim`-cells inside an operator's index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub offset: usize,
    pub len: usize,
}

pub(crate) fn direct_sum_blocks(x: &CellularComplex) -> Vec<Block> {
    x.offsets()
        .into_iter()
        .enumerate()
        .map(|(dim, offset)| Block {
            dim,
            offset,
            len: x.count(dim),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorRole {
    Coboundary(usize),
    Adjoint(usize),
    Hodge(usize),
    SuperLaplacian,
    Dirac,
}

impl OperatorRole {
    /// Laplacian-type operators have a nonnegative spectrum.
    pub fn is_laplacian(self) -> bool {
        matches!(self, OperatorRole::Hodge(_) | OperatorRole::SuperLaplacian)
    }
}

impl fmt::Display for OperatorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorRole::Coboundary(k) => write!(f, "coboundary:{k}"),
            OperatorRole::Adjoint(k) => write!(f, "adjoint:{k}"),
            OperatorRole::Hodge(k) => write!(f, "hodge:{k}"),
            OperatorRole::SuperLaplacian => write!(f, "super"),
            OperatorRole::Dirac => write!(f, "dirac"),
        }
    }
}

impl FromStr for OperatorRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_k = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Argument(format!("bad dimension in operator '{s}'")))
        };
        match s.split_once(':') {
            Some(("hodge", k)) => Ok(OperatorRole::Hodge(parse_k(k)?)),
            Some(("coboundary", k)) => Ok(OperatorRole::Coboundary(parse_k(k)?)),
            Some(("adjoint", k)) => Ok(OperatorRole::Adjoint(parse_k(k)?)),
            None if s == "super" => Ok(OperatorRole::SuperLaplacian),
            None if s == "dirac" => Ok(OperatorRole::Dirac),
            _ => Err(Error::Argument(format!(
                "unknown operator '{s}' (expected hodge:k, super or dirac)"
            ))),
        }
    }
}

impl Serialize for OperatorRole {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for OperatorRole {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A dense operator with its role and, for square operators, the index blocks
/// of its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub role: OperatorRole,
    pub matrix: DMatrix<f64>,
    pub blocks: Vec<Block>,
}

impl OperatorMatrix {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

fn check_k(x: &CellularComplex, k: usize) -> Result<()> {
    if k > x.dimension() {
        return Err(Error::Argument(format!(
            "dimension {k} exceeds complex dimension {}",
            x.dimension()
        )));
    }
    Ok(())
}

/// Scales rows by `r` and columns by `c` in place.
fn scale(m: &mut DMatrix<f64>, r: Option<&[f64]>, c: Option<&[f64]>) {
    if let Some(r) = r {
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row *= r[i];
        }
    }
    if let Some(c) = c {
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= c[j];
        }
    }
}

fn recip(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| 1.0 / x).collect()
}

/// `D_k = B_{k+1}^T`, of shape `N_{k+1} x N_k`; the zero `0 x N_n` map for `k = n`.
pub fn coboundary(x: &CellularComplex, k: usize) -> Result<OperatorMatrix> {
    check_k(x, k)?;
    let matrix = if k == x.dimension() {
        DMatrix::zeros(0, x.count(k))
    } else {
        x.boundary(k + 1)?.to_dense().transpose()
    };
    Ok(OperatorMatrix {
        role: OperatorRole::Coboundary(k),
        matrix,
        blocks: vec![],
    })
}

/// `D_k^* = W_k^{-1} B_{k+1} W_{k+1}`, of shape `N_k x N_{k+1}`.
pub fn coboundary_adjoint(x: &CellularComplex, k: usize, w: &WeightSet) -> Result<OperatorMatrix> {
    check_k(x, k)?;
    let matrix = if k == x.dimension() {
        DMatrix::zeros(x.count(k), 0)
    } else {
        let mut m = x.boundary(k + 1)?.to_dense();
        scale(&mut m, Some(&recip(w.dim(k))), Some(w.dim(k + 1)));
        m
    };
    Ok(OperatorMatrix {
        role: OperatorRole::Adjoint(k),
        matrix,
        blocks: vec![],
    })
}

/// Weighted Hodge Laplacian `Delta_k`.
pub fn hodge_laplacian(x: &CellularComplex, k: usize, w: &WeightSet) -> Result<OperatorMatrix> {
    check_k(x, k)?;
    let n = x.count(k);
    let mut lap = DMatrix::zeros(n, n);
    if k >= 1 {
        // B_k^T W_{k-1}^{-1} B_k W_k
        let b = x.boundary(k)?.to_dense();
        let mut scaled = b.clone();
        scale(&mut scaled, Some(&recip(w.dim(k - 1))), Some(w.dim(k)));
        lap += b.transpose() * scaled;
    }
    if k < x.dimension() {
        // W_k^{-1} B_{k+1} W_{k+1} B_{k+1}^T
        let b = x.boundary(k + 1)?.to_dense();
        let mut scaled = b.clone();
        scale(&mut scaled, Some(&recip(w.dim(k))), Some(w.dim(k + 1)));
        lap += scaled * b.transpose();
    }
    Ok(OperatorMatrix {
        role: OperatorRole::Hodge(k),
        matrix: lap,
        blocks: vec![Block { dim: k, offset: 0, len: n }],
    })
}

/// `blockdiag(Delta_0, ..., Delta_n)`.
pub fn super_laplacian(x: &CellularComplex, w: &WeightSet) -> Result<OperatorMatrix> {
    let blocks = direct_sum_blocks(x);
    let total = x.total_cells();
    let mut m = DMatrix::zeros(total, total);
    for b in &blocks {
        let lap = hodge_laplacian(x, b.dim, w)?;
        m.view_mut((b.offset, b.offset), (b.len, b.len))
            .copy_from(&lap.matrix);
    }
    Ok(OperatorMatrix {
        role: OperatorRole::SuperLaplacian,
        matrix: m,
        blocks,
    })
}

/// Block-tridiagonal Dirac matrix with `W_{k-1}^{-1} B_k W_k` above and
/// `B_k^T` below the diagonal; its square is the super-Laplacian.
pub fn dirac_matrix(x: &CellularComplex, w: &WeightSet) -> Result<OperatorMatrix> {
    let blocks = direct_sum_blocks(x);
    let total = x.total_cells();
    let mut m = DMatrix::zeros(total, total);
    for k in 1..=x.dimension() {
        let (lo, hi) = (blocks[k - 1], blocks[k]);
        let b = x.boundary(k)?;
        let (wl, wh) = (w.dim(k - 1), w.dim(k));
        for &(r, c, s) in b.triplets() {
            let s = f64::from(s);
            m[(lo.offset + r, hi.offset + c)] = s * wh[c] / wl[r];
            m[(hi.offset + c, lo.offset + r)] = s;
        }
    }
    Ok(OperatorMatrix {
        role: OperatorRole::Dirac,
        matrix: m,
        blocks,
    })
}

/// Riesz representative `c^flat = W_k^{-1} c`, so that `<f, c^flat>_W = f(c)`.
pub fn flat(c: &ChainVec, w: &WeightSet) -> Result<CochainVec> {
    let wk = w.dim(c.dim);
    if wk.len() != c.coeffs.len() {
        return Err(Error::Argument(format!(
            "chain of length {} against {} weights",
            c.coeffs.len(),
            wk.len()
        )));
    }
    Ok(CochainVec {
        dim: c.dim,
        values: c.coeffs.iter().zip(wk).map(|(&ci, wi)| ci as f64 / wi).collect(),
    })
}

/// Direct-sum flat over a concatenated chain vector.
pub fn flat_direct(c: &[f64], w: &WeightSet) -> Result<Vec<f64>> {
    let wc = w.concat();
    if wc.len() != c.len() {
        return Err(Error::Argument(format!(
            "chain of length {} against {} weights",
            c.len(),
            wc.len()
        )));
    }
    Ok(c.iter().zip(&wc).map(|(ci, wi)| ci / wi).collect())
}

/// `<f, g>_W = sum_a w_a f_a g_a`.
pub fn inner_product(f: &CochainVec, g: &CochainVec, w: &WeightSet) -> Result<f64> {
    let wk = w.dim(f.dim);
    if f.dim != g.dim || f.values.len() != g.values.len() || wk.len() != f.values.len() {
        return Err(Error::Argument(format!(
            "inner product of cochains ({}, len {}) and ({}, len {}) with {} weights",
            f.dim,
            f.values.len(),
            g.dim,
            g.values.len(),
            wk.len()
        )));
    }
    Ok(weighted_dot(&f.values, &g.values, wk))
}

pub(crate) fn weighted_dot(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(g).zip(w).map(|((a, b), c)| a * b * c).sum()
}

/// `max |W A - (W A)^T|` relative to `max(1, max |W A|)`.
pub fn self_adjointness_error(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = a.nrows();
    let mut err: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..n {
        for j in 0..n {
            let wa = w[i] * a[(i, j)];
            scale = scale.max(wa.abs());
            if j > i {
                err = err.max((wa - w[j] * a[(j, i)]).abs());
            }
        }
    }
    err / scale
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

#[cfg(test)]
pub(crate) fn dvec(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{cubical_grid, path, triangulated_grid, ComplexBuilder};
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> CellularComplex {
        let mut b = ComplexBuilder::new();
        b.add_vertices(3);
        for e in [[0, 1], [0, 2], [1, 2]] {
            b.add_simplex(&e).unwrap();
        }
        b.add_simplex(&[0, 1, 2]).unwrap();
        b.build().unwrap()
    }

    fn random_weights(x: &CellularComplex, rng: &mut ChaCha8Rng) -> WeightSet {
        let w = x
            .counts()
            .iter()
            .map(|&n| (0..n).map(|_| rng.gen_range(0.2..3.0)).collect())
            .collect();
        WeightSet::new(x, w).unwrap()
    }

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn path_coboundary() {
        let x = path(3).unwrap();
        let d0 = coboundary(&x, 0).unwrap();
        assert_eq!(d0.matrix, dmatrix![-1.0, 1.0, 0.0; 0.0, -1.0, 1.0]);
        let top = coboundary(&x, 1).unwrap();
        assert_eq!(top.matrix.shape(), (0, 2));
        assert!(coboundary(&x, 2).is_err());
    }

    #[test]
    fn d_after_d_vanishes() {
        let x = triangulated_grid(3, 3).unwrap();
        let d0 = coboundary(&x, 0).unwrap().matrix;
        let d1 = coboundary(&x, 1).unwrap().matrix;
        assert_eq!(max_abs(&(d1 * d0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights(&x, &mut rng);
        let a0 = coboundary_adjoint(&x, 0, &w).unwrap().matrix;
        let a1 = coboundary_adjoint(&x, 1, &w).unwrap().matrix;
        assert!(max_abs(&(a0 * a1)) <= 1e-12);
    }

    #[test]
    fn unit_adjoint_is_incidence() {
        let x = path(3).unwrap();
        let a = coboundary_adjoint(&x, 0, &WeightSet::unit(&x)).unwrap();
        assert_eq!(a.matrix, x.boundary(1).unwrap().to_dense());
    }

    #[test]
    fn weighted_adjointness_identity() {
        let x = path(3).unwrap();
        let w = WeightSet::new(&x, vec![vec![1.0, 2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = coboundary(&x, 0).unwrap().matrix;
        let ds = coboundary_adjoint(&x, 0, &w).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = dvec(&rand_vec(2, &mut rng));
            let g = dvec(&rand_vec(3, &mut rng));
            // <D* f, g>_{W0} = <f, D g>_{W1}
            let lhs = weighted_dot((&ds * &f).as_slice(), g.as_slice(), w.dim(0));
            let rhs = weighted_dot(f.as_slice(), (&d * &g).as_slice(), w.dim(1));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn path_graph_laplacian() {
        let x = path(3).unwrap();
        let l = hodge_laplacian(&x, 0, &WeightSet::unit(&x)).unwrap();
        assert_eq!(
            l.matrix,
            dmatrix![1.0, -1.0, 0.0; -1.0, 2.0, -1.0; 0.0, -1.0, 1.0]
        );
    }

    #[test]
    fn graph_laplacian_is_degree_minus_adjacency() {
        let x = triangulated_grid(2, 3).unwrap();
        let l = hodge_laplacian(&x, 0, &WeightSet::unit(&x)).unwrap().matrix;
        let n = x.count(0);
        let mut expect = DMatrix::zeros(n, n);
        for c in x.cells(1) {
            let v = x.cell_vertices(1, c.id).unwrap();
            expect[(v[0], v[1])] -= 1.0;
            expect[(v[1], v[0])] -= 1.0;
            expect[(v[0], v[0])] += 1.0;
            expect[(v[1], v[1])] += 1.0;
        }
        assert_eq!(l, expect);
    }

    #[test]
    fn isolated_vertex_laplacian_is_zero() {
        let mut b = ComplexBuilder::new();
        b.add_vertices(1);
        let x = b.build().unwrap();
        let l = hodge_laplacian(&x, 0, &WeightSet::unit(&x)).unwrap();
        assert_eq!(l.matrix, dmatrix![0.0]);
    }

    #[test]
    fn weighted_laplacian_self_adjoint_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = cubical_grid(3, 3).unwrap();
        let w = random_weights(&x, &mut rng);
        for k in 0..=2 {
            let l = hodge_laplacian(&x, k, &w).unwrap().matrix;
            let n = x.count(k);
            for _ in 0..10 {
                let f = dvec(&rand_vec(n, &mut rng));
                let g = dvec(&rand_vec(n, &mut rng));
                let a = weighted_dot(f.as_slice(), (&l * &g).as_slice(), w.dim(k));
                let b = weighted_dot(g.as_slice(), (&l * &f).as_slice(), w.dim(k));
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                let q = weighted_dot(f.as_slice(), (&l * &f).as_slice(), w.dim(k));
                assert!(q >= -1e-10);
            }
        }
    }

    #[test]
    fn super_laplacian_blocks() {
        let x = single_triangle();
        let w = WeightSet::unit(&x);
        let s = super_laplacian(&x, &w).unwrap().matrix;
        assert_eq!(s.shape(), (7, 7));
        let d0 = hodge_laplacian(&x, 0, &w).unwrap().matrix;
        let d1 = hodge_laplacian(&x, 1, &w).unwrap().matrix;
        let d2 = hodge_laplacian(&x, 2, &w).unwrap().matrix;
        assert_eq!(s.view((0, 0), (3, 3)), d0);
        assert_eq!(s.view((3, 3), (3, 3)), d1);
        assert_eq!(s.view((6, 6), (1, 1)), d2);
        assert_eq!(d2, dmatrix![3.0]);
        for i in 0..7 {
            for j in 0..7 {
                let same = (i < 3) == (j < 3) && (i == 6) == (j == 6);
                if !same {
                    assert_eq!(s[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn path_dirac_structure() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let d = dirac_matrix(&x, &w).unwrap().matrix;
        let b1 = x.boundary(1).unwrap().to_dense();
        assert_eq!(d.view((0, 3), (3, 2)), b1);
        assert_eq!(d.view((3, 0), (2, 3)), b1.transpose());
        assert_eq!(d.view((0, 0), (3, 3)), DMatrix::<f64>::zeros(3, 3));
        assert_eq!(d, d.transpose());
    }

    #[test]
    fn dirac_squares_to_super_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for x in [path(4).unwrap(), triangulated_grid(3, 2).unwrap(), cubical_grid(2, 3).unwrap()] {
            for w in [WeightSet::unit(&x), random_weights(&x, &mut rng)] {
                let d = dirac_matrix(&x, &w).unwrap().matrix;
                let l = super_laplacian(&x, &w).unwrap().matrix;
                assert!(max_abs(&(&d * &d - &l)) <= 1e-10);
                let wc = w.concat();
                assert!(self_adjointness_error(&d, &wc) <= 1e-12);
                let n = wc.len();
                let f = rand_vec(n, &mut rng);
                let g = rand_vec(n, &mut rng);
                let a = weighted_dot(&f, (&d * dvec(&g)).as_slice(), &wc);
                let b = weighted_dot(&g, (&d * dvec(&f)).as_slice(), &wc);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weighted_dirac_is_not_symmetric_in_general() {
        let x = path(3).unwrap();
        let w = WeightSet::new(&x, vec![vec![1.0, 2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let d = dirac_matrix(&x, &w).unwrap().matrix;
        assert_ne!(d, d.transpose());
        let w2 = WeightSet::new(&x, vec![vec![2.0; 3], vec![2.0; 2]]).unwrap();
        let d2 = dirac_matrix(&x, &w2).unwrap().matrix;
        assert_eq!(d2, d2.transpose());
    }

    #[test]
    fn flat_and_inner_product() {
        let x = path(3).unwrap();
        let w = WeightSet::new(&x, vec![vec![1.0; 3], vec![2.0, 4.0]]).unwrap();
        let c = ChainVec::new(&x, 1, vec![1, 1]).unwrap();
        assert_eq!(flat(&c, &w).unwrap().values, vec![0.5, 0.25]);
        let u = WeightSet::unit(&x);
        assert_eq!(flat(&c, &u).unwrap().values, vec![1.0, 1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let f = CochainVec::new(&x, 1, rand_vec(2, &mut rng)).unwrap();
            let c = ChainVec::new(&x, 1, vec![rng.gen_range(-3..3), rng.gen_range(-3..3)]).unwrap();
            let lhs = inner_product(&f, &flat(&c, &w).unwrap(), &w).unwrap();
            let rhs = crate::complex::evaluate_cochain(&f, &c).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12);
        }

        let ones = CochainVec::new(&x, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(inner_product(&ones, &ones, &u).unwrap(), 2.0);
        let f = CochainVec::new(&x, 1, vec![2.0, 1.0]).unwrap();
        let g = CochainVec::new(&x, 1, vec![5.0, -3.0]).unwrap();
        assert_eq!(
            inner_product(&f, &g, &w).unwrap(),
            inner_product(&g, &f, &w).unwrap()
        );
        let v = CochainVec::new(&x, 0, vec![1.0; 3]).unwrap();
        assert!(inner_product(&f, &v, &w).is_err());
    }

    #[test]
    fn single_cell_inner_product() {
        let mut b = ComplexBuilder::new();
        b.add_vertices(1);
        b.weights(0, vec![3.0]);
        let x = b.build().unwrap();
        let w = WeightSet::from_complex(&x);
        let f = CochainVec::new(&x, 0, vec![2.0]).unwrap();
        let g = CochainVec::new(&x, 0, vec![5.0]).unwrap();
        assert_eq!(inner_product(&f, &g, &w).unwrap(), 30.0);
    }

    #[test]
    fn role_strings_roundtrip() {
        for r in [
            OperatorRole::Hodge(1),
            OperatorRole::SuperLaplacian,
            OperatorRole::Dirac,
            OperatorRole::Coboundary(0),
            OperatorRole::Adjoint(2),
        ] {
            assert_eq!(r.to_string().parse::<OperatorRole>().unwrap(), r);
        }
        assert!("hodge:x".parse::<OperatorRole>().is_err());
        assert!("laplace".parse::<OperatorRole>().is_err());
    }

    #[test]
    fn weight_validation() {
        let x = path(3).unwrap();
        assert!(WeightSet::new(&x, vec![vec![1.0, -1.0, 1.0], vec![1.0; 2]]).is_err());
        assert!(WeightSet::new(&x, vec![vec![1.0; 3]]).is_err());
    }
}
