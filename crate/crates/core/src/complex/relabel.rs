use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::incidence::invert;
use super::{canonical_cycle, CellularComplex, Geometry};
use crate::error::{Error, Result};

/// Per-dimension permutations of cell labels.
///
/// `perms[k][new] = old`: the cell at position `new` of the relabeled complex
/// is the cell at position `old` of the original. The associated permutation
/// matrix `S_k` has `S_k[old, new] = 1`, so vectors transform as `S^T v` and
/// matrices as `S^T M S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relabeling {
    perms: Vec<Vec<usize>>,
}

impl Relabeling {
    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        for (k, p) in perms.iter().enumerate() {
            let mut seen = vec![false; p.len()];
            for &i in p {
                if i >= p.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Argument(format!(
                        "relabeling of dimension {k} is not a bijection"
                    )));
                }
            }
        }
        Ok(Self { perms })
    }

    pub fn identity(x: &CellularComplex) -> Self {
        Self {
            perms: x.counts().into_iter().map(|n| (0..n).collect()).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(x: &CellularComplex, rng: &mut R) -> Self {
        let perms = x
            .counts()
            .into_iter()
            .map(|n| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        Self { perms }
    }

    pub fn inverse(&self) -> Self {
        Self {
            perms: self.perms.iter().map(|p| invert(p)).collect(),
        }
    }

    pub fn perm(&self, k: usize) -> &[usize] {
        &self.perms[k]
    }

    pub fn check_for(&self, x: &CellularComplex) -> Result<()> {
        let counts = x.counts();
        if self.perms.len() != counts.len()
            || self.perms.iter().zip(&counts).any(|(p, &n)| p.len() != n)
        {
            return Err(Error::Argument(format!(
                "relabeling sizes {:?} do not match cell counts {counts:?}",
                self.perms.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    /// Concatenated permutation over the direct-sum index space.
    pub fn direct_sum(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for p in &self.perms {
            out.extend(p.iter().map(|&i| i + offset));
            offset += p.len();
        }
        out
    }

    /// Permutation matrix `S_k`.
    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        perm_matrix(&self.perms[k])
    }

    /// `S_k^T v`
    pub fn transform_vector(&self, k: usize, v: &[f64]) -> Vec<f64> {
        self.perms[k].iter().map(|&old| v[old]).collect()
    }

    /// `S_k^T M S_k`
    pub fn transform_matrix(&self, k: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        permute_sym(&self.perms[k], m)
    }

    pub fn transform_direct_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let p = self.direct_sum();
        DVector::from_iterator(p.len(), p.iter().map(|&old| v[old]))
    }

    pub fn transform_direct_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        permute_sym(&self.direct_sum(), m)
    }
}

fn perm_matrix(p: &[usize]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(p.len(), p.len());
    for (new, &old) in p.iter().enumerate() {
        s[(old, new)] = 1.0;
    }
    s
}

fn permute_sym(p: &[usize], m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(p.len(), p.len(), |a, b| m[(p[a], p[b])])
}

/// Relabels every cell of `x` and reassembles the incidence matrices.
///
/// Cell orientations are preserved, so the result satisfies
/// `B'_k = S_{k-1}^T B_k S_k` entrywise.
pub fn relabel(x: &CellularComplex, rho: &Relabeling) -> Result<CellularComplex> {
    rho.check_for(x)?;
    let inv: Vec<Vec<usize>> = rho.perms.iter().map(|p| invert(p)).collect();
    let geometry = x.geometry();
    let mut out = Vec::with_capacity(geometry.len());
    for (k, cells) in geometry.iter().enumerate() {
        let list = rho.perms[k]
            .iter()
            .map(|&old| match &cells[old] {
                Geometry::Vertex => Geometry::Vertex,
                Geometry::Simplex { vertices } => Geometry::Simplex {
                    vertices: vertices.iter().map(|&v| inv[0][v]).collect(),
                },
                Geometry::Polygon { cycle } => Geometry::Polygon {
                    cycle: canonical_cycle(&cycle.iter().map(|&v| inv[0][v]).collect::<Vec<_>>()),
                },
                Geometry::Explicit { boundary } => Geometry::Explicit {
                    boundary: boundary.iter().map(|&(f, s)| (inv[k - 1][f], s)).collect(),
                },
            })
            .collect();
        out.push(list);
    }
    let weights = x
        .all_weights()
        .iter()
        .enumerate()
        .map(|(k, w)| rho.transform_vector(k, w))
        .collect();
    let positions = x
        .positions()
        .map(|p| rho.perms[0].iter().map(|&old| p[old]).collect());
    CellularComplex::from_parts(out, weights, positions)
}
