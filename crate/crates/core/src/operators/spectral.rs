//! Weighted-orthonormal eigendecompositions.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{max_abs, self_adjointness_error, Block, OperatorMatrix, OperatorRole, WeightSet};
use crate::error::{Error, Result};

const SELF_ADJOINT_TOL: f64 = 1e-8;
const ORTHONORMAL_TOL: f64 = 1e-8;

/// Eigenpairs `(Lambda, U)` of a self-adjoint operator with `U^T W U = I`.
///
/// Eigenvalues ascend; each eigenvector has its largest-magnitude entry
/// positive. For a Dirac basis the eigenvalues are signed and their squares
/// are the super-Laplacian spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    pub role: OperatorRole,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub blocks: Vec<Block>,
    pub complex_hash: Option<String>,
}

/// Solves `A u = lambda u` for an operator self-adjoint under `<.,.>_W`.
///
/// The problem is symmetrized as `M = W^{1/2} A W^{-1/2}`, solved with a dense
/// symmetric solver and mapped back through `U = W^{-1/2} V`.
pub fn eigendecompose(op: &OperatorMatrix, w: &WeightSet) -> Result<SpectralBasis> {
    let n = op.nrows();
    if op.ncols() != n {
        return Err(Error::Operator(format!(
            "{} is not square ({}x{})",
            op.role,
            n,
            op.ncols()
        )));
    }
    let weights = w.for_blocks(&op.blocks);
    if weights.len() != n {
        return Err(Error::Operator(format!(
            "{} weights for an operator of size {n}",
            weights.len()
        )));
    }
    let err = self_adjointness_error(&op.matrix, &weights);
    if err > SELF_ADJOINT_TOL {
        return Err(Error::Operator(format!(
            "{} is not self-adjoint under the given weights (relative asymmetry {err:.3e})",
            op.role
        )));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|x| x.sqrt()).collect();
    let mut m = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * op.matrix[(i, j)] / sqrt_w[j]);
    let mt = m.transpose();
    m += mt;
    m *= 0.5;

    // Solve decoupled blocks separately so that eigenvectors of a
    // block-diagonal operator never straddle two dimensions.
    let groups: Vec<(usize, usize)> = if op.blocks.len() > 1 && decoupled(&m, &op.blocks) {
        op.blocks.iter().filter(|b| b.len > 0).map(|b| (b.offset, b.len)).collect()
    } else {
        vec![(0, n)]
    };
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for (offset, len) in groups {
        let sub = m.view((offset, offset), (len, len)).into_owned();
        let eig = SymmetricEigen::try_new(sub, 1e-15, 0)
            .ok_or_else(|| Error::Numeric(format!("eigensolver did not converge on {}", op.role)))?;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if !lambda.is_finite() {
                return Err(Error::Numeric(format!("non-finite eigenvalue for {}", op.role)));
            }
            let mut c = vec![0.0; n];
            for (i, v) in eig.eigenvectors.column(j).iter().enumerate() {
                c[offset + i] = v / sqrt_w[offset + i];
            }
            fix_sign(&mut c);
            pairs.push((lambda, c));
        }
    }
    // stable sort keeps solver order among exact ties
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let eigenvalues = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
    let mut u = DMatrix::zeros(n, n);
    for (col, (_, c)) in pairs.into_iter().enumerate() {
        u.set_column(col, &DVector::from_vec(c));
    }
    Ok(SpectralBasis {
        role: op.role,
        eigenvalues,
        eigenvectors: u,
        weights: DVector::from_vec(weights),
        blocks: op.blocks.clone(),
        complex_hash: None,
    })
}

fn decoupled(m: &DMatrix<f64>, blocks: &[Block]) -> bool {
    let owner: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, blk)| std::iter::repeat(b).take(blk.len))
        .collect();
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| owner[i] == owner[j] || m[(i, j)] == 0.0))
}

/// Makes the largest-magnitude entry positive; near-ties go to the lowest index.
fn fix_sign(c: &mut [f64]) {
    let max = c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if let Some(i) = c.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if c[i] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn with_complex_hash(mut self, hash: String) -> Self {
        self.complex_hash = Some(hash);
        self
    }

    /// `max |U^T W U - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let u = &self.eigenvectors;
        let mut wu = u.clone();
        for (i, mut row) in wu.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        let g = u.transpose() * wu;
        max_abs(&(g - DMatrix::identity(self.len(), self.len())))
    }

    /// `max |A U - U diag(Lambda)| / max |A|`.
    pub fn residual(&self, op: &DMatrix<f64>) -> f64 {
        let au = op * &self.eigenvectors;
        let mut ul = self.eigenvectors.clone();
        for (j, mut col) in ul.column_iter_mut().enumerate() {
            col *= self.eigenvalues[j];
        }
        max_abs(&(au - ul)) / max_abs(op).max(f64::MIN_POSITIVE)
    }

    /// Reassembles `U diag(phi) U^T`.
    pub fn synthesize(&self, phi: &[f64]) -> DMatrix<f64> {
        assert_eq!(phi.len(), self.len());
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phi[j];
        }
        let mut k = scaled * self.eigenvectors.transpose();
        let kt = k.transpose();
        k += kt;
        k *= 0.5;
        k
    }

    /// Index of `(dim, cell)` in the basis index space.
    pub fn index_of(&self, dim: usize, cell: usize) -> Result<usize> {
        self.blocks
            .iter()
            .find(|b| b.dim == dim)
            .filter(|b| cell < b.len)
            .map(|b| b.offset + cell)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "cell ({dim}, {cell}) is not in the index space of this {} basis",
                    self.role
                ))
            })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = BasisDocument {
            role: self.role,
            size: self.len(),
            eigenvalues: self.eigenvalues.as_slice().to_vec(),
            eigenvectors_col_major: self.eigenvectors.as_slice().to_vec(),
            weights: self.weights.as_slice().to_vec(),
            blocks: self.blocks.clone(),
            complex_hash: self.complex_hash.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses a basis and rejects it unless `U^T W U = I` within 1e-8.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BasisDocument = serde_json::from_str(s)?;
        let n = doc.size;
        if doc.eigenvalues.len() != n
            || doc.weights.len() != n
            || doc.eigenvectors_col_major.len() != n * n
        {
            return Err(Error::Parse(format!("basis arrays do not match size {n}")));
        }
        let basis = SpectralBasis {
            role: doc.role,
            eigenvalues: DVector::from_vec(doc.eigenvalues),
            eigenvectors: DMatrix::from_vec(n, n, doc.eigenvectors_col_major),
            weights: DVector::from_vec(doc.weights),
            blocks: doc.blocks,
            complex_hash: doc.complex_hash,
        };
        let err = basis.orthonormality_error();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::Parse(format!(
                "stored basis is not weighted-orthonormal (error {err:.3e})"
            )));
        }
        Ok(basis)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisDocument {
    role: OperatorRole,
    size: usize,
    eigenvalues: Vec<f64>,
    eigenvectors_col_major: Vec<f64>,
    weights: Vec<f64>,
    blocks: Vec<Block>,
    complex_hash: Option<String>,
}
