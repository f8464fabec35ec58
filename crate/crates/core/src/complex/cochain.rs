use serde::{Deserialize, Serialize};

use super::CellularComplex;
use crate::error::{Error, Result};

/// Integer chain on the `dim`-cells of a complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainVec {
    pub dim: usize,
    pub coeffs: Vec<i64>,
}

impl ChainVec {
    pub fn new(x: &CellularComplex, dim: usize, coeffs: Vec<i64>) -> Result<Self> {
        check_len(x, dim, coeffs.len())?;
        Ok(Self { dim, coeffs })
    }

    /// The elementary chain `e_i`.
    pub fn unit(x: &CellularComplex, dim: usize, i: usize) -> Result<Self> {
        let n = x.count(dim);
        if i >= n {
            return Err(Error::Argument(format!("cell {i} out of range for dimension {dim}")));
        }
        let mut coeffs = vec![0; n];
        coeffs[i] = 1;
        Ok(Self { dim, coeffs })
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|&c| c as f64).collect()
    }
}

/// Real cochain on the `dim`-cells of a complex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CochainVec {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl CochainVec {
    pub fn new(x: &CellularComplex, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_len(x, dim, values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("cochain value {v} is not finite")));
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(x: &CellularComplex, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; x.count(dim)],
        }
    }
}

fn check_len(x: &CellularComplex, dim: usize, len: usize) -> Result<()> {
    if dim > x.dimension() {
        return Err(Error::Argument(format!(
            "dimension {dim} exceeds complex dimension {}",
            x.dimension()
        )));
    }
    if len != x.count(dim) {
        return Err(Error::Argument(format!(
            "length {len} does not match N_{dim} = {}",
            x.count(dim)
        )));
    }
    Ok(())
}

/// `f(c) = f^T c`.
pub fn evaluate_cochain(f: &CochainVec, c: &ChainVec) -> Result<f64> {
    if f.dim != c.dim || f.values.len() != c.coeffs.len() {
        return Err(Error::Argument(format!(
            "cochain of dimension {} (len {}) cannot evaluate chain of dimension {} (len {})",
            f.dim,
            f.values.len(),
            c.dim,
            c.coeffs.len()
        )));
    }
    Ok(f.values
        .iter()
        .zip(&c.coeffs)
        .map(|(v, &k)| v * k as f64)
        .sum())
}

/// One cochain per dimension `0..=n`, concatenated in dimension order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectSumCochain {
    pub blocks: Vec<CochainVec>,
}

impl DirectSumCochain {
    pub fn new(x: &CellularComplex, blocks: Vec<CochainVec>) -> Result<Self> {
        if blocks.len() != x.dimension() + 1 {
            return Err(Error::Argument(format!(
                "{} blocks for a complex of dimension {}",
                blocks.len(),
                x.dimension()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.dim != k {
                return Err(Error::Argument(format!("block {k} has dimension {}", b.dim)));
            }
            check_len(x, k, b.values.len())?;
        }
        Ok(Self { blocks })
    }

    pub fn from_concat(x: &CellularComplex, values: &[f64]) -> Result<Self> {
        if values.len() != x.total_cells() {
            return Err(Error::Argument(format!(
                "direct-sum length {} does not match {} cells",
                values.len(),
                x.total_cells()
            )));
        }
        let offsets = x.offsets();
        let blocks = (0..=x.dimension())
            .map(|k| CochainVec {
                dim: k,
                values: values[offsets[k]..offsets[k] + x.count(k)].to_vec(),
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn concat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
