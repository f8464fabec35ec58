//! JSON serialization of complexes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellularComplex, Geometry};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexDocument {
    dimension: usize,
    cells: Vec<Vec<Geometry>>,
    weights: Vec<Vec<f64>>,
    /// `incidence[k-1]` lists `[row, col, sign]` of `B_k`.
    incidence: Vec<Vec<[i64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 2]>>,
}

impl CellularComplex {
    pub fn to_json(&self) -> Result<String> {
        let doc = ComplexDocument {
            dimension: self.dimension(),
            cells: self.geometry(),
            weights: self.all_weights().to_vec(),
            incidence: self
                .incidence
                .iter()
                .map(|b| {
                    b.triplets()
                        .iter()
                        .map(|&(r, c, s)| [r as i64, c as i64, i64::from(s)])
                        .collect()
                })
                .collect(),
            positions: self.positions.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses a complex document, reassembles incidence from the cell
    /// geometry and requires it to match the stored triplets exactly.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ComplexDocument = serde_json::from_str(s)?;
        if doc.cells.len() != doc.dimension + 1 {
            return Err(Error::Parse(format!(
                "dimension {} but {} cell lists",
                doc.dimension,
                doc.cells.len()
            )));
        }
        if doc.weights.len() != doc.cells.len() {
            return Err(Error::Parse(format!(
                "{} weight lists for {} dimensions",
                doc.weights.len(),
                doc.cells.len()
            )));
        }
        let x = CellularComplex::from_parts(doc.cells, doc.weights, doc.positions)?;
        if x.dimension() != doc.dimension || doc.incidence.len() != doc.dimension {
            return Err(Error::Parse("incidence list count does not match dimension".into()));
        }
        for (k, stored) in doc.incidence.iter().enumerate() {
            let ours: Vec<[i64; 3]> = x.incidence[k]
                .triplets()
                .iter()
                .map(|&(r, c, s)| [r as i64, c as i64, i64::from(s)])
                .collect();
            let mut theirs = stored.clone();
            theirs.sort_unstable_by_key(|t| (t[1], t[0]));
            if ours != theirs {
                return Err(Error::Parse(format!(
                    "stored B_{} disagrees with the boundary of the stored cells",
                    k + 1
                )));
            }
        }
        Ok(x)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
