//! Sparse signed incidence matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Signed incidence matrix `B_k` of shape `N_{k-1} x N_k` in triplet form.
///
/// Triplets are kept sorted by `(col, row)` with no duplicates and no zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, i8)>,
}

impl Incidence {
    /// Builds from raw triplets, summing duplicates and dropping zeros.
    ///
    /// Fails if an accumulated entry leaves {-1, 0, +1} or an index is out of range.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        let mut raw: Vec<(usize, usize, i64)> = triplets.into_iter().collect();
        for &(r, c, _) in &raw {
            if r >= rows || c >= cols {
                return Err(Error::Construction(format!(
                    "incidence entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        raw.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(usize, usize, i64)> = Vec::with_capacity(raw.len());
        for (r, c, v) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut out = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            if v == 0 {
                continue;
            }
            if v.abs() != 1 {
                return Err(Error::Construction(format!(
                    "incidence entry ({r}, {c}) = {v} is not +-1; complex is not regular"
                )));
            }
            out.push((r, c, v as i8));
        }
        Ok(Self {
            rows,
            cols,
            triplets: out,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn triplets(&self) -> &[(usize, usize, i8)] {
        &self.triplets
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.triplets
            .binary_search_by_key(&(col, row), |&(r, c, _)| (c, r))
            .map(|i| self.triplets[i].2)
            .unwrap_or(0)
    }

    /// Nonzero entries of column `col` as `(row, sign)`.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let start = self.triplets.partition_point(|&(_, c, _)| c < col);
        self.triplets[start..]
            .iter()
            .take_while(move |&&(_, c, _)| c == col)
            .map(|&(r, _, v)| (r, v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] = f64::from(v);
        }
        m
    }

    pub fn to_dense_i64(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.cols]; self.rows];
        for &(r, c, v) in &self.triplets {
            m[r][c] = i64::from(v);
        }
        m
    }

    /// `B x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for &(r, c, v) in &self.triplets {
            y[r] += f64::from(v) * x[c];
        }
        y
    }

    /// `B^T x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for &(r, c, v) in &self.triplets {
            y[c] += f64::from(v) * x[r];
        }
        y
    }

    /// Exact integer product `self * rhs` as triplets (zeros dropped).
    pub fn mul_exact(&self, rhs: &Incidence) -> Result<Vec<(usize, usize, i64)>> {
        if self.cols != rhs.rows {
            return Err(Error::Argument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Vec::new();
        let mut acc = vec![0i64; self.rows];
        let mut touched = Vec::new();
        for j in 0..rhs.cols {
            for (mid, s) in rhs.column(j) {
                for (i, t) in self.column(mid) {
                    if acc[i] == 0 {
                        touched.push(i);
                    }
                    acc[i] += i64::from(s) * i64::from(t);
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                if acc[i] != 0 {
                    out.push((i, j, acc[i]));
                }
                acc[i] = 0;
            }
            touched.clear();
        }
        Ok(out)
    }

    /// Entry-wise `P_rows^T B P_cols` for permutations given as `new -> old` maps.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Incidence {
        let row_inv = invert(row_perm);
        let col_inv = invert(col_perm);
        let trip = self
            .triplets
            .iter()
            .map(|&(r, c, v)| (row_inv[r], col_inv[c], i64::from(v)));
        Incidence::from_triplets(self.rows, self.cols, trip)
            .expect("permutation preserves a valid incidence matrix")
    }
}

pub(crate) fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
