//! Spectral kernels over a [`SpectralBasis`].
//!
//! Every kernel has the form `K = sigma^2 U diag(phi) U^T` where `phi` is a
//! filter of the basis eigenvalues:
//!
//! - Matérn: `phi_i = (2 nu / l^2 + mu_i)^(-nu)` with `mu_i` the Laplacian
//!   eigenvalues (squares of the Dirac eigenvalues for a Dirac basis).
//! - Reaction-diffusion: `phi_i = (r - c lambda_i + d lambda_i^2)^(-nu)` over
//!   the signed Dirac eigenvalues `lambda_i`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complex::ChainVec;
use crate::error::{Error, Result};
use crate::operators::{OperatorRole, SpectralBasis};
use crate::par::{self, Execution};

/// Laplacian eigenvalues within this distance below zero are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternHyper {
    pub nu: f64,
    pub lengthscale: f64,
    pub amplitude: f64,
}

impl MaternHyper {
    pub fn new(nu: f64, lengthscale: f64, amplitude: f64) -> Result<Self> {
        let h = Self {
            nu,
            lengthscale,
            amplitude,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nu", self.nu),
            ("lengthscale", self.lengthscale),
            ("amplitude", self.amplitude),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("Matérn {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `2 nu / l^2`
    pub fn shift(&self) -> f64 {
        2.0 * self.nu / (self.lengthscale * self.lengthscale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdHyper {
    pub reaction: f64,
    pub cross_diffusion: f64,
    pub diffusion: f64,
    pub nu: f64,
    pub amplitude: f64,
    /// Permit a non-even order once every filtered value is checked positive.
    #[serde(default)]
    pub allow_non_even: bool,
}

impl RdHyper {
    pub fn new(reaction: f64, cross_diffusion: f64, diffusion: f64, nu: f64, amplitude: f64) -> Result<Self> {
        let h = Self {
            reaction,
            cross_diffusion,
            diffusion,
            nu,
            amplitude,
            allow_non_even: false,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("reaction", self.reaction),
            ("cross_diffusion", self.cross_diffusion),
            ("diffusion", self.diffusion),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!("{name} coefficient must be nonnegative, got {v}")));
            }
        }
        for (name, v) in [("nu", self.nu), ("amplitude", self.amplitude)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.allow_non_even && !is_even_integer(self.nu) {
            return Err(Error::Argument(format!(
                "reaction-diffusion order nu = {} must be an even integer unless allow_non_even is set",
                self.nu
            )));
        }
        Ok(())
    }

    /// `r - c lambda + d lambda^2`
    pub fn symbol(&self, lambda: f64) -> f64 {
        self.reaction - self.cross_diffusion * lambda + self.diffusion * lambda * lambda
    }
}

pub fn is_even_integer(x: f64) -> bool {
    x.fract() == 0.0 && (x as i64) % 2 == 0 && x > 0.0
}

/// `base^(-nu)`, exact integer power when `nu` is integral.
pub(crate) fn neg_power(base: f64, nu: f64) -> f64 {
    if nu.fract() == 0.0 && nu.abs() < 64.0 {
        base.powi(-(nu as i32))
    } else {
        base.powf(-nu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelHyper {
    Matern(MaternHyper),
    ReactionDiffusion(RdHyper),
    Filter { amplitude: f64 },
}

impl KernelHyper {
    pub fn amplitude(&self) -> f64 {
        match self {
            KernelHyper::Matern(h) => h.amplitude,
            KernelHyper::ReactionDiffusion(h) => h.amplitude,
            KernelHyper::Filter { amplitude } => *amplitude,
        }
    }

    /// Unscaled filter values over `basis` (amplitude not applied).
    pub fn filter(&self, basis: &SpectralBasis) -> Result<Vec<f64>> {
        match self {
            KernelHyper::Matern(h) => matern_filter(basis, h),
            KernelHyper::ReactionDiffusion(h) => rd_filter(basis, h),
            KernelHyper::Filter { .. } => Err(Error::Argument(
                "a custom filter kernel has no closed-form filter".into(),
            )),
        }
    }
}

/// Laplacian eigenvalues of a basis: Dirac eigenvalues are squared, Laplacian
/// ones are clamped at zero within [`CLAMP_TOL`].
pub fn laplacian_spectrum(basis: &SpectralBasis) -> Result<Vec<f64>> {
    match basis.role {
        OperatorRole::Dirac => Ok(basis.eigenvalues.iter().map(|l| l * l).collect()),
        r if r.is_laplacian() => basis
            .eigenvalues
            .iter()
            .map(|&l| {
                if l >= 0.0 {
                    Ok(l)
                } else if l >= -CLAMP_TOL {
                    Ok(0.0)
                } else {
                    Err(Error::Argument(format!(
                        "Laplacian eigenvalue {l:.3e} is negative beyond tolerance"
                    )))
                }
            })
            .collect(),
        r => Err(Error::Argument(format!("no Laplacian spectrum for a {r} basis"))),
    }
}

pub fn matern_filter(basis: &SpectralBasis, h: &MaternHyper) -> Result<Vec<f64>> {
    h.validate()?;
    let shift = h.shift();
    Ok(laplacian_spectrum(basis)?
        .into_iter()
        .map(|mu| neg_power(shift + mu, h.nu))
        .collect())
}

pub fn rd_filter(basis: &SpectralBasis, h: &RdHyper) -> Result<Vec<f64>> {
    h.validate()?;
    if basis.role != OperatorRole::Dirac {
        return Err(Error::Argument(format!(
            "reaction-diffusion kernel needs a Dirac basis, got {}",
            basis.role
        )));
    }
    let even = is_even_integer(h.nu);
    basis
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let g = h.symbol(lambda);
            let scale = h.reaction + h.cross_diffusion * lambda.abs() + h.diffusion * lambda * lambda + 1.0;
            if g.abs() < 1e-12 * scale {
                return Err(Error::Degenerate(format!(
                    "r - c*lambda + d*lambda^2 vanishes at eigenvalue {i} (lambda = {lambda:.6})"
                )));
            }
            if !even && g <= 0.0 {
                return Err(Error::Indefinite(format!(
                    "filter base {g:.3e} at eigenvalue {i} is not positive for non-even order {}",
                    h.nu
                )));
            }
            Ok(neg_power(g, h.nu))
        })
        .collect()
}

/// Dense covariance `sigma^2 U diag(phi) U^T` with its provenance.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub matrix: DMatrix<f64>,
    pub hyper: KernelHyper,
    /// Unscaled filter values, one per basis eigenpair.
    pub filter: DVector<f64>,
    pub basis: Arc<SpectralBasis>,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn amplitude(&self) -> f64 {
        self.hyper.amplitude()
    }

    /// Lifts a chain on `c.dim`-cells into the kernel's index space.
    pub fn embed_chain(&self, c: &ChainVec) -> Result<Vec<i64>> {
        let block = self
            .basis
            .blocks
            .iter()
            .find(|b| b.dim == c.dim)
            .ok_or_else(|| Error::Argument(format!("kernel has no dimension-{} block", c.dim)))?;
        if block.len != c.coeffs.len() {
            return Err(Error::Argument(format!(
                "chain length {} does not match block length {}",
                c.coeffs.len(),
                block.len
            )));
        }
        let mut out = vec![0; self.size()];
        out[block.offset..block.offset + block.len].copy_from_slice(&c.coeffs);
        Ok(out)
    }

    /// `max |K - K^T|`
    pub fn asymmetry(&self) -> f64 {
        let n = self.size();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                e = e.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        e
    }

    /// Writes the matrix as CSV, one row per line, no header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|j| format!("{:e}", self.matrix[(i, j)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON sidecar describing how the matrix was built.
    pub fn sidecar(&self) -> KernelSidecar {
        KernelSidecar {
            hyper: self.hyper.clone(),
            basis_role: self.basis.role.to_string(),
            basis_hash: self.basis.complex_hash.clone(),
            size: self.size(),
            filter: self.filter.as_slice().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub hyper: KernelHyper,
    pub basis_role: String,
    pub basis_hash: Option<String>,
    pub size: usize,
    pub filter: Vec<f64>,
}

/// `sigma^2 U diag(phi) U^T` for an arbitrary positive filter.
pub fn spectral_filter_kernel(basis: Arc<SpectralBasis>, phi: Vec<f64>, amplitude: f64) -> Result<KernelMatrix> {
    build(basis, phi, KernelHyper::Filter { amplitude })
}

fn build(basis: Arc<SpectralBasis>, phi: Vec<f64>, hyper: KernelHyper) -> Result<KernelMatrix> {
    if phi.len() != basis.len() {
        return Err(Error::Argument(format!(
            "{} filter values for {} eigenpairs",
            phi.len(),
            basis.len()
        )));
    }
    let amplitude = hyper.amplitude();
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::Argument(format!("amplitude must be positive, got {amplitude}")));
    }
    if let Some((i, v)) = phi.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Indefinite(format!("filter value {v} at eigenpair {i} is not positive")));
    }
    let scaled: Vec<f64> = phi.iter().map(|p| amplitude * p).collect();
    let matrix = basis.synthesize(&scaled);
    Ok(KernelMatrix {
        matrix,
        hyper,
        filter: DVector::from_vec(phi),
        basis,
    })
}

/// Matérn kernel over a Hodge, super-Laplacian or Dirac basis.
pub fn matern_kernel(basis: Arc<SpectralBasis>, h: &MaternHyper) -> Result<KernelMatrix> {
    let phi = matern_filter(&basis, h)?;
    build(basis, phi, KernelHyper::Matern(*h))
}

/// Reaction-diffusion kernel over a Dirac basis.
pub fn rd_kernel(basis: Arc<SpectralBasis>, h: &RdHyper) -> Result<KernelMatrix> {
    let phi = rd_filter(&basis, h)?;
    build(basis, phi, KernelHyper::ReactionDiffusion(*h))
}

/// `kappa(c, d) = c^T K d` for chains in the kernel's index space.
pub fn chain_covariance(k: &KernelMatrix, c: &[i64], d: &[i64]) -> Result<f64> {
    let n = k.size();
    if c.len() != n || d.len() != n {
        return Err(Error::Argument(format!(
            "chains of length {} and {} against a kernel of size {n}",
            c.len(),
            d.len()
        )));
    }
    let mut total = 0.0;
    for (i, &ci) in c.iter().enumerate().filter(|(_, &ci)| ci != 0) {
        let row: f64 = d
            .iter()
            .enumerate()
            .filter(|(_, &dj)| dj != 0)
            .map(|(j, &dj)| k.matrix[(i, j)] * dj as f64)
            .sum();
        total += ci as f64 * row;
    }
    Ok(total)
}

/// Draws `count` prior samples `U diag(sqrt(sigma^2 phi)) eps`, eps standard normal.
///
/// Sample `i` uses stream `i` of a ChaCha generator seeded with `seed`, so the
/// output does not depend on the execution mode.
pub fn sample_prior(k: &KernelMatrix, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    sample_prior_with(k, count, seed, Execution::default())
}

pub fn sample_prior_with(k: &KernelMatrix, count: usize, seed: u64, exec: Execution) -> Result<Vec<DVector<f64>>> {
    if let Some(v) = k.filter.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Indefinite(format!("cannot sample: filter value {v}")));
    }
    let sd: Vec<f64> = k.filter.iter().map(|p| (k.amplitude() * p).sqrt()).collect();
    let u = &k.basis.eigenvectors;
    Ok(par::map_indexed(count, exec, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let eps = DVector::from_iterator(
            sd.len(),
            sd.iter().map(|s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            }),
        );
        u * eps
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{path, relabel, triangulated_grid, ComplexBuilder, Relabeling};
    use crate::operators::{
        dirac_matrix, eigendecompose, hodge_laplacian, super_laplacian, WeightSet,
    };
    use rand::Rng;

    fn basis_of(op: crate::operators::OperatorMatrix, w: &WeightSet) -> Arc<SpectralBasis> {
        Arc::new(eigendecompose(&op, w).unwrap())
    }

    fn dense_power_inverse_check(k: &DMatrix<f64>, op: &DMatrix<f64>, nu: u32) -> f64 {
        let mut p = DMatrix::identity(op.nrows(), op.ncols());
        for _ in 0..nu {
            p = &p * op;
        }
        crate::operators::max_abs(&(k * p - DMatrix::identity(op.nrows(), op.ncols())))
    }

    #[test]
    fn isolated_vertex_matern() {
        let mut b = ComplexBuilder::new();
        b.add_vertices(1);
        let x = b.build().unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(hodge_laplacian(&x, 0, &w).unwrap(), &w);
        let k = matern_kernel(basis, &MaternHyper::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((k.matrix[(0, 0)] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn matern_inverts_shifted_laplacian_power() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let lap = hodge_laplacian(&x, 0, &w).unwrap();
        let k = matern_kernel(basis_of(lap.clone(), &w), &MaternHyper::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let op = DMatrix::identity(3, 3) * 4.0 + &lap.matrix;
        assert!(dense_power_inverse_check(&k.matrix, &op, 2) <= 1e-8);
    }

    #[test]
    fn graph_matern_matches_dense_solve() {
        let x = triangulated_grid(3, 3).unwrap();
        let w = WeightSet::unit(&x);
        let lap = hodge_laplacian(&x, 0, &w).unwrap();
        for nu in [1.0, 2.0, 3.0] {
            let h = MaternHyper::new(nu, 0.7, 1.3).unwrap();
            let k = matern_kernel(basis_of(lap.clone(), &w), &h).unwrap();
            let n = x.count(0);
            let op = DMatrix::identity(n, n) * h.shift() + &lap.matrix;
            let mut p = DMatrix::identity(n, n);
            for _ in 0..nu as usize {
                p = &p * &op;
            }
            let expect = p.try_inverse().unwrap() * h.amplitude;
            assert!(crate::operators::max_abs(&(&k.matrix - expect)) <= 1e-10);
        }
    }

    #[test]
    fn rd_recovers_matern_on_super_laplacian() {
        let x = triangulated_grid(2, 2).unwrap();
        let w = WeightSet::unit(&x);
        let dirac = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let sup = basis_of(super_laplacian(&x, &w).unwrap(), &w);
        let (nu, l) = (2.0, 0.8);
        let m = matern_kernel(sup, &MaternHyper::new(nu, l, 1.7).unwrap()).unwrap();
        let r = rd_kernel(dirac, &RdHyper::new(2.0 * nu / (l * l), 0.0, 1.0, nu, 1.7).unwrap()).unwrap();
        assert!(crate::operators::max_abs(&(&m.matrix - &r.matrix)) <= 1e-10);
    }

    #[test]
    fn rd_dirac_mass_form() {
        let x = triangulated_grid(2, 2).unwrap();
        let w = WeightSet::unit(&x);
        let d = dirac_matrix(&x, &w).unwrap();
        let basis = basis_of(d.clone(), &w);
        let radius = basis.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let m = radius + 0.5;
        // (m - lambda)^2 = m^2 - 2m lambda + lambda^2, so K = (m - D)^(-4)
        let k = rd_kernel(basis, &RdHyper::new(m * m, 2.0 * m, 1.0, 2.0, 1.0).unwrap()).unwrap();
        let n = d.nrows();
        let op = DMatrix::identity(n, n) * m - &d.matrix;
        assert!(dense_power_inverse_check(&k.matrix, &op, 4) <= 1e-8);
    }

    #[test]
    fn rd_order_one_precision() {
        let x = path(5).unwrap();
        let w = WeightSet::unit(&x);
        let d = dirac_matrix(&x, &w).unwrap();
        let l = super_laplacian(&x, &w).unwrap();
        let mut h = RdHyper::new(3.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        h.nu = 1.0;
        h.allow_non_even = true;
        let k = rd_kernel(basis_of(d.clone(), &w), &h).unwrap();
        let n = d.nrows();
        let prec = DMatrix::identity(n, n) * 3.0 - &d.matrix + &l.matrix;
        let inv = k.matrix.clone().try_inverse().unwrap();
        assert!(crate::operators::max_abs(&(inv - prec)) <= 1e-8);
    }

    #[test]
    fn odd_order_requires_flag_and_positive_filter() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        assert!(RdHyper::new(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let mut h = RdHyper::new(0.1, 3.0, 0.1, 2.0, 1.0).unwrap();
        h.nu = 1.0;
        h.allow_non_even = true;
        assert!(matches!(rd_kernel(basis.clone(), &h), Err(Error::Indefinite(_))));
    }

    #[test]
    fn degenerate_rd_rejected() {
        // path(2): Dirac eigenvalues are -sqrt(2), 0, sqrt(2)... r = 0 hits lambda = 0
        let x = path(2).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let h = RdHyper::new(0.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(matches!(rd_kernel(basis.clone(), &h), Err(Error::Degenerate(_))));
        // r - c*l + d*l^2 = 0 at l = sqrt(2) for r = 2, c = 2 sqrt(2), d = 1
        let s2 = 2f64.sqrt();
        let h = RdHyper::new(2.0, 2.0 * s2, 1.0, 2.0, 1.0).unwrap();
        assert!(matches!(rd_kernel(basis, &h), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rd_needs_dirac_basis() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(super_laplacian(&x, &w).unwrap(), &w);
        assert!(rd_kernel(basis, &RdHyper::new(1.0, 1.0, 1.0, 2.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(MaternHyper::new(0.0, 1.0, 1.0).is_err());
        assert!(MaternHyper::new(1.0, -1.0, 1.0).is_err());
        assert!(MaternHyper::new(1.0, 1.0, f64::NAN).is_err());
        assert!(RdHyper::new(-1.0, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(RdHyper::new(1.0, 1.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn filter_primitive() {
        let x = triangulated_grid(1, 2).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(super_laplacian(&x, &w).unwrap(), &w);
        let n = basis.len();
        let k = spectral_filter_kernel(basis.clone(), vec![1.0; n], 1.0).unwrap();
        assert!(crate::operators::max_abs(&(&k.matrix - DMatrix::identity(n, n))) <= 1e-12);

        let h = MaternHyper::new(2.0, 1.2, 0.9).unwrap();
        let m = matern_kernel(basis.clone(), &h).unwrap();
        let phi = matern_filter(&basis, &h).unwrap();
        let f = spectral_filter_kernel(basis.clone(), phi, 0.9).unwrap();
        assert_eq!(m.matrix, f.matrix);

        let mut bad = vec![1.0; n];
        bad[3] = 0.0;
        assert!(matches!(spectral_filter_kernel(basis.clone(), bad, 1.0), Err(Error::Indefinite(_))));
        assert!(spectral_filter_kernel(basis, vec![1.0; n - 1], 1.0).is_err());
    }

    #[test]
    fn rd_through_filter_primitive() {
        let x = path(4).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let h = RdHyper::new(1.5, 0.7, 1.1, 2.0, 2.0).unwrap();
        let phi: Vec<f64> = basis.eigenvalues.iter().map(|&l| h.symbol(l).powi(-2)).collect();
        let f = spectral_filter_kernel(basis.clone(), phi, 2.0).unwrap();
        let r = rd_kernel(basis, &h).unwrap();
        assert!(crate::operators::max_abs(&(&f.matrix - &r.matrix)) <= 1e-14);
    }

    #[test]
    fn chain_covariance_properties() {
        let x = triangulated_grid(2, 2).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let k = rd_kernel(basis, &RdHyper::new(1.5, 1.5, 1.5, 2.0, 1.5).unwrap()).unwrap();
        let n = k.size();
        let unit = |i: usize| {
            let mut v = vec![0i64; n];
            v[i] = 1;
            v
        };
        assert_eq!(chain_covariance(&k, &unit(4), &unit(4)).unwrap(), k.matrix[(4, 4)]);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rand_chain = || (0..n).map(|_| rng.gen_range(-2..=2)).collect::<Vec<i64>>();
        for _ in 0..10 {
            let (c, c2, d) = (rand_chain(), rand_chain(), rand_chain());
            let sum: Vec<i64> = c.iter().zip(&c2).map(|(a, b)| a + b).collect();
            let lhs = chain_covariance(&k, &sum, &d).unwrap();
            let rhs = chain_covariance(&k, &c, &d).unwrap() + chain_covariance(&k, &c2, &d).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            assert!((chain_covariance(&k, &c, &d).unwrap() - chain_covariance(&k, &d, &c).unwrap()).abs() <= 1e-12);
        }
        // PSD quadratic form over random chain sets
        for _ in 0..10 {
            let chains: Vec<Vec<i64>> = (0..6).map(|_| rand_chain()).collect();
            let s: f64 = chains
                .iter()
                .flat_map(|a| chains.iter().map(move |b| (a, b)))
                .map(|(a, b)| chain_covariance(&k, a, b).unwrap())
                .sum();
            assert!(s >= -1e-10);
        }
        assert!(chain_covariance(&k, &[1, 0], &unit(0)).is_err());

        let e = ChainVec::unit(&x, 1, 2).unwrap();
        let lifted = k.embed_chain(&e).unwrap();
        assert_eq!(lifted[x.count(0) + 2], 1);
    }

    #[test]
    fn sampling_is_deterministic_and_mode_independent() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let k = rd_kernel(basis, &RdHyper::new(2.0, 1.0, 1.0, 2.0, 1.0).unwrap()).unwrap();
        let a = sample_prior_with(&k, 50, 42, Execution::Sequential).unwrap();
        let b = sample_prior_with(&k, 50, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, sample_prior(&k, 50, 42).unwrap());
        assert_ne!(a, sample_prior(&k, 50, 43).unwrap());
    }

    #[test]
    fn empirical_covariance_converges() {
        // 5 cells: path(3)
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let k = rd_kernel(basis, &RdHyper::new(2.0, 1.0, 1.0, 2.0, 1.0).unwrap()).unwrap();
        let samples = sample_prior(&k, 50_000, 7).unwrap();
        let n = k.size();
        let mut cov = DMatrix::zeros(n, n);
        for s in &samples {
            cov += s * s.transpose();
        }
        cov /= samples.len() as f64;
        let rel = (&cov - &k.matrix).norm() / k.matrix.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn tiny_amplitude_samples_vanish() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = basis_of(hodge_laplacian(&x, 0, &w).unwrap(), &w);
        let k = matern_kernel(basis, &MaternHyper::new(2.0, 1.0, 1e-20).unwrap()).unwrap();
        for s in sample_prior(&k, 10, 1).unwrap() {
            assert!(s.amax() < 1e-8);
        }
    }

    #[test]
    fn matern_blocks_do_not_mix_but_rd_does() {
        let x = triangulated_grid(2, 2).unwrap();
        let w = WeightSet::unit(&x);
        let sup = basis_of(super_laplacian(&x, &w).unwrap(), &w);
        let dir = basis_of(dirac_matrix(&x, &w).unwrap(), &w);
        let m = matern_kernel(sup, &MaternHyper::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let r = rd_kernel(dir, &RdHyper::new(1.5, 1.0, 1.5, 2.0, 1.0).unwrap()).unwrap();
        let off = x.offsets();
        let (n0, n1) = (x.count(0), x.count(1));
        let m_cross = m.matrix.view((0, off[1]), (n0, n1));
        assert!(m_cross.iter().all(|&v| v == 0.0));
        let r_cross = r.matrix.view((0, off[1]), (n0, n1));
        assert!(r_cross.amax() > 1e-6);
    }

    #[test]
    fn relabeling_equivariance() {
        let x = triangulated_grid(2, 2).unwrap();
        let w = WeightSet::unit(&x);
        let h = RdHyper::new(1.5, 1.2, 0.8, 2.0, 1.1).unwrap();
        let k = rd_kernel(basis_of(dirac_matrix(&x, &w).unwrap(), &w), &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let rho = Relabeling::random(&x, &mut rng);
            let y = relabel(&x, &rho).unwrap();
            let wy = WeightSet::unit(&y);
            let ky = rd_kernel(basis_of(dirac_matrix(&y, &wy).unwrap(), &wy), &h).unwrap();
            let expect = rho.transform_direct_matrix(&k.matrix);
            assert!(crate::operators::max_abs(&(&ky.matrix - expect)) <= 1e-10);
        }
    }

    #[test]
    fn weighted_form_reduces_to_unit_form() {
        let x = triangulated_grid(2, 1).unwrap();
        let unit = WeightSet::unit(&x);
        let explicit_unit = WeightSet::new(&x, x.counts().iter().map(|&n| vec![1.0; n]).collect()).unwrap();
        let h = MaternHyper::new(2.0, 1.0, 1.0).unwrap();
        let a = matern_kernel(basis_of(super_laplacian(&x, &unit).unwrap(), &unit), &h).unwrap();
        let b = matern_kernel(basis_of(super_laplacian(&x, &explicit_unit).unwrap(), &explicit_unit), &h).unwrap();
        assert!(crate::operators::max_abs(&(&a.matrix - &b.matrix)) <= 1e-12);

        // with general weights K = U phi U^T and U^T W U = I, so K W is the filter of the operator
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = WeightSet::new(&x, x.counts().iter().map(|&n| (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).collect()).unwrap();
        let lap = super_laplacian(&x, &w).unwrap();
        let k = matern_kernel(basis_of(lap.clone(), &w), &h).unwrap();
        let n = lap.nrows();
        let op = DMatrix::identity(n, n) * h.shift() + &lap.matrix;
        let wd = DMatrix::from_diagonal(&DVector::from_vec(w.concat()));
        // K W (shift + L)^2 = I
        let resid = &k.matrix * &wd * &op * &op - DMatrix::<f64>::identity(n, n);
        assert!(crate::operators::max_abs(&resid) <= 1e-8);
        assert!(k.asymmetry() <= 1e-12);
    }

    #[test]
    fn sidecar_and_csv_export() {
        let x = path(3).unwrap();
        let w = WeightSet::unit(&x);
        let basis = eigendecompose(&hodge_laplacian(&x, 0, &w).unwrap(), &w)
            .unwrap()
            .with_complex_hash(x.content_hash());
        let k = matern_kernel(Arc::new(basis), &MaternHyper::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        k.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        let first: f64 = text.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, k.matrix[(0, 0)]);
        let s = k.sidecar();
        assert_eq!(s.basis_hash.as_deref(), Some(x.content_hash().as_str()));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"family\":\"matern\""));
    }
}
