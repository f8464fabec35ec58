//! Gaussian process regression on cochains.
//!
//! The prior mean is zero. Observations are `y_i = f(c_i) + eps_i` where `c_i`
//! is a single cell or an integer chain and `eps_i ~ N(0, noise)`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelHyper, KernelMatrix, MaternHyper, RdHyper};
use crate::operators::SpectralBasis;
use crate::par::{self, Execution};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Posterior variances down to this negative value are clamped to zero.
pub const VARIANCE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Cell { dim: usize, index: usize },
    /// Integer chain over the kernel's full index space.
    Chain(Vec<i64>),
}

impl Target {
    pub fn cell(dim: usize, index: usize) -> Self {
        Target::Cell { dim, index }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Target::Cell { dim, .. } => Some(*dim),
            Target::Chain(_) => None,
        }
    }

    /// Sparse coefficients of the target in basis index space.
    fn resolve(&self, basis: &SpectralBasis) -> Result<Vec<(usize, f64)>> {
        match self {
            Target::Cell { dim, index } => Ok(vec![(basis.index_of(*dim, *index)?, 1.0)]),
            Target::Chain(c) => {
                if c.len() != basis.len() {
                    return Err(Error::Argument(format!(
                        "chain target of length {} for a kernel of size {}",
                        c.len(),
                        basis.len()
                    )));
                }
                Ok(c.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(i, &v)| (i, v as f64))
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub target: Target,
    pub value: f64,
}

impl Observation {
    pub fn cell(dim: usize, index: usize, value: f64) -> Self {
        Self {
            target: Target::cell(dim, index),
            value,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub targets: Vec<Target>,
}

impl Posterior {
    pub fn variance(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().copied().collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().iter().map(|v| v.sqrt()).collect()
    }
}

fn resolve_all(basis: &SpectralBasis, targets: &[&Target]) -> Result<Vec<Vec<(usize, f64)>>> {
    targets.iter().map(|t| t.resolve(basis)).collect()
}

/// `A^T K B` for sparse target coefficient lists.
fn cross(k: &DMatrix<f64>, a: &[Vec<(usize, f64)>], b: &[Vec<(usize, f64)>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let mut s = 0.0;
        for &(p, ap) in &a[i] {
            for &(q, bq) in &b[j] {
                s += ap * bq * k[(p, q)];
            }
        }
        s
    })
}

fn check_noise(noise: f64) -> Result<()> {
    if noise.is_finite() && noise > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("noise variance must be positive, got {noise}")))
    }
}

fn check_values(obs: &[Observation]) -> Result<DVector<f64>> {
    if let Some(o) = obs.iter().find(|o| !o.value.is_finite()) {
        return Err(Error::Argument(format!("non-finite observation value {}", o.value)));
    }
    Ok(DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value)))
}

/// Cholesky factor of a symmetric positive definite matrix, retried once with
/// `1e-8 * mean(diag)` added to the diagonal.
pub fn factor(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance has non-finite entries".into()));
    }
    let n = a.nrows();
    let jitter = if n == 0 { 0.0 } else { 1e-8 * a.trace() / n as f64 };
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let mut b = a;
    for i in 0..n {
        b[(i, i)] += jitter;
    }
    log::debug!("cholesky failed, retrying with jitter {jitter:.3e}");
    Cholesky::new(b).ok_or_else(|| {
        Error::Numeric(format!("covariance is not positive definite even with jitter {jitter:.3e}"))
    })
}

fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn finish_covariance(mut cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
        let d = cov[(i, i)];
        if d < -VARIANCE_TOL {
            return Err(Error::Numeric(format!("posterior variance {d:.3e} at test target {i}")));
        }
        if d < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }
    Ok(cov)
}

/// Exact Gaussian conditional of the test targets given the observations.
pub fn posterior(k: &KernelMatrix, obs: &[Observation], noise: f64, test: &[Target]) -> Result<Posterior> {
    check_noise(noise)?;
    let y = check_values(obs)?;
    let basis = &k.basis;
    let of = resolve_all(basis, &obs.iter().map(|o| &o.target).collect::<Vec<_>>())?;
    let ts = resolve_all(basis, &test.iter().collect::<Vec<_>>())?;
    let kss = cross(&k.matrix, &ts, &ts);
    if obs.is_empty() {
        return Ok(Posterior {
            mean: DVector::zeros(test.len()),
            covariance: finish_covariance(kss)?,
            targets: test.to_vec(),
        });
    }
    let mut kff = cross(&k.matrix, &of, &of);
    for i in 0..kff.nrows() {
        kff[(i, i)] += noise;
    }
    let chol = factor(kff)?;
    let kfs = cross(&k.matrix, &of, &ts);
    let alpha = chol.solve(&y);
    let mean = kfs.transpose() * alpha;
    let v = chol
        .l()
        .solve_lower_triangular(&kfs)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let cov = kss - v.transpose() * v;
    Ok(Posterior {
        mean,
        covariance: finish_covariance(cov)?,
        targets: test.to_vec(),
    })
}

/// Full Gaussian negative log marginal likelihood, including `N/2 log 2 pi`.
pub fn nll(k: &KernelMatrix, obs: &[Observation], noise: f64) -> Result<f64> {
    check_noise(noise)?;
    let y = check_values(obs)?;
    if obs.is_empty() {
        return Ok(0.0);
    }
    let of = resolve_all(&k.basis, &obs.iter().map(|o| &o.target).collect::<Vec<_>>())?;
    let mut kff = cross(&k.matrix, &of, &of);
    for i in 0..kff.nrows() {
        kff[(i, i)] += noise;
    }
    let chol = factor(kff)?;
    let alpha = chol.solve(&y);
    Ok(0.5 * y.dot(&alpha) + 0.5 * log_det(&chol) + 0.5 * obs.len() as f64 * LN_2PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub nll: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimMetrics {
    /// `None` groups chain-valued targets.
    pub dim: Option<usize>,
    pub metrics: Metrics,
}

/// MSE of the posterior mean and summed univariate predictive NLL under
/// `N(mu_i, Sigma_ii + noise)`, grouped by cell dimension.
pub fn evaluate(post: &Posterior, truth: &[f64], noise: f64) -> Result<Vec<DimMetrics>> {
    if truth.len() != post.mean.len() {
        return Err(Error::Argument(format!(
            "{} truth values for {} predictions",
            truth.len(),
            post.mean.len()
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Argument(format!("noise variance must be nonnegative, got {noise}")));
    }
    let mut groups: std::collections::BTreeMap<Option<usize>, (f64, f64, usize)> = Default::default();
    for (i, t) in post.targets.iter().enumerate() {
        let err = truth[i] - post.mean[i];
        let s2 = post.covariance[(i, i)] + noise;
        if s2 <= 0.0 {
            return Err(Error::Numeric(format!("predictive variance {s2:.3e} at target {i}")));
        }
        let e = groups.entry(t.dim()).or_default();
        e.0 += err * err;
        e.1 += 0.5 * (LN_2PI + s2.ln()) + 0.5 * err * err / s2;
        e.2 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(dim, (se, nll, count))| DimMetrics {
            dim,
            metrics: Metrics {
                mse: se / count as f64,
                nll,
                count,
            },
        })
        .collect())
}

// ---------------------------------------------------------------------------
// spectral objective and fitting

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern,
    Rd,
}

impl KernelFamily {
    pub fn of(h: &KernelHyper) -> Result<Self> {
        match h {
            KernelHyper::Matern(_) => Ok(KernelFamily::Matern),
            KernelHyper::ReactionDiffusion(_) => Ok(KernelFamily::Rd),
            KernelHyper::Filter { .. } => Err(Error::Argument("custom filters cannot be fitted".into())),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Matern => "matern",
            KernelFamily::Rd => "rd",
        })
    }
}

/// Trainable log-parameters: Matérn `[ln sigma^2, ln l]`, reaction-diffusion
/// `[ln sigma^2, ln r, ln c, ln d]`. The order `nu` stays fixed.
pub fn log_params(h: &KernelHyper) -> Result<Vec<f64>> {
    let raw = match h {
        KernelHyper::Matern(m) => vec![m.amplitude, m.lengthscale],
        KernelHyper::ReactionDiffusion(r) => vec![r.amplitude, r.reaction, r.cross_diffusion, r.diffusion],
        KernelHyper::Filter { .. } => return Err(Error::Argument("custom filters cannot be fitted".into())),
    };
    if let Some(v) = raw.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Argument(format!("trainable hyperparameter {v} must be strictly positive")));
    }
    Ok(raw.iter().map(|v| v.ln()).collect())
}

/// Inverse of [`log_params`], keeping the fixed fields of `template`.
pub fn with_log_params(template: &KernelHyper, theta: &[f64]) -> Result<KernelHyper> {
    let e = |i: usize| theta[i].exp();
    match template {
        KernelHyper::Matern(m) if theta.len() == 2 => Ok(KernelHyper::Matern(MaternHyper {
            amplitude: e(0),
            lengthscale: e(1),
            ..*m
        })),
        KernelHyper::ReactionDiffusion(r) if theta.len() == 4 => Ok(KernelHyper::ReactionDiffusion(RdHyper {
            amplitude: e(0),
            reaction: e(1),
            cross_diffusion: e(2),
            diffusion: e(3),
            ..*r
        })),
        _ => Err(Error::Argument(format!(
            "{} log-parameters do not fit this kernel family",
            theta.len()
        ))),
    }
}

/// Scaled filter `psi = sigma^2 phi` and `d psi / d theta_j` for each log-parameter.
fn filter_with_grad(basis: &SpectralBasis, h: &KernelHyper) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let phi = h.filter(basis)?;
    let amp = h.amplitude();
    let psi: Vec<f64> = phi.iter().map(|p| amp * p).collect();
    let grads = match h {
        KernelHyper::Matern(m) => {
            let a = m.shift();
            let mu = kernels::laplacian_spectrum(basis)?;
            let dl = psi
                .iter()
                .zip(&mu)
                .map(|(p, mu)| 2.0 * m.nu * a * p / (a + mu))
                .collect();
            vec![psi.clone(), dl]
        }
        KernelHyper::ReactionDiffusion(r) => {
            let lam = basis.eigenvalues.as_slice();
            let per = |f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<f64> {
                psi.iter()
                    .zip(lam)
                    .map(|(&p, &l)| f(p, l, r.symbol(l)))
                    .collect()
            };
            vec![
                psi.clone(),
                per(&|p, _, g| -r.nu * p * r.reaction / g),
                per(&|p, l, g| r.nu * p * r.cross_diffusion * l / g),
                per(&|p, l, g| -r.nu * p * r.diffusion * l * l / g),
            ]
        }
        KernelHyper::Filter { .. } => return Err(Error::Argument("custom filters cannot be fitted".into())),
    };
    Ok((psi, grads))
}

/// Negative log-likelihood as a function of kernel hyperparameters on a
/// fixed spectral basis. The Gram matrix is `Z diag(psi) Z^T` with `Z` the
/// observation targets expressed in the eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralObjective {
    pub basis: Arc<SpectralBasis>,
    z: DMatrix<f64>,
    y: DVector<f64>,
}

/// Value and gradient of the objective in log-parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub nll: f64,
    pub gradient: Vec<f64>,
}

impl SpectralObjective {
    pub fn new(basis: Arc<SpectralBasis>, obs: &[Observation]) -> Result<Self> {
        let y = check_values(obs)?;
        if obs.is_empty() {
            return Err(Error::Argument("no observations to fit".into()));
        }
        let rows = resolve_all(&basis, &obs.iter().map(|o| &o.target).collect::<Vec<_>>())?;
        let u = &basis.eigenvectors;
        let m = basis.len();
        let mut z = DMatrix::zeros(obs.len(), m);
        for (r, coeffs) in rows.iter().enumerate() {
            for &(i, c) in coeffs {
                for j in 0..m {
                    z[(r, j)] += c * u[(i, j)];
                }
            }
        }
        Ok(Self { basis, z, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn gram(&self, psi: &[f64], noise: f64) -> DMatrix<f64> {
        let mut zs = self.z.clone();
        for (j, mut col) in zs.column_iter_mut().enumerate() {
            col *= psi[j].sqrt();
        }
        let mut k = &zs * zs.transpose();
        for i in 0..k.nrows() {
            k[(i, i)] += noise;
        }
        k
    }

    /// NLL at the given hyperparameters.
    pub fn nll(&self, h: &KernelHyper, noise: f64) -> Result<f64> {
        check_noise(noise)?;
        let phi = h.filter(&self.basis)?;
        let psi: Vec<f64> = phi.iter().map(|p| h.amplitude() * p).collect();
        let chol = factor(self.gram(&psi, noise))?;
        let alpha = chol.solve(&self.y);
        Ok(0.5 * self.y.dot(&alpha) + 0.5 * log_det(&chol) + 0.5 * self.len() as f64 * LN_2PI)
    }

    /// NLL and analytic gradient in `[log_params(h).., ln noise]` (noise last
    /// when `learn_noise`).
    pub fn evaluate(&self, h: &KernelHyper, noise: f64, learn_noise: bool) -> Result<Evaluation> {
        check_noise(noise)?;
        let (psi, dpsi) = filter_with_grad(&self.basis, h)?;
        let chol = factor(self.gram(&psi, noise))?;
        let alpha = chol.solve(&self.y);
        let nll = 0.5 * self.y.dot(&alpha) + 0.5 * log_det(&chol) + 0.5 * self.len() as f64 * LN_2PI;
        // G = K^-1 - alpha alpha^T;  dNLL = 1/2 tr(G dK)
        let mut g = chol.inverse();
        g.ger(-1.0, &alpha, &alpha, 1.0);
        let gz = &g * &self.z;
        let q: Vec<f64> = (0..self.z.ncols())
            .map(|j| self.z.column(j).dot(&gz.column(j)))
            .collect();
        let mut gradient: Vec<f64> = dpsi
            .iter()
            .map(|d| 0.5 * d.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        if learn_noise {
            gradient.push(0.5 * noise * g.trace());
        }
        Ok(Evaluation { nll, gradient })
    }

    /// Central finite-difference gradient in log-parameter space. Components
    /// are independent and run through [`par::map_indexed`].
    pub fn evaluate_fd(&self, h: &KernelHyper, noise: f64, learn_noise: bool, step: f64, exec: Execution) -> Result<Evaluation> {
        let nll = self.nll(h, noise)?;
        let mut theta = log_params(h)?;
        if learn_noise {
            theta.push(noise.ln());
        }
        let at = |t: &[f64]| -> Result<f64> {
            let (ht, nt) = if learn_noise {
                (with_log_params(h, &t[..t.len() - 1])?, t[t.len() - 1].exp())
            } else {
                (with_log_params(h, t)?, noise)
            };
            self.nll(&ht, nt)
        };
        let parts = par::map_indexed(theta.len(), exec, |j| {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += step;
            dn[j] -= step;
            Ok((at(&up)? - at(&dn)?) / (2.0 * step))
        });
        let gradient = parts.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(Evaluation { nll, gradient })
    }
}

/// NLL at each hyperparameter setting, evaluated in parallel.
pub fn nll_sweep(obj: &SpectralObjective, hypers: &[KernelHyper], noise: f64, exec: Execution) -> Vec<Result<f64>> {
    par::map_slice(hypers, exec, |h| obj.nll(h, noise))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
    /// Analytic, falling back to finite differences if it is not finite.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lr: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learn_noise: bool,
    pub gradient: GradientMode,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iterations: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learn_noise: false,
            gradient: GradientMode::Auto,
            fd_step: 1e-5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0 && self.fd_step > 0.0) {
            return Err(Error::Argument("epsilon and fd_step must be positive".into()));
        }
        Ok(())
    }
}

/// Serializable summary of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub family: KernelFamily,
    pub hyper: KernelHyper,
    pub noise: f64,
    pub seed: u64,
    pub iterations: usize,
    pub initial_nll: f64,
    /// NLL of the returned hyperparameters, the lowest seen along the path.
    pub final_nll: f64,
    /// Iterate at which `final_nll` was reached.
    pub best_iteration: usize,
    pub basis_hash: Option<String>,
}

/// Fitted model with a cached factorization of `K_ff + noise I`.
#[derive(Clone, Debug)]
pub struct GPFit {
    pub record: FitRecord,
    pub kernel: KernelMatrix,
    pub observations: Vec<Observation>,
    /// NLL at each iterate, starting from the initial point.
    pub trace: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GPFit {
    pub fn new(kernel: KernelMatrix, observations: Vec<Observation>, noise: f64, record: FitRecord) -> Result<Self> {
        check_noise(noise)?;
        let y = check_values(&observations)?;
        let rows = resolve_all(&kernel.basis, &observations.iter().map(|o| &o.target).collect::<Vec<_>>())?;
        let mut kff = cross(&kernel.matrix, &rows, &rows);
        for i in 0..kff.nrows() {
            kff[(i, i)] += noise;
        }
        let chol = factor(kff)?;
        let alpha = chol.solve(&y);
        Ok(Self {
            record,
            kernel,
            observations,
            trace: Vec::new(),
            rows,
            chol,
            alpha,
        })
    }

    pub fn noise(&self) -> f64 {
        self.record.noise
    }

    /// Posterior at `test` reusing the cached factorization.
    pub fn predict(&self, test: &[Target]) -> Result<Posterior> {
        let ts = resolve_all(&self.kernel.basis, &test.iter().collect::<Vec<_>>())?;
        let kss = cross(&self.kernel.matrix, &ts, &ts);
        let kfs = cross(&self.kernel.matrix, &self.rows, &ts);
        let mean = kfs.transpose() * &self.alpha;
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&kfs)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        Ok(Posterior {
            mean,
            covariance: finish_covariance(kss - v.transpose() * v)?,
            targets: test.to_vec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record)?)
    }
}

/// Writes `dimension,cell_id,mean,std` rows; chain targets get an empty dimension
/// and their position as id.
pub fn write_predictions(path: impl AsRef<Path>, post: &Posterior) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "dimension,cell_id,mean,std")?;
    for (i, (t, s)) in post.targets.iter().zip(post.std()).enumerate() {
        match t {
            Target::Cell { dim, index } => writeln!(out, "{dim},{index},{:e},{:e}", post.mean[i], s)?,
            Target::Chain(_) => writeln!(out, ",{i},{:e},{:e}", post.mean[i], s)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Fits the trainable hyperparameters of `init` by Adam on the log scale and
/// returns the iterate with the lowest NLL.
///
/// The basis is fixed; hyperparameters act only through the filter values.
pub fn fit(basis: Arc<SpectralBasis>, init: &KernelHyper, obs: &[Observation], noise: f64, cfg: &FitConfig) -> Result<GPFit> {
    cfg.validate()?;
    check_noise(noise)?;
    let family = KernelFamily::of(init)?;
    let objective = SpectralObjective::new(basis.clone(), obs)?;

    let mut theta = log_params(init)?;
    let n_kernel = theta.len();
    if cfg.learn_noise {
        theta.push(noise.ln());
    }
    let unpack = |t: &[f64]| -> Result<(KernelHyper, f64)> {
        let h = with_log_params(init, &t[..n_kernel])?;
        let s = if cfg.learn_noise { t[n_kernel].exp() } else { noise };
        Ok((h, s))
    };
    let grad_at = |t: &[f64]| -> Result<Evaluation> {
        let (h, s) = unpack(t)?;
        match cfg.gradient {
            GradientMode::FiniteDifference => objective.evaluate_fd(&h, s, cfg.learn_noise, cfg.fd_step, Execution::Sequential),
            GradientMode::Analytic => objective.evaluate(&h, s, cfg.learn_noise),
            GradientMode::Auto => {
                let e = objective.evaluate(&h, s, cfg.learn_noise)?;
                if e.gradient.iter().all(|g| g.is_finite()) {
                    Ok(e)
                } else {
                    log::warn!("analytic gradient not finite, using finite differences");
                    objective.evaluate_fd(&h, s, cfg.learn_noise, cfg.fd_step, Execution::Sequential)
                }
            }
        }
    };

    let natural = |t: &[f64]| t.iter().map(|v| v.exp()).collect::<Vec<_>>();
    let fail = |iteration: usize, message: String, last: &[f64]| Error::Optimization {
        iteration,
        message,
        last_finite: natural(last),
    };

    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut last_good = theta.clone();
    let mut best = (f64::INFINITY, theta.clone(), 0);
    for it in 0..cfg.iterations {
        let e = grad_at(&theta).map_err(|err| fail(it, err.to_string(), &last_good))?;
        if !e.nll.is_finite() || e.gradient.iter().any(|g| !g.is_finite()) {
            return Err(fail(it, format!("objective diverged (nll = {})", e.nll), &last_good));
        }
        trace.push(e.nll);
        if e.nll < best.0 {
            best = (e.nll, theta.clone(), it);
        }
        last_good.clone_from(&theta);
        let t = (it + 1) as i32;
        for j in 0..theta.len() {
            let g = e.gradient[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let mh = m[j] / (1.0 - cfg.beta1.powi(t));
            let vh = v[j] / (1.0 - cfg.beta2.powi(t));
            theta[j] -= cfg.lr * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
    // the last update has not been evaluated yet
    match unpack(&theta).and_then(|(h, s)| objective.nll(&h, s)) {
        Ok(v) if v.is_finite() => {
            trace.push(v);
            if v < best.0 {
                best = (v, theta.clone(), cfg.iterations);
            }
        }
        _ if cfg.iterations == 0 => {
            return Err(fail(0, "objective is not finite at the initial point".into(), &theta));
        }
        _ => log::warn!("objective not finite after the last update; keeping the best iterate"),
    }
    let initial_nll = trace[0];
    let (final_nll, best_theta, best_iteration) = best;
    let (hyper, noise) = unpack(&best_theta)?;
    let kernel = match &hyper {
        KernelHyper::Matern(h) => kernels::matern_kernel(basis.clone(), h)?,
        KernelHyper::ReactionDiffusion(h) => kernels::rd_kernel(basis.clone(), h)?,
        KernelHyper::Filter { .. } => unreachable!("family checked above"),
    };
    let record = FitRecord {
        family,
        hyper,
        noise,
        seed: cfg.seed,
        iterations: cfg.iterations,
        initial_nll,
        final_nll,
        best_iteration,
        basis_hash: basis.complex_hash.clone(),
    };
    let mut out = GPFit::new(kernel, obs.to_vec(), noise, record)?;
    out.trace = trace;
    Ok(out)
}
