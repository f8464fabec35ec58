//! Signal-mixing comparison of the super-Laplacian Matérn GP against the
//! reaction-diffusion GP on vertex, edge and triangle signals derived from a
//! common edge field.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::complex::{build_complex, CellularComplex, GridKind};
use crate::error::{Error, Result};
use crate::fields::{derive_vertex_triangle, kl_edge_field, make_dataset, Dataset};
use crate::gp::{evaluate, fit, FitConfig, FitRecord, KernelFamily, Posterior};
use crate::kernels::{KernelHyper, MaternHyper, RdHyper};
use crate::operators::{dirac_matrix, eigendecompose, hodge_laplacian, super_laplacian, SpectralBasis, WeightSet};
use crate::par::{self, Execution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub kind: GridKind,
    pub dims: Vec<usize>,
    /// Per-dimension cell weights; unit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

impl Default for ComplexSpec {
    fn default() -> Self {
        Self {
            kind: GridKind::TriangulatedGrid,
            dims: vec![9, 9],
            weights: None,
        }
    }
}

impl ComplexSpec {
    pub fn build(&self) -> Result<CellularComplex> {
        let mut x = build_complex(self.kind, &self.dims)?;
        if let Some(ws) = &self.weights {
            if ws.len() != x.dimension() + 1 {
                return Err(Error::Argument(format!(
                    "{} weight lists for a complex of dimension {}",
                    ws.len(),
                    x.dimension()
                )));
            }
            for (k, w) in ws.iter().enumerate() {
                x = x.with_weights(k, w.clone())?;
            }
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelInits {
    pub matern: MaternHyper,
    pub rd: RdHyper,
}

impl Default for KernelInits {
    fn default() -> Self {
        Self {
            matern: MaternHyper {
                nu: 2.0,
                lengthscale: 1.5,
                amplitude: 1.5,
            },
            rd: RdHyper {
                reaction: 1.5,
                cross_diffusion: 1.5,
                diffusion: 1.5,
                nu: 2.0,
                amplitude: 1.5,
                allow_non_even: false,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// First and last edge mode of the field, 1-based and inclusive.
    pub k_min: usize,
    pub k_max: usize,
    /// Observed fraction of vertices, edges and triangles.
    pub fractions: Vec<f64>,
    /// Noise variance.
    pub noise: f64,
    pub seeds: usize,
    pub base_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            k_min: 20,
            k_max: 100,
            fractions: vec![1.0 / 3.0; 3],
            noise: 1e-2,
            seeds: 20,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub complex: ComplexSpec,
    pub kernels: KernelInits,
    pub optimizer: FitConfig,
    pub data: DataConfig,
    /// Output directory; the CLI `--out` flag takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized configuration, output directory excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.data.seeds as u64).map(|i| self.data.base_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.kernels.matern.validate()?;
        self.kernels.rd.validate()?;
        self.optimizer.validate()?;
        if self.data.seeds == 0 {
            return Err(Error::Argument("at least one seed is required".into()));
        }
        if self.data.fractions.len() != 3 {
            return Err(Error::Argument("fractions must list vertices, edges and triangles".into()));
        }
        Ok(())
    }
}

/// Eigenbases shared by every seed.
pub struct Bases {
    pub complex: CellularComplex,
    pub edge: SpectralBasis,
    pub super_laplacian: Arc<SpectralBasis>,
    pub dirac: Arc<SpectralBasis>,
}

impl Bases {
    pub fn new(x: CellularComplex) -> Result<Self> {
        if x.dimension() < 2 {
            return Err(Error::Argument("the mixing experiment needs a 2-dimensional complex".into()));
        }
        let w = WeightSet::from_complex(&x);
        let hash = x.content_hash();
        let edge = eigendecompose(&hodge_laplacian(&x, 1, &w)?, &w)?.with_complex_hash(hash.clone());
        let sup = eigendecompose(&super_laplacian(&x, &w)?, &w)?.with_complex_hash(hash.clone());
        let dirac = eigendecompose(&dirac_matrix(&x, &w)?, &w)?.with_complex_hash(hash);
        Ok(Self {
            complex: x,
            edge,
            super_laplacian: Arc::new(sup),
            dirac: Arc::new(dirac),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimScore {
    pub dim: usize,
    pub mse: f64,
    pub nll: f64,
}

#[derive(Clone, Debug)]
pub struct ModelOutcome {
    pub family: KernelFamily,
    pub fit: FitRecord,
    pub posterior: Posterior,
    pub scores: Vec<DimScore>,
}

#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dataset: Dataset,
    pub truth: Vec<f64>,
    pub models: Vec<ModelOutcome>,
}

/// Dataset seeds are kept apart from field seeds.
fn data_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_da7a_0000_0000
}

/// Generates data for one seed, fits both models and scores them on the
/// held-out cells.
pub fn run_seed(cfg: &RunConfig, bases: &Bases, seed: u64) -> Result<SeedOutcome> {
    let x = &bases.complex;
    let f = kl_edge_field(&bases.edge, cfg.data.k_min, cfg.data.k_max, seed)?;
    let (v, t) = derive_vertex_triangle(&f, x)?;
    let t = t.expect("dimension checked when building bases");
    let dataset = make_dataset(&[v, f, t], &cfg.data.fractions, cfg.data.noise, data_seed(seed))?;
    let obs = dataset.observations();
    let (test, truth) = dataset.test_set();
    let fit_cfg = FitConfig {
        seed,
        ..cfg.optimizer.clone()
    };

    let runs = [
        (KernelHyper::Matern(cfg.kernels.matern), bases.super_laplacian.clone()),
        (KernelHyper::ReactionDiffusion(cfg.kernels.rd), bases.dirac.clone()),
    ];
    let mut models = Vec::with_capacity(2);
    for (init, basis) in runs {
        let family = KernelFamily::of(&init)?;
        let fitted = fit(basis, &init, &obs, cfg.data.noise, &fit_cfg)?;
        let posterior = fitted.predict(&test)?;
        let scores = evaluate(&posterior, &truth, fitted.noise())?
            .into_iter()
            .map(|d| DimScore {
                dim: d.dim.expect("cell targets"),
                mse: d.metrics.mse,
                nll: d.metrics.nll,
            })
            .collect();
        log::info!(
            "seed {seed} {family}: nll {:.3} -> {:.3}",
            fitted.record.initial_nll,
            fitted.record.final_nll
        );
        models.push(ModelOutcome {
            family,
            fit: fitted.record,
            posterior,
            scores,
        });
    }
    Ok(SeedOutcome {
        seed,
        dataset,
        truth,
        models,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: KernelFamily,
    pub dim: usize,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub nll_mean: f64,
    pub nll_se: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

pub struct Report {
    pub config_hash: String,
    pub outcomes: Vec<SeedOutcome>,
    pub failures: Vec<SeedFailure>,
    pub summary: Vec<SummaryRow>,
}

impl Report {
    pub fn row(&self, model: KernelFamily, dim: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.model == model && r.dim == dim)
    }
}

/// Mean and standard error of the mean (sample standard deviation over sqrt n).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(outcomes: &[SeedOutcome]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for family in [KernelFamily::Matern, KernelFamily::Rd] {
        for dim in 0..3 {
            let scores: Vec<&DimScore> = outcomes
                .iter()
                .flat_map(|o| o.models.iter().filter(|m| m.family == family))
                .flat_map(|m| m.scores.iter().filter(|s| s.dim == dim))
                .collect();
            if scores.is_empty() {
                continue;
            }
            let (mse_mean, mse_se) = mean_se(&scores.iter().map(|s| s.mse).collect::<Vec<_>>());
            let (nll_mean, nll_se) = mean_se(&scores.iter().map(|s| s.nll).collect::<Vec<_>>());
            rows.push(SummaryRow {
                model: family,
                dim,
                mse_mean,
                mse_se,
                nll_mean,
                nll_se,
                seeds: scores.len(),
            });
        }
    }
    rows
}

/// Runs every seed; seeds are independent and run through [`par::map_slice`].
/// A failing seed is recorded and the run continues; the run fails only if
/// every seed does.
pub fn run(cfg: &RunConfig, exec: Execution) -> Result<Report> {
    cfg.validate()?;
    let bases = Bases::new(cfg.complex.build()?)?;
    let seeds = cfg.seeds();
    let results = par::map_slice(&seeds, exec, |&s| run_seed(cfg, &bases, s));
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure {
                    seed: *seed,
                    error: e.to_string(),
                });
                last_err = Some(e);
            }
        }
    }
    if outcomes.is_empty() {
        return Err(last_err.expect("at least one seed"));
    }
    Ok(Report {
        config_hash: cfg.hash(),
        summary: summarize(&outcomes),
        outcomes,
        failures,
    })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    config: RunConfig,
}

const MANIFEST: &str = "run.json";

/// Refuses to reuse a directory written under a different configuration
/// unless `force` is set.
pub fn prepare_output(dir: &Path, cfg: &RunConfig, force: bool) -> Result<()> {
    let manifest = dir.join(MANIFEST);
    if manifest.exists() && !force {
        let old: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest)?)?;
        if old.config_hash != cfg.hash() {
            return Err(Error::Argument(format!(
                "{} holds results of a different configuration ({}); use --force to overwrite",
                dir.display(),
                old.config_hash
            )));
        }
    }
    std::fs::create_dir_all(dir)?;
    let m = Manifest {
        config_hash: cfg.hash(),
        config: cfg.clone(),
    };
    std::fs::write(manifest, serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

/// Writes `metrics.csv`, `metrics.json` and per-seed datasets, fit records and
/// prediction tables under `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("metrics.csv"))?);
    writeln!(out, "model,dim,mse_mean,mse_se,nll_mean,nll_se")?;
    for r in &report.summary {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e}",
            r.model, r.dim, r.mse_mean, r.mse_se, r.nll_mean, r.nll_se
        )?;
    }
    out.flush()?;

    let per_seed: Vec<serde_json::Value> = report
        .outcomes
        .iter()
        .map(|o| {
            serde_json::json!({
                "seed": o.seed,
                "models": o.models.iter().map(|m| serde_json::json!({
                    "model": m.family,
                    "scores": m.scores,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "config_hash": report.config_hash,
        "summary": report.summary,
        "seeds": per_seed,
        "failures": report.failures,
    });
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&doc)?)?;

    for o in &report.outcomes {
        let sd = dir.join(format!("seed_{:03}", o.seed));
        std::fs::create_dir_all(&sd)?;
        o.dataset.write_csv(sd.join("dataset.csv"))?;
        for m in &o.models {
            let mut rec = serde_json::to_value(&m.fit)?;
            rec["config_hash"] = serde_json::Value::String(report.config_hash.clone());
            std::fs::write(sd.join(format!("fit_{}.json", m.family)), serde_json::to_string_pretty(&rec)?)?;
            write_predictions(&sd.join(format!("predictions_{}.csv", m.family)), &m.posterior, &o.truth)?;
        }
    }
    Ok(())
}

/// Plot-ready per-cell table: `dimension,cell_id,mean,std,truth,error`.
fn write_predictions(path: &Path, post: &Posterior, truth: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "dimension,cell_id,mean,std,truth,error")?;
    for (i, (t, s)) in post.targets.iter().zip(post.std()).enumerate() {
        if let crate::gp::Target::Cell { dim, index } = t {
            let m = post.mean[i];
            writeln!(out, "{dim},{index},{m:e},{s:e},{:e},{:e}", truth[i], m - truth[i])?;
        }
    }
    out.flush()?;
    Ok(())
}
