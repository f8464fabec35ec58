use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use cellgp::complex::{build_complex, CellularComplex, Geometry, GridKind};
use cellgp::experiment::{self, RunConfig};
use cellgp::fields::{project_field, FieldKind, GridField};
use cellgp::kernels::{matern_kernel, rd_kernel, MaternHyper, RdHyper};
use cellgp::operators::{dirac_matrix, eigendecompose, hodge_laplacian, super_laplacian, OperatorRole, SpectralBasis, WeightSet};
use cellgp::par::Execution;
use cellgp::{Error, Result};

#[derive(Parser)]
#[command(name = "cellgp", version, about = "Gaussian processes on cellular complexes")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grid complex and write it as JSON.
    Build {
        /// Run configuration whose `complex` section is used.
        #[arg(long, conflicts_with_all = ["kind", "dims"])]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Grid rows and columns, or vertex count for a path.
        #[arg(long, num_args = 1..=2)]
        dims: Vec<usize>,
        #[arg(long, default_value = "complex.json")]
        out: PathBuf,
    },
    /// Eigendecompose an operator of a stored complex.
    Eigen {
        #[arg(long)]
        complex: PathBuf,
        /// hodge:K, super or dirac
        #[arg(long)]
        operator: String,
        #[arg(long, default_value = "basis.json")]
        out: PathBuf,
    },
    /// Export a kernel matrix as CSV with a JSON sidecar.
    Kernel {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 2.0)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        lengthscale: f64,
        #[arg(long, default_value_t = 1.0)]
        reaction: f64,
        #[arg(long, default_value_t = 1.0)]
        cross_diffusion: f64,
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        #[arg(long, default_value = "kernel.csv")]
        out: PathBuf,
    },
    /// Run the Matérn versus reaction-diffusion comparison.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// First seed; the run uses `data.seeds` consecutive seeds from here.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite results written under a different configuration.
        #[arg(long)]
        force: bool,
        /// Run seeds one after another instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Project a node-sampled grid field onto a stored complex.
    Project {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, value_enum)]
        kind: FieldArg,
        #[arg(long, default_value = "cochain.csv")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Path,
    Triangulated,
    Cubical,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Matern,
    Rd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Scalar,
    Vector,
    Pseudoscalar,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Build { config, kind, dims, out } => {
            let x = match (config, kind) {
                (Some(path), _) => RunConfig::load(path)?.complex.build()?,
                (None, Some(k)) => {
                    let kind = match k {
                        KindArg::Path => GridKind::Path,
                        KindArg::Triangulated => GridKind::TriangulatedGrid,
                        KindArg::Cubical => GridKind::CubicalGrid,
                    };
                    build_complex(kind, &dims)?
                }
                (None, None) => return Err(Error::Argument("give --config or --kind with --dims".into())),
            };
            x.verify_boundary_squared()?;
            x.save(&out)?;
            println!("{}", summary(&x));
            println!("boundary of boundary: zero");
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Eigen { complex, operator, out } => {
            let x = CellularComplex::load(&complex)?;
            let role: OperatorRole = operator.parse()?;
            let w = WeightSet::from_complex(&x);
            let op = match role {
                OperatorRole::Hodge(k) => hodge_laplacian(&x, k, &w)?,
                OperatorRole::SuperLaplacian => super_laplacian(&x, &w)?,
                OperatorRole::Dirac => dirac_matrix(&x, &w)?,
                other => return Err(Error::Argument(format!("{other} is not self-adjoint; use hodge:K, super or dirac"))),
            };
            let basis = eigendecompose(&op, &w)?.with_complex_hash(x.content_hash());
            basis.save(&out)?;
            let vals: Vec<String> = basis.eigenvalues.iter().map(|&v| format_value(v)).collect();
            println!("eigenvalues: {}", vals.join(", "));
            println!("orthonormality error: {:.3e}", basis.orthonormality_error());
            println!("residual: {:.3e}", basis.residual(&op.matrix));
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Kernel {
            basis,
            family,
            nu,
            amplitude,
            lengthscale,
            reaction,
            cross_diffusion,
            diffusion,
            out,
        } => {
            let b = Arc::new(SpectralBasis::load(&basis)?);
            let k = match family {
                FamilyArg::Matern => matern_kernel(b, &MaternHyper::new(nu, lengthscale, amplitude)?)?,
                FamilyArg::Rd => rd_kernel(b, &RdHyper::new(reaction, cross_diffusion, diffusion, nu, amplitude)?)?,
            };
            k.write_csv(&out)?;
            let side = out.with_extension("json");
            std::fs::write(&side, serde_json::to_string_pretty(&k.sidecar())?)?;
            println!("wrote {} and {}", out.display(), side.display());
            Ok(())
        }
        Command::Experiment {
            config,
            seed,
            out,
            force,
            sequential,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.data.base_seed = s;
            }
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            cfg.validate()?;
            experiment::prepare_output(&dir, &cfg, force)?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let report = experiment::run(&cfg, exec)?;
            experiment::write_report(&dir, &report)?;
            print_table(&report);
            for f in &report.failures {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Project { field, complex, kind, out } => {
            let kind = match kind {
                FieldArg::Scalar => FieldKind::Scalar,
                FieldArg::Vector => FieldKind::Vector2,
                FieldArg::Pseudoscalar => FieldKind::Pseudoscalar,
            };
            let x = CellularComplex::load(&complex)?;
            let f = GridField::read_csv(&field, kind)?;
            let c = project_field(&f, &x)?;
            write_cochain(&out, c.dim, &c.values)?;
            println!("projected {} {}-cells to {}", c.values.len(), c.dim, out.display());
            Ok(())
        }
    }
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn summary(x: &CellularComplex) -> String {
    let mut parts = vec![plural(x.count(0), "vertex", "vertices")];
    if x.dimension() >= 1 {
        parts.push(plural(x.count(1), "edge", "edges"));
    }
    if x.dimension() >= 2 {
        let all_triangles = x
            .cells(2)
            .iter()
            .all(|c| matches!(&c.geometry, Geometry::Simplex { vertices } if vertices.len() == 3));
        parts.push(if all_triangles {
            plural(x.count(2), "triangle", "triangles")
        } else {
            plural(x.count(2), "face", "faces")
        });
    }
    for k in 3..=x.dimension() {
        parts.push(format!("{} {k}-cells", x.count(k)));
    }
    parts.join(", ")
}

/// Rounds to nine decimals and prints the shortest exact form.
fn format_value(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn print_table(report: &experiment::Report) {
    println!("{:<8} {:>4} {:>20} {:>22}", "model", "dim", "mse", "nll");
    for r in &report.summary {
        println!(
            "{:<8} {:>4} {:>11.4} ± {:<6.4} {:>12.3} ± {:<7.3}",
            r.model.to_string(),
            r.dim,
            r.mse_mean,
            r.mse_se,
            r.nll_mean,
            r.nll_se
        );
    }
}

fn write_cochain(path: &Path, dim: usize, values: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# positive values run along the cell orientation, negative against it")?;
    writeln!(out, "dim,cell_id,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{dim},{i},{v:e}")?;
    }
    out.flush()?;
    Ok(())
}
