//! `tomoqa`: generate phantoms, project them, reconstruct, and run
//! experiment configurations.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tomoqa::baselines::{discretize, fbp_reconstruct, pinv_reconstruct, sart_reconstruct, SartOptions};
use tomoqa::forward::{angle_set, build_system_matrix, project, Sinogram};
use tomoqa::harness::{emit_report, run_experiment, BudgetSpec, ExperimentConfig, Method};
use tomoqa::image::{load_pgm, save_pgm, Image};
use tomoqa::noise::apply_noise;
use tomoqa::phantom::{generate_phantom, synthetic_digit, PhantomKind};
use tomoqa::samplers::{hybrid_cqm_solve, qa_reconstruct, Budget, HybridOptions, QaOptions, DEFAULT_TIME_LIMIT};

#[derive(Parser)]
#[command(name = "tomoqa", version, about = "Tomographic reconstruction as QUBO optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a phantom as an ASCII PGM.
    Gen {
        /// shepp_logan, foam, tree, snowflake, molecule or digit
        #[arg(long)]
        phantom: String,
        #[arg(long)]
        size: usize,
        /// Selects and jitters the glyph for `digit`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a PGM image into a sinogram CSV.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        views: usize,
        /// Add seeded per-view pixel noise before projecting.
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a sinogram CSV into a PGM image.
    Recon(ReconArgs),
    /// Run an experiment configuration and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    views: usize,
    /// Annealing reads for `qa`.
    #[arg(long, default_value_t = 100)]
    reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// Seconds for `hybrid`.
    #[arg(long, conflicts_with = "iters")]
    time_limit: Option<f64>,
    /// Outer iterations for `hybrid`.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bit depth of the reconstructed image.
    #[arg(long, default_value_t = 1)]
    bits: u32,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Flags override the matching keys of the configuration file.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, conflicts_with = "time_limit")]
    iters: Option<usize>,
    #[arg(long)]
    time_limit: Option<f64>,
}

/// A problem with the configuration rather than with a run.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Some experiment rows failed; the report was still written.
#[derive(Debug)]
struct RowsFailed(usize);

impl std::fmt::Display for RowsFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} row(s) failed; see errors.csv", self.0)
    }
}

impl std::error::Error for RowsFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("TOMOQA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("TOMOQA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Gen {
            phantom,
            size,
            seed,
            out,
        } => {
            let img = if phantom == "digit" {
                if size != 8 {
                    bail!(ConfigError("digit phantoms are 8x8".into()));
                }
                synthetic_digit((seed % 10) as usize, seed)?
            } else {
                let kind: PhantomKind = phantom.parse().map_err(|e: tomoqa::Error| ConfigError(e.to_string()))?;
                generate_phantom(kind, size)?
            };
            save_pgm(&img, &out)?;
        }
        Command::Project {
            input,
            views,
            noise_seed,
            out,
        } => {
            let img = load_pgm(&input)?;
            let m = build_system_matrix(img.side(), &angle_set(views)?)?;
            let sino = match noise_seed {
                Some(s) => apply_noise(&img, &m, s)?,
                None => project(&m, &img.to_vector())?,
            };
            sino.save_csv(&out)?;
        }
        Command::Recon(args) => recon(&args)?,
        Command::Experiment(args) => experiment(&args)?,
    }
    Ok(())
}

fn recon(a: &ReconArgs) -> anyhow::Result<()> {
    let sino = Sinogram::load_csv(&a.input)?;
    if sino.views != a.views {
        bail!(ConfigError(format!(
            "--views {} but {} has {} views",
            a.views,
            a.input.display(),
            sino.views
        )));
    }
    let n = sino.bins;
    let angles = angle_set(a.views)?;
    let m = build_system_matrix(n, &angles)?;
    let x: Vec<u32> = match a.method {
        Method::Qa => {
            let opts = QaOptions {
                reads: a.reads,
                sweeps: a.sweeps,
                seed: a.seed,
                ..QaOptions::default()
            };
            let (x, set) = qa_reconstruct(&m, &sino.values, a.bits, &opts)?;
            log::info!("qa: best energy {:?} in {:?}", set.lowest_energy(), set.wall_time);
            x
        }
        Method::Hybrid => {
            let budget = match (a.iters, a.time_limit) {
                (Some(k), _) => Budget::Iterations(k),
                (None, Some(s)) if s.is_finite() && s > 0.0 => Budget::TimeLimit(Duration::from_secs_f64(s)),
                (None, Some(s)) => bail!(ConfigError(format!("--time-limit must be positive, got {s}"))),
                (None, None) => Budget::TimeLimit(DEFAULT_TIME_LIMIT),
            };
            let opts = HybridOptions {
                budget,
                sweeps: a.sweeps,
                seed: a.seed,
                ..HybridOptions::default()
            };
            let out = hybrid_cqm_solve(&m, &sino.values, a.bits, &opts)?;
            log::info!("hybrid: energy {:e} after {} iterations", out.energy, out.iterations);
            out.x
        }
        Method::Fbp => discretize(&fbp_reconstruct(&sino, &angles, n)?, a.bits)?.pixels().to_vec(),
        Method::Sart => discretize(&sart_reconstruct(&m, &sino.values, SartOptions::default())?, a.bits)?
            .pixels()
            .to_vec(),
        Method::Pinv => discretize(&pinv_reconstruct(&m, &sino.values)?, a.bits)?.pixels().to_vec(),
    };
    save_pgm(&Image::new(n, a.bits, x)?, &a.out)?;
    Ok(())
}

fn load_config(a: &ExperimentArgs) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let config_err = |e: tomoqa::Error| ConfigError(e.to_string());
    let mut cfg = ExperimentConfig::load(&a.config).map_err(config_err)?;
    if let Some(v) = &a.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = &a.sizes {
        cfg.sizes = v.clone();
    }
    if let Some(v) = &a.views {
        cfg.views = Some(v.clone());
    }
    if let Some(v) = &a.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = a.bits {
        cfg.bits = Some(v);
    }
    if let Some(v) = a.reads {
        cfg.reads = v;
    }
    if let Some(v) = a.sweeps {
        cfg.sweeps = v;
    }
    if let Some(v) = a.iters {
        cfg.budget = BudgetSpec::Iterations(v);
    }
    if let Some(v) = a.time_limit {
        cfg.budget = BudgetSpec::TimeLimit(v);
    }
    cfg.validate().map_err(config_err)?;
    let out = match (&a.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => bail!(ConfigError("no output directory: pass --out or set output_dir".into())),
    };
    Ok((cfg, out))
}

fn experiment(a: &ExperimentArgs) -> anyhow::Result<()> {
    let (cfg, out) = load_config(a)?;
    if !cfg.is_reproducible() {
        log::warn!("hybrid runs use a time limit; results depend on machine speed");
    }
    let table = run_experiment(&cfg).map_err(|e| ConfigError(e.to_string()))?;
    let files = emit_report(&table, &out).with_context(|| format!("writing report to {}", out.display()))?;
    for f in &files {
        println!("{}", f.display());
    }
    if !table.failures.is_empty() {
        bail!(RowsFailed(table.failures.len()));
    }
    Ok(())
}
