use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{discretize, fbp_reconstruct_with, pinv_reconstruct, sart_reconstruct, SartOptions};
use crate::error::{Error, Result};
use crate::forward::{angle_set, build_system_matrix_with, Sinogram, SystemMatrix};
use crate::harness::config::{ExperimentConfig, ExperimentKind, Method, PhantomSpec};
use crate::image::{load_digits_csv, max_value, Image};
use crate::metrics::{rmse, ssim, stability_ratio};
use crate::noise::apply_noise_with;
use crate::par::{map_slice, Execution};
use crate::phantom::{generate_phantom, synthetic_digit};
use crate::samplers::{hybrid_cqm_solve, qa_reconstruct, HybridOptions, QaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Noisy,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::Noisy => "noisy",
        }
    }
}

/// One completed reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub phantom: PhantomSpec,
    pub size: usize,
    pub views: usize,
    pub method: Method,
    pub condition: Condition,
    pub seed: u64,
    pub rmse: f64,
    pub ssim: f64,
    /// `||M x_hat - y||_2` against the measurements the method was given.
    pub residual: f64,
    /// Seconds. Kept out of `results.csv` so that file is reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub experiment: ExperimentKind,
    pub phantom: PhantomSpec,
    pub size: usize,
    pub views: usize,
    pub method: Method,
    pub condition: Condition,
    pub seed: u64,
    pub reason: String,
}

/// Stability ratio between clean and noisy reconstructions of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub phantom: PhantomSpec,
    pub size: usize,
    pub views: usize,
    pub method: Method,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<RowFailure>,
    pub stability: Vec<StabilityRow>,
}

#[derive(Debug, Clone, Copy)]
struct Case {
    phantom: PhantomSpec,
    size: usize,
    views: usize,
    seed: u64,
    condition: Condition,
}

struct Job {
    case: Case,
    method: Method,
}

struct Prepared {
    gt: Image,
    bits: u32,
    angles: Vec<f64>,
    y: Vec<f64>,
}

struct Outcome {
    row: ResultRow,
    x: Vec<u32>,
    y: Vec<f64>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with(cfg, Execution::default())
}

/// Run every (phantom, size, views, seed, condition, method) combination.
///
/// Rows run in parallel under `exec`; their order in the table is the nested
/// loop order of the configuration lists. A failing row is logged and
/// recorded in `failures` without stopping the others.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<ResultTable> {
    cfg.validate()?;
    let conditions: &[Condition] = match cfg.kind {
        ExperimentKind::NoiseEval => &[Condition::Clean, Condition::Noisy],
        _ => &[Condition::Clean],
    };

    let mut matrices: BTreeMap<(usize, usize), Result<SystemMatrix>> = BTreeMap::new();
    let mut cases = Vec::new();
    for &phantom in &cfg.phantoms {
        for &size in &cfg.sizes {
            for views in cfg.views_for(size) {
                matrices
                    .entry((size, views))
                    .or_insert_with(|| angle_set(views).and_then(|a| build_system_matrix_with(size, &a, exec)));
                for &seed in &cfg.seeds {
                    for &condition in conditions {
                        cases.push(Case {
                            phantom,
                            size,
                            views,
                            seed,
                            condition,
                        });
                    }
                }
            }
        }
    }

    let prepared: Vec<Result<Prepared>> = map_slice(exec, &cases, |case| {
        let m = matrices[&(case.size, case.views)].as_ref().map_err(|e| Error::Config(e.to_string()))?;
        prepare(cfg, case, m)
    });
    let jobs: Vec<(usize, Job)> = cases
        .iter()
        .enumerate()
        .flat_map(|(i, &case)| cfg.methods.iter().map(move |&method| (i, Job { case, method })))
        .collect();

    let results: Vec<Result<Outcome>> = map_slice(exec, &jobs, |(i, job)| {
        let prep = prepared[*i].as_ref().map_err(|e| Error::InvalidValue(e.to_string()))?;
        let m = matrices[&(job.case.size, job.case.views)].as_ref().expect("checked while preparing");
        reconstruct(cfg, job, prep, m, exec)
    });

    let mut table = ResultTable::default();
    let mut kept: BTreeMap<(usize, Method, Condition), (Vec<u32>, Vec<f64>)> = BTreeMap::new();
    for ((i, job), result) in jobs.iter().zip(results) {
        let c = job.case;
        match result {
            Ok(out) => {
                if cfg.kind == ExperimentKind::NoiseEval {
                    let clean = case_key(&cases, *i);
                    kept.insert((clean, job.method, c.condition), (out.x, out.y));
                }
                table.rows.push(out.row);
            }
            Err(e) => {
                log::error!(
                    "{} {} N={} V={} {} {} seed {}: {e}",
                    cfg.kind,
                    c.phantom,
                    c.size,
                    c.views,
                    job.method,
                    c.condition.name(),
                    c.seed
                );
                table.failures.push(RowFailure {
                    experiment: cfg.kind,
                    phantom: c.phantom,
                    size: c.size,
                    views: c.views,
                    method: job.method,
                    condition: c.condition,
                    seed: c.seed,
                    reason: e.to_string(),
                });
            }
        }
    }

    for ((i, method, condition), (x1, y1)) in &kept {
        if *condition != Condition::Clean {
            continue;
        }
        let Some((x2, y2)) = kept.get(&(*i, *method, Condition::Noisy)) else {
            continue;
        };
        let c = cases[*i];
        let f = |v: &[u32]| v.iter().map(|&p| p as f64).collect::<Vec<_>>();
        match stability_ratio(&f(x1), &f(x2), y1, y2) {
            Ok(ratio) => {
                log::info!("stability {} {} seed {}: {ratio:.6}", c.phantom, method, c.seed);
                table.stability.push(StabilityRow {
                    phantom: c.phantom,
                    size: c.size,
                    views: c.views,
                    method: *method,
                    seed: c.seed,
                    ratio,
                });
            }
            Err(e) => log::warn!("stability {} {} seed {}: {e}", c.phantom, method, c.seed),
        }
    }
    Ok(table)
}

/// Index of the clean case that shares everything but the condition.
fn case_key(cases: &[Case], i: usize) -> usize {
    match cases[i].condition {
        Condition::Clean => i,
        Condition::Noisy => i - 1,
    }
}

fn ground_truth(cfg: &ExperimentConfig, case: &Case) -> Result<Image> {
    match case.phantom.kind() {
        Some(kind) => generate_phantom(kind, case.size),
        None => match &cfg.digits_csv {
            Some(path) => load_digits_csv(path, case.seed as usize),
            None => synthetic_digit((case.seed % 10) as usize, case.seed),
        },
    }
}

fn prepare(cfg: &ExperimentConfig, case: &Case, m: &SystemMatrix) -> Result<Prepared> {
    let gt = ground_truth(cfg, case)?;
    let bits = cfg.bits.unwrap_or(case.phantom.bit_depth());
    let top = max_value(bits);
    if gt.pixels().iter().any(|&p| p > top) {
        return Err(Error::InvalidValue(format!(
            "{} has values above {top}, the {bits}-bit maximum",
            case.phantom
        )));
    }
    let y = match case.condition {
        Condition::Clean => m.project(&gt.to_vector())?,
        Condition::Noisy => apply_noise_with(&gt, m, case.seed, Execution::Sequential)?.values,
    };
    Ok(Prepared {
        gt,
        bits,
        angles: angle_set(case.views)?,
        y,
    })
}

fn reconstruct(cfg: &ExperimentConfig, job: &Job, prep: &Prepared, m: &SystemMatrix, exec: Execution) -> Result<Outcome> {
    let c = job.case;
    let start = Instant::now();
    let x: Vec<u32> = match job.method {
        Method::Qa => {
            let opts = QaOptions {
                reads: cfg.reads,
                sweeps: cfg.sweeps,
                seed: c.seed,
                exec,
                ..QaOptions::default()
            };
            qa_reconstruct(m, &prep.y, prep.bits, &opts)?.0
        }
        Method::Hybrid => {
            let opts = HybridOptions {
                budget: cfg.budget.to_budget()?,
                subproblem_size: cfg.subproblem_size,
                sweeps: cfg.sweeps,
                seed: c.seed,
                exec,
                ..HybridOptions::default()
            };
            hybrid_cqm_solve(m, &prep.y, prep.bits, &opts)?.x
        }
        Method::Fbp => {
            let sino = Sinogram::new(c.views, c.size, prep.y.clone())?;
            let img = fbp_reconstruct_with(&sino, &prep.angles, c.size, exec)?;
            discretize(&img, prep.bits)?.pixels().to_vec()
        }
        Method::Sart => discretize(&sart_reconstruct(m, &prep.y, SartOptions::default())?, prep.bits)?
            .pixels()
            .to_vec(),
        Method::Pinv => discretize(&pinv_reconstruct(m, &prep.y)?, prep.bits)?.pixels().to_vec(),
    };
    let wall_time = start.elapsed().as_secs_f64();
    let img = Image::new(c.size, prep.bits, x.clone())?;
    let gt = Image::new(c.size, prep.bits, prep.gt.pixels().to_vec())?;
    let xf = img.to_vector();
    let mx = m.project(&xf)?;
    let residual = mx.iter().zip(&prep.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let row = ResultRow {
        experiment: cfg.kind,
        phantom: c.phantom,
        size: c.size,
        views: c.views,
        method: job.method,
        condition: c.condition,
        seed: c.seed,
        rmse: rmse(&img, &gt)?,
        ssim: ssim(&img, &gt, max_value(prep.bits) as f64)?,
        residual,
        wall_time,
    };
    if !(row.rmse.is_finite() && row.ssim.is_finite() && row.residual.is_finite()) {
        return Err(Error::InvalidValue("non-finite metric".into()));
    }
    Ok(Outcome {
        row,
        x,
        y: prep.y.clone(),
    })
}
