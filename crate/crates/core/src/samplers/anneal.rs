use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::SystemMatrix;
use crate::par::{map_range, Execution};
use crate::qubo::{build_integer_qubo, QuboModel};
use crate::samplers::SampleSet;

/// Geometric inverse-temperature ramp from `beta_start` to `beta_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            beta_start: 0.1,
            beta_end: 10.0,
        }
    }
}

impl AnnealSchedule {
    pub fn new(sweeps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        let s = Self {
            sweeps,
            beta_start,
            beta_end,
        };
        s.validate()?;
        Ok(s)
    }

    /// Range derived from the model's coefficient scale: hot enough that the
    /// largest possible flip is accepted with probability 1/2 at the start,
    /// cold enough that the smallest coefficient is rejected with
    /// probability 0.99 at the end.
    pub fn for_model(q: &QuboModel, sweeps: usize) -> Self {
        let adj = q.adjacency();
        let mut max_delta = 0.0f64;
        let mut min_coef = f64::INFINITY;
        for (i, nb) in adj.iter().enumerate() {
            let lin = q.linear[i].abs();
            let d = lin + nb.iter().map(|(_, v)| v.abs()).sum::<f64>();
            max_delta = max_delta.max(d);
            if lin > 0.0 {
                min_coef = min_coef.min(lin);
            }
            for &(_, v) in nb {
                if v != 0.0 {
                    min_coef = min_coef.min(v.abs());
                }
            }
        }
        if max_delta == 0.0 || !min_coef.is_finite() {
            return Self {
                sweeps,
                ..Self::default()
            };
        }
        let beta_start = std::f64::consts::LN_2 / max_delta;
        let beta_end = (100f64.ln() / min_coef).max(beta_start * 10.0);
        Self {
            sweeps,
            beta_start,
            beta_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidSchedule("sweeps must be positive".into()));
        }
        let ok = |b: f64| b.is_finite() && b > 0.0;
        if !ok(self.beta_start) || !ok(self.beta_end) || self.beta_start >= self.beta_end {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < beta_start < beta_end, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// Inverse temperature at each sweep, non-decreasing.
    pub fn betas(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_start];
        }
        let ratio = (self.beta_end / self.beta_start).ln();
        (0..self.sweeps)
            .map(|k| self.beta_start * (ratio * k as f64 / (self.sweeps - 1) as f64).exp())
            .collect()
    }
}

/// Compressed adjacency for the annealing inner loop.
struct Csr {
    offsets: Vec<usize>,
    neighbours: Vec<(u32, f64)>,
}

impl Csr {
    fn new(q: &QuboModel) -> Self {
        let adj = q.adjacency();
        let mut offsets = Vec::with_capacity(q.n + 1);
        let mut neighbours = Vec::with_capacity(2 * q.quadratic.len());
        offsets.push(0);
        for nb in &adj {
            neighbours.extend(nb.iter().map(|&(j, v)| (j as u32, v)));
            offsets.push(neighbours.len());
        }
        Self { offsets, neighbours }
    }

    #[inline]
    fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.neighbours[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Anneal `num_reads` independent chains.
///
/// Each read starts from a uniformly random assignment, performs one
/// Metropolis sweep (variables in index order) per scheduled beta, then
/// descends greedily to a single-flip local minimum. Read `r` uses the
/// ChaCha8 stream `r` of `seed`, so results do not depend on scheduling.
pub fn simulated_annealing_sample(
    q: &QuboModel,
    num_reads: usize,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<SampleSet> {
    simulated_annealing_sample_with(q, num_reads, schedule, seed, Execution::default())
}

pub fn simulated_annealing_sample_with(
    q: &QuboModel,
    num_reads: usize,
    schedule: &AnnealSchedule,
    seed: u64,
    exec: Execution,
) -> Result<SampleSet> {
    schedule.validate()?;
    if q.n == 0 {
        return Err(Error::InvalidSize("model has no variables".into()));
    }
    if num_reads == 0 {
        return Err(Error::InvalidSize("num_reads must be positive".into()));
    }
    let start = Instant::now();
    let csr = Csr::new(q);
    let betas = schedule.betas();
    let reads = map_range(exec, num_reads, |r| anneal_read(q, &csr, &betas, seed, r as u64));
    Ok(SampleSet::from_reads(q, reads, seed, start.elapsed()))
}

fn anneal_read(q: &QuboModel, csr: &Csr, betas: &[f64], seed: u64, read: u64) -> Vec<u8> {
    let n = q.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    // field_i = linear_i + sum_j q_ij x_j; flipping i changes E by (1 - 2 x_i) field_i
    let mut field = q.linear.clone();
    for i in 0..n {
        if x[i] == 1 {
            for &(j, v) in csr.row(i) {
                field[j as usize] += v;
            }
        }
    }
    let flip = |i: usize, x: &mut [u8], field: &mut [f64]| {
        let sign = if x[i] == 1 { -1.0 } else { 1.0 };
        x[i] ^= 1;
        for &(j, v) in csr.row(i) {
            field[j as usize] += sign * v;
        }
    };
    for &beta in betas {
        for i in 0..n {
            let delta = if x[i] == 1 { -field[i] } else { field[i] };
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                flip(i, &mut x, &mut field);
            }
        }
    }
    loop {
        let mut improved = false;
        for i in 0..n {
            let delta = if x[i] == 1 { -field[i] } else { field[i] };
            if delta < 0.0 {
                flip(i, &mut x, &mut field);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    x
}

/// Parameters of the annealing reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct QaOptions {
    pub reads: usize,
    /// `None` derives the beta range from the model ([`AnnealSchedule::for_model`]).
    pub schedule: Option<AnnealSchedule>,
    pub sweeps: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for QaOptions {
    fn default() -> Self {
        Self {
            reads: 100,
            schedule: None,
            sweeps: 1000,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

/// Reconstruct an R-bit image by annealing the least-squares QUBO and
/// decoding the lowest-energy sample.
pub fn qa_reconstruct(m: &SystemMatrix, y: &[f64], bits: u32, opts: &QaOptions) -> Result<(Vec<u32>, SampleSet)> {
    let (model, enc) = build_integer_qubo(m, y, bits)?;
    let schedule = opts
        .schedule
        .unwrap_or_else(|| AnnealSchedule::for_model(&model, opts.sweeps));
    let set = simulated_annealing_sample_with(&model, opts.reads, &schedule, opts.seed, opts.exec)?;
    let best = set.first().expect("at least one read");
    Ok((enc.decode(&best.assignment)?, set))
}
