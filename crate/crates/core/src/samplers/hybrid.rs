//! Integer least-squares search alternating classical local moves with
//! annealed binary sub-problems.
//!
//! Each outer iteration runs coordinate descent to a local optimum, ranks
//! pixels by how much a one- or two-pixel unit move could still lower the
//! objective, freezes everything outside a connected set of `k` high-potential
//! pixels, expands those into `k * R` binary variables and anneals the
//! resulting sub-QUBO. An improving sub-solution is accepted; otherwise 10% of
//! the pixels of the best-so-far image are re-drawn uniformly and the search
//! continues from there. Binary expansion makes `b^2 = b`, so self-loops of the
//! integer model vanish without special handling.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::{Entry, SystemMatrix};
use crate::image::{check_bit_depth, max_value};
use crate::par::Execution;
use crate::qubo::{export_qubo, qubo_from_rows, QuboModel, DEFAULT_DROP_THRESHOLD};
use crate::samplers::anneal::{simulated_annealing_sample_with, AnnealSchedule};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(5);

/// Coordinate-descent passes allowed per outer iteration.
const MAX_CD_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Wall-clock limit; results depend on machine speed.
    TimeLimit(Duration),
    /// Fixed number of outer iterations; fully deterministic.
    Iterations(usize),
}

impl Default for Budget {
    fn default() -> Self {
        Budget::TimeLimit(DEFAULT_TIME_LIMIT)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOptions {
    pub budget: Budget,
    /// Pixels freed per sub-problem.
    pub subproblem_size: usize,
    pub reads: usize,
    pub sweeps: usize,
    pub perturb_fraction: f64,
    pub seed: u64,
    pub exec: Execution,
    /// When set, every sub-QUBO is exported here.
    pub debug_dir: Option<PathBuf>,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self {
            budget: Budget::default(),
            subproblem_size: 12,
            reads: 16,
            sweeps: 1000,
            perturb_fraction: 0.1,
            seed: 0,
            exec: Execution::default(),
            debug_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    pub x: Vec<u32>,
    /// `||Mx - y||^2` of `x`, recomputed from scratch.
    pub energy: f64,
    pub iterations: usize,
    /// Stopped because an exact fit was found.
    pub converged: bool,
    /// Best energy after each iteration.
    pub trace: Vec<f64>,
}

/// Residual-tracking state for `||Mx - y||^2` over bounded integers.
struct Search<'a> {
    m: &'a SystemMatrix,
    y: &'a [f64],
    cols: Vec<Vec<Entry>>,
    curvature: Vec<f64>,
    lo: i64,
    hi: i64,
    x: Vec<i64>,
    /// `Mx - y`
    r: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(m: &'a SystemMatrix, y: &'a [f64], x: Vec<i64>, lo: i64, hi: i64) -> Self {
        let cols = m.columns();
        let curvature = cols.iter().map(|c| c.iter().map(|e| e.1 * e.1).sum()).collect();
        let mut s = Self {
            m,
            y,
            cols,
            curvature,
            lo,
            hi,
            x,
            r: Vec::new(),
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let xf: Vec<f64> = self.x.iter().map(|&v| v as f64).collect();
        let mx = self.m.project(&xf).expect("dimensions checked on entry");
        self.r = mx.iter().zip(self.y).map(|(a, b)| a - b).collect();
    }

    fn energy(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum()
    }

    fn gradient(&self, i: usize) -> f64 {
        self.cols[i].iter().map(|&(k, w)| w * self.r[k]).sum()
    }

    fn set(&mut self, i: usize, v: i64) {
        let d = (v - self.x[i]) as f64;
        if d == 0.0 {
            return;
        }
        for &(k, w) in &self.cols[i] {
            self.r[k] += d * w;
        }
        self.x[i] = v;
    }

    /// One pass in index order; returns whether any coordinate moved.
    fn sweep(&mut self) -> bool {
        let mut moved = false;
        for i in 0..self.x.len() {
            let c = self.curvature[i];
            if c == 0.0 {
                continue;
            }
            let g = self.gradient(i);
            let target = self.x[i] as f64 - g / c;
            let floor = target.floor();
            // nearest integer, ties toward the smaller value
            let v = if target - floor <= floor + 1.0 - target { floor } else { floor + 1.0 };
            let v = (v.max(self.lo as f64).min(self.hi as f64)) as i64;
            let d = (v - self.x[i]) as f64;
            if d != 0.0 && 2.0 * d * g + d * d * c <= 0.0 {
                self.set(i, v);
                moved = true;
            }
        }
        moved
    }

    fn descend(&mut self) {
        for _ in 0..MAX_CD_PASSES {
            if !self.sweep() {
                break;
            }
        }
    }
}

/// One coordinate-descent pass over `x` for `||Mx - y||^2` with every
/// coordinate in `[bounds.0, bounds.1]`.
///
/// Each coordinate moves to the integer nearest its exact 1-D minimizer
/// (ties toward the smaller value), clipped to the bounds. Moves that would
/// raise the objective are skipped, as are pixels no ray touches.
pub fn coordinate_descent_sweep(m: &SystemMatrix, y: &[f64], x: &[i64], bounds: (i64, i64)) -> Result<Vec<i64>> {
    check_dims(m, y)?;
    if x.len() != m.cols() {
        return Err(Error::mismatch("image vector", m.cols(), x.len()));
    }
    let (lo, hi) = bounds;
    if lo > hi {
        return Err(Error::InvalidValue(format!("empty bounds [{lo}, {hi}]")));
    }
    if let Some(v) = x.iter().find(|&&v| v < lo || v > hi) {
        return Err(Error::InvalidValue(format!("{v} outside bounds [{lo}, {hi}]")));
    }
    let mut s = Search::new(m, y, x.to_vec(), lo, hi);
    s.sweep();
    Ok(s.x)
}

fn check_dims(m: &SystemMatrix, y: &[f64]) -> Result<()> {
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    Ok(())
}

/// Off-diagonal Gram entries `(M^T M)_ij` as neighbour lists sorted by index.
fn gram_neighbours(m: &SystemMatrix) -> Vec<Vec<(usize, f64)>> {
    let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
    for row in m.row_iter() {
        for (a, &(i, wi)) in row.iter().enumerate() {
            for &(j, wj) in &row[a + 1..] {
                *acc.entry((i, j)).or_insert(0.0) += wi * wj;
            }
        }
    }
    let mut out = vec![Vec::new(); m.cols()];
    for ((i, j), v) in acc {
        out[i].push((j, v));
        out[j].push((i, v));
    }
    for nb in &mut out {
        nb.sort_by_key(|e| e.0);
    }
    out
}

/// Minimize `||Mx - y||^2` over `x in [0, 2^R - 1]^n`.
pub fn hybrid_cqm_solve(m: &SystemMatrix, y: &[f64], bits: u32, opts: &HybridOptions) -> Result<HybridOutcome> {
    check_dims(m, y)?;
    check_bit_depth(bits)?;
    if let Budget::TimeLimit(t) = opts.budget {
        if t.is_zero() {
            return Err(Error::InvalidValue("time limit must be positive".into()));
        }
    }
    if opts.subproblem_size == 0 || opts.reads == 0 || opts.sweeps == 0 {
        return Err(Error::InvalidValue("sub-problem size, reads and sweeps must be positive".into()));
    }
    if let Some(dir) = &opts.debug_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let start = Instant::now();
    let n = m.cols();
    let hi = max_value(bits) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut search = Search::new(m, y, vec![0; n], 0, hi);
    let gram = gram_neighbours(m);
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let exact = 1e-20 * (1.0 + yy);

    let mut best_x = search.x.clone();
    let mut best_e = search.energy();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let exhausted = match opts.budget {
            Budget::Iterations(k) => iterations >= k,
            Budget::TimeLimit(t) => start.elapsed() >= t,
        };
        if exhausted || n == 0 {
            break;
        }

        search.descend();
        search.refresh();
        let mut energy = search.energy();
        if energy < best_e {
            best_e = energy;
            best_x.clone_from(&search.x);
        }
        if best_e <= exact {
            converged = true;
            trace.push(best_e);
            iterations += 1;
            break;
        }

        let selected = select_variables(&search, &gram, opts.subproblem_size, &mut rng);
        let sub_seed: u64 = rng.gen();
        let proposal = solve_subproblem(&search, &selected, bits, opts, sub_seed, iterations)?;
        let accepted = match proposal {
            Some(values) => {
                let saved_x = search.x.clone();
                let saved_r = search.r.clone();
                for (&i, &v) in selected.iter().zip(&values) {
                    search.set(i, v);
                }
                let candidate = search.energy();
                if candidate < energy - 1e-12 * (1.0 + energy) {
                    search.refresh();
                    energy = search.energy();
                    true
                } else {
                    search.x = saved_x;
                    search.r = saved_r;
                    false
                }
            }
            None => false,
        };

        if accepted {
            if energy < best_e {
                best_e = energy;
                best_x.clone_from(&search.x);
            }
        } else {
            search.x.clone_from(&best_x);
            let count = ((n as f64 * opts.perturb_fraction).ceil() as usize).clamp(1, n);
            for i in sample_indices(&mut rng, n, count) {
                search.x[i] = rng.gen_range(0..=hi);
            }
            search.refresh();
        }
        trace.push(best_e);
        iterations += 1;
    }

    let xf: Vec<f64> = best_x.iter().map(|&v| v as f64).collect();
    let energy = crate::qubo::residual_sq(m, &xf, y)?;
    if energy <= exact {
        converged = true;
    }
    log::debug!(
        "hybrid: {iterations} iterations, energy {energy:e}, converged {converged}, {:?}",
        start.elapsed()
    );
    Ok(HybridOutcome {
        x: best_x.iter().map(|&v| v as u32).collect(),
        energy,
        iterations,
        converged,
        trace,
    })
}

/// Best drop in objective from moving `x_i` by `d` (negative is better).
#[inline]
fn unit_delta(g: f64, c: f64, d: f64) -> f64 {
    2.0 * d * g + d * d * c
}

/// Pick a seed pixel with maximal improvement potential, then fill the set
/// with its highest-potential Gram neighbours. Ties are broken randomly.
fn select_variables(s: &Search<'_>, gram: &[Vec<(usize, f64)>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = s.x.len();
    let k = k.min(n);
    let grad: Vec<f64> = (0..n).map(|i| s.gradient(i)).collect();
    let moves = |i: usize| {
        [-1i64, 1].into_iter().filter(move |&d| {
            let v = s.x[i] + d;
            v >= s.lo && v <= s.hi
        })
    };
    let potential: Vec<f64> = (0..n)
        .map(|i| {
            let mut best = 0.0f64;
            for di in moves(i) {
                let di_f = di as f64;
                let single = unit_delta(grad[i], s.curvature[i], di_f);
                best = best.max(-single);
                for &(j, gij) in &gram[i] {
                    for dj in moves(j) {
                        let dj_f = dj as f64;
                        let pair = single + unit_delta(grad[j], s.curvature[j], dj_f) + 2.0 * di_f * dj_f * gij;
                        best = best.max(-pair);
                    }
                }
            }
            best
        })
        .collect();
    let jitter: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let rank = |a: &usize, b: &usize| {
        potential[*b]
            .total_cmp(&potential[*a])
            .then_with(|| jitter[*a].cmp(&jitter[*b]))
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(rank);
    let seed = order[0];
    let mut chosen = vec![seed];
    let mut nb: Vec<usize> = gram[seed].iter().map(|e| e.0).collect();
    nb.sort_by(rank);
    chosen.extend(nb.into_iter().take(k - 1));
    for &i in &order {
        if chosen.len() >= k {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Anneal the binary expansion of the selected pixels with all others frozen.
/// Returns the new values of the selected pixels, in selection order.
fn solve_subproblem(
    s: &Search<'_>,
    selected: &[usize],
    bits: u32,
    opts: &HybridOptions,
    seed: u64,
    iteration: usize,
) -> Result<Option<Vec<i64>>> {
    let r = bits as usize;
    let mut rows: BTreeMap<usize, Vec<Entry>> = BTreeMap::new();
    for (p, &i) in selected.iter().enumerate() {
        for &(k, w) in &s.cols[i] {
            let row = rows.entry(k).or_default();
            for b in 0..r {
                row.push((p * r + b, w * (1u64 << b) as f64));
            }
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    // target for the freed pixels: y_k minus the frozen contribution
    let targets: Vec<f64> = rows
        .iter()
        .map(|(&k, entries)| {
            let freed: f64 = entries
                .iter()
                .map(|&(v, w)| if (s.x[selected[v / r]] >> (v % r)) & 1 == 1 { w } else { 0.0 })
                .sum();
            freed - s.r[k]
        })
        .collect();
    let model: QuboModel = qubo_from_rows(
        selected.len() * r,
        rows.values().map(Vec::as_slice),
        &targets,
        DEFAULT_DROP_THRESHOLD,
    );
    if let Some(dir) = &opts.debug_dir {
        export_qubo(&model, dir.join(format!("subqubo_{iteration:06}.txt")))?;
    }
    let schedule = AnnealSchedule::for_model(&model, opts.sweeps);
    let set = simulated_annealing_sample_with(&model, opts.reads, &schedule, seed, opts.exec)?;
    let best = &set.records[0].assignment;
    Ok(Some(
        best.chunks(r)
            .map(|b| b.iter().enumerate().map(|(i, &v)| (v as i64) << i).sum())
            .collect(),
    ))
}
