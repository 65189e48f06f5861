use std::time::Instant;

use crate::error::{Error, Result};
use crate::par::{map_range, Execution};
use crate::qubo::QuboModel;
use crate::samplers::{Sample, SampleSet};

/// Largest model [`exhaustive_solve`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Upper bound on how many degenerate ground states are kept.
const MAX_GROUND_STATES: usize = 1 << 16;

/// Variables enumerated per parallel chunk prefix.
const PREFIX_BITS: usize = 6;

/// Every assignment with the minimal energy, one record each.
///
/// Energies are tracked incrementally along a Gray code; candidates within
/// a loose band of the running minimum are rescored exactly, and those within
/// `1e-9 * (1 + |E_min|)` of the exact minimum are returned.
pub fn exhaustive_solve(q: &QuboModel) -> Result<SampleSet> {
    exhaustive_solve_with(q, Execution::default())
}

pub fn exhaustive_solve_with(q: &QuboModel, exec: Execution) -> Result<SampleSet> {
    if q.n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            n: q.n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let start = Instant::now();
    let n = q.n;
    let prefix = n.min(PREFIX_BITS);
    let low = n - prefix;
    let adj = q.adjacency();
    let band = 1e-6 * (1.0 + q.max_abs_coefficient() * (n as f64 + 1.0));

    let chunks = map_range(exec, 1usize << prefix, |chunk| {
        let mut x = vec![0u8; n];
        for b in 0..prefix {
            x[low + b] = ((chunk >> b) & 1) as u8;
        }
        enumerate_chunk(q, &adj, x, low, band)
    });

    let mut candidates: Vec<Vec<u8>> = chunks.into_iter().flatten().collect();
    let mut scored: Vec<(f64, Vec<u8>)> = candidates
        .drain(..)
        .map(|x| (q.energy_unchecked(&x), x))
        .collect();
    let min = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + min.abs());
    scored.retain(|s| s.0 <= min + tol);
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    scored.truncate(MAX_GROUND_STATES);

    let records: Vec<Sample> = scored
        .into_iter()
        .map(|(energy, assignment)| Sample {
            assignment,
            energy,
            occurrences: 1,
        })
        .collect();
    Ok(SampleSet {
        reads: records.len(),
        records,
        seed: 0,
        wall_time: start.elapsed(),
    })
}

/// Walk the `2^low` assignments of the low variables with the high ones fixed.
fn enumerate_chunk(q: &QuboModel, adj: &[Vec<(usize, f64)>], mut x: Vec<u8>, low: usize, band: f64) -> Vec<Vec<u8>> {
    let mut field: Vec<f64> = q.linear.clone();
    for (i, nb) in adj.iter().enumerate() {
        for &(j, v) in nb {
            if x[j] == 1 {
                field[i] += v;
            }
        }
    }
    let mut energy = q.energy_unchecked(&x);
    let mut best = energy;
    let mut keep = vec![x.clone()];
    for step in 1u64..(1u64 << low) {
        let i = step.trailing_zeros() as usize;
        let delta = if x[i] == 1 { -field[i] } else { field[i] };
        let sign = if x[i] == 1 { -1.0 } else { 1.0 };
        x[i] ^= 1;
        energy += delta;
        for &(j, v) in &adj[i] {
            field[j] += sign * v;
        }
        if energy < best - band {
            best = energy;
            keep.clear();
            keep.push(x.clone());
        } else if energy <= best + band {
            if energy < best {
                best = energy;
            }
            if keep.len() < MAX_GROUND_STATES {
                keep.push(x.clone());
            }
        }
    }
    keep.retain(|c| q.energy_unchecked(c) <= best + 2.0 * band);
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::forward::SystemMatrix;
    use crate::qubo::build_binary_qubo;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_variable() {
        let q = QuboModel::new(vec![-1.0], BTreeMap::new(), 0.0).unwrap();
        let s = exhaustive_solve(&q).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].assignment, vec![1]);
        assert_eq!(s.records[0].energy, -1.0);
    }

    #[test]
    fn both_ground_states() {
        let m = SystemMatrix::from_dense(1, 2, &[1.0, 1.0]).unwrap();
        let q = build_binary_qubo(&m, &[1.0]).unwrap();
        let s = exhaustive_solve(&q).unwrap();
        let got: Vec<_> = s.records.iter().map(|r| (r.assignment.clone(), r.energy)).collect();
        assert_eq!(got, vec![(vec![0, 1], 0.0), (vec![1, 0], 0.0)]);
    }

    #[test]
    fn empty_model() {
        let s = exhaustive_solve(&QuboModel::empty(3.0)).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].energy, 3.0);
    }

    #[test]
    fn size_guard() {
        let q = QuboModel::new(vec![0.0; 25], BTreeMap::new(), 0.0).unwrap();
        assert!(matches!(exhaustive_solve(&q), Err(Error::TooLarge { n: 25, .. })));
    }

    #[test]
    fn random_models_match_dense_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = 8;
            let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut dense = vec![vec![0.0; n]; n];
            let mut quadratic = BTreeMap::new();
            for i in 0..n {
                dense[i][i] = linear[i];
                for j in i + 1..n {
                    let v = rng.gen_range(-4.0..4.0);
                    dense[i][j] = v;
                    quadratic.insert((i, j), v);
                }
            }
            let q = QuboModel::new(linear, quadratic, 0.0).unwrap();
            let mut best = f64::INFINITY;
            for k in 0u32..1 << n {
                let x: Vec<f64> = (0..n).map(|i| ((k >> i) & 1) as f64).collect();
                let mut e = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        e += x[i] * dense[i][j] * x[j];
                    }
                }
                best = best.min(e);
            }
            let s = exhaustive_solve(&q).unwrap();
            assert!((s.lowest_energy().unwrap() - best).abs() < 1e-9);
            let seq = exhaustive_solve_with(&q, Execution::Sequential).unwrap();
            assert_eq!(seq, s);
        }
    }
}
