//! Minimizers for QUBO and integer least-squares models.
//!
//! * [`exhaustive_solve`]: enumerates every assignment (ground-truth oracle).
//! * [`simulated_annealing_sample`]: Metropolis single-flip annealing, the
//!   classical stand-in for an annealer's sampler.
//! * [`hybrid_cqm_solve`]: integer large-neighbourhood search that alternates
//!   coordinate descent with annealed binary sub-problems.

mod anneal;
mod exhaustive;
mod hybrid;

use std::collections::BTreeMap;
use std::time::Duration;

pub use anneal::{qa_reconstruct, simulated_annealing_sample, simulated_annealing_sample_with, AnnealSchedule, QaOptions};
pub use exhaustive::{exhaustive_solve, exhaustive_solve_with, EXHAUSTIVE_LIMIT};
pub use hybrid::{
    coordinate_descent_sweep, hybrid_cqm_solve, Budget, HybridOptions, HybridOutcome,
    DEFAULT_TIME_LIMIT,
};

use crate::qubo::QuboModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub assignment: Vec<u8>,
    pub energy: f64,
    pub occurrences: usize,
}

/// Distinct assignments sorted by ascending energy (ties by assignment).
///
/// Equality compares records, seed and read count; wall time is ignored.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub records: Vec<Sample>,
    pub seed: u64,
    pub reads: usize,
    pub wall_time: Duration,
}

impl PartialEq for SampleSet {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.seed == other.seed && self.reads == other.reads
    }
}

impl SampleSet {
    /// Deduplicate raw reads, scoring each distinct assignment exactly.
    pub fn from_reads(model: &QuboModel, reads: Vec<Vec<u8>>, seed: u64, wall_time: Duration) -> Self {
        let total = reads.len();
        let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        for r in reads {
            *counts.entry(r).or_insert(0) += 1;
        }
        let mut records: Vec<Sample> = counts
            .into_iter()
            .map(|(assignment, occurrences)| Sample {
                energy: model.energy_unchecked(&assignment),
                assignment,
                occurrences,
            })
            .collect();
        records.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.assignment.cmp(&b.assignment)));
        Self {
            records,
            seed,
            reads: total,
            wall_time,
        }
    }

    pub fn first(&self) -> Option<&Sample> {
        self.records.first()
    }

    pub fn lowest_energy(&self) -> Option<f64> {
        self.first().map(|s| s.energy)
    }

    pub fn total_occurrences(&self) -> usize {
        self.records.iter().map(|s| s.occurrences).sum()
    }
}
