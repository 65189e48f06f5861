//! Tomographic image reconstruction posed as quadratic binary optimization.
//!
//! The least-squares problem `min ||Mx - y||^2` over binary or R-bit integer
//! images is expanded into a QUBO model, which is then minimized by classical
//! samplers: an exhaustive oracle, simulated annealing and a hybrid
//! large-neighbourhood integer search. FBP, SART and pseudoinverse baselines
//! share the same sparse system matrix so that all methods see one forward
//! model.
//!
//! Data-parallel loops (sampler reads, matrix rows, FBP views, experiment
//! rows) go through [`par`], which uses rayon when the `parallel` feature is
//! enabled and runs sequentially otherwise. Results are identical either way.

pub mod baselines;
pub mod error;
pub mod forward;
pub mod harness;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod par;
pub mod phantom;
pub mod qubo;
pub mod samplers;

pub use error::{Error, Result};
pub use forward::{Sinogram, SystemMatrix};
pub use image::{FloatImage, Image};
pub use qubo::{IntegerEncoding, IsingModel, QuboModel};
pub use samplers::{AnnealSchedule, SampleSet};

/// Round half-up: ties go toward positive infinity on every platform.
#[inline]
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}
