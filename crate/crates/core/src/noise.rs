//! Signal-dependent additive noise imitating low-count emission data.
//!
//! Each view gets its own noise image: pixels with signal receive a value
//! drawn uniformly from `{-1, 0, 1}`, empty pixels one drawn uniformly from
//! `{0, 1}`. The noisy image is clipped to the bit range and projected
//! through that view's rows only.
//!
//! Draws come from ChaCha8 seeded with the 64-bit seed, using the view index
//! as the stream number, so every view has an independent reproducible
//! substream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::{dot_row, Sinogram, SystemMatrix};
use crate::image::Image;
use crate::par::{map_range, Execution};

/// Per-view noise images for one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseRealization {
    pub seed: u64,
    pub views: Vec<Vec<i8>>,
}

impl NoiseRealization {
    pub fn draw(x: &Image, views: usize, seed: u64) -> Self {
        let views = (0..views).map(|v| noise_image(x, seed, v)).collect();
        Self { seed, views }
    }
}

/// The noise image for view `view` under `seed`.
pub fn noise_image(x: &Image, seed: u64, view: usize) -> Vec<i8> {
    let mut rng = view_rng(seed, view);
    x.pixels()
        .iter()
        .map(|&p| {
            if p != 0 {
                rng.gen_range(-1i8..=1)
            } else {
                rng.gen_range(0i8..=1)
            }
        })
        .collect()
}

fn view_rng(seed: u64, view: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(view as u64);
    rng
}

/// `x + n`, clipped to the image's bit range.
pub fn noisy_pixels(x: &Image, noise: &[i8]) -> Vec<f64> {
    let max = x.max_value() as i64;
    x.pixels()
        .iter()
        .zip(noise)
        .map(|(&p, &n)| (p as i64 + n as i64).clamp(0, max) as f64)
        .collect()
}

/// Noisy sinogram: view `v` is `M_v clip(x + n_v)`.
pub fn apply_noise(x: &Image, m: &SystemMatrix, seed: u64) -> Result<Sinogram> {
    apply_noise_with(x, m, seed, Execution::default())
}

pub fn apply_noise_with(x: &Image, m: &SystemMatrix, seed: u64, exec: Execution) -> Result<Sinogram> {
    if x.pixels().len() != m.cols() {
        return Err(Error::mismatch("image pixels", m.cols(), x.pixels().len()));
    }
    let per_view = map_range(exec, m.views(), |v| {
        let noisy = noisy_pixels(x, &noise_image(x, seed, v));
        m.view_rows(v)
            .iter()
            .map(|row| dot_row(row, &noisy))
            .collect::<Vec<f64>>()
    });
    Sinogram::new(m.views(), m.bins(), per_view.into_iter().flatten().collect())
}
