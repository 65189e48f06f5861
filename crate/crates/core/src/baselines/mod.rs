//! Classical reconstructions used as reference points, plus the
//! discretization that maps their real-valued output onto the pixel grid.

mod fbp;
mod pinv;
mod sart;

pub use fbp::{fbp_reconstruct, fbp_reconstruct_with, ramp_filter};
pub use pinv::{pinv_matrix, pinv_reconstruct, pinv_reconstruct_with, pinv_solve, DEFAULT_RCOND};
pub use sart::{sart_iterates, sart_reconstruct, SartOptions};

use crate::error::{Error, Result};
use crate::image::{check_bit_depth, max_value, FloatImage, Image};
use crate::round_half_up;

/// Map a real image onto `R`-bit pixels.
///
/// Binary images are thresholded at 0.5; deeper images are rounded half-up
/// and clipped to `[0, 2^R - 1]`.
pub fn discretize(img: &FloatImage, bits: u32) -> Result<Image> {
    check_bit_depth(bits)?;
    let top = max_value(bits) as f64;
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for (i, &v) in img.pixels.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidValue(format!("pixel {i} is {v}")));
        }
        let p = if bits == 1 {
            (v >= 0.5) as u32
        } else {
            round_half_up(v).clamp(0.0, top) as u32
        };
        pixels.push(p);
    }
    Image::new(img.side, bits, pixels)
}
