//! Image-quality metrics and the reconstruction stability ratio.

use crate::error::{Error, Result};
use crate::image::{FloatImage, Image};

/// Side length of the SSIM window.
pub const SSIM_WINDOW: usize = 7;

/// Square images viewed as real pixel vectors.
pub trait Pixels {
    fn side(&self) -> usize;
    fn values(&self) -> Vec<f64>;
}

impl Pixels for Image {
    fn side(&self) -> usize {
        Image::side(self)
    }
    fn values(&self) -> Vec<f64> {
        self.to_vector()
    }
}

impl Pixels for FloatImage {
    fn side(&self) -> usize {
        self.side
    }
    fn values(&self) -> Vec<f64> {
        self.pixels.clone()
    }
}

fn same_shape(a: &impl Pixels, b: &impl Pixels) -> Result<usize> {
    if a.side() != b.side() {
        return Err(Error::mismatch("image side", a.side(), b.side()));
    }
    Ok(a.side())
}

pub fn rmse(a: &impl Pixels, b: &impl Pixels) -> Result<f64> {
    same_shape(a, b)?;
    let (a, b) = (a.values(), b.values());
    if a.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.len() as f64).sqrt())
}

/// Mean SSIM over all fully contained uniform 7x7 windows, or over the whole
/// image when it is smaller than the window. Window statistics use
/// population (divide-by-count) variances.
pub fn ssim(a: &impl Pixels, b: &impl Pixels, dynamic_range: f64) -> Result<f64> {
    let n = same_shape(a, b)?;
    if !(dynamic_range > 0.0) {
        return Err(Error::InvalidValue(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    if n == 0 {
        return Err(Error::InvalidSize("SSIM of an empty image".into()));
    }
    let (a, b) = (a.values(), b.values());
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let w = SSIM_WINDOW.min(n);

    // summed-area tables of a, b, a^2, b^2, ab with a zero border
    let stride = n + 1;
    let mut tables = [(); 5].map(|_| vec![0.0; stride * stride]);
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (a[r * n + c], b[r * n + c]);
            let vals = [x, y, x * x, y * y, x * y];
            for (t, v) in tables.iter_mut().zip(vals) {
                t[(r + 1) * stride + c + 1] =
                    v + t[r * stride + c + 1] + t[(r + 1) * stride + c] - t[r * stride + c];
            }
        }
    }
    let area = (w * w) as f64;
    let box_sum = |t: &[f64], r: usize, c: usize| {
        t[(r + w) * stride + c + w] - t[r * stride + c + w] - t[(r + w) * stride + c] + t[r * stride + c]
    };

    let count = n - w + 1;
    let mut total = 0.0;
    for r in 0..count {
        for c in 0..count {
            let [sa, sb, saa, sbb, sab] = [0, 1, 2, 3, 4].map(|k| box_sum(&tables[k], r, c) / area);
            let va = (saa - sa * sa).max(0.0);
            let vb = (sbb - sb * sb).max(0.0);
            let cov = sab - sa * sb;
            total += ((2.0 * sa * sb + c1) * (2.0 * cov + c2)) / ((sa * sa + sb * sb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (count * count) as f64)
}

/// `||x1 - x2|| / ||y1 - y2||`: how strongly a measurement perturbation is
/// amplified in the reconstruction.
pub fn stability_ratio(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::mismatch("reconstruction length", x1.len(), x2.len()));
    }
    if y1.len() != y2.len() {
        return Err(Error::mismatch("measurement length", y1.len(), y2.len()));
    }
    let norm = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let dy = norm(y1, y2);
    if dy == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(norm(x1, x2) / dy)
}
