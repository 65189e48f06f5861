use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forward::{bin_offset, view_axes, Sinogram};
use crate::image::FloatImage;
use crate::par::{map_range, Execution};

/// Frequency response of the band-limited ramp for a padded length `len`.
///
/// Built from the spatial Ram-Lak kernel (`1/4` at the origin,
/// `-1/(pi k)^2` at odd offsets) so the DC term is not forced to zero, then
/// doubled, giving approximately `2|f|` in cycles per sample.
pub fn ramp_filter(len: usize) -> Vec<f64> {
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 0.25;
    for k in (1..len / 2 + 1).step_by(2) {
        let v = -1.0 / (PI * k as f64).powi(2);
        kernel[k].re = v;
        kernel[len - k].re = v;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
    kernel.iter().map(|c| 2.0 * c.re).collect()
}

fn padded_len(n: usize) -> usize {
    (2 * n).next_power_of_two().max(2)
}

/// Filtered backprojection over the matrix geometry.
///
/// Each view is zero-padded to the next power of two at least `2N`,
/// ramp-filtered in the Fourier domain, and smeared back along its rays with
/// linear interpolation between detector bins. The sum is scaled by
/// `pi / (2V)`.
pub fn fbp_reconstruct(sino: &Sinogram, angles: &[f64], n: usize) -> Result<FloatImage> {
    fbp_reconstruct_with(sino, angles, n, Execution::default())
}

pub fn fbp_reconstruct_with(sino: &Sinogram, angles: &[f64], n: usize, exec: Execution) -> Result<FloatImage> {
    if n == 0 {
        return Err(Error::InvalidSize("grid side must be positive".into()));
    }
    if sino.views != angles.len() {
        return Err(Error::mismatch("sinogram views", angles.len(), sino.views));
    }
    if sino.bins != n {
        return Err(Error::mismatch("sinogram bins", n, sino.bins));
    }
    let len = padded_len(n);
    let filter = ramp_filter(len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let partial = map_range(exec, angles.len(), |v| {
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (b, &p) in sino.view(v).iter().enumerate() {
            buf[b].re = p;
        }
        fwd.process(&mut buf);
        for (c, &h) in buf.iter_mut().zip(&filter) {
            *c *= h;
        }
        inv.process(&mut buf);
        let q: Vec<f64> = buf[..n].iter().map(|c| c.re / len as f64).collect();

        let (u, _) = view_axes(angles[v]);
        let h = n as f64 / 2.0;
        let mut img = vec![0.0; n * n];
        for row in 0..n {
            let py = h - row as f64 - 0.5;
            for col in 0..n {
                let px = col as f64 - h + 0.5;
                let t = px * u.0 + py * u.1;
                // fractional bin index; bin b sits at offset b - n/2 + 0.5
                let s = t - bin_offset(0, n);
                img[row * n + col] = interpolate(&q, s);
            }
        }
        img
    });

    let scale = PI / (2.0 * angles.len().max(1) as f64);
    let mut pixels = vec![0.0; n * n];
    for img in &partial {
        for (a, b) in pixels.iter_mut().zip(img) {
            *a += b;
        }
    }
    for p in &mut pixels {
        *p *= scale;
    }
    FloatImage::new(n, pixels)
}

/// Linear interpolation of `q` at fractional index `s`, zero outside.
fn interpolate(q: &[f64], s: f64) -> f64 {
    let last = (q.len() - 1) as f64;
    if !(s >= 0.0 && s <= last) {
        return 0.0;
    }
    let i = s.floor() as usize;
    if i + 1 >= q.len() {
        return q[q.len() - 1];
    }
    let f = s - i as f64;
    q[i] * (1.0 - f) + q[i + 1] * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{angle_set, build_system_matrix, project};

    fn disc(n: usize, radius: f64) -> Vec<f64> {
        let h = n as f64 / 2.0;
        (0..n * n)
            .map(|i| {
                let x = (i % n) as f64 - h + 0.5;
                let y = h - (i / n) as f64 - 0.5;
                (x * x + y * y <= radius * radius) as u8 as f64
            })
            .collect()
    }

    #[test]
    fn zero_sinogram() {
        let angles = angle_set(4).unwrap();
        let s = Sinogram::new(4, 8, vec![0.0; 32]).unwrap();
        let img = fbp_reconstruct(&s, &angles, 8).unwrap();
        assert_eq!(img.side, 8);
        assert!(img.pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layout_errors() {
        let s = Sinogram::new(4, 8, vec![0.0; 32]).unwrap();
        assert!(fbp_reconstruct(&s, &angle_set(3).unwrap(), 8).is_err());
        assert!(fbp_reconstruct(&s, &angle_set(4).unwrap(), 4).is_err());
    }

    #[test]
    fn filter_is_symmetric_ramp() {
        let f = ramp_filter(16);
        assert!(f[0] > 0.0 && f[0] < 0.1);
        for k in 1..8 {
            assert!((f[k] - f[16 - k]).abs() < 1e-12);
            assert!(f[k] > f[k - 1]);
        }
        assert!((f[8] - 1.0).abs() < 0.05);
    }

    #[test]
    fn disc_amplitude_near_one() {
        let n = 32;
        let angles = angle_set(64).unwrap();
        let m = build_system_matrix(n, &angles).unwrap();
        let gt = disc(n, 10.0);
        let s = project(&m, &gt).unwrap();
        let img = fbp_reconstruct(&s, &angles, n).unwrap();
        let inner: Vec<f64> = (0..n * n).filter(|&i| disc(n, 6.0)[i] == 1.0).map(|i| img.pixels[i]).collect();
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn policies_agree() {
        let angles = angle_set(8).unwrap();
        let m = build_system_matrix(8, &angles).unwrap();
        let s = project(&m, &disc(8, 3.0)).unwrap();
        let a = fbp_reconstruct_with(&s, &angles, 8, Execution::Sequential).unwrap();
        let b = fbp_reconstruct_with(&s, &angles, 8, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
