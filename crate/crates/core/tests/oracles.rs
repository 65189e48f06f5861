//! Library results checked against independently written references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use tomoqa::baselines::{fbp_reconstruct, pinv_solve, DEFAULT_RCOND};
use tomoqa::forward::{angle_set, build_system_matrix, project, SystemMatrix};
use tomoqa::image::FloatImage;
use tomoqa::metrics::ssim;
use tomoqa::phantom::{generate_phantom, PhantomKind};
use tomoqa::samplers::{exhaustive_solve, simulated_annealing_sample, AnnealSchedule};
use tomoqa::QuboModel;

#[test]
fn shepp_logan_matches_numpy_rasterization() {
    let four = [0, 4, 4, 0, 2, 2, 3, 2, 2, 2, 2, 2, 0, 3, 3, 0];
    let eight = [
        0, 0, 2, 5, 5, 2, 0, 0, 0, 1, 5, 3, 3, 5, 1, 0, 0, 3, 2, 4, 5, 3, 3, 0, 0, 4, 1, 2, 3, 2, 4, 0, 0, 3, 2, 0, 1,
        3, 3, 0, 0, 3, 3, 2, 3, 3, 3, 0, 0, 1, 4, 3, 3, 4, 1, 0, 0, 0, 1, 3, 3, 1, 0, 0,
    ];
    assert_eq!(generate_phantom(PhantomKind::SheppLogan, 4).unwrap().pixels(), four);
    assert_eq!(generate_phantom(PhantomKind::SheppLogan, 8).unwrap().pixels(), eight);
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
        for j in 0..n {
            a.swap(k * n + j, p * n + j);
        }
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    x
}

#[test]
fn pinv_is_minimum_norm_for_wide_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..20 {
        let (r, c) = (3, 5);
        let a: Vec<f64> = (0..r * c).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..r).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut aat = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                aat[i * r + j] = (0..c).map(|k| a[i * c + k] * a[j * c + k]).sum();
            }
        }
        let z = solve_dense(aat, y.clone());
        let want: Vec<f64> = (0..c).map(|k| (0..r).map(|i| a[i * c + k] * z[i]).sum()).collect();
        let m = SystemMatrix::from_dense(r, c, &a).unwrap();
        let got = pinv_solve(&m, &y, DEFAULT_RCOND).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{got:?} vs {want:?}");
        }
    }
}

fn disc(n: usize, radius: f64) -> Vec<f64> {
    let h = n as f64 / 2.0;
    (0..n * n)
        .map(|i| {
            let x = (i % n) as f64 - h + 0.5;
            let y = h - (i / n) as f64 - 0.5;
            if x * x + y * y <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn bilinear(img: &[f64], n: usize, x: f64, y: f64) -> f64 {
    // continuous coordinates with pixel centres at integer + 0.5, y up
    let h = n as f64 / 2.0;
    let c = x + h - 0.5;
    let r = h - y - 0.5;
    let (c0, r0) = (c.floor(), r.floor());
    let (fc, fr) = (c - c0, r - r0);
    let at = |r: f64, c: f64| {
        if r < 0.0 || c < 0.0 || r >= n as f64 || c >= n as f64 {
            0.0
        } else {
            img[r as usize * n + c as usize]
        }
    };
    at(r0, c0) * (1.0 - fr) * (1.0 - fc)
        + at(r0, c0 + 1.0) * (1.0 - fr) * fc
        + at(r0 + 1.0, c0) * fr * (1.0 - fc)
        + at(r0 + 1.0, c0 + 1.0) * fr * fc
}

/// Rotate-and-sum projection, spatial Ram-Lak convolution and interpolated
/// backprojection, without any shared code.
fn reference_fbp(img: &[f64], n: usize, views: usize) -> Vec<f64> {
    let h = n as f64 / 2.0;
    let step = 0.25;
    let samples = (2.0 * n as f64 / step) as i64;
    let mut out = vec![0.0; n * n];
    for v in 0..views {
        let th = (v as f64 * 180.0 / views as f64).to_radians();
        let (u, d) = ((th.cos(), -th.sin()), (-th.sin(), -th.cos()));
        let proj: Vec<f64> = (0..n)
            .map(|b| {
                let s = b as f64 - h + 0.5;
                (-samples / 2..samples / 2)
                    .map(|k| {
                        let t = k as f64 * step;
                        bilinear(img, n, s * u.0 + t * d.0, s * u.1 + t * d.1)
                    })
                    .sum::<f64>()
                    * step
            })
            .collect();
        let kernel = |k: i64| -> f64 {
            if k == 0 {
                0.25
            } else if k % 2 == 0 {
                0.0
            } else {
                -1.0 / (PI * k as f64).powi(2)
            }
        };
        let filtered: Vec<f64> = (0..n as i64)
            .map(|i| (0..n as i64).map(|j| proj[j as usize] * kernel(i - j)).sum())
            .collect();
        for r in 0..n {
            for c in 0..n {
                let x = c as f64 - h + 0.5;
                let y = h - r as f64 - 0.5;
                let t = x * u.0 + y * u.1 + h - 0.5;
                if t >= 0.0 && t <= (n - 1) as f64 {
                    let i = (t.floor() as usize).min(n - 2);
                    let f = t - i as f64;
                    out[r * n + c] += filtered[i] * (1.0 - f) + filtered[i + 1] * f;
                }
            }
        }
    }
    out
}

fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let da: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let db: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    num / (da * db).sqrt()
}

#[test]
fn fbp_disc_correlates_with_ground_truth_and_reference() {
    let (n, views) = (32, 32);
    let gt = disc(n, 10.0);
    let angles = angle_set(views).unwrap();
    let m = build_system_matrix(n, &angles).unwrap();
    let ours = fbp_reconstruct(&project(&m, &gt).unwrap(), &angles, n).unwrap();
    let reference = reference_fbp(&gt, n, views);
    let (a, b, c) = (ncc(&ours.pixels, &gt), ncc(&reference, &gt), ncc(&ours.pixels, &reference));
    assert!(a >= 0.9, "fbp vs gt {a}");
    assert!(b >= 0.9, "reference vs gt {b}");
    assert!(c >= 0.9, "fbp vs reference {c}");
}

#[test]
fn ssim_matches_scikit_image() {
    // structural_similarity(data_range=15, win_size=7, gaussian_weights=False,
    //                       use_sample_covariance=False)
    let cases: [(fn(usize) -> usize, fn(usize) -> usize, f64); 3] = [
        (|i| (i * 7 + (i / 16) * 3) % 16, |i| (i * 5 + 1) % 16, 0.013387360488577362),
        (|i| (i * i) % 16, |i| (i * 3 + i / 16) % 16, 0.0020832902055285753),
        (|i| (i % 16).min(i / 16), |i| (i % 16).max(i / 16) / 2, 0.19869451561966667),
    ];
    for (fa, fb, want) in cases {
        let a = FloatImage::new(16, (0..256).map(|i| fa(i) as f64).collect()).unwrap();
        let b = FloatImage::new(16, (0..256).map(|i| fb(i) as f64).collect()).unwrap();
        let got = ssim(&a, &b, 15.0).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn annealing_finds_exhaustive_ground_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hits = 0;
    for case in 0..100 {
        let n = 4 + case % 13;
        let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mut quadratic = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.4) {
                    quadratic.insert((i, j), rng.gen_range(-4.0..4.0));
                }
            }
        }
        let q = QuboModel::new(linear, quadratic, 0.0).unwrap();
        let exact = exhaustive_solve(&q).unwrap().lowest_energy().unwrap();
        let schedule = AnnealSchedule::for_model(&q, 1000);
        let sa = simulated_annealing_sample(&q, 20, &schedule, case as u64).unwrap();
        if (sa.lowest_energy().unwrap() - exact).abs() <= 1e-9 * (1.0 + exact.abs()) {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits}/100");
}
