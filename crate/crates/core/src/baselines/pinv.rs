use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::forward::SystemMatrix;
use crate::image::FloatImage;

/// Singular values below `DEFAULT_RCOND * sigma_max` are treated as zero.
pub const DEFAULT_RCOND: f64 = 1e-10;

fn dense(m: &SystemMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), &m.to_dense())
}

fn decompose(m: &SystemMatrix, rcond: f64) -> Result<(SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, f64)> {
    if !(rcond >= 0.0 && rcond.is_finite()) {
        return Err(Error::InvalidValue(format!("rcond must be non-negative, got {rcond}")));
    }
    let svd = SVD::new(dense(m), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    Ok((svd, rcond * smax))
}

/// Dense Moore-Penrose pseudoinverse, `n x m` in row-major order.
pub fn pinv_matrix(m: &SystemMatrix, rcond: f64) -> Result<Vec<f64>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(vec![0.0; m.rows() * m.cols()]);
    }
    let (svd, eps) = decompose(m, rcond)?;
    let p = svd.pseudo_inverse(eps).map_err(|e| Error::InvalidValue(e.to_string()))?;
    Ok(p.transpose().as_slice().to_vec())
}

/// Minimum-norm least-squares image `M^+ y`.
pub fn pinv_reconstruct(m: &SystemMatrix, y: &[f64]) -> Result<FloatImage> {
    pinv_reconstruct_with(m, y, DEFAULT_RCOND)
}

pub fn pinv_reconstruct_with(m: &SystemMatrix, y: &[f64], rcond: f64) -> Result<FloatImage> {
    let n = m.cols();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidSize(format!("{n} columns is not a square grid")));
    }
    FloatImage::new(side, pinv_solve(m, y, rcond)?)
}

/// `M^+ y` for any shape of `M`.
pub fn pinv_solve(m: &SystemMatrix, y: &[f64], rcond: f64) -> Result<Vec<f64>> {
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(vec![0.0; m.cols()]);
    }
    let (svd, eps) = decompose(m, rcond)?;
    let x = svd
        .solve(&DVector::from_column_slice(y), eps)
        .map_err(|e| Error::InvalidValue(e.to_string()))?;
    Ok(x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{angle_set, build_system_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for l in 0..k {
                let v = a[i * k + l];
                for j in 0..m {
                    out[i * m + j] += v * b[l * m + j];
                }
            }
        }
        out
    }

    #[test]
    fn invertible_square() {
        let m = SystemMatrix::from_dense(4, 4, &[2.0, 0.0, 0.0, 1.0, 0.0, 3.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 4.0]).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = m.project(&x).unwrap();
        let got = pinv_reconstruct(&m, &y).unwrap();
        for (a, b) in got.pixels.iter().zip(x) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_matrix() {
        let m = SystemMatrix::from_dense(3, 4, &[0.0; 12]).unwrap();
        let got = pinv_reconstruct(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert!(got.pixels.iter().all(|&v| v == 0.0));
        assert!(pinv_matrix(&m, DEFAULT_RCOND).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn penrose_axioms_on_system_matrix() {
        let m = build_system_matrix(4, &angle_set(3).unwrap()).unwrap();
        let a = m.to_dense();
        let (r, c) = (m.rows(), m.cols());
        let p = pinv_matrix(&m, DEFAULT_RCOND).unwrap();
        let apa = matmul(&matmul(&a, &p, r, c, r), &a, r, r, c);
        let pap = matmul(&matmul(&p, &a, c, r, c), &p, c, c, r);
        assert!(apa.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-8));
        assert!(pap.iter().zip(&p).all(|(x, y)| (x - y).abs() < 1e-8));
    }

    #[test]
    fn dimension_mismatch() {
        let m = SystemMatrix::from_dense(2, 4, &[1.0; 8]).unwrap();
        assert!(pinv_reconstruct(&m, &[1.0]).is_err());
        assert!(pinv_reconstruct_with(&m, &[1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn least_squares_residual_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..6 * 4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let m = SystemMatrix::from_dense(6, 4, &data).unwrap();
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = pinv_reconstruct(&m, &y).unwrap();
        let r: Vec<f64> = m.project(&x.pixels).unwrap().iter().zip(&y).map(|(a, b)| a - b).collect();
        for g in m.backproject(&r).unwrap() {
            assert!(g.abs() < 1e-10);
        }
    }
}
