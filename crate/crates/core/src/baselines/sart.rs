use crate::error::{Error, Result};
use crate::forward::{dot_row, SystemMatrix};
use crate::image::FloatImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SartOptions {
    pub iterations: usize,
    pub relaxation: f64,
}

impl Default for SartOptions {
    fn default() -> Self {
        Self {
            iterations: 2,
            relaxation: 0.15,
        }
    }
}

/// SART starting from zero, one view at a time in angle order.
///
/// For view `v` with rows `M_v`, every pixel is updated by
/// `lambda / c_j * sum_i M_ij (y_i - M_i x) / r_i`, where `r_i` and `c_j` are
/// the row and column sums of `M_v`. Empty rows and columns are skipped.
pub fn sart_reconstruct(m: &SystemMatrix, y: &[f64], opts: SartOptions) -> Result<FloatImage> {
    sart_iterates(m, y, opts).map(|mut xs| xs.pop().expect("iterate zero is always present"))
}

/// Image after every full iteration, starting with the zero image.
pub fn sart_iterates(m: &SystemMatrix, y: &[f64], opts: SartOptions) -> Result<Vec<FloatImage>> {
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::InvalidValue(format!("relaxation {} outside (0, 2)", opts.relaxation)));
    }
    let n = m.cols();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidSize(format!("{n} columns is not a square grid")));
    }
    let bins = m.bins();
    let per_view: Vec<(Vec<f64>, Vec<f64>)> = (0..m.views())
        .map(|v| {
            let rows = m.view_rows(v);
            let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
            let mut col_sums = vec![0.0; n];
            for r in rows {
                for &(j, w) in r {
                    col_sums[j] += w;
                }
            }
            (row_sums, col_sums)
        })
        .collect();

    let mut x = vec![0.0; n];
    let mut out = vec![FloatImage::new(side, x.clone())?];
    let mut acc = vec![0.0; n];
    for _ in 0..opts.iterations {
        for (v, (row_sums, col_sums)) in per_view.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (b, row) in m.view_rows(v).iter().enumerate() {
                if row_sums[b] == 0.0 {
                    continue;
                }
                let r = (y[v * bins + b] - dot_row(row, &x)) / row_sums[b];
                for &(j, w) in row {
                    acc[j] += w * r;
                }
            }
            for j in 0..n {
                if col_sums[j] != 0.0 {
                    x[j] += opts.relaxation * acc[j] / col_sums[j];
                }
            }
        }
        out.push(FloatImage::new(side, x.clone())?);
    }
    Ok(out)
}
