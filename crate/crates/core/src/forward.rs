//! Parallel-beam emission geometry: sparse system matrix built from exact
//! ray-pixel chord lengths, forward projection and its adjoint.
//!
//! Image coordinates put the grid centre at the origin with x to the right
//! and y up; pixel `(row, col)` covers `[col - N/2, col - N/2 + 1]` in x and
//! `[N/2 - row - 1, N/2 - row]` in y. A view at angle `theta` has rays
//! travelling along `(-sin theta, -cos theta)` (straight down at 0 degrees,
//! rotating clockwise) and detector axis `(cos theta, -sin theta)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::{map_range, Execution};

/// Chords shorter than this are treated as numerical noise and dropped.
const MIN_CHORD: f64 = 1e-12;

/// `V` equally spaced view angles in degrees, `k * 180 / V`.
pub fn angle_set(views: usize) -> Result<Vec<f64>> {
    if views == 0 {
        return Err(Error::InvalidSize("at least one view is required".into()));
    }
    Ok((0..views).map(|k| k as f64 * 180.0 / views as f64).collect())
}

pub type Entry = (usize, f64);

/// Row-sparse `m x n` matrix with `m = views * bins`, rows in view-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    views: usize,
    bins: usize,
    cols: usize,
    rows: Vec<Vec<Entry>>,
}

impl SystemMatrix {
    /// Build from explicit rows, treated as a single view of `rows.len()` bins.
    pub fn from_rows(cols: usize, rows: Vec<Vec<Entry>>) -> Result<Self> {
        let views = 1;
        let bins = rows.len();
        Self::from_view_rows(views, bins, cols, rows)
    }

    pub fn from_view_rows(
        views: usize,
        bins: usize,
        cols: usize,
        mut rows: Vec<Vec<Entry>>,
    ) -> Result<Self> {
        if rows.len() != views * bins {
            return Err(Error::mismatch("system matrix rows", views * bins, rows.len()));
        }
        for row in &mut rows {
            row.retain(|&(_, w)| w != 0.0);
            row.sort_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidValue(format!("duplicate column {}", w[0].0)));
                }
            }
            if let Some(&(c, w)) = row.iter().find(|&&(c, w)| c >= cols || !w.is_finite() || w < 0.0) {
                return Err(Error::InvalidValue(format!("invalid entry ({c}, {w})")));
            }
        }
        Ok(Self {
            views,
            bins,
            cols,
            rows,
        })
    }

    /// Dense row-major data, `m x n`, as a single view.
    pub fn from_dense(m: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::mismatch("dense matrix data", m * n, data.len()));
        }
        let rows = data
            .chunks(n.max(1))
            .take(m)
            .map(|r| r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect())
            .collect();
        Self::from_rows(n, if n == 0 { vec![Vec::new(); m] } else { rows })
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[Entry] {
        &self.rows[i]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[Entry]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// Rows belonging to view `v`.
    pub fn view_rows(&self, v: usize) -> &[Vec<Entry>] {
        &self.rows[v * self.bins..(v + 1) * self.bins]
    }

    /// Submatrix made of view `v`'s rows.
    pub fn view(&self, v: usize) -> SystemMatrix {
        SystemMatrix {
            views: 1,
            bins: self.bins,
            cols: self.cols,
            rows: self.view_rows(v).to_vec(),
        }
    }

    /// Column-sparse copy: for each pixel, the `(row, weight)` pairs.
    pub fn columns(&self) -> Vec<Vec<Entry>> {
        let mut cols = vec![Vec::new(); self.cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                cols[j].push((i, w));
            }
        }
        cols
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows() * self.cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[i * self.cols + j] = w;
            }
        }
        out
    }

    /// Text dump: `m n nnz` followed by `row col weight` triples.
    pub fn dump_string(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows(), self.cols, self.nnz());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let _ = writeln!(s, "{i} {j} {w:.16e}");
            }
        }
        s
    }

    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.dump_string()).map_err(|e| Error::io(path, e))
    }

    /// `y = Mx`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::mismatch("image vector", self.cols, x.len()));
        }
        Ok(self.rows.iter().map(|row| dot_row(row, x)).collect())
    }

    /// `M^T y`.
    pub fn backproject(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows() {
            return Err(Error::mismatch("measurement vector", self.rows(), y.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j] += w * yi;
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot_row(row: &[Entry], x: &[f64]) -> f64 {
    row.iter().map(|&(j, w)| w * x[j]).sum()
}

/// Snap values within rounding distance of zero to exactly zero so axis-aligned
/// views do not pick up spurious crossings.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Unit detector axis and ray direction for an angle in degrees.
pub fn view_axes(angle_deg: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (s, c) = (snap(s), snap(c));
    ((c, -s), (-s, -c))
}

/// Signed detector coordinate of bin `b` for `n` bins.
#[inline]
pub fn bin_offset(b: usize, n: usize) -> f64 {
    b as f64 - n as f64 / 2.0 + 0.5
}

/// Chord lengths of one ray through an `n x n` grid.
///
/// Crossing parameters with every vertical and horizontal grid line are
/// merged (Siddon), and each segment is assigned to the pixel containing its
/// midpoint. A midpoint that lies exactly on a grid line belongs to the
/// pixel on the positive side of it.
pub fn trace_ray(n: usize, origin: (f64, f64), dir: (f64, f64)) -> Vec<Entry> {
    let h = n as f64 / 2.0;
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (p, d) in [(origin.0, dir.0), (origin.1, dir.1)] {
        if d == 0.0 {
            if p < -h || p > h {
                return Vec::new();
            }
        } else {
            let a = (-h - p) / d;
            let b = (h - p) / d;
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if !(t_hi - t_lo > MIN_CHORD) {
        return Vec::new();
    }

    let mut ts = Vec::with_capacity(2 * n + 4);
    ts.push(t_lo);
    ts.push(t_hi);
    for (p, d) in [(origin.0, dir.0), (origin.1, dir.1)] {
        if d == 0.0 {
            continue;
        }
        for k in 0..=n {
            let t = (k as f64 - h - p) / d;
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.total_cmp(b));

    let mut entries: Vec<Entry> = Vec::with_capacity(2 * n);
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= MIN_CHORD {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let mx = origin.0 + mid * dir.0;
        let my = origin.1 + mid * dir.1;
        let col = (mx + h).floor();
        let row_up = (my + h).floor();
        if col < 0.0 || row_up < 0.0 || col >= n as f64 || row_up >= n as f64 {
            continue;
        }
        let row = n - 1 - row_up as usize;
        let idx = row * n + col as usize;
        match entries.iter_mut().find(|e| e.0 == idx) {
            Some(e) => e.1 += len,
            None => entries.push((idx, len)),
        }
    }
    entries.sort_by_key(|e| e.0);
    entries
}

/// Build the `V*N x N^2` system matrix for an `n x n` grid.
pub fn build_system_matrix(n: usize, angles: &[f64]) -> Result<SystemMatrix> {
    build_system_matrix_with(n, angles, Execution::default())
}

pub fn build_system_matrix_with(n: usize, angles: &[f64], exec: Execution) -> Result<SystemMatrix> {
    if n == 0 {
        return Err(Error::InvalidSize("grid side must be positive".into()));
    }
    if angles.is_empty() {
        return Err(Error::InvalidSize("at least one view is required".into()));
    }
    let rows = map_range(exec, angles.len() * n, |r| {
        let (u, d) = view_axes(angles[r / n]);
        let s = bin_offset(r % n, n);
        trace_ray(n, (s * u.0, s * u.1), d)
    });
    Ok(SystemMatrix {
        views: angles.len(),
        bins: n,
        cols: n * n,
        rows,
    })
}

/// Measurements laid out view-major: all bins of view 0, then view 1, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub views: usize,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn new(views: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != views * bins {
            return Err(Error::mismatch("sinogram values", views * bins, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("sinogram values must be finite".into()));
        }
        Ok(Self { views, bins, values })
    }

    pub fn view(&self, v: usize) -> &[f64] {
        &self.values[v * self.bins..(v + 1) * self.bins]
    }

    /// One line per view, bins comma separated, shortest round-trip floats.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for v in 0..self.views {
            let line: Vec<String> = self.view(v).iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = Vec::new();
        let mut bins = None;
        let mut views = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(path, i + 1, format!("invalid value {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            match bins {
                None => bins = Some(row.len()),
                Some(b) if b != row.len() => {
                    return Err(Error::parse(path, i + 1, format!("expected {b} bins, found {}", row.len())))
                }
                _ => {}
            }
            values.extend(row);
            views += 1;
        }
        let bins = bins.ok_or_else(|| Error::parse(path, 1, "empty sinogram"))?;
        Sinogram::new(views, bins, values)
    }
}

/// Project `x` through `m` into a sinogram.
pub fn project(m: &SystemMatrix, x: &[f64]) -> Result<Sinogram> {
    Sinogram::new(m.views(), m.bins(), m.project(x)?)
}

/// Adjoint projection `M^T y`.
pub fn backproject(m: &SystemMatrix, y: &Sinogram) -> Result<Vec<f64>> {
    m.backproject(&y.values)
}
