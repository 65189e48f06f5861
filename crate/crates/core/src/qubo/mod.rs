//! QUBO and Ising models for the least-squares reconstruction objective.
//!
//! For binary `x`, `||Mx - y||^2 = x^T (M^T M) x - 2 (M^T y)^T x + y^T y`.
//! Since `x_i^2 = x_i`, the diagonal of `M^T M` folds into the linear terms,
//! and each symmetric off-diagonal pair folds into one upper-triangular
//! coupler `2 (M^T M)_ij`.

mod io;
mod ising;

use std::collections::BTreeMap;

pub use io::{export_qubo, import_qubo, parse_qubo, qubo_string};
pub use ising::{ising_to_qubo, qubo_to_ising, IsingModel};

use crate::error::{Error, Result};
use crate::forward::{Entry, SystemMatrix};
use crate::image::check_bit_depth;

/// Coefficients with magnitude below this are dropped while building models.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-12;

/// `E(x) = sum_i linear_i x_i + sum_{i<j} quadratic_ij x_i x_j + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    pub n: usize,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl QuboModel {
    pub fn new(
        linear: Vec<f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
    ) -> Result<Self> {
        let model = Self {
            n: linear.len(),
            linear,
            quadratic,
            offset,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn empty(offset: f64) -> Self {
        Self {
            n: 0,
            linear: Vec::new(),
            quadratic: BTreeMap::new(),
            offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.linear.len() != self.n {
            return Err(Error::mismatch("linear terms", self.n, self.linear.len()));
        }
        if !self.offset.is_finite() || self.linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("QUBO coefficients must be finite".into()));
        }
        for (&(i, j), v) in &self.quadratic {
            if !(i < j && j < self.n) {
                return Err(Error::InvalidValue(format!("invalid coupler key ({i}, {j})")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite coupler ({i}, {j})")));
            }
        }
        Ok(())
    }

    /// Energy of a binary assignment.
    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::mismatch("assignment", self.n, x.len()));
        }
        if let Some(v) = x.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidValue(format!("non-binary entry {v}")));
        }
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[u8]) -> f64 {
        let lin: f64 = self
            .linear
            .iter()
            .zip(x)
            .filter(|(_, &b)| b == 1)
            .map(|(c, _)| c)
            .sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .filter(|(&(i, j), _)| x[i] == 1 && x[j] == 1)
            .map(|(_, c)| c)
            .sum();
        lin + quad + self.offset
    }

    /// Symmetric neighbour lists `(j, q_ij)` for every variable.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (&(i, j), &v) in &self.quadratic {
            adj[i].push((j, v));
            adj[j].push((i, v));
        }
        adj
    }

    /// Largest coefficient magnitude, linear or quadratic.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.linear
            .iter()
            .chain(self.quadratic.values())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Binary QUBO whose energy equals `||Mx - y||^2` for every `x in {0,1}^n`.
pub fn build_binary_qubo(m: &SystemMatrix, y: &[f64]) -> Result<QuboModel> {
    build_binary_qubo_with(m, y, DEFAULT_DROP_THRESHOLD)
}

pub fn build_binary_qubo_with(m: &SystemMatrix, y: &[f64], drop_below: f64) -> Result<QuboModel> {
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    Ok(qubo_from_rows(m.cols(), m.row_iter(), y, drop_below))
}

/// Accumulate the least-squares QUBO from sparse rows.
pub(crate) fn qubo_from_rows<'a>(
    n: usize,
    rows: impl Iterator<Item = &'a [Entry]>,
    y: &[f64],
    drop_below: f64,
) -> QuboModel {
    let mut linear = vec![0.0; n];
    let mut quadratic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (row, &yi) in rows.zip(y) {
        for (a, &(i, wi)) in row.iter().enumerate() {
            linear[i] += wi * wi - 2.0 * yi * wi;
            for &(j, wj) in &row[a + 1..] {
                let key = if i < j { (i, j) } else { (j, i) };
                *quadratic.entry(key).or_insert(0.0) += 2.0 * wi * wj;
            }
        }
    }
    for v in &mut linear {
        if v.abs() < drop_below {
            *v = 0.0;
        }
    }
    quadratic.retain(|_, v| v.abs() >= drop_below);
    QuboModel {
        n,
        linear,
        quadratic,
        offset: y.iter().map(|v| v * v).sum(),
    }
}

/// Binary expansion of non-negative integer pixels: pixel `i` is
/// `sum_r 2^r b_{i,r}` with variable index `i * bits + r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegerEncoding {
    pub bits: u32,
    pub pixels: usize,
}

impl IntegerEncoding {
    pub fn new(bits: u32, pixels: usize) -> Result<Self> {
        check_bit_depth(bits)?;
        Ok(Self { bits, pixels })
    }

    pub fn num_variables(&self) -> usize {
        self.pixels * self.bits as usize
    }

    pub fn variable(&self, pixel: usize, bit: u32) -> usize {
        pixel * self.bits as usize + bit as usize
    }

    pub fn max_value(&self) -> u32 {
        crate::image::max_value(self.bits)
    }

    pub fn decode(&self, b: &[u8]) -> Result<Vec<u32>> {
        if b.len() != self.num_variables() {
            return Err(Error::mismatch("encoded assignment", self.num_variables(), b.len()));
        }
        Ok(b.chunks(self.bits as usize)
            .map(|bits| {
                bits.iter()
                    .enumerate()
                    .map(|(r, &v)| (v as u32) << r)
                    .sum()
            })
            .collect())
    }

    pub fn encode(&self, x: &[u32]) -> Result<Vec<u8>> {
        if x.len() != self.pixels {
            return Err(Error::mismatch("integer image", self.pixels, x.len()));
        }
        let max = self.max_value();
        let mut out = Vec::with_capacity(self.num_variables());
        for &v in x {
            if v > max {
                return Err(Error::InvalidValue(format!("{v} exceeds {max}")));
            }
            out.extend((0..self.bits).map(|r| ((v >> r) & 1) as u8));
        }
        Ok(out)
    }

    /// Expand sparse rows: column `(i, r)` is `2^r` times column `i`.
    pub fn expand_row(&self, row: &[Entry]) -> Vec<Entry> {
        row.iter()
            .flat_map(|&(j, w)| {
                (0..self.bits).map(move |r| (j * self.bits as usize + r as usize, w * (1u64 << r) as f64))
            })
            .collect()
    }
}

/// QUBO over the binary expansion of R-bit integer pixels.
pub fn build_integer_qubo(m: &SystemMatrix, y: &[f64], bits: u32) -> Result<(QuboModel, IntegerEncoding)> {
    let enc = IntegerEncoding::new(bits, m.cols())?;
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    let rows: Vec<Vec<Entry>> = m.row_iter().map(|r| enc.expand_row(r)).collect();
    let model = qubo_from_rows(
        enc.num_variables(),
        rows.iter().map(Vec::as_slice),
        y,
        DEFAULT_DROP_THRESHOLD,
    );
    Ok((model, enc))
}

/// `||Mx - y||^2` evaluated directly.
pub fn residual_sq(m: &SystemMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    if y.len() != m.rows() {
        return Err(Error::mismatch("measurement vector", m.rows(), y.len()));
    }
    let mx = m.project(x)?;
    Ok(mx.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}
