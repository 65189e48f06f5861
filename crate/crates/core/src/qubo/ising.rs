use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qubo::QuboModel;

/// `E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + offset`, `s_i in {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub n: usize,
    pub h: Vec<f64>,
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, s: &[i8]) -> Result<f64> {
        if s.len() != self.n {
            return Err(Error::mismatch("spin assignment", self.n, s.len()));
        }
        if let Some(v) = s.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidValue(format!("spin {v} is not +-1")));
        }
        let lin: f64 = self.h.iter().zip(s).map(|(h, &v)| h * v as f64).sum();
        let quad: f64 = self
            .j
            .iter()
            .map(|(&(a, b), c)| c * (s[a] * s[b]) as f64)
            .sum();
        Ok(lin + quad + self.offset)
    }
}

/// Substitute `x = (s + 1) / 2`.
pub fn qubo_to_ising(q: &QuboModel) -> IsingModel {
    let mut h: Vec<f64> = q.linear.iter().map(|a| a / 2.0).collect();
    let mut offset = q.offset + q.linear.iter().sum::<f64>() / 2.0;
    let mut j = BTreeMap::new();
    for (&(a, b), &v) in &q.quadratic {
        let quarter = v / 4.0;
        j.insert((a, b), quarter);
        h[a] += quarter;
        h[b] += quarter;
        offset += quarter;
    }
    IsingModel {
        n: q.n,
        h,
        j,
        offset,
    }
}

/// Substitute `s = 2x - 1`.
pub fn ising_to_qubo(m: &IsingModel) -> QuboModel {
    let mut linear: Vec<f64> = m.h.iter().map(|h| 2.0 * h).collect();
    let mut offset = m.offset - m.h.iter().sum::<f64>();
    let mut quadratic = BTreeMap::new();
    for (&(a, b), &v) in &m.j {
        quadratic.insert((a, b), 4.0 * v);
        linear[a] -= 2.0 * v;
        linear[b] -= 2.0 * v;
        offset += v;
    }
    QuboModel {
        n: m.n,
        linear,
        quadratic,
        offset,
    }
}
