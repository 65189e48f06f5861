//! Plain-text QUBO exchange format.
//!
//! ```text
//! n offset
//! i i linear_i
//! i j quadratic_ij      (i < j)
//! ```
//! Floats are written in shortest round-trip form so import is exact.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::qubo::QuboModel;

pub fn qubo_string(q: &QuboModel) -> String {
    let mut s = format!("{} {:?}\n", q.n, q.offset);
    for (i, &v) in q.linear.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(s, "{i} {i} {v:?}");
        }
    }
    for (&(i, j), &v) in &q.quadratic {
        let _ = writeln!(s, "{i} {j} {v:?}");
    }
    s
}

pub fn export_qubo(q: &QuboModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, qubo_string(q)).map_err(|e| Error::io(path, e))
}

pub fn import_qubo(path: impl AsRef<Path>) -> Result<QuboModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qubo(&text, path)
}

pub fn parse_qubo(text: &str, origin: &Path) -> Result<QuboModel> {
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(err(hline, format!("header must be \"n offset\", got {header:?}")));
    }
    let n: usize = head[0]
        .parse()
        .map_err(|_| err(hline, format!("invalid variable count {:?}", head[0])))?;
    let offset = parse_float(head[1]).ok_or_else(|| err(hline, format!("invalid offset {:?}", head[1])))?;

    let mut linear = vec![0.0; n];
    let mut seen_linear = HashSet::new();
    let mut quadratic = BTreeMap::new();
    for (line, content) in lines {
        let tok: Vec<&str> = content.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(err(line, format!("expected \"i j value\", got {content:?}")));
        }
        let i: usize = tok[0].parse().map_err(|_| err(line, format!("invalid index {:?}", tok[0])))?;
        let j: usize = tok[1].parse().map_err(|_| err(line, format!("invalid index {:?}", tok[1])))?;
        let v = parse_float(tok[2]).ok_or_else(|| err(line, format!("invalid value {:?}", tok[2])))?;
        if i >= n || j >= n {
            return Err(err(line, format!("index out of range for n = {n}")));
        }
        if i == j {
            if !seen_linear.insert(i) {
                return Err(err(line, format!("duplicate linear term {i}")));
            }
            linear[i] = v;
        } else if j < i {
            return Err(err(line, format!("quadratic key requires i < j, got ({i}, {j})")));
        } else if quadratic.insert((i, j), v).is_some() {
            return Err(err(line, format!("duplicate quadratic term ({i}, {j})")));
        }
    }
    QuboModel::new(linear, quadratic, offset)
}

fn parse_float(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}
