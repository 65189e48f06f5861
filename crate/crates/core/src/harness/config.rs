use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::PhantomKind;
use crate::samplers::Budget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Fully determined systems (`V = N` unless views are given) over sizes.
    SizeSweep,
    /// Clean and noisy measurements of the same images, plus stability.
    NoiseEval,
    /// Fewer views than pixels per row; sweeps the view count.
    Underdetermined,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SizeSweep => "size_sweep",
            ExperimentKind::NoiseEval => "noise_eval",
            ExperimentKind::Underdetermined => "underdetermined",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qa,
    Hybrid,
    Fbp,
    Sart,
    Pinv,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Qa, Method::Hybrid, Method::Fbp, Method::Sart, Method::Pinv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qa => "qa",
            Method::Hybrid => "hybrid",
            Method::Fbp => "fbp",
            Method::Sart => "sart",
            Method::Pinv => "pinv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected qa, hybrid, fbp, sart or pinv)")))
    }
}

/// Ground-truth source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomSpec {
    SheppLogan,
    Foam,
    Tree,
    Snowflake,
    Molecule,
    /// 8x8 4-bit digit; row `seed` of `digits_csv` if given, otherwise the
    /// built-in digit-style generator with digit `seed mod 10`.
    Digit,
}

impl PhantomSpec {
    pub fn name(self) -> &'static str {
        match self {
            PhantomSpec::Digit => "digit",
            other => other.kind().map(PhantomKind::name).unwrap_or("digit"),
        }
    }

    pub fn kind(self) -> Option<PhantomKind> {
        match self {
            PhantomSpec::SheppLogan => Some(PhantomKind::SheppLogan),
            PhantomSpec::Foam => Some(PhantomKind::Foam),
            PhantomSpec::Tree => Some(PhantomKind::Tree),
            PhantomSpec::Snowflake => Some(PhantomKind::Snowflake),
            PhantomSpec::Molecule => Some(PhantomKind::Molecule),
            PhantomSpec::Digit => None,
        }
    }

    pub fn bit_depth(self) -> u32 {
        match self.kind() {
            Some(k) => k.bit_depth(),
            None => crate::image::DIGITS_BIT_DEPTH,
        }
    }
}

impl fmt::Display for PhantomSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSpec {
    /// Outer hybrid iterations; reproducible.
    Iterations(usize),
    /// Seconds of wall clock per hybrid run.
    TimeLimit(f64),
}

impl BudgetSpec {
    pub fn to_budget(self) -> Result<Budget> {
        match self {
            BudgetSpec::Iterations(0) => Err(Error::Config("iteration budget must be positive".into())),
            BudgetSpec::Iterations(k) => Ok(Budget::Iterations(k)),
            BudgetSpec::TimeLimit(s) if s.is_finite() && s > 0.0 => Ok(Budget::TimeLimit(Duration::from_secs_f64(s))),
            BudgetSpec::TimeLimit(s) => Err(Error::Config(format!("time limit must be positive, got {s}"))),
        }
    }
}

fn default_reads() -> usize {
    100
}

fn default_sweeps() -> usize {
    1000
}

fn default_subproblem() -> usize {
    12
}

fn default_budget() -> BudgetSpec {
    BudgetSpec::TimeLimit(5.0)
}

/// One experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub phantoms: Vec<PhantomSpec>,
    pub sizes: Vec<usize>,
    /// View counts. Absent means `V = N` for each size.
    #[serde(default)]
    pub views: Option<Vec<usize>>,
    pub methods: Vec<Method>,
    /// Bit depth for reconstruction; defaults to each phantom's own depth.
    #[serde(default)]
    pub bits: Option<u32>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget: BudgetSpec,
    /// Annealing reads for `qa` and for each hybrid sub-problem multiple.
    #[serde(default = "default_reads")]
    pub reads: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_subproblem")]
    pub subproblem_size: usize,
    #[serde(default)]
    pub digits_csv: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(csv) = &cfg.digits_csv {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.digits_csv = Some(dir.join(csv));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.phantoms.is_empty() {
            return fail("phantoms must not be empty".into());
        }
        if self.sizes.is_empty() {
            return fail("sizes must not be empty".into());
        }
        if self.methods.is_empty() {
            return fail("methods must not be empty".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        for &n in &self.sizes {
            if !n.is_power_of_two() || !(4..=32).contains(&n) {
                return fail(format!("size {n} is not a power of two in [4, 32]"));
            }
        }
        if let Some(v) = &self.views {
            if v.is_empty() || v.contains(&0) {
                return fail("views must be a non-empty list of positive counts".into());
            }
        }
        if self.kind == ExperimentKind::Underdetermined && self.views.is_none() {
            return fail("underdetermined experiments need an explicit views list".into());
        }
        if let Some(b) = self.bits {
            crate::image::check_bit_depth(b).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.phantoms.contains(&PhantomSpec::Digit) && self.sizes.iter().any(|&n| n != 8) {
            return fail("digit phantoms are 8x8; use sizes [8]".into());
        }
        if self.reads == 0 || self.sweeps == 0 || self.subproblem_size == 0 {
            return fail("reads, sweeps and subproblem_size must be positive".into());
        }
        self.budget.to_budget().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// View counts used for grid side `n`.
    pub fn views_for(&self, n: usize) -> Vec<usize> {
        self.views.clone().unwrap_or_else(|| vec![n])
    }

    /// Whether results in this configuration are independent of timing.
    pub fn is_reproducible(&self) -> bool {
        matches!(self.budget, BudgetSpec::Iterations(_)) || !self.methods.contains(&Method::Hybrid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "kind": "size_sweep",
        "phantoms": ["foam", "tree"],
        "sizes": [4, 8],
        "methods": ["qa", "hybrid", "fbp", "sart", "pinv"],
        "seeds": [1, 2],
        "budget": {"iterations": 20}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.kind, ExperimentKind::SizeSweep);
        assert_eq!(c.reads, 100);
        assert_eq!(c.budget, BudgetSpec::Iterations(20));
        assert_eq!(c.views_for(8), vec![8]);
        assert!(c.is_reproducible());
    }

    #[test]
    fn time_limit_budget() {
        let text = BASE.replace(r#"{"iterations": 20}"#, r#"{"time_limit": 2.5}"#);
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.budget.to_budget().unwrap(), Budget::TimeLimit(Duration::from_millis(2500)));
        assert!(!c.is_reproducible());
    }

    #[test]
    fn rejects_invalid() {
        for (from, to) in [
            ("[4, 8]", "[4, 6]"),
            ("[4, 8]", "[64]"),
            ("[4, 8]", "[]"),
            (r#""qa", "#, r#""ml_em", "#),
            ("[1, 2]", "[]"),
            (r#"{"iterations": 20}"#, r#"{"iterations": 0}"#),
            (r#""size_sweep""#, r#""underdetermined""#),
            (r#""seeds""#, r#""sedes""#),
        ] {
            let text = BASE.replace(from, to);
            assert!(ExperimentConfig::from_json(&text).is_err(), "{from} -> {to}");
        }
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("em".parse::<Method>().is_err());
    }
}
