//! Experiment configuration: JSON or `key = value` text, validated up front.
//!
//! The text form takes one `key = value` per line; `#` starts a comment;
//! lists are comma-separated, optionally in brackets:
//!
//! ```text
//! s = 0.5
//! centers = -0.5, 0, 0.5
//! V = [0, 50, 0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::discretize::{barrier_height, fractional_constant, IntervalUnion};
use crate::error::{Error, Result};
use crate::fit::is_geometric_decreasing;
use crate::matmodel::{assemble_normalized, WellCoordinates, DEFAULT_TAU_REL};
use crate::perturb::{default_eps_list, RationalOrder, RescaledSystem};
use crate::wells::{default_delta_list, lp_exponent_bound, CounterexampleConfig, WellProblem};

/// Parameters shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Fractional order `s ∈ (0, 1)`.
    pub s: f64,
    /// Well centers in `(−1, 1)`, increasing.
    pub centers: Vec<f64>,
    /// Well half-width.
    pub eps: f64,
    /// Well values `V_i`.
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    /// Barrier parameters of the δ sweep (geometric, decreasing).
    pub delta_list: Vec<f64>,
    /// Barrier parameter of the counterexample.
    pub delta: f64,
    /// Rescaling parameters of the splitting sweep (geometric, decreasing).
    pub eps_list: Vec<f64>,
    /// Cells per unit length for the well problems.
    pub grid_n: usize,
    /// Cells per unit length of the reference interval in the splitting sweep.
    pub perturb_grid_n: usize,
    /// Factor in `V₂ ≥ factor · max(V₁, V₃, gap scale)`.
    pub v2_factor: f64,
    /// Relative zero threshold for sign counting.
    pub tau_rel: f64,
    /// Exponent `p` of the L²–L^p ratio.
    pub lp_exponent: f64,
    /// Coupling `a` of the reduced matrix scan.
    pub a: f64,
    /// Coupling `b` of the reduced matrix scan.
    pub b: f64,
    /// Coupling `c` of the reduced matrix scan.
    pub c: f64,
    /// Points per axis of the phase-diagram scan.
    pub scan_grid: usize,
    /// Seed for randomized checks.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ce = CounterexampleConfig::default();
        ExperimentConfig {
            s: ce.s,
            centers: ce.centers,
            eps: ce.eps,
            v: ce.values,
            delta_list: default_delta_list(),
            delta: ce.delta,
            eps_list: default_eps_list(),
            grid_n: ce.grid_n,
            perturb_grid_n: 200,
            v2_factor: ce.v2_factor,
            tau_rel: DEFAULT_TAU_REL,
            lp_exponent: 4.0,
            a: -0.7,
            b: -0.6,
            c: -0.8,
            scan_grid: 41,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads and parses a config file (JSON when it starts with `{`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses JSON or `key = value` text; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON: {e}")))?
        } else {
            parse_key_values(text)?
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Counterexample inputs derived from this config.
    pub fn counterexample(&self) -> CounterexampleConfig {
        CounterexampleConfig {
            s: self.s,
            centers: self.centers.clone(),
            eps: self.eps,
            values: self.v.clone(),
            delta: self.delta,
            grid_n: self.grid_n,
            v2_factor: self.v2_factor,
            tau_rel: self.tau_rel,
        }
    }

    /// Well problem of this config.
    pub fn well_problem(&self) -> Result<WellProblem> {
        WellProblem::new(IntervalUnion::new(self.centers.clone(), self.eps)?, self.v.clone(), self.s, self.grid_n)
    }

    /// Rescaled system of this config at the largest `ε` of the sweep.
    pub fn rescaled_system(&self) -> Result<RescaledSystem> {
        let eps = self.eps_list.first().copied().unwrap_or(0.0);
        RescaledSystem::new(
            self.centers.clone(),
            eps,
            RationalOrder::from_f64(self.s)?,
            self.v.clone(),
            self.perturb_grid_n,
        )
    }

    /// Checks every parameter against the preconditions of the modules,
    /// without running any eigensolve.
    pub fn validate(&self) -> Result<()> {
        fractional_constant(self.s)?;
        if !(self.tau_rel >= 0.0 && self.tau_rel < 1.0) {
            return Err(Error::Config(format!("tau_rel must lie in [0, 1), got {}", self.tau_rel)));
        }
        if !(self.v2_factor >= 0.0 && self.v2_factor.is_finite()) {
            return Err(Error::Config(format!("v2_factor must be non-negative, got {}", self.v2_factor)));
        }
        if self.scan_grid < 2 {
            return Err(Error::Config("scan_grid must be at least 2".into()));
        }
        if !(self.lp_exponent > lp_exponent_bound(self.s)) {
            return Err(Error::Config(format!(
                "lp_exponent must exceed {} for s = {}",
                lp_exponent_bound(self.s),
                self.s
            )));
        }
        for (name, list) in [("delta_list", &self.delta_list), ("eps_list", &self.eps_list)] {
            if list.len() < 2 || !is_geometric_decreasing(list) {
                return Err(Error::Config(format!(
                    "{name} must be geometric and strictly decreasing with at least two values"
                )));
            }
        }
        for &d in self.delta_list.iter().chain(std::iter::once(&self.delta)) {
            barrier_height(d)?;
        }
        assemble_normalized(&WellCoordinates::new(-0.5, -0.5, self.a, self.b, self.c))?;
        let p = self.well_problem()?;
        p.with_resolution(2 * self.grid_n)?;
        let sys = self.rescaled_system()?;
        for &e in &self.eps_list {
            sys.with_eps(e)?;
        }
        Ok(())
    }
}

fn parse_scalar(raw: &str, key: &str, line: usize) -> Result<Value> {
    let t = raw.trim();
    if let Ok(i) = t.parse::<i64>() {
        return Ok(Value::Number(i.into()));
    }
    if let Ok(x) = t.parse::<f64>() {
        return Number::from_f64(x)
            .map(Value::Number)
            .ok_or_else(|| Error::Config(format!("line {line}: {key} is not finite")));
    }
    Err(Error::Config(format!("line {line}: cannot parse {t:?} for {key}")))
}

fn parse_key_values(text: &str) -> Result<Value> {
    let mut map = Map::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
        let key = key.trim();
        let val = val.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {line}: empty key")));
        }
        let is_list = val.starts_with('[') || val.contains(',');
        let value = if is_list {
            let inner = val.trim_start_matches('[').trim_end_matches(']');
            let items = inner
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| parse_scalar(t, key, line))
                .collect::<Result<Vec<_>>>()?;
            Value::Array(items)
        } else {
            parse_scalar(val, key, line)?
        };
        if map.insert(key.to_string(), value).is_some() {
            return Err(Error::Config(format!("line {line}: duplicate key {key}")));
        }
    }
    Ok(Value::Object(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn text_and_json_agree() {
        let text = "# wells\ns = 0.5\ncenters = [-0.5, 0, 0.5]\nV = 0, 50, 0\ngrid_n = 200\n";
        let json = r#"{"s": 0.5, "centers": [-0.5, 0.0, 0.5], "V": [0, 50, 0], "grid_n": 200}"#;
        let a = ExperimentConfig::parse(text).unwrap();
        let b = ExperimentConfig::parse(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.grid_n, 200);
        assert_eq!(a.eps, 0.05);
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "s = half",
            "unknown = 1",
            "just text",
            "{\"s\": }",
            "grid_n = 1.5",
            "s = 1\ns = 2",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn validation_catches_preconditions() {
        let bad = [
            ExperimentConfig { s: 1.0, ..Default::default() },
            ExperimentConfig { eps: 0.3, ..Default::default() },
            ExperimentConfig { grid_n: 130, ..Default::default() },
            ExperimentConfig { delta_list: vec![1e-3, 1e-2], ..Default::default() },
            ExperimentConfig { delta: 0.0, ..Default::default() },
            ExperimentConfig { tau_rel: 2.0, ..Default::default() },
            ExperimentConfig { lp_exponent: 2.0, ..Default::default() },
            ExperimentConfig { v: vec![0.0, 1.0], ..Default::default() },
            ExperimentConfig { eps_list: vec![0.3, 0.15], ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
