//! JSON experiment configs for the sweep subcommands.
//!
//! Grid parameters sit at the top level as `n`, `N` and `L`. Test functions
//! are objects with a `spec` name, e.g. `{"spec": "bump", "radius": 3.0}`.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::analysis::{DomainMask, Exponent, OmegaSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::testfn::{self, sample_scalar, sample_vector};
use crate::variational::{density, DensityContext, Smoothness, SweepOptions, VariationalProblem};

fn default_p() -> f64 {
    2.0
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    2000
}

fn default_true() -> bool {
    true
}

fn default_omega() -> OmegaSpec {
    OmegaSpec::Full
}

/// Config of the `inequalities` subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub specs: Vec<Value>,
    pub s_grid: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    pub omega: OmegaSpec,
}

impl InequalityConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length, self.points)
    }

    pub fn exponent(&self) -> Result<Exponent> {
        Exponent::new(self.p)
    }

    pub fn mask(&self) -> Result<DomainMask> {
        DomainMask::new(&self.omega, &self.grid()?)
    }
}

/// Config of the `gamma` subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    /// Energy density object with a `kind` field.
    #[serde(rename = "W")]
    pub w: Value,
    #[serde(default = "default_omega")]
    pub omega: OmegaSpec,
    /// Complementary datum; zero when absent.
    #[serde(default)]
    pub g: Option<Value>,
    /// Fidelity target; zero when absent.
    #[serde(default)]
    pub f: Option<Value>,
    /// Orders in `(0, 1)` and the token `"local"`.
    pub s_grid: Vec<Value>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub continuation: bool,
}

impl GammaConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length, self.points)
    }

    /// The problem at the local order, plus the parsed order grid and solver options.
    pub fn build(&self) -> Result<(VariationalProblem, Vec<Smoothness>, SweepOptions)> {
        let grid = self.grid()?;
        let mut ctx = DensityContext::new(grid);
        if let Some(f) = sample_datum(self.f.as_ref(), &grid)? {
            ctx = ctx.with_target(f);
        }
        let w = density::registry().create_from_spec("kind", &self.w, &ctx)?;
        let g = sample_datum(self.g.as_ref(), &grid)?.unwrap_or_else(|| VectorField::zeros(grid));
        let mask = DomainMask::new(&self.omega, &grid)?;
        let prob = VariationalProblem::new(Arc::from(w), mask, g, Smoothness::Local)?;
        let orders = self.s_grid.iter().map(Smoothness::from_json).collect::<Result<Vec<_>>>()?;
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(Error::param("tol must be >= 0 and max_iter >= 1"));
        }
        let opts = SweepOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            continuation: self.continuation,
        };
        Ok((prob, orders, opts))
    }
}

/// Samples a vector datum. `null` and `{"spec": "zero"}` give `None`; scalar
/// test functions are accepted when `n = 1`.
pub fn sample_datum(spec: Option<&Value>, grid: &Grid) -> Result<Option<VectorField>> {
    let Some(spec) = spec else { return Ok(None) };
    if spec.is_null() || spec.get("spec").and_then(Value::as_str) == Some("zero") {
        return Ok(None);
    }
    let f = testfn::registry().create_from_spec("spec", spec, grid)?;
    if f.is_vector() {
        return sample_vector(f.as_ref(), grid).map(Some);
    }
    if grid.dim() != 1 {
        return Err(Error::param(format!(
            "{} is scalar valued; vector data in n = {} need a vector test function",
            f.name(),
            grid.dim()
        )));
    }
    Ok(Some(VectorField::from_scalars(vec![sample_scalar(f.as_ref(), grid)?])?))
}

/// Parses `text` into a typed config and also returns the raw JSON for echoing.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<(T, Value)> {
    let raw: Value = serde_json::from_str(text)?;
    let typed = serde_json::from_value(raw.clone())?;
    Ok((typed, raw))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, Value)> {
    parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn gamma_config_builds() {
        let text = json!({
            "n": 1, "N": 64, "L": 16.0,
            "W": {"kind": "convex-quadratic"},
            "omega": {"type": "ball", "r": 4.0},
            "f": {"spec": "bump", "radius": 3.0},
            "s_grid": [0.7, "local"],
        })
        .to_string();
        let (cfg, raw): (GammaConfig, Value) = parse(&text).unwrap();
        assert_eq!(raw["N"], 64);
        let (prob, orders, opts) = cfg.build().unwrap();
        assert_eq!(orders.len(), 2);
        assert!(opts.continuation);
        assert_eq!(prob.density().kind(), "convex-quadratic");
    }

    #[test]
    fn bad_configs_fail() {
        assert!(parse::<GammaConfig>("{").is_err());
        assert!(parse::<GammaConfig>(&json!({"n": 1, "N": 64, "L": 16.0, "W": {}, "s_grid": [], "x": 1}).to_string()).is_err());
        let (cfg, _): (GammaConfig, Value) = parse(
            &json!({"n": 2, "N": 32, "L": 16.0, "W": {"kind": "convex-quadratic"}, "f": {"spec": "bump", "radius": 3.0}, "s_grid": [0.5]})
                .to_string(),
        )
        .unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn inequality_config_parses() {
        let (cfg, _): (InequalityConfig, Value) = parse(
            &json!({"n": 1, "N": 128, "L": 16.0, "specs": [{"spec": "bump", "radius": 3.0}], "s_grid": [0.5], "omega": {"type": "ball", "r": 4.0}})
                .to_string(),
        )
        .unwrap();
        assert_eq!(cfg.p, 2.0);
        assert!(cfg.mask().is_ok());
    }
}
