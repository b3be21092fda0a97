//! Interchangeable discretizations of the fractional operators.
//!
//! Registered names: `spectral` (Fourier multipliers), `direct` (periodized
//! kernel sums with singular correction) and `direct-naive` (nearest-image
//! kernel cut at `L/2`, singular cell skipped, no correction).

use serde_json::Value;

use crate::error::Result;
use crate::grid::{MatrixField, ScalarField, VectorField};
use crate::quadrature::{self, QuadratureScheme};
use crate::registry::{parse_params, Registry};
use crate::spectral;

pub trait OperatorPath: Send + Sync {
    fn name(&self) -> &str;

    fn gradient(&self, u: &ScalarField, s: f64) -> Result<VectorField>;

    fn jacobian(&self, u: &VectorField, s: f64) -> Result<MatrixField>;

    fn divergence(&self, phi: &VectorField, s: f64) -> Result<ScalarField>;

    /// Recovers the mean-free part of `u` from `V = D^s u`.
    fn reconstruct(&self, v: &VectorField, s: f64) -> Result<ScalarField>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SpectralPath;

impl OperatorPath for SpectralPath {
    fn name(&self) -> &str {
        "spectral"
    }

    fn gradient(&self, u: &ScalarField, s: f64) -> Result<VectorField> {
        spectral::fractional_gradient(u, s)
    }

    fn jacobian(&self, u: &VectorField, s: f64) -> Result<MatrixField> {
        spectral::fractional_gradient(u, s)
    }

    fn divergence(&self, phi: &VectorField, s: f64) -> Result<ScalarField> {
        spectral::fractional_divergence(phi, s)
    }

    fn reconstruct(&self, v: &VectorField, s: f64) -> Result<ScalarField> {
        spectral::ftc_reconstruct(v, s)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DirectPath {
    name: &'static str,
    pub scheme: QuadratureScheme,
}

impl DirectPath {
    pub fn new(scheme: QuadratureScheme) -> Self {
        DirectPath { name: "direct", scheme }
    }

    pub fn naive() -> Self {
        DirectPath {
            name: "direct-naive",
            scheme: QuadratureScheme::naive(),
        }
    }
}

impl OperatorPath for DirectPath {
    fn name(&self) -> &str {
        self.name
    }

    fn gradient(&self, u: &ScalarField, s: f64) -> Result<VectorField> {
        quadrature::fractional_gradient_direct(u, s, &self.scheme)
    }

    fn jacobian(&self, u: &VectorField, s: f64) -> Result<MatrixField> {
        quadrature::fractional_gradient_direct(u, s, &self.scheme)
    }

    fn divergence(&self, phi: &VectorField, s: f64) -> Result<ScalarField> {
        quadrature::fractional_divergence_direct(phi, s, &self.scheme)
    }

    fn reconstruct(&self, v: &VectorField, s: f64) -> Result<ScalarField> {
        quadrature::ftc_reconstruct_direct(v, s, &self.scheme)
    }
}

pub type PathRegistry = Registry<dyn OperatorPath>;

/// `direct` accepts an optional `scheme` object, e.g.
/// `{"scheme": {"images": {"type": "periodized", "shells": 2}, "singular_correction": true}}`.
pub fn registry() -> PathRegistry {
    Registry::new("operator path")
        .with("spectral", spectral_path)
        .with("direct", direct_path)
        .with("direct-naive", naive_path)
}

fn spectral_path(_: &Value, _: &()) -> Result<Box<dyn OperatorPath>> {
    Ok(Box::new(SpectralPath))
}

fn direct_path(params: &Value, _: &()) -> Result<Box<dyn OperatorPath>> {
    let scheme = match params.get("scheme") {
        Some(v) => parse_params("direct scheme", v)?,
        None => QuadratureScheme::default(),
    };
    Ok(Box::new(DirectPath::new(scheme)))
}

fn naive_path(_: &Value, _: &()) -> Result<Box<dyn OperatorPath>> {
    Ok(Box::new(DirectPath::naive()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{relative_l2, Grid};
    use crate::testfn::{sample_scalar, Gaussian};

    #[test]
    fn all_paths_agree_roughly() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        let u = sample_scalar(&Gaussian::new(1.0), &g).unwrap();
        let reg = registry();
        assert_eq!(reg.names(), vec!["direct", "direct-naive", "spectral"]);
        let reference = SpectralPath.gradient(&u, 0.4).unwrap();
        for name in reg.names() {
            let path = reg.create(name, &Value::Null, &()).unwrap();
            assert_eq!(path.name(), name);
            let d = path.gradient(&u, 0.4).unwrap();
            assert!(relative_l2(&d, &reference).unwrap() < 0.3, "{name}");
        }
    }

    #[test]
    fn direct_scheme_is_configurable() {
        let spec = serde_json::json!({"scheme": {"images": {"type": "nearest-image", "cutoff": 4.0}, "singular_correction": true}});
        assert!(registry().create("direct", &spec, &()).is_ok());
        let bad = serde_json::json!({"scheme": {"images": "periodic"}});
        assert!(registry().create("direct", &bad, &()).is_err());
    }
}
