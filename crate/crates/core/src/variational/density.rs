//! Energy densities `W(x, y, F)` for maps `u: ℝ^n → ℝ^n`.
//!
//! `y` is the value `u(x)` and `F` the row-major `n×n` (fractional) gradient.
//! Besides value and derivatives, each density evaluates the increment
//! `W(y + dy, F + dF) - W(y, F)` without cancellation, which the line search
//! relies on once energy changes approach roundoff of the energy itself.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::minors::det;
use crate::registry::{parse_params, Registry};

/// Coercivity data: `W(x, y, F) ≥ a(x) + c|F|^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Growth {
    pub c: f64,
    pub p: f64,
}

pub trait EnergyDensity: Send + Sync {
    fn kind(&self) -> &str;

    fn growth(&self) -> Growth;

    /// Lower-order term `a(x)` at sample `point`.
    fn lower_order(&self, point: usize) -> f64;

    fn value(&self, point: usize, y: &[f64], f: &[f64]) -> f64;

    /// Writes `∂_y W` into `dy` and `∂_F W` into `df`.
    fn derivatives(&self, point: usize, y: &[f64], f: &[f64], dy: &mut [f64], df: &mut [f64]);

    /// `W(y + dy, F + dF) - W(y, F)`.
    fn increment(&self, point: usize, y: &[f64], f: &[f64], dy: &[f64], df: &[f64]) -> f64;
}

/// Data a density may depend on besides `(y, F)`.
#[derive(Clone, Debug)]
pub struct DensityContext {
    pub grid: Grid,
    /// Target of the fidelity term `λ|y - f(x)|²`; zero when absent.
    pub f: Option<Arc<VectorField>>,
    /// Lower-order term `a(x)`; zero when absent.
    pub a: Option<Arc<ScalarField>>,
}

impl DensityContext {
    pub fn new(grid: Grid) -> Self {
        DensityContext { grid, f: None, a: None }
    }

    pub fn with_target(mut self, f: VectorField) -> Self {
        self.f = Some(Arc::new(f));
        self
    }

    pub fn with_lower_order(mut self, a: ScalarField) -> Self {
        self.a = Some(Arc::new(a));
        self
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(b + δ)^q - b^q` for `b ≥ 0`, `b + δ ≥ 0`, accurate when `|δ| ≪ b`.
fn pow_diff(b: f64, delta: f64, q: f64) -> f64 {
    if b <= 0.0 {
        return (b + delta).max(0.0).powf(q);
    }
    let ratio = delta / b;
    if ratio <= -1.0 {
        return -b.powf(q);
    }
    b.powf(q) * (q * ratio.ln_1p()).exp_m1()
}

/// `det(A + B) - det(A)` as the sum of mixed determinants that take at least
/// one column from `B`.
fn det_increment(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    let mut mixed = [0.0; 16];
    for mask in 1u32..(1 << n) {
        for i in 0..n {
            for j in 0..n {
                mixed[i * n + j] = if mask & (1 << j) != 0 { b[i * n + j] } else { a[i * n + j] };
            }
        }
        total += det(&mixed[..n * n], n);
    }
    total
}

/// Shared fidelity term `λ|y - f(x)|²` and lower-order term `a(x)`.
#[derive(Clone, Debug)]
struct Fidelity {
    lambda: f64,
    target: Option<Arc<VectorField>>,
    a: Option<Arc<ScalarField>>,
    a_const: f64,
}

impl Fidelity {
    fn new(lambda: f64, a_const: f64, ctx: &DensityContext) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("fidelity weight must be >= 0, got {lambda}")));
        }
        if let Some(f) = &ctx.f {
            ctx.grid.ensure_same(crate::grid::Field::grid(f.as_ref()))?;
        }
        Ok(Fidelity {
            lambda,
            target: ctx.f.clone(),
            a: ctx.a.clone(),
            a_const,
        })
    }

    fn residual(&self, point: usize, y: &[f64], out: &mut [f64]) {
        for (i, (o, yi)) in out.iter_mut().zip(y).enumerate() {
            *o = yi - self.target.as_ref().map_or(0.0, |f| f.component(i)[point]);
        }
    }

    fn a(&self, point: usize) -> f64 {
        self.a_const + self.a.as_ref().map_or(0.0, |a| a.values()[point])
    }

    fn value(&self, point: usize, y: &[f64]) -> f64 {
        let mut r = [0.0; 4];
        self.residual(point, y, &mut r[..y.len()]);
        self.lambda * dot(&r[..y.len()], &r[..y.len()]) + self.a(point)
    }

    fn derivative(&self, point: usize, y: &[f64], dy: &mut [f64]) {
        self.residual(point, y, dy);
        dy.iter_mut().for_each(|v| *v *= 2.0 * self.lambda);
    }

    fn increment(&self, point: usize, y: &[f64], dy: &[f64]) -> f64 {
        let mut r = [0.0; 4];
        self.residual(point, y, &mut r[..y.len()]);
        self.lambda * (2.0 * dot(&r[..y.len()], dy) + dot(dy, dy))
    }
}

/// `c|F|² + λ|y - f|² + a`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    c: f64,
    fidelity: Fidelity,
}

/// `c|F|^p + λ|y - f|² + a`.
#[derive(Clone, Debug)]
pub struct Power {
    c: f64,
    p: f64,
    fidelity: Fidelity,
}

/// `c|F|⁴ + d (det F)² + e |det F|^q + λ|y - f|² + a`, a convex function of
/// `(F, det F)` and hence polyconvex.
#[derive(Clone, Debug)]
pub struct Polyconvex {
    c: f64,
    d: f64,
    e: f64,
    q: f64,
    n: usize,
    fidelity: Fidelity,
}

impl EnergyDensity for Quadratic {
    fn kind(&self) -> &str {
        "convex-quadratic"
    }

    fn growth(&self) -> Growth {
        Growth { c: self.c, p: 2.0 }
    }

    fn lower_order(&self, point: usize) -> f64 {
        self.fidelity.a(point)
    }

    fn value(&self, point: usize, y: &[f64], f: &[f64]) -> f64 {
        self.c * dot(f, f) + self.fidelity.value(point, y)
    }

    fn derivatives(&self, point: usize, y: &[f64], f: &[f64], dy: &mut [f64], df: &mut [f64]) {
        self.fidelity.derivative(point, y, dy);
        for (o, v) in df.iter_mut().zip(f) {
            *o = 2.0 * self.c * v;
        }
    }

    fn increment(&self, point: usize, y: &[f64], f: &[f64], dy: &[f64], df: &[f64]) -> f64 {
        self.c * (2.0 * dot(f, df) + dot(df, df)) + self.fidelity.increment(point, y, dy)
    }
}

impl EnergyDensity for Power {
    fn kind(&self) -> &str {
        "convex-power"
    }

    fn growth(&self) -> Growth {
        Growth { c: self.c, p: self.p }
    }

    fn lower_order(&self, point: usize) -> f64 {
        self.fidelity.a(point)
    }

    fn value(&self, point: usize, y: &[f64], f: &[f64]) -> f64 {
        self.c * dot(f, f).powf(self.p / 2.0) + self.fidelity.value(point, y)
    }

    fn derivatives(&self, point: usize, y: &[f64], f: &[f64], dy: &mut [f64], df: &mut [f64]) {
        self.fidelity.derivative(point, y, dy);
        let norm2 = dot(f, f);
        let scale = if norm2 > 0.0 {
            self.c * self.p * norm2.powf(self.p / 2.0 - 1.0)
        } else {
            0.0
        };
        for (o, v) in df.iter_mut().zip(f) {
            *o = scale * v;
        }
    }

    fn increment(&self, point: usize, y: &[f64], f: &[f64], dy: &[f64], df: &[f64]) -> f64 {
        let delta = 2.0 * dot(f, df) + dot(df, df);
        self.c * pow_diff(dot(f, f), delta, self.p / 2.0) + self.fidelity.increment(point, y, dy)
    }
}

impl EnergyDensity for Polyconvex {
    fn kind(&self) -> &str {
        "polyconvex"
    }

    fn growth(&self) -> Growth {
        Growth { c: self.c, p: 4.0 }
    }

    fn lower_order(&self, point: usize) -> f64 {
        self.fidelity.a(point)
    }

    fn value(&self, point: usize, y: &[f64], f: &[f64]) -> f64 {
        let norm2 = dot(f, f);
        let d = det(f, self.n);
        let mut w = self.c * norm2 * norm2 + self.d * d * d;
        if self.e != 0.0 {
            w += self.e * d.abs().powf(self.q);
        }
        w + self.fidelity.value(point, y)
    }

    fn derivatives(&self, point: usize, y: &[f64], f: &[f64], dy: &mut [f64], df: &mut [f64]) {
        self.fidelity.derivative(point, y, dy);
        let n = self.n;
        let norm2 = dot(f, f);
        let d = det(f, n);
        let mut ddet = 2.0 * self.d * d;
        if self.e != 0.0 && d != 0.0 {
            ddet += self.e * self.q * d.abs().powf(self.q - 1.0) * d.signum();
        }
        let cof = crate::minors::cof(f, n);
        for ((o, v), c) in df.iter_mut().zip(f).zip(&cof) {
            *o = 4.0 * self.c * norm2 * v + ddet * c;
        }
    }

    fn increment(&self, point: usize, y: &[f64], f: &[f64], dy: &[f64], df: &[f64]) -> f64 {
        let n = self.n;
        let b = dot(f, f);
        let delta = 2.0 * dot(f, df) + dot(df, df);
        let d0 = det(f, n);
        let dd = det_increment(f, df, n);
        let mut w = self.c * delta * (2.0 * b + delta) + self.d * dd * (2.0 * d0 + dd);
        if self.e != 0.0 {
            let d1 = d0 + dd;
            w += self.e * pow_diff(d0 * d0, dd * (d0 + d1), self.q / 2.0);
        }
        w + self.fidelity.increment(point, y, dy)
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParams {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default = "default_one")]
    c: f64,
    #[serde(default = "default_one")]
    lambda: f64,
    #[serde(default)]
    a: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerParams {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default = "default_one")]
    c: f64,
    p: f64,
    #[serde(default = "default_one")]
    lambda: f64,
    #[serde(default)]
    a: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyconvexParams {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default = "default_one")]
    c: f64,
    #[serde(default = "default_one")]
    d: f64,
    #[serde(default)]
    e: f64,
    #[serde(default = "default_q")]
    q: f64,
    #[serde(default = "default_one")]
    lambda: f64,
    #[serde(default)]
    a: f64,
}

fn default_q() -> f64 {
    2.0
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive, got {v}")))
    }
}

fn quadratic(params: &Value, ctx: &DensityContext) -> Result<Box<dyn EnergyDensity>> {
    let p: QuadraticParams = parse_params("convex-quadratic density", params)?;
    let _ = p.kind;
    positive("c", p.c)?;
    Ok(Box::new(Quadratic {
        c: p.c,
        fidelity: Fidelity::new(p.lambda, p.a, ctx)?,
    }))
}

fn power(params: &Value, ctx: &DensityContext) -> Result<Box<dyn EnergyDensity>> {
    let p: PowerParams = parse_params("convex-power density", params)?;
    let _ = p.kind;
    positive("c", p.c)?;
    if !(p.p > 1.0 && p.p.is_finite()) {
        return Err(Error::param(format!("convex-power density needs p in (1, ∞), got {}", p.p)));
    }
    Ok(Box::new(Power {
        c: p.c,
        p: p.p,
        fidelity: Fidelity::new(p.lambda, p.a, ctx)?,
    }))
}

fn polyconvex(params: &Value, ctx: &DensityContext) -> Result<Box<dyn EnergyDensity>> {
    let p: PolyconvexParams = parse_params("polyconvex density", params)?;
    let _ = p.kind;
    positive("c", p.c)?;
    if p.d < 0.0 || p.e < 0.0 {
        return Err(Error::param("determinant weights d and e must be >= 0"));
    }
    if p.e > 0.0 && p.q <= 1.0 {
        return Err(Error::param(format!("determinant exponent q must exceed 1, got {}", p.q)));
    }
    Ok(Box::new(Polyconvex {
        c: p.c,
        d: p.d,
        e: p.e,
        q: p.q,
        n: ctx.grid.dim(),
        fidelity: Fidelity::new(p.lambda, p.a, ctx)?,
    }))
}

pub type DensityRegistry = Registry<dyn EnergyDensity, DensityContext>;

/// Built-in densities, selected by the `kind` field of a config object.
pub fn registry() -> DensityRegistry {
    Registry::new("energy density")
        .with("convex-quadratic", quadratic)
        .with("convex-power", power)
        .with("polyconvex", polyconvex)
}
