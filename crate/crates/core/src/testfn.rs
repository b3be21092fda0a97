//! Built-in test functions with analytic gradients.
//!
//! Each function is selected by name from [`registry`] with JSON parameters,
//! e.g. `{"spec": "bump", "radius": 4.0}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField, VectorField};
use crate::registry::{parse_params, Registry};

/// A smooth function on `ℝ^n` (scalar) or map `ℝ^n → ℝ^n` (vector).
pub trait TestFunction: Send + Sync {
    fn name(&self) -> &str;

    fn is_vector(&self) -> bool {
        false
    }

    /// Fails with [`Error::Support`] if the function is not (numerically)
    /// supported inside the box of `grid`.
    fn check_support(&self, grid: &Grid) -> Result<()>;

    /// Values at `x`: one entry for scalars, `n` for vector maps.
    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Row-major Jacobian at `x` (`n` entries for scalars, `n²` for maps).
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

fn center_or_origin(center: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    match center {
        None => Ok(vec![0.0; n]),
        Some(c) if c.len() == n => Ok(c.clone()),
        Some(c) => Err(Error::param(format!("center has {} entries, dimension is {n}", c.len()))),
    }
}

fn dim_of(x: &[f64], c: &[f64]) -> usize {
    debug_assert_eq!(x.len(), c.len());
    x.len()
}

/// `A exp(-|x-c|²/(2σ²))`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Gaussian {
    pub fn new(sigma: f64) -> Self {
        Gaussian {
            sigma,
            center: None,
            amplitude: 1.0,
        }
    }

    fn center(&self, n: usize) -> Vec<f64> {
        self.center.clone().unwrap_or_else(|| vec![0.0; n])
    }
}

impl TestFunction for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn check_support(&self, grid: &Grid) -> Result<()> {
        let l = grid.length();
        if !(self.sigma > 0.0 && self.sigma <= l / 8.0) {
            return Err(Error::Support(format!("Gaussian width {} must lie in (0, L/8 = {}]", self.sigma, l / 8.0)));
        }
        let c = center_or_origin(&self.center, grid.dim())?;
        if c.iter().any(|ci| ci.abs() > l / 2.0 - 4.0 * self.sigma) {
            return Err(Error::Support("Gaussian center too close to the box edge".into()));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let c = self.center(x.len());
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        out[0] = self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp();
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let c = self.center(x.len());
        let mut v = [0.0];
        self.eval(x, &mut v);
        for a in 0..dim_of(x, &c) {
            out[a] = -v[0] * (x[a] - c[a]) / (self.sigma * self.sigma);
        }
    }
}

/// `exp(-1/(1-|x-c|²/r²))` inside the ball of radius `r`, zero outside.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub radius: f64,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

impl Bump {
    pub fn new(radius: f64, center: Option<Vec<f64>>) -> Self {
        Bump { radius, center }
    }

    fn center(&self, n: usize) -> Vec<f64> {
        self.center.clone().unwrap_or_else(|| vec![0.0; n])
    }

    /// Value and the factor `g` with `∇ψ = g (x - c)`.
    fn value_and_slope(&self, x: &[f64]) -> (f64, f64) {
        let c = self.center(x.len());
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        let q = r2 / (self.radius * self.radius);
        if q >= 1.0 {
            return (0.0, 0.0);
        }
        let d = 1.0 - q;
        let v = (-1.0 / d).exp();
        (v, -2.0 * v / (d * d * self.radius * self.radius))
    }
}

fn check_ball_support(radius: f64, center: &Option<Vec<f64>>, grid: &Grid, what: &str) -> Result<()> {
    let half = grid.length() / 2.0;
    if !(radius > 0.0) {
        return Err(Error::Support(format!("{what} radius must be positive")));
    }
    let c = center_or_origin(center, grid.dim())?;
    if c.iter().any(|ci| ci.abs() + radius >= half) {
        return Err(Error::Support(format!(
            "{what} of radius {radius} does not fit inside the box [-{half}, {half})"
        )));
    }
    Ok(())
}

impl TestFunction for Bump {
    fn name(&self) -> &str {
        "bump"
    }

    fn check_support(&self, grid: &Grid) -> Result<()> {
        check_ball_support(self.radius, &self.center, grid, "bump")
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.value_and_slope(x).0;
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let c = self.center(x.len());
        let (_, g) = self.value_and_slope(x);
        for a in 0..dim_of(x, &c) {
            out[a] = g * (x[a] - c[a]);
        }
    }
}

/// `cos(2π k·x / L)` for an integer wavevector `k`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: Vec<i64>,
    #[serde(skip)]
    length: f64,
}

impl Mode {
    pub fn new(k: Vec<i64>, grid: &Grid) -> Self {
        Mode { k, length: grid.length() }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        2.0 * std::f64::consts::PI / self.length * self.k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>()
    }
}

impl TestFunction for Mode {
    fn name(&self) -> &str {
        "mode"
    }

    fn check_support(&self, grid: &Grid) -> Result<()> {
        if self.k.len() != grid.dim() {
            return Err(Error::param(format!("mode needs {} wavenumbers, got {}", grid.dim(), self.k.len())));
        }
        let half = grid.points() as i64 / 2;
        if self.k.iter().any(|k| k.abs() >= half) {
            return Err(Error::Support(format!("mode {:?} is not resolved below Nyquist {half}", self.k)));
        }
        if self.length != grid.length() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.phase(x).cos();
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s = -self.phase(x).sin() * 2.0 * std::f64::consts::PI / self.length;
        for (o, k) in out.iter_mut().zip(&self.k) {
            *o = s * *k as f64;
        }
    }
}

/// Vector map `ψ(x) (A (x - c) + b)` with `ψ` a bump of radius `r` about `c`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpAffine {
    pub radius: f64,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

impl BumpAffine {
    pub fn new(radius: f64) -> Self {
        BumpAffine {
            radius,
            matrix: None,
            offset: None,
            center: None,
        }
    }

    /// The default map is a non-symmetric matrix with nonzero determinant.
    fn matrix(&self, n: usize) -> Vec<f64> {
        match &self.matrix {
            Some(rows) => rows.iter().flatten().copied().collect(),
            None => {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    m[i * n + i] = 1.0;
                    if i + 1 < n {
                        m[i * n + i + 1] = 0.5;
                        m[(i + 1) * n + i] = -0.3;
                    }
                }
                m
            }
        }
    }

    fn bump(&self) -> Bump {
        Bump::new(self.radius, self.center.clone())
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let m = self.matrix(n);
        let c = self.bump().center(n);
        let b = self.offset.clone().unwrap_or_else(|| vec![0.0; n]);
        for i in 0..n {
            out[i] = b[i] + (0..n).map(|j| m[i * n + j] * (x[j] - c[j])).sum::<f64>();
        }
    }
}

impl TestFunction for BumpAffine {
    fn name(&self) -> &str {
        "bump-affine"
    }

    fn is_vector(&self) -> bool {
        true
    }

    fn check_support(&self, grid: &Grid) -> Result<()> {
        let n = grid.dim();
        if let Some(rows) = &self.matrix {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::param(format!("bump-affine matrix must be {n}x{n}")));
            }
        }
        if self.offset.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::param(format!("bump-affine offset must have {n} entries")));
        }
        check_ball_support(self.radius, &self.center, grid, "bump-affine cutoff")
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut psi = [0.0];
        self.bump().eval(x, &mut psi);
        self.affine(x, out);
        for o in out.iter_mut().take(x.len()) {
            *o *= psi[0];
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let bump = self.bump();
        let mut psi = [0.0];
        let mut dpsi = [0.0; 4];
        let mut a = [0.0; 4];
        bump.eval(x, &mut psi);
        bump.gradient(x, &mut dpsi[..n]);
        self.affine(x, &mut a[..n]);
        let m = self.matrix(n);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = psi[0] * m[i * n + j] + a[i] * dpsi[j];
            }
        }
    }
}

/// Context for building test functions: the grid they will be sampled on.
pub type TestFunctionRegistry = Registry<dyn TestFunction, Grid>;

fn strip_spec(params: &Value) -> Value {
    let mut p = params.clone();
    if let Some(obj) = p.as_object_mut() {
        obj.remove("spec");
    }
    if p.is_null() {
        p = Value::Object(Default::default());
    }
    p
}

fn build<T: TestFunction + serde::de::DeserializeOwned + 'static>(
    name: &str,
    params: &Value,
    grid: &Grid,
) -> Result<Box<dyn TestFunction>> {
    let f: T = parse_params(name, &strip_spec(params))?;
    f.check_support(grid)?;
    Ok(Box::new(f))
}

pub fn registry() -> TestFunctionRegistry {
    Registry::new("test function")
        .with("gaussian", |p, g| build::<Gaussian>("gaussian", p, g))
        .with("bump", |p, g| build::<Bump>("bump", p, g))
        .with("bump-affine", |p, g| build::<BumpAffine>("bump-affine", p, g))
        .with("mode", |p, g| {
            let mut m: Mode = parse_params("mode", &strip_spec(p))?;
            m.length = g.length();
            m.check_support(g)?;
            Ok(Box::new(m))
        })
}

/// Default parameters for a named built-in, used by the CLI `--spec` flag.
pub fn default_params(name: &str, n: usize) -> Value {
    match name {
        "gaussian" => serde_json::json!({"sigma": 1.0}),
        "bump" => serde_json::json!({"radius": 4.0}),
        "bump-affine" => serde_json::json!({"radius": 4.0}),
        "mode" => {
            let mut k = vec![0i64; n];
            k[0] = 1;
            serde_json::json!({ "k": k })
        }
        _ => Value::Object(Default::default()),
    }
}

pub fn sample_scalar(f: &dyn TestFunction, grid: &Grid) -> Result<ScalarField> {
    if f.is_vector() {
        return Err(Error::param(format!("{} is vector valued", f.name())));
    }
    f.check_support(grid)?;
    let mut v = [0.0];
    ScalarField::from_fn(*grid, |x| {
        f.eval(x, &mut v);
        v[0]
    })
}

pub fn sample_vector(f: &dyn TestFunction, grid: &Grid) -> Result<VectorField> {
    if !f.is_vector() {
        return Err(Error::param(format!("{} is scalar valued", f.name())));
    }
    f.check_support(grid)?;
    let n = grid.dim();
    let mut comps = vec![vec![0.0; grid.len()]; n];
    let mut x = [0.0; 4];
    let mut v = [0.0; 4];
    for j in 0..grid.len() {
        grid.point(j, &mut x[..n]);
        f.eval(&x[..n], &mut v[..n]);
        for a in 0..n {
            comps[a][j] = v[a];
        }
    }
    VectorField::new(*grid, comps)
}

/// Samples the analytic gradient of a scalar test function.
pub fn sample_gradient(f: &dyn TestFunction, grid: &Grid) -> Result<VectorField> {
    if f.is_vector() {
        return Err(Error::param(format!("{} is vector valued", f.name())));
    }
    let n = grid.dim();
    let mut comps = vec![vec![0.0; grid.len()]; n];
    let mut x = [0.0; 4];
    let mut v = [0.0; 4];
    for j in 0..grid.len() {
        grid.point(j, &mut x[..n]);
        f.gradient(&x[..n], &mut v[..n]);
        for a in 0..n {
            comps[a][j] = v[a];
        }
    }
    VectorField::new(*grid, comps)
}

/// Samples the analytic Jacobian of a vector test map.
pub fn sample_jacobian(f: &dyn TestFunction, grid: &Grid) -> Result<MatrixField> {
    if !f.is_vector() {
        return Err(Error::param(format!("{} is scalar valued", f.name())));
    }
    let n = grid.dim();
    let mut x = [0.0; 4];
    MatrixField::from_pointwise(*grid, |j, out| {
        grid.point(j, &mut x[..n]);
        f.gradient(&x[..n], out);
    })
}

/// A seeded sum of `terms` Gaussians with random centers, widths and signs,
/// supported well inside the box.
pub fn random_smooth(grid: &Grid, seed: u64, terms: usize) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.length();
    let h = grid.spacing();
    let n = grid.dim();
    let (lo, hi) = ((3.0 * h).max(l / 40.0), l / 12.0);
    if lo >= hi {
        return Err(Error::Grid(format!(
            "spacing {h} is too coarse for random smooth fields on a box of side {l}"
        )));
    }
    let blobs: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let sigma = rng.random_range(lo..hi);
            let reach = l / 2.0 - 5.0 * sigma;
            let center = (0..n).map(|_| rng.random_range(-reach..reach)).collect();
            let amp = rng.random_range(-1.0..1.0);
            (center, sigma, amp)
        })
        .collect();
    ScalarField::from_fn(*grid, |x| {
        blobs
            .iter()
            .map(|(c, s, a)| {
                let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                a * (-r2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn make(spec: Value, grid: &Grid) -> Result<Box<dyn TestFunction>> {
        registry().create_from_spec("spec", &spec, grid)
    }

    #[test]
    fn gaussian_peaks_at_one() {
        let g = Grid::new(2, 16.0, 64).unwrap();
        let f = make(json!({"spec": "gaussian", "sigma": 1.0}), &g).unwrap();
        let u = sample_scalar(f.as_ref(), &g).unwrap();
        let max = u.values().iter().cloned().fold(0.0, f64::max);
        let h = g.spacing();
        assert!((max - (-(h * h) / 4.0f64).exp()).abs() < 1e-15);
        assert!(make(json!({"spec": "gaussian", "sigma": 2.5}), &g).is_err());
    }

    #[test]
    fn bump_vanishes_outside_its_ball() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        let f = make(json!({"spec": "bump", "radius": 4.0}), &g).unwrap();
        let u = sample_scalar(f.as_ref(), &g).unwrap();
        for j in 0..g.len() {
            if g.coordinate(j).abs() > 4.0 {
                assert_eq!(u.values()[j], 0.0);
            }
        }
        assert!(matches!(make(json!({"spec": "bump", "radius": 8.0}), &g), Err(Error::Support(_))));
    }

    #[test]
    fn mode_has_zero_mean() {
        let g = Grid::new(2, 16.0, 32).unwrap();
        let f = make(json!({"spec": "mode", "k": [1, 0]}), &g).unwrap();
        assert!(sample_scalar(f.as_ref(), &g).unwrap().mean().abs() < 1e-14);
        assert!(make(json!({"spec": "mode", "k": [16, 0]}), &g).is_err());
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let specs = [
            json!({"spec": "gaussian", "sigma": 1.3, "center": [0.2, -0.1]}),
            json!({"spec": "bump", "radius": 3.0, "center": [0.5, 0.0]}),
            json!({"spec": "mode", "k": [2, -1]}),
            json!({"spec": "bump-affine", "radius": 3.0, "offset": [0.3, -0.2]}),
        ];
        let g = Grid::new(2, 16.0, 32).unwrap();
        let eps = 1e-6;
        for spec in specs {
            let f = make(spec, &g).unwrap();
            let m = if f.is_vector() { 2 } else { 1 };
            let x = [0.7, -0.4];
            let mut jac = [0.0; 4];
            f.gradient(&x, &mut jac);
            for j in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += eps;
                xm[j] -= eps;
                let (mut vp, mut vm) = ([0.0; 2], [0.0; 2]);
                f.eval(&xp, &mut vp);
                f.eval(&xm, &mut vm);
                for i in 0..m {
                    let fd = (vp[i] - vm[i]) / (2.0 * eps);
                    assert!((fd - jac[i * 2 + j]).abs() < 1e-7, "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn unknown_names_are_reported() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        let err = make(json!({"spec": "sinc"}), &g).err().unwrap();
        assert!(err.to_string().contains("bump"));
        assert!(make(json!({"spec": "bump", "radius": 1.0, "width": 2}), &g).is_err());
    }

    #[test]
    fn random_fields_are_reproducible() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        assert_eq!(random_smooth(&g, 7, 4).unwrap(), random_smooth(&g, 7, 4).unwrap());
        assert_ne!(random_smooth(&g, 7, 4).unwrap(), random_smooth(&g, 8, 4).unwrap());
    }
}
