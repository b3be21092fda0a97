use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::Value;

use super::density::EnergyDensity;
use crate::analysis::{DomainMask, Exponent};
use crate::constants::FractionalOrder;
use crate::error::{Error, Result};
use crate::grid::{Field, FieldArrays, Grid, MatrixField, VectorField};
use crate::spectral;

/// Absolute tolerance on `|u - g|` over `Ω^c` accepted by [`VariationalProblem::energy`].
pub const CONSTRAINT_TOLERANCE: f64 = 1e-12;

/// Which gradient enters the energy: `D^s` or the classical `D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Smoothness {
    Fractional(FractionalOrder),
    Local,
}

impl Smoothness {
    pub fn fractional(s: f64) -> Result<Self> {
        Ok(Smoothness::Fractional(FractionalOrder::new(s)?))
    }

    /// `s`, or 1 for the local functional.
    pub fn order(self) -> f64 {
        match self {
            Smoothness::Fractional(s) => s.get(),
            Smoothness::Local => 1.0,
        }
    }

    pub fn is_local(self) -> bool {
        self == Smoothness::Local
    }

    /// Parses a number in `(0, 1)` or the string `"local"`.
    pub fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(x) => Smoothness::fractional(x.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) if s.eq_ignore_ascii_case("local") => Ok(Smoothness::Local),
            other => Err(Error::param(format!("expected an order in (0, 1) or \"local\", got {other}"))),
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Fractional(s) => write!(f, "{}", s.get()),
            Smoothness::Local => f.write_str("local"),
        }
    }
}

/// Minimize `h^n Σ_j W(x_j, u_j, G_j)` over `u` with `u = g` on `Ω^c`, where
/// `G` is the spectral `D^s u` (or `Du` when local).
#[derive(Clone)]
pub struct VariationalProblem {
    density: Arc<dyn EnergyDensity>,
    mask: DomainMask,
    g: VectorField,
    smoothness: Smoothness,
    p: Exponent,
}

impl fmt::Debug for VariationalProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VariationalProblem")
            .field("density", &self.density.kind())
            .field("omega", &self.mask.description())
            .field("smoothness", &self.smoothness)
            .field("p", &self.p.get())
            .finish()
    }
}

impl VariationalProblem {
    pub fn new(
        density: Arc<dyn EnergyDensity>,
        mask: DomainMask,
        g: VectorField,
        smoothness: Smoothness,
    ) -> Result<Self> {
        mask.grid().ensure_same(g.grid())?;
        let n = mask.grid().dim();
        let p = Exponent::new(density.growth().p)?;
        if density.kind() == "polyconvex" && p.get() <= n as f64 {
            return Err(Error::param(format!(
                "polyconvex densities need growth p > n, got p = {} with n = {n}",
                p.get()
            )));
        }
        Ok(VariationalProblem {
            density,
            mask,
            g,
            smoothness,
            p,
        })
    }

    /// The same problem at another order.
    pub fn with_smoothness(&self, smoothness: Smoothness) -> Self {
        VariationalProblem {
            smoothness,
            ..self.clone()
        }
    }

    pub fn density(&self) -> &dyn EnergyDensity {
        self.density.as_ref()
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn g(&self) -> &VectorField {
        &self.g
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn exponent(&self) -> Exponent {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }

    pub fn gradient(&self, u: &VectorField) -> Result<MatrixField> {
        spectral::fractional_gradient(u, self.smoothness.order())
    }

    pub fn check_constraint(&self, u: &VectorField) -> Result<()> {
        self.grid().ensure_same(u.grid())?;
        for (i, (uc, gc)) in u.components().iter().zip(self.g.components()).enumerate() {
            for (j, (a, b)) in uc.iter().zip(gc).enumerate() {
                if !self.mask.contains(j) && (a - b).abs() > CONSTRAINT_TOLERANCE {
                    return Err(Error::Constraint(format!(
                        "component {i} at cell {j} differs from g by {:e}",
                        (a - b).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Overwrites `u` with `g` on `Ω^c`.
    pub fn project(&self, u: &VectorField) -> Result<VectorField> {
        self.grid().ensure_same(u.grid())?;
        let arrays = u
            .components()
            .iter()
            .zip(self.g.components())
            .map(|(uc, gc)| {
                uc.iter()
                    .zip(gc)
                    .enumerate()
                    .map(|(j, (a, b))| if self.mask.contains(j) { *a } else { *b })
                    .collect()
            })
            .collect();
        VectorField::new(*self.grid(), arrays)
    }

    pub fn energy(&self, u: &VectorField) -> Result<f64> {
        self.check_constraint(u)?;
        let grad = self.gradient(u)?;
        self.energy_with(u, &grad)
    }

    /// Energy from a precomputed gradient `grad` of `u`.
    pub(crate) fn energy_with(&self, u: &VectorField, grad: &MatrixField) -> Result<f64> {
        let n = self.grid().dim();
        let values: Vec<f64> = (0..self.grid().len())
            .into_par_iter()
            .map(|j| {
                let (mut y, mut f) = ([0.0; 4], [0.0; 16]);
                u.at(j, &mut y[..n]);
                grad.at(j, &mut f[..n * n]);
                self.density.value(j, &y[..n], &f[..n * n])
            })
            .collect();
        finite_sum(&values, self.grid().cell_volume())
    }

    /// `E(u + t·du) - E(u)` for `du` with gradient `dgrad`, summed from pointwise
    /// increments so that small changes keep their sign.
    pub(crate) fn energy_increment(
        &self,
        u: &VectorField,
        grad: &MatrixField,
        t: f64,
        du: &VectorField,
        dgrad: &MatrixField,
    ) -> Result<f64> {
        let n = self.grid().dim();
        let values: Vec<f64> = (0..self.grid().len())
            .into_par_iter()
            .map(|j| {
                let (mut y, mut f, mut dy, mut df) = ([0.0; 4], [0.0; 16], [0.0; 4], [0.0; 16]);
                u.at(j, &mut y[..n]);
                grad.at(j, &mut f[..n * n]);
                du.at(j, &mut dy[..n]);
                dgrad.at(j, &mut df[..n * n]);
                dy.iter_mut().for_each(|v| *v *= t);
                df.iter_mut().for_each(|v| *v *= t);
                self.density.increment(j, &y[..n], &f[..n * n], &dy[..n], &df[..n * n])
            })
            .collect();
        finite_sum(&values, self.grid().cell_volume())
    }

    /// `∂_yW − div^s(∂_FW)` (rowwise), zeroed on `Ω^c`. This is the `L²`
    /// gradient of the discrete energy over fields that vanish on `Ω^c`.
    pub fn first_variation(&self, u: &VectorField) -> Result<VectorField> {
        let grad = self.gradient(u)?;
        self.first_variation_with(u, &grad)
    }

    pub(crate) fn first_variation_with(&self, u: &VectorField, grad: &MatrixField) -> Result<VectorField> {
        let grid = *self.grid();
        let n = grid.dim();
        let stride = n + n * n;
        let mut packed = vec![0.0; grid.len() * stride];
        packed.par_chunks_mut(stride).enumerate().for_each(|(j, out)| {
            let (mut y, mut f) = ([0.0; 4], [0.0; 16]);
            u.at(j, &mut y[..n]);
            grad.at(j, &mut f[..n * n]);
            let (dy, df) = out.split_at_mut(n);
            self.density.derivatives(j, &y[..n], &f[..n * n], dy, df);
        });
        if packed.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density derivative"));
        }
        let unpack = |c: usize| -> Vec<f64> { packed.iter().skip(c).step_by(stride).copied().collect() };
        let flux = MatrixField::new(grid, (n..stride).map(unpack).collect())?;
        let div = spectral::row_divergence(&flux, self.smoothness.order())?;
        let arrays = (0..n)
            .map(|i| {
                let dy = unpack(i);
                dy.iter()
                    .zip(div.component(i))
                    .enumerate()
                    .map(|(j, (a, b))| if self.mask.contains(j) { a - b } else { 0.0 })
                    .collect()
            })
            .collect();
        VectorField::from_arrays(grid, arrays)
    }
}

fn finite_sum(values: &[f64], weight: f64) -> Result<f64> {
    let total: f64 = values.iter().sum::<f64>() * weight;
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite("energy density"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::OmegaSpec;
    use crate::grid::{pairing, ScalarField};
    use crate::testfn::{sample_jacobian, sample_vector, BumpAffine};
    use crate::variational::density::{registry, DensityContext};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;
    use std::f64::consts::PI;

    fn density(spec: Value, ctx: &DensityContext) -> Arc<dyn EnergyDensity> {
        Arc::from(registry().create_from_spec("kind", &spec, ctx).unwrap())
    }

    #[test]
    fn mode_energy_is_eigenvalue_times_norm() {
        let grid = Grid::new(1, 16.0, 64).unwrap();
        let k = 3.0;
        let u = ScalarField::from_fn(grid, |x| (2.0 * PI * k * x[0] / 16.0).cos()).unwrap();
        let u = VectorField::from_scalars(vec![u]).unwrap();
        let w = density(json!({"kind": "convex-quadratic", "lambda": 0.0}), &DensityContext::new(grid));
        let prob = VariationalProblem::new(w, DomainMask::full(&grid), u.clone(), Smoothness::Local).unwrap();
        for s in [0.3, 0.7] {
            let p = prob.with_smoothness(Smoothness::fractional(s).unwrap());
            let expected = (2.0 * PI * k / 16.0).powf(2.0 * s) * pairing(&u, &u).unwrap();
            assert!((p.energy(&u).unwrap() - expected).abs() < 1e-12 * expected);
        }
        let zero = VectorField::zeros(grid);
        let p = VariationalProblem::new(prob.density.clone(), DomainMask::full(&grid), zero.clone(), Smoothness::Local)
            .unwrap();
        assert_eq!(p.energy(&zero).unwrap(), 0.0);
    }

    #[test]
    fn polyconvex_local_energy_matches_pointwise_quadrature() {
        let grid = Grid::new(2, 16.0, 128).unwrap();
        let ctx = DensityContext::new(grid);
        let w = density(json!({"kind": "polyconvex", "lambda": 0.0}), &ctx);
        let map = BumpAffine::new(4.0);
        let u = sample_vector(&map, &grid).unwrap();
        let exact = sample_jacobian(&map, &grid).unwrap();
        let mut reference = 0.0;
        let mut f = [0.0; 4];
        for j in 0..grid.len() {
            exact.at(j, &mut f);
            let norm2: f64 = f.iter().map(|v| v * v).sum();
            let d = f[0] * f[3] - f[1] * f[2];
            reference += norm2 * norm2 + d * d;
        }
        reference *= grid.cell_volume();
        let prob = VariationalProblem::new(w, DomainMask::full(&grid), u.clone(), Smoothness::Local).unwrap();
        let e = prob.energy(&u).unwrap();
        assert!((e - reference).abs() < 1e-6 * reference, "{e} vs {reference}");
    }

    #[test]
    fn variation_matches_finite_differences() {
        let grid = Grid::new(2, 16.0, 32).unwrap();
        let f = sample_vector(&BumpAffine::new(4.0), &grid).unwrap();
        let ctx = DensityContext::new(grid).with_target(f.clone());
        let mask = DomainMask::new(&OmegaSpec::Ball { r: 5.0, center: None }, &grid).unwrap();
        let g = f.scaled(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for spec in [
            json!({"kind": "convex-quadratic"}),
            json!({"kind": "convex-power", "p": 3.0}),
            json!({"kind": "polyconvex", "e": 0.5, "q": 3.0}),
        ] {
            for smooth in [Smoothness::fractional(0.6).unwrap(), Smoothness::Local] {
                let prob = VariationalProblem::new(density(spec.clone(), &ctx), mask.clone(), g.clone(), smooth).unwrap();
                let u = prob.project(&f).unwrap();
                let var = prob.first_variation(&u).unwrap();
                for _ in 0..20 {
                    let v: Vec<Vec<f64>> = (0..2)
                        .map(|_| {
                            (0..grid.len())
                                .map(|j| if mask.contains(j) { rng.random_range(-1.0..1.0) } else { 0.0 })
                                .collect()
                        })
                        .collect();
                    let v = VectorField::new(grid, v).unwrap();
                    let t = 1e-5;
                    let plus = crate::grid::linear_combination(1.0, &u, t, &v).unwrap();
                    let minus = crate::grid::linear_combination(1.0, &u, -t, &v).unwrap();
                    let fd = (prob.energy(&plus).unwrap() - prob.energy(&minus).unwrap()) / (2.0 * t);
                    let exact = pairing(&var, &v).unwrap();
                    assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{spec} {smooth}: {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn variation_of_dirichlet_energy_at_g() {
        let grid = Grid::new(2, 16.0, 32).unwrap();
        let g = sample_vector(&BumpAffine::new(4.0), &grid).unwrap();
        let w = density(json!({"kind": "convex-quadratic", "lambda": 0.0}), &DensityContext::new(grid));
        let mask = DomainMask::ball(&grid, 3.0).unwrap();
        let s = 0.4;
        let prob = VariationalProblem::new(w, mask.clone(), g.clone(), Smoothness::fractional(s).unwrap()).unwrap();
        let var = prob.first_variation(&g).unwrap();
        let lap = spectral::row_divergence(&spectral::fractional_gradient(&g, s).unwrap(), s).unwrap();
        for i in 0..2 {
            for j in 0..grid.len() {
                let expected = if mask.contains(j) { -2.0 * lap.component(i)[j] } else { 0.0 };
                assert!((var.component(i)[j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constraint_and_polyconvex_growth_are_checked() {
        let grid = Grid::new(2, 16.0, 32).unwrap();
        let ctx = DensityContext::new(grid);
        let mask = DomainMask::ball(&grid, 3.0).unwrap();
        let g = VectorField::zeros(grid);
        let prob = VariationalProblem::new(density(json!({"kind": "convex-quadratic"}), &ctx), mask.clone(), g.clone(), Smoothness::Local)
            .unwrap();
        let off = VectorField::new(grid, vec![vec![1e-9; grid.len()], vec![0.0; grid.len()]]).unwrap();
        assert!(matches!(prob.energy(&off), Err(Error::Constraint(_))));
        assert!(prob.energy(&prob.project(&off).unwrap()).unwrap() > 0.0);

        let g3 = Grid::new(3, 16.0, 8).unwrap();
        let poly = density(json!({"kind": "polyconvex"}), &DensityContext::new(g3));
        assert!(VariationalProblem::new(poly, DomainMask::full(&g3), VectorField::zeros(g3), Smoothness::Local).is_ok());
        let g4 = Grid::new(4, 16.0, 8).unwrap();
        let poly = density(json!({"kind": "polyconvex"}), &DensityContext::new(g4));
        assert!(VariationalProblem::new(poly, DomainMask::full(&g4), VectorField::zeros(g4), Smoothness::Local).is_err());
    }

    #[test]
    fn smoothness_parsing() {
        assert_eq!(Smoothness::from_json(&json!("local")).unwrap(), Smoothness::Local);
        assert_eq!(Smoothness::from_json(&json!(0.5)).unwrap().order(), 0.5);
        assert!(Smoothness::from_json(&json!(1.0)).is_err());
        assert!(Smoothness::from_json(&json!(true)).is_err());
        assert_eq!(Smoothness::Local.to_string(), "local");
    }
}
