//! Fourier-multiplier implementation of the fractional operators.
//!
//! On the torus every operator here is diagonal in the Fourier basis:
//!
//! | operator            | symbol                           |
//! |---------------------|----------------------------------|
//! | `D^s`, component j  | `2πiξ_j |2πξ|^{s-1}`             |
//! | `div^s`             | sum of the above over components |
//! | `I_α` (Riesz)       | `|2πξ|^{-α}`                     |
//!
//! The zero frequency maps to `0` for all of them, so means are annihilated.
//! Odd symbols vanish on the Nyquist plane `k_j = -N/2` of their own axis,
//! which keeps outputs real and makes `D^s` exactly skew-adjoint to `div^s`.
//! This is the fast, machine-precision reference path.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{wavevector, Spectrum, Transformer};
use crate::grid::{relative_l2, Differentiable, Field, FieldArrays, Grid, MatrixField, ScalarField, VectorField};

/// A diagonal Fourier operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    /// Component `axis` of the fractional gradient of order `order ∈ (0, 1]`.
    Gradient { order: f64, axis: usize },
    /// Riesz potential of order `alpha ∈ (0, n)`.
    Riesz { alpha: f64 },
}

impl Multiplier {
    /// Symbol at integer wavevector `k`.
    pub fn symbol(&self, grid: &Grid, k: &[i64]) -> Complex64 {
        let half = grid.points() as i64 / 2;
        let two_pi_over_l = 2.0 * PI / grid.length();
        let radial = two_pi_over_l * (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
        if radial == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match *self {
            Multiplier::Gradient { order, axis } => {
                if k[axis] == -half {
                    return Complex64::new(0.0, 0.0);
                }
                let a = two_pi_over_l * k[axis] as f64;
                let scale = if order == 1.0 { 1.0 } else { radial.powf(order - 1.0) };
                Complex64::new(0.0, a * scale)
            }
            Multiplier::Riesz { alpha } => Complex64::new(radial.powf(-alpha), 0.0),
        }
    }

    /// Symbol values for every FFT bin.
    pub fn table(&self, grid: &Grid) -> Vec<Complex64> {
        let n = grid.dim();
        let mut k = [0i64; 4];
        (0..grid.len())
            .map(|j| {
                wavevector(grid, j, &mut k[..n]);
                self.symbol(grid, &k[..n])
            })
            .collect()
    }

    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        let t = Transformer::new(f.grid());
        let values = apply_table(&t, &t.forward(f.values()), &self.table(f.grid()));
        ScalarField::new(*f.grid(), values).expect("multiplier output is finite")
    }
}

fn apply_table(t: &Transformer, spectrum: &Spectrum, table: &[Complex64]) -> Vec<f64> {
    let mut out = spectrum.clone();
    for (c, m) in out.coeffs_mut().iter_mut().zip(table) {
        *c *= m;
    }
    t.inverse(&out)
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::Order {
            value: s,
            range: "(0, 1]",
        })
    }
}

fn gradient_tables(grid: &Grid, s: f64) -> Vec<Vec<Complex64>> {
    (0..grid.dim())
        .map(|axis| Multiplier::Gradient { order: s, axis }.table(grid))
        .collect()
}

/// Gradient arrays of each input row, row-major `(row, axis)`.
pub(crate) fn gradient_arrays(grid: &Grid, rows: &[&[f64]], s: f64) -> Vec<Vec<f64>> {
    let t = Transformer::new(grid);
    let tables = gradient_tables(grid, s);
    let mut out = Vec::with_capacity(rows.len() * grid.dim());
    for row in rows {
        let spectrum = t.forward(row);
        for table in &tables {
            out.push(apply_table(&t, &spectrum, table));
        }
    }
    out
}

fn divergence_array(t: &Transformer, grid: &Grid, comps: &[&[f64]], tables: &[Vec<Complex64>]) -> Vec<f64> {
    let mut acc = Spectrum::from_coeffs(*grid, vec![Complex64::new(0.0, 0.0); grid.len()]);
    for (c, table) in comps.iter().zip(tables) {
        let spectrum = t.forward(c);
        for ((a, v), m) in acc.coeffs_mut().iter_mut().zip(spectrum.coeffs()).zip(table) {
            *a += v * m;
        }
    }
    t.inverse(&acc)
}

/// `D^s u` via its Fourier symbol; `s = 1` gives the classical gradient.
pub fn fractional_gradient<U: Differentiable>(u: &U, s: f64) -> Result<U::Gradient> {
    check_order(s)?;
    let grid = *u.grid();
    U::Gradient::from_arrays(grid, gradient_arrays(&grid, &u.arrays(), s))
}

pub fn classical_gradient<U: Differentiable>(u: &U) -> Result<U::Gradient> {
    fractional_gradient(u, 1.0)
}

/// `div^s φ = Σ_j` (component-j gradient multiplier applied to `φ_j`).
pub fn fractional_divergence(phi: &VectorField, s: f64) -> Result<ScalarField> {
    check_order(s)?;
    let grid = *phi.grid();
    let t = Transformer::new(&grid);
    ScalarField::new(grid, divergence_array(&t, &grid, &phi.arrays(), &gradient_tables(&grid, s)))
}

pub fn classical_divergence(phi: &VectorField) -> Result<ScalarField> {
    fractional_divergence(phi, 1.0)
}

/// Row-wise `div^s` of a matrix field: component `i` is `div^s` of row `i`.
pub fn row_divergence(m: &MatrixField, s: f64) -> Result<VectorField> {
    check_order(s)?;
    let grid = *m.grid();
    let n = grid.dim();
    let t = Transformer::new(&grid);
    let tables = gradient_tables(&grid, s);
    let arrays = m.arrays();
    let comps = (0..n)
        .map(|i| divergence_array(&t, &grid, &arrays[i * n..(i + 1) * n], &tables))
        .collect();
    VectorField::new(grid, comps)
}

/// Tolerance on `|mean|` (relative to `max(1, max|f|)`) accepted by the Riesz potential.
pub const MEAN_TOLERANCE: f64 = 1e-10;

fn riesz_arrays(grid: &Grid, arrays: &[&[f64]], alpha: f64) -> Result<Vec<Vec<f64>>> {
    let n = grid.dim() as f64;
    if !(alpha > 0.0 && alpha < n) {
        return Err(Error::Order {
            value: alpha,
            range: "(0, n)",
        });
    }
    for a in arrays {
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if mean.abs() > MEAN_TOLERANCE * scale {
            return Err(Error::NonZeroMean(mean));
        }
    }
    let t = Transformer::new(grid);
    let table = Multiplier::Riesz { alpha }.table(grid);
    Ok(arrays.iter().map(|a| apply_table(&t, &t.forward(a), &table)).collect())
}

/// Riesz potential `I_α f` with symbol `|2πξ|^{-α}`. Requires zero-mean input.
pub fn riesz_potential(f: &ScalarField, alpha: f64) -> Result<ScalarField> {
    ScalarField::from_arrays(*f.grid(), riesz_arrays(f.grid(), &f.arrays(), alpha)?)
}

/// Componentwise Riesz potential of any field.
pub fn riesz_potential_field<F: FieldArrays>(f: &F, alpha: f64) -> Result<F> {
    F::from_arrays(*f.grid(), riesz_arrays(f.grid(), &f.arrays(), alpha)?)
}

/// Transverse tolerance, relative to the largest coefficient, for [`ftc_reconstruct`].
pub const RANGE_TOLERANCE: f64 = 1e-8;

/// Recovers `u - mean(u)` from `V = D^s u` by inverting the symbol modewise:
/// `û = -2πiξ·V̂ / |2πξ|^{1+s}`.
///
/// Fails with [`Error::NotAGradient`] unless every mode of `V̂` is parallel to
/// the symbol of `D^s` within [`RANGE_TOLERANCE`].
pub fn ftc_reconstruct(v: &VectorField, s: f64) -> Result<ScalarField> {
    check_order(s)?;
    let grid = *v.grid();
    let n = grid.dim();
    let t = Transformer::new(&grid);
    let tables = gradient_tables(&grid, s);
    let spectra: Vec<Spectrum> = v.arrays().iter().map(|c| t.forward(c)).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; grid.len()];
    let mut max_coeff = 0.0f64;
    let mut max_transverse = 0.0f64;
    for (j, o) in out.iter_mut().enumerate() {
        let norm_sqr: f64 = (0..n).map(|a| tables[a][j].norm_sqr()).sum();
        let vn: f64 = (0..n).map(|a| spectra[a].coeffs()[j].norm_sqr()).sum::<f64>().sqrt();
        max_coeff = max_coeff.max(vn);
        if norm_sqr == 0.0 {
            max_transverse = max_transverse.max(vn);
            continue;
        }
        let proj: Complex64 = (0..n).map(|a| tables[a][j].conj() * spectra[a].coeffs()[j]).sum::<Complex64>() / norm_sqr;
        let transverse: f64 = (0..n)
            .map(|a| (spectra[a].coeffs()[j] - tables[a][j] * proj).norm_sqr())
            .sum::<f64>()
            .sqrt();
        max_transverse = max_transverse.max(transverse);
        *o = proj;
    }
    if max_coeff > 0.0 && max_transverse > RANGE_TOLERANCE * max_coeff {
        return Err(Error::NotAGradient(max_transverse / max_coeff));
    }
    ScalarField::new(grid, t.inverse(&Spectrum::from_coeffs(grid, out)))
}

/// Tolerance of the identity asserted by [`semigroup_compose`].
pub const SEMIGROUP_TOLERANCE: f64 = 1e-12;

/// `I_{s - s̄}(D^s u)`, checked against `D^{s̄} u` to [`SEMIGROUP_TOLERANCE`].
pub fn semigroup_compose<U: Differentiable>(u: &U, s: f64, s_bar: f64) -> Result<U::Gradient> {
    check_order(s)?;
    check_order(s_bar)?;
    if s_bar > s {
        return Err(Error::param(format!("semigroup needs s_bar <= s, got s={s}, s_bar={s_bar}")));
    }
    let high = fractional_gradient(u, s)?;
    if s_bar == s {
        return Ok(high);
    }
    let composed = riesz_potential_field(&high, s - s_bar)?;
    let direct = fractional_gradient(u, s_bar)?;
    match relative_l2(&composed, &direct) {
        Ok(err) if err > SEMIGROUP_TOLERANCE => Err(Error::Identity(format!(
            "I_(s-s_bar) D^s u differs from D^s_bar u by {err:e} (relative L2)"
        ))),
        Ok(_) | Err(Error::ZeroDenominator(_)) => Ok(composed),
        Err(e) => Err(e),
    }
}
