//! Real-space kernel sums for `D^s`, `div^s`, `K^s_φ` and the fractional
//! fundamental theorem of calculus, independent of the Fourier path.
//!
//! Every operator is a sum over grid offsets `m ≠ 0` of the vector kernel
//! `W(m) = h^n k(mh)`, `k(z) = z/|z|^β`, acting on differences of samples.
//! Two image policies are available:
//!
//! * `nearest-image`: `k` truncated at a cutoff radius, one image per offset.
//! * `periodized` (default): `k` summed over `(2J+1)^n` periodic images, minus
//!   the linear far-field flux of the images beyond the last shell. This is
//!   the kernel of the torus operator, so it agrees with the spectral path
//!   up to discretization error.
//!
//! The skipped singular cell leaves an `O(h^{1-s})` defect. With
//! `singular_correction` on, it is restored using the Epstein zeta function
//! of the lattice applied to a centered-difference gradient.
//!
//! Cost is `O(N^{2n})`, capped at [`KERNEL_BUDGET`] evaluations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c_ns, FractionalOrder};
use crate::error::{Error, Result};
use crate::grid::{Differentiable, Field, FieldArrays, Grid, MatrixField, ScalarField, VectorField};
use crate::lattice::{epstein_zeta, face_integral};

/// Hard cap on `N^{2n}`.
pub const KERNEL_BUDGET: u128 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ImagePolicy {
    /// Single nearest image, kernel truncated at `cutoff` (default `L/2`).
    NearestImage {
        #[serde(default)]
        cutoff: Option<f64>,
    },
    /// Images over `shells` lattice shells in every direction.
    Periodized { shells: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureScheme {
    pub images: ImagePolicy,
    pub singular_correction: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            images: ImagePolicy::Periodized { shells: 4 },
            singular_correction: true,
        }
    }
}

impl QuadratureScheme {
    /// Singular-cell skip with the nearest-image kernel cut at `L/2`, uncorrected.
    pub fn naive() -> Self {
        QuadratureScheme {
            images: ImagePolicy::NearestImage { cutoff: None },
            singular_correction: false,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self.images {
            ImagePolicy::NearestImage { cutoff: Some(r) } if !(r > 0.0 && r <= grid.length() / 2.0) => {
                Err(Error::param(format!("cutoff {r} must lie in (0, L/2]")))
            }
            ImagePolicy::Periodized { shells } if shells > 16 => {
                Err(Error::param(format!("{shells} image shells is more than the supported 16")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel weights `W(m)` for exponent `beta` on the symmetric offset block.
    fn table(&self, grid: &Grid, beta: f64) -> Result<KernelTable> {
        self.validate(grid)?;
        let total = (grid.points() as u128).pow(2 * grid.dim() as u32);
        if total > KERNEL_BUDGET {
            return Err(Error::Budget {
                evaluations: total,
                limit: KERNEL_BUDGET,
            });
        }
        Ok(KernelTable::new(grid, beta, self.images))
    }
}

/// Weights on offsets `m ∈ {-N/2+1, …, N/2-1}^n`, row-major, `W(0) = 0`.
struct KernelTable {
    n: usize,
    side: usize,
    weights: Vec<f64>,
}

impl KernelTable {
    fn new(grid: &Grid, beta: f64, images: ImagePolicy) -> Self {
        let n = grid.dim();
        let half = grid.points() as i64 / 2;
        let side = (2 * half - 1) as usize;
        let count = side.pow(n as u32);
        let h = grid.spacing();
        let l = grid.length();
        let vol = grid.cell_volume();
        let offset = |k: usize, m: &mut [i64]| {
            let mut rest = k;
            for a in (0..n).rev() {
                m[a] = (rest % side) as i64 - (half - 1);
                rest /= side;
            }
        };
        let kernel = |z: &[f64], out: &mut [f64]| {
            let r2: f64 = z.iter().map(|v| v * v).sum();
            let scale = r2.powf(-beta / 2.0);
            for (o, v) in out.iter_mut().zip(z) {
                *o += v * scale;
            }
        };
        // Only offsets past the midpoint are computed; the rest follow by oddness.
        let mid = count / 2;
        let upper: Vec<f64> = (mid + 1..count)
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut m = [0i64; 4];
                offset(k, &mut m[..n]);
                let mut w = vec![0.0; n];
                let mut z = [0.0; 4];
                match images {
                    ImagePolicy::NearestImage { cutoff } => {
                        let r_cut = cutoff.unwrap_or(l / 2.0);
                        for a in 0..n {
                            z[a] = m[a] as f64 * h;
                        }
                        if z[..n].iter().map(|v| v * v).sum::<f64>() <= r_cut * r_cut {
                            kernel(&z[..n], &mut w);
                        }
                    }
                    ImagePolicy::Periodized { shells } => {
                        let j_side = 2 * shells + 1;
                        for jf in 0..j_side.pow(n as u32) {
                            let mut rest = jf;
                            for a in 0..n {
                                let j = (rest % j_side) as i64 - shells as i64;
                                rest /= j_side;
                                z[a] = m[a] as f64 * h + j as f64 * l;
                            }
                            kernel(&z[..n], &mut w);
                        }
                        let reach = (shells as f64 + 0.5) * l;
                        let flux = 2.0 * face_integral(n, beta, reach) / l.powi(n as i32);
                        for a in 0..n {
                            w[a] -= flux * m[a] as f64 * h;
                        }
                    }
                }
                w.into_iter().map(move |v| v * vol)
            })
            .collect();
        let mut weights = vec![0.0; count * n];
        for (i, k) in (mid + 1..count).enumerate() {
            let mirror = count - 1 - k;
            for a in 0..n {
                let v = upper[i * n + a];
                weights[k * n + a] = v;
                weights[mirror * n + a] = -v;
            }
        }
        KernelTable { n, side, weights }
    }

    /// Runs `visit(x, y, W(x - y), acc)` for every target `x` and offset, in a
    /// fixed order per target, and returns the point-major accumulators.
    fn accumulate<F>(&self, grid: &Grid, width: usize, visit: F) -> Vec<f64>
    where
        F: Fn(usize, usize, &[f64], &mut [f64]) + Sync,
    {
        let n = self.n;
        let points = grid.points();
        let side = self.side;
        let half = points / 2;
        let mut out = vec![0.0; grid.len() * width];
        out.par_chunks_mut(width).enumerate().for_each(|(x, acc)| {
            let mut idx = [0usize; 4];
            grid.multi_index(x, &mut idx[..n]);
            // wrap[a][t]: flat contribution of axis a for offset index t
            let wrap: Vec<Vec<usize>> = (0..n)
                .map(|a| {
                    let stride = grid.stride(a);
                    (0..side)
                        .map(|t| {
                            let m = t as i64 - (half as i64 - 1);
                            ((idx[a] as i64 - m).rem_euclid(points as i64) as usize) * stride
                        })
                        .collect()
                })
                .collect();
            let outer = side.pow(n as u32 - 1);
            let mut odo = [0usize; 4];
            for o in 0..outer {
                let mut base = 0;
                let mut rest = o;
                for a in (0..n - 1).rev() {
                    odo[a] = rest % side;
                    rest /= side;
                    base += wrap[a][odo[a]];
                }
                let k0 = o * side;
                let last = &wrap[n - 1];
                for (t, &w) in last.iter().enumerate() {
                    let k = k0 + t;
                    let weight = &self.weights[k * n..(k + 1) * n];
                    if weight.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    visit(x, base + w, weight, acc);
                }
            }
        });
        out
    }
}

/// Centered-difference gradient of one array, one output array per axis.
fn central_gradient(grid: &Grid, f: &[f64]) -> Vec<Vec<f64>> {
    let n = grid.dim();
    let points = grid.points();
    let inv = 1.0 / (2.0 * grid.spacing());
    (0..n)
        .map(|a| {
            let stride = grid.stride(a);
            (0..grid.len())
                .map(|x| {
                    let i = (x / stride) % points;
                    let up = if i + 1 == points { x + stride - points * stride } else { x + stride };
                    let down = if i == 0 { x + (points - 1) * stride } else { x - stride };
                    (f[up] - f[down]) * inv
                })
                .collect()
        })
        .collect()
}

fn central_divergence(grid: &Grid, comps: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (a, c) in comps.iter().enumerate() {
        let g = central_gradient(grid, c);
        for (o, v) in out.iter_mut().zip(&g[a]) {
            *o += v;
        }
    }
    out
}

/// Coefficient `κ` with singular-cell defect `≈ κ·Du` for the gradient kernel.
fn gradient_correction(grid: &Grid, s: f64) -> Result<f64> {
    let n = grid.dim() as f64;
    Ok(-epstein_zeta(grid.dim(), n + s - 1.0)? / n * grid.spacing().powf(1.0 - s))
}

fn order(s: f64) -> Result<f64> {
    FractionalOrder::new(s).map(FractionalOrder::get)
}

fn transpose(grid: &Grid, buf: &[f64], width: usize) -> Vec<Vec<f64>> {
    (0..width)
        .map(|c| (0..grid.len()).map(|x| buf[x * width + c]).collect())
        .collect()
}

/// Direct `D^s u(x) = c_{n,s} Σ_m W(m) (u(x) - u(x-m))` (+ singular correction).
pub fn fractional_gradient_direct<U: Differentiable>(u: &U, s: f64, scheme: &QuadratureScheme) -> Result<U::Gradient> {
    let s = order(s)?;
    let grid = *u.grid();
    let n = grid.dim();
    let c = c_ns(grid.dimension(), s)?;
    let table = scheme.table(&grid, n as f64 + s + 1.0)?;
    let rows = u.arrays();
    let width = rows.len() * n;
    let buf = table.accumulate(&grid, width, |x, y, w, acc| {
        for (r, row) in rows.iter().enumerate() {
            let d = row[x] - row[y];
            for (a, wa) in w.iter().enumerate() {
                acc[r * n + a] += wa * d;
            }
        }
    });
    let mut arrays = transpose(&grid, &buf, width);
    for a in arrays.iter_mut() {
        a.iter_mut().for_each(|v| *v *= c);
    }
    if scheme.singular_correction {
        let k = c * gradient_correction(&grid, s)?;
        for (r, row) in rows.iter().enumerate() {
            for (a, g) in central_gradient(&grid, row).into_iter().enumerate() {
                for (o, v) in arrays[r * n + a].iter_mut().zip(g) {
                    *o += k * v;
                }
            }
        }
    }
    U::Gradient::from_arrays(grid, arrays)
}

/// Direct `div^s φ(x) = c_{n,s} Σ_m W(m)·(φ(x) - φ(x-m))` (+ singular correction).
pub fn fractional_divergence_direct(phi: &VectorField, s: f64, scheme: &QuadratureScheme) -> Result<ScalarField> {
    let s = order(s)?;
    let grid = *phi.grid();
    let c = c_ns(grid.dimension(), s)?;
    let table = scheme.table(&grid, grid.dim() as f64 + s + 1.0)?;
    let comps = phi.arrays();
    let mut out = table.accumulate(&grid, 1, |x, y, w, acc| {
        for (wa, comp) in w.iter().zip(&comps) {
            acc[0] += wa * (comp[x] - comp[y]);
        }
    });
    out.iter_mut().for_each(|v| *v *= c);
    if scheme.singular_correction {
        let k = c * gradient_correction(&grid, s)?;
        for (o, v) in out.iter_mut().zip(central_divergence(&grid, &comps)) {
            *o += k * v;
        }
    }
    ScalarField::new(grid, out)
}

/// `K^s_φ(U)(x) = c_{n,s} Σ_m (φ(x) - φ(x-m)) U(x-m) W(m)` (+ singular correction
/// `κ U(x) Dφ(x)`), so that `K^s_φ(I) = D^s φ` on the same scheme.
pub fn k_phi(phi: &ScalarField, u: &MatrixField, s: f64, scheme: &QuadratureScheme) -> Result<VectorField> {
    let s = order(s)?;
    let grid = *phi.grid();
    grid.ensure_same(u.grid())?;
    let n = grid.dim();
    let c = c_ns(grid.dimension(), s)?;
    let table = scheme.table(&grid, n as f64 + s + 1.0)?;
    let p = phi.values();
    let entries = u.arrays();
    let buf = table.accumulate(&grid, n, |x, y, w, acc| {
        let d = p[x] - p[y];
        if d == 0.0 {
            return;
        }
        for i in 0..n {
            let uw: f64 = (0..n).map(|j| entries[i * n + j][y] * w[j]).sum();
            acc[i] += d * uw;
        }
    });
    let mut arrays = transpose(&grid, &buf, n);
    arrays.iter_mut().flatten().for_each(|v| *v *= c);
    if scheme.singular_correction {
        let k = c * gradient_correction(&grid, s)?;
        let dphi = central_gradient(&grid, p);
        for (i, a) in arrays.iter_mut().enumerate() {
            for (x, o) in a.iter_mut().enumerate() {
                *o += k * (0..n).map(|j| entries[i * n + j][x] * dphi[j][x]).sum::<f64>();
            }
        }
    }
    VectorField::new(grid, arrays)
}

/// Direct inversion `u(x) = c_{n,-s} Σ_m V(x-m)·W(m)` with `β = n - s + 1`,
/// returned with its mean removed.
pub fn ftc_reconstruct_direct(v: &VectorField, s: f64, scheme: &QuadratureScheme) -> Result<ScalarField> {
    let s = order(s)?;
    let grid = *v.grid();
    let n = grid.dim() as f64;
    let c = c_ns(grid.dimension(), -s)?;
    let table = scheme.table(&grid, n - s + 1.0)?;
    let comps = v.arrays();
    let mut out = table.accumulate(&grid, 1, |_, y, w, acc| {
        for (wa, comp) in w.iter().zip(&comps) {
            acc[0] += wa * comp[y];
        }
    });
    out.iter_mut().for_each(|x| *x *= c);
    if scheme.singular_correction {
        let k = c * epstein_zeta(grid.dim(), n - 1.0 - s)? / n * grid.spacing().powf(1.0 + s);
        for (o, d) in out.iter_mut().zip(central_divergence(&grid, &comps)) {
            *o += k * d;
        }
    }
    Ok(ScalarField::new(grid, out)?.mean_adjusted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, pairing, relative_l2};
    use crate::spectral;
    use crate::testfn::{sample_scalar, Bump, Gaussian};

    fn bump_1d(points: usize) -> ScalarField {
        let g = Grid::new(1, 16.0, points).unwrap();
        sample_scalar(&Bump::new(4.0, None), &g).unwrap()
    }

    #[test]
    fn constants_map_to_zero() {
        let g = Grid::new(2, 8.0, 16).unwrap();
        let u = ScalarField::new(g, vec![1.7; g.len()]).unwrap();
        for scheme in [QuadratureScheme::default(), QuadratureScheme::naive()] {
            let d = fractional_gradient_direct(&u, 0.5, &scheme).unwrap();
            assert!(lp_norm(&d, f64::INFINITY).unwrap() == 0.0);
        }
    }

    #[test]
    fn budget_and_order_are_enforced() {
        let g = Grid::new(2, 16.0, 256).unwrap();
        let u = ScalarField::zeros(g);
        let err = fractional_gradient_direct(&u, 0.5, &QuadratureScheme::default()).err().unwrap();
        assert!(matches!(err, Error::Budget { .. }));
        let small = ScalarField::zeros(Grid::new(1, 16.0, 16).unwrap());
        assert!(fractional_gradient_direct(&small, 1.0, &QuadratureScheme::default()).is_err());
    }

    #[test]
    fn periodized_scheme_tracks_the_spectral_operator() {
        let u = bump_1d(128);
        let exact = spectral::fractional_gradient(&u, 0.5).unwrap();
        let direct = fractional_gradient_direct(&u, 0.5, &QuadratureScheme::default()).unwrap();
        assert!(relative_l2(&direct, &exact).unwrap() < 0.01);
        let naive = fractional_gradient_direct(&u, 0.5, &QuadratureScheme::naive()).unwrap();
        assert!(relative_l2(&naive, &exact).unwrap() > relative_l2(&direct, &exact).unwrap());
    }

    #[test]
    fn duality_and_trace() {
        let g = Grid::new(2, 8.0, 16).unwrap();
        let u = sample_scalar(&Gaussian::new(1.0), &g).unwrap();
        let p0 = ScalarField::from_fn(g, |x| (-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp()).unwrap();
        let p1 = ScalarField::from_fn(g, |x| x[1] * (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let phi = VectorField::from_scalars(vec![p0, p1]).unwrap();
        let scheme = QuadratureScheme::default();
        let lhs = pairing(&fractional_gradient_direct(&u, 0.6, &scheme).unwrap(), &phi).unwrap();
        let rhs = pairing(&u, &fractional_divergence_direct(&phi, 0.6, &scheme).unwrap()).unwrap();
        let scale = lp_norm(&u, 2.0).unwrap() * lp_norm(&phi, 2.0).unwrap();
        assert!((lhs + rhs).abs() <= 1e-10 * scale);
        let trace = fractional_gradient_direct(&phi, 0.6, &scheme).unwrap().trace();
        let div = fractional_divergence_direct(&phi, 0.6, &scheme).unwrap();
        let err = trace.values().iter().zip(div.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * div.max_abs());
    }

    #[test]
    fn k_phi_of_identity_is_the_gradient() {
        let g = Grid::new(2, 8.0, 16).unwrap();
        let phi = sample_scalar(&Bump::new(3.0, None), &g).unwrap();
        let scheme = QuadratureScheme::default();
        let k = k_phi(&phi, &MatrixField::identity(g), 0.7, &scheme).unwrap();
        let d = fractional_gradient_direct(&phi, 0.7, &scheme).unwrap();
        assert!(relative_l2(&k, &d).unwrap() < 1e-12);
        let zero = k_phi(&phi, &MatrixField::zeros(g), 0.7, &scheme).unwrap();
        assert_eq!(lp_norm(&zero, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn ftc_recovers_the_bump() {
        let u = bump_1d(128);
        let v = spectral::fractional_gradient(&u, 0.5).unwrap();
        let back = ftc_reconstruct_direct(&v, 0.5, &QuadratureScheme::default()).unwrap();
        assert!(relative_l2(&back, &u.mean_adjusted()).unwrap() < 0.05);
    }

    #[test]
    fn scheme_parses_from_json() {
        let s: QuadratureScheme =
            serde_json::from_str(r#"{"images": {"type": "periodized", "shells": 2}, "singular_correction": false}"#).unwrap();
        assert_eq!(s.images, ImagePolicy::Periodized { shells: 2 });
        let s: QuadratureScheme =
            serde_json::from_str(r#"{"images": {"type": "nearest-image"}, "singular_correction": false}"#).unwrap();
        assert_eq!(s, QuadratureScheme::naive());
    }
}
