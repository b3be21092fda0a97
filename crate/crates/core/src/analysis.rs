//! Fractional norms and seminorms, and the inequality harness that tracks
//! Poincaré, embedding and order-comparison ratios along fixed families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::FractionalOrder;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Field, Grid, ScalarField};
use crate::lattice::epstein_zeta;
use crate::quadrature::KERNEL_BUDGET;
use crate::spectral;
use crate::table::{Cell, SweepTable};
use crate::testfn::{self, sample_scalar};

/// Rasterized shape of `Ω`, as read from configs: `{"type": "ball", "r": 4.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaSpec {
    Ball {
        r: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Rect {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// The whole box; no complementary region.
    Full,
}

/// Cell-center membership of `Ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: Grid,
    inside: Vec<bool>,
    description: String,
}

impl DomainMask {
    pub fn new(spec: &OmegaSpec, grid: &Grid) -> Result<Self> {
        let n = grid.dim();
        let half = grid.length() / 2.0;
        let margin = 2.0 * grid.spacing();
        let check_len = |v: &[f64], what: &str| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::param(format!("{what} needs {n} entries, got {}", v.len())))
            }
        };
        let (inside, description): (Vec<bool>, String) = match spec {
            OmegaSpec::Ball { r, center } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; n]);
                check_len(&c, "ball center")?;
                if !(*r > 0.0) || c.iter().any(|ci| ci.abs() + r > half - margin) {
                    return Err(Error::Support(format!(
                        "ball of radius {r} must stay 2h inside the box [-{half}, {half})"
                    )));
                }
                let mut x = [0.0; 4];
                let inside = (0..grid.len())
                    .map(|j| {
                        grid.point(j, &mut x[..n]);
                        x[..n].iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r * r
                    })
                    .collect();
                (inside, format!("ball(r={r}, center={c:?})"))
            }
            OmegaSpec::Rect { lower, upper } => {
                check_len(lower, "rect lower corner")?;
                check_len(upper, "rect upper corner")?;
                if lower.iter().zip(upper).any(|(a, b)| !(a < b) || *a < -half + margin || *b > half - margin) {
                    return Err(Error::Support("rectangle must be nondegenerate and stay 2h inside the box".into()));
                }
                let mut x = [0.0; 4];
                let inside = (0..grid.len())
                    .map(|j| {
                        grid.point(j, &mut x[..n]);
                        (0..n).all(|a| x[a] > lower[a] && x[a] < upper[a])
                    })
                    .collect();
                (inside, format!("rect({lower:?}, {upper:?})"))
            }
            OmegaSpec::Full => (vec![true; grid.len()], "full box".to_string()),
        };
        if !inside.iter().any(|&b| b) {
            return Err(Error::Support(format!("{description} contains no grid cell")));
        }
        Ok(DomainMask {
            grid: *grid,
            inside,
            description,
        })
    }

    pub fn ball(grid: &Grid, r: f64) -> Result<Self> {
        DomainMask::new(&OmegaSpec::Ball { r, center: None }, grid)
    }

    pub fn full(grid: &Grid) -> Self {
        DomainMask::new(&OmegaSpec::Full, grid).expect("full mask is never empty")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn contains(&self, j: usize) -> bool {
        self.inside[j]
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }
}

/// Integrability exponent `p ∈ (1, ∞)` with its derived exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p > 1.0 && p.is_finite() {
            Ok(Exponent(p))
        } else {
            Err(Error::param(format!("exponent p must lie in (1, ∞), got {p}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Hölder conjugate `p/(p-1)`.
    pub fn conjugate(self) -> f64 {
        self.0 / (self.0 - 1.0)
    }

    /// Fractional Sobolev exponent `pn/(n - sp)`, defined when `sp < n`.
    pub fn fractional_sobolev(self, n: usize, s: f64) -> Option<f64> {
        let n = n as f64;
        (s * self.0 < n).then(|| self.0 * n / (n - s * self.0))
    }

    /// Sobolev exponent `pn/(n - p)`, defined when `p < n`.
    pub fn sobolev(self, n: usize) -> Option<f64> {
        self.fractional_sobolev(n, 1.0)
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

fn order(s: f64) -> Result<f64> {
    FractionalOrder::new(s).map(FractionalOrder::get)
}

/// `‖u‖_p + ‖D^s u‖_p` with the spectral gradient.
pub fn hsp_norm(u: &ScalarField, s: f64, p: Exponent) -> Result<f64> {
    let d = spectral::fractional_gradient(u, order(s)?)?;
    Ok(lp_norm(u, p.get())? + lp_norm(&d, p.get())?)
}

/// Gagliardo seminorm `(∫∫ |u(x)-u(y)|^p / |x-y|^{n+sp})^{1/p}` by a double sum
/// over nearest-image offsets with the diagonal skipped.
///
/// When `n = 1` or `p = 2` the skipped near-diagonal contribution has a closed
/// leading term `|Du|^p |z|^{p-n-sp}` (averaged over directions), which is
/// added back using the lattice zeta function and a centered-difference `Du`.
pub fn gagliardo_seminorm(u: &ScalarField, s: f64, p: Exponent) -> Result<f64> {
    let s = order(s)?;
    let p = p.get();
    let grid = *u.grid();
    let n = grid.dim();
    let total = (grid.points() as u128).pow(2 * n as u32);
    if total > KERNEL_BUDGET {
        return Err(Error::Budget {
            evaluations: total,
            limit: KERNEL_BUDGET,
        });
    }
    let points = grid.points();
    let half = (points / 2) as i64;
    let side = (2 * half - 1) as usize;
    let h = grid.spacing();
    let beta = n as f64 + s * p;
    // offsets m with |m_a| < N/2, row-major; weight |mh|^{-(n+sp)}
    let offsets: Vec<(Vec<i64>, f64)> = (0..side.pow(n as u32))
        .filter_map(|k| {
            let mut rest = k;
            let mut m = vec![0i64; n];
            for a in (0..n).rev() {
                m[a] = (rest % side) as i64 - (half - 1);
                rest /= side;
            }
            let r2: f64 = m.iter().map(|&v| (v as f64 * h).powi(2)).sum();
            (r2 > 0.0).then(|| (m, r2.powf(-beta / 2.0)))
        })
        .collect();
    let values = u.values();
    let raw: f64 = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let mut idx = [0usize; 4];
            grid.multi_index(x, &mut idx[..n]);
            let mut acc = 0.0;
            for (m, w) in &offsets {
                let y = (0..n).fold(0usize, |flat, a| {
                    flat * points + (idx[a] as i64 - m[a]).rem_euclid(points as i64) as usize
                });
                let d = (values[x] - values[y]).abs();
                if d > 0.0 {
                    acc += w * d.powf(p);
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let vol = grid.cell_volume();
    let mut total = raw * vol * vol;
    let a = n as f64 + s * p - p;
    if (n == 1 || p == 2.0) && a > -2.0 {
        let factor = if n == 1 { 1.0 } else { 1.0 / n as f64 };
        let du = central_gradient_magnitude(&grid, values);
        let mass: f64 = du.iter().map(|g| g.powf(p)).sum::<f64>() * vol;
        total += factor * mass * (-h.powf(n as f64 - a) * epstein_zeta(n, a)?);
    }
    Ok(total.max(0.0).powf(1.0 / p))
}

fn central_gradient_magnitude(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let n = grid.dim();
    let points = grid.points();
    let inv = 1.0 / (2.0 * grid.spacing());
    (0..grid.len())
        .map(|x| {
            (0..n)
                .map(|a| {
                    let stride = grid.stride(a);
                    let i = (x / stride) % points;
                    let up = if i + 1 == points { x + stride - points * stride } else { x + stride };
                    let down = if i == 0 { x + (points - 1) * stride } else { x - stride };
                    ((f[up] - f[down]) * inv).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Relative `L^p` mass outside `Ω` accepted as "supported in `Ω`".
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// `‖u‖_{L^p(Ω)} / ‖D^s u‖_p` for `u` supported in `Ω`.
pub fn poincare_ratio(u: &ScalarField, s: f64, p: Exponent, mask: &DomainMask) -> Result<f64> {
    let s = order(s)?;
    u.grid().ensure_same(mask.grid())?;
    let pv = p.get();
    let (mut inner, mut outer) = (0.0, 0.0);
    for (j, v) in u.values().iter().enumerate() {
        let m = v.abs().powf(pv);
        if mask.contains(j) {
            inner += m;
        } else {
            outer += m;
        }
    }
    if outer > SUPPORT_TOLERANCE * (inner + outer) {
        return Err(Error::Support(format!(
            "{:e} of the L^p mass lies outside {}",
            outer / (inner + outer),
            mask.description()
        )));
    }
    let d = lp_norm(&spectral::fractional_gradient(u, s)?, pv)?;
    if d == 0.0 {
        return Err(Error::ZeroDenominator("Poincaré ratio (zero fractional gradient)"));
    }
    Ok((inner * u.grid().cell_volume()).powf(1.0 / pv) / d)
}

/// `‖D^s u‖_p / (‖u‖_p + ‖Du‖_p)`.
pub fn embedding_ratio(u: &ScalarField, s: f64, p: Exponent) -> Result<f64> {
    let s = order(s)?;
    let pv = p.get();
    let num = lp_norm(&spectral::fractional_gradient(u, s)?, pv)?;
    let den = lp_norm(u, pv)? + lp_norm(&spectral::classical_gradient(u)?, pv)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("embedding ratio"));
    }
    Ok(num / den)
}

/// Fixed lower order used for the order-comparison column of the sweep.
pub const SBAR: f64 = 0.3;

fn spec_label(spec: &Value) -> String {
    if let Some(label) = spec.get("label").and_then(Value::as_str) {
        return label.to_string();
    }
    let name = spec.get("spec").and_then(Value::as_str).unwrap_or("?");
    let mut params: Vec<String> = spec
        .as_object()
        .map(|o| {
            o.iter()
                .filter(|(k, _)| k.as_str() != "spec")
                .map(|(k, v)| format!("{k}={v}"))
                .collect()
        })
        .unwrap_or_default();
    if params.is_empty() {
        return name.to_string();
    }
    params.sort();
    format!("{name}({})", params.join(";"))
}

/// Rows `(spec, s, poincare_ratio, embedding_ratio, grad_ratio_sbar)` for every
/// pair of test function and order, in input order.
pub fn inequality_sweep(
    family: &[Value],
    s_grid: &[f64],
    p: Exponent,
    mask: &DomainMask,
) -> Result<SweepTable> {
    let grid = *mask.grid();
    let registry = testfn::registry();
    let fields = family
        .iter()
        .map(|spec| {
            let f = registry.create_from_spec("spec", spec, &grid)?;
            Ok((spec_label(spec), sample_scalar(f.as_ref(), &grid)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for &s in s_grid {
        order(s)?;
    }
    let cells: Vec<(usize, f64)> = (0..fields.len())
        .flat_map(|i| s_grid.iter().map(move |&s| (i, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, s)| {
            let (label, u) = &fields[i];
            let pv = p.get();
            let high = lp_norm(&spectral::fractional_gradient(u, s)?, pv)?;
            let low = lp_norm(&spectral::fractional_gradient(u, SBAR)?, pv)?;
            if high == 0.0 {
                return Err(Error::ZeroDenominator("order-comparison ratio"));
            }
            Ok(vec![
                Cell::from(label.as_str()),
                Cell::from(s),
                Cell::from(poincare_ratio(u, s, p, mask)?),
                Cell::from(embedding_ratio(u, s, p)?),
                Cell::from(low / high),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable::new(["spec", "s", "poincare_ratio", "embedding_ratio", "grad_ratio_sbar"]);
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{Bump, Gaussian};
    use serde_json::json;

    #[test]
    fn masks() {
        let g = Grid::new(2, 16.0, 32).unwrap();
        let m = DomainMask::ball(&g, 4.0).unwrap();
        assert!(m.contains(g.flat_index(&[16, 16])));
        assert!(!m.contains(0));
        assert!(DomainMask::ball(&g, 7.9).is_err());
        assert!(DomainMask::ball(&g, 0.01).is_err());
        assert!(DomainMask::full(&g).is_full());
        let spec: OmegaSpec = serde_json::from_value(json!({"type": "rect", "lower": [-2, -1], "upper": [2, 1]})).unwrap();
        assert!(DomainMask::new(&spec, &g).is_ok());
    }

    #[test]
    fn exponents() {
        let p = Exponent::new(2.0).unwrap();
        assert_eq!(p.conjugate(), 2.0);
        assert_eq!(p.fractional_sobolev(3, 0.5), Some(3.0));
        assert_eq!(p.sobolev(2), None);
        assert!(Exponent::new(1.0).is_err());
    }

    #[test]
    fn seminorm_of_constant_and_scaling() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        let p = Exponent::new(2.0).unwrap();
        let c = ScalarField::new(g, vec![2.0; 64]).unwrap();
        assert_eq!(gagliardo_seminorm(&c, 0.5, p).unwrap(), 0.0);
        let u = sample_scalar(&Bump::new(3.0, None), &g).unwrap();
        let a = gagliardo_seminorm(&u, 0.5, p).unwrap();
        let b = gagliardo_seminorm(&u.scaled(-3.0), 0.5, p).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn poincare_errors() {
        let g = Grid::new(2, 16.0, 32).unwrap();
        let mask = DomainMask::ball(&g, 4.0).unwrap();
        let p = Exponent::new(2.0).unwrap();
        let zero = ScalarField::zeros(g);
        assert!(matches!(poincare_ratio(&zero, 0.5, p, &mask), Err(Error::ZeroDenominator(_))));
        let wide = sample_scalar(&Gaussian::new(2.0), &g).unwrap();
        assert!(matches!(poincare_ratio(&wide, 0.5, p, &mask), Err(Error::Support(_))));
        let bump = sample_scalar(&Bump::new(3.5, None), &g).unwrap();
        assert!(poincare_ratio(&bump, 0.9, p, &mask).unwrap().is_finite());
    }

    #[test]
    fn sweep_shapes() {
        let g = Grid::new(1, 16.0, 64).unwrap();
        let mask = DomainMask::ball(&g, 5.0).unwrap();
        let p = Exponent::new(2.0).unwrap();
        let empty = inequality_sweep(&[], &[0.5], p, &mask).unwrap();
        assert!(empty.is_empty());
        let fam = [json!({"spec": "bump", "radius": 4.0})];
        let t = inequality_sweep(&fam, &[0.5, 0.6, 0.7, 0.8, 0.9], p, &mask).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.rows()[0][0], Cell::Text("bump(radius=4.0)".into()));
    }
}
