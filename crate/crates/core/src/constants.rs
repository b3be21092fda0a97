//! Normalization constants of the Riesz fractional calculus.
//!
//! `c_{n,s}` normalizes the fractional gradient so that its Fourier symbol is
//! exactly `2πiξ |2πξ|^{s-1}`; `γ(α)` normalizes the Riesz potential of order
//! `α`. Both are ratios of Gamma functions, evaluated here in double precision.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Largest supported spatial dimension. Direct kernel sums cost `O(N^{2n})`.
pub const MAX_DIMENSION: usize = 4;

/// Spatial dimension `n`, validated to `1..=4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if (1..=MAX_DIMENSION).contains(&n) {
            Ok(Dimension(n))
        } else {
            Err(Error::Dimension(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    fn half(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// A fractional order `s` of differentiation, strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(FractionalOrder(s))
        } else {
            Err(Error::Order {
                value: s,
                range: "(0, 1)",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        FractionalOrder::new(s)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(s: FractionalOrder) -> f64 {
        s.0
    }
}

fn check_constant_order(s: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Order {
            value: s,
            range: "[-1, 1]",
        })
    }
}

/// `c_{n,s} = Γ((n+s+1)/2) / (π^{n/2} 2^{-s} Γ((1-s)/2))` for `s ∈ [-1, 1)`,
/// and exactly `0` at `s = 1`.
pub fn c_ns(n: Dimension, s: f64) -> Result<f64> {
    check_constant_order(s)?;
    if s == 1.0 {
        return Ok(0.0);
    }
    Ok(gamma((n.get() as f64 + s + 1.0) / 2.0)
        / (PI.powf(n.half()) * 2f64.powf(-s) * gamma((1.0 - s) / 2.0)))
}

/// The defining form `(n+s-1) Γ((n+s-1)/2) / (π^{n/2} 2^{1-s} Γ((1-s)/2))`.
///
/// Equal to [`c_ns`] by `zΓ(z) = Γ(z+1)`; kept as an independent route for
/// cross-checks. Singular where `n+s-1 = 0` (only `n = 1, s = 0`), where the
/// product `(n+s-1) Γ((n+s-1)/2)` is resolved by its limit `2`.
pub fn c_ns_defining_form(n: Dimension, s: f64) -> Result<f64> {
    check_constant_order(s)?;
    if s == 1.0 {
        return Ok(0.0);
    }
    let z = n.get() as f64 + s - 1.0;
    let numerator = if z == 0.0 { 2.0 } else { z * gamma(z / 2.0) };
    Ok(numerator / (PI.powf(n.half()) * 2f64.powf(1.0 - s) * gamma((1.0 - s) / 2.0)))
}

/// `c_{n,s}/(1-s)`, continuously extended to `s = 1` by its limit `1/ω_n`.
pub fn c_ns_over_one_minus_s(n: Dimension, s: f64) -> Result<f64> {
    check_constant_order(s)?;
    if s == 1.0 {
        return Ok(1.0 / unit_ball_volume(n));
    }
    Ok(gamma((n.get() as f64 + s + 1.0) / 2.0)
        / (PI.powf(n.half()) * 2f64.powf(1.0 - s) * gamma((3.0 - s) / 2.0)))
}

/// Riesz potential normalization `γ(α) = π^{n/2} 2^α Γ(α/2) / Γ((n-α)/2)`, `0 < α < n`.
pub fn gamma_riesz(n: Dimension, alpha: f64) -> Result<f64> {
    let nf = n.get() as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::Order {
            value: alpha,
            range: "(0, n)",
        });
    }
    Ok(PI.powf(n.half()) * 2f64.powf(alpha) * gamma(alpha / 2.0) / gamma((nf - alpha) / 2.0))
}

/// Volume `ω_n = π^{n/2} / Γ(1 + n/2)` of the unit ball.
pub fn unit_ball_volume(n: Dimension) -> f64 {
    PI.powf(n.half()) / gamma(1.0 + n.half())
}

/// Surface area `σ_{n-1} = n ω_n` of the unit sphere.
pub fn unit_sphere_area(n: Dimension) -> f64 {
    n.get() as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn dimension_cap() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(5).is_err());
        assert_eq!(Dimension::new(4).unwrap().get(), 4);
    }

    #[test]
    fn vanishes_at_one() {
        assert_eq!(c_ns(dim(2), 1.0).unwrap(), 0.0);
        assert!(c_ns(dim(2), 1.5).is_err());
        assert!(c_ns(dim(2), -1.01).is_err());
    }

    // Reference values from 30-digit mpmath evaluation of the closed forms.
    #[test]
    fn matches_high_precision_values() {
        assert!(rel(c_ns(dim(1), 0.5).unwrap(), 0.199_471_140_200_716_34) < 1e-14);
        assert!(rel(c_ns(dim(2), 0.5).unwrap(), 0.114_111_419_793_701_56) < 1e-14);
        assert!(rel(c_ns(dim(3), -0.4).unwrap(), 0.097_655_937_419_176_496) < 1e-14);
        assert!(rel(gamma_riesz(dim(3), 0.25).unwrap(), 56.123_535_501_582_032) < 1e-14);
        assert!(rel(gamma_riesz(dim(1), 0.5).unwrap(), 2.506_628_274_631_000_5) < 1e-14);
    }

    #[test]
    fn riesz_normalization_cancels_at_one_in_the_plane() {
        assert!(rel(gamma_riesz(dim(2), 1.0).unwrap(), 2.0 * PI) < 1e-14);
        assert!(gamma_riesz(dim(2), 2.0).is_err());
        assert!(gamma_riesz(dim(2), 0.0).is_err());
    }

    #[test]
    fn limit_over_one_minus_s() {
        let ratio = c_ns(dim(2), 0.999).unwrap() / 0.001;
        assert!(rel(ratio, 1.0 / PI) < 5e-3);
        assert!(rel(ratio, 0.318_113_849_713_992_93) < 1e-12);
        assert_eq!(c_ns_over_one_minus_s(dim(3), 1.0).unwrap(), 1.0 / unit_ball_volume(dim(3)));
    }

    #[test]
    fn ball_and_sphere() {
        assert!(rel(unit_ball_volume(dim(1)), 2.0) < 1e-14);
        assert!(rel(unit_ball_volume(dim(2)), PI) < 1e-14);
        assert!(rel(unit_ball_volume(dim(3)), 4.0 * PI / 3.0) < 1e-14);
        assert!(rel(unit_sphere_area(dim(3)), 4.0 * PI) < 1e-14);
    }

    #[test]
    fn both_forms_agree_on_grid() {
        for n in 1..=3 {
            for i in 0..199 {
                let s = -0.99 + 1.98 * i as f64 / 198.0;
                let a = c_ns(dim(n), s).unwrap();
                let b = c_ns_defining_form(dim(n), s).unwrap();
                assert!(rel(b, a) < 1e-12, "n={n} s={s}: {a} vs {b}");
            }
        }
        // resolved singular point of the defining form
        let a = c_ns(dim(1), 0.0).unwrap();
        assert!(rel(c_ns_defining_form(dim(1), 0.0).unwrap(), a) < 1e-14);
    }

    #[test]
    fn riesz_relation() {
        for n in 1..=3 {
            for i in 1..50 {
                let s = i as f64 / 50.0;
                let lhs = c_ns(dim(n), s).unwrap();
                let rhs = (n as f64 + s - 1.0) / gamma_riesz(dim(n), 1.0 - s).unwrap();
                assert!(rel(lhs, rhs) < 1e-12, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn decays_monotonically_to_zero() {
        for n in 1..=3 {
            let vals: Vec<f64> = (1..=6)
                .map(|e| c_ns(dim(n), 1.0 - 10f64.powi(-e)).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
            assert!(vals[5] < 1e-5);
        }
    }

    #[test]
    fn ratio_stays_bounded() {
        for n in 1..=3 {
            let sup = (0..2000)
                .map(|i| -1.0 + 2.0 * i as f64 / 2000.0)
                .map(|s| c_ns_over_one_minus_s(dim(n), s).unwrap())
                .fold(0.0f64, f64::max);
            assert!(sup.is_finite() && sup < 10.0);
        }
    }
}
