//! Lattice sums used by the direct quadrature: the Epstein zeta function of
//! the integer lattice and the far-field face integral of a periodized kernel.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Upper incomplete integral `∫_1^∞ t^{ν-1} e^{-xt} dt` for `x ≥ 1`.
fn upper_integral(nu: f64, x: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    // t = 1 + τ/x turns this into e^{-x}/x ∫_0^∞ (1 + τ/x)^{ν-1} e^{-τ} dτ
    let (nodes, weights) = rule;
    let mut sum = 0.0;
    for k in 0..45 {
        for (z, w) in nodes.iter().zip(weights) {
            let tau = k as f64 + 0.5 * (z + 1.0);
            sum += 0.5 * w * (1.0 + tau / x).powf(nu - 1.0) * (-tau).exp();
        }
    }
    (-x).exp() / x * sum
}

/// Epstein zeta function `Z_n(a) = Σ_{m ∈ ℤ^n \ 0} |m|^{-a}`, analytically
/// continued to `a ∈ (-2, n)` through the theta-function splitting.
pub fn epstein_zeta(n: usize, a: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(a > -2.0 && a < nf) {
        return Err(Error::Order {
            value: a,
            range: "(-2, n)",
        });
    }
    let rule = gauss_legendre(8);
    let r = 3i64;
    let side = (2 * r + 1) as usize;
    let mut sum = 0.0;
    let mut m = vec![0i64; n];
    for flat in 0..side.pow(n as u32) {
        let mut rest = flat;
        for c in m.iter_mut() {
            *c = (rest % side) as i64 - r;
            rest /= side;
        }
        let sq: i64 = m.iter().map(|c| c * c).sum();
        if sq == 0 {
            continue;
        }
        let x = PI * sq as f64;
        if x > 40.0 {
            continue;
        }
        sum += upper_integral(a / 2.0, x, &rule) + upper_integral((nf - a) / 2.0, x, &rule);
    }
    let half = a / 2.0;
    Ok(PI.powf(half) / gamma(1.0 + half) * (half * (sum + 2.0 / (a - nf)) - 1.0))
}

/// `∫_{[-A,A]^{n-1}} A (A² + |w|²)^{-β/2} dw`, the flux of `z/|z|^β` through
/// one face of the cube `[-A, A]^n`. For `n = 1` this is `A^{1-β}`.
pub fn face_integral(n: usize, beta: f64, a: f64) -> f64 {
    if n == 1 {
        return a * a.powf(-beta);
    }
    let (nodes, weights) = gauss_legendre(32);
    let d = n - 1;
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    for flat in 0..32usize.pow(d as u32) {
        let mut rest = flat;
        let mut w = 1.0;
        let mut r2 = 0.0;
        for i in idx.iter_mut() {
            *i = rest % 32;
            rest /= 32;
            let y = a * nodes[*i];
            r2 += y * y;
            w *= a * weights[*i];
        }
        total += w * a * (a * a + r2).powf(-beta / 2.0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let integral = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((integral(0) - 2.0).abs() < 1e-14);
        assert!((integral(14) - 2.0 / 15.0).abs() < 1e-14);
        assert!(integral(7).abs() < 1e-14);
    }

    // Reference values from 20-digit mpmath evaluation.
    #[test]
    fn epstein_values() {
        let cases = [
            (1, 0.5, -2.920_709_017_619_173_6),
            (1, -0.5, -0.415_772_449_954_709_13),
            (1, 0.0, -1.0),
            (2, 1.5, -10.077_559_478_793_152),
            (2, 1.2, -5.427_516_684_766_813),
            (2, 0.5, -1.921_689_221_179_930_1),
        ];
        for (n, a, expected) in cases {
            let z = epstein_zeta(n, a).unwrap();
            assert!((z - expected).abs() < 1e-11 * expected.abs(), "Z_{n}({a}) = {z}");
        }
        assert!(epstein_zeta(2, 2.0).is_err());
        assert!(epstein_zeta(1, -2.0).is_err());
    }

    #[test]
    fn one_dimensional_zeta_is_twice_riemann() {
        // Z_1(a) = 2ζ(a); ζ(-1/2) ≈ -0.2078862249773545660
        let z = epstein_zeta(1, -0.5).unwrap();
        assert!((z - 2.0 * -0.207_886_224_977_354_57).abs() < 1e-12);
    }

    #[test]
    fn face_integral_in_the_plane() {
        // n = 2, β = 2: ∫_{-A}^{A} A/(A²+w²) dw = 2 atan(1) = π/2
        assert!((face_integral(2, 2.0, 3.0) - PI / 2.0).abs() < 1e-12);
        assert!((face_integral(1, 2.5, 2.0) - 2f64.powf(-1.5)).abs() < 1e-15);
    }
}
