//! Minors of matrix fields and the nonlocal determinant identities.
//!
//! Row and column indices in [`MinorIndex`] are 1-based, matching the usual
//! notation `M_{i₁…i_k; j₁…j_k}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{pairing, Field, Grid, MatrixField, ScalarField, VectorField};
use crate::quadrature::{k_phi, QuadratureScheme};
use crate::spectral;
use crate::table::{Cell, SweepTable};
use crate::testfn::{sample_scalar, Bump};

/// Rows and columns of a `k×k` minor of an `n×n` matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MinorIndex {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn strictly_increasing_in(v: &[usize], n: usize) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|&i| (1..=n).contains(&i))
}

impl MinorIndex {
    pub fn new(n: usize, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.is_empty() || rows.len() != cols.len() || rows.len() > n {
            return Err(Error::MinorIndex(format!(
                "need 1 <= k <= {n} rows and as many columns, got {rows:?} / {cols:?}"
            )));
        }
        if !strictly_increasing_in(rows, n) || !strictly_increasing_in(cols, n) {
            return Err(Error::MinorIndex(format!(
                "indices must be strictly increasing within 1..={n}, got {rows:?} / {cols:?}"
            )));
        }
        Ok(MinorIndex {
            n,
            rows: rows.to_vec(),
            cols: cols.to_vec(),
        })
    }

    /// The full `n×n` minor (the determinant).
    pub fn full(n: usize) -> Self {
        let all: Vec<usize> = (1..=n).collect();
        MinorIndex {
            n,
            rows: all.clone(),
            cols: all,
        }
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for rest in subsets(n, k - 1) {
            if rest.first().is_none_or(|&r| r > first) {
                let mut v = vec![first];
                v.extend(rest);
                out.push(v);
            }
        }
    }
    out.sort();
    out
}

/// Every minor of an `n×n` matrix: orders ascending, then rows and columns
/// lexicographically. There are `Σ_k C(n,k)²` of them.
pub fn enumerate_minors(n: usize) -> Vec<MinorIndex> {
    let mut out = Vec::new();
    for k in 1..=n {
        let sets = subsets(n, k);
        for rows in &sets {
            for cols in &sets {
                out.push(MinorIndex {
                    n,
                    rows: rows.clone(),
                    cols: cols.clone(),
                });
            }
        }
    }
    out
}

/// `M(F)`: the `k×k` submatrix of a row-major `n×n` matrix.
pub fn submatrix(f: &[f64], idx: &MinorIndex) -> Vec<f64> {
    let n = idx.n;
    idx.rows
        .iter()
        .flat_map(|&r| idx.cols.iter().map(move |&c| f[(r - 1) * n + c - 1]))
        .collect()
}

/// `M̄(G)`: the `n×n` matrix holding `G` in the selected rows and columns, zero elsewhere.
pub fn embed(g: &[f64], idx: &MinorIndex) -> Vec<f64> {
    let n = idx.n;
    let k = idx.order();
    let mut out = vec![0.0; n * n];
    for (a, &r) in idx.rows.iter().enumerate() {
        for (b, &c) in idx.cols.iter().enumerate() {
            out[(r - 1) * n + c - 1] = g[a * k + b];
        }
    }
    out
}

/// `Ñ(v)`: keeps the entries of `v` in `rows` (1-based), zeroes the rest.
pub fn restrict(v: &[f64], rows: &[usize]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| if rows.contains(&(i + 1)) { x } else { 0.0 })
        .collect()
}

/// Matrix with row `skip_r` and column `skip_c` removed.
fn drop_row_col(m: &[f64], k: usize, skip_r: usize, skip_c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((k - 1) * (k - 1));
    for i in (0..k).filter(|&i| i != skip_r) {
        for j in (0..k).filter(|&j| j != skip_c) {
            out.push(m[i * k + j]);
        }
    }
    out
}

/// Determinant of a row-major `k×k` matrix by cofactor expansion (`k ≤ 4`).
pub fn det(m: &[f64], k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => (0..k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[j] * det(&drop_row_col(m, k, 0, j), k - 1)
            })
            .sum(),
    }
}

/// Cofactor matrix, `cof(F)_{ij} = (-1)^{i+j} det F^{(ij)}`; `[1]` for `k = 1`.
pub fn cof(m: &[f64], k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[i * k + j] = sign * det(&drop_row_col(m, k, i, j), k - 1);
        }
    }
    out
}

/// Values of all minors in [`enumerate_minors`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorVector(pub Vec<f64>);

impl MinorVector {
    pub fn of(f: &[f64], n: usize) -> Self {
        MinorVector(
            enumerate_minors(n)
                .iter()
                .map(|idx| det(&submatrix(f, idx), idx.order()))
                .collect(),
        )
    }
}

fn pointwise<T: Send>(grid: &Grid, f: &MatrixField, op: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let mut buf = [0.0; 16];
            f.at(j, &mut buf[..n * n]);
            op(&buf[..n * n])
        })
        .collect()
}

pub fn det_field(f: &MatrixField) -> Result<ScalarField> {
    let n = f.grid().dim();
    ScalarField::new(*f.grid(), pointwise(f.grid(), f, |m| det(m, n)))
}

pub fn cof_field(f: &MatrixField) -> Result<MatrixField> {
    let grid = *f.grid();
    let n = grid.dim();
    let values = pointwise(&grid, f, |m| cof(m, n));
    MatrixField::from_pointwise(grid, |j, out| out.copy_from_slice(&values[j]))
}

pub fn minor_field(f: &MatrixField, idx: &MinorIndex) -> Result<ScalarField> {
    if idx.n != f.grid().dim() {
        return Err(Error::MinorIndex(format!("index is for n={}, field has n={}", idx.n, f.grid().dim())));
    }
    ScalarField::new(*f.grid(), pointwise(f.grid(), f, |m| det(&submatrix(m, idx), idx.order())))
}

/// Denominator guard in relative residuals.
pub const EPSILON: f64 = 1e-30;

/// Residual of the nonlocal integration by parts for a minor of order `k ≥ 2`:
///
/// `-(1/k) ∫ Ñ(u)·K^s_φ(M̄(cof M(D^s u))) = ∫ det M(D^s u) φ`.
///
/// `D^s u` is spectral and `K^s_φ` uses the direct scheme, so the two sides
/// are computed by independent discretizations. Returns `|LHS - RHS| / (|RHS| + ε)`.
pub fn det_ibp_residual(
    u: &VectorField,
    s: f64,
    idx: &MinorIndex,
    phi: &ScalarField,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let grid = *u.grid();
    grid.ensure_same(phi.grid())?;
    let k = idx.order();
    if k < 2 || idx.n != grid.dim() {
        return Err(Error::MinorIndex(format!(
            "identity needs a minor of order >= 2 for n={}, got order {k} for n={}",
            grid.dim(),
            idx.n
        )));
    }
    let du = spectral::fractional_gradient(u, s)?;
    let n = grid.dim();
    let mut buf = [0.0; 16];
    let embedded = MatrixField::from_pointwise(grid, |j, out| {
        du.at(j, &mut buf[..n * n]);
        out.copy_from_slice(&embed(&cof(&submatrix(&buf[..n * n], idx), k), idx));
    })?;
    let kv = k_phi(phi, &embedded, s, scheme)?;
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        let keep = idx.rows.contains(&(i + 1));
        comps.push(if keep { u.component(i).to_vec() } else { vec![0.0; grid.len()] });
    }
    let restricted = VectorField::new(grid, comps)?;
    let lhs = -pairing(&restricted, &kv)? / k as f64;
    let rhs = pairing(&minor_field(&du, idx)?, phi)?;
    Ok((lhs - rhs).abs() / (rhs.abs() + EPSILON))
}

/// The three fixed bumps used to probe weak convergence in the plane.
pub fn default_weak_tests(grid: &Grid) -> Result<Vec<ScalarField>> {
    if grid.dim() != 2 {
        return Err(Error::param("the default weak-convergence probes are planar"));
    }
    [(vec![0.0, 0.0], 2.0), (vec![1.0, 0.5], 1.5), (vec![-1.0, -1.0], 2.5)]
        .into_iter()
        .map(|(c, r)| sample_scalar(&Bump::new(r, Some(c)), grid))
        .collect()
}

/// Pairings of `det D^s u` and `cof D^s u` with each test function against
/// their classical limits.
///
/// Rows are `(s, quantity, value, limit, rel_err)`. For `det/theta<t>` the
/// value is `∫ det(D^s u) θ_t`. For `cof/theta<t>` the pairings of all cofactor
/// entries form a matrix `P_s`; the value is `‖P_s‖_F`, and `rel_err` is
/// `‖P_s - P_1‖_F / ‖P_1‖_F`. Rows with `s = 1` carry the classical values.
pub fn weak_pairing_sweep(u: &VectorField, s_grid: &[f64], tests: &[ScalarField]) -> Result<SweepTable> {
    let grid = *u.grid();
    let n = grid.dim();
    let pairings = |grad: &MatrixField| -> Result<Vec<(f64, Vec<f64>)>> {
        let d = det_field(grad)?;
        let c = cof_field(grad)?;
        tests
            .iter()
            .map(|theta| {
                let cof_pairs = (0..n * n)
                    .map(|e| {
                        let entry = ScalarField::new(grid, c.entries()[e].clone())?;
                        pairing(&entry, theta)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((pairing(&d, theta)?, cof_pairs))
            })
            .collect()
    };
    let limit = pairings(&spectral::classical_gradient(u)?)?;
    let per_s = s_grid
        .par_iter()
        .map(|&s| pairings(&spectral::fractional_gradient(u, s)?))
        .collect::<Result<Vec<_>>>()?;
    let frob = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut table = SweepTable::new(["s", "quantity", "value", "limit", "rel_err"]);
    let rows = s_grid.iter().copied().zip(per_s).chain(std::iter::once((1.0, limit.clone())));
    for (s, values) in rows {
        for (t, ((det_v, cof_v), (det_l, cof_l))) in values.iter().zip(&limit).enumerate() {
            table.push(vec![
                Cell::from(s),
                Cell::from(format!("det/theta{t}")),
                Cell::from(*det_v),
                Cell::from(*det_l),
                Cell::from((det_v - det_l).abs() / (det_l.abs() + EPSILON)),
            ])?;
            let diff: Vec<f64> = cof_v.iter().zip(cof_l).map(|(a, b)| a - b).collect();
            table.push(vec![
                Cell::from(s),
                Cell::from(format!("cof/theta{t}")),
                Cell::from(frob(cof_v)),
                Cell::from(frob(cof_l)),
                Cell::from(frob(&diff) / (frob(cof_l) + EPSILON)),
            ])?;
        }
    }
    Ok(table)
}
