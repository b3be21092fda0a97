//! Periodic box `[-L/2, L/2)^n` standing in for `ℝ^n`, and the sampled fields
//! that live on it.
//!
//! Values are stored row-major over the axes (axis 0 varies slowest) and
//! sampled at cell centers `x_j = -L/2 + (j + 1/2) h`.

use serde::{Deserialize, Serialize};

use crate::constants::Dimension;
use crate::error::{Error, Result};

/// Upper bound on `N^n`.
pub const MAX_POINTS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: Dimension,
    length: f64,
    points: usize,
}

impl Grid {
    pub fn new(n: usize, length: f64, points: usize) -> Result<Self> {
        let dim = Dimension::new(n)?;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("box length must be positive, got {length}")));
        }
        if !points.is_multiple_of(2) || points < 8 {
            return Err(Error::Grid(format!(
                "samples per axis must be even and at least 8, got {points}"
            )));
        }
        let total = (points as u128).pow(n as u32);
        if total > MAX_POINTS as u128 {
            return Err(Error::Grid(format!(
                "{points}^{n} = {total} points exceeds the cap of {MAX_POINTS}"
            )));
        }
        Ok(Grid { dim, length, points })
    }

    pub fn dimension(&self) -> Dimension {
        self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim.get()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Samples per axis `N`.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Cell width `h = L/N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// `h^n`, the weight of one sample in Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim() - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            out[axis] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Cell-center coordinate of sample `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -self.length / 2.0 + (j as f64 + 0.5) * self.spacing()
    }

    /// Physical position of the sample with flat index `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 4];
        self.multi_index(flat, &mut idx[..self.dim()]);
        for axis in 0..self.dim() {
            out[axis] = self.coordinate(idx[axis]);
        }
    }

    /// Signed integer wavenumber `k ∈ {-N/2, …, N/2-1}` of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j < self.points / 2 {
            j as i64
        } else {
            j as i64 - self.points as i64
        }
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Read access shared by scalar, vector and matrix fields.
pub trait Field {
    fn grid(&self) -> &Grid;

    /// The component arrays, each of length `N^n`.
    fn arrays(&self) -> Vec<&[f64]>;
}

/// Fields that can be rebuilt from their component arrays.
pub trait FieldArrays: Field + Sized {
    /// Number of component arrays for a grid of dimension `n`.
    fn component_count(n: usize) -> usize;

    fn from_arrays(grid: Grid, arrays: Vec<Vec<f64>>) -> Result<Self>;

    fn into_arrays(self) -> Vec<Vec<f64>>;
}

/// Fields whose fractional gradient is defined: scalars map to vector fields,
/// vector maps to matrix fields with row `i` the gradient of component `i`.
pub trait Differentiable: Field {
    type Gradient: FieldArrays;
}

impl Differentiable for ScalarField {
    type Gradient = VectorField;
}

impl Differentiable for VectorField {
    type Gradient = MatrixField;
}

fn check_arrays(grid: &Grid, arrays: &[Vec<f64>], expected: usize, what: &'static str) -> Result<()> {
    if arrays.len() != expected {
        return Err(Error::param(format!(
            "{what} needs {expected} components, got {}",
            arrays.len()
        )));
    }
    for a in arrays {
        if a.len() != grid.len() {
            return Err(Error::param(format!(
                "{what} component has {} samples, grid has {}",
                a.len(),
                grid.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_arrays(&grid, std::slice::from_ref(&values), 1, "scalar field")?;
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut x = [0.0; 4];
        let values = (0..grid.len())
            .map(|j| {
                grid.point(j, &mut x[..grid.dim()]);
                f(&x[..grid.dim()])
            })
            .collect();
        ScalarField::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self - mean(self)`.
    pub fn mean_adjusted(&self) -> Self {
        let m = self.mean();
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v - m).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Field for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn arrays(&self) -> Vec<&[f64]> {
        vec![&self.values]
    }
}

impl FieldArrays for ScalarField {
    fn component_count(_: usize) -> usize {
        1
    }

    fn from_arrays(grid: Grid, mut arrays: Vec<Vec<f64>>) -> Result<Self> {
        check_arrays(&grid, &arrays, 1, "scalar field")?;
        Ok(ScalarField {
            grid,
            values: arrays.pop().unwrap(),
        })
    }

    fn into_arrays(self) -> Vec<Vec<f64>> {
        vec![self.values]
    }
}

/// A map `ℝ^n → ℝ^n`, stored as `n` component arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        check_arrays(&grid, &components, grid.dim(), "vector field")?;
        Ok(VectorField { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            components: vec![vec![0.0; grid.len()]; grid.dim()],
            grid,
        }
    }

    pub fn from_scalars(fields: Vec<ScalarField>) -> Result<Self> {
        let grid = *fields
            .first()
            .ok_or_else(|| Error::param("vector field needs components"))?
            .grid();
        for f in &fields {
            grid.ensure_same(f.grid())?;
        }
        VectorField::new(grid, fields.into_iter().map(ScalarField::into_values).collect())
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn component_field(&self, i: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.components[i].clone(),
        }
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn scaled(&self, factor: f64) -> Self {
        VectorField {
            grid: self.grid,
            components: scale_arrays(&self.components, factor),
        }
    }

    /// Values of all components at sample `j`.
    pub fn at(&self, j: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c[j];
        }
    }
}

impl Field for VectorField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn arrays(&self) -> Vec<&[f64]> {
        self.components.iter().map(Vec::as_slice).collect()
    }
}

impl FieldArrays for VectorField {
    fn component_count(n: usize) -> usize {
        n
    }

    fn from_arrays(grid: Grid, arrays: Vec<Vec<f64>>) -> Result<Self> {
        VectorField::new(grid, arrays)
    }

    fn into_arrays(self) -> Vec<Vec<f64>> {
        self.components
    }
}

/// A map `ℝ^n → ℝ^{n×n}`; entry `(i, j)` is array `i * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    entries: Vec<Vec<f64>>,
}

impl MatrixField {
    pub fn new(grid: Grid, entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.dim();
        check_arrays(&grid, &entries, n * n, "matrix field")?;
        Ok(MatrixField { grid, entries })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.dim();
        MatrixField {
            entries: vec![vec![0.0; grid.len()]; n * n],
            grid,
        }
    }

    /// The constant identity matrix field.
    pub fn identity(grid: Grid) -> Self {
        let n = grid.dim();
        let entries = (0..n * n)
            .map(|e| vec![if e / n == e % n { 1.0 } else { 0.0 }; grid.len()])
            .collect();
        MatrixField { grid, entries }
    }

    /// Builds a field by evaluating a row-major `n×n` matrix at every sample.
    pub fn from_pointwise(grid: Grid, mut f: impl FnMut(usize, &mut [f64])) -> Result<Self> {
        let n = grid.dim();
        let mut entries = vec![vec![0.0; grid.len()]; n * n];
        let mut buf = [0.0; 16];
        for j in 0..grid.len() {
            f(j, &mut buf[..n * n]);
            for (e, v) in entries.iter_mut().zip(&buf[..n * n]) {
                e[j] = *v;
            }
        }
        MatrixField::new(grid, entries)
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.grid.dim() + j]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Row `i` as a vector field.
    pub fn row(&self, i: usize) -> VectorField {
        let n = self.grid.dim();
        VectorField {
            grid: self.grid,
            components: self.entries[i * n..(i + 1) * n].to_vec(),
        }
    }

    pub fn trace(&self) -> ScalarField {
        let n = self.grid.dim();
        let values = (0..self.grid.len())
            .map(|j| (0..n).map(|i| self.entries[i * n + i][j]).sum())
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// Row-major matrix at sample `j`.
    pub fn at(&self, j: usize, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e[j];
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        MatrixField {
            grid: self.grid,
            entries: scale_arrays(&self.entries, factor),
        }
    }
}

impl Field for MatrixField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn arrays(&self) -> Vec<&[f64]> {
        self.entries.iter().map(Vec::as_slice).collect()
    }
}

impl FieldArrays for MatrixField {
    fn component_count(n: usize) -> usize {
        n * n
    }

    fn from_arrays(grid: Grid, arrays: Vec<Vec<f64>>) -> Result<Self> {
        MatrixField::new(grid, arrays)
    }

    fn into_arrays(self) -> Vec<Vec<f64>> {
        self.entries
    }
}

fn scale_arrays(arrays: &[Vec<f64>], factor: f64) -> Vec<Vec<f64>> {
    arrays
        .iter()
        .map(|a| a.iter().map(|v| v * factor).collect())
        .collect()
}

/// Pointwise Euclidean (Frobenius for matrices) magnitude.
pub fn magnitude<F: Field + ?Sized>(f: &F) -> Vec<f64> {
    let arrays = f.arrays();
    (0..f.grid().len())
        .map(|j| arrays.iter().map(|a| a[j] * a[j]).sum::<f64>().sqrt())
        .collect()
}

/// Discrete `L^p` norm `(h^n Σ_j |f_j|^p)^{1/p}`; `p = ∞` gives `max_j |f_j|`.
pub fn lp_norm<F: Field + ?Sized>(f: &F, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("exponent p must be in [1, ∞], got {p}")));
    }
    let arrays = f.arrays();
    let len = f.grid().len();
    let squares = (0..len).map(|j| arrays.iter().map(|a| a[j] * a[j]).sum::<f64>());
    if p.is_infinite() {
        return Ok(squares.fold(0.0, f64::max).sqrt());
    }
    let sum: f64 = if p == 2.0 {
        squares.sum()
    } else {
        squares.map(|q| q.sqrt().powf(p)).sum()
    };
    Ok((f.grid().cell_volume() * sum).powf(1.0 / p))
}

/// `h^n Σ_j f_j · g_j`, summed over all components.
pub fn pairing<F: Field + ?Sized, G: Field + ?Sized>(f: &F, g: &G) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    let fa = f.arrays();
    let ga = g.arrays();
    if fa.len() != ga.len() {
        return Err(Error::param("pairing needs fields with equal component counts"));
    }
    let sum: f64 = fa
        .iter()
        .zip(&ga)
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>())
        .sum();
    Ok(f.grid().cell_volume() * sum)
}

/// `‖f - g‖₂ / ‖g‖₂`.
pub fn relative_l2<F: Field + ?Sized, G: Field + ?Sized>(f: &F, g: &G) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    let fa = f.arrays();
    let ga = g.arrays();
    if fa.len() != ga.len() {
        return Err(Error::param("comparison needs fields with equal component counts"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in fa.iter().zip(&ga) {
        for (x, y) in a.iter().zip(b.iter()) {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("relative L2 distance"));
    }
    Ok((num / den).sqrt())
}

/// Componentwise `a·f + b·g`.
pub fn linear_combination<F: FieldArrays + Clone>(a: f64, f: &F, b: f64, g: &F) -> Result<F> {
    f.grid().ensure_same(g.grid())?;
    let arrays = f
        .arrays()
        .iter()
        .zip(g.arrays())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
        .collect();
    F::from_arrays(*f.grid(), arrays)
}
