//! Discrete Fourier transforms on the periodic grid.
//!
//! Normalization: `F_k = N^{-n} Σ_j f_j e^{-2πi k·j/N}`, so a constant `c`
//! maps to `F_0 = c`, `cos(2πx/L)` to `½` at `k = ±1`, and Parseval reads
//! `‖f‖₂² = L^n Σ_k |F_k|²`. The physical frequency of bin `k` is `ξ = k/L`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{Field, Grid, ScalarField};

/// Fourier coefficients of a real field, in FFT bin order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub(crate) fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Spectrum { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Integer wavevector `k ∈ {-N/2, …, N/2-1}^n` of bin `flat`.
    pub fn wavevector(&self, flat: usize, out: &mut [i64]) {
        wavevector(&self.grid, flat, out)
    }

    /// Coefficient at integer wavevector `k` (components taken mod `N`).
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.points() as i64;
        let flat = k
            .iter()
            .fold(0usize, |acc, &ki| acc * n as usize + ki.rem_euclid(n) as usize);
        self.coeffs[flat]
    }

    /// Largest `|F_k - conj(F_{-k})|`; zero for spectra of real fields.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.dim();
        let mut k = [0i64; 4];
        let mut neg = [0i64; 4];
        (0..self.coeffs.len())
            .map(|j| {
                self.wavevector(j, &mut k[..n]);
                for a in 0..n {
                    neg[a] = -k[a];
                }
                (self.coeffs[j] - self.coefficient(&neg[..n]).conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn wavevector(grid: &Grid, flat: usize, out: &mut [i64]) {
    let mut idx = [0usize; 4];
    grid.multi_index(flat, &mut idx[..grid.dim()]);
    for (o, &i) in out.iter_mut().zip(&idx[..grid.dim()]) {
        *o = grid.wavenumber(i);
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(points: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        }
    }
}

/// In-place unnormalized n-dimensional FFT, one axis at a time.
fn transform_axes(grid: &Grid, data: &mut [Complex64], inverse: bool, plans: &Plans) {
    let points = grid.points();
    let fft = if inverse { &plans.inverse } else { &plans.forward };
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            data.par_chunks_mut(points).for_each(|line| fft.process(line));
            continue;
        }
        data.par_chunks_mut(points * stride).for_each(|block| {
            let mut line = vec![Complex64::new(0.0, 0.0); points];
            for inner in 0..stride {
                for (t, v) in line.iter_mut().enumerate() {
                    *v = block[inner + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    block[inner + t * stride] = *v;
                }
            }
        });
    }
}

/// Batched transforms sharing one set of plans.
pub(crate) struct Transformer {
    grid: Grid,
    plans: Plans,
}

impl Transformer {
    pub(crate) fn new(grid: &Grid) -> Self {
        Transformer {
            grid: *grid,
            plans: Plans::new(grid.points()),
        }
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Spectrum {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        transform_axes(&self.grid, &mut data, false, &self.plans);
        let scale = 1.0 / self.grid.len() as f64;
        for v in &mut data {
            *v *= scale;
        }
        Spectrum::from_coeffs(self.grid, data)
    }

    /// Real part of the inverse transform.
    pub(crate) fn inverse(&self, spectrum: &Spectrum) -> Vec<f64> {
        let mut data = spectrum.coeffs.clone();
        transform_axes(&self.grid, &mut data, true, &self.plans);
        data.into_iter().map(|c| c.re).collect()
    }
}

pub fn forward_transform(f: &ScalarField) -> Spectrum {
    Transformer::new(f.grid()).forward(f.values())
}

/// Inverse transform; the imaginary part (roundoff for Hermitian spectra) is dropped.
pub fn inverse_transform(spectrum: &Spectrum) -> Result<ScalarField> {
    let values = Transformer::new(spectrum.grid()).inverse(spectrum);
    ScalarField::new(*spectrum.grid(), values)
}
