//! Projected gradient descent with Barzilai–Borwein steps and Armijo backtracking.

use super::problem::VariationalProblem;
use crate::error::{Error, Result};
use crate::grid::{linear_combination, lp_norm, pairing, VectorField};

pub const ARMIJO_SLOPE: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
pub const MAX_BACKTRACKS: usize = 50;

const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e14;

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub minimizer: VectorField,
    pub energy: f64,
    /// Number of variation evaluations, the last one being the stopping test.
    pub iterations: usize,
    /// `‖first variation‖₂` at each iterate.
    pub grad_norm_history: Vec<f64>,
    /// Energy at each iterate, accumulated from line-search increments.
    pub energy_history: Vec<f64>,
    pub converged: bool,
}

/// Minimizes the problem's energy from `init`, which must equal `g` on `Ω^c`.
///
/// Stops when `‖variation‖₂ ≤ tol` (converged) or after `max_iter` iterations.
/// If backtracking exhausts [`MAX_BACKTRACKS`] halvings while the trial energy
/// still decreases (insufficiently), the solve ends unconverged; if the energy
/// increases even at the smallest step it fails with [`Error::Divergence`].
pub fn minimize(prob: &VariationalProblem, init: &VectorField, tol: f64, max_iter: usize) -> Result<SolveReport> {
    if !(tol >= 0.0) || max_iter == 0 {
        return Err(Error::param("minimize needs tol >= 0 and max_iter >= 1"));
    }
    prob.check_constraint(init)?;
    let mut u = prob.project(init)?;
    let mut grad = prob.gradient(&u)?;
    let mut energy = prob.energy_with(&u, &grad)?;
    let mut var = prob.first_variation_with(&u, &grad)?;
    let mut norm = lp_norm(&var, 2.0)?;
    let mut report = SolveReport {
        minimizer: u.clone(),
        energy,
        iterations: 0,
        grad_norm_history: vec![norm],
        energy_history: vec![energy],
        converged: false,
    };
    let mut step = 1.0;
    for iter in 1..=max_iter {
        report.iterations = iter;
        if norm <= tol {
            report.converged = true;
            break;
        }
        let dgrad = prob.gradient(&var)?;
        let slope = norm * norm;
        let mut accepted = None;
        let mut last = 0.0;
        for _ in 0..=MAX_BACKTRACKS {
            let delta = prob.energy_increment(&u, &grad, -step, &var, &dgrad)?;
            if delta <= -ARMIJO_SLOPE * step * slope {
                accepted = Some(delta);
                break;
            }
            last = delta;
            step *= BACKTRACK_FACTOR;
        }
        let Some(delta) = accepted else {
            if last > 0.0 {
                return Err(Error::Divergence(MAX_BACKTRACKS));
            }
            break;
        };
        let next = prob.project(&linear_combination(1.0, &u, -step, &var)?)?;
        grad = prob.gradient(&next)?;
        let next_var = prob.first_variation_with(&next, &grad)?;
        // BB1 step from s = -step·var and y = next_var - var.
        let sy = -step * (pairing(&var, &next_var)? - slope);
        let ss = step * step * slope;
        step = if sy > 0.0 { (ss / sy).clamp(MIN_STEP, MAX_STEP) } else { (2.0 * step).min(MAX_STEP) };
        u = next;
        var = next_var;
        energy += delta;
        norm = lp_norm(&var, 2.0)?;
        report.grad_norm_history.push(norm);
        report.energy_history.push(energy);
    }
    if !report.converged && norm <= tol {
        report.converged = true;
    }
    report.energy = prob.energy_with(&u, &grad)?;
    report.minimizer = u;
    Ok(report)
}
