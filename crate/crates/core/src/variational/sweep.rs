//! Minimized energies along a sequence of orders, compared with the local problem.

use rayon::prelude::*;

use super::problem::{Smoothness, VariationalProblem};
use super::solver::{minimize, SolveReport};
use crate::error::{Error, Result};
use crate::grid::{linear_combination, lp_norm};
use crate::table::{Cell, SweepTable};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Warm-start each order from the previous minimizer; otherwise every
    /// solve starts from `g` and the orders run concurrently.
    pub continuation: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tol: 1e-6,
            max_iter: 2000,
            continuation: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GammaSweep {
    /// Columns `s, energy, dist_to_local, converged, iters`.
    pub table: SweepTable,
    /// Columns `s, recovery_energy, local_energy, rel_gap`: the fractional
    /// energy of the local minimizer against its local energy.
    pub recovery: SweepTable,
    /// Solve reports in the order of the sweep rows.
    pub reports: Vec<(Smoothness, SolveReport)>,
}

impl GammaSweep {
    pub fn report(&self, s: Smoothness) -> Option<&SolveReport> {
        self.reports.iter().find(|(t, _)| *t == s).map(|(_, r)| r)
    }

    pub fn local(&self) -> &SolveReport {
        self.report(Smoothness::Local).expect("sweep always solves the local problem")
    }
}

/// Solves `template` at every order in `s_grid` (the local problem is appended
/// when missing), then evaluates each fractional energy at the local minimizer.
pub fn gamma_sweep(template: &VariationalProblem, s_grid: &[Smoothness], opts: &SweepOptions) -> Result<GammaSweep> {
    if s_grid.is_empty() {
        return Err(Error::param("order grid is empty"));
    }
    let mut orders = s_grid.to_vec();
    if !orders.contains(&Smoothness::Local) {
        orders.push(Smoothness::Local);
    }
    let solve = |s: Smoothness, init: &crate::grid::VectorField| {
        minimize(&template.with_smoothness(s), init, opts.tol, opts.max_iter)
    };
    let reports: Vec<SolveReport> = if opts.continuation {
        let mut out: Vec<SolveReport> = Vec::with_capacity(orders.len());
        for &s in &orders {
            let init = out.last().map_or(template.g(), |r| &r.minimizer);
            let report = solve(s, init)?;
            out.push(report);
        }
        out
    } else {
        orders.par_iter().map(|&s| solve(s, template.g())).collect::<Result<_>>()?
    };
    let local_at = orders.iter().position(|s| s.is_local()).expect("local order present");
    let local = &reports[local_at];
    let p = template.exponent().get();

    let mut table = SweepTable::new(["s", "energy", "dist_to_local", "converged", "iters"]);
    let mut recovery = SweepTable::new(["s", "recovery_energy", "local_energy", "rel_gap"]);
    for (s, r) in orders.iter().zip(&reports) {
        let dist = lp_norm(&linear_combination(1.0, &r.minimizer, -1.0, &local.minimizer)?, p)?;
        table.push(vec![order_cell(*s), r.energy.into(), dist.into(), r.converged.into(), r.iterations.into()])?;
        if let Smoothness::Fractional(_) = s {
            let e = template.with_smoothness(*s).energy(&local.minimizer)?;
            let gap = if local.energy != 0.0 {
                (e - local.energy).abs() / local.energy.abs()
            } else {
                f64::NAN
            };
            recovery.push(vec![order_cell(*s), e.into(), local.energy.into(), gap.into()])?;
        }
    }
    for t in [&mut table, &mut recovery] {
        t.set_provenance("density", template.density().kind());
        t.set_provenance("omega", template.mask().description());
        t.set_provenance("continuation", opts.continuation.to_string());
    }
    Ok(GammaSweep {
        table,
        recovery,
        reports: orders.into_iter().zip(reports).collect(),
    })
}

fn order_cell(s: Smoothness) -> Cell {
    match s {
        Smoothness::Fractional(v) => Cell::Real(v.get()),
        Smoothness::Local => Cell::Text("local".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::DomainMask;
    use crate::grid::{Grid, VectorField};
    use crate::testfn::{sample_scalar, Bump};
    use crate::variational::density::{registry, DensityContext};
    use serde_json::json;
    use std::sync::Arc;

    fn template(points: usize) -> VariationalProblem {
        let grid = Grid::new(1, 16.0, points).unwrap();
        let f = VectorField::from_scalars(vec![sample_scalar(&Bump::new(3.0, None), &grid).unwrap()]).unwrap();
        let ctx = DensityContext::new(grid).with_target(f);
        let w = registry().create_from_spec("kind", &json!({"kind": "convex-quadratic"}), &ctx).unwrap();
        VariationalProblem::new(Arc::from(w), DomainMask::ball(&grid, 4.0).unwrap(), VectorField::zeros(grid), Smoothness::Local)
            .unwrap()
    }

    #[test]
    fn sweep_layout_and_continuation_agree() {
        let prob = template(64);
        let orders = [Smoothness::fractional(0.6).unwrap(), Smoothness::fractional(0.9).unwrap()];
        let opts = SweepOptions { tol: 1e-9, max_iter: 3000, continuation: true };
        let warm = gamma_sweep(&prob, &orders, &opts).unwrap();
        assert_eq!(warm.table.len(), 3);
        assert_eq!(warm.recovery.len(), 2);
        assert_eq!(warm.table.rows()[2][0], Cell::Text("local".into()));
        assert_eq!(warm.table.rows()[2][2], Cell::Real(0.0));
        let cold = gamma_sweep(&prob, &orders, &SweepOptions { continuation: false, ..opts }).unwrap();
        for (a, b) in warm.reports.iter().zip(&cold.reports) {
            assert!((a.1.energy - b.1.energy).abs() < 1e-9 * a.1.energy);
            assert!(a.1.converged && b.1.converged);
        }
    }
}
