//! Grid-refinement study of the pressure solver against the radial oracle.

use crate::grid::PolarGrid;
use crate::linsolve::SolveMethod;
use crate::oracles::radial_poisson_exact;
use crate::pressure::{solve_pressure, BoundaryMode, PressureError};
use crate::state::{BoundaryField, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_r: usize,
    pub dr: f64,
    /// Max over cells of `|p̃/r − p_exact(r)|`.
    pub error: f64,
    /// `log2(e_prev / e)` scaled by the refinement ratio; `None` on the first row.
    pub order: Option<f64>,
}

/// Solves with uniform `μ̃ = 0` (outer value 1, inner value 0) on each grid
/// and compares with the analytic radial solution.
#[allow(clippy::too_many_arguments)]
pub fn poisson_convergence(
    r_min: f64,
    r_max: f64,
    k_d: f64,
    n_theta: usize,
    n_r_list: &[usize],
    mode: BoundaryMode,
    method: SolveMethod,
    tol: f64,
) -> Result<Vec<ConvergenceRow>, PressureError> {
    let params = PhysParams {
        k_d,
        ..PhysParams::default()
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_r_list.len());
    for &n_r in n_r_list {
        let grid = PolarGrid::new(r_min, r_max, n_r, n_theta)?;
        let mu = BoundaryField::zeros(n_theta);
        let (p, _) = solve_pressure(&grid, &mu, &params, mode, method, tol)?;
        let mut error: f64 = 0.0;
        for j in 0..n_r {
            let r = grid.r_center(j);
            let exact = radial_poisson_exact(r, r_min, r_max, k_d, 0.0, 1.0).expect("cell centers lie inside");
            for k in 0..n_theta {
                error = error.max((p.get(j, k) / r - exact).abs());
            }
        }
        let dr = grid.dr();
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (prev.dr / dr).ln());
        rows.push(ConvergenceRow { n_r, dr, error, order });
    }
    Ok(rows)
}

/// Least-squares slope of `log e` against `log dr` over all rows.
pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.dr.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}
