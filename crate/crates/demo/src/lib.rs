//! Browser bindings for the annulus solver. The same API is usable natively,
//! which is how the tests below exercise it.

use wasm_bindgen::prelude::*;

use crawlfv::config::Config;
use crawlfv::convergence::poisson_convergence;
use crawlfv::driver::{coupled_step, polarised_state, CoupledOperators};
use crawlfv::grid::PolarGrid;
use crawlfv::linsolve::SolveMethod;
use crawlfv::pressure::{solve_pressure, BoundaryMode};
use crawlfv::state::{total_mass, PhysParams, SimState};
use crawlfv::velocity::cell_velocity;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn params(k_on: f64, k_d: f64, delta: f64, gamma: f64) -> PhysParams {
    PhysParams {
        k_on,
        k_d,
        delta,
        gamma,
        ..PhysParams::default()
    }
}

/// A running simulation starting from the polarised preset.
#[wasm_bindgen]
pub struct Simulation {
    ops: CoupledOperators,
    state: SimState,
    steps: usize,
    initial_mass: f64,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_r: usize,
        n_theta: usize,
        r_min: f64,
        r_max: f64,
        dt: f64,
        k_on: f64,
        k_d: f64,
        delta: f64,
        gamma: f64,
    ) -> Result<Simulation, String> {
        let cfg = Config {
            r_min,
            r_max,
            n_r,
            n_theta,
            dt,
            params: params(k_on, k_d, delta, gamma),
            ..Config::default()
        };
        cfg.validate().map_err(err)?;
        let ops = CoupledOperators::new(&cfg).map_err(err)?;
        let state = polarised_state(&ops.grid);
        let initial_mass = total_mass(&state, &ops.grid);
        Ok(Simulation {
            ops,
            state,
            steps: 0,
            initial_mass,
        })
    }

    /// Advance `n` steps. Returns the new time.
    pub fn step(&mut self, n: usize) -> Result<f64, String> {
        for _ in 0..n {
            let (next, _) = coupled_step(&self.state, &self.ops).map_err(err)?;
            if !next.is_finite() {
                return Err(format!("state became non-finite at step {}", self.steps + 1));
            }
            self.state = next;
            self.steps += 1;
        }
        Ok(self.time())
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.ops.transport.dt()
    }

    pub fn n_r(&self) -> usize {
        self.ops.grid.n_r()
    }

    pub fn n_theta(&self) -> usize {
        self.ops.grid.n_theta()
    }

    pub fn r_min(&self) -> f64 {
        self.ops.grid.r_min()
    }

    pub fn r_max(&self) -> f64 {
        self.ops.grid.r_max()
    }

    /// Physical density `c = c̃/r`, ring by ring (index `k + j·n_theta`).
    pub fn c_field(&self) -> Vec<f64> {
        let g = &self.ops.grid;
        let mut out = self.state.c_tilde.values().to_vec();
        for j in 0..g.n_r() {
            let r = g.r_center(j);
            for v in &mut out[j * g.n_theta()..(j + 1) * g.n_theta()] {
                *v /= r;
            }
        }
        out
    }

    /// Boundary density `μ = μ̃/R`.
    pub fn mu(&self) -> Vec<f64> {
        let r = self.ops.grid.r_max();
        self.state.mu_tilde.values().iter().map(|m| m / r).collect()
    }

    /// Cell velocity as `[v_x, v_y]`.
    pub fn velocity(&self) -> Vec<f64> {
        let v = cell_velocity(&self.state.mu_tilde, &self.ops.grid, &self.ops.params);
        vec![v.v_x, v.v_y]
    }

    pub fn polarization(&self) -> f64 {
        cell_velocity(&self.state.mu_tilde, &self.ops.grid, &self.ops.params).norm()
    }

    /// Relative change of total mass since the start.
    pub fn mass_drift(&self) -> f64 {
        let m = total_mass(&self.state, &self.ops.grid);
        (m - self.initial_mass).abs() / self.initial_mass.abs().max(f64::MIN_POSITIVE)
    }

    /// Physical pressure `p = p̃/r` for the current boundary density.
    pub fn pressure(&self) -> Result<Vec<f64>, String> {
        let g = &self.ops.grid;
        let (p, _) = self
            .ops
            .pressure
            .solve(&self.state.mu_tilde, &self.ops.params, self.ops.tol)
            .map_err(err)?;
        let mut out = Vec::with_capacity(g.n_cells());
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                out.push(p.physical(g, j, k));
            }
        }
        Ok(out)
    }
}

/// Pressure-solver refinement study. Returns `[n_r, error, order]` triples
/// flattened; the first order is NaN.
#[wasm_bindgen]
pub fn poisson_study(face_mode: bool, k_d: f64, max_refinements: usize) -> Result<Vec<f64>, String> {
    let mode = if face_mode { BoundaryMode::Face } else { BoundaryMode::Paper };
    let n_r_list: Vec<usize> = (0..max_refinements.clamp(2, 6)).map(|i| 10 << i).collect();
    let rows = poisson_convergence(0.5, 1.5, k_d, 8, &n_r_list, mode, SolveMethod::Direct, 1e-12).map_err(err)?;
    Ok(rows
        .iter()
        .flat_map(|r| [r.n_r as f64, r.error, r.order.unwrap_or(f64::NAN)])
        .collect())
}

/// Pressure for a uniform boundary density `μ` on a fresh grid.
#[wasm_bindgen]
pub fn uniform_pressure(n_r: usize, n_theta: usize, mu: f64, k_d: f64, delta: f64) -> Result<Vec<f64>, String> {
    let grid = PolarGrid::new(0.5, 1.5, n_r, n_theta).map_err(err)?;
    let mu_tilde = crawlfv::state::BoundaryField::uniform(n_theta, mu * grid.r_max());
    let p = params(0.0, k_d, delta, 0.0);
    let (field, _) = solve_pressure(&grid, &mu_tilde, &p, BoundaryMode::Paper, SolveMethod::Direct, 1e-12).map_err(err)?;
    let mut out = Vec::with_capacity(grid.n_cells());
    for j in 0..n_r {
        for k in 0..n_theta {
            out.push(field.physical(&grid, j, k));
        }
    }
    Ok(out)
}
