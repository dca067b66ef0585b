//! IMEX step for the coupled unknown `E = (c̃, μ̃)`:
//!
//! ```text
//! (I + dt/dr²·A)·Eⁿ⁺¹ = (I − dt/dr·Bⁿ)·Eⁿ
//! ```
//!
//! `A` holds diffusion and the boundary exchange, treated implicitly; `Bⁿ`
//! holds first-order upwind advection with the frozen face velocities.
//! Both are assembled from the flux balance for arbitrary `dr`, `dθ`: the
//! angular blocks carry the factors `dr²/dθ²` (in `A`) and `dr/dθ` (in `Bⁿ`).
//!
//! With the weights `w = dr` on `c̃` rows and `w = 1` on `μ̃` rows, every
//! column of `A` and `Bⁿ` sums to zero, which is the discrete statement of
//! mass conservation.

use thiserror::Error;

use crate::grid::PolarGrid;
use crate::linsolve::{Factorized, SolveError, SolveReport};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::state::{PhysParams, SimState, StateError};
use crate::velocity::FaceVelocityField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("operator built for a different grid ({expected} unknowns, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// First-order upwind flux: `u·x_minus` for `u > 0`, `u·x_plus` for `u < 0`, zero otherwise.
#[inline]
pub fn upwind_flux(u: f64, x_minus: f64, x_plus: f64) -> f64 {
    if u > 0.0 {
        u * x_minus
    } else if u < 0.0 {
        u * x_plus
    } else {
        0.0
    }
}

/// Size of the coupled system, `(n_r + 1)·n_theta`.
pub fn system_size(grid: &PolarGrid) -> usize {
    grid.n_cells() + grid.n_theta()
}

/// Conservation weights: `dr` on `c̃` entries, `1` on `μ̃` entries.
pub fn conservation_weights(grid: &PolarGrid) -> Vec<f64> {
    let mut w = vec![grid.dr(); grid.n_cells()];
    w.extend(std::iter::repeat_n(1.0, grid.n_theta()));
    w
}

/// Diffusion plus exchange operator `A` (scaled so that the step matrix is `I + dt/dr²·A`).
pub fn assemble_diffusion_operator(grid: &PolarGrid, params: &PhysParams) -> SparseMatrix {
    let n_r = grid.n_r();
    let n_t = grid.n_theta();
    let dr = grid.dr();
    let d = params.diffusion;
    let ang_scale = d * (dr * dr) / (grid.dtheta() * grid.dtheta());
    let n = system_size(grid);
    let mu_row = |k: usize| grid.n_cells() + k;
    let mut b = TripletBuilder::with_capacity(n, n, 6 * n);
    for j in 0..n_r {
        let rj = grid.r_center(j);
        let ang = ang_scale / (rj * rj);
        for k in 0..n_t {
            let row = grid.index(j, k);
            // Inner face: zero total flux on ring 0.
            if j > 0 {
                let r_lo = grid.r_face(j);
                b.add(row, row, d * r_lo / rj);
                b.add(row, grid.index(j - 1, k), -d * r_lo / grid.r_center(j - 1));
            }
            // Outer face: diffusion to the next ring, or exchange on the last ring.
            if j + 1 < n_r {
                let r_hi = grid.r_face(j + 1);
                b.add(row, row, d * r_hi / rj);
                b.add(row, grid.index(j + 1, k), -d * r_hi / grid.r_center(j + 1));
            } else {
                b.add(row, row, dr * params.k_on);
                b.add(row, mu_row(k), -dr * params.k_off);
            }
            b.add(row, row, 2.0 * ang);
            b.add(row, grid.index(j, grid.prev_k(k)), -ang);
            b.add(row, grid.index(j, grid.next_k(k)), -ang);
        }
    }
    let last = n_r - 1;
    for k in 0..n_t {
        b.add(mu_row(k), grid.index(last, k), -dr * dr * params.k_on);
        b.add(mu_row(k), mu_row(k), dr * dr * params.k_off);
    }
    b.finalize().expect("diffusion operator entries are finite")
}

/// Upwind advection operator `Bⁿ` (the explicit side is `I − dt/dr·Bⁿ`).
///
/// Only interior radial faces contribute; the inner and outer boundary fluxes
/// are prescribed in full by the zero-flux and exchange conditions. The `μ̃`
/// rows are empty.
pub fn assemble_advection_operator(u: &FaceVelocityField, grid: &PolarGrid) -> Result<SparseMatrix, TransportError> {
    if u.n_r() != grid.n_r() || u.n_theta() != grid.n_theta() {
        return Err(TransportError::DimensionMismatch {
            expected: grid.n_cells(),
            got: u.n_r() * u.n_theta(),
        });
    }
    let n_r = grid.n_r();
    let n_t = grid.n_theta();
    let n = system_size(grid);
    let mut b = TripletBuilder::with_capacity(n, n, 8 * grid.n_cells());
    // Radial faces j = 1..n_r-1, between rings j-1 (minus side) and j (plus side).
    for j in 1..n_r {
        for k in 0..n_t {
            let vel = u.radial(j, k);
            let lo = grid.index(j - 1, k);
            let hi = grid.index(j, k);
            add_face(&mut b, lo, hi, vel, 1.0);
        }
    }
    for j in 0..n_r {
        let rj = grid.r_center(j);
        let scale = grid.dr() / (rj * rj * grid.dtheta());
        for k in 0..n_t {
            let vel = u.angular(j, k);
            let lo = grid.index(j, k);
            let hi = grid.index(j, grid.next_k(k));
            add_face(&mut b, lo, hi, vel, scale);
        }
    }
    Ok(b.finalize().expect("advection operator entries are finite"))
}

/// Upwind flux through the face from cell `lo` to cell `hi`: it leaves `lo`
/// and enters `hi`.
#[inline]
fn add_face(b: &mut TripletBuilder, lo: usize, hi: usize, vel: f64, scale: f64) {
    if vel > 0.0 {
        b.add(lo, lo, scale * vel);
        b.add(hi, lo, -scale * vel);
    } else if vel < 0.0 {
        b.add(lo, hi, scale * vel);
        b.add(hi, hi, -scale * vel);
    }
}

/// The implicit step matrix, factorized once per `(grid, params, dt)`.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    grid: PolarGrid,
    dt: f64,
    diffusion: SparseMatrix,
    implicit: Factorized,
}

impl ImexStepper {
    pub fn new(grid: &PolarGrid, params: &PhysParams, dt: f64) -> Result<Self, TransportError> {
        let diffusion = assemble_diffusion_operator(grid, params);
        Self::with_operator(grid, diffusion, dt)
    }

    /// Reuses an already assembled diffusion operator.
    pub fn with_operator(grid: &PolarGrid, diffusion: SparseMatrix, dt: f64) -> Result<Self, TransportError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TransportError::BadTimeStep(dt));
        }
        if diffusion.n_rows() != system_size(grid) {
            return Err(TransportError::DimensionMismatch {
                expected: system_size(grid),
                got: diffusion.n_rows(),
            });
        }
        let dr = grid.dr();
        let step_matrix = diffusion
            .identity_plus_scaled(dt / (dr * dr))
            .expect("diffusion operator is square");
        Ok(Self {
            grid: grid.clone(),
            dt,
            diffusion,
            implicit: Factorized::new(step_matrix)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diffusion_operator(&self) -> &SparseMatrix {
        &self.diffusion
    }

    /// Advances `state` by `dt` with the frozen face velocities `u`.
    pub fn step(
        &self,
        state: &SimState,
        u: &FaceVelocityField,
        tol: f64,
    ) -> Result<(SimState, SolveReport), TransportError> {
        let advection = assemble_advection_operator(u, &self.grid)?;
        self.step_with_advection(state, &advection, tol)
    }

    pub fn step_with_advection(
        &self,
        state: &SimState,
        advection: &SparseMatrix,
        tol: f64,
    ) -> Result<(SimState, SolveReport), TransportError> {
        let e = state.to_stacked();
        if e.len() != system_size(&self.grid) {
            return Err(TransportError::DimensionMismatch {
                expected: system_size(&self.grid),
                got: e.len(),
            });
        }
        let be = advection
            .matvec(&e)
            .map_err(|err| TransportError::Solve(SolveError::Sparse(err)))?;
        let factor = self.dt / self.grid.dr();
        let rhs: Vec<f64> = e.iter().zip(&be).map(|(x, y)| x - factor * y).collect();
        let (next, report) = self.implicit.solve(&rhs, tol)?;
        let new_state = SimState::from_stacked(&self.grid, state.t + self.dt, &next)?;
        Ok((new_state, report))
    }
}

/// One-shot IMEX step: assembles, factorizes and steps.
pub fn imex_step(
    state: &SimState,
    diffusion: &SparseMatrix,
    u: &FaceVelocityField,
    dt: f64,
    grid: &PolarGrid,
    tol: f64,
) -> Result<(SimState, SolveReport), TransportError> {
    ImexStepper::with_operator(grid, diffusion.clone(), dt)?.step(state, u, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{total_mass, BoundaryField, ScalarField};
    use approx::assert_relative_eq;

    fn small_grid() -> PolarGrid {
        PolarGrid::new(0.5, 1.0, 3, 4).unwrap()
    }

    /// Deterministic pseudo-random values in `[-1, 1)`.
    fn lcg_values(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    fn random_faces(grid: &PolarGrid, seed: u64) -> FaceVelocityField {
        let n_rad = (grid.n_r() + 1) * grid.n_theta();
        FaceVelocityField::from_parts(grid, lcg_values(seed, n_rad), lcg_values(seed + 1, grid.n_cells())).unwrap()
    }

    #[test]
    fn upwind_examples() {
        assert_eq!(upwind_flux(2.0, 3.0, 5.0), 6.0);
        assert_eq!(upwind_flux(-2.0, 3.0, 5.0), -10.0);
        assert_eq!(upwind_flux(0.0, 3.0, 5.0), 0.0);
    }

    #[test]
    fn diffusion_columns_conserve() {
        let g = small_grid();
        let a = assemble_diffusion_operator(&g, &PhysParams::default());
        let sums = a.transpose_matvec(&conservation_weights(&g)).unwrap();
        assert!(sums.iter().all(|s| s.abs() <= 1e-14), "{sums:?}");
    }

    #[test]
    fn first_ring_radial_diagonal() {
        let g = small_grid();
        let p = PhysParams {
            diffusion: 1.7,
            ..PhysParams::default()
        };
        let a = assemble_diffusion_operator(&g, &p);
        let r1 = g.r_center(0);
        let ang = 1.7 * g.dr() * g.dr() / (g.dtheta() * g.dtheta() * r1 * r1);
        assert_relative_eq!(a.get(0, 0), 1.7 * g.r_face(1) / r1 + 2.0 * ang, max_relative = 1e-14);
    }

    #[test]
    fn mu_rows_reduce_to_exchange() {
        let g = small_grid();
        let p = PhysParams {
            k_on: 0.4,
            k_off: 1.3,
            ..PhysParams::default()
        };
        let a = assemble_diffusion_operator(&g, &p);
        let dt = 0.01;
        let pref = dt / (g.dr() * g.dr());
        let row = g.n_cells() + 2;
        assert_relative_eq!(pref * a.get(row, g.index(2, 2)), -dt * 0.4, max_relative = 1e-14);
        assert_relative_eq!(pref * a.get(row, row), dt * 1.3, max_relative = 1e-14);
        assert_eq!(a.row(row).count(), 2);
    }

    #[test]
    fn zero_velocity_gives_zero_advection() {
        let g = small_grid();
        let b = assemble_advection_operator(&FaceVelocityField::zeros(&g), &g).unwrap();
        assert_eq!(b.nnz(), 0);
    }

    #[test]
    fn advection_columns_conserve() {
        let g = small_grid();
        let w = conservation_weights(&g);
        for seed in 0..10 {
            let b = assemble_advection_operator(&random_faces(&g, seed), &g).unwrap();
            let sums = b.transpose_matvec(&w).unwrap();
            assert!(sums.iter().all(|s| s.abs() <= 1e-14), "{sums:?}");
        }
    }

    #[test]
    fn single_radial_face() {
        let g = small_grid();
        let mut u = FaceVelocityField::zeros(&g);
        u.set_radial(1, 2, 1.0);
        let b = assemble_advection_operator(&u, &g).unwrap();
        assert_eq!(b.nnz(), 2);
        assert_eq!(b.get(g.index(0, 2), g.index(0, 2)), 1.0);
        assert_eq!(b.get(g.index(1, 2), g.index(0, 2)), -1.0);
    }

    #[test]
    fn boundary_radial_faces_are_ignored() {
        let g = small_grid();
        let mut u = FaceVelocityField::zeros(&g);
        for k in 0..4 {
            u.set_radial(0, k, 3.0);
            u.set_radial(3, k, -2.0);
        }
        assert_eq!(assemble_advection_operator(&u, &g).unwrap().nnz(), 0);
    }

    #[test]
    fn uniform_concentration_with_equilibrium_is_stationary() {
        let g = PolarGrid::new(0.5, 1.5, 6, 12).unwrap();
        let p = PhysParams {
            k_on: 0.7,
            k_off: 1.1,
            ..PhysParams::default()
        };
        let c = ScalarField::from_fn(&g, |j, _| g.r_center(j));
        let mu = BoundaryField::uniform(12, 0.7 / 1.1 * g.r_center(5));
        let s = SimState::new(&g, 0.0, c, mu).unwrap();
        let stepper = ImexStepper::new(&g, &p, 0.05).unwrap();
        let (next, _) = stepper.step(&s, &FaceVelocityField::zeros(&g), 1e-13).unwrap();
        assert!(next.c_tilde.max_abs_diff(&s.c_tilde) <= 1e-12);
        assert!(next.mu_tilde.max_abs_diff(&s.mu_tilde) <= 1e-12);
    }

    #[test]
    fn k_on_zero_decays_mu() {
        let g = small_grid();
        let p = PhysParams {
            k_on: 0.0,
            ..PhysParams::default()
        };
        let c = ScalarField::from_fn(&g, |j, k| 1.0 + (j + k) as f64);
        let s = SimState::new(&g, 0.0, c, BoundaryField::uniform(4, 0.8)).unwrap();
        let dt = 0.02;
        let (next, _) = imex_step(&s, &assemble_diffusion_operator(&g, &p), &random_faces(&g, 3), dt, &g, 1e-13).unwrap();
        for &m in next.mu_tilde.values() {
            assert_relative_eq!(m, 0.8 / (1.0 + dt * p.k_off), max_relative = 1e-13);
        }
    }

    #[test]
    fn one_step_conserves_mass() {
        let g = PolarGrid::new(0.5, 1.0, 5, 9).unwrap();
        let p = PhysParams::default();
        let stepper = ImexStepper::new(&g, &p, 0.01).unwrap();
        for seed in 0..5 {
            let c: Vec<f64> = lcg_values(seed + 100, g.n_cells()).iter().map(|x| 1.0 + x).collect();
            let mu: Vec<f64> = lcg_values(seed + 200, 9).iter().map(|x| 0.5 + 0.5 * x).collect();
            let s = SimState::new(&g, 0.0, ScalarField::from_values(&g, c).unwrap(), BoundaryField::new(mu)).unwrap();
            let (next, _) = stepper.step(&s, &random_faces(&g, seed), 1e-13).unwrap();
            let m0 = total_mass(&s, &g);
            assert_relative_eq!(total_mass(&next, &g), m0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dt() {
        let g = small_grid();
        assert!(matches!(
            ImexStepper::new(&g, &PhysParams::default(), 0.0),
            Err(TransportError::BadTimeStep(_))
        ));
    }

    #[test]
    fn matches_block_form_when_steps_agree() {
        // dr = dθ: the angular block is D·A_periodic/r_j² and the radial block follows the scheme rows.
        let n_t = 8;
        let dth = 2.0 * std::f64::consts::PI / n_t as f64;
        let g = PolarGrid::new(0.5, 0.5 + 3.0 * dth, 3, n_t).unwrap();
        let p = PhysParams::default();
        let a = assemble_diffusion_operator(&g, &p);
        for j in 0..3 {
            let rj = g.r_center(j);
            let row = g.index(j, 3);
            let mut diag = 2.0 / (rj * rj);
            if j > 0 {
                diag += g.r_face(j) / rj;
            }
            if j < 2 {
                diag += g.r_face(j + 1) / rj;
            } else {
                diag += g.dr() * p.k_on;
            }
            assert_relative_eq!(a.get(row, row), diag, max_relative = 1e-13);
            assert_relative_eq!(a.get(row, g.index(j, 4)), -1.0 / (rj * rj), max_relative = 1e-13);
        }
    }
}
