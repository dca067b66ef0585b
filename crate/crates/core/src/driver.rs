//! Coupled time loop: pressure, then velocities, then one IMEX transport step.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{Config, ConfigError, InitialCondition};
use crate::grid::PolarGrid;
use crate::linsolve::SolveReport;
use crate::output::{self, OutputError};
use crate::pressure::{PressureError, PressureSolver};
use crate::state::{total_mass, BoundaryField, PhysParams, ScalarField, SimState, StateError};
use crate::transport::{ImexStepper, TransportError};
use crate::velocity::{cell_velocity, face_velocities, polarization, CellVelocity, VelocityError};

/// States with any entry above this magnitude are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("state became non-finite or exceeded {DIVERGENCE_LIMIT:e} at step {step} (t = {t})")]
    NonFiniteState { step: usize, t: f64 },
}

impl DriverError {
    /// True for failures of the numerical solve rather than of the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            DriverError::Pressure(PressureError::Solve(_))
                | DriverError::Transport(TransportError::Solve(_))
                | DriverError::NonFiniteState { .. }
        )
    }
}

/// One row of the per-step diagnostics, describing the state at `t` and the
/// velocities used to leave it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub polarization: f64,
    pub cfl: f64,
    pub residual_pressure: f64,
    pub residual_transport: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub rows: Vec<DiagRow>,
}

impl Diagnostics {
    /// Largest `|Mⁿ − M⁰| / |M⁰|` over the recorded rows.
    pub fn max_mass_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let m0 = first.mass;
        let scale = if m0 != 0.0 { m0.abs() } else { 1.0 };
        self.rows
            .iter()
            .map(|r| (r.mass - m0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Operators that stay fixed during a run.
#[derive(Debug, Clone)]
pub struct CoupledOperators {
    pub grid: PolarGrid,
    pub params: PhysParams,
    pub pressure: PressureSolver,
    pub transport: ImexStepper,
    pub tol: f64,
}

impl CoupledOperators {
    pub fn new(config: &Config) -> Result<Self, DriverError> {
        let grid = config.grid().map_err(ConfigError::from)?;
        Self::for_grid(&grid, config)
    }

    pub fn for_grid(grid: &PolarGrid, config: &Config) -> Result<Self, DriverError> {
        config.params.validate()?;
        Ok(Self {
            grid: grid.clone(),
            params: config.params,
            pressure: PressureSolver::new(grid, config.boundary_mode, config.solver)?,
            transport: ImexStepper::new(grid, &config.params, config.dt)?,
            tol: config.solver_tol,
        })
    }
}

/// Output of a coupled step besides the new state.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub velocity: CellVelocity,
    pub cfl: f64,
    pub pressure_report: SolveReport,
    pub transport_report: SolveReport,
}

/// Pressure solve, cell velocity, face velocities, then the IMEX update.
pub fn coupled_step(state: &SimState, ops: &CoupledOperators) -> Result<(SimState, StepInfo), DriverError> {
    let grid = &ops.grid;
    let (p, pressure_report) = ops.pressure.solve(&state.mu_tilde, &ops.params, ops.tol)?;
    let v = cell_velocity(&state.mu_tilde, grid, &ops.params);
    let u = face_velocities(&p, &v, grid)?;
    let cfl = u.cfl_number(grid, ops.transport.dt());
    let (next, transport_report) = ops.transport.step(state, &u, ops.tol)?;
    Ok((
        next,
        StepInfo {
            velocity: v,
            cfl,
            pressure_report,
            transport_report,
        },
    ))
}

/// Polarised preset: `c̃ = cos(θ − π) + 1` on every ring, `μ̃ = ½·(cos(θ − π) + 1)`.
pub fn polarised_state(grid: &PolarGrid) -> SimState {
    let profile = |k: usize| (grid.theta_center(k) - PI).cos() + 1.0;
    let c = ScalarField::from_fn(grid, |_, k| profile(k));
    let mu = BoundaryField::new((0..grid.n_theta()).map(|k| 0.5 * profile(k)).collect());
    SimState::new(grid, 0.0, c, mu).expect("preset sized to the grid")
}

/// Uniform concentration `c = 1` with an empty boundary.
pub fn uniform_state(grid: &PolarGrid) -> SimState {
    let c = ScalarField::from_fn(grid, |j, _| grid.r_center(j));
    SimState::new(grid, 0.0, c, BoundaryField::zeros(grid.n_theta())).expect("preset sized to the grid")
}

pub fn initial_state(config: &Config, grid: &PolarGrid) -> Result<SimState, DriverError> {
    Ok(match &config.initial {
        InitialCondition::Polarised => polarised_state(grid),
        InitialCondition::Uniform => uniform_state(grid),
        InitialCondition::Table { field, mu } => {
            let c = output::read_field_snapshot(field, grid)?;
            let m = output::read_mu_snapshot(mu, grid)?;
            SimState::new(grid, 0.0, c, m)?
        }
    })
}

/// Earliest sample time `t` such that every later sample `s` with
/// `s ≤ t + window` satisfies `max_k |μ̃(s) − μ̃(t)| ≤ eps`, and the history
/// actually extends to `t + window`. Samples must be time-ordered.
pub fn steady_state_reached(history: &[(f64, BoundaryField)], window: f64, eps: f64) -> Option<f64> {
    let last_t = history.last()?.0;
    for (i, (t, mu)) in history.iter().enumerate() {
        if *t + window > last_t * (1.0 + 1e-12) + 1e-12 {
            return None;
        }
        let holds = history[i + 1..]
            .iter()
            .take_while(|(s, _)| *s <= t + window + 1e-12 * window.max(1.0))
            .all(|(_, m)| m.max_abs_diff(mu) <= eps);
        if holds {
            return Some(*t);
        }
    }
    None
}

/// Incremental version of [`steady_state_reached`] for use inside the time loop.
#[derive(Debug, Clone)]
pub struct SteadyStateDetector {
    window: f64,
    eps: f64,
    /// Samples from the current candidate onwards; the candidate is the front.
    buffer: VecDeque<(f64, usize, Vec<f64>)>,
}

impl SteadyStateDetector {
    pub fn new(window: f64, eps: f64) -> Self {
        Self {
            window,
            eps,
            buffer: VecDeque::new(),
        }
    }

    fn within(eps: f64, a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps)
    }

    /// Feeds the sample at time `t` (step `step`). Returns the confirmed
    /// steady time and its step once the window is covered.
    pub fn push(&mut self, t: f64, step: usize, mu: &[f64]) -> Option<(f64, usize)> {
        let slack = 1e-12 * self.window.max(1.0);
        self.buffer.push_back((t, step, mu.to_vec()));
        // Only the new sample can break the current candidate.
        let front_ok = {
            let (_, _, m0) = &self.buffer[0];
            Self::within(self.eps, mu, m0)
        };
        if !front_ok {
            self.buffer.pop_front();
            // Find the next candidate whose window holds; newest samples
            // drift furthest, so scan them first.
            while self.buffer.len() > 1 {
                let (t0, _, m0) = &self.buffer[0];
                let limit = t0 + self.window + slack;
                let ok = self
                    .buffer
                    .iter()
                    .rev()
                    .filter(|(s, _, _)| *s <= limit)
                    .all(|(_, _, m)| Self::within(self.eps, m, m0));
                if ok {
                    break;
                }
                self.buffer.pop_front();
            }
        }
        let (t0, s0, _) = self.buffer[0];
        if t >= t0 + self.window - slack {
            Some((t0, s0))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyReport {
    pub t_steady: Option<f64>,
    pub step_steady: Option<usize>,
    /// `|v|` at the steady time, or at the final state when none was reached.
    pub polarization: f64,
    pub final_polarization: f64,
    pub max_mass_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SimState,
    pub diagnostics: Diagnostics,
    pub report: SteadyReport,
}

/// What to write while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    None,
    /// meta.txt and timeseries.csv.
    Timeseries,
    /// Also field and boundary snapshots.
    Full,
}

fn diag_row(step: usize, state: &SimState, grid: &PolarGrid, info: &StepInfo) -> DiagRow {
    DiagRow {
        step,
        t: state.t,
        mass: total_mass(state, grid),
        v_x: info.velocity.v_x,
        v_y: info.velocity.v_y,
        polarization: polarization(&info.velocity),
        cfl: info.cfl,
        residual_pressure: info.pressure_report.residual_norm,
        residual_transport: info.transport_report.residual_norm,
    }
}

/// Runs until `t_max` or a confirmed steady state, whichever comes first.
///
/// With `OutputMode::None` nothing touches the filesystem. Otherwise
/// `meta.txt` is written first and `timeseries.csv` is flushed even when the
/// run aborts on a non-finite state.
pub fn run_simulation(config: &Config, mode: OutputMode) -> Result<RunOutcome, DriverError> {
    config.validate()?;
    let grid = config.grid().map_err(ConfigError::from)?;
    let ops = CoupledOperators::for_grid(&grid, config)?;
    let state = initial_state(config, &grid)?;
    let dir = config.output_dir.clone();
    if mode != OutputMode::None {
        output::write_meta(config, &dir)?;
    }
    let mut diagnostics = Diagnostics::default();
    let result = run_loop(config, &ops, state, mode, &mut diagnostics);
    if mode != OutputMode::None {
        output::write_timeseries(&diagnostics, &dir)?;
    }
    let (final_state, report) = result?;
    if mode == OutputMode::Full {
        output::write_snapshot(&final_state, &grid, report.steps, &dir)?;
    }
    Ok(RunOutcome {
        final_state,
        diagnostics,
        report,
    })
}

fn run_loop(
    config: &Config,
    ops: &CoupledOperators,
    mut state: SimState,
    mode: OutputMode,
    diagnostics: &mut Diagnostics,
) -> Result<(SimState, SteadyReport), DriverError> {
    let grid = &ops.grid;
    let dir = &config.output_dir;
    let n_steps = (config.t_max / config.dt).round().max(1.0) as usize;
    let mut detector = SteadyStateDetector::new(config.t_ss, config.eps_ss);
    let mut steady: Option<(f64, usize)> = None;
    let mut step = 0usize;
    if mode == OutputMode::Full {
        output::write_snapshot(&state, grid, 0, dir)?;
    }
    loop {
        if let Some(found) = detector.push(state.t, step, state.mu_tilde.values()) {
            steady = Some(found);
            break;
        }
        if step == n_steps {
            break;
        }
        let (next, info) = coupled_step(&state, ops)?;
        diagnostics.rows.push(diag_row(step, &state, grid, &info));
        step += 1;
        if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
            return Err(DriverError::NonFiniteState { step, t: next.t });
        }
        // Keep the clock free of accumulated rounding.
        state = SimState { t: step as f64 * config.dt, ..next };
        if mode == OutputMode::Full && config.snapshot_every > 0 && step.is_multiple_of(config.snapshot_every) && step < n_steps {
            output::write_snapshot(&state, grid, step, dir)?;
        }
    }
    // Closing row for the final state (velocity of the final boundary field).
    let v_final = cell_velocity(&state.mu_tilde, grid, &ops.params);
    diagnostics.rows.push(DiagRow {
        step,
        t: state.t,
        mass: total_mass(&state, grid),
        v_x: v_final.v_x,
        v_y: v_final.v_y,
        polarization: polarization(&v_final),
        cfl: f64::NAN,
        residual_pressure: f64::NAN,
        residual_transport: f64::NAN,
    });
    let final_polarization = polarization(&v_final);
    let pol_at = |s: usize| diagnostics.rows.get(s).map_or(final_polarization, |r| r.polarization);
    let report = SteadyReport {
        t_steady: steady.map(|(t, _)| t),
        step_steady: steady.map(|(_, s)| s),
        polarization: steady.map_or(final_polarization, |(_, s)| pol_at(s)),
        final_polarization,
        max_mass_drift: diagnostics.max_mass_drift(),
        steps: step,
    };
    Ok((state, report))
}

/// Runs `n_steps` coupled steps from the configured initial state and returns
/// the largest relative mass drift.
pub fn mass_check(config: &Config, n_steps: usize) -> Result<f64, DriverError> {
    let grid = config.grid().map_err(ConfigError::from)?;
    let ops = CoupledOperators::for_grid(&grid, config)?;
    let mut state = initial_state(config, &grid)?;
    let m0 = total_mass(&state, &grid);
    let scale = if m0 != 0.0 { m0.abs() } else { 1.0 };
    let mut worst: f64 = 0.0;
    for step in 0..n_steps {
        let (next, _) = coupled_step(&state, &ops)?;
        if !next.is_finite() {
            return Err(DriverError::NonFiniteState { step: step + 1, t: next.t });
        }
        worst = worst.max((total_mass(&next, &grid) - m0).abs() / scale);
        state = next;
    }
    Ok(worst)
}
