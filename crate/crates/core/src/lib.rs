//! Finite-volume solver for a crawling-cell model on a 2D annulus.
//!
//! The interior concentration `c̃ = r·c` and the boundary density `μ̃ = R·μ`
//! evolve by an IMEX scheme: upwind advection by the Darcy velocity
//! `u = −∇p − v` is explicit, diffusion and membrane exchange are implicit.
//! Each step first solves a Poisson problem for the pressure with Dirichlet
//! data `[1 − δμ/R]₊` on the outer circle.

pub mod config;
pub mod convergence;
pub mod driver;
pub mod grid;
pub mod linsolve;
pub mod oracles;
pub mod output;
pub mod pressure;
pub mod sparse;
pub mod state;
pub mod sweep;
pub mod transport;
pub mod velocity;

pub use config::{Config, ConfigError, InitialCondition};
pub use driver::{coupled_step, run_simulation, CoupledOperators, DriverError, OutputMode, RunOutcome, SteadyReport};
pub use grid::{GridError, PolarGrid};
pub use linsolve::SolveMethod;
pub use pressure::BoundaryMode;
pub use state::{BoundaryField, PhysParams, ScalarField, SimState};
