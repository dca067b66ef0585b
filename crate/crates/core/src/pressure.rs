//! Poisson problem for the scaled pressure `p̃ = r·p`.
//!
//! Cell `(j, k)` balances the radial fluxes `r_{j±½}·(p̃/r)'` and the angular
//! fluxes `(1/r_j²)·∂θ p̃` against the source `−k_d·r_j`. The inner circle
//! carries `p = 0`; the outer circle carries `p = [1 − δ μ̃/R]₊`.
//!
//! The operator `L` is assembled once per grid. Right-scaling by the cell radii
//! makes it symmetric positive definite, which the iterative path exploits.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::PolarGrid;
use crate::linsolve::{self, Factorized, SolveError, SolveMethod, SolveReport};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::state::{positive_part, BoundaryField, PhysParams, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error("boundary field has {got} values, grid has {expected} sectors")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// How the Dirichlet data enters the radial boundary fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Ghost cells one full `dr` outside the annulus: `p̃ = 0` inside, and
    /// `p̃ = r_N·[1 − δμ̃/r_N]₊` at radius `R + dr/2` outside. First order.
    #[default]
    Paper,
    /// Dirichlet values imposed on the physical circles with a half-cell flux
    /// distance. Second order.
    Face,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::Paper => f.write_str("paper"),
            BoundaryMode::Face => f.write_str("face"),
        }
    }
}

impl FromStr for BoundaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(BoundaryMode::Paper),
            "face" => Ok(BoundaryMode::Face),
            other => Err(format!("unknown boundary mode `{other}` (expected paper|face)")),
        }
    }
}

/// Scaled pressure `p̃` on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    values: ScalarField,
}

impl PressureField {
    pub fn new(values: ScalarField) -> Self {
        Self { values }
    }

    pub fn scaled(&self) -> &ScalarField {
        &self.values
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values.get(j, k)
    }

    /// Physical pressure `p = p̃ / r` at cell `(j, k)`.
    #[inline]
    pub fn physical(&self, grid: &PolarGrid, j: usize, k: usize) -> f64 {
        self.values.get(j, k) / grid.r_center(j)
    }
}

/// Assembles `L` with `L·p̃ = rhs`. Row and column order is ring-major.
pub fn assemble_pressure_operator(grid: &PolarGrid, mode: BoundaryMode) -> SparseMatrix {
    let n_r = grid.n_r();
    let n_t = grid.n_theta();
    let dr2 = grid.dr() * grid.dr();
    let dth2 = grid.dtheta() * grid.dtheta();
    let mut b = TripletBuilder::with_capacity(grid.n_cells(), grid.n_cells(), 5 * grid.n_cells());
    for j in 0..n_r {
        let rj = grid.r_center(j);
        let r_lo = grid.r_face(j);
        let r_hi = grid.r_face(j + 1);
        let ang = 1.0 / (rj * rj * dth2);
        // Radial diagonal: both faces, with the boundary closures.
        let lo_diag = match (j, mode) {
            (0, BoundaryMode::Face) => 2.0 * r_lo / (rj * dr2),
            _ => r_lo / (rj * dr2),
        };
        let hi_diag = match (j + 1 == n_r, mode) {
            (true, BoundaryMode::Face) => 2.0 * r_hi / (rj * dr2),
            _ => r_hi / (rj * dr2),
        };
        for k in 0..n_t {
            let row = grid.index(j, k);
            if j > 0 {
                b.add(row, grid.index(j - 1, k), -r_lo / (grid.r_center(j - 1) * dr2));
            }
            b.add(row, row, lo_diag + hi_diag + 2.0 * ang);
            if j + 1 < n_r {
                b.add(row, grid.index(j + 1, k), -r_hi / (grid.r_center(j + 1) * dr2));
            }
            b.add(row, grid.index(j, grid.prev_k(k)), -ang);
            b.add(row, grid.index(j, grid.next_k(k)), -ang);
        }
    }
    b.finalize().expect("pressure operator entries are finite")
}

/// `L·D_r` assembled entry by entry, so its symmetry holds bit for bit.
/// Unknowns are `q = p̃/r`.
pub fn assemble_symmetrized_pressure_operator(grid: &PolarGrid, mode: BoundaryMode) -> SparseMatrix {
    let n_r = grid.n_r();
    let n_t = grid.n_theta();
    let dr2 = grid.dr() * grid.dr();
    let dth2 = grid.dtheta() * grid.dtheta();
    let mut b = TripletBuilder::with_capacity(grid.n_cells(), grid.n_cells(), 5 * grid.n_cells());
    for j in 0..n_r {
        let rj = grid.r_center(j);
        let r_lo = grid.r_face(j);
        let r_hi = grid.r_face(j + 1);
        let ang = 1.0 / (rj * dth2);
        let lo_diag = match (j, mode) {
            (0, BoundaryMode::Face) => 2.0 * r_lo / dr2,
            _ => r_lo / dr2,
        };
        let hi_diag = match (j + 1 == n_r, mode) {
            (true, BoundaryMode::Face) => 2.0 * r_hi / dr2,
            _ => r_hi / dr2,
        };
        for k in 0..n_t {
            let row = grid.index(j, k);
            if j > 0 {
                b.add(row, grid.index(j - 1, k), -r_lo / dr2);
            }
            b.add(row, row, lo_diag + hi_diag + 2.0 * ang);
            if j + 1 < n_r {
                b.add(row, grid.index(j + 1, k), -r_hi / dr2);
            }
            b.add(row, grid.index(j, grid.prev_k(k)), -ang);
            b.add(row, grid.index(j, grid.next_k(k)), -ang);
        }
    }
    b.finalize().expect("pressure operator entries are finite")
}

/// Outer Dirichlet value of `p` used by the given mode for sector `k`.
pub fn outer_pressure(grid: &PolarGrid, mu: &BoundaryField, params: &PhysParams, mode: BoundaryMode, k: usize) -> f64 {
    match mode {
        BoundaryMode::Paper => {
            let r_n = grid.r_center(grid.n_r() - 1);
            positive_part(1.0 - params.delta * mu.values()[k] / r_n)
        }
        BoundaryMode::Face => positive_part(1.0 - params.delta * mu.values()[k] / grid.r_max()),
    }
}

/// Right-hand side: `−k_d·r_j` on every cell plus the outer Dirichlet flux on the last ring.
pub fn assemble_pressure_rhs(
    grid: &PolarGrid,
    mu: &BoundaryField,
    params: &PhysParams,
    mode: BoundaryMode,
) -> Result<Vec<f64>, PressureError> {
    if mu.len() != grid.n_theta() {
        return Err(PressureError::DimensionMismatch {
            expected: grid.n_theta(),
            got: mu.len(),
        });
    }
    let n_r = grid.n_r();
    let dr2 = grid.dr() * grid.dr();
    let mut rhs = Vec::with_capacity(grid.n_cells());
    for j in 0..n_r {
        let rj = grid.r_center(j);
        for _ in 0..grid.n_theta() {
            rhs.push(-params.k_d * rj);
        }
    }
    let j = n_r - 1;
    let r_n = grid.r_center(j);
    let r_face = grid.r_face(n_r);
    let weight = match mode {
        // Ghost value r_N·[·]₊ divided by the ghost radius r_{N+1}.
        BoundaryMode::Paper => r_n * r_face / (grid.r_center(n_r) * dr2),
        BoundaryMode::Face => 2.0 * r_face / dr2,
    };
    for k in 0..grid.n_theta() {
        rhs[grid.index(j, k)] += weight * outer_pressure(grid, mu, params, mode, k);
    }
    Ok(rhs)
}

/// Cached pressure operator, factorized (direct) or symmetrized (iterative).
#[derive(Debug, Clone)]
pub struct PressureSolver {
    grid: PolarGrid,
    mode: BoundaryMode,
    backend: Backend,
}

#[derive(Debug, Clone)]
enum Backend {
    Direct(Factorized),
    /// `L·D_r` and the diagonal `D_r`; solve for `q = p̃ / r`.
    Symmetrized { matrix: SparseMatrix, radii: Vec<f64> },
}

impl PressureSolver {
    pub fn new(grid: &PolarGrid, mode: BoundaryMode, method: SolveMethod) -> Result<Self, PressureError> {
        let op = assemble_pressure_operator(grid, mode);
        let backend = match method {
            SolveMethod::Direct => Backend::Direct(Factorized::new(op)?),
            SolveMethod::Iterative => {
                let radii = cell_radii(grid);
                let matrix = assemble_symmetrized_pressure_operator(grid, mode);
                Backend::Symmetrized { matrix, radii }
            }
        };
        Ok(Self {
            grid: grid.clone(),
            mode,
            backend,
        })
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn solve(
        &self,
        mu: &BoundaryField,
        params: &PhysParams,
        tol: f64,
    ) -> Result<(PressureField, SolveReport), PressureError> {
        let rhs = assemble_pressure_rhs(&self.grid, mu, params, self.mode)?;
        let (values, report) = match &self.backend {
            Backend::Direct(f) => f.solve(&rhs, tol)?,
            Backend::Symmetrized { matrix, radii } => {
                let (q, report) = linsolve::conjugate_gradient(matrix, &rhs, tol, None)?;
                let p = q.iter().zip(radii).map(|(qi, ri)| qi * ri).collect();
                (p, report)
            }
        };
        let field = ScalarField::from_values(&self.grid, values).expect("solution sized to the grid");
        Ok((PressureField::new(field), report))
    }
}

/// `r_j` repeated over each ring, i.e. the diagonal of `D_r`.
pub fn cell_radii(grid: &PolarGrid) -> Vec<f64> {
    let mut radii = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.n_r() {
        radii.extend(std::iter::repeat_n(grid.r_center(j), grid.n_theta()));
    }
    radii
}

/// One-shot assemble and solve.
pub fn solve_pressure(
    grid: &PolarGrid,
    mu: &BoundaryField,
    params: &PhysParams,
    mode: BoundaryMode,
    method: SolveMethod,
    tol: f64,
) -> Result<(PressureField, SolveReport), PressureError> {
    PressureSolver::new(grid, mode, method)?.solve(mu, params, tol)
}
