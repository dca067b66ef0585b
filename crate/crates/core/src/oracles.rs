//! Reference computations written independently of the main assembly code:
//! the analytic radial Poisson solution, a midpoint quadrature of the initial
//! mass, and a dense one-step reference of the coupled scheme.

use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::PolarGrid;
use crate::state::{BoundaryField, PhysParams, ScalarField, SimState};

/// Largest `n_r·n_theta` accepted by [`dense_reference_step`].
pub const DENSE_CELL_LIMIT: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("r = {r} lies outside [{r_min}, {r_max}]")]
    OutOfDomain { r: f64, r_min: f64, r_max: f64 },
    #[error("grid has {cells} cells, dense reference allows at most {DENSE_CELL_LIMIT}")]
    GridTooLarge { cells: usize },
    #[error("dense elimination hit a zero pivot in column {0}")]
    Singular(usize),
    #[error("state does not match the grid")]
    Shape,
}

/// Solution of `p'' + p'/r = k_d` on `[r_min, r_max]` with
/// `p(r_min) = p_inner`, `p(r_max) = p_outer`.
pub fn radial_poisson_exact(
    r: f64,
    r_min: f64,
    r_max: f64,
    k_d: f64,
    p_inner: f64,
    p_outer: f64,
) -> Result<f64, OracleError> {
    let slack = 1e-14 * r_max.abs();
    if !(r >= r_min - slack && r <= r_max + slack) {
        return Err(OracleError::OutOfDomain { r, r_min, r_max });
    }
    let particular = |x: f64| 0.25 * k_d * x * x;
    // p = particular + a·ln(r/r_min) + b
    let b = p_inner - particular(r_min);
    let a = (p_outer - particular(r_max) - b) / (r_max / r_min).ln();
    Ok(particular(r) + a * (r / r_min).ln() + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassPreset {
    Polarised,
    Uniform,
}

/// Midpoint quadrature of `∫∫ c̃ dr dθ + ∫ μ̃ dθ` with `refinement` points
/// per direction.
pub fn initial_mass_quadrature(preset: MassPreset, r_min: f64, r_max: f64, refinement: usize) -> f64 {
    let n = refinement.max(1);
    let hr = (r_max - r_min) / n as f64;
    let ht = 2.0 * PI / n as f64;
    let mut bulk = 0.0;
    let mut edge = 0.0;
    for i in 0..n {
        let theta = (i as f64 + 0.5) * ht;
        let shape = (theta - PI).cos() + 1.0;
        for m in 0..n {
            let r = r_min + (m as f64 + 0.5) * hr;
            bulk += match preset {
                MassPreset::Polarised => shape,
                MassPreset::Uniform => r,
            };
        }
        edge += match preset {
            MassPreset::Polarised => 0.5 * shape,
            MassPreset::Uniform => 0.0,
        };
    }
    bulk * hr * ht + edge * ht
}

/// Gaussian elimination with partial pivoting on a dense row-major matrix.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return Err(OracleError::Singular(col));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

fn plus(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// One coupled step (pressure, velocity, IMEX transport) with the
/// ghost-value boundary closure, using dense matrices filled row by row.
pub fn dense_reference_step(
    state: &SimState,
    grid: &PolarGrid,
    params: &PhysParams,
    dt: f64,
) -> Result<SimState, OracleError> {
    let nr = grid.n_r();
    let nt = grid.n_theta();
    let cells = nr * nt;
    if cells > DENSE_CELL_LIMIT {
        return Err(OracleError::GridTooLarge { cells });
    }
    if state.c_tilde.values().len() != cells || state.mu_tilde.values().len() != nt {
        return Err(OracleError::Shape);
    }
    let r_min = grid.r_min();
    let big_r = grid.r_max();
    let dr = (big_r - r_min) / nr as f64;
    let dth = 2.0 * PI / nt as f64;
    // One-based radii as in the written scheme: r(j) for j = 0..=nr+1, rf(j) = r_{j+½}.
    let r = |j: usize| r_min + (j as f64 - 0.5) * dr;
    let rf = |j: usize| r_min + j as f64 * dr;
    let theta = |k: usize| (k + 1) as f64 * dth;
    let at = |j: usize, k: usize| (j - 1) * nt + (k % nt);
    let c = |j: usize, k: usize| state.c_tilde.values()[at(j, k)];
    let mu = |k: usize| state.mu_tilde.values()[k];

    // Pressure: five-point flux balance on p̃ with ghosts p̃_0 = 0 and
    // p̃_{N+1} = r_N·[1 − δμ̃/r_N]₊ at radius r_{N+1}.
    let mut lp = vec![vec![0.0; cells]; cells];
    let mut rp = vec![0.0; cells];
    for j in 1..=nr {
        let rj = r(j);
        for k in 0..nt {
            let row = at(j, k);
            let rad = 1.0 / (dr * dr);
            let ang = 1.0 / (rj * rj * dth * dth);
            lp[row][row] += rad * (rf(j - 1) + rf(j)) / rj + 2.0 * ang;
            lp[row][at(j, k + 1)] -= ang;
            lp[row][at(j, k + nt - 1)] -= ang;
            if j > 1 {
                lp[row][at(j - 1, k)] -= rad * rf(j - 1) / r(j - 1);
            }
            if j < nr {
                lp[row][at(j + 1, k)] -= rad * rf(j) / r(j + 1);
            } else {
                let ghost = r(nr) * plus(1.0 - params.delta * mu(k) / r(nr));
                rp[row] += rad * rf(nr) / r(nr + 1) * ghost;
            }
            rp[row] -= params.k_d * rj;
        }
    }
    let p = dense_solve(lp, rp)?;
    let pt = |j: usize, k: usize| p[at(j, k)];

    let (mut vx, mut vy) = (0.0, 0.0);
    for k in 0..nt {
        let w = plus(1.0 - params.delta * mu(k) / big_r);
        vx += w * theta(k).cos();
        vy += w * theta(k).sin();
    }
    vx *= params.gamma * dth;
    vy *= params.gamma * dth;

    // Explicit upwind transport increment for each c̃ cell.
    let up = |u: f64, minus: f64, plus_side: f64| if u > 0.0 { u * minus } else { u * plus_side };
    let mut explicit = vec![0.0; cells + nt];
    for j in 1..=nr {
        let rj = r(j);
        for k in 0..nt {
            // Radial faces strictly inside the annulus.
            let mut div = 0.0;
            if j < nr {
                let u = -(pt(j + 1, k) / r(j + 1) - pt(j, k) / rj) / dr - (vx * theta(k).cos() + vy * theta(k).sin());
                div += up(u, c(j, k), c(j + 1, k)) / dr;
            }
            if j > 1 {
                let u = -(pt(j, k) / rj - pt(j - 1, k) / r(j - 1)) / dr - (vx * theta(k).cos() + vy * theta(k).sin());
                div -= up(u, c(j - 1, k), c(j, k)) / dr;
            }
            let ang_u = |kk: usize| {
                let tf = theta(kk) + 0.5 * dth;
                -(pt(j, kk + 1) - pt(j, kk)) / (rj * dth) - rj * (-vx * tf.sin() + vy * tf.cos())
            };
            let km = k + nt - 1;
            div += up(ang_u(k), c(j, k), c(j, k + 1)) / (rj * rj * dth);
            div -= up(ang_u(km % nt), c(j, km), c(j, k)) / (rj * rj * dth);
            explicit[at(j, k)] = c(j, k) - dt * div;
        }
    }
    for k in 0..nt {
        explicit[cells + k] = mu(k);
    }

    // Implicit diffusion and exchange.
    let n = cells + nt;
    let mut m = vec![vec![0.0; n]; n];
    let dcoef = params.diffusion * dt / (dr * dr);
    for j in 1..=nr {
        let rj = r(j);
        for k in 0..nt {
            let row = at(j, k);
            m[row][row] += 1.0;
            if j > 1 {
                m[row][row] += dcoef * rf(j - 1) / rj;
                m[row][at(j - 1, k)] -= dcoef * rf(j - 1) / r(j - 1);
            }
            if j < nr {
                m[row][row] += dcoef * rf(j) / rj;
                m[row][at(j + 1, k)] -= dcoef * rf(j) / r(j + 1);
            } else {
                m[row][row] += dt / dr * params.k_on;
                m[row][cells + k] -= dt / dr * params.k_off;
            }
            let ang = params.diffusion * dt / (rj * rj * dth * dth);
            m[row][row] += 2.0 * ang;
            m[row][at(j, k + 1)] -= ang;
            m[row][at(j, k + nt - 1)] -= ang;
        }
    }
    for k in 0..nt {
        let row = cells + k;
        m[row][row] += 1.0 + dt * params.k_off;
        m[row][at(nr, k)] -= dt * params.k_on;
    }
    let next = dense_solve(m, explicit)?;
    let c_new = ScalarField::from_values(grid, next[..cells].to_vec()).map_err(|_| OracleError::Shape)?;
    let mu_new = BoundaryField::new(next[cells..].to_vec());
    SimState::new(grid, state.t + dt, c_new, mu_new).map_err(|_| OracleError::Shape)
}
