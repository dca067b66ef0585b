//! Domain velocity `v` and the Darcy face velocities `u = −∇p − v`.

use thiserror::Error;

use crate::grid::PolarGrid;
use crate::pressure::PressureField;
use crate::state::{positive_part, BoundaryField, PhysParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VelocityError {
    #[error("field has {got} entries, grid expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Cartesian cell velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellVelocity {
    pub v_x: f64,
    pub v_y: f64,
}

impl CellVelocity {
    /// Radial component at angle `theta`.
    #[inline]
    pub fn radial(&self, theta: f64) -> f64 {
        self.v_x * theta.cos() + self.v_y * theta.sin()
    }

    /// Angular component `v·e_θ` at angle `theta` (unscaled).
    #[inline]
    pub fn angular(&self, theta: f64) -> f64 {
        -self.v_x * theta.sin() + self.v_y * theta.cos()
    }

    pub fn norm(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    /// Counter-clockwise rotation by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            v_x: c * self.v_x - s * self.v_y,
            v_y: s * self.v_x + c * self.v_y,
        }
    }
}

/// Polarization `|v|`.
pub fn polarization(v: &CellVelocity) -> f64 {
    v.norm()
}

/// `v = γ·dθ·Σ_k [1 − δ μ̃_k / R]₊ (cos θ_k, sin θ_k)`, summed in sector order.
pub fn cell_velocity(mu: &BoundaryField, grid: &PolarGrid, params: &PhysParams) -> CellVelocity {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let r = grid.r_max();
    for (k, &m) in mu.values().iter().enumerate() {
        let w = positive_part(1.0 - params.delta * m / r);
        if w != 0.0 {
            let (s, c) = grid.theta_center(k).sin_cos();
            sx += w * c;
            sy += w * s;
        }
    }
    let scale = params.gamma * grid.dtheta();
    CellVelocity {
        v_x: scale * sx,
        v_y: scale * sy,
    }
}

/// Face velocities at time level `n`.
///
/// `u_rad` has `(n_r + 1)·n_theta` entries: face `j` (inner face of ring `j`)
/// at angle `θ_k`, stored at `k + j·n_theta`. `u_ang` has `n_r·n_theta`
/// entries: the face between sectors `k` and `k + 1` of ring `j`, already
/// multiplied by `r_j` as required by the angular flux.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocityField {
    n_r: usize,
    n_theta: usize,
    u_rad: Vec<f64>,
    u_ang: Vec<f64>,
}

impl FaceVelocityField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            u_rad: vec![0.0; (grid.n_r() + 1) * grid.n_theta()],
            u_ang: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_parts(grid: &PolarGrid, u_rad: Vec<f64>, u_ang: Vec<f64>) -> Result<Self, VelocityError> {
        let n_rad = (grid.n_r() + 1) * grid.n_theta();
        if u_rad.len() != n_rad {
            return Err(VelocityError::DimensionMismatch {
                expected: n_rad,
                got: u_rad.len(),
            });
        }
        if u_ang.len() != grid.n_cells() {
            return Err(VelocityError::DimensionMismatch {
                expected: grid.n_cells(),
                got: u_ang.len(),
            });
        }
        Ok(Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            u_rad,
            u_ang,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Radial velocity on face `j` (between rings `j − 1` and `j`) at sector `k`.
    #[inline]
    pub fn radial(&self, j: usize, k: usize) -> f64 {
        self.u_rad[k + j * self.n_theta]
    }

    /// Angular velocity between sectors `k` and `k + 1` of ring `j`.
    #[inline]
    pub fn angular(&self, j: usize, k: usize) -> f64 {
        self.u_ang[k + j * self.n_theta]
    }

    pub fn set_radial(&mut self, j: usize, k: usize, value: f64) {
        self.u_rad[k + j * self.n_theta] = value;
    }

    pub fn set_angular(&mut self, j: usize, k: usize, value: f64) {
        self.u_ang[k + j * self.n_theta] = value;
    }

    pub fn radial_values(&self) -> &[f64] {
        &self.u_rad
    }

    pub fn angular_values(&self) -> &[f64] {
        &self.u_ang
    }

    /// Shifts every sector index by `shift` (periodic).
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.n_theta;
        let rot = |src: &[f64], rows: usize| {
            let mut out = vec![0.0; src.len()];
            for j in 0..rows {
                for k in 0..n {
                    out[(k + shift) % n + j * n] = src[k + j * n];
                }
            }
            out
        };
        Self {
            n_r: self.n_r,
            n_theta: n,
            u_rad: rot(&self.u_rad, self.n_r + 1),
            u_ang: rot(&self.u_ang, self.n_r),
        }
    }

    /// Largest explicit outflow fraction over interior cells,
    /// `dt·max[(u⁺_{j+½} − u⁻_{j−½})/dr + (u⁺_{k+½} − u⁻_{k−½})/(r_j²·dθ)]`.
    /// Nonnegativity of the explicit half-step holds when this is at most 1.
    /// Boundary radial faces are excluded, matching the transport operator.
    pub fn cfl_number(&self, grid: &PolarGrid, dt: f64) -> f64 {
        let n_r = grid.n_r();
        let mut worst: f64 = 0.0;
        for j in 0..n_r {
            let rj = grid.r_center(j);
            let ang = 1.0 / (rj * rj * grid.dtheta());
            for k in 0..grid.n_theta() {
                let mut out = 0.0;
                if j + 1 < n_r {
                    out += self.radial(j + 1, k).max(0.0) / grid.dr();
                }
                if j > 0 {
                    out -= self.radial(j, k).min(0.0) / grid.dr();
                }
                out += ang * (self.angular(j, k).max(0.0) - self.angular(j, grid.prev_k(k)).min(0.0));
                worst = worst.max(out);
            }
        }
        dt * worst
    }
}

/// Darcy face velocities from `p̃` and `v`.
///
/// Interior radial faces use `−(p̃_{j}/r_{j} − p̃_{j−1}/r_{j−1})/dr − v_r(θ_k)`;
/// the two boundary radial faces reuse the neighbouring interior gradient
/// (they are never read by the transport step, whose boundary fluxes are
/// prescribed). Angular faces use `−(p̃_{k+1} − p̃_k)/(r_j·dθ) − r_j·v_θ(θ_{k+½})`.
pub fn face_velocities(
    p: &PressureField,
    v: &CellVelocity,
    grid: &PolarGrid,
) -> Result<FaceVelocityField, VelocityError> {
    let field = p.scaled();
    if field.values().len() != grid.n_cells() || field.n_theta() != grid.n_theta() {
        return Err(VelocityError::DimensionMismatch {
            expected: grid.n_cells(),
            got: field.values().len(),
        });
    }
    let n_r = grid.n_r();
    let n_t = grid.n_theta();
    let mut u = FaceVelocityField::zeros(grid);
    for k in 0..n_t {
        let v_r = v.radial(grid.theta_center(k));
        let mut grads = vec![0.0; n_r + 1];
        for (j, g) in grads.iter_mut().enumerate().take(n_r).skip(1) {
            *g = (field.get(j, k) / grid.r_center(j) - field.get(j - 1, k) / grid.r_center(j - 1)) / grid.dr();
        }
        grads[0] = grads[1];
        grads[n_r] = grads[n_r - 1];
        for (j, g) in grads.iter().enumerate() {
            u.set_radial(j, k, -g - v_r);
        }
    }
    for j in 0..n_r {
        let rj = grid.r_center(j);
        for k in 0..n_t {
            let kp = grid.next_k(k);
            let grad = (field.get(j, kp) - field.get(j, k)) / (rj * grid.dtheta());
            let v_theta = rj * v.angular(grid.theta_face(k));
            u.set_angular(j, k, -grad - v_theta);
        }
    }
    Ok(u)
}
