//! Physical parameters and the scaled state `(c̃, μ̃)`.
//!
//! Bulk values are stored as `c̃ = r·c` on cells, boundary values as
//! `μ̃ = R·μ` on the outer sectors. In these variables the polar Jacobian is
//! absorbed, so mass is a plain `dr·dθ` sum.

use thiserror::Error;

use crate::grid::PolarGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("field has {got} values, grid expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter `{name}` must be {requirement} (got {value})")]
    BadParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

/// Model coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Bulk depolymerization rate.
    pub k_d: f64,
    /// Inhibition strength in the polymerization rate `[1 − δμ]₊`.
    pub delta: f64,
    /// Friction-mobility coefficient of the domain velocity.
    pub gamma: f64,
    /// Diffusion coefficient.
    pub diffusion: f64,
    pub k_on: f64,
    pub k_off: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            k_d: 1.0,
            delta: 2.0,
            gamma: 2.0,
            diffusion: 1.0,
            k_on: 0.3,
            k_off: 1.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), StateError> {
        let nonneg = [
            ("k_d", self.k_d),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("k_on", self.k_on),
            ("k_off", self.k_off),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(StateError::BadParameter {
                    name,
                    requirement: "finite and nonnegative",
                    value,
                });
            }
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(StateError::BadParameter {
                name: "diffusion",
                requirement: "finite and positive",
                value: self.diffusion,
            });
        }
        Ok(())
    }
}

/// Positive part.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Boundary values `μ̃_k`, one per angular sector.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    values: Vec<f64>,
}

impl BoundaryField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_theta: usize) -> Self {
        Self {
            values: vec![0.0; n_theta],
        }
    }

    pub fn uniform(n_theta: usize, value: f64) -> Self {
        Self {
            values: vec![value; n_theta],
        }
    }

    pub fn for_grid(grid: &PolarGrid, values: Vec<f64>) -> Result<Self, StateError> {
        if values.len() != grid.n_theta() {
            return Err(StateError::DimensionMismatch {
                expected: grid.n_theta(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Shifts sector `k` to sector `k + shift` (periodic).
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.values.len();
        let mut out = vec![0.0; n];
        for (k, &v) in self.values.iter().enumerate() {
            out[(k + shift) % n] = v;
        }
        Self { values: out }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Cell values in ring-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n_r: usize,
    n_theta: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: &PolarGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.n_r() {
            for k in 0..grid.n_theta() {
                values.push(f(j, k));
            }
        }
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values,
        }
    }

    pub fn from_values(grid: &PolarGrid, values: Vec<f64>) -> Result<Self, StateError> {
        if values.len() != grid.n_cells() {
            return Err(StateError::DimensionMismatch {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        Ok(Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[k + j * self.n_theta]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Values of ring `j`.
    pub fn ring(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_theta..(j + 1) * self.n_theta]
    }

    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.n_theta;
        let mut out = vec![0.0; self.values.len()];
        for j in 0..self.n_r {
            for k in 0..n {
                out[(k + shift) % n + j * n] = self.values[k + j * n];
            }
        }
        Self {
            n_r: self.n_r,
            n_theta: n,
            values: out,
        }
    }

    /// Largest spread `max_k − min_k` over rings; zero for axisymmetric data.
    pub fn angular_spread(&self) -> f64 {
        (0..self.n_r)
            .map(|j| {
                let ring = self.ring(j);
                let hi = ring.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = ring.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Simulation state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub c_tilde: ScalarField,
    pub mu_tilde: BoundaryField,
}

impl SimState {
    pub fn new(grid: &PolarGrid, t: f64, c_tilde: ScalarField, mu_tilde: BoundaryField) -> Result<Self, StateError> {
        if c_tilde.values().len() != grid.n_cells() || c_tilde.n_theta() != grid.n_theta() {
            return Err(StateError::DimensionMismatch {
                expected: grid.n_cells(),
                got: c_tilde.values().len(),
            });
        }
        if mu_tilde.len() != grid.n_theta() {
            return Err(StateError::DimensionMismatch {
                expected: grid.n_theta(),
                got: mu_tilde.len(),
            });
        }
        Ok(Self { t, c_tilde, mu_tilde })
    }

    /// Layout used by the coupled transport system: `c̃` ring-major, then `μ̃`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.c_tilde.values().len() + self.mu_tilde.len());
        e.extend_from_slice(self.c_tilde.values());
        e.extend_from_slice(self.mu_tilde.values());
        e
    }

    pub fn from_stacked(grid: &PolarGrid, t: f64, stacked: &[f64]) -> Result<Self, StateError> {
        let n = grid.n_cells();
        if stacked.len() != n + grid.n_theta() {
            return Err(StateError::DimensionMismatch {
                expected: n + grid.n_theta(),
                got: stacked.len(),
            });
        }
        Ok(Self {
            t,
            c_tilde: ScalarField::from_values(grid, stacked[..n].to_vec())?,
            mu_tilde: BoundaryField::new(stacked[n..].to_vec()),
        })
    }

    pub fn rotated(&self, shift: usize) -> Self {
        Self {
            t: self.t,
            c_tilde: self.c_tilde.rotated(shift),
            mu_tilde: self.mu_tilde.rotated(shift),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c_tilde.values().iter().chain(self.mu_tilde.values()).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.c_tilde
            .values()
            .iter()
            .chain(self.mu_tilde.values())
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.c_tilde
            .values()
            .iter()
            .chain(self.mu_tilde.values())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Discrete mass `dr·dθ·Σ c̃ + dθ·Σ μ̃`, summed ring-major.
pub fn total_mass(state: &SimState, grid: &PolarGrid) -> f64 {
    let bulk: f64 = state.c_tilde.values().iter().sum();
    let boundary: f64 = state.mu_tilde.values().iter().sum();
    grid.dr() * grid.dtheta() * bulk + grid.dtheta() * boundary
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn mass_examples() {
        let g = PolarGrid::new(0.5, 1.5, 4, 8).unwrap();
        let zero = SimState::new(&g, 0.0, ScalarField::zeros(&g), BoundaryField::zeros(8)).unwrap();
        assert_eq!(total_mass(&zero, &g), 0.0);
        let ones = SimState::new(&g, 0.0, ScalarField::from_fn(&g, |_, _| 1.0), BoundaryField::zeros(8)).unwrap();
        assert_relative_eq!(total_mass(&ones, &g), 2.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn stacked_roundtrip_and_rotation() {
        let g = PolarGrid::new(0.5, 1.0, 3, 4).unwrap();
        let c = ScalarField::from_fn(&g, |j, k| (10 * j + k) as f64);
        let mu = BoundaryField::new(vec![1.0, 2.0, 3.0, 4.0]);
        let s = SimState::new(&g, 0.5, c, mu).unwrap();
        let back = SimState::from_stacked(&g, 0.5, &s.to_stacked()).unwrap();
        assert_eq!(back, s);
        let r = s.rotated(1);
        assert_eq!(r.mu_tilde.values(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(r.c_tilde.get(2, 0), 23.0);
        assert_eq!(r.c_tilde.get(2, 1), 20.0);
    }

    #[test]
    fn dimension_checks() {
        let g = PolarGrid::new(0.5, 1.0, 3, 4).unwrap();
        assert!(BoundaryField::for_grid(&g, vec![0.0; 3]).is_err());
        assert!(ScalarField::from_values(&g, vec![0.0; 11]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::default().validate().is_ok());
        let bad = PhysParams {
            diffusion: 0.0,
            ..PhysParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhysParams {
            k_on: -1.0,
            ..PhysParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
