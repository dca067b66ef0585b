//! Annulus geometry in polar coordinates.
//!
//! Cells are indexed from zero: ring `j` in `0..n_r` (inner to outer) and
//! sector `k` in `0..n_theta`. Ring `j` spans the faces `r_face(j)` and
//! `r_face(j + 1)`; sector `k` is centered on `theta_center(k) = (k + 1)·dθ`
//! so that the angular nodes are `dθ, 2dθ, ..., 2π`. Every assembled operator
//! flattens `(j, k)` ring-major as `k + j·n_theta`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("radii must be positive and finite (r_min = {r_min}, r_max = {r_max})")]
    NonPositiveRadius { r_min: f64, r_max: f64 },
    #[error("inner radius {r_min} must be smaller than outer radius {r_max}")]
    InvertedRadii { r_min: f64, r_max: f64 },
    #[error("grid needs n_r >= 2 and n_theta >= 3 (got {n_r} x {n_theta})")]
    TooFewCells { n_r: usize, n_theta: usize },
    #[error("cell index ({j}, {k}) out of range")]
    IndexOutOfRange { j: usize, k: usize },
}

/// Uniform polar grid on the annulus `r_min < r < r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    r_min: f64,
    r_max: f64,
    n_r: usize,
    n_theta: usize,
    dr: f64,
    dtheta: f64,
}

impl PolarGrid {
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> Result<Self, GridError> {
        if !(r_min > 0.0 && r_max > 0.0 && r_min.is_finite() && r_max.is_finite()) {
            return Err(GridError::NonPositiveRadius { r_min, r_max });
        }
        if r_min >= r_max {
            return Err(GridError::InvertedRadii { r_min, r_max });
        }
        if n_r < 2 || n_theta < 3 {
            return Err(GridError::TooFewCells { n_r, n_theta });
        }
        Ok(Self {
            r_min,
            r_max,
            n_r,
            n_theta,
            dr: (r_max - r_min) / n_r as f64,
            dtheta: 2.0 * PI / n_theta as f64,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Number of bulk cells.
    pub fn n_cells(&self) -> usize {
        self.n_r * self.n_theta
    }

    /// Center radius of ring `j`. Also valid for the ghost rings `j = n_r`
    /// (one cell beyond the outer circle) since the formula is affine.
    #[inline]
    pub fn r_center(&self, j: usize) -> f64 {
        self.r_min + (j as f64 + 0.5) * self.dr
    }

    /// Radius of face `j`, for `j` in `0..=n_r`; face `j` is the inner face of ring `j`.
    #[inline]
    pub fn r_face(&self, j: usize) -> f64 {
        if j == self.n_r {
            self.r_max
        } else {
            self.r_min + j as f64 * self.dr
        }
    }

    #[inline]
    pub fn theta_center(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.dtheta
    }

    /// Angle of the face between sector `k` and sector `k + 1`.
    #[inline]
    pub fn theta_face(&self, k: usize) -> f64 {
        (k as f64 + 1.5) * self.dtheta
    }

    /// Ring-major flat index of cell `(j, k)`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.n_r && k < self.n_theta);
        k + j * self.n_theta
    }

    #[inline]
    pub fn next_k(&self, k: usize) -> usize {
        theta_neighbor(k, 1, self.n_theta)
    }

    #[inline]
    pub fn prev_k(&self, k: usize) -> usize {
        theta_neighbor(k, -1, self.n_theta)
    }

    /// Sum of the `dr·dθ` cell weights; equals `(r_max - r_min)·2π`.
    pub fn total_weight(&self) -> f64 {
        self.dr * self.dtheta * self.n_cells() as f64
    }
}

/// Flat index `k + j·n_theta` for zero-based `(j, k)`.
pub fn flatten_index(j: usize, k: usize, n_theta: usize) -> Result<usize, GridError> {
    if k >= n_theta {
        return Err(GridError::IndexOutOfRange { j, k });
    }
    Ok(k + j * n_theta)
}

/// Periodic angular neighbour: sector `k` shifted by `offset`, wrapped mod `n_theta`.
#[inline]
pub fn theta_neighbor(k: usize, offset: isize, n_theta: usize) -> usize {
    (k as isize + offset).rem_euclid(n_theta as isize) as usize
}
