use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Staggered polar grid on the unit disc.
///
/// Radial nodes sit at `r_j = (j + 1/2) h_r` for `j = 0..n_r`, with
/// `h_r = 1 / (n_r - 1/2)` so that the last ring lies on `r = 1`. There is
/// no node at the pole. Angular nodes sit at `theta_k = k h_theta`.
///
/// Fields over the grid are stored row-major by radius:
/// `u[j * n_theta + k]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    n_r: usize,
    n_theta: usize,
    h_r: f64,
    h_theta: f64,
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 3 {
            return Err(Error::InvalidGrid(format!(
                "n_r = {n_r}, need at least 3 radial nodes"
            )));
        }
        if n_theta < 4 {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {n_theta}, need at least 4 angular nodes"
            )));
        }
        Ok(Self {
            n_r,
            n_theta,
            h_r: 1.0 / (n_r as f64 - 0.5),
            h_theta: TAU / n_theta as f64,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn h_r(&self) -> f64 {
        self.h_r
    }

    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    /// Total node count, boundary ring included.
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self, j: usize) -> f64 {
        if j + 1 == self.n_r {
            1.0
        } else {
            (j as f64 + 0.5) * self.h_r
        }
    }

    pub fn angle(&self, k: usize) -> f64 {
        k as f64 * self.h_theta
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_theta + k
    }

    /// Cartesian coordinates of node `(j, k)`.
    pub fn node_xy(&self, j: usize, k: usize) -> (f64, f64) {
        let (r, t) = (self.radius(j), self.angle(k));
        (r * t.cos(), r * t.sin())
    }
}
