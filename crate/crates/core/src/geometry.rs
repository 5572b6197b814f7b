//! Source parameterizations and indicator rasterization.
//!
//! Two families are supported. A circle of fixed radius 0.2 whose center is
//! given in polar form `(rho, omega)` through arctan bijections of the two
//! unconstrained coordinates, and a star-shaped region `r < q(theta)` whose
//! radial profile is a truncated Fourier series.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::heat::PolarGrid;
use crate::{Error, Result};

pub const CIRCLE_RADIUS: f64 = 0.2;
pub const STAR_RADIUS_MIN: f64 = 0.01;
pub const STAR_RADIUS_MAX: f64 = 0.99;

/// Which parameterization the unconstrained vector feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Circle,
    Star { harmonics: usize },
}

impl SourceKind {
    /// Length of the unconstrained vector.
    pub fn dim(&self) -> usize {
        match self {
            SourceKind::Circle => 2,
            SourceKind::Star { harmonics } => 2 * harmonics + 1,
        }
    }
}

/// Unconstrained sample vector, checked finite with the right length.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedParams(Vec<f64>);

impl UnconstrainedParams {
    pub fn new(kind: SourceKind, xi: Vec<f64>) -> Result<Self> {
        if xi.len() != kind.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters for {kind:?}, got {}",
                kind.dim(),
                xi.len()
            )));
        }
        check_finite(&xi)?;
        Ok(Self(xi))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_finite(xi: &[f64]) -> Result<()> {
    match xi.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidParameter(format!(
            "xi[{i}] = {} is not finite",
            xi[i]
        ))),
        None => Ok(()),
    }
}

/// `rho = arctan(xi)/pi + 1/2`, onto (0, 1).
pub fn rho_from_unconstrained(xi: f64) -> f64 {
    xi.atan() / PI + 0.5
}

/// `omega = 2 arctan(xi) + pi`, onto (0, 2 pi).
pub fn omega_from_unconstrained(xi: f64) -> f64 {
    2.0 * xi.atan() + PI
}

pub fn rho_to_unconstrained(rho: f64) -> f64 {
    (PI * (rho - 0.5)).tan()
}

pub fn omega_to_unconstrained(omega: f64) -> f64 {
    (0.5 * (omega - PI)).tan()
}

/// Circle with a fixed radius and an uncertain center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSource {
    pub rho: f64,
    pub omega: f64,
    pub eta: [f64; 2],
    pub radius: f64,
}

impl CircleSource {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.eta[0], y - self.eta[1]);
        dx * dx + dy * dy < self.radius * self.radius
    }

    /// The unconstrained pair that maps back onto this circle.
    pub fn to_unconstrained(&self) -> [f64; 2] {
        [rho_to_unconstrained(self.rho), omega_to_unconstrained(self.omega)]
    }
}

pub fn circle_from_unconstrained(xi: &[f64]) -> Result<CircleSource> {
    if xi.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "circle source takes 2 parameters, got {}",
            xi.len()
        )));
    }
    check_finite(xi)?;
    let rho = rho_from_unconstrained(xi[0]);
    let omega = omega_from_unconstrained(xi[1]);
    Ok(CircleSource {
        rho,
        omega,
        eta: [rho * omega.cos(), rho * omega.sin()],
        radius: CIRCLE_RADIUS,
    })
}

/// Radial profile `q(theta) = xi_1/2 + sum_i xi_{i+1} cos(i theta) + xi_{i+M+1} sin(i theta)`
/// (1-based indices), with `M = (len - 1) / 2`.
pub fn star_radius(theta: f64, xi: &[f64]) -> f64 {
    debug_assert!(xi.len() % 2 == 1, "star parameters have odd length");
    let m = (xi.len() - 1) / 2;
    let theta = theta.rem_euclid(TAU);
    let mut q = 0.5 * xi[0];
    for i in 1..=m {
        let (s, c) = (i as f64 * theta).sin_cos();
        q += xi[i] * c + xi[i + m] * s;
    }
    q
}

/// Star-shaped region `{ r < q(theta) }`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarSource {
    xi: Vec<f64>,
}

impl StarSource {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() || xi.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "star source takes 2M+1 parameters, got {}",
                xi.len()
            )));
        }
        check_finite(&xi)?;
        Ok(Self { xi })
    }

    pub fn harmonics(&self) -> usize {
        (self.xi.len() - 1) / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.xi
    }

    pub fn radius(&self, theta: f64) -> f64 {
        star_radius(theta, &self.xi)
    }

    /// Checks the profile stays within the admissible band on every angular node.
    pub fn check_admissible(&self, grid: &PolarGrid) -> Result<()> {
        for k in 0..grid.n_theta() {
            let theta = grid.angle(k);
            let q = self.radius(theta);
            if !(STAR_RADIUS_MIN..=STAR_RADIUS_MAX).contains(&q) {
                return Err(Error::ShapeRejected {
                    theta,
                    radius: q,
                    min: STAR_RADIUS_MIN,
                    max: STAR_RADIUS_MAX,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceModel {
    Circle(CircleSource),
    Star(StarSource),
}

impl SourceModel {
    pub fn from_params(kind: SourceKind, xi: &[f64]) -> Result<Self> {
        match kind {
            SourceKind::Circle => circle_from_unconstrained(xi).map(SourceModel::Circle),
            SourceKind::Star { harmonics } => {
                if xi.len() != 2 * harmonics + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "star source with M = {harmonics} takes {} parameters, got {}",
                        2 * harmonics + 1,
                        xi.len()
                    )));
                }
                StarSource::new(xi.to_vec()).map(SourceModel::Star)
            }
        }
    }
}

/// 0/1 indicator of the source region over every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    grid: PolarGrid,
    values: Vec<f64>,
}

impl IndicatorField {
    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Indicator of the whole disc.
    pub fn full(grid: PolarGrid) -> Self {
        Self {
            values: vec![1.0; grid.len()],
            grid,
        }
    }

    pub fn empty(grid: PolarGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }

    /// Same field rotated by `shift` angular nodes (node `k` moves to `k + shift`).
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.grid.n_theta();
        let mut values = vec![0.0; self.values.len()];
        for j in 0..self.grid.n_r() {
            for k in 0..n {
                values[self.grid.index(j, (k + shift) % n)] = self.values[self.grid.index(j, k)];
            }
        }
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Marks each node whose nodal point lies inside the source.
///
/// Star sources outside the admissible radius band yield
/// [`Error::ShapeRejected`].
pub fn rasterize(source: &SourceModel, grid: &PolarGrid) -> Result<IndicatorField> {
    let mut values = vec![0.0; grid.len()];
    match source {
        SourceModel::Circle(c) => {
            for j in 0..grid.n_r() {
                for k in 0..grid.n_theta() {
                    let (x, y) = grid.node_xy(j, k);
                    if c.contains(x, y) {
                        values[grid.index(j, k)] = 1.0;
                    }
                }
            }
        }
        SourceModel::Star(s) => {
            s.check_admissible(grid)?;
            for k in 0..grid.n_theta() {
                let q = s.radius(grid.angle(k));
                for j in 0..grid.n_r() {
                    if grid.radius(j) < q {
                        values[grid.index(j, k)] = 1.0;
                    }
                }
            }
        }
    }
    Ok(IndicatorField { grid: *grid, values })
}
