//! Forward heat model on the unit disc and boundary flux extraction.

mod grid;
mod solver;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use grid::PolarGrid;
pub use solver::HeatSolver;

use crate::geometry::IndicatorField;
use crate::{Error, Result};

/// Temperature field and the simulation time it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatState {
    grid: PolarGrid,
    u: Vec<f64>,
    t: f64,
}

impl HeatState {
    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            u: vec![0.0; grid.len()],
            grid,
            t: 0.0,
        }
    }

    pub fn new(grid: PolarGrid, u: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                u.len(),
                grid.len()
            )));
        }
        if !t.is_finite() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("heat state must be finite".into()));
        }
        Ok(Self { grid, u, t })
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Pointwise mean of several states on the same grid; takes the time of the first.
    pub fn mean<'a>(states: impl IntoIterator<Item = &'a HeatState>) -> Option<HeatState> {
        let mut it = states.into_iter();
        let first = it.next()?;
        let mut acc = first.u.clone();
        let mut n = 1usize;
        for s in it {
            debug_assert_eq!(s.grid, first.grid);
            for (a, v) in acc.iter_mut().zip(&s.u) {
                *a += v;
            }
            n += 1;
        }
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Some(HeatState {
            grid: first.grid,
            u: acc,
            t: first.t,
        })
    }

    /// Writes `r,theta,u` rows for every node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,theta,u")?;
        for j in 0..self.grid.n_r() {
            for k in 0..self.grid.n_theta() {
                writeln!(
                    out,
                    "{},{},{}",
                    self.grid.radius(j),
                    self.grid.angle(k),
                    self.u[self.grid.index(j, k)]
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Source strength multiplying the indicator.
    pub b: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidParameter(format!("b = {} must be finite", self.b)));
        }
        Ok(())
    }
}

/// Outward normal derivative at `r = 1` on every angular node.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxRing {
    values: Vec<f64>,
    t: f64,
}

impl FluxRing {
    pub fn new(values: Vec<f64>, t: f64) -> Self {
        Self { values, t }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One-sided second-order difference `(3u(1) - 4u(1-h) + u(1-2h)) / 2h` with `u(1) = 0`.
pub fn boundary_flux(state: &HeatState) -> Result<FluxRing> {
    let g = state.grid();
    if g.n_r() < 3 {
        return Err(Error::InvalidGrid("flux stencil needs three radial nodes".into()));
    }
    let (j1, j2) = (g.n_r() - 2, g.n_r() - 3);
    let inv = 1.0 / (2.0 * g.h_r());
    let values = (0..g.n_theta())
        .map(|k| (-4.0 * state.u[g.index(j1, k)] + state.u[g.index(j2, k)]) * inv)
        .collect();
    Ok(FluxRing::new(values, state.t()))
}

pub fn flux_at(ring: &FluxRing, sensor: usize) -> Result<f64> {
    ring.values.get(sensor).copied().ok_or(Error::SensorOutOfRange {
        index: sensor,
        n_theta: ring.len(),
    })
}

/// Convenience wrapper building a throwaway solver.
pub fn evolve(state: &HeatState, chi: &IndicatorField, cfg: &SolverConfig, t_end: f64) -> Result<HeatState> {
    HeatSolver::new(*state.grid()).evolve(state, chi, cfg, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_state(g: PolarGrid, t: f64) -> HeatState {
        let mut u = vec![0.0; g.len()];
        for j in 0..g.n_r() {
            let r = g.radius(j);
            for k in 0..g.n_theta() {
                u[g.index(j, k)] = (1.0 - r * r) * t;
            }
        }
        HeatState::new(g, u, t).unwrap()
    }

    #[test]
    fn zero_field_has_zero_flux() {
        let g = PolarGrid::new(33, 36).unwrap();
        let ring = boundary_flux(&HeatState::zeros(g)).unwrap();
        assert_eq!(ring.len(), 36);
        assert!(ring.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_profile_flux_is_minus_two() {
        for nr in [5, 17, 33] {
            let g = PolarGrid::new(nr, 36).unwrap();
            let ring = boundary_flux(&quadratic_state(g, 1.0)).unwrap();
            for v in ring.values() {
                // the stencil is exact on quadratics
                assert!((v + 2.0).abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn flux_at_reads_ring_entries() {
        let ring = FluxRing::new(vec![3.5; 36], 0.5);
        assert_eq!(flux_at(&ring, 0).unwrap(), 3.5);
        assert_eq!(flux_at(&ring, 35).unwrap(), 3.5);
        assert!(matches!(
            flux_at(&ring, 36),
            Err(Error::SensorOutOfRange {
                index: 36,
                n_theta: 36
            })
        ));
        let ramp = FluxRing::new((0..36).map(|i| i as f64).collect(), 0.5);
        assert_eq!(flux_at(&ramp, 22).unwrap(), 22.0);
        assert_eq!(flux_at(&ramp, 30).unwrap(), 30.0);
    }

    #[test]
    fn mean_of_states() {
        let g = PolarGrid::new(3, 4).unwrap();
        let a = HeatState::new(g, vec![1.0; 12], 0.5).unwrap();
        let b = HeatState::new(g, vec![3.0; 12], 0.5).unwrap();
        let m = HeatState::mean([&a, &b]).unwrap();
        assert!(m.values().iter().all(|&v| v == 2.0));
        assert!(HeatState::mean(std::iter::empty()).is_none());
    }

    #[test]
    fn field_csv_has_header_and_rows() {
        let g = PolarGrid::new(3, 4).unwrap();
        let mut buf = Vec::new();
        HeatState::zeros(g).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("r,theta,u\n"));
    }
}
