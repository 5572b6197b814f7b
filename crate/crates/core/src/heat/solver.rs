//! Backward-Euler integrator for `u_t = (1/r)(r u_r)_r + u_thetatheta / r^2 + f`.
//!
//! The five-point polar stencil couples angular neighbours through a
//! circulant second difference, so a real orthonormal Fourier basis in
//! theta diagonalises it. Each implicit step then splits into one
//! tridiagonal radial solve per angular mode. The result is the exact
//! solution of the assembled linear system, up to round-off.

use std::f64::consts::TAU;

use super::{HeatState, PolarGrid, SolverConfig};
use crate::geometry::IndicatorField;
use crate::{Error, Result};

/// Relative slack when deciding whether the last step needs shortening.
const STEP_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HeatSolver {
    grid: PolarGrid,
    /// Row-major `n_theta x n_theta` orthonormal basis; row `m` is mode `m`.
    basis: Vec<f64>,
    /// Eigenvalue of minus the periodic second difference for each mode row.
    mode_eig: Vec<f64>,
    /// Radial stencil weights on interior rings.
    lower: Vec<f64>,
    upper: Vec<f64>,
    inv_r2: Vec<f64>,
}

impl HeatSolver {
    pub fn new(grid: PolarGrid) -> Self {
        let n = grid.n_theta();
        let h = grid.h_theta();
        let mut basis = vec![0.0; n * n];
        let mut wavenumber = Vec::with_capacity(n);
        let mut row = 0;
        let mut push = |row: &mut usize, m: usize, f: &dyn Fn(usize) -> f64| {
            for k in 0..n {
                basis[*row * n + k] = f(k);
            }
            wavenumber.push(m);
            *row += 1;
        };
        let nf = n as f64;
        push(&mut row, 0, &|_| 1.0 / nf.sqrt());
        for m in 1..=(n - 1) / 2 {
            let w = TAU * m as f64 / nf;
            push(&mut row, m, &|k| (2.0 / nf).sqrt() * (w * k as f64).cos());
            push(&mut row, m, &|k| (2.0 / nf).sqrt() * (w * k as f64).sin());
        }
        if n.is_multiple_of(2) {
            push(
                &mut row,
                n / 2,
                &|k| if k % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt(),
            );
        }
        debug_assert_eq!(row, n);

        let mode_eig = wavenumber
            .iter()
            .map(|&m| {
                let s = (0.5 * m as f64 * h).sin();
                4.0 * s * s / (h * h)
            })
            .collect();

        let hr = grid.h_r();
        let interior = grid.n_r() - 1;
        let mut lower = Vec::with_capacity(interior);
        let mut upper = Vec::with_capacity(interior);
        let mut inv_r2 = Vec::with_capacity(interior);
        for j in 0..interior {
            let r = (j as f64 + 0.5) * hr;
            // faces at r - h/2 = j h and r + h/2 = (j + 1) h; the pole face has zero area
            lower.push(j as f64 * hr / (r * hr * hr));
            upper.push((j + 1) as f64 * hr / (r * hr * hr));
            inv_r2.push(1.0 / (r * r));
        }

        Self {
            grid,
            basis,
            mode_eig,
            lower,
            upper,
            inv_r2,
        }
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    fn interior(&self) -> usize {
        self.grid.n_r() - 1
    }

    /// Physical field -> spectral coefficients, `out[mode * interior + j]`.
    fn to_spectral(&self, field: &[f64], out: &mut [f64]) {
        let n = self.grid.n_theta();
        let ni = self.interior();
        for j in 0..ni {
            let ring = &field[j * n..(j + 1) * n];
            for m in 0..n {
                let b = &self.basis[m * n..(m + 1) * n];
                out[m * ni + j] = b.iter().zip(ring).map(|(a, u)| a * u).sum();
            }
        }
    }

    fn to_physical(&self, coeffs: &[f64], field: &mut [f64]) {
        let n = self.grid.n_theta();
        let ni = self.interior();
        field.fill(0.0);
        for m in 0..n {
            let b = &self.basis[m * n..(m + 1) * n];
            for j in 0..ni {
                let c = coeffs[m * ni + j];
                if c == 0.0 {
                    continue;
                }
                let ring = &mut field[j * n..(j + 1) * n];
                for (u, a) in ring.iter_mut().zip(b) {
                    *u += c * a;
                }
            }
        }
    }

    fn factorize(&self, dt: f64) -> StepFactors {
        let n = self.grid.n_theta();
        let ni = self.interior();
        let mut cprime = vec![0.0; n * ni];
        let mut inv_denom = vec![0.0; n * ni];
        for m in 0..n {
            let mu = self.mode_eig[m];
            let mut prev_c = 0.0;
            for j in 0..ni {
                let a = -dt * self.lower[j];
                let c = if j + 1 < ni { -dt * self.upper[j] } else { 0.0 };
                let diag = 1.0 + dt * (self.lower[j] + self.upper[j] + mu * self.inv_r2[j]);
                let denom = diag - a * prev_c;
                let inv = 1.0 / denom;
                inv_denom[m * ni + j] = inv;
                cprime[m * ni + j] = c * inv;
                prev_c = c * inv;
            }
        }
        StepFactors {
            dt,
            cprime,
            inv_denom,
        }
    }

    /// One implicit step in spectral space; `rhs` is overwritten by the solution.
    fn solve_step(&self, f: &StepFactors, rhs: &mut [f64]) {
        let n = self.grid.n_theta();
        let ni = self.interior();
        for m in 0..n {
            let base = m * ni;
            let x = &mut rhs[base..base + ni];
            let cp = &f.cprime[base..base + ni];
            let inv = &f.inv_denom[base..base + ni];
            let mut prev = 0.0;
            for j in 0..ni {
                let a = -f.dt * self.lower[j];
                x[j] = (x[j] - a * prev) * inv[j];
                prev = x[j];
            }
            for j in (0..ni.saturating_sub(1)).rev() {
                x[j] -= cp[j] * x[j + 1];
            }
        }
    }

    fn step_plan(t0: f64, t_end: f64, dt: f64) -> (usize, f64) {
        let span = t_end - t0;
        let full = ((span / dt) + STEP_SLACK).floor().max(0.0);
        let rem = span - full * dt;
        let rem = if rem > STEP_SLACK * dt { rem } else { 0.0 };
        (full as usize, rem)
    }

    fn check_inputs(&self, state: &HeatState, dt: f64, t_end: f64) -> Result<()> {
        if state.grid() != &self.grid {
            return Err(Error::InvalidGrid("state grid differs from solver grid".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} must be positive"
            )));
        }
        if !(t_end >= state.t()) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} precedes state time {}",
                state.t()
            )));
        }
        Ok(())
    }

    /// Advances `state` to `t_end` under the constant source `b * chi`.
    ///
    /// Steps have length `cfg.dt`; the last one is shortened to land on `t_end`.
    pub fn evolve(
        &self,
        state: &HeatState,
        chi: &IndicatorField,
        cfg: &SolverConfig,
        t_end: f64,
    ) -> Result<HeatState> {
        cfg.validate()?;
        self.check_inputs(state, cfg.dt, t_end)?;
        if chi.grid() != &self.grid {
            return Err(Error::InvalidGrid(
                "indicator grid differs from solver grid".into(),
            ));
        }
        let len = self.grid.n_theta() * self.interior();
        let mut x = vec![0.0; len];
        let mut src = vec![0.0; len];
        self.to_spectral(state.values(), &mut x);
        self.to_spectral(chi.values(), &mut src);

        let (full, rem) = Self::step_plan(state.t(), t_end, cfg.dt);
        let advance = |factors: &StepFactors, x: &mut [f64]| {
            let k = factors.dt * cfg.b;
            for (xi, si) in x.iter_mut().zip(&src) {
                *xi += k * si;
            }
            self.solve_step(factors, x);
        };
        if full > 0 {
            let f = self.factorize(cfg.dt);
            for _ in 0..full {
                advance(&f, &mut x);
            }
        }
        if rem > 0.0 {
            advance(&self.factorize(rem), &mut x);
        }
        self.finish(&x, t_end)
    }

    /// Advances `state` to `t_end` with a time-dependent source.
    ///
    /// `source(t, f)` fills `f` (a full grid field) with the source at the
    /// end of each step, as backward Euler requires.
    pub fn evolve_with<F>(&self, state: &HeatState, dt: f64, t_end: f64, mut source: F) -> Result<HeatState>
    where
        F: FnMut(f64, &mut [f64]),
    {
        self.check_inputs(state, dt, t_end)?;
        let len = self.grid.n_theta() * self.interior();
        let mut x = vec![0.0; len];
        let mut src = vec![0.0; len];
        let mut field = vec![0.0; self.grid.len()];
        self.to_spectral(state.values(), &mut x);

        let t0 = state.t();
        let (full, rem) = Self::step_plan(t0, t_end, dt);
        let mut step = |factors: &StepFactors, t_next: f64, x: &mut [f64]| {
            source(t_next, &mut field);
            self.to_spectral(&field, &mut src);
            for (xi, si) in x.iter_mut().zip(&src) {
                *xi += factors.dt * si;
            }
            self.solve_step(factors, x);
        };
        if full > 0 {
            let f = self.factorize(dt);
            for i in 1..=full {
                let t_next = if rem == 0.0 && i == full {
                    t_end
                } else {
                    t0 + i as f64 * dt
                };
                step(&f, t_next, &mut x);
            }
        }
        if rem > 0.0 {
            step(&self.factorize(rem), t_end, &mut x);
        }
        self.finish(&x, t_end)
    }

    fn finish(&self, coeffs: &[f64], t: f64) -> Result<HeatState> {
        // the boundary ring is never written, so it stays exactly zero
        let mut u = vec![0.0; self.grid.len()];
        self.to_physical(coeffs, &mut u);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t });
        }
        HeatState::new(self.grid, u, t)
    }

    /// Applies the discrete spatial operator to a field (boundary ring treated as zero).
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n_theta();
        let h2 = g.h_theta() * g.h_theta();
        let mut out = vec![0.0; g.len()];
        for j in 0..self.interior() {
            for k in 0..n {
                let c = u[g.index(j, k)];
                let inner = if j > 0 { u[g.index(j - 1, k)] } else { 0.0 };
                let outer = if j + 2 < g.n_r() {
                    u[g.index(j + 1, k)]
                } else {
                    0.0
                };
                let left = u[g.index(j, (k + n - 1) % n)];
                let right = u[g.index(j, (k + 1) % n)];
                out[g.index(j, k)] = self.lower[j] * (inner - c)
                    + self.upper[j] * (outer - c)
                    + self.inv_r2[j] * (left - 2.0 * c + right) / h2;
            }
        }
        out
    }
}

struct StepFactors {
    dt: f64,
    cprime: Vec<f64>,
    inv_denom: Vec<f64>,
}
