//! Scalar Monge–Ampère flow `∂ₜφ = log(1 + Δ̃φ)` on the periodic grid.
//!
//! The flow operator is the five-point `Δ̃`, whose discrete maximum principle
//! carries over the comparison and monotonicity properties of the
//! continuous flow. Backward Euler is solved in the log-density `w = u⁺`:
//! `e^{w} − δt·Δ̃w = 1 + Δ̃φ`, then `φ⁺ = φ + δt·w`.

mod diagnostics;
pub(crate) mod multigrid;
mod trajectory;

pub use diagnostics::{diagnostics, second_difference, DiagnosticsRow};
pub use trajectory::{ladder_times, run_flow, run_flow_from, FlowOptions, Trajectory};

use crate::error::{Error, Result};
use crate::potentials::{cell_averaged_density, SingularPotential};
use crate::torus::{laplacian_with, solve_poisson_with, ScalarField, Stencil};

/// Spatial operator used by the flow.
pub const FLOW_STENCIL: Stencil = Stencil::FivePoint;

const NEWTON_MAX: usize = 30;
const NEWTON_TOL: f64 = 1e-11;
const MAX_HALVINGS: u32 = 10;

/// Snapshot of the flow: time, potential `φ_t` and log-density `u_t = φ̇_t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: ScalarField,
    pub u: ScalarField,
    /// Truncation level of the initial datum (`None` for untruncated data).
    pub level: Option<f64>,
}

impl FlowState {
    /// State with potential `phi` at time `t`; fails if `1 + Δ̃φ ≤ 0` somewhere.
    pub fn from_potential(t: f64, phi: ScalarField, level: Option<f64>) -> Result<Self> {
        let lap = laplacian_with(&phi, FLOW_STENCIL);
        let mut u = Vec::with_capacity(lap.values().len());
        for (k, v) in lap.values().iter().enumerate() {
            let d = 1.0 + v;
            if d <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "1 + Δ̃φ = {d} is not positive at node {k}"
                )));
            }
            u.push(d.ln());
        }
        let u = ScalarField::from_values(phi.grid(), u)?;
        Ok(FlowState { t, phi, u, level })
    }

    /// `∫ e^{u} dA − 1`.
    pub fn area_error(&self) -> f64 {
        self.u.map(f64::exp).mean() - 1.0
    }

    /// `max |(1 + Δ̃φ)·e^{−u} − 1|`.
    pub fn coherence_error(&self) -> f64 {
        let lap = laplacian_with(&self.phi, FLOW_STENCIL);
        lap.values()
            .iter()
            .zip(self.u.values())
            .map(|(l, u)| ((1.0 + l) * (-u).exp() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Initial state from the level-`j` truncations of `(ψ₊, ψ₋)`, together with
/// the normalization constant `c_j` of the truncated density.
pub fn init_state(
    plus: &SingularPotential,
    minus: &SingularPotential,
    level: f64,
) -> Result<(FlowState, f64)> {
    let f = cell_averaged_density(plus, minus, Some(level));
    let c = -f.mean().ln();
    let u = f.map(|v| v.ln() + c);
    let phi = solve_poisson_with(&u.map(|v| v.exp() - 1.0).minus_mean(), FLOW_STENCIL)?;
    Ok((
        FlowState {
            t: 0.0,
            phi,
            u,
            level: Some(level),
        },
        c,
    ))
}

/// Initial state with a prescribed log-density `u₀` (normalized to unit area).
pub fn init_from_log_density(u0: &ScalarField, level: Option<f64>) -> Result<FlowState> {
    let c = -u0.map(f64::exp).mean().ln();
    let u = u0.map(|v| v + c);
    let phi = solve_poisson_with(&u.map(|v| v.exp() - 1.0).minus_mean(), FLOW_STENCIL)?;
    Ok(FlowState {
        t: 0.0,
        phi,
        u,
        level,
    })
}

/// One backward-Euler step of size `dt`, halving on Newton failure.
/// The returned state's `t` records the step actually taken.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    assert!(dt > 0.0);
    let mut h = dt;
    for _ in 0..=MAX_HALVINGS {
        if let Some(s) = try_step(state, h) {
            return Ok(s);
        }
        h *= 0.5;
    }
    Err(Error::StiffStep { t: state.t, dt: h })
}

fn try_step(state: &FlowState, dt: f64) -> Option<FlowState> {
    let grid = state.phi.grid();
    let n = grid.n();
    let len = grid.len();
    let rhs = laplacian_with(&state.phi, FLOW_STENCIL).map(|v| 1.0 + v);
    let rhs = rhs.values();
    let mut w = state.u.values().to_vec();
    let residual = |w: &[f64]| -> Vec<f64> {
        let wf = ScalarField::from_values_unchecked(grid, w.to_vec());
        let lw = laplacian_with(&wf, FLOW_STENCIL);
        (0..len)
            .map(|k| w[k].exp() - dt * lw.values()[k] - rhs[k])
            .collect()
    };
    // convex energy whose gradient is the residual
    let energy = |w: &[f64]| -> f64 {
        let wf = ScalarField::from_values_unchecked(grid, w.to_vec());
        let lw = laplacian_with(&wf, FLOW_STENCIL);
        (0..len)
            .map(|k| w[k].exp() - rhs[k] * w[k] - 0.5 * dt * w[k] * lw.values()[k])
            .sum()
    };
    let mut f = residual(&w);
    let mut e = energy(&w);
    let mut delta = vec![0.0; len];
    let mut converged = false;
    for _ in 0..NEWTON_MAX {
        let diag: Vec<f64> = w.iter().map(|v| v.exp()).collect();
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        multigrid::solve(n, &diag, dt, &neg, &mut delta, 1e-13)?;
        let dmax = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !dmax.is_finite() {
            return None;
        }
        let mut lambda = if dmax > 2.0 { 2.0 / dmax } else { 1.0 };
        let slope: f64 = f.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, b)| a + lambda * b).collect();
            let et = energy(&trial);
            if et.is_finite() && et <= e + 1e-4 * lambda * slope + 1e-14 * e.abs() {
                w = trial;
                e = et;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
        f = residual(&w);
        let rel = f
            .iter()
            .zip(&w)
            .map(|(r, v)| (r * (-v).exp()).abs())
            .fold(0.0, f64::max);
        if (lambda == 1.0 && dmax <= NEWTON_TOL) || rel <= 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let phi: Vec<f64> = state
        .phi
        .values()
        .iter()
        .zip(&w)
        .map(|(p, v)| p + dt * v)
        .collect();
    Some(FlowState {
        t: state.t + dt,
        phi: ScalarField::from_values_unchecked(grid, phi),
        u: ScalarField::from_values_unchecked(grid, w),
        level: state.level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn flat_state_is_fixed() {
        let g = TorusGrid::new(64).unwrap();
        let s = FlowState::from_potential(0.0, g.zeros(), None).unwrap();
        let s2 = step(&s, 0.3).unwrap();
        assert!(s2.u.sup_norm() == 0.0 && s2.phi.sup_norm() == 0.0);
        assert!((s2.t - 0.3).abs() < 1e-15);
    }

    #[test]
    fn step_keeps_area_and_coherence() {
        let g = TorusGrid::new(64).unwrap();
        let phi = g.from_fn(|p| 0.02 * (2.0 * PI * p.x).cos() * (2.0 * PI * p.y).sin());
        let mut s = FlowState::from_potential(0.0, phi, None).unwrap();
        for _ in 0..10 {
            s = step(&s, 0.01).unwrap();
        }
        assert!(s.area_error().abs() < 1e-12);
        assert!(s.coherence_error() < 1e-9);
    }
}
