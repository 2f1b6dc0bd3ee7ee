use crate::error::{Error, Result};
use crate::potentials::{truncate, SingularPotential};
use crate::torus::ScalarField;

use super::diagnostics::{diagnostics, second_difference, DiagnosticsRow};
use super::{init_state, step, FlowState};

/// Time-step control of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Absolute cap on the step.
    pub dt_max: Option<f64>,
    /// Cap relative to the current time.
    pub rel_cap: f64,
    /// Step growth factor after an accepted step.
    pub growth: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt_max: None,
            rel_cap: 0.2,
            growth: 1.5,
        }
    }
}

/// States at the initial time and at each requested ladder time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub level: Option<f64>,
    /// Normalization constant of the (truncated) initial density.
    pub c: f64,
    pub plus_trunc: ScalarField,
    pub minus_trunc: ScalarField,
    /// `states[0]` is `t = 0`; the rest follow the ladder in increasing time.
    pub states: Vec<FlowState>,
    pub rows: Vec<DiagnosticsRow>,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// State at a ladder time (relative match 1e-9).
    pub fn state_at(&self, t: f64) -> Option<&FlowState> {
        self.states
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from(DiagnosticsRow::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }
}

/// Ladder `t_end·2^{−k}`, `k = depth, …, 0`, in increasing order.
pub fn ladder_times(t_end: f64, depth: u32) -> Vec<f64> {
    (0..=depth)
        .rev()
        .map(|k| t_end * 0.5f64.powi(k as i32))
        .collect()
}

/// Approximating flow from the level-`j` truncation of `(ψ₊, ψ₋)`, sampled on
/// the ladder `t_end·2^{−k}`, `k = 0..=depth`.
pub fn run_flow(
    plus: &SingularPotential,
    minus: &SingularPotential,
    level: f64,
    t_end: f64,
    depth: u32,
    opts: FlowOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "t_end must lie in (0, 1], got {t_end}"
        )));
    }
    let (s0, c) = init_state(plus, minus, level)?;
    let plus_trunc = truncate(plus, level);
    let minus_trunc = truncate(minus, level);
    run_flow_from(
        s0,
        plus_trunc,
        minus_trunc,
        c,
        &ladder_times(t_end, depth),
        opts,
    )
}

/// Flow from a given initial state through the increasing `times`.
pub fn run_flow_from(
    initial: FlowState,
    plus_trunc: ScalarField,
    minus_trunc: ScalarField,
    c: f64,
    times: &[f64],
    opts: FlowOptions,
) -> Result<Trajectory> {
    let h = initial.u.grid().h();
    let min_density = initial.u.min().exp();
    let mut dt = (h * h * std::f64::consts::PI * min_density).min(1e-4);
    let mut states = vec![initial.clone()];
    let mut cur = initial;
    let mut steps = 0;
    for &target in times {
        if target <= cur.t {
            return Err(Error::InvalidInput(format!(
                "ladder times must increase, got {target} after {}",
                cur.t
            )));
        }
        while cur.t < target {
            let mut d = dt;
            if cur.t > 0.0 {
                d = d.min(opts.rel_cap * cur.t);
            }
            if let Some(m) = opts.dt_max {
                d = d.min(m);
            }
            let remaining = target - cur.t;
            let landing = d >= remaining * (1.0 - 1e-12);
            if landing {
                d = remaining;
            } else if remaining < 1.5 * d {
                d = 0.5 * remaining;
            }
            let next = step(&cur, d).map_err(|e| Error::Trajectory {
                target,
                source: Box::new(e),
            })?;
            steps += 1;
            let taken = next.t - cur.t;
            cur = next;
            if landing && taken >= d * (1.0 - 1e-12) {
                cur.t = target;
            }
            dt = taken * opts.growth;
        }
        states.push(cur.clone());
    }
    let mut rows: Vec<DiagnosticsRow> = states
        .iter()
        .map(|s| {
            let mut r = diagnostics(s, &plus_trunc, &minus_trunc);
            r.t = s.t;
            r
        })
        .collect();
    for i in 1..states.len().saturating_sub(1) {
        rows[i].d2 = Some(second_difference(
            &states[i - 1],
            &states[i],
            &states[i + 1],
        ));
    }
    Ok(Trajectory {
        level: states[0].level,
        c,
        plus_trunc,
        minus_trunc,
        states,
        rows,
        steps,
    })
}
