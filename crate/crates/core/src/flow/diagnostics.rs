use crate::torus::{gradient_norm, ScalarField};

use super::FlowState;

/// Per-time estimate quantities along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// `∫e^{u} dA − 1`.
    pub area_error: f64,
    /// `M(t) = ∫u dA`.
    pub mass: f64,
    /// `I₂(t) = ∫e^{2u} dA`.
    pub i2: f64,
    /// `max(ψ₊^{(j)} − u)`.
    pub b_plus: f64,
    /// `max(u + ψ₋^{(j)})`.
    pub b_minus: f64,
    /// Largest second time difference of `φ`, filled in by the trajectory.
    pub d2: Option<f64>,
    /// `max |∇u|·e^{ψ₋^{(j)}}`.
    pub gamma: f64,
}

impl DiagnosticsRow {
    pub const HEADER: &'static str = "t,phi_min,phi_max,area_error,mass,i2,b_plus,b_minus,d2,gamma";

    pub fn csv(&self) -> String {
        let d2 = self.d2.map(|v| format!("{v:.12e}")).unwrap_or_default();
        format!(
            "{:.12e},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}",
            self.t,
            self.phi_min,
            self.phi_max,
            self.area_error,
            self.mass,
            self.i2,
            self.b_plus,
            self.b_minus,
            d2,
            self.gamma
        )
    }
}

/// Diagnostics row of one state against the truncated data `ψ₊^{(j)}`, `ψ₋^{(j)}`.
pub fn diagnostics(state: &FlowState, plus: &ScalarField, minus: &ScalarField) -> DiagnosticsRow {
    let u = state.u.values();
    let b_plus = plus
        .values()
        .iter()
        .zip(u)
        .map(|(p, v)| p - v)
        .fold(f64::NEG_INFINITY, f64::max);
    let b_minus = minus
        .values()
        .iter()
        .zip(u)
        .map(|(m, v)| v + m)
        .fold(f64::NEG_INFINITY, f64::max);
    let grad = gradient_norm(&state.u);
    let gamma = grad
        .values()
        .iter()
        .zip(minus.values())
        .map(|(g, m)| g * m.exp())
        .fold(0.0, f64::max);
    DiagnosticsRow {
        t: state.t,
        phi_min: state.phi.min(),
        phi_max: state.phi.max(),
        area_error: state.area_error(),
        mass: state.u.mean(),
        i2: state.u.map(|v| (2.0 * v).exp()).mean(),
        b_plus,
        b_minus,
        d2: None,
        gamma,
    }
}

/// Largest node-wise second divided difference of `φ` across three states
/// at arbitrary (increasing) times.
pub fn second_difference(a: &FlowState, b: &FlowState, c: &FlowState) -> f64 {
    let (t0, t1, t2) = (a.t, b.t, c.t);
    let pa = a.phi.values();
    let pb = b.phi.values();
    let pc = c.phi.values();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..pa.len() {
        let s1 = (pb[k] - pa[k]) / (t1 - t0);
        let s2 = (pc[k] - pb[k]) / (t2 - t1);
        worst = worst.max(2.0 * (s2 - s1) / (t2 - t0));
    }
    worst
}
