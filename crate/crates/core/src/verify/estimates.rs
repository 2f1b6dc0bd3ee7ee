use crate::flow::Trajectory;

use super::{CheckResult, EstimateReport, ToleranceBasis};

const AREA_TOL: f64 = 1e-8;
const MAX_PRINCIPLE_SLACK: f64 = 1e-7;
const MONOTONE_REL: f64 = 1e-6;
const COHERENCE_TOL: f64 = 1e-9;

/// Constants fitted on one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFit {
    /// `max_t B₊(t)`.
    pub b_plus: f64,
    /// `max_t B₋(t)`.
    pub b_minus: f64,
    /// `max_t D²(t)`, the concavity constant.
    pub concavity: f64,
    /// Smallest `C` with `Γ(t) ≤ C·e^{Ct}` on the ladder.
    pub gradient_growth: f64,
}

/// Smallest `C ≥ 0` with `g ≤ C·e^{C t}` for every sample `(t, g)`.
pub fn fit_growth_constant(samples: &[(f64, f64)]) -> f64 {
    let mut c: f64 = 0.0;
    for &(t, g) in samples {
        if g <= 0.0 || c * (c * t).exp() >= g {
            continue;
        }
        let (mut lo, mut hi) = (c, g.max(1.0));
        while hi * (hi * t).exp() < g {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (mid * t).exp() >= g {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        c = hi;
    }
    c
}

/// Magnitudes below this count as zero in [`stability_ratio`].
pub const STABILITY_FLOOR: f64 = 1e-6;

/// `max/min` of the magnitudes, each raised to [`STABILITY_FLOOR`], so an
/// all-trivial family has ratio 1.
pub fn stability_ratio(values: &[f64]) -> f64 {
    let v: Vec<f64> = values
        .iter()
        .map(|x| x.abs().max(STABILITY_FLOOR))
        .collect();
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

pub fn stable_within(values: &[f64], factor: f64) -> bool {
    stability_ratio(values) <= factor
}

fn worst_increase(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(w[1].abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Checks every trajectory-level estimate and fits the constants.
pub fn check_trajectory(scenario: &str, traj: &Trajectory) -> (EstimateReport, TrajectoryFit) {
    let rows = &traj.rows;
    let mut checks = Vec::new();
    let area = traj
        .states
        .iter()
        .map(|s| s.area_error().abs())
        .fold(0.0, f64::max);
    checks.push(CheckResult::at_most(
        "area",
        scenario,
        area,
        AREA_TOL,
        ToleranceBasis::Exact,
    ));

    let coherence = traj
        .states
        .iter()
        .map(|s| s.coherence_error())
        .fold(0.0, f64::max);
    checks.push(CheckResult::at_most(
        "coherence",
        scenario,
        coherence,
        COHERENCE_TOL,
        ToleranceBasis::Exact,
    ));

    let (lo, hi) = (rows[0].phi_min, rows[0].phi_max);
    let excursion = rows
        .iter()
        .map(|r| (lo - r.phi_min).max(r.phi_max - hi))
        .fold(0.0, f64::max);
    checks.push(CheckResult::at_most(
        "max-principle",
        scenario,
        excursion,
        MAX_PRINCIPLE_SLACK,
        ToleranceBasis::Exact,
    ));

    let i2: Vec<f64> = rows.iter().map(|r| r.i2).collect();
    checks.push(CheckResult::at_most(
        "i2-nonincreasing",
        scenario,
        worst_increase(&i2),
        MONOTONE_REL,
        ToleranceBasis::Exact,
    ));
    let neg_mass: Vec<f64> = rows.iter().map(|r| -r.mass).collect();
    checks.push(CheckResult::at_most(
        "mass-nondecreasing",
        scenario,
        worst_increase(&neg_mass),
        MONOTONE_REL,
        ToleranceBasis::Exact,
    ));

    let fit = TrajectoryFit {
        b_plus: rows
            .iter()
            .map(|r| r.b_plus)
            .fold(f64::NEG_INFINITY, f64::max),
        b_minus: rows
            .iter()
            .map(|r| r.b_minus)
            .fold(f64::NEG_INFINITY, f64::max),
        concavity: rows
            .iter()
            .filter_map(|r| r.d2)
            .fold(f64::NEG_INFINITY, f64::max),
        gradient_growth: fit_growth_constant(
            &rows.iter().map(|r| (r.t, r.gamma)).collect::<Vec<_>>(),
        ),
    };
    (
        EstimateReport {
            scenario: scenario.into(),
            rows: rows.clone(),
            checks,
        },
        fit,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_constant_is_tight() {
        let samples = [(0.0, 2.0), (0.5, 3.0), (1.0, 2.5)];
        let c = fit_growth_constant(&samples);
        assert!(samples.iter().all(|&(t, g)| c * (c * t).exp() >= g - 1e-12));
        let touching = samples
            .iter()
            .any(|&(t, g)| (c * (c * t).exp() - g).abs() < 1e-9);
        assert!(touching);
        assert_eq!(fit_growth_constant(&[(0.3, 0.0)]), 0.0);
    }

    #[test]
    fn stability_ratio() {
        assert!(stable_within(&[1.0, 1.9], 2.0));
        assert!(!stable_within(&[1.0, 2.1], 2.0));
        assert!(stable_within(&[0.0, 0.0], 2.0));
        assert!(stable_within(&[1e-9, 1e-14], 2.0));
    }
}
