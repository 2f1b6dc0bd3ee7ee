use crate::error::{Error, Result};
use crate::interp::interpolate;
use crate::quadrature::{adaptive, integrate_power_weight};
use crate::torus::Point;

use super::{ConformalMetric, LogFactor, Polyline};

const REL_TOL: f64 = 1e-10;
const JACOBI_POINTS: usize = 24;
/// Below this distance to a pole the integrand uses the exact radius.
const EXACT_RADIUS: f64 = 1e-3;
/// Poles farther than this from a segment are not treated specially.
const NEAR_SEGMENT: f64 = 0.1;

/// `ℓ(γ) = ∫ e^{u/2} |dγ|`.
pub fn curve_length(curve: &Polyline, metric: &ConformalMetric) -> Result<f64> {
    curve
        .segments()
        .map(|(p, d)| segment_length(metric, &p, d))
        .sum()
}

struct PoleHit {
    pole: usize,
    /// Arc parameter of the foot of the perpendicular.
    s: f64,
    /// Distance from the segment line.
    d: f64,
}

/// Length of the straight segment from `start` along the displacement `d`.
pub fn segment_length(metric: &ConformalMetric, start: &Point, d: (f64, f64)) -> Result<f64> {
    let ell = d.0.hypot(d.1);
    if ell == 0.0 {
        return Ok(0.0);
    }
    let e = (d.0 / ell, d.1 / ell);
    let at = |s: f64| start.offset(s * e.0, s * e.1);
    if let LogFactor::Field(u) = metric.factor() {
        return Ok(adaptive(0.0, ell, REL_TOL, |s| {
            (0.5 * interpolate(u, &at(s))).exp()
        }));
    }

    let mut hits = Vec::new();
    for (k, pole) in metric.pair_poles().iter().enumerate() {
        let (wx, wy) = start.displacement_to(&pole.spec.location);
        for ox in -1..=1 {
            for oy in -1..=1 {
                let (px, py) = (wx + ox as f64, wy + oy as f64);
                let s = px * e.0 + py * e.1;
                let dist = (px - s * e.0).hypot(py - s * e.1);
                if dist < NEAR_SEGMENT && s > -NEAR_SEGMENT && s < ell + NEAR_SEGMENT {
                    hits.push(PoleHit {
                        pole: k,
                        s,
                        d: dist,
                    });
                }
            }
        }
    }
    let snap = 1e-12 * ell.max(1e-3);
    for hit in &hits {
        if hit.d <= snap && hit.s > snap && hit.s < ell - snap {
            let a = metric.pair_poles()[hit.pole].spec.location;
            return Err(Error::ThroughPole { x: a.x, y: a.y });
        }
    }

    let integrand = |s: f64| -> f64 {
        let z = at(s);
        let mut best: Option<(usize, f64)> = None;
        for hit in &hits {
            let r = (s - hit.s).hypot(hit.d);
            if r < EXACT_RADIUS && best.is_none_or(|(_, b)| r < b) {
                best = Some((hit.pole, r));
            }
        }
        let u = match best {
            Some((k, r)) => metric.log_factor_near(k, r, &z),
            None => metric.log_factor(&z),
        };
        (0.5 * u).exp()
    };

    // endpoint poles get a Gauss–Jacobi piece with the exact r^{β/2} weight
    let sep = pole_separation(metric);
    let mut lo = 0.0;
    let mut hi = ell;
    let mut total = 0.0;
    for hit in &hits {
        if hit.d > snap {
            continue;
        }
        let beta = metric.pair_poles()[hit.pole].spec.density_exponent();
        let reach = (0.5 * sep).min(0.125).min(0.5 * ell);
        if hit.s.abs() <= snap {
            total += integrate_power_weight(reach, 0.5 * beta, JACOBI_POINTS, |r| {
                (0.5 * metric.regular_factor(hit.pole, &at(r))).exp()
            });
            lo = reach;
        } else if (hit.s - ell).abs() <= snap {
            total += integrate_power_weight(reach, 0.5 * beta, JACOBI_POINTS, |r| {
                (0.5 * metric.regular_factor(hit.pole, &at(ell - r))).exp()
            });
            hi = ell - reach;
        }
    }
    let mut breaks = vec![lo, hi];
    for hit in &hits {
        if hit.s > lo && hit.s < hi {
            breaks.push(hit.s);
        }
    }
    breaks.sort_by(f64::total_cmp);
    for w in breaks.windows(2) {
        total += adaptive(w[0], w[1], REL_TOL, integrand);
    }
    Ok(total)
}

fn pole_separation(metric: &ConformalMetric) -> f64 {
    let poles = metric.pair_poles();
    let mut sep = f64::INFINITY;
    for (i, p) in poles.iter().enumerate() {
        for q in &poles[i + 1..] {
            sep = sep.min(p.spec.location.distance(&q.spec.location));
        }
    }
    sep
}
