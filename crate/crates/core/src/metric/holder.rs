use std::fmt;

use crate::error::{Error, Result};

use super::DistanceField;

/// Side of the log–log point cloud the fitted line bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// `dA ≤ C·dB^α`.
    Upper,
    /// `dA ≥ C·dB^α`.
    Lower,
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Envelope::Upper => "upper",
            Envelope::Lower => "lower",
        })
    }
}

/// Power-law envelope `dA ≈ C·dB^α` of a set of distance pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderFit {
    pub alpha: f64,
    pub constant: f64,
    /// RMS gap in `log dA` between the envelope and the points.
    pub residual: f64,
    pub direction: Envelope,
    /// Least-squares slope of `log dA` against `log dB`.
    pub ls_slope: f64,
    pub pairs: usize,
}

const MIN_PAIRS: usize = 20;
const MIN_DECADES: f64 = 2.0;

/// Envelope fit of `(dA, dB)` samples.
///
/// The envelope is the supporting line of the convex hull of the points
/// `(log dB, log dA)` at the mean abscissa: among all lines on the required
/// side of every point, the one closest to the cloud at its centre.
pub fn holder_fit_values(samples: &[(f64, f64)], direction: Envelope) -> Result<HolderFit> {
    if samples.len() < MIN_PAIRS {
        return Err(Error::DegenerateFit(format!(
            "{} pairs, at least {MIN_PAIRS} needed",
            samples.len()
        )));
    }
    if let Some(bad) = samples
        .iter()
        .find(|(a, b)| !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()))
    {
        return Err(Error::DegenerateFit(format!(
            "distances must be positive and finite, got {bad:?}"
        )));
    }
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|(a, b)| (b.ln(), a.ln())).collect();
    let (xmin, xmax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let decades = (xmax - xmin) / std::f64::consts::LN_10;
    if decades < MIN_DECADES {
        return Err(Error::DegenerateFit(format!(
            "dB spans {decades:.2} decades, at least {MIN_DECADES} needed"
        )));
    }
    let count = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let ls_slope = sxy / sxx;

    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let sign = match direction {
        Envelope::Upper => 1.0,
        Envelope::Lower => -1.0,
    };
    // monotone chain: keep right turns for the upper hull (left turns for the lower)
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if sign * cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        if let Some(last) = hull.last() {
            if last.0 == p.0 {
                // same abscissa: keep the extreme point
                if sign * (p.1 - last.1) > 0.0 {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        hull.push(p);
    }
    let edge = hull
        .windows(2)
        .find(|w| w[1].0 >= xbar)
        .ok_or_else(|| Error::DegenerateFit("envelope has no edge over the mean".into()))?;
    let alpha = (edge[1].1 - edge[0].1) / (edge[1].0 - edge[0].0);
    let log_c = edge[0].1 - alpha * edge[0].0;
    if !(alpha > 0.0 && alpha < 3.0) {
        return Err(Error::DegenerateFit(format!(
            "fitted exponent {alpha} outside (0, 3)"
        )));
    }
    let residual = (pts
        .iter()
        .map(|p| (alpha * p.0 + log_c - p.1).powi(2))
        .sum::<f64>()
        / count)
        .sqrt();
    Ok(HolderFit {
        alpha,
        constant: log_c.exp(),
        residual,
        direction,
        ls_slope,
        pairs: samples.len(),
    })
}

/// Envelope fit of `dA` against `dB` over `(field, node)` pairs, where field
/// `i` of both sets shares its source.
pub fn holder_fit(
    da: &[DistanceField],
    db: &[DistanceField],
    pairs: &[(usize, usize)],
    direction: Envelope,
) -> Result<HolderFit> {
    let samples: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(i, k)| (da[i].at(k), db[i].at(k)))
        .collect();
    holder_fit_values(&samples, direction)
}

/// `max |d1 − d2|` over `(field, node)` pairs.
pub fn sup_discrepancy(
    d1: &[DistanceField],
    d2: &[DistanceField],
    pairs: &[(usize, usize)],
) -> f64 {
    pairs
        .iter()
        .map(|&(i, k)| (d1[i].at(k) - d2[i].at(k)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{eikonal_distance, ConformalMetric};
    use crate::torus::{Point, TorusGrid};

    #[test]
    fn exact_power_law_is_recovered() {
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let b = 1e-3 * 10f64.powf(k as f64 / 13.0);
                (b.powf(1.5), b)
            })
            .collect();
        for dir in [Envelope::Upper, Envelope::Lower] {
            let fit = holder_fit_values(&samples, dir).unwrap();
            assert!((fit.alpha - 1.5).abs() < 1e-6 && (fit.constant - 1.0).abs() < 1e-6);
            assert!((fit.ls_slope - 1.5).abs() < 1e-9 && fit.residual < 1e-9);
        }
    }

    #[test]
    fn envelope_bounds_every_point() {
        let samples: Vec<(f64, f64)> = (0..60)
            .map(|k| {
                let b = 1e-3 * 10f64.powf(k as f64 / 20.0);
                let wobble = 1.0 + 0.3 * ((k * 7) as f64).sin();
                (2.0 * b.powf(0.8) * wobble, b)
            })
            .collect();
        let up = holder_fit_values(&samples, Envelope::Upper).unwrap();
        let low = holder_fit_values(&samples, Envelope::Lower).unwrap();
        for &(a, b) in &samples {
            assert!(a <= up.constant * b.powf(up.alpha) * (1.0 + 1e-12));
            assert!(a >= low.constant * b.powf(low.alpha) * (1.0 - 1e-12));
        }
        assert!((up.ls_slope - 0.8).abs() < 0.05);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let narrow: Vec<(f64, f64)> = (0..30).map(|k| (1.0, 1.0 + k as f64 * 0.1)).collect();
        assert!(holder_fit_values(&narrow, Envelope::Upper).is_err());
        assert!(holder_fit_values(&narrow[..5], Envelope::Upper).is_err());
    }

    #[test]
    fn discrepancy_of_halved_flat_distance() {
        let g = TorusGrid::new(64).unwrap();
        let src = Point::new(0.5, 0.5);
        let d = eikonal_distance(&ConformalMetric::flat(&g), &src).unwrap();
        let mut half = d.clone();
        half.values = d.values.map(|v| 0.5 * v);
        let pairs: Vec<(usize, usize)> = (0..g.len()).step_by(37).map(|k| (0, k)).collect();
        assert_eq!(
            sup_discrepancy(std::slice::from_ref(&d), std::slice::from_ref(&d), &pairs),
            0.0
        );
        let max_d = pairs.iter().map(|&(_, k)| d.at(k)).fold(0.0, f64::max);
        let disc = sup_discrepancy(&[d], &[half], &pairs);
        assert!((disc - 0.5 * max_d).abs() < 1e-15);
    }
}
