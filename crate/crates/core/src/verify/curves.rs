use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{segment_length, ConformalMetric};
use crate::potentials::{Sign, SingularPotential};
use crate::torus::Point;

/// Growth exponent of `∫ e^{−u}` over segments passing at one distance from the pole.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityFit {
    pub offset: f64,
    /// `(L, ∫_0^L e^{−u∘γ} ds)`.
    pub integrals: Vec<(f64, f64)>,
    /// Least-squares slope of `log ∫` against `log L`.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveIntegrability {
    pub nu_eff: f64,
    pub fits: Vec<IntegrabilityFit>,
    /// `1 − ν_eff − 0.05`.
    pub threshold: f64,
}

impl CurveIntegrability {
    pub fn min_exponent(&self) -> f64 {
        self.fits
            .iter()
            .map(|f| f.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.min_exponent() >= self.threshold
    }
}

const DIRECTION: f64 = 0.3;
const HALVINGS: u32 = 4;

/// `∫ e^{−ψ/s}` along segments of flat lengths `L₀, L₀/2, …, L₀/16` centred
/// at distance `0`, `h` and `4h` from the first pole of `psi`, with the
/// exponent of `L` fitted per distance.
pub fn check_curve_integrability(
    psi: &SingularPotential,
    scale: f64,
    l0: f64,
) -> Result<CurveIntegrability> {
    let nu_eff = psi.max_lelong() / scale;
    if !(scale > 0.0) || nu_eff >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "effective Lelong number {nu_eff} is not below 1"
        )));
    }
    let grid = psi.grid();
    let h = grid.h();
    let factor = 2.0 / scale;
    // e^{−ψ/s} = e^{w/2} with w = −2ψ/s, the log-factor of a minus-type potential
    let scaled: Vec<(Point, f64)> = psi
        .poles()
        .iter()
        .map(|p| (p.location, p.lelong * factor))
        .collect();
    if psi.sign() == Sign::Plus && !psi.poles().is_empty() {
        return Err(Error::Hypothesis(
            "curve integrability concerns potentials with minus-type poles".into(),
        ));
    }
    let smooth = psi.smooth().map(|v| v * factor);
    let plus = SingularPotential::zero(grid, Sign::Plus);
    let minus = SingularPotential::new(grid, Sign::Minus, &scaled, Some(smooth))?;
    let metric = ConformalMetric::singular_with_constant(&plus, &minus, 0.0)?;
    let a = psi
        .poles()
        .first()
        .map_or(Point::new(0.5, 0.5), |p| p.location);
    let e = (DIRECTION.cos(), DIRECTION.sin());
    let normal = (-e.1, e.0);
    let mut fits = Vec::new();
    for offset in [0.0, h, 4.0 * h] {
        let foot = a.offset(offset * normal.0, offset * normal.1);
        let mut integrals = Vec::new();
        for m in 0..=HALVINGS {
            let len = l0 * 0.5f64.powi(m as i32);
            let half = 0.5 * len;
            let v = segment_length(&metric, &foot, (half * e.0, half * e.1))?
                + segment_length(&metric, &foot, (-half * e.0, -half * e.1))?;
            integrals.push((len, v));
        }
        let exponent = log_log_slope(&integrals);
        fits.push(IntegrabilityFit {
            offset,
            integrals,
            exponent,
        });
    }
    Ok(CurveIntegrability {
        nu_eff,
        fits,
        threshold: 1.0 - nu_eff - 0.05,
    })
}

fn log_log_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let xb = xs.iter().sum::<f64>() / n;
    let yb = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xb) * (y - yb)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xb).powi(2)).sum();
    sxy / sxx
}

/// Curve sampled at equal flat arc-length steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcCurve {
    points: Vec<Point>,
    step: f64,
}

impl ArcCurve {
    /// Rejects samples whose consecutive distances differ from `step`.
    pub fn new(points: Vec<Point>, step: f64) -> Result<Self> {
        if points.len() < 2 || !(step > 0.0) {
            return Err(Error::InvalidInput(
                "curve needs two samples and a positive step".into(),
            ));
        }
        for (i, w) in points.windows(2).enumerate() {
            let d = w[0].distance(&w[1]);
            if (d - step).abs() > 1e-6 * step {
                return Err(Error::InvalidInput(format!(
                    "curve is not parametrized by arc length: step {i} has length {d}, expected {step}"
                )));
            }
        }
        Ok(ArcCurve { points, step })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn length(&self) -> f64 {
        self.step * (self.points.len() - 1) as f64
    }
}

/// Arc-length curve of the given length whose heading is a random
/// trigonometric polynomial of degree three.
pub fn random_smooth_curve(rng: &mut impl Rng, length: f64, step: f64) -> ArcCurve {
    let start = Point::new(rng.gen(), rng.gen());
    let theta0 = rng.gen_range(0.0..2.0 * PI);
    let modes: Vec<(f64, f64)> = (1..=3)
        .map(|k| {
            (
                rng.gen_range(-0.5..0.5) / k as f64,
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let heading = |s: f64| {
        theta0
            + modes
                .iter()
                .enumerate()
                .map(|(k, (a, ph))| a * (2.0 * PI * (k + 1) as f64 * s / length + ph).sin())
                .sum::<f64>()
    };
    let count = (length / step).round() as usize;
    let mut points = Vec::with_capacity(count + 1);
    let mut p = start;
    points.push(p);
    for i in 0..count {
        let th = heading((i as f64 + 0.5) * step);
        p = p.offset(step * th.cos(), step * th.sin());
        points.push(p);
    }
    ArcCurve { points, step }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityVerdict {
    /// Arc-length measure of the curve inside the disk.
    pub measure: f64,
    /// `min(L, 8ρ)`.
    pub bound: f64,
    pub passed: bool,
}

/// Arc-length measure of the part of `curve` inside the disk of radius `rho`
/// about `centre`, against `min(L, 8ρ)` with 1% sampling slack.
pub fn check_density_lemma(curve: &ArcCurve, centre: &Point, rho: f64) -> DensityVerdict {
    let pts = &curve.points;
    let last = pts.len() - 1;
    let measure: f64 = pts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance(centre) < rho)
        .map(|(i, _)| if i == 0 || i == last { 0.5 } else { 1.0 })
        .sum::<f64>()
        * curve.step;
    let bound = curve.length().min(8.0 * rho);
    DensityVerdict {
        measure,
        bound,
        passed: measure <= 1.01 * bound,
    }
}

/// Outcome of the randomized density-lemma audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityAudit {
    pub curves: usize,
    pub disks: usize,
    pub violations: usize,
    /// Largest `measure / bound`.
    pub worst_ratio: f64,
}

/// `curves` random smooth curves of lengths in `[0.05, 0.5]`, each against
/// `disks` disks of radii log-uniform in `[0.005, 0.25]`; half the disks are
/// centred near the curve, half anywhere.
pub fn density_audit(seed: u64, curves: usize, disks: usize, step: f64) -> DensityAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..curves {
        let length = rng.gen_range(0.05..0.5);
        let curve = random_smooth_curve(&mut rng, length, step);
        for d in 0..disks {
            let rho = rng.gen_range(0.005f64.ln()..0.25f64.ln()).exp();
            let centre = if d % 2 == 0 {
                let p = curve.points[rng.gen_range(0..curve.points.len())];
                p.offset(rng.gen_range(-rho..rho), rng.gen_range(-rho..rho))
            } else {
                Point::new(rng.gen(), rng.gen())
            };
            let v = check_density_lemma(&curve, &centre, rho);
            violations += (!v.passed) as usize;
            worst_ratio = worst_ratio.max(v.measure / v.bound);
        }
    }
    DensityAudit {
        curves,
        disks,
        violations,
        worst_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn flat_potential_has_unit_exponent() {
        let g = TorusGrid::new(128).unwrap();
        let psi = SingularPotential::zero(&g, Sign::Minus);
        let r = check_curve_integrability(&psi, 2.0, 0.2).unwrap();
        for f in &r.fits {
            assert!((f.exponent - 1.0).abs() < 1e-10);
            for &(l, v) in &f.integrals {
                assert!((v - l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn segment_integrals_match_brute_force() {
        let g = TorusGrid::new(256).unwrap();
        let a = Point::new(0.5, 0.5);
        let psi = SingularPotential::new(&g, Sign::Minus, &[(a, 1.2)], None).unwrap();
        let s = 2.0;
        let r = check_curve_integrability(&psi, s, 0.2).unwrap();
        assert!((r.nu_eff - 0.6).abs() < 1e-15);
        let e = (DIRECTION.cos(), DIRECTION.sin());
        let density = |z: Point| (-psi.eval(&z) / s).exp();
        // through the pole: τ = σ⁵ removes the τ^{−0.6} singularity
        let half: f64 = 0.1;
        let m = 200_000;
        let top = half.powf(0.2);
        let mut through = 0.0;
        for i in 1..=m {
            let w = if i == m { 0.5 } else { 1.0 };
            let sig = top * i as f64 / m as f64;
            let tau = sig.powi(5);
            let jac = 5.0 * sig.powi(4);
            for sgn in [1.0, -1.0] {
                let z = a.offset(sgn * tau * e.0, sgn * tau * e.1);
                let log_density = -(1.2 * tau.ln() + psi.regular(0, &z)) / s;
                through += w * jac * log_density.exp();
            }
        }
        through *= top / m as f64;
        let got = r.fits[0].integrals[0].1;
        assert!((got - through).abs() < 1e-4 * through, "{got} {through}");
        // passing at distance 4h: plain trapezoid
        let off = 4.0 * g.h();
        let foot = a.offset(-e.1 * off, e.0 * off);
        let m = 1_000_000;
        let mut near = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            let tau = -half + 2.0 * half * i as f64 / m as f64;
            near += w * density(foot.offset(tau * e.0, tau * e.1));
        }
        near *= 2.0 * half / m as f64;
        let got = r.fits[2].integrals[0].1;
        assert!((got - near).abs() < 1e-4 * near, "{got} {near}");
        assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn hypothesis_guard() {
        let g = TorusGrid::new(64).unwrap();
        let psi =
            SingularPotential::new(&g, Sign::Minus, &[(Point::new(0.5, 0.5), 1.2)], None).unwrap();
        assert!(matches!(
            check_curve_integrability(&psi, 1.0, 0.2),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn straight_segment_and_circle() {
        let c = Point::new(0.5, 0.5);
        let step = 1e-4;
        let seg: Vec<Point> = (0..=3000)
            .map(|i| Point::new(0.35 + i as f64 * step, 0.5))
            .collect();
        let v = check_density_lemma(&ArcCurve::new(seg, step).unwrap(), &c, 0.05);
        assert!((v.measure - 0.1).abs() < 2.0 * step && v.passed);
        let rho = 0.05;
        let m = 4000;
        let ring = 0.999 * rho;
        let dtheta = 2.0 * PI / m as f64;
        let chord = 2.0 * ring * (0.5 * dtheta).sin();
        let circle: Vec<Point> = (0..=m)
            .map(|i| {
                let th = i as f64 * dtheta;
                c.offset(ring * th.cos(), ring * th.sin())
            })
            .collect();
        let v = check_density_lemma(&ArcCurve::new(circle, chord).unwrap(), &c, rho);
        assert!((v.measure - 2.0 * PI * ring).abs() < 1e-3 && v.passed);
    }

    #[test]
    fn non_arc_length_input_is_rejected() {
        let pts = vec![
            Point::new(0.1, 0.1),
            Point::new(0.2, 0.1),
            Point::new(0.25, 0.1),
        ];
        assert!(ArcCurve::new(pts, 0.1).is_err());
    }

    #[test]
    fn looping_curve_exceeds_the_bound() {
        // three turns around a circle of radius ρ/2 have length 3πρ > 8ρ
        let c = Point::new(0.5, 0.5);
        let rho = 0.05;
        let ring = 0.5 * rho;
        let m = 6000;
        let dtheta = 6.0 * PI / m as f64;
        let chord = 2.0 * ring * (0.5 * dtheta).sin();
        let pts: Vec<Point> = (0..=m)
            .map(|i| {
                let th = i as f64 * dtheta;
                c.offset(ring * th.cos(), ring * th.sin())
            })
            .collect();
        let v = check_density_lemma(&ArcCurve::new(pts, chord).unwrap(), &c, rho);
        assert!(!v.passed && v.measure > 9.0 * rho);
    }
}
