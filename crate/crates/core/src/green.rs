//! Mean-zero periodic Green function of `Δ̃ = Δ/2π`.
//!
//! `Δ̃G_a = δ_a − 1`. The logarithm is carried by the screened kernel
//! `−½E₁(r²/s²)`, which equals `log r` plus a smooth term near the pole and
//! decays like a Gaussian; the remaining smooth periodic part comes from one
//! spectral solve with a Gaussian source, so it is resolved to round-off on
//! every admissible grid.

use std::f64::consts::PI;

use crate::interp::interpolate;
use crate::torus::{solve_poisson, Point, ScalarField, TorusGrid};

/// Screening width of the logarithmic part.
pub const SCREEN: f64 = 0.08;
/// Beyond this distance the screened kernel is below 1e-18 and treated as zero.
pub const SCREEN_RADIUS: f64 = 0.5;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ein(x) = E₁(x) + γ + ln x`, entire in `x`.
pub fn ein(x: f64) -> f64 {
    if x <= 2.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..80 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        exp_integral(x) + EULER_GAMMA + x.ln()
    }
}

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn exp_integral(x: f64) -> f64 {
    if x <= 1.0 {
        return ein(x) - EULER_GAMMA - x.ln();
    }
    // modified Lentz continued fraction
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..300 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// Screened logarithm `−½E₁(r²/s²)`: `log r + O(1)` at 0, Gaussian decay.
pub fn screened_log(r: f64) -> f64 {
    if r >= SCREEN_RADIUS {
        return 0.0;
    }
    let x = (r / SCREEN).powi(2);
    -0.5 * exp_integral(x)
}

/// `screened_log(r) − log r`, smooth in `r²`.
pub fn screened_log_regular(r: f64) -> f64 {
    let x = (r / SCREEN).powi(2);
    if r >= SCREEN_RADIUS {
        return -r.ln();
    }
    0.5 * EULER_GAMMA - SCREEN.ln() - 0.5 * ein(x)
}

/// Minimum resolution of the grid carrying the smooth part for off-grid evaluation.
const FINE_N: usize = 512;

/// Green function with pole at `center`, resolved on a given grid.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    center: Point,
    smooth: ScalarField,
    fine: ScalarField,
}

impl GreenFunction {
    pub fn new(grid: &TorusGrid, center: Point) -> Self {
        if grid.n() >= FINE_N {
            let fine = Self::solve_smooth(grid, center);
            return GreenFunction {
                center,
                smooth: fine.clone(),
                fine,
            };
        }
        let fg = TorusGrid::new_unchecked(FINE_N);
        let fine = Self::solve_smooth(&fg, center);
        let stride = FINE_N / grid.n();
        let smooth = grid.from_fn_index(|i, j| fine.at(i * stride, j * stride));
        GreenFunction {
            center,
            smooth,
            fine,
        }
    }

    fn solve_smooth(grid: &TorusGrid, center: Point) -> ScalarField {
        let norm = 1.0 / (PI * SCREEN * SCREEN);
        let src = grid.from_fn(|z| {
            let (dx, dy) = center.displacement_to(&z);
            let mut g = 0.0;
            // periodized Gaussian; neighbours beyond one image are below round-off
            for ix in -1..=1 {
                for iy in -1..=1 {
                    let x = dx + ix as f64;
                    let y = dy + iy as f64;
                    g += (-(x * x + y * y) / (SCREEN * SCREEN)).exp();
                }
            }
            norm * g - 1.0
        });
        let src = src.minus_mean();
        let mut smooth = solve_poisson(&src).expect("mean removed");
        let shift = 0.5 * PI * SCREEN * SCREEN;
        for v in smooth.values_mut() {
            *v += shift;
        }
        smooth
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// The smooth correction field on the working grid.
    pub fn smooth(&self) -> &ScalarField {
        &self.smooth
    }

    /// `G_a(z)`; `-∞` at the pole.
    pub fn eval(&self, z: &Point) -> f64 {
        let r = self.center.distance(z);
        if r == 0.0 {
            return f64::NEG_INFINITY;
        }
        screened_log(r) + interpolate(&self.fine, z)
    }

    /// `G_a(z) − log|z − a|`, smooth near `a`.
    pub fn regular(&self, z: &Point) -> f64 {
        let r = self.center.distance(z);
        screened_log_regular(r) + interpolate(&self.fine, z)
    }

    /// Limit of `G_a(z) − log|z − a|` as `z → a`.
    pub fn regular_at_pole(&self) -> f64 {
        self.regular(&self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed form via the Jacobi theta product, independent of the spectral solve.
    fn theta_green(a: Point, z: Point) -> f64 {
        let (dx, dy) = a.displacement_to(&z);
        let s = (PI * dx).sin().powi(2) * (PI * dy).cosh().powi(2)
            + (PI * dx).cos().powi(2) * (PI * dy).sinh().powi(2);
        let mut g = 0.5 * (4.0 * s).ln() - PI * dy * dy - PI / 6.0;
        for m in 1..12 {
            let q = (-2.0 * PI * m as f64).exp();
            for sgn in [1.0, -1.0] {
                let e = (sgn * -2.0 * PI * dy).exp() * q;
                let ang = sgn * 2.0 * PI * dx;
                g += 0.5 * (1.0 - 2.0 * e * ang.cos() + e * e).ln();
            }
        }
        g
    }

    #[test]
    fn oracle_matches_frozen_values() {
        let o = Point::new(0.0, 0.0);
        assert!((theta_green(o, Point::new(0.5, 0.5)) - 0.346_573_590_279_972_75).abs() < 1e-14);
        assert!((theta_green(o, Point::new(0.25, 0.1)) + 0.115_621_406_562_887_07).abs() < 1e-13);
    }

    #[test]
    fn exponential_integral_values() {
        for (x, e) in [
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_3),
            (2.5, 0.024_914_917_870_269_73),
            (5.0, 0.001_148_295_591_275_326),
        ] {
            assert!(
                (exp_integral(x) - e).abs() < 1e-15 * (1.0 + 1.0 / e) * e,
                "{x}"
            );
        }
        assert!((screened_log(0.01) - 0.01f64.ln() - screened_log_regular(0.01)).abs() < 1e-14);
    }

    #[test]
    fn matches_closed_form() {
        let grid = TorusGrid::new(256).unwrap();
        let a = Point::new(0.3, 0.55);
        let g = GreenFunction::new(&grid, a);
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let z = Point::new(0.013 + 0.0371 * k as f64, 0.27 + 0.0523 * k as f64);
            worst = worst.max((g.eval(&z) - theta_green(a, z)).abs());
        }
        assert!(worst < 1e-9, "{worst}");
        assert!(
            (g.regular_at_pole() - 1.310_532_925_911_509_3).abs() < 1e-9,
            "{}",
            g.regular_at_pole()
        );
    }

    #[test]
    fn symmetric_and_pole() {
        let grid = TorusGrid::new(128).unwrap();
        let a = Point::new(0.5, 0.5);
        let g = GreenFunction::new(&grid, a);
        assert_eq!(g.eval(&a), f64::NEG_INFINITY);
        for v in [(0.1, 0.02), (0.3, -0.17), (0.004, 0.0)] {
            let p = a.offset(v.0, v.1);
            let q = a.offset(-v.0, -v.1);
            assert!((g.eval(&p) - g.eval(&q)).abs() < 1e-10);
        }
    }
}
