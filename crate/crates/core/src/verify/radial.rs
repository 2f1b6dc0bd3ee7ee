use crate::error::{Error, Result};
use crate::metric::{eikonal_distance, ConformalMetric};
use crate::potentials::{PoleSpec, SingularPotential};
use crate::torus::Point;

/// Outer radius of the annulus used for radial slopes.
pub const RADIAL_OUTER: f64 = 0.05;

/// `1 + ν/2` at a plus-pole, `1 − ν/2` at a minus-pole.
pub fn expected_radial_exponent(pole: &PoleSpec) -> f64 {
    1.0 + 0.5 * pole.density_exponent()
}

/// Least-squares slope of `log d_T(a, x)` against `log |x − a|` over the
/// nodes with `4h ≤ |x − a| ≤ 0.05`.
pub fn radial_exponent(
    plus: &SingularPotential,
    minus: &SingularPotential,
    pole: &Point,
) -> Result<f64> {
    let metric = ConformalMetric::singular(plus, minus)?;
    let grid = metric.grid().clone();
    let d = eikonal_distance(&metric, pole)?;
    let lo = 4.0 * grid.h();
    if lo >= RADIAL_OUTER / 4.0 {
        return Err(Error::Resolution(format!(
            "n = {} leaves less than a factor 4 between 4h and {RADIAL_OUTER}",
            grid.n()
        )));
    }
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..grid.len() {
        let r = pole.distance(&grid.point(k));
        if (lo..=RADIAL_OUTER).contains(&r) {
            let (x, y) = (r.ln(), d.at(k).ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            m += 1.0;
        }
    }
    Ok((m * sxy - sx * sy) / (m * sxx - sx * sx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Sign;
    use crate::torus::TorusGrid;

    #[test]
    fn flat_slope_is_one() {
        let g = TorusGrid::new(512).unwrap();
        let zero_p = SingularPotential::zero(&g, Sign::Plus);
        let zero_m = SingularPotential::zero(&g, Sign::Minus);
        let s = radial_exponent(&zero_p, &zero_m, &Point::new(0.5, 0.5)).unwrap();
        assert!((s - 1.0).abs() < 0.01, "{s}");
        assert_eq!(
            expected_radial_exponent(&PoleSpec::new(0.5, 0.5, 1.0, Sign::Plus)),
            1.5
        );
        assert_eq!(
            expected_radial_exponent(&PoleSpec::new(0.5, 0.5, 1.0, Sign::Minus)),
            0.5
        );
    }
}
