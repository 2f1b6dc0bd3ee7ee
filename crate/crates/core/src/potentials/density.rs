use crate::quadrature::gl;
use crate::torus::{Point, ScalarField};

use super::normalization::{pair_poles, PairPole};
use super::{soft_max, Sign, SingularPotential, TRUNCATION_STIFFNESS};

/// `ψ₊(z) − ψ₋(z)`.
pub fn log_density(plus: &SingularPotential, minus: &SingularPotential, z: &Point) -> f64 {
    plus.eval(z) - minus.eval(z)
}

/// `ψ₊^{(j)}(z) − ψ₋^{(j)}(z)` for the soft-max truncation at level `j`.
pub fn truncated_log_density(
    plus: &SingularPotential,
    minus: &SingularPotential,
    level: f64,
    z: &Point,
) -> f64 {
    plus.truncated_eval(z, level) - minus.truncated_eval(z, level)
}

/// Grid density `e^{ψ₊−ψ₋}` (truncated at `level` when given, unnormalized).
///
/// Nodes within two cells of a pole carry the exact average over their cell,
/// so the grid mass matches the integral even when the density is singular
/// or sharply peaked on the scale of a cell.
pub fn cell_averaged_density(
    plus: &SingularPotential,
    minus: &SingularPotential,
    level: Option<f64>,
) -> ScalarField {
    let grid = plus.grid().clone();
    let log_f = |z: &Point| match level {
        Some(j) => truncated_log_density(plus, minus, j, z),
        None => log_density(plus, minus, z),
    };
    let mut vals: Vec<f64> = (0..grid.len())
        .map(|k| log_f(&grid.point(k)).exp())
        .collect();
    let h = grid.h();
    for pole in pair_poles(plus, minus) {
        let a = pole.spec.location;
        let centre = grid.nearest_node(&a);
        for dj in -2..=2 {
            for di in -2..=2 {
                let k = grid.shifted(centre, di, dj);
                let c = grid.point(k);
                let near = |r: f64, z: &Point| log_density_near(plus, minus, level, &pole, r, z);
                vals[k] = cell_average(&log_f, &near, a, &c, h);
            }
        }
    }
    ScalarField::from_values_unchecked(&grid, vals)
}

/// Log-density at `z`, with the distance `r` from `z` to `pole` given
/// exactly, so points closer to the pole than the coordinate resolution
/// still see the correct singular term.
pub(crate) fn log_density_near(
    plus: &SingularPotential,
    minus: &SingularPotential,
    level: Option<f64>,
    pole: &PairPole,
    r: f64,
    z: &Point,
) -> f64 {
    let own = pole.spec.lelong * r.ln();
    let (p, m) = match pole.spec.sign {
        Sign::Plus => (own + plus.regular(pole.index, z), minus.eval(z)),
        Sign::Minus => (plus.eval(z), own + minus.regular(pole.index, z)),
    };
    match level {
        Some(j) => soft_max(p, -j, TRUNCATION_STIFFNESS) - soft_max(m, -j, TRUNCATION_STIFFNESS),
        None => p - m,
    }
}

/// Average of `e^{log_f}` over the grid cell centred at `centre`, where `near`
/// evaluates the same log-function given the exact distance to the pole `a`.
pub(crate) fn cell_average(
    log_f: &impl Fn(&Point) -> f64,
    near: &impl Fn(f64, &Point) -> f64,
    a: Point,
    centre: &Point,
    h: f64,
) -> f64 {
    let (dx, dy) = centre.displacement_to(&a);
    let half = 0.5 * h;
    let tol = 1e-12 * h;
    if dx.abs() <= half + tol && dy.abs() <= half + tol {
        return polar_cell_integral(near, &a, (-dx, -dy), half) / (h * h);
    }
    let dist = ((dx.abs() - half).max(0.0)).hypot((dy.abs() - half).max(0.0));
    let sub = if dist < 0.125 * h { 16 } else { 4 };
    let rule = gl(8);
    let step = h / sub as f64;
    let x0 = centre.x - half;
    let y0 = centre.y - half;
    let mut sum = 0.0;
    for sj in 0..sub {
        for si in 0..sub {
            let xl = x0 + step * si as f64;
            let yl = y0 + step * sj as f64;
            for (yn, wy) in rule.nodes.iter().zip(&rule.weights) {
                let y = yl + step * yn;
                for (xn, wx) in rule.nodes.iter().zip(&rule.weights) {
                    let x = xl + step * xn;
                    sum += wx * wy * log_f(&Point::new(x, y)).exp();
                }
            }
        }
    }
    sum / (sub * sub) as f64
}

/// `∫` over the square of half-width `half` whose centre sits at offset `c`
/// from the pole `a`, in log-polar coordinates about the pole.
fn polar_cell_integral(
    near: &impl Fn(f64, &Point) -> f64,
    a: &Point,
    c: (f64, f64),
    half: f64,
) -> f64 {
    let corners = [
        (c.0 + half, c.1 - half),
        (c.0 + half, c.1 + half),
        (c.0 - half, c.1 + half),
        (c.0 - half, c.1 - half),
    ];
    let ang_rule = gl(24);
    let rad_rule = gl(6);
    let mut total = 0.0;
    for e in 0..4 {
        let p = corners[e];
        let q = corners[(e + 1) % 4];
        // distance from the pole to the edge line and its foot direction
        let (ex, ey) = (q.0 - p.0, q.1 - p.1);
        let len = ex.hypot(ey);
        let (nx, ny) = (ey / len, -ex / len);
        let d = p.0 * nx + p.1 * ny;
        if d <= 1e-15 * half {
            continue;
        }
        let t1 = p.1.atan2(p.0);
        let mut t2 = q.1.atan2(q.0);
        while t2 < t1 {
            t2 += 2.0 * std::f64::consts::PI;
        }
        let tn = ny.atan2(nx);
        total += ang_rule.integrate(t1, t2, |th| {
            let r_max = d / (th - tn).cos();
            let (cs, sn) = (th.cos(), th.sin());
            let f_at = |s: f64| {
                let r = s.exp();
                near(r, &a.offset(r * cs, r * sn)).exp()
            };
            let s_hi = r_max.ln();
            let s_lo = s_hi - 40.0;
            let panels = 80;
            let w = (s_hi - s_lo) / panels as f64;
            let mut line = 0.0;
            for k in 0..panels {
                let lo = s_lo + w * k as f64;
                line += rad_rule.integrate(lo, lo + w, |s| f_at(s) * (2.0 * s).exp());
            }
            // power-law tail below s_lo
            let f0 = f_at(s_lo);
            let f1 = f_at(s_lo + 0.01);
            let beta = if f0 > 0.0 && f1 > 0.0 {
                (f1.ln() - f0.ln()) / 0.01
            } else {
                0.0
            };
            line + f0 * (2.0 * s_lo).exp() / (2.0 + beta).max(1e-3)
        });
    }
    total
}

#[cfg(test)]
mod tests {
    use super::super::{normalization_constant, Sign};
    use super::*;
    use crate::torus::TorusGrid;

    fn mass_error(n: usize, a: Point) -> f64 {
        let g = TorusGrid::new(n).unwrap();
        let plus = SingularPotential::zero(&g, Sign::Plus);
        let minus = SingularPotential::new(&g, Sign::Minus, &[(a, 1.0)], None).unwrap();
        let f = cell_averaged_density(&plus, &minus, None);
        let c = normalization_constant(&plus, &minus).unwrap();
        (f.mean().ln() + c).abs()
    }

    #[test]
    fn cell_averaged_mass_converges_to_integral() {
        for a in [Point::new(0.5, 0.5), Point::new(0.503, 0.4981)] {
            let coarse = mass_error(128, a);
            let fine = mass_error(256, a);
            assert!(coarse < 5e-4 && fine < 0.6 * coarse, "{coarse} {fine}");
        }
    }
}
