use crate::error::{Error, Result};
use crate::torus::{ScalarField, TorusGrid};

/// Density of the weak-but-not-metric convergence example at one level.
#[derive(Debug, Clone)]
pub struct CounterexampleDensity {
    pub level: u32,
    /// `ψ_j`: `−ln 4` on the tube, a constant elsewhere fixing the unit mass.
    pub psi: ScalarField,
    pub tube: Vec<bool>,
    /// Tube width in flat units.
    pub width: f64,
    pub diagonals: bool,
    /// `∫ |e^{ψ_j} − 1| dA`.
    pub l1_deviation: f64,
}

fn in_tube(i: usize, j: usize, spacing: usize, rows: usize, diagonals: bool) -> bool {
    let lo = (rows as isize - 1) / 2;
    let in_band = |c: usize| ((c as isize + lo).rem_euclid(spacing as isize) as usize) < rows;
    if in_band(i) || in_band(j) {
        return true;
    }
    let diag_rows = ((rows as f64) * std::f64::consts::SQRT_2).round() as usize;
    let dlo = (diag_rows as isize - 1) / 2;
    let in_diag = |c: isize| ((c + dlo).rem_euclid(spacing as isize) as usize) < diag_rows;
    diagonals && (in_diag(i as isize - j as isize) || in_diag(i as isize + j as isize))
}

/// Fraction of nodes in the tube; the pattern repeats on every net cell.
fn tube_fraction(spacing: usize, rows: usize, diagonals: bool) -> f64 {
    let mut count = 0usize;
    for j in 0..spacing {
        for i in 0..spacing {
            count += in_tube(i, j, spacing, rows, diagonals) as usize;
        }
    }
    count as f64 / (spacing * spacing) as f64
}

fn l1_deviation(inside: f64) -> (f64, f64) {
    let delta = 0.75 * inside / (1.0 - inside);
    (delta, 0.75 * inside + delta * (1.0 - inside))
}

fn build(grid: &TorusGrid, level: u32, rows: usize, diagonals: bool) -> CounterexampleDensity {
    let spacing = grid.n() >> level;
    let tube: Vec<bool> = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            in_tube(i, j, spacing, rows, diagonals)
        })
        .collect();
    let inside = tube.iter().filter(|&&t| t).count() as f64 / grid.len() as f64;
    let (delta, l1) = l1_deviation(inside);
    let low = -(4f64.ln());
    let high = delta.ln_1p();
    let vals = tube.iter().map(|&t| if t { low } else { high }).collect();
    CounterexampleDensity {
        level,
        psi: ScalarField::from_values_unchecked(grid, vals),
        tube,
        width: rows as f64 * grid.h(),
        diagonals,
        l1_deviation: l1,
    }
}

/// Builds `ψ_j` on the net of spacing `2^{−j}`: the grid lines through the
/// net points, plus both diagonal families when the mass budget leaves room.
/// The tube is as wide as `∫|e^{ψ_j} − 1| ≤ 1.1·2^{−j}` allows.
pub fn counterexample_density(grid: &TorusGrid, level: u32) -> Result<CounterexampleDensity> {
    if !(1..=10).contains(&level) || (grid.n() >> level) < 4 {
        return Err(Error::Resolution(format!(
            "level {level} needs a net spacing of at least 4 cells at n = {}",
            grid.n()
        )));
    }
    let budget = 1.1 * 0.5f64.powi(level as i32);
    let spacing = grid.n() >> level;
    for diagonals in [true, false] {
        let mut best = None;
        for rows in 2..spacing {
            if l1_deviation(tube_fraction(spacing, rows, diagonals)).1 > budget {
                break;
            }
            best = Some(rows);
        }
        if let Some(rows) = best {
            return Ok(build(grid, level, rows, diagonals));
        }
    }
    Err(Error::Resolution(format!(
        "tube for level {level} would be narrower than 2h at n = {}",
        grid.n()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_two_meets_constraints() {
        let g = TorusGrid::new(512).unwrap();
        let c = counterexample_density(&g, 2).unwrap();
        let ln4 = 4f64.ln();
        for (v, t) in c.psi.values().iter().zip(&c.tube) {
            if *t {
                assert_eq!(*v, -ln4);
            }
            assert!(*v <= ln4);
        }
        let mass = c.psi.map(f64::exp).mean();
        assert!((mass - 1.0).abs() < 1e-10);
        let l1 = c.psi.map(|v| (v.exp() - 1.0).abs()).mean();
        assert!(l1 <= 1.1 * 0.25);
        assert!(c.width >= 2.0 * g.h());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = TorusGrid::new(512).unwrap();
        assert!(matches!(
            counterexample_density(&g, 5),
            Err(Error::Resolution(_))
        ));
    }
}
