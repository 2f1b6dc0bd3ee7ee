use std::f64::consts::PI;

use crate::error::Result;
use crate::flow::FLOW_STENCIL;
use crate::potentials::{normalization_constant, SingularPotential};
use crate::torus::{laplacian_with, Point, ScalarField, TorusGrid};

use super::MatchedLadder;

/// `χ(x, y) = cos(2π(k_x x + k_y y) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub kx: i32,
    pub ky: i32,
    pub phase: f64,
}

impl TestFunction {
    pub fn value(&self, p: &Point) -> f64 {
        (2.0 * PI * (self.kx as f64 * p.x + self.ky as f64 * p.y) + self.phase).cos()
    }

    /// `Δ̃χ = −2π|k|²χ`.
    pub fn laplacian(&self, p: &Point) -> f64 {
        -2.0 * PI * (self.kx * self.kx + self.ky * self.ky) as f64 * self.value(p)
    }
}

/// The fixed battery of eight low-frequency test functions.
pub fn test_functions() -> [TestFunction; 8] {
    let t = |kx, ky, phase| TestFunction { kx, ky, phase };
    [
        t(1, 0, 0.0),
        t(0, 1, 0.5 * PI),
        t(1, 1, 0.3),
        t(1, -1, 1.1),
        t(2, 0, 0.7),
        t(0, 2, 2.0),
        t(2, 1, -0.4),
        t(1, 2, 2.9),
    ]
}

/// Node values of `ψ₊ − ψ₋ + c`; a node sitting on a pole gets the mean
/// over four points a quarter cell away.
pub fn limit_node_values(
    plus: &SingularPotential,
    minus: &SingularPotential,
    c: f64,
) -> ScalarField {
    let grid = plus.grid();
    let h = grid.h();
    let eval = |z: &Point| plus.eval(z) - minus.eval(z) + c;
    let poles: Vec<Point> = plus
        .poles()
        .iter()
        .chain(minus.poles())
        .map(|p| p.location)
        .collect();
    let vals = (0..grid.len())
        .map(|k| {
            let z = grid.point(k);
            if poles.iter().any(|a| a.distance(&z) < 1e-9 * h) {
                let q = 0.25 * h;
                [(q, q), (-q, q), (-q, -q), (q, -q)]
                    .iter()
                    .map(|&(dx, dy)| eval(&z.offset(dx, dy)))
                    .sum::<f64>()
                    / 4.0
            } else {
                eval(&z)
            }
        })
        .collect();
    ScalarField::from_values(grid, vals).expect("finite off the poles")
}

/// `∫(ψ₊ − ψ₋)·Δ̃χ`, from `Δ̃G_a = δ_a − 1` for the pole terms.
fn limit_pairing(plus: &SingularPotential, minus: &SingularPotential, chi: &TestFunction) -> f64 {
    let grid = plus.grid();
    let mut v = 0.0;
    for p in plus.poles() {
        v += p.lelong * chi.value(&p.location);
    }
    for p in minus.poles() {
        v -= p.lelong * chi.value(&p.location);
    }
    let smooth = plus.smooth().zip_map(minus.smooth(), |a, b| a - b);
    v + field_pairing(&smooth, grid, chi)
}

fn field_pairing(u: &ScalarField, grid: &TorusGrid, chi: &TestFunction) -> f64 {
    u.values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * chi.laplacian(&grid.point(k)))
        .sum::<f64>()
        / grid.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciRow {
    pub k: u32,
    pub t: f64,
    pub level: u32,
    /// `‖u_t − (ψ₊ − ψ₋ + c)‖_{L¹}`.
    pub l1: f64,
    /// `|∫u_t Δ̃χ − ∫(ψ₊ − ψ₋)Δ̃χ|` for each test function.
    pub pairing_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciConvergence {
    pub rows: Vec<RicciRow>,
}

impl RicciConvergence {
    /// Largest increase of the L¹ error from one ladder time to the next smaller one.
    pub fn worst_l1_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].l1 - w[0].l1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest increase of any pairing error along the ladder.
    pub fn worst_pairing_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .flat_map(|w| {
                w[1].pairing_errors
                    .iter()
                    .zip(&w[0].pairing_errors)
                    .map(|(b, a)| b - a)
                    .collect::<Vec<_>>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_l1(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.l1)
    }

    pub fn final_pairing(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| {
            r.pairing_errors.iter().cloned().fold(0.0, f64::max)
        })
    }
}

/// L¹ and weak-pairing distance of `u_t` to the limit log-density along the ladder.
pub fn ricci_convergence(
    ladder: &MatchedLadder,
    plus: &SingularPotential,
    minus: &SingularPotential,
) -> Result<RicciConvergence> {
    let c = normalization_constant(plus, minus)?;
    let limit = limit_node_values(plus, minus, c);
    let grid = plus.grid();
    let chis = test_functions();
    let targets: Vec<f64> = chis
        .iter()
        .map(|chi| limit_pairing(plus, minus, chi))
        .collect();
    let rows = ladder
        .entries
        .iter()
        .map(|e| {
            let u = &e.state.u;
            let l1 = u.zip_map(&limit, |a, b| (a - b).abs()).mean();
            let pairing_errors = chis
                .iter()
                .zip(&targets)
                .map(|(chi, target)| (field_pairing(u, grid, chi) - target).abs())
                .collect();
            RicciRow {
                k: e.k,
                t: e.t,
                level: e.level,
                l1,
                pairing_errors,
            }
        })
        .collect();
    Ok(RicciConvergence { rows })
}

/// Cell masses `−Δ̃u·h²` of the curvature measure of `e^{u}·(flat)`.
#[derive(Debug, Clone)]
pub struct CurvatureMeasure {
    pub cells: ScalarField,
    pub total: f64,
}

impl CurvatureMeasure {
    /// Mass of the cells whose node lies within `radius` of `centre`.
    pub fn mass_near(&self, centre: &Point, radius: f64) -> f64 {
        let grid = self.cells.grid();
        self.cells
            .values()
            .iter()
            .enumerate()
            .filter(|(k, _)| grid.point(*k).distance(centre) <= radius)
            .map(|(_, v)| v)
            .sum()
    }
}

/// Curvature measure of the flow operator's discrete Laplacian.
pub fn curvature_measure(u: &ScalarField) -> CurvatureMeasure {
    let area = u.grid().cell_area();
    let cells = laplacian_with(u, FLOW_STENCIL).map(|v| -v * area);
    let total = cells.values().iter().sum();
    CurvatureMeasure { cells, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Sign;

    #[test]
    fn pole_measure_bookkeeping() {
        let g = TorusGrid::new(256).unwrap();
        let a = Point::new(0.5, 0.5);
        let nu = 0.8;
        let plus = SingularPotential::zero(&g, Sign::Plus);
        let minus = SingularPotential::new(&g, Sign::Minus, &[(a, nu)], None).unwrap();
        let u = limit_node_values(&plus, &minus, 0.0);
        let mu = curvature_measure(&u);
        assert!(mu.total.abs() < 1e-8);
        let near = mu.mass_near(&a, 0.05);
        assert!((near - nu).abs() < 0.02, "{near}");
        assert!((mu.total - near + nu).abs() < 0.02);
    }

    #[test]
    fn limit_pairing_matches_smooth_quadrature() {
        let g = TorusGrid::new(256).unwrap();
        let smooth = g.from_fn(|p| 0.1 * (2.0 * PI * p.x).sin());
        let plus = SingularPotential::new(&g, Sign::Plus, &[], Some(smooth.clone())).unwrap();
        let minus = SingularPotential::zero(&g, Sign::Minus);
        for chi in test_functions() {
            let direct = field_pairing(&smooth, &g, &chi);
            assert!((limit_pairing(&plus, &minus, &chi) - direct).abs() < 1e-14);
        }
        // Δ̃ of the mode sin(2πx) is −2π sin(2πx): ∫ 0.1 sin · (−2π) sin = −0.1π
        let chi = TestFunction {
            kx: 1,
            ky: 0,
            phase: -0.5 * PI,
        };
        assert!((limit_pairing(&plus, &minus, &chi) + 0.1 * PI).abs() < 1e-12);
    }
}
