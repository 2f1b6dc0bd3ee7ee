use crate::error::{Error, Result};
use crate::metric::{eikonal_distance, ConformalMetric};
use crate::potentials::{counterexample_density, CounterexampleDensity};
use crate::torus::{Point, TorusGrid};

use super::metric_convergence::sample_pairs_with;
use super::{CheckResult, ToleranceBasis};

/// Finest grid tried before giving up on a level.
pub const MAX_COUNTEREXAMPLE_N: usize = 8192;
const MIN_N: usize = 512;
const SOURCES: usize = 2;
const TARGETS: usize = 20;

/// Distances of one level of the weak-convergence example.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleRow {
    pub level: u32,
    pub n: usize,
    pub tube_width: f64,
    pub diagonals: bool,
    /// `∫|e^{ψ_j} − 1|`.
    pub l1_deviation: f64,
    /// `max |d_j − d_S/2|` over the pairs.
    pub half_discrepancy: f64,
    /// `min (d_j − d_S/2)` over the pairs.
    pub lower_margin: f64,
    /// `max |d_j − d_S|` over pairs with `d_S` at least half the largest sampled one.
    pub full_discrepancy: f64,
    pub max_flat: f64,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    pub checks: Vec<CheckResult>,
}

impl CounterexampleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn density_for(level: u32) -> Result<(TorusGrid, CounterexampleDensity)> {
    let mut n = MIN_N;
    loop {
        let grid = TorusGrid::new(n)?;
        match counterexample_density(&grid, level) {
            Ok(d) => return Ok((grid, d)),
            Err(Error::Resolution(msg)) if n >= MAX_COUNTEREXAMPLE_N => {
                return Err(Error::Resolution(msg))
            }
            Err(Error::Resolution(_)) => n *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Builds each level on the coarsest grid (from 512 up) that resolves its
/// tube and measures `d_j` against `d_S` on pairs drawn from `seed`.
pub fn counterexample_run(levels: &[u32], seed: u64) -> Result<CounterexampleReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &level in levels {
        if !(2..=6).contains(&level) {
            return Err(Error::InvalidInput(format!(
                "counterexample levels must lie in 2..=6, got {level}"
            )));
        }
        let (grid, density) = density_for(level)?;
        let h = grid.h();
        let CounterexampleDensity {
            psi,
            width,
            diagonals,
            l1_deviation,
            ..
        } = density;
        let metric = ConformalMetric::from_field(psi);
        let sample = sample_pairs_with(&grid, seed, Point::new(0.0, 0.0), SOURCES, TARGETS);
        let flat = sample.flat_distances(&grid);
        let mut dj = vec![0.0; sample.pairs.len()];
        for (i, s) in sample.sources.iter().enumerate() {
            let field = eikonal_distance(&metric, s)?;
            for (slot, &(src, k)) in dj.iter_mut().zip(&sample.pairs) {
                if src == i {
                    *slot = field.at(k);
                }
            }
        }
        drop(metric);
        let max_flat = flat.iter().cloned().fold(0.0, f64::max);
        let mut row = CounterexampleRow {
            level,
            n: grid.n(),
            tube_width: width,
            diagonals,
            l1_deviation,
            half_discrepancy: 0.0,
            lower_margin: f64::INFINITY,
            full_discrepancy: 0.0,
            max_flat,
        };
        for (&d, &ds) in dj.iter().zip(&flat) {
            row.half_discrepancy = row.half_discrepancy.max((d - 0.5 * ds).abs());
            row.lower_margin = row.lower_margin.min(d - 0.5 * ds);
            if ds >= 0.5 * max_flat {
                row.full_discrepancy = row.full_discrepancy.max((d - ds).abs());
            }
        }
        let scenario = format!("counterexample-j{level}");
        let scale = 0.5f64.powi(level as i32);
        checks.push(CheckResult::at_most(
            "weak-convergence",
            &scenario,
            l1_deviation,
            1.1 * scale,
            ToleranceBasis::Stated,
        ));
        checks.push(CheckResult::at_most(
            "half-distance",
            &scenario,
            row.half_discrepancy,
            5.0 * scale + 2.0 * h,
            ToleranceBasis::Stated,
        ));
        checks.push(CheckResult::at_least(
            "half-distance-lower",
            &scenario,
            row.lower_margin,
            -2.0 * h,
            ToleranceBasis::Exact,
        ));
        checks.push(CheckResult::at_least(
            "no-metric-convergence",
            &scenario,
            row.full_discrepancy,
            0.4 * 0.5 * max_flat,
            ToleranceBasis::Stated,
        ));
        rows.push(row);
    }
    Ok(CounterexampleReport { rows, checks })
}
