use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::metric::{
    dt_distance, eikonal_distance, holder_fit_values, ConformalMetric, DistanceField, Envelope,
    HolderFit,
};
use crate::potentials::SingularPotential;
use crate::torus::{Point, TorusGrid};

use super::MatchedLadder;

const RANDOM_SOURCES: usize = 5;
const TARGETS_PER_SOURCE: usize = 10;
const MAX_RADIUS: f64 = 0.5;

/// Sources and `(source index, target node)` pairs shared by every distance
/// comparison of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub sources: Vec<Point>,
    pub pairs: Vec<(usize, usize)>,
}

impl PairSample {
    /// Flat distance of each pair.
    pub fn flat_distances(&self, grid: &TorusGrid) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(i, k)| self.sources[i].distance(&grid.point(k)))
            .collect()
    }
}

/// Five random off-grid sources with ten targets each, then `anchor` with
/// ten targets. Target radii are log-uniform in `[1.5h, 0.5]`.
pub fn sample_pairs(grid: &TorusGrid, seed: u64, anchor: Point) -> PairSample {
    sample_pairs_with(grid, seed, anchor, RANDOM_SOURCES, TARGETS_PER_SOURCE)
}

pub(crate) fn sample_pairs_with(
    grid: &TorusGrid,
    seed: u64,
    anchor: Point,
    random_sources: usize,
    targets: usize,
) -> PairSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<Point> = (0..random_sources)
        .map(|_| Point::new(rng.gen(), rng.gen()))
        .collect();
    sources.push(anchor);
    let (lo, hi) = ((1.5 * grid.h()).ln(), MAX_RADIUS.ln());
    let mut pairs = Vec::with_capacity(sources.len() * targets);
    for (i, s) in sources.iter().enumerate() {
        for _ in 0..targets {
            let r = rng.gen_range(lo..hi).exp();
            let th = rng.gen_range(0.0..2.0 * PI);
            let node = grid.nearest_node(&s.offset(r * th.cos(), r * th.sin()));
            pairs.push((i, node));
        }
    }
    PairSample { sources, pairs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub k: u32,
    pub t: f64,
    pub level: u32,
    /// `max |d_t − d_T|` over the sampled pairs.
    pub sup: f64,
    /// Upper envelope `d_t ≤ C·d_S^α`.
    pub holder: HolderFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConvergence {
    pub rows: Vec<MetricRow>,
    /// `√2/2`.
    pub flat_diameter: f64,
}

fn relative_spread(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / lo.abs()
}

impl MetricConvergence {
    /// Largest increase of the sup-discrepancy from one ladder time to the next smaller one.
    pub fn worst_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].sup - w[0].sup)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_sup(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.sup)
    }

    /// `(max − min)/min` of the fitted exponents along the ladder.
    pub fn alpha_drift(&self) -> f64 {
        relative_spread(self.rows.iter().map(|r| r.holder.alpha))
    }

    /// `(max − min)/min` of the fitted constants along the ladder.
    pub fn constant_drift(&self) -> f64 {
        relative_spread(self.rows.iter().map(|r| r.holder.constant))
    }
}

/// Upper envelopes `d ≤ C·d_S^α` of each family of distance fields over the sampled pairs.
pub fn equicontinuity_fits(
    families: &[Vec<DistanceField>],
    sample: &PairSample,
    grid: &TorusGrid,
) -> Result<Vec<HolderFit>> {
    let flat = sample.flat_distances(grid);
    families
        .iter()
        .map(|d| {
            let pts: Vec<(f64, f64)> = sample
                .pairs
                .iter()
                .zip(&flat)
                .map(|(&(i, k), &ds)| (d[i].at(k), ds))
                .collect();
            holder_fit_values(&pts, Envelope::Upper)
        })
        .collect()
}

/// Distances of `e^{u_t}` along the ladder against those of the limit
/// metric, over the sampled pairs.
pub fn flow_metric_convergence(
    ladder: &MatchedLadder,
    plus: &SingularPotential,
    minus: &SingularPotential,
    sample: &PairSample,
) -> Result<MetricConvergence> {
    let grid = plus.grid();
    let limit = dt_distance(plus, minus, &sample.sources)?;
    let mut families = Vec::with_capacity(ladder.entries.len());
    for e in &ladder.entries {
        let metric = ConformalMetric::from_field(e.state.u.clone());
        let fields = sample
            .sources
            .iter()
            .map(|s| eikonal_distance(&metric, s))
            .collect::<Result<Vec<_>>>()?;
        families.push(fields);
    }
    let fits = equicontinuity_fits(&families, sample, grid)?;
    let rows = ladder
        .entries
        .iter()
        .zip(&families)
        .zip(fits)
        .map(|((e, d), holder)| MetricRow {
            k: e.k,
            t: e.t,
            level: e.level,
            sup: crate::metric::sup_discrepancy(d, &limit, &sample.pairs),
            holder,
        })
        .collect();
    Ok(MetricConvergence {
        rows,
        flat_diameter: 0.5 * std::f64::consts::SQRT_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_reproducible_and_span_two_decades() {
        let g = TorusGrid::new(512).unwrap();
        let a = sample_pairs(&g, 7, Point::new(0.5, 0.5));
        let b = sample_pairs(&g, 7, Point::new(0.5, 0.5));
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 60);
        assert_eq!(a.sources.len(), 6);
        assert!(a.pairs[50..].iter().all(|p| p.0 == 5));
        let d = a.flat_distances(&g);
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi <= MAX_RADIUS + g.h());
        assert_ne!(a, sample_pairs(&g, 8, Point::new(0.5, 0.5)));
    }
}
