use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::torus::Point;

use super::length::segment_length;
use super::{ConformalMetric, DistanceField, Method};

/// Half of the 16-neighbour stencil: king moves and knight moves.
pub const LATTICE_STEPS: [(isize, isize); 8] = [
    (1, 0),
    (0, 1),
    (1, 1),
    (1, -1),
    (2, 1),
    (1, 2),
    (2, -1),
    (1, -2),
];

/// Worst-case relative overestimate of flat distances by 16-neighbour paths,
/// `√(1 + (√5 − 2)²) − 1`, attained at slope `√5 − 2`.
pub const LATTICE_ANISOTROPY: f64 = 0.027_486_296_746_015_66;

#[derive(Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub(crate) dist: f64,
    pub(crate) node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed so that `BinaryHeap` pops the smallest distance, then the smallest index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Length of a straight edge, split at a pole it runs through.
pub(crate) fn edge_length(metric: &ConformalMetric, p: &Point, d: (f64, f64)) -> Result<f64> {
    match segment_length(metric, p, d) {
        Err(Error::ThroughPole { x, y }) => {
            let a = Point::new(x, y);
            let (ax, ay) = p.displacement_to(&a);
            let first = segment_length(metric, p, (ax, ay))?;
            let second = segment_length(metric, &a, (d.0 - ax, d.1 - ay))?;
            Ok(first + second)
        }
        other => other,
    }
}

/// Shortest paths on the periodic 16-neighbour graph whose edges carry their
/// exact straight-line lengths.
pub fn lattice_distance(metric: &ConformalMetric, source: &Point) -> Result<DistanceField> {
    let grid = metric.grid().clone();
    let n = grid.n();
    let len = grid.len();
    let h = grid.h();
    let mut weights = vec![vec![0.0; len]; LATTICE_STEPS.len()];
    for (w, &(di, dj)) in weights.iter_mut().zip(&LATTICE_STEPS) {
        let d = (di as f64 * h, dj as f64 * h);
        for (k, slot) in w.iter_mut().enumerate() {
            *slot = edge_length(metric, &grid.point(k), d)?;
        }
    }

    let mut dist = vec![f64::INFINITY; len];
    let mut heap = BinaryHeap::new();
    let centre = grid.nearest_node(source);
    let seed_reach = 2.0 * h * (1.0 + 1e-12);
    for dj in -2..=2isize {
        for di in -2..=2isize {
            let k = grid.shifted(centre, di, dj);
            let p = grid.point(k);
            let flat = source.distance(&p);
            if flat <= seed_reach {
                let d0 = if flat == 0.0 {
                    0.0
                } else {
                    edge_length(metric, source, source.displacement_to(&p))?
                };
                if d0 < dist[k] {
                    dist[k] = d0;
                    heap.push(Entry { dist: d0, node: k });
                }
            }
        }
    }

    let mut done = vec![false; len];
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if done[node] || d > dist[node] {
            continue;
        }
        done[node] = true;
        let (i, j) = grid.coords(node);
        for (s, &(di, dj)) in LATTICE_STEPS.iter().enumerate() {
            let fwd = grid.index(
                (i as isize + di).rem_euclid(n as isize) as usize,
                (j as isize + dj).rem_euclid(n as isize) as usize,
            );
            let back = grid.index(
                (i as isize - di).rem_euclid(n as isize) as usize,
                (j as isize - dj).rem_euclid(n as isize) as usize,
            );
            for (nb, w) in [(fwd, weights[s][node]), (back, weights[s][back])] {
                let cand = d + w;
                if !done[nb] && cand < dist[nb] {
                    dist[nb] = cand;
                    heap.push(Entry {
                        dist: cand,
                        node: nb,
                    });
                }
            }
        }
    }

    Ok(DistanceField {
        source: *source,
        values: crate::torus::ScalarField::from_values_unchecked(&grid, dist),
        metric: metric.describe(),
        method: Method::LatticeOracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::flat_distance;
    use crate::torus::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn anisotropy_constant_matches_worst_direction() {
        let worst = (0..=10_000)
            .map(|k| {
                let m = 0.5 * k as f64 / 10_000.0;
                (1.0 + (5f64.sqrt() - 2.0) * m) / (1.0 + m * m).sqrt() - 1.0
            })
            .fold(0.0, f64::max);
        assert!((worst - LATTICE_ANISOTROPY).abs() < 1e-8);
    }

    #[test]
    fn flat_lattice_is_within_anisotropy() {
        let g = TorusGrid::new(64).unwrap();
        let src = Point::new(0.25, 0.5);
        let d = lattice_distance(&ConformalMetric::flat(&g), &src).unwrap();
        let exact = flat_distance(&g, &src);
        for k in 0..g.len() {
            let (a, b) = (d.at(k), exact.values()[k]);
            assert!(a >= b - 1e-12 && a <= b * (1.0 + LATTICE_ANISOTROPY) + 1e-12);
        }
    }

    #[test]
    fn lattice_is_symmetric() {
        let g = TorusGrid::new(64).unwrap();
        let u = g.from_fn(|p| (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).cos());
        let m = ConformalMetric::from_field(u);
        let (a, b) = (g.index(3, 7), g.index(40, 21));
        let da = lattice_distance(&m, &g.point(a)).unwrap();
        let db = lattice_distance(&m, &g.point(b)).unwrap();
        assert!((da.at(b) - db.at(a)).abs() < 1e-12 * da.at(b));
    }
}
