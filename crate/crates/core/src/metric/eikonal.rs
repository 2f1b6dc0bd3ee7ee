use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::potentials::SingularPotential;
use crate::torus::{Point, ScalarField};

use super::lattice::{edge_length, Entry};
use super::{ConformalMetric, DistanceField, Method};

/// Nodes within this flat radius of the source (clamped to 4..32 cells) take
/// the exact length of the straight segment and are not updated further, so
/// the radial profile at a pole source is carried exactly.
pub const SEED_RADIUS: f64 = 0.03;
const SEED_MIN_CELLS: f64 = 4.0;
const SEED_MAX_CELLS: f64 = 32.0;

const FAR: u8 = 0;
const TRIAL: u8 = 1;
const ACCEPTED: u8 = 2;

/// Smallest value at a node reachable across the triangle with the axis
/// neighbour at `a` and the diagonal neighbour at `b` (either may be missing),
/// with slownesses `f` at the node, `fa`, `fb` at the neighbours.
#[inline]
fn triangle_update(a: f64, b: f64, f: f64, fa: f64, fb: f64, h: f64) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    match (a.is_finite(), b.is_finite()) {
        (false, false) => f64::INFINITY,
        (true, false) => a + 0.5 * (f + fa) * h,
        (false, true) => b + 0.5 * (f + fb) * h * sqrt2,
        (true, true) => {
            let solve = |slow: f64| -> (f64, f64) {
                let q = (a - b) / (slow * h);
                if q <= 0.0 {
                    (0.0, a + slow * h)
                } else if q >= sqrt2 / 2.0 {
                    (1.0, b + slow * h * sqrt2)
                } else {
                    let theta = q / (1.0 - q * q).sqrt();
                    (
                        theta,
                        (1.0 - theta) * a + theta * b + slow * h * (1.0 + theta * theta).sqrt(),
                    )
                }
            };
            let (theta, _) = solve(f);
            let mean = 0.5 * (f + (1.0 - theta) * fa + theta * fb);
            solve(mean).1
        }
    }
}

/// First-order fast marching for `|∇d| = e^{u/2}` with eight-neighbour
/// triangle updates and node slownesses from [`ConformalMetric::node_slowness`].
pub fn eikonal_distance(metric: &ConformalMetric, source: &Point) -> Result<DistanceField> {
    let grid = metric.grid().clone();
    let n = grid.n() as isize;
    let h = grid.h();
    let slow = metric.node_slowness();
    let f = slow.values();
    if let Some(k) = f.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::NonMonotone {
            node: k,
            value: f[k],
            front: 0.0,
        });
    }

    let len = grid.len();
    let mut t = vec![f64::INFINITY; len];
    let mut state = vec![FAR; len];
    let mut frozen = vec![false; len];
    let mut heap = BinaryHeap::new();
    let centre = grid.nearest_node(source);
    let seed_radius = SEED_RADIUS.min(SEED_MAX_CELLS * h).max(SEED_MIN_CELLS * h);
    let reach = (seed_radius / h).ceil() as isize + 1;
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let k = grid.shifted(centre, di, dj);
            let p = grid.point(k);
            let flat = source.distance(&p);
            if flat <= seed_radius * (1.0 + 1e-12) {
                let d0 = if flat == 0.0 {
                    0.0
                } else {
                    edge_length(metric, source, source.displacement_to(&p))?
                };
                if d0 < t[k] {
                    t[k] = d0;
                    state[k] = TRIAL;
                    frozen[k] = true;
                    heap.push(Entry { dist: d0, node: k });
                }
            }
        }
    }

    let at = |i: isize, j: isize| -> usize { (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize };
    let mut front = 0.0f64;
    while let Some(Entry { dist, node }) = heap.pop() {
        if state[node] == ACCEPTED || dist > t[node] {
            continue;
        }
        if !dist.is_finite() || dist < front - 1e-12 * front.abs() {
            return Err(Error::NonMonotone {
                node,
                value: dist,
                front,
            });
        }
        front = front.max(dist);
        state[node] = ACCEPTED;
        let (ci, cj) = grid.coords(node);
        let (ci, cj) = (ci as isize, cj as isize);
        for dj in -1..=1isize {
            for di in -1..=1isize {
                if di == 0 && dj == 0 {
                    continue;
                }
                let y = at(ci + di, cj + dj);
                if state[y] == ACCEPTED || frozen[y] {
                    continue;
                }
                let (yi, yj) = (ci + di, cj + dj);
                let value = |k: usize| {
                    if state[k] == ACCEPTED {
                        t[k]
                    } else {
                        f64::INFINITY
                    }
                };
                let mut best = t[y];
                for (ax, ay) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let a = at(yi + ax, yj + ay);
                    for s in [-1isize, 1] {
                        let (bx, by) = if ax == 0 { (ax + s, ay) } else { (ax, ay + s) };
                        let b = at(yi + bx, yj + by);
                        let cand = triangle_update(value(a), value(b), f[y], f[a], f[b], h);
                        best = best.min(cand);
                    }
                }
                if best < t[y] {
                    t[y] = best;
                    state[y] = TRIAL;
                    heap.push(Entry {
                        dist: best,
                        node: y,
                    });
                }
            }
        }
    }

    Ok(DistanceField {
        source: *source,
        values: ScalarField::from_values_unchecked(&grid, t),
        metric: metric.describe(),
        method: Method::Eikonal,
    })
}

/// Distances of the unit-area limit metric `e^{ψ₊−ψ₋+c}` from each source.
pub fn dt_distance(
    plus: &SingularPotential,
    minus: &SingularPotential,
    sources: &[Point],
) -> Result<Vec<DistanceField>> {
    let metric = ConformalMetric::singular(plus, minus)?;
    sources
        .iter()
        .map(|s| eikonal_distance(&metric, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::flat_distance;
    use crate::torus::TorusGrid;

    #[test]
    fn flat_marching_is_within_one_and_a_half_cells() {
        let g = TorusGrid::new(128).unwrap();
        for src in [Point::new(0.5, 0.5), Point::new(0.3021, 0.7113)] {
            let d = eikonal_distance(&ConformalMetric::flat(&g), &src).unwrap();
            let exact = flat_distance(&g, &src);
            let err = d.values.zip_map(&exact, |a, b| (a - b).abs()).max();
            assert!(err <= 1.5 * g.h(), "{err}");
        }
    }

    #[test]
    fn constant_factor_scales_distances() {
        let g = TorusGrid::new(64).unwrap();
        let src = Point::new(0.5, 0.5);
        let d1 = eikonal_distance(&ConformalMetric::flat(&g), &src).unwrap();
        let d2 =
            eikonal_distance(&ConformalMetric::from_field(g.zeros().map(|_| 2.0)), &src).unwrap();
        let e = 1f64.exp();
        for k in 0..g.len() {
            assert!((d2.at(k) - e * d1.at(k)).abs() < 1e-12 * d2.at(k).max(1.0));
        }
    }

    #[test]
    fn corrupted_slowness_fails_fast() {
        let g = TorusGrid::new(64).unwrap();
        let mut u = g.zeros();
        u.values_mut()[100] = f64::NAN;
        let r = eikonal_distance(&ConformalMetric::from_field(u), &Point::new(0.5, 0.5));
        assert!(matches!(r, Err(Error::NonMonotone { .. })));
    }
}
