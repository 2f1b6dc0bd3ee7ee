//! Off-grid evaluation of smooth periodic fields.
//!
//! Tensor-product Lagrange interpolation on a 6 × 6 node stencil, accurate to
//! O(h⁶) for smooth data.

use crate::torus::{Point, ScalarField};

const WIDTH: usize = 6;
const HALF: isize = 2;

#[inline]
fn weights(t: f64) -> [f64; WIDTH] {
    // nodes at -2, -1, 0, 1, 2, 3 relative to the base node; t ∈ [0, 1)
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
    let mut w = [0.0; WIDTH];
    for (a, wa) in w.iter_mut().enumerate() {
        let mut num = 1.0;
        let mut den = 1.0;
        for (b, &xb) in xs.iter().enumerate() {
            if a != b {
                num *= t - xb;
                den *= xs[a] - xb;
            }
        }
        *wa = num / den;
    }
    w
}

/// Interpolated value of `field` at an arbitrary point of the torus.
pub fn interpolate(field: &ScalarField, p: &Point) -> f64 {
    let g = field.grid();
    let n = g.n() as isize;
    let fx = p.x * n as f64;
    let fy = p.y * n as f64;
    let bx = fx.floor();
    let by = fy.floor();
    let wx = weights(fx - bx);
    let wy = weights(fy - by);
    let bx = bx as isize;
    let by = by as isize;
    let v = field.values();
    let mut acc = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        let j = (by + b as isize - HALF).rem_euclid(n) as usize;
        let row = &v[j * n as usize..(j + 1) * n as usize];
        let mut s = 0.0;
        for (a, wxa) in wx.iter().enumerate() {
            let i = (bx + a as isize - HALF).rem_euclid(n) as usize;
            s += wxa * row[i];
        }
        acc += wyb * s;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_nodes() {
        let g = TorusGrid::new(64).unwrap();
        let f = g.from_fn(|p| (2.0 * PI * p.x).sin() + p.y * p.y);
        for k in [0usize, 17, 1000, 4095] {
            let p = g.point(k);
            assert!((interpolate(&f, &p) - f.values()[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn sixth_order_on_smooth_data() {
        let exact = |p: Point| (2.0 * PI * p.x).sin() * (2.0 * PI * 2.0 * p.y).cos();
        let err = |n: usize| {
            let g = TorusGrid::new(n).unwrap();
            let f = g.from_fn(exact);
            let mut worst: f64 = 0.0;
            for k in 0..50 {
                let p = Point::new(0.0137 * k as f64 + 0.003, 0.021 * k as f64 + 0.5);
                worst = worst.max((interpolate(&f, &p) - exact(p)).abs());
            }
            worst
        };
        let (coarse, fine) = (err(64), err(128));
        assert!(fine < 1e-8, "{fine}");
        assert!(coarse / fine > 40.0, "{}", coarse / fine);
    }
}
