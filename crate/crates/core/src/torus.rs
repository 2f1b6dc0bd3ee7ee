//! Flat unit torus ℂ/(ℤ+iℤ): points, periodic grids, scalar fields and
//! Fourier-multiplier linear algebra.
//!
//! The Laplace-type operator used throughout is Δ̃ = (1/2π)(∂²ₓ + ∂²ᵧ), the
//! density of dd^c with respect to the flat area form, so that `log|z - a|`
//! carries unit mass at `a`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A point of the unit torus, stored with coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point {
            x: wrap01(x),
            y: wrap01(y),
        }
    }

    /// Shortest periodic displacement `other - self`, each component in `[-1/2, 1/2]`.
    pub fn displacement_to(&self, other: &Point) -> (f64, f64) {
        (wrap_half(other.x - self.x), wrap_half(other.y - self.y))
    }

    /// Flat torus distance d_S.
    pub fn distance(&self, other: &Point) -> f64 {
        let (dx, dy) = self.displacement_to(other);
        dx.hypot(dy)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.x, self.y)
    }
}

pub(crate) fn wrap01(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub(crate) fn wrap_half(v: f64) -> f64 {
    v - v.round()
}

/// Which discrete Laplacian a Fourier multiplier represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Exact Fourier symbol −2π|k|² (band-limited interpolant).
    Spectral,
    /// Five-point finite-difference symbol; an M-matrix, so discrete maximum
    /// principles hold exactly.
    FivePoint,
}

struct GridInner {
    n: usize,
    h: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Periodic `n × n` grid of the unit square; node `(i, j)` sits at `(i h, j h)`.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n()).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n()
    }
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self::new_unchecked(n))
    }

    /// Grid without the `n >= 64` floor; used for small scratch problems in tests.
    pub fn new_unchecked(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        TorusGrid {
            inner: Arc::new(GridInner {
                n,
                h: 1.0 / n as f64,
                fwd,
                inv,
            }),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.inner.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area weight of one node.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.inner.h * self.inner.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.inner.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.inner.n, idx / self.inner.n)
    }

    /// Index of the node `(i + di, j + dj)` with periodic wraparound.
    #[inline]
    pub fn shifted(&self, idx: usize, di: isize, dj: isize) -> usize {
        let n = self.inner.n as isize;
        let (i, j) = self.coords(idx);
        let ii = (i as isize + di).rem_euclid(n) as usize;
        let jj = (j as isize + dj).rem_euclid(n) as usize;
        self.index(ii, jj)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        Point {
            x: i as f64 * self.inner.h,
            y: j as f64 * self.inner.h,
        }
    }

    /// Node closest to `p`.
    pub fn nearest_node(&self, p: &Point) -> usize {
        let n = self.inner.n;
        let i = (p.x * n as f64).round() as usize % n;
        let j = (p.y * n as f64).round() as usize % n;
        self.index(i, j)
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::constant(self, 0.0)
    }

    pub fn from_fn(&self, f: impl Fn(Point) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|k| f(self.point(k))).collect();
        ScalarField {
            grid: self.clone(),
            values,
        }
    }

    /// Field from a function of the node indices `(i, j)`.
    pub fn from_fn_index(&self, f: impl Fn(usize, usize) -> f64) -> ScalarField {
        let n = self.n();
        let values = (0..self.len()).map(|k| f(k % n, k / n)).collect();
        ScalarField {
            grid: self.clone(),
            values,
        }
    }

    /// Eigenvalue of Δ̃ on the Fourier mode with integer wavenumbers `(kx, ky)`.
    pub fn symbol(&self, stencil: Stencil, kx: i64, ky: i64) -> f64 {
        match stencil {
            Stencil::Spectral => -2.0 * PI * ((kx * kx + ky * ky) as f64),
            Stencil::FivePoint => {
                let h = self.inner.h;
                let sx = (PI * kx as f64 * h).sin();
                let sy = (PI * ky as f64 * h).sin();
                -4.0 * (sx * sx + sy * sy) / (h * h) / (2.0 * PI)
            }
        }
    }

    fn wavenumber(&self, idx: usize) -> i64 {
        let n = self.inner.n;
        if idx < n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Applies the real Fourier multiplier `m(kx, ky)` to `values`.
    pub fn apply_multiplier(&self, values: &[f64], m: impl Fn(i64, i64) -> f64) -> Vec<f64> {
        let n = self.inner.n;
        assert_eq!(values.len(), n * n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.fwd.process(&mut buf);
        transpose_square(&mut buf, n);
        self.inner.fwd.process(&mut buf);
        // buf[kx * n + ky]
        for a in 0..n {
            let kx = self.wavenumber(a);
            let row = &mut buf[a * n..(a + 1) * n];
            for (b, c) in row.iter_mut().enumerate() {
                *c *= m(kx, self.wavenumber(b));
            }
        }
        self.inner.inv.process(&mut buf);
        transpose_square(&mut buf, n);
        self.inner.inv.process(&mut buf);
        let scale = 1.0 / (n * n) as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Solves `(a - b Δ̃) x = rhs`; requires `a > 0` or (`a == 0` and mean-zero rhs).
    pub fn solve_shifted(&self, stencil: Stencil, a: f64, b: f64, rhs: &[f64]) -> Vec<f64> {
        self.apply_multiplier(rhs, |kx, ky| {
            let d = a - b * self.symbol(stencil, kx, ky);
            if d == 0.0 {
                0.0
            } else {
                1.0 / d
            }
        })
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Real values on every node of a [`TorusGrid`], row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &TorusGrid, v: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![v; grid.len()],
        }
    }

    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {k}")));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Discrete mean, equal to the integral against the unit-area form.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.mean()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Shift by a whole number of grid nodes; exact translation on the lattice.
    pub fn translated(&self, di: isize, dj: isize) -> ScalarField {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for (k, v) in self.values.iter().enumerate() {
            out[g.shifted(k, di, dj)] = *v;
        }
        ScalarField::from_values_unchecked(g, out)
    }

    pub fn minus_mean(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

/// Δ̃f computed with the given stencil.
pub fn laplacian_with(f: &ScalarField, stencil: Stencil) -> ScalarField {
    let g = f.grid();
    match stencil {
        Stencil::Spectral => {
            let out = g.apply_multiplier(f.values(), |kx, ky| g.symbol(Stencil::Spectral, kx, ky));
            ScalarField::from_values_unchecked(g, out)
        }
        Stencil::FivePoint => five_point(f),
    }
}

fn five_point(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let n = g.n();
    let s = 1.0 / (g.h() * g.h() * 2.0 * PI);
    let v = f.values();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        for i in 0..n {
            let im = if i == 0 { n - 1 } else { i - 1 };
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let c = v[j * n + i];
            out[j * n + i] =
                s * (v[j * n + im] + v[j * n + ip] + v[jm * n + i] + v[jp * n + i] - 4.0 * c);
        }
    }
    ScalarField::from_values_unchecked(g, out)
}

/// Spectral Δ̃f = (1/2π) Δf.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    laplacian_with(f, Stencil::Spectral)
}

/// Mean-zero φ with Δ̃φ = rhs for the given stencil.
pub fn solve_poisson_with(rhs: &ScalarField, stencil: Stencil) -> Result<ScalarField> {
    let mean = rhs.mean();
    let scale = rhs.sup_norm().max(1.0);
    if mean.abs() > 1e-10 * scale {
        return Err(Error::NonzeroMean { mean });
    }
    let g = rhs.grid();
    let out = g.apply_multiplier(rhs.values(), |kx, ky| {
        if kx == 0 && ky == 0 {
            0.0
        } else {
            1.0 / g.symbol(stencil, kx, ky)
        }
    });
    Ok(ScalarField::from_values_unchecked(g, out))
}

/// Spectral Poisson solve: mean-zero φ with Δ̃φ = rhs.
pub fn solve_poisson(rhs: &ScalarField) -> Result<ScalarField> {
    solve_poisson_with(rhs, Stencil::Spectral)
}

/// Central-difference gradient magnitude |∇f| (Euclidean derivatives).
pub fn gradient_norm(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let inv = 1.0 / (2.0 * g.h());
    let v = f.values();
    let out = (0..g.len())
        .map(|k| {
            let dx = (v[g.shifted(k, 1, 0)] - v[g.shifted(k, -1, 0)]) * inv;
            let dy = (v[g.shifted(k, 0, 1)] - v[g.shifted(k, 0, -1)]) * inv;
            dx.hypot(dy)
        })
        .collect();
    ScalarField::from_values_unchecked(g, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(32).is_err());
        assert!(TorusGrid::new(96).is_err());
        assert!(TorusGrid::new(64).is_ok());
    }

    #[test]
    fn unit_area() {
        let g = grid(128);
        assert!((g.cell_area() * g.len() as f64 - 1.0).abs() < 1e-15);
        assert_eq!(g.coords(g.index(5, 7)), (5, 7));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid(64);
        let f = ScalarField::constant(&g, 3.0);
        assert!(laplacian(&f).sup_norm() < 1e-12);
    }

    #[test]
    fn laplacian_fourier_eigenvalues() {
        let g = grid(64);
        let f = g.from_fn(|p| (2.0 * PI * p.x).cos() + (4.0 * PI * p.y).cos());
        let expected =
            g.from_fn(|p| -2.0 * PI * (2.0 * PI * p.x).cos() - 8.0 * PI * (4.0 * PI * p.y).cos());
        let lap = laplacian(&f);
        let err = lap.zip_map(&expected, |a, b| a - b).sup_norm();
        assert!(err < 1e-11, "{err}");
        assert!(lap.mean().abs() < 1e-12);
    }

    #[test]
    fn poisson_zero_and_mode() {
        let g = grid(64);
        assert!(solve_poisson(&g.zeros()).unwrap().sup_norm() == 0.0);
        let rhs = g.from_fn(|p| (2.0 * PI * p.x).cos());
        let phi = solve_poisson(&rhs).unwrap();
        let expected = g.from_fn(|p| -(2.0 * PI * p.x).cos() / (2.0 * PI));
        assert!(phi.zip_map(&expected, |a, b| a - b).sup_norm() < 1e-13);
    }

    #[test]
    fn poisson_rejects_mass() {
        let g = grid(64);
        let rhs = ScalarField::constant(&g, 0.25);
        match solve_poisson(&rhs) {
            Err(Error::NonzeroMean { mean }) => assert!((mean - 0.25).abs() < 1e-15),
            other => panic!("expected NonzeroMean, got {other:?}"),
        }
    }

    #[test]
    fn five_point_symbol_matches_stencil() {
        let g = grid(64);
        let f = g.from_fn(|p| (2.0 * PI * (3.0 * p.x + p.y)).sin() + 0.3 * (2.0 * PI * p.y).cos());
        let direct = laplacian_with(&f, Stencil::FivePoint);
        let spectral = ScalarField::from_values_unchecked(
            &g,
            g.apply_multiplier(f.values(), |kx, ky| g.symbol(Stencil::FivePoint, kx, ky)),
        );
        assert!(direct.zip_map(&spectral, |a, b| a - b).sup_norm() < 1e-10);
    }

    #[test]
    fn translation_equivariance() {
        let g = grid(64);
        let f = g.from_fn(|p| (2.0 * PI * p.x).sin() * (2.0 * PI * 2.0 * p.y).cos() + p.x * 0.0);
        let shifted = f.translated(5, -3);
        let a = laplacian(&shifted);
        let b = laplacian(&f).translated(5, -3);
        assert!(a.zip_map(&b, |x, y| x - y).sup_norm() < 1e-12 * b.sup_norm());
    }

    #[test]
    fn point_wrap_and_distance() {
        let p = Point::new(0.95, 0.02);
        let q = Point::new(0.05, 0.98);
        assert!((p.distance(&q) - (0.1f64.hypot(0.04))).abs() < 1e-14);
        assert_eq!(Point::new(-0.25, 1.25), Point { x: 0.75, y: 0.25 });
    }
}
