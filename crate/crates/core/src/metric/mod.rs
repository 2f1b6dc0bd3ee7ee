//! Lengths and distances of conformal metrics `e^{u}·(flat)` on the torus,
//! including the singular metric `e^{ψ₊−ψ₋+c}` with cone and cusp points.

mod eikonal;
mod holder;
mod lattice;
mod length;

pub use eikonal::{dt_distance, eikonal_distance, SEED_RADIUS};
pub use holder::{holder_fit, holder_fit_values, sup_discrepancy, Envelope, HolderFit};
pub use lattice::{lattice_distance, LATTICE_ANISOTROPY, LATTICE_STEPS};
pub use length::{curve_length, segment_length};

use std::fmt;

use crate::error::{Error, Result};
use crate::interp::interpolate;
use crate::potentials::density::cell_average;
use crate::potentials::normalization::{pair_poles, PairPole};
use crate::potentials::{check_no_cusp, normalization_constant, PoleSpec, Sign, SingularPotential};
use crate::torus::{Point, ScalarField, TorusGrid};

/// Log-conformal factor `u` of a metric.
#[derive(Debug, Clone)]
pub enum LogFactor {
    /// Grid values, interpolated off the nodes.
    Field(ScalarField),
    /// `ψ₊ − ψ₋ + c`.
    Singular {
        plus: SingularPotential,
        minus: SingularPotential,
        c: f64,
    },
}

/// The metric `e^{u}·(flat)`, with length element `e^{u/2}|dz|`.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    factor: LogFactor,
    poles: Vec<PairPole>,
}

impl ConformalMetric {
    pub fn flat(grid: &TorusGrid) -> Self {
        Self::from_field(grid.zeros())
    }

    pub fn from_field(u: ScalarField) -> Self {
        ConformalMetric {
            factor: LogFactor::Field(u),
            poles: Vec::new(),
        }
    }

    /// Unit-area singular metric `e^{ψ₊−ψ₋+c}`.
    pub fn singular(plus: &SingularPotential, minus: &SingularPotential) -> Result<Self> {
        let c = normalization_constant(plus, minus)?;
        Self::singular_with_constant(plus, minus, c)
    }

    pub fn singular_with_constant(
        plus: &SingularPotential,
        minus: &SingularPotential,
        c: f64,
    ) -> Result<Self> {
        if plus.grid() != minus.grid() {
            return Err(Error::InvalidInput(
                "ψ₊ and ψ₋ live on different grids".into(),
            ));
        }
        let poles = pair_poles(plus, minus);
        check_no_cusp(&poles.iter().map(|p| p.spec).collect::<Vec<_>>())?;
        Ok(ConformalMetric {
            factor: LogFactor::Singular {
                plus: plus.clone(),
                minus: minus.clone(),
                c,
            },
            poles,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        match &self.factor {
            LogFactor::Field(u) => u.grid(),
            LogFactor::Singular { plus, .. } => plus.grid(),
        }
    }

    pub fn factor(&self) -> &LogFactor {
        &self.factor
    }

    pub fn poles(&self) -> Vec<PoleSpec> {
        self.poles.iter().map(|p| p.spec).collect()
    }

    pub(crate) fn pair_poles(&self) -> &[PairPole] {
        &self.poles
    }

    pub fn describe(&self) -> String {
        match &self.factor {
            LogFactor::Field(_) => "field".into(),
            LogFactor::Singular { c, .. } => {
                let mut s = format!("singular c={c:.12e}");
                for p in &self.poles {
                    s.push_str(&format!(
                        " {}({:.6},{:.6};{})",
                        p.spec.sign, p.spec.location.x, p.spec.location.y, p.spec.lelong
                    ));
                }
                s
            }
        }
    }

    /// `u(z)`; `±∞` exactly at a pole.
    pub fn log_factor(&self, z: &Point) -> f64 {
        match &self.factor {
            LogFactor::Field(u) => interpolate(u, z),
            LogFactor::Singular { plus, minus, c } => plus.eval(z) - minus.eval(z) + c,
        }
    }

    /// `u − β log r` near the pole `k`, where `β` is its density exponent.
    pub(crate) fn regular_factor(&self, k: usize, z: &Point) -> f64 {
        match &self.factor {
            LogFactor::Field(u) => interpolate(u, z),
            LogFactor::Singular { plus, minus, c } => {
                let pole = &self.poles[k];
                let r = match pole.spec.sign {
                    Sign::Plus => plus.regular(pole.index, z) - minus.eval(z),
                    Sign::Minus => plus.eval(z) - minus.regular(pole.index, z),
                };
                r + c
            }
        }
    }

    /// `u(z)` given the exact distance `r` from `z` to the pole `k`.
    pub(crate) fn log_factor_near(&self, k: usize, r: f64, z: &Point) -> f64 {
        self.poles[k].spec.density_exponent() * r.ln() + self.regular_factor(k, z)
    }

    /// Node values of `u`, averaged as `2 log mean e^{u/2}` over the cell for
    /// nodes within two cells of a pole.
    pub fn node_slowness(&self) -> ScalarField {
        match &self.factor {
            LogFactor::Field(u) => u.map(|v| (0.5 * v).exp()),
            LogFactor::Singular { plus, minus, c } => {
                let grid = plus.grid();
                let mut vals: Vec<f64> = plus
                    .node_values()
                    .iter()
                    .zip(minus.node_values())
                    .map(|(p, m)| (0.5 * (p - m + c)).exp())
                    .collect();
                let h = grid.h();
                for (k, pole) in self.poles.iter().enumerate() {
                    let a = pole.spec.location;
                    let centre = grid.nearest_node(&a);
                    let log_f = |z: &Point| 0.5 * self.log_factor(z);
                    let near = |r: f64, z: &Point| 0.5 * self.log_factor_near(k, r, z);
                    for dj in -2..=2 {
                        for di in -2..=2 {
                            let idx = grid.shifted(centre, di, dj);
                            vals[idx] = cell_average(&log_f, &near, a, &grid.point(idx), h);
                        }
                    }
                }
                ScalarField::from_values_unchecked(grid, vals)
            }
        }
    }
}

/// Curve through ordered points; each segment runs along the shortest
/// displacement between consecutive points, wrapping across the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    length: f64,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "a polyline needs at least two points".into(),
            ));
        }
        let mut length = 0.0;
        for w in points.windows(2) {
            let d = w[0].distance(&w[1]);
            if d == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "consecutive polyline points coincide at ({}, {})",
                    w[0].x, w[0].y
                )));
            }
            length += d;
        }
        Ok(Polyline { points, length })
    }

    pub fn segment(a: Point, b: Point) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Flat length `L`.
    pub fn flat_length(&self) -> f64 {
        self.length
    }

    /// `(start, displacement)` of each segment.
    pub fn segments(&self) -> impl Iterator<Item = (Point, (f64, f64))> + '_ {
        self.points
            .windows(2)
            .map(|w| (w[0], w[0].displacement_to(&w[1])))
    }

    /// Point at flat arc length `s ∈ [0, L]`.
    pub fn point_at(&self, s: f64) -> Point {
        let mut left = s.clamp(0.0, self.length);
        for (p, (dx, dy)) in self.segments() {
            let l = dx.hypot(dy);
            if left <= l {
                let t = left / l;
                return p.offset(t * dx, t * dy);
            }
            left -= l;
        }
        *self.points.last().unwrap()
    }
}

/// How a distance field was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LatticeOracle,
    Eikonal,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LatticeOracle => "lattice-oracle",
            Method::Eikonal => "eikonal",
        })
    }
}

/// Distance from one source to every node.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source: Point,
    pub values: ScalarField,
    pub metric: String,
    pub method: Method,
}

impl DistanceField {
    pub fn at(&self, node: usize) -> f64 {
        self.values.values()[node]
    }
}

/// Flat distance from `source` to every node.
pub fn flat_distance(grid: &TorusGrid, source: &Point) -> ScalarField {
    grid.from_fn(|p| source.distance(&p))
}
