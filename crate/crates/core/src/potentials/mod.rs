//! Quasi-subharmonic potentials with logarithmic poles.
//!
//! `ψ(z) = Σ ν_k·G_{a_k}(z) + smooth(z)`; every pole of one potential carries
//! the same sign, `ψ₊` poles make the density vanish and `ψ₋` poles make it
//! blow up.

mod counterexample;
pub(crate) mod density;
pub(crate) mod normalization;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use counterexample::{counterexample_density, CounterexampleDensity};
pub use density::{cell_averaged_density, log_density, truncated_log_density};
pub use normalization::{normalization_constant, truncated_pole_mass};

use crate::error::{Error, Result};
use crate::green::GreenFunction;
use crate::interp::interpolate;
use crate::torus::{laplacian, Point, ScalarField, TorusGrid};

/// Stiffness of the soft-max used by truncation ladders.
pub const TRUNCATION_STIFFNESS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "plus"),
            Sign::Minus => write!(f, "minus"),
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            other => Err(Error::InvalidInput(format!(
                "pole sign must be \"plus\" or \"minus\", got \"{other}\""
            ))),
        }
    }
}

/// A logarithmic pole: location, Lelong number and sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleSpec {
    pub location: Point,
    pub lelong: f64,
    pub sign: Sign,
}

impl PoleSpec {
    pub fn new(x: f64, y: f64, lelong: f64, sign: Sign) -> Self {
        PoleSpec {
            location: Point::new(x, y),
            lelong,
            sign,
        }
    }

    /// Exponent of `r` in the density `e^{ψ₊−ψ₋}` near this pole.
    pub fn density_exponent(&self) -> f64 {
        match self.sign {
            Sign::Plus => self.lelong,
            Sign::Minus => -self.lelong,
        }
    }
}

/// Reject minus-poles with Lelong number at least 2.
pub fn check_no_cusp(poles: &[PoleSpec]) -> Result<()> {
    for p in poles {
        if p.sign == Sign::Minus && p.lelong >= 2.0 {
            return Err(Error::Cusp {
                nu: p.lelong,
                x: p.location.x,
                y: p.location.y,
            });
        }
    }
    Ok(())
}

/// Validate a pole list: positive Lelong numbers and distinct locations
/// separated by at least `8h`. Cusps are checked separately.
pub fn validate_poles(poles: &[PoleSpec], grid: &TorusGrid) -> Result<()> {
    for p in poles {
        if !(p.lelong.is_finite() && p.lelong > 0.0) {
            return Err(Error::InvalidPoles(format!(
                "Lelong number must be positive, got {} at {}",
                p.lelong, p.location
            )));
        }
    }
    let min_sep = 8.0 * grid.h();
    for (i, p) in poles.iter().enumerate() {
        for q in &poles[i + 1..] {
            let d = p.location.distance(&q.location);
            if d == 0.0 {
                return Err(Error::InvalidPoles(format!(
                    "two poles share the location {}",
                    p.location
                )));
            }
            if d < min_sep - 1e-12 {
                return Err(Error::InvalidPoles(format!(
                    "poles at {} and {} are {d:.5} apart, below 8h = {min_sep:.5}",
                    p.location, q.location
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
struct Inner {
    grid: TorusGrid,
    sign: Sign,
    poles: Vec<PoleSpec>,
    greens: Vec<GreenFunction>,
    smooth: ScalarField,
    has_smooth: bool,
    offset: f64,
}

/// `Σ ν_k G_{a_k} + smooth + offset`, evaluable exactly off the poles.
#[derive(Debug, Clone)]
pub struct SingularPotential {
    inner: Arc<Inner>,
}

impl SingularPotential {
    /// Potential with poles `(location, ν)` of one sign and an optional smooth residual.
    pub fn new(
        grid: &TorusGrid,
        sign: Sign,
        poles: &[(Point, f64)],
        smooth: Option<ScalarField>,
    ) -> Result<Self> {
        let specs: Vec<PoleSpec> = poles
            .iter()
            .map(|&(location, lelong)| PoleSpec {
                location,
                lelong,
                sign,
            })
            .collect();
        validate_poles(&specs, grid)?;
        let smooth = match smooth {
            Some(s) => {
                if s.grid() != grid {
                    return Err(Error::InvalidInput(
                        "smooth residual lives on a different grid".into(),
                    ));
                }
                s
            }
            None => grid.zeros(),
        };
        let greens = specs
            .iter()
            .map(|p| GreenFunction::new(grid, p.location))
            .collect();
        Ok(SingularPotential {
            inner: Arc::new(Inner {
                grid: grid.clone(),
                sign,
                poles: specs,
                greens,
                has_smooth: smooth.sup_norm() > 0.0,
                smooth,
                offset: 0.0,
            }),
        })
    }

    /// The identically zero potential.
    pub fn zero(grid: &TorusGrid, sign: Sign) -> Self {
        SingularPotential::new(grid, sign, &[], None).expect("no poles")
    }

    /// Potential built from a pole list, keeping only poles of the given sign.
    pub fn from_specs(grid: &TorusGrid, sign: Sign, specs: &[PoleSpec]) -> Result<Self> {
        let own: Vec<(Point, f64)> = specs
            .iter()
            .filter(|p| p.sign == sign)
            .map(|p| (p.location, p.lelong))
            .collect();
        SingularPotential::new(grid, sign, &own, None)
    }

    /// Same potential shifted by an additive constant.
    pub fn shifted(&self, k: f64) -> Self {
        let i = &self.inner;
        SingularPotential {
            inner: Arc::new(Inner {
                grid: i.grid.clone(),
                sign: i.sign,
                poles: i.poles.clone(),
                greens: i.greens.clone(),
                smooth: i.smooth.clone(),
                has_smooth: i.has_smooth,
                offset: i.offset + k,
            }),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.inner.grid
    }

    pub fn sign(&self) -> Sign {
        self.inner.sign
    }

    pub fn poles(&self) -> &[PoleSpec] {
        &self.inner.poles
    }

    pub fn smooth(&self) -> &ScalarField {
        &self.inner.smooth
    }

    pub fn is_trivial(&self) -> bool {
        self.inner.poles.is_empty() && self.inner.offset == 0.0 && !self.inner.has_smooth
    }

    /// Largest Lelong number among the poles (0 without poles).
    pub fn max_lelong(&self) -> f64 {
        self.inner
            .poles
            .iter()
            .map(|p| p.lelong)
            .fold(0.0, f64::max)
    }

    /// Constant `A` with `Δ̃ψ + A ≥ 0` away from the poles.
    pub fn quasi_psh_constant(&self) -> f64 {
        let nu: f64 = self.inner.poles.iter().map(|p| p.lelong).sum();
        let lap = laplacian(&self.inner.smooth);
        nu + (-lap.min()).max(0.0)
    }

    fn smooth_at(&self, z: &Point) -> f64 {
        let base = if self.inner.has_smooth {
            interpolate(&self.inner.smooth, z)
        } else {
            0.0
        };
        base + self.inner.offset
    }

    /// `ψ(z)`; `-∞` exactly at a pole.
    pub fn eval(&self, z: &Point) -> f64 {
        let mut v = self.smooth_at(z);
        for (p, g) in self.inner.poles.iter().zip(&self.inner.greens) {
            v += p.lelong * g.eval(z);
        }
        v
    }

    /// `ψ(z) − ν_k log|z − a_k|`, smooth near pole `k`.
    pub fn regular(&self, k: usize, z: &Point) -> f64 {
        let mut v = self.smooth_at(z);
        for (i, (p, g)) in self.inner.poles.iter().zip(&self.inner.greens).enumerate() {
            v += p.lelong * if i == k { g.regular(z) } else { g.eval(z) };
        }
        v
    }

    /// Soft-max truncation `max_s(ψ, −j)` evaluated at a point.
    pub fn truncated_eval(&self, z: &Point, level: f64) -> f64 {
        soft_max(self.eval(z), -level, TRUNCATION_STIFFNESS)
    }

    /// Values at the grid nodes, `-∞` at nodes that coincide with a pole.
    pub fn node_values(&self) -> Vec<f64> {
        let g = &self.inner.grid;
        (0..g.len()).map(|k| self.eval(&g.point(k))).collect()
    }
}

/// `log(e^{s a} + e^{s b}) / s`, stable for infinite arguments.
#[inline]
pub fn soft_max(a: f64, b: f64, s: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let lo = a.min(b);
    m + (s * (lo - m)).exp().ln_1p() / s
}

/// Level-`j` member of the decreasing truncation ladder of `ψ`.
pub fn truncate(psi: &SingularPotential, level: f64) -> ScalarField {
    assert!(level > 0.0, "truncation level must be positive");
    let vals = psi
        .node_values()
        .into_iter()
        .map(|v| soft_max(v, -level, TRUNCATION_STIFFNESS))
        .collect();
    ScalarField::from_values_unchecked(psi.grid(), vals)
}

/// Circle-mean slope estimate of a Lelong number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LelongEstimate {
    pub nu: f64,
    pub residual: f64,
}

/// Mean of `f` over the circle of radius `r` about `a`.
pub fn circle_mean(f: impl Fn(&Point) -> f64, a: &Point, r: f64) -> f64 {
    let m = 256;
    (0..m)
        .map(|k| {
            let th = 2.0 * PI * (k as f64 + 0.5) / m as f64;
            f(&a.offset(r * th.cos(), r * th.sin()))
        })
        .sum::<f64>()
        / m as f64
}

/// Least-squares slope of circle means against `log r` for `r ∈ {4h, 8h, 16h, 32h}`.
pub fn lelong_slope(f: impl Fn(&Point) -> f64, a: &Point, h: f64) -> LelongEstimate {
    let radii = [4.0 * h, 8.0 * h, 16.0 * h, 32.0 * h];
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = radii.iter().map(|&r| circle_mean(&f, a, r)).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        .sqrt();
    LelongEstimate {
        nu: slope,
        residual,
    }
}

/// Lelong number of `ψ` at `a`, rejecting probes whose circles reach another pole.
pub fn lelong_estimate(psi: &SingularPotential, a: &Point) -> Result<LelongEstimate> {
    let h = psi.grid().h();
    let reach = 32.0 * h + 4.0 * h;
    for p in psi.poles() {
        let d = p.location.distance(a);
        if d > 1e-12 && d < reach {
            return Err(Error::PolesTooClose { radius: 32.0 * h });
        }
    }
    Ok(lelong_slope(|z| psi.eval(z), a, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn zero_potential_evaluates_to_zero() {
        let g = grid(64);
        let psi = SingularPotential::zero(&g, Sign::Plus);
        assert_eq!(psi.eval(&Point::new(0.3, 0.7)), 0.0);
    }

    #[test]
    fn pole_value_and_near_field() {
        let g = grid(256);
        let a = Point::new(0.4, 0.6);
        let psi = SingularPotential::new(&g, Sign::Minus, &[(a, 0.5)], None).unwrap();
        assert_eq!(psi.eval(&a), f64::NEG_INFINITY);
        let one = SingularPotential::new(&g, Sign::Minus, &[(a, 1.0)], None).unwrap();
        let z = a.offset(1e-3, 0.0);
        let expect = 1e-3f64.ln() + 1.310_532_925_911_509_3;
        assert!((one.eval(&z) - expect).abs() < 1e-5);
    }

    #[test]
    fn truncation_examples() {
        assert!((soft_max(-10.0, -4.0, 4.0) + 4.0).abs() < (-24.0f64).exp());
        let g = grid(64);
        let zero = SingularPotential::zero(&g, Sign::Plus);
        let t = truncate(&zero, 2.0);
        assert!(t.sup_norm() <= (-4.0f64).exp());
    }

    #[test]
    fn lelong_locality() {
        let g = grid(1024);
        let a = Point::new(0.25, 0.25);
        let b = Point::new(0.7, 0.65);
        let psi = SingularPotential::new(&g, Sign::Minus, &[(a, 0.7), (b, 0.5)], None).unwrap();
        let est = lelong_estimate(&psi, &a).unwrap();
        assert!((est.nu - 0.7).abs() < 0.02, "{est:?}");
        let off = lelong_estimate(&psi, &Point::new(0.5, 0.1)).unwrap();
        assert!(off.nu.abs() < 0.02, "{off:?}");
    }

    #[test]
    fn rejects_cusp_and_crowding() {
        let g = grid(64);
        let cusp =
            SingularPotential::new(&g, Sign::Minus, &[(Point::new(0.5, 0.5), 2.1)], None).unwrap();
        let err = check_no_cusp(cusp.poles()).unwrap_err();
        assert!(err.to_string().starts_with("cusp"));
        let close = [(Point::new(0.5, 0.5), 0.5), (Point::new(0.52, 0.5), 0.5)];
        assert!(SingularPotential::new(&g, Sign::Plus, &close, None).is_err());
        let psi = SingularPotential::new(
            &grid(256),
            Sign::Plus,
            &[(Point::new(0.5, 0.5), 0.5), (Point::new(0.6, 0.5), 0.5)],
            None,
        )
        .unwrap();
        assert!(matches!(
            lelong_estimate(&psi, &Point::new(0.5, 0.5)),
            Err(Error::PolesTooClose { .. })
        ));
    }
}
