use std::f64::consts::PI;

use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi_left, gl};
use crate::torus::{Point, TorusGrid};

use super::{check_no_cusp, validate_poles, PoleSpec, Sign, SingularPotential};

const ANGLES: usize = 128;
const JACOBI_POINTS: usize = 24;
const RING_PANELS: usize = 8;
const RING_POINTS: usize = 20;

/// A pole of the pair `(ψ₊, ψ₋)` with its index inside its own potential.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairPole {
    pub spec: PoleSpec,
    pub index: usize,
}

pub(crate) fn pair_poles(plus: &SingularPotential, minus: &SingularPotential) -> Vec<PairPole> {
    let tag = |psi: &SingularPotential, sign: Sign| {
        psi.poles()
            .iter()
            .enumerate()
            .map(move |(index, p)| PairPole {
                spec: PoleSpec { sign, ..*p },
                index,
            })
            .collect::<Vec<_>>()
    };
    let mut all = tag(plus, Sign::Plus);
    all.extend(tag(minus, Sign::Minus));
    all
}

/// `ψ₊(z) − ψ₋(z) − β log|z − a|` for the pole `a`, smooth near `a`.
pub(crate) fn regular_log_density(
    plus: &SingularPotential,
    minus: &SingularPotential,
    pole: &PairPole,
    z: &Point,
) -> f64 {
    match pole.spec.sign {
        Sign::Plus => plus.regular(pole.index, z) - minus.eval(z),
        Sign::Minus => plus.eval(z) - minus.regular(pole.index, z),
    }
}

/// Radius of the exclusive disk around each pole used by the quadratures.
pub(crate) fn pole_disk_radius(poles: &[PairPole]) -> f64 {
    let mut sep = f64::INFINITY;
    for (i, p) in poles.iter().enumerate() {
        for q in &poles[i + 1..] {
            sep = sep.min(p.spec.location.distance(&q.spec.location));
        }
    }
    (0.5 * sep).min(0.125)
}

fn check_pair(plus: &SingularPotential, minus: &SingularPotential) -> Result<Vec<PairPole>> {
    if plus.grid() != minus.grid() {
        return Err(Error::InvalidInput(
            "ψ₊ and ψ₋ live on different grids".into(),
        ));
    }
    let poles = pair_poles(plus, minus);
    let specs: Vec<PoleSpec> = poles.iter().map(|p| p.spec).collect();
    check_no_cusp(&specs)?;
    validate_poles(&specs, plus.grid())?;
    Ok(poles)
}

/// `c = −log ∫ e^{ψ₊−ψ₋} dA`, so that `e^{ψ₊−ψ₋+c}` has unit mass.
///
/// Each pole gets a polar quadrature with the exact `r^β` weight on an inner
/// disk and a smooth partition of unity joining it to a periodic grid sum.
pub fn normalization_constant(plus: &SingularPotential, minus: &SingularPotential) -> Result<f64> {
    let poles = check_pair(plus, minus)?;
    if poles.is_empty() && plus.is_trivial() && minus.is_trivial() {
        return Ok(0.0);
    }
    let log_f = |z: &Point| plus.eval(z) - minus.eval(z);
    if poles.is_empty() {
        let n = plus.grid().n().max(512);
        let g = TorusGrid::new_unchecked(n);
        let s: f64 = (0..g.len()).map(|k| log_f(&g.point(k)).exp()).sum();
        return Ok(-(s / g.len() as f64).ln());
    }
    let rho = pole_disk_radius(&poles);
    let bump = Cutoff::new(0.25 * rho, rho);

    let mut total = 0.0;
    for pole in &poles {
        total += pole_part(plus, minus, pole, &bump);
    }

    let cells = (32.0 / (0.75 * rho)).ceil() as usize;
    let n = cells
        .next_power_of_two()
        .clamp(1024, 4096)
        .max(plus.grid().n());
    let g = TorusGrid::new_unchecked(n);
    let mut outer = 0.0;
    for k in 0..g.len() {
        let z = g.point(k);
        let mut w = 1.0;
        for p in &poles {
            let r = p.spec.location.distance(&z);
            if r < rho {
                w -= bump.value(r);
            }
        }
        if w > 0.0 {
            outer += w * log_f(&z).exp();
        }
    }
    total += outer * g.cell_area();
    Ok(-total.ln())
}

fn pole_part(
    plus: &SingularPotential,
    minus: &SingularPotential,
    pole: &PairPole,
    bump: &Cutoff,
) -> f64 {
    let a = pole.spec.location;
    let beta = pole.spec.density_exponent();
    let jac = gauss_jacobi_left(JACOBI_POINTS, beta + 1.0);
    let ring = gl(RING_POINTS);
    let r_in = bump.inner;
    let width = (bump.outer - bump.inner) / RING_PANELS as f64;
    let mut sum = 0.0;
    for m in 0..ANGLES {
        let th = 2.0 * PI * (m as f64 + 0.5) / ANGLES as f64;
        let (c, s) = (th.cos(), th.sin());
        let mut line = 0.0;
        for (x, w) in jac.nodes.iter().zip(&jac.weights) {
            let r = r_in * x;
            let z = a.offset(r * c, r * s);
            line += w * regular_log_density(plus, minus, pole, &z).exp();
        }
        line *= r_in.powf(beta + 2.0);
        for panel in 0..RING_PANELS {
            let lo = r_in + width * panel as f64;
            line += ring.integrate(lo, lo + width, |r| {
                let z = a.offset(r * c, r * s);
                bump.value(r) * r * (plus.eval(&z) - minus.eval(&z)).exp()
            });
        }
        sum += line;
    }
    sum * 2.0 * PI / ANGLES as f64
}

/// `∫_{ε < |z−a| < ρ} χ·e^{ψ₊−ψ₋} dA` about pole `k` of the pair, with no
/// singular weighting, so the value can be followed as `ε → 0` for any
/// Lelong number. Minus-pole indices follow the plus-poles.
pub fn truncated_pole_mass(
    plus: &SingularPotential,
    minus: &SingularPotential,
    k: usize,
    eps: f64,
) -> f64 {
    let poles = pair_poles(plus, minus);
    let pole = poles[k];
    let rho = pole_disk_radius(&poles);
    let bump = Cutoff::new(0.25 * rho, rho);
    let a = pole.spec.location;
    let rule = gl(8);
    let (s_lo, s_hi) = (eps.ln(), rho.ln());
    let panels = ((s_hi - s_lo) / 0.5).ceil().max(1.0) as usize;
    let width = (s_hi - s_lo) / panels as f64;
    let mut sum = 0.0;
    for m in 0..ANGLES {
        let th = 2.0 * PI * (m as f64 + 0.5) / ANGLES as f64;
        let (c, s) = (th.cos(), th.sin());
        for p in 0..panels {
            let lo = s_lo + width * p as f64;
            sum += rule.integrate(lo, lo + width, |t| {
                let r = t.exp();
                let z = a.offset(r * c, r * s);
                bump.value(r) * r * r * (plus.eval(&z) - minus.eval(&z)).exp()
            });
        }
    }
    sum * 2.0 * PI / ANGLES as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_pair_is_normalized() {
        let g = TorusGrid::new(64).unwrap();
        let z = SingularPotential::zero(&g, Sign::Plus);
        let m = SingularPotential::zero(&g, Sign::Minus);
        assert_eq!(normalization_constant(&z, &m).unwrap(), 0.0);
    }

    #[test]
    fn single_minus_pole_matches_reference() {
        let g = TorusGrid::new(256).unwrap();
        let plus = SingularPotential::zero(&g, Sign::Plus);
        for (nu, c_ref) in [
            (1.0, -0.125_255_211_623_386_19),
            (0.8, -0.070_617_857_378_560_66),
        ] {
            let minus =
                SingularPotential::new(&g, Sign::Minus, &[(Point::new(0.5, 0.5), nu)], None)
                    .unwrap();
            let c = normalization_constant(&plus, &minus).unwrap();
            assert!((c - c_ref).abs() < 1e-9, "nu {nu}: {c} vs {c_ref}");
        }
    }
}
