//! One-dimensional quadrature rules used by the length and mass integrals.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// ∫_a^b f for a rule normalized on `[0, 1]` (Legendre weight).
    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + len * x);
        }
        s * len
    }
}

/// Gauss–Legendre rule with `m` points on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> Rule {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    Rule { nodes, weights }
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached Gauss–Legendre rules for the sizes used in hot loops.
pub fn gl(m: usize) -> &'static Rule {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=64).map(gauss_legendre).collect());
    &rules[m - 1]
}

/// Gauss–Jacobi rule for `∫_0^1 x^γ f(x) dx`, `γ > -1`, via Golub–Welsch.
///
/// The returned weights already include the factor `x^γ`.
pub fn gauss_jacobi_left(m: usize, gamma: f64) -> Rule {
    assert!(gamma > -1.0, "weight exponent must exceed -1");
    let a = 0.0;
    let b = gamma;
    let mut jm = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        jm[(k, k)] = diag;
        if k + 1 < m {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + a + b;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            let off = (num / den).sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mu0 = 1.0 / (gamma + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let t = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (t + 1.0), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// `∫_0^ℓ s^γ f(s) ds` with a Gauss–Jacobi rule of `m` points.
pub fn integrate_power_weight(
    ell: f64,
    gamma: f64,
    m: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let rule = gauss_jacobi_left(m, gamma);
    let mut s = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += w * f(ell * x);
    }
    s * ell.powf(gamma + 1.0)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = hl * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * hl, (k - g).abs() * hl)
}

/// Adaptive Gauss–Kronrod (7/15) integration with bisection until the
/// estimated error is below `rel_tol` times the running total.
pub fn adaptive(a: f64, b: f64, rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = gk15(a, b, &mut f);
    if err <= rel_tol * whole.abs() || err < 1e-300 {
        return whole;
    }
    let mut stack = vec![(a, b, whole, err, 0u32)];
    let mut total: f64 = 0.0;
    let mut pending = whole;
    while let Some((lo, hi, est, e, depth)) = stack.pop() {
        if e <= rel_tol * pending.abs().max(total.abs()) || depth >= 48 {
            total += est;
            pending -= est;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (l, el) = gk15(lo, mid, &mut f);
        let (r, er) = gk15(mid, hi, &mut f);
        pending += l + r - est;
        stack.push((lo, mid, l, el, depth + 1));
        stack.push((mid, hi, r, er, depth + 1));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let r = gauss_legendre(8);
        let v = r.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_integrates_singular_weight() {
        // ∫_0^1 x^{-0.6} (1 + x²) dx = 1/0.4 + 1/2.4
        let v = integrate_power_weight(1.0, -0.6, 12, |x| 1.0 + x * x);
        assert!((v - (1.0 / 0.4 + 1.0 / 2.4)).abs() < 1e-13, "{v}");
        // ∫_0^2 x^{0.5} e^x dx against adaptive on the smooth substitution x = s²
        let w = integrate_power_weight(2.0, 0.5, 20, f64::exp);
        let reference = adaptive(0.0, 2f64.sqrt(), 1e-14, |s| 2.0 * s * s * (s * s).exp());
        assert!((w - reference).abs() < 1e-12 * reference);
    }

    #[test]
    fn adaptive_handles_near_singularity() {
        let d: f64 = 1e-4;
        let v = adaptive(-1.0, 1.0, 1e-10, |x| 1.0 / (x * x + d * d));
        let exact = 2.0 * (1.0 / d).atan() / d;
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
    }
}
