//! Smooth radial cutoffs.

/// C^∞ step: 0 for `s ≤ 0`, 1 for `s ≥ 1`, with first and second derivatives.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let t = 1.0 - s;
    let p = (-1.0 / s).exp();
    let q = (-1.0 / t).exp();
    let dp = p / (s * s);
    let dq = -q / (t * t);
    let ddp = p * (1.0 / s.powi(4) - 2.0 / s.powi(3));
    let ddq = q * (1.0 / t.powi(4) - 2.0 / t.powi(3));
    let d = p + q;
    let dd = dp + dq;
    let num = dp * q - p * dq;
    let dnum = ddp * q - p * ddq;
    let v = p / d;
    let v1 = num / (d * d);
    let v2 = (dnum * d - 2.0 * num * dd) / (d * d * d);
    (v, v1, v2)
}

/// Radial cutoff equal to 1 on `r ≤ inner`, 0 on `r ≥ outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(0.0 < inner && inner < outer);
        Cutoff { inner, outer }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        self.with_derivatives(r).0
    }

    /// `(χ, χ', χ'')` at radius `r`.
    #[inline]
    pub fn with_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let (v, d1, d2) = smooth_step((r - self.inner) / w);
        (1.0 - v, -d1 / w, -d2 / (w * w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let c = Cutoff::new(0.125, 0.25);
        for k in 1..40 {
            let r = 0.125 + 0.125 * k as f64 / 40.0;
            let e = 1e-5;
            let (_, d1, d2) = c.with_derivatives(r);
            let fd1 = (c.value(r + e) - c.value(r - e)) / (2.0 * e);
            let fd2 = (c.value(r + e) - 2.0 * c.value(r) + c.value(r - e)) / (e * e);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()));
        }
        assert_eq!(c.value(0.1), 1.0);
        assert_eq!(c.value(0.3), 0.0);
    }
}
