//! Geometric multigrid for `(diag(d) − β·L) x = b` on the periodic grid,
//! `L` the five-point `Δ̃`. Used as a symmetric preconditioner for CG.

use std::f64::consts::PI;

struct Level {
    n: usize,
    diag: Vec<f64>,
    coupling: f64,
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

pub(crate) struct Multigrid {
    levels: Vec<Level>,
}

#[inline]
fn nb_sum(v: &[f64], n: usize, i: usize, j: usize) -> f64 {
    let ip = if i + 1 == n { 0 } else { i + 1 };
    let im = if i == 0 { n - 1 } else { i - 1 };
    let jp = if j + 1 == n { 0 } else { j + 1 };
    let jm = if j == 0 { n - 1 } else { j - 1 };
    v[j * n + ip] + v[j * n + im] + v[jp * n + i] + v[jm * n + i]
}

impl Level {
    fn smooth(&mut self, colours: [usize; 2]) {
        let n = self.n;
        let c = self.coupling;
        for colour in colours {
            for j in 0..n {
                let start = (colour + j) % 2;
                for i in (start..n).step_by(2) {
                    let k = j * n + i;
                    let s = nb_sum(&self.x, n, i, j);
                    self.x[k] = (self.b[k] + c * s) / (self.diag[k] + 4.0 * c);
                }
            }
        }
    }

    fn residual(&mut self) {
        let n = self.n;
        let c = self.coupling;
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let ax = (self.diag[k] + 4.0 * c) * self.x[k] - c * nb_sum(&self.x, n, i, j);
                self.r[k] = self.b[k] - ax;
            }
        }
    }
}

/// Full weighting from a fine grid of size `2m` to `m`.
fn restrict(fine: &[f64], n: usize, out: &mut [f64]) {
    let m = n / 2;
    for jc in 0..m {
        for ic in 0..m {
            let (i, j) = (2 * ic, 2 * jc);
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            let f = |a: usize, b: usize| fine[b * n + a];
            out[jc * m + ic] = (4.0 * f(i, j)
                + 2.0 * (f(ip, j) + f(im, j) + f(i, jp) + f(i, jm))
                + f(ip, jp)
                + f(im, jp)
                + f(ip, jm)
                + f(im, jm))
                / 16.0;
        }
    }
}

/// Bilinear interpolation from size `m` to `2m`, added into `fine`.
fn prolong_add(coarse: &[f64], m: usize, fine: &mut [f64]) {
    let n = 2 * m;
    for j in 0..n {
        let (j0, j1, wy) = if j % 2 == 0 {
            (j / 2, j / 2, 1.0)
        } else {
            (j / 2, (j / 2 + 1) % m, 0.5)
        };
        for i in 0..n {
            let (i0, i1, wx) = if i % 2 == 0 {
                (i / 2, i / 2, 1.0)
            } else {
                (i / 2, (i / 2 + 1) % m, 0.5)
            };
            let c = |a: usize, b: usize| coarse[b * m + a];
            let v = if wx == 1.0 && wy == 1.0 {
                c(i0, j0)
            } else if wy == 1.0 {
                0.5 * (c(i0, j0) + c(i1, j0))
            } else if wx == 1.0 {
                0.5 * (c(i0, j0) + c(i0, j1))
            } else {
                0.25 * (c(i0, j0) + c(i1, j0) + c(i0, j1) + c(i1, j1))
            };
            fine[j * n + i] += v;
        }
    }
}

impl Multigrid {
    /// Hierarchy for `diag(d) − β·L` with `L` the five-point `Δ̃` at spacing `1/n`.
    pub(crate) fn new(n: usize, diag: &[f64], beta: f64) -> Self {
        let mut levels = Vec::new();
        let mut size = n;
        let mut d = diag.to_vec();
        loop {
            let h = 1.0 / size as f64;
            levels.push(Level {
                n: size,
                coupling: beta / (2.0 * PI * h * h),
                x: vec![0.0; size * size],
                b: vec![0.0; size * size],
                r: vec![0.0; size * size],
                diag: d.clone(),
            });
            if size <= 8 {
                break;
            }
            let mut dc = vec![0.0; size * size / 4];
            restrict(&d, size, &mut dc);
            d = dc;
            size /= 2;
        }
        Multigrid { levels }
    }

    /// One symmetric V-cycle applied to `b` from a zero initial guess.
    pub(crate) fn apply(&mut self, b: &[f64], out: &mut [f64]) {
        self.levels[0].b.copy_from_slice(b);
        self.vcycle(0);
        out.copy_from_slice(&self.levels[0].x);
    }

    fn vcycle(&mut self, l: usize) {
        let last = self.levels.len() - 1;
        {
            let lv = &mut self.levels[l];
            lv.x.iter_mut().for_each(|v| *v = 0.0);
            if l == last {
                for _ in 0..40 {
                    lv.smooth([0, 1]);
                    lv.smooth([1, 0]);
                }
                return;
            }
            lv.smooth([0, 1]);
            lv.smooth([0, 1]);
            lv.residual();
        }
        let (head, tail) = self.levels.split_at_mut(l + 1);
        let fine = &head[l];
        let coarse = &mut tail[0];
        restrict(&fine.r, fine.n, &mut coarse.b);
        self.vcycle(l + 1);
        let (head, tail) = self.levels.split_at_mut(l + 1);
        let fine = &mut head[l];
        prolong_add(&tail[0].x, tail[0].n, &mut fine.x);
        fine.smooth([1, 0]);
        fine.smooth([1, 0]);
    }
}

/// Preconditioned CG for `(diag(d) − β·L) x = b`. Returns the iteration count,
/// or `None` without convergence to `rel_tol` in the sup-norm.
pub(crate) fn solve(
    n: usize,
    diag: &[f64],
    beta: f64,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
) -> Option<usize> {
    let len = n * n;
    let coupling = beta / (2.0 * PI / (n * n) as f64);
    let apply_a = |v: &[f64], out: &mut [f64]| {
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                out[k] = (diag[k] + 4.0 * coupling) * v[k] - coupling * nb_sum(v, n, i, j);
            }
        }
    };
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v = 0.0);
    if bnorm == 0.0 {
        return Some(0);
    }
    let mut mg = Multigrid::new(n, diag, beta);
    let mut r = b.to_vec();
    let mut z = vec![0.0; len];
    mg.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=200 {
        apply_a(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return None;
        }
        let alpha = rz / pap;
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rnorm <= rel_tol * bnorm {
            return Some(it);
        }
        mg.apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let gamma = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + gamma * p[k];
        }
    }
    None
}
