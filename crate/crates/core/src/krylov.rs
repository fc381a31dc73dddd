//! Full GMRES with modified Gram-Schmidt and one conditional reorthogonalization pass.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GmresReport {
    pub iterations: usize,
    /// Relative residual after each iteration, starting with 1 at iteration 0.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub wall_s: f64,
    /// Wall time spent inside the operator.
    pub matvec_s: f64,
}

impl GmresReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve A x = b from x = 0. Returns the best iterate; `converged` is false when
/// `max_iter` is reached first.
pub fn gmres(
    mut apply: impl FnMut(&[C64]) -> Vec<C64>,
    rhs: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, GmresReport)> {
    if !(tol > 0.0) {
        return Err(Error::invalid("GMRES tolerance must be positive"));
    }
    let start = Instant::now();
    let n = rhs.len();
    let mut report = GmresReport { residuals: vec![1.0], ..Default::default() };
    let beta = norm(rhs);
    if beta == 0.0 {
        report.converged = true;
        report.residuals.clear();
        report.wall_s = start.elapsed().as_secs_f64();
        return Ok((vec![C64::new(0.0, 0.0); n], report));
    }
    let mut basis: Vec<Vec<C64>> = vec![rhs.iter().map(|z| z / beta).collect()];
    // Hessenberg columns after rotation (upper triangular R)
    let mut r: Vec<Vec<C64>> = Vec::new();
    let mut rot: Vec<(C64, C64)> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut matvec_s = 0.0;
    for k in 0..max_iter.min(n) {
        let t = Instant::now();
        let mut w = apply(&basis[k]);
        matvec_s += t.elapsed().as_secs_f64();
        let wnorm0 = norm(&w);
        let mut h = vec![C64::new(0.0, 0.0); k + 2];
        for (i, v) in basis.iter().enumerate() {
            let c = dotc(v, &w);
            h[i] = c;
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
        if norm(&w) < 0.7 * wnorm0 {
            for (i, v) in basis.iter().enumerate() {
                let c = dotc(v, &w);
                h[i] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        let hn = norm(&w);
        h[k + 1] = C64::new(hn, 0.0);
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c.conj() * a + s.conj() * b;
            h[i + 1] = -s * a + c * b;
        }
        let (a, b) = (h[k], h[k + 1]);
        let den = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if den == 0.0 {
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (a / den, b / den)
        };
        h[k] = C64::new(den, 0.0);
        h[k + 1] = C64::new(0.0, 0.0);
        rot.push((c, s));
        let gk = g[k];
        g[k] = c.conj() * gk;
        g.push(-s * gk);
        h.truncate(k + 1);
        r.push(h);
        let res = g[k + 1].norm() / beta;
        report.residuals.push(res);
        report.iterations = k + 1;
        let breakdown = hn <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE);
        if res <= tol || breakdown {
            report.converged = res <= tol || breakdown;
            break;
        }
        basis.push(w.iter().map(|z| z / hn).collect());
    }
    // back substitution
    let m = r.len();
    let mut y = vec![C64::new(0.0, 0.0); m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= r[j][i] * y[j];
        }
        y[i] = if r[i][i].norm() > 0.0 { s / r[i][i] } else { C64::new(0.0, 0.0) };
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (yi, v) in y.iter().zip(&basis) {
        x.iter_mut().zip(v).for_each(|(a, b)| *a += yi * b);
    }
    report.matvec_s = matvec_s;
    report.wall_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}
