//! Panel quadrature: product-integration weights for log-singular kernels,
//! split rules for the |t - s| kink of the exponential kernel, and an adaptive
//! Gauss-Kronrod integrator used as a test oracle.

use crate::error::{Error, Result};
use crate::geom::{Panel, NODES_PER_PANEL};
use crate::specfun::{gauss_legendre, legendre_all, LegendreBasis};
use num_complex::Complex64 as C64;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

const N: usize = NODES_PER_PANEL;

/// Targets farther than this (in reference coordinates) should use the smooth rule.
pub const MAX_NEAR_REF_DISTANCE: f64 = 9.0;

/// I_k = ∫_{-1}^{1} log|x0 - x| P_k(x) dx for k = 0..n-1.
pub fn log_moments(x0: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let ax = x0.abs();
    if ax == 1.0 {
        // ∫ log(1 - x) P_k = -2 / (k (k+1)) for k ≥ 1
        out[0] = 2.0 * std::f64::consts::LN_2 - 2.0;
        for (k, v) in out.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let sign = if x0 < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            *v = sign * -2.0 / (kf * (kf + 1.0));
        }
        return out;
    }
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.abs().ln() };
    out[0] = xlogx(1.0 + x0) + xlogx(1.0 - x0) - 2.0;
    if n == 1 {
        return out;
    }
    let q = cauchy_moments(x0, n + 1);
    for k in 1..n {
        out[k] = (q[k + 1] - q[k - 1]) / (2 * k + 1) as f64;
    }
    out
}

/// q_k = PV ∫_{-1}^{1} P_k(x) / (x0 - x) dx for k = 0..n-1.
fn cauchy_moments(x0: f64, n: usize) -> Vec<f64> {
    let q0 = ((x0 + 1.0) / (x0 - 1.0)).abs().ln();
    let mut q = vec![0.0; n];
    q[0] = q0;
    if n == 1 {
        return q;
    }
    if x0.abs() <= 1.01 {
        q[1] = x0 * q0 - 2.0;
        for k in 1..n - 1 {
            let kf = k as f64;
            q[k + 1] = ((2.0 * kf + 1.0) * x0 * q[k] - kf * q[k - 1]) / (kf + 1.0);
        }
        return q;
    }
    // Miller's backward recurrence for the minimal solution outside [-1, 1]
    let top = n + 16 + (40.0 / x0.abs().acosh()).ceil() as usize;
    let mut v = vec![0.0; top + 2];
    v[top] = 1.0;
    for k in (1..=top).rev() {
        let kf = k as f64;
        v[k - 1] = ((2.0 * kf + 1.0) * x0 * v[k] - (kf + 1.0) * v[k + 1]) / kf;
        if v[k - 1].abs() > 1e200 {
            for x in v[k - 1..].iter_mut() {
                *x *= 1e-200;
            }
        }
    }
    let scale = q0 / v[0];
    for (qk, vk) in q.iter_mut().zip(&v) {
        *qk = vk * scale;
    }
    q
}

/// Weights W such that Σ W_ℓ p(t_ℓ) = ∫_panel p(s) log|t - s| ds for deg p ≤ 15,
/// where t_ℓ are the panel's Gauss-Legendre nodes.
pub fn log_corrected_weights(panel: &Panel, t: f64) -> Result<[f64; N]> {
    let half = 0.5 * panel.len();
    let x0 = panel.unmap(t);
    if !(x0.abs() <= MAX_NEAR_REF_DISTANCE) {
        return Err(Error::Quadrature(format!(
            "target {t} too far from panel [{}, {}] for log correction",
            panel.a, panel.b
        )));
    }
    let basis = LegendreBasis::cached(N);
    let mut m = log_moments(x0, N);
    m[0] += 2.0 * half.ln();
    let mut w = [0.0; N];
    for (l, wl) in w.iter_mut().enumerate() {
        let s: f64 = (0..N)
            .map(|k| (2 * k + 1) as f64 * 0.5 * basis.p(l, k) * m[k])
            .sum();
        *wl = basis.weights[l] * half * s;
    }
    Ok(w)
}

fn bary_weights() -> &'static [f64; N] {
    static W: OnceLock<[f64; N]> = OnceLock::new();
    W.get_or_init(|| {
        let b = LegendreBasis::cached(N);
        let mut w = [0.0; N];
        for i in 0..N {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            w[i] = sign * ((1.0 - b.nodes[i] * b.nodes[i]) * b.weights[i]).sqrt();
        }
        w
    })
}

/// Values of the 16 Lagrange basis polynomials on the Gauss-Legendre nodes at x.
pub fn lagrange16(x: f64) -> [f64; N] {
    let nodes = &LegendreBasis::cached(N).nodes;
    let bw = bary_weights();
    let mut out = [0.0; N];
    for i in 0..N {
        if x == nodes[i] {
            out[i] = 1.0;
            return out;
        }
    }
    let mut den = 0.0;
    for i in 0..N {
        let v = bw[i] / (x - nodes[i]);
        out[i] = v;
        den += v;
    }
    for v in out.iter_mut() {
        *v /= den;
    }
    out
}

/// Reference-interval split rule: 24-point Gauss-Legendre.
fn split_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(24).unwrap())
}

/// Nodes (parameter) and weights of a rule on the panel split at `t` when t is inside.
pub fn split_panel_rule(panel: &Panel, t: f64) -> Vec<(f64, f64)> {
    let (x, w) = split_rule();
    let mut pieces = Vec::with_capacity(2);
    if t > panel.a && t < panel.b {
        pieces.push((panel.a, t));
        pieces.push((t, panel.b));
    } else {
        pieces.push((panel.a, panel.b));
    }
    let mut out = Vec::with_capacity(48);
    for (lo, hi) in pieces {
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        for (xi, wi) in x.iter().zip(w) {
            out.push((c + h * xi, h * wi));
        }
    }
    out
}

/// Weights W such that Σ W_ℓ p(t_ℓ) = ∫_panel e^{iE|t - s|} p(s) ds for deg p ≤ 15.
pub fn kink_exact_moments(panel: &Panel, t: f64, energy: f64) -> Result<[C64; N]> {
    if energy == 0.0 {
        return Err(Error::invalid("kink weights need a nonzero energy"));
    }
    Ok(kink_weights_with(panel, t, energy, |s| ((t - s).abs(), 1.0)))
}

/// General form: `geom(s)` returns (|σ(t) - σ(s)|, jacobian at s).
pub fn kink_weights_with(
    panel: &Panel,
    t: f64,
    energy: f64,
    geom: impl Fn(f64) -> (f64, f64),
) -> [C64; N] {
    let mut w = [C64::new(0.0, 0.0); N];
    for (s, ws) in split_panel_rule(panel, t) {
        let (dist, jac) = geom(s);
        let k = C64::from_polar(ws * jac, energy * dist);
        let l = lagrange16(panel.unmap(s));
        for (wl, ll) in w.iter_mut().zip(l) {
            *wl += k * ll;
        }
    }
    w
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let fx = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += fx * WGK[i];
        if i % 2 == 1 {
            g += fx * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Piece {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

const MAX_PIECES: usize = 50_000;

/// Globally adaptive Gauss-Kronrod (7, 15) integration with absolute tolerance.
pub fn adaptive_reference(f: impl Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("adaptive tolerance must be positive"));
    }
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut heap = BinaryHeap::new();
    let (val, err) = kronrod(&f, a, b);
    heap.push(Piece { a, b, val, err });
    let mut total_err = err;
    loop {
        if total_err <= tol {
            break;
        }
        if heap.len() >= MAX_PIECES {
            return Err(Error::Quadrature(format!(
                "adaptive integration on [{a}, {b}] hit the subdivision limit (error {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("non-empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::Quadrature(format!(
                "adaptive integration stalled near {} (error {total_err:e})",
                worst.a
            )));
        }
        let (v1, e1) = kronrod(&f, worst.a, m);
        let (v2, e2) = kronrod(&f, m, worst.b);
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: worst.b, val: v2, err: e2 });
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let mut pieces = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(pieces.iter().map(|p| p.val).sum())
}

/// Real-valued convenience wrapper around [`adaptive_reference`].
pub fn adaptive_reference_real(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_reference(|x| C64::new(f(x), 0.0), a, b, tol).map(|v| v.re)
}

/// Legendre coefficients → value at reference coordinate x.
pub fn legendre_series(c: &[f64], x: f64) -> f64 {
    let mut buf = Vec::with_capacity(c.len());
    legendre_all(c.len().saturating_sub(1), x, &mut buf);
    c.iter().zip(&buf).map(|(a, b)| a * b).sum()
}
