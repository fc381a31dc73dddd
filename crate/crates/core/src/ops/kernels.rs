//! Green's function of -Δ + ω² and the on-curve layer kernels.
//!
//! Every on-curve kernel is split near the diagonal as
//! k(t, s) = A(t, s) log|t - s| + B(t, s) with A and B smooth; `log_part`
//! returns A and `diag` returns (A(t, t), B(t, t)).

use crate::error::{Error, Result};
use crate::geom::{dot, sub, CurvePoint, Point};
use crate::specfun::{bessel_i0_i1x, bessel_k01, bessel_k0_xk1m1, EULER_GAMMA};
use std::f64::consts::{LN_2, PI};

pub const INV_2PI: f64 = 0.5 / PI;

fn coincident(x: Point, y: Point) -> Result<f64> {
    let r = sub(x, y);
    let r = r[0].hypot(r[1]);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::invalid("Green's function evaluated at coincident points"))
    }
}

/// G_ω(x, y) = K0(ω|x - y|) / 2π.
pub fn green(omega: f64, x: Point, y: Point) -> Result<f64> {
    let r = coincident(x, y)?;
    Ok(INV_2PI * bessel_k01(omega * r).0)
}

/// ∇_x G_ω(x, y) = -(ω/2π) K1(ω r) (x - y)/r.
pub fn grad_green(omega: f64, x: Point, y: Point) -> Result<Point> {
    let r = coincident(x, y)?;
    let d = sub(x, y);
    let c = -INV_2PI * omega * bessel_k01(omega * r).1 / r;
    Ok([c * d[0], c * d[1]])
}

/// Value, gradient and Hessian (xx, xy, yy) of G_ω in x, for r > 0.
#[inline]
pub fn green_derivs(omega: f64, d: Point, r: f64) -> (f64, Point, [f64; 3]) {
    let (k0, k1) = bessel_k01(omega * r);
    let g = INV_2PI * k0;
    let c = -INV_2PI * omega * k1 / r;
    let (ux, uy) = (d[0] / r, d[1] / r);
    let a = INV_2PI * omega * omega * k0;
    let b = INV_2PI * omega * k1 / r;
    let h = [
        a * ux * ux + b * (2.0 * ux * ux - 1.0),
        a * ux * uy + b * 2.0 * ux * uy,
        a * uy * uy + b * (2.0 * uy * uy - 1.0),
    ];
    (g, [c * d[0], c * d[1]], h)
}

/// Pair geometry shared by all kernels: r, (x-y)·n_x, (x-y)·n_y, n_x·n_y.
#[derive(Debug, Clone, Copy)]
pub struct PairGeom {
    pub r: f64,
    pub cx: f64,
    pub cy: f64,
    pub nn: f64,
}

impl PairGeom {
    #[inline]
    pub fn new(x: &CurvePoint, y: &CurvePoint) -> PairGeom {
        let d = sub(x.pos, y.pos);
        PairGeom {
            r: d[0].hypot(d[1]),
            cx: dot(d, x.normal),
            cy: dot(d, y.normal),
            nn: dot(x.normal, y.normal),
        }
    }
}

pub fn kernel_s(omega: f64, x: &CurvePoint, y: &CurvePoint) -> f64 {
    let g = PairGeom::new(x, y);
    INV_2PI * bessel_k01(omega * g.r).0
}

/// Normal derivative of G in the source point: ∂G/∂n(t').
pub fn kernel_d(omega: f64, x: &CurvePoint, y: &CurvePoint) -> f64 {
    let g = PairGeom::new(x, y);
    let (_, d) = bessel_k0_xk1m1(omega * g.r);
    INV_2PI * (1.0 + d) * g.cy / (g.r * g.r)
}

/// Normal derivative of G in the target point: ∂G/∂n(t).
pub fn kernel_sp(omega: f64, x: &CurvePoint, y: &CurvePoint) -> f64 {
    let g = PairGeom::new(x, y);
    let (_, d) = bessel_k0_xk1m1(omega * g.r);
    -INV_2PI * (1.0 + d) * g.cx / (g.r * g.r)
}

/// n(t)·[∇∇G_{ω2} - ∇∇G_{ω1}]·n(t') with the 1/r² parts cancelled.
pub fn kernel_dp_diff(w2: f64, w1: f64, x: &CurvePoint, y: &CurvePoint) -> f64 {
    dp_diff_from(w2, w1, &PairGeom::new(x, y))
}

#[inline]
fn dp_diff_from(w2: f64, w1: f64, g: &PairGeom) -> f64 {
    let r2 = g.r * g.r;
    let (k02, d2) = bessel_k0_xk1m1(w2 * g.r);
    let (k01, d1) = bessel_k0_xk1m1(w1 * g.r);
    let c1 = g.cx * g.cy / r2;
    let c2 = 2.0 * c1 - g.nn;
    -INV_2PI * ((w2 * w2 * k02 - w1 * w1 * k01) * c1 + (d2 - d1) / r2 * c2)
}

fn log_s(omega: f64, g: &PairGeom) -> f64 {
    -INV_2PI * bessel_i0_i1x(omega * g.r).0
}

fn log_d(omega: f64, g: &PairGeom) -> f64 {
    INV_2PI * omega * omega * bessel_i0_i1x(omega * g.r).1 * g.cy
}

fn log_sp(omega: f64, g: &PairGeom) -> f64 {
    -INV_2PI * omega * omega * bessel_i0_i1x(omega * g.r).1 * g.cx
}

fn log_dp_diff(w2: f64, w1: f64, g: &PairGeom) -> f64 {
    let r2 = g.r * g.r;
    let (i02, j2) = bessel_i0_i1x(w2 * g.r);
    let (i01, j1) = bessel_i0_i1x(w1 * g.r);
    let c1 = g.cx * g.cy / r2;
    let c2 = 2.0 * c1 - g.nn;
    -INV_2PI * ((w1 * w1 * i01 - w2 * w2 * i02) * c1 + (w2 * w2 * j2 - w1 * w1 * j1) * c2)
}

/// One of the four basic layer kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    S(f64),
    D(f64),
    Sp(f64),
    /// (ω2, ω1)
    DpDiff(f64, f64),
}

impl Kernel {
    pub fn eval(&self, x: &CurvePoint, y: &CurvePoint) -> f64 {
        match *self {
            Kernel::S(w) => kernel_s(w, x, y),
            Kernel::D(w) => kernel_d(w, x, y),
            Kernel::Sp(w) => kernel_sp(w, x, y),
            Kernel::DpDiff(w2, w1) => kernel_dp_diff(w2, w1, x, y),
        }
    }

    /// A(t, s) for t ≠ s.
    pub fn log_part(&self, x: &CurvePoint, y: &CurvePoint) -> f64 {
        let g = PairGeom::new(x, y);
        match *self {
            Kernel::S(w) => log_s(w, &g),
            Kernel::D(w) => log_d(w, &g),
            Kernel::Sp(w) => log_sp(w, &g),
            Kernel::DpDiff(w2, w1) => log_dp_diff(w2, w1, &g),
        }
    }

    /// (A(t, t), B(t, t)).
    pub fn diag(&self, x: &CurvePoint) -> (f64, f64) {
        match *self {
            Kernel::S(w) => (-INV_2PI, INV_2PI * (-(0.5 * w * x.speed).ln() - EULER_GAMMA)),
            Kernel::D(_) | Kernel::Sp(_) => (0.0, 0.5 * INV_2PI * x.curvature()),
            Kernel::DpDiff(w2, w1) => {
                let dw = 0.5 * (w2 * w2 - w1 * w1);
                let b = dw * (x.speed.ln() - LN_2 + EULER_GAMMA - 0.5)
                    + 0.5 * (w2 * w2 * w2.ln() - w1 * w1 * w1.ln());
                (INV_2PI * dw, INV_2PI * b)
            }
        }
    }
}

/// A square block of kernels acting on `nb` interleaved density components.
pub trait BlockKernel: Send + Sync {
    fn nb(&self) -> usize;
    /// Kernel block at t ≠ s, row-major nb × nb.
    fn eval(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]);
    /// Log coefficient block A(t, s), t ≠ s.
    fn log_part(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]);
    /// Diagonal limits A(t, t) and B(t, t).
    fn diag(&self, x: &CurvePoint, log: &mut [f64], smooth: &mut [f64]);
    /// Slowest decay rate; interactions beyond log(1/ε)/rate are dropped.
    fn decay_rate(&self) -> f64;
    /// Fastest decay rate; limits the size of cells treated as smooth.
    fn max_rate(&self) -> f64;
}

/// coef · S_ω, the kernel of the single-mass operator 2m S.
#[derive(Debug, Clone, Copy)]
pub struct SingleLayer {
    pub omega: f64,
    pub coef: f64,
}

impl BlockKernel for SingleLayer {
    fn nb(&self) -> usize {
        1
    }

    #[inline]
    fn eval(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]) {
        let d = sub(x.pos, y.pos);
        let r = d[0].hypot(d[1]);
        out[0] = self.coef * INV_2PI * bessel_k01(self.omega * r).0;
    }

    fn log_part(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]) {
        out[0] = self.coef * log_s(self.omega, &PairGeom::new(x, y));
    }

    fn diag(&self, x: &CurvePoint, log: &mut [f64], smooth: &mut [f64]) {
        let (a, b) = Kernel::S(self.omega).diag(x);
        log[0] = self.coef * a;
        smooth[0] = self.coef * b;
    }

    fn decay_rate(&self) -> f64 {
        self.omega
    }

    fn max_rate(&self) -> f64 {
        self.omega
    }
}

/// The 2×2 kernel block K of the two-mass operator L2 = I - K.
///
/// K11 = S'2 - S'1 + m̄(S2 + S1), K12 = m̄(D2 + D1) + D'2 - D'1,
/// K21 = -(S2 - S1), K22 = -(D2 - D1).
#[derive(Debug, Clone, Copy)]
pub struct TwoMassBlock {
    pub w1: f64,
    pub w2: f64,
    pub mbar: f64,
}

impl TwoMassBlock {
    fn combine(&self, s: [f64; 2], d: [f64; 2], sp: [f64; 2], dpd: f64, out: &mut [f64]) {
        let m = self.mbar;
        out[0] = sp[1] - sp[0] + m * (s[1] + s[0]);
        out[1] = m * (d[1] + d[0]) + dpd;
        out[2] = -(s[1] - s[0]);
        out[3] = -(d[1] - d[0]);
    }
}

impl BlockKernel for TwoMassBlock {
    fn nb(&self) -> usize {
        2
    }

    #[inline]
    fn eval(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]) {
        let g = PairGeom::new(x, y);
        let r2 = g.r * g.r;
        let (k01, e1) = bessel_k0_xk1m1(self.w1 * g.r);
        let (k02, e2) = bessel_k0_xk1m1(self.w2 * g.r);
        let s = [INV_2PI * k01, INV_2PI * k02];
        let d = [
            INV_2PI * (1.0 + e1) * g.cy / r2,
            INV_2PI * (1.0 + e2) * g.cy / r2,
        ];
        let sp = [
            -INV_2PI * (1.0 + e1) * g.cx / r2,
            -INV_2PI * (1.0 + e2) * g.cx / r2,
        ];
        let c1 = g.cx * g.cy / r2;
        let c2 = 2.0 * c1 - g.nn;
        let (w1, w2) = (self.w1, self.w2);
        let dpd = -INV_2PI * ((w2 * w2 * k02 - w1 * w1 * k01) * c1 + (e2 - e1) / r2 * c2);
        self.combine(s, d, sp, dpd, out);
    }

    fn log_part(&self, x: &CurvePoint, y: &CurvePoint, out: &mut [f64]) {
        let g = PairGeom::new(x, y);
        let (w1, w2) = (self.w1, self.w2);
        self.combine(
            [log_s(w1, &g), log_s(w2, &g)],
            [log_d(w1, &g), log_d(w2, &g)],
            [log_sp(w1, &g), log_sp(w2, &g)],
            log_dp_diff(w2, w1, &g),
            out,
        );
    }

    fn diag(&self, x: &CurvePoint, log: &mut [f64], smooth: &mut [f64]) {
        let (w1, w2) = (self.w1, self.w2);
        let s1 = Kernel::S(w1).diag(x);
        let s2 = Kernel::S(w2).diag(x);
        let d = Kernel::D(w1).diag(x);
        let p = Kernel::DpDiff(w2, w1).diag(x);
        self.combine([s1.0, s2.0], [d.0, d.0], [d.0, d.0], p.0, log);
        self.combine([s1.1, s2.1], [d.1, d.1], [d.1, d.1], p.1, smooth);
    }

    fn decay_rate(&self) -> f64 {
        self.w1.min(self.w2)
    }

    fn max_rate(&self) -> f64 {
        self.w1.max(self.w2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_curve, Curve, CurveFamily};

    fn gauss() -> Curve {
        build_curve(CurveFamily::GaussSine, &[2.0, 0.05, 2.0, 0.4]).unwrap()
    }

    #[test]
    fn green_value_and_symmetry() {
        let g = green(1.0, [0.0, 0.0], [1.0, 0.0]).unwrap();
        assert!((g - 0.067_008_120_508_497_12).abs() < 1e-15);
        let g2 = green(1.0, [3.0, 4.0], [3.6, 4.8]).unwrap();
        assert!((g - g2).abs() < 1e-15);
        assert!(green(1.0, [1.0, 1.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_and_hessian_finite_differences() {
        let h = 1e-5;
        let y = [0.3, -0.2];
        for &x in &[[1.0, 0.5], [-0.4, 2.0], [0.31, -0.1]] {
            let w = 1.3;
            let gr = grad_green(w, x, y).unwrap();
            let fx = (green(w, [x[0] + h, x[1]], y).unwrap() - green(w, [x[0] - h, x[1]], y).unwrap()) / (2.0 * h);
            let fy = (green(w, [x[0], x[1] + h], y).unwrap() - green(w, [x[0], x[1] - h], y).unwrap()) / (2.0 * h);
            assert!((gr[0] - fx).abs() < 1e-8 && (gr[1] - fy).abs() < 1e-8);
            let d = sub(x, y);
            let r = d[0].hypot(d[1]);
            let (_, _, hs) = green_derivs(w, d, r);
            let gx = |p: Point| grad_green(w, p, y).unwrap();
            let hxx = (gx([x[0] + h, x[1]])[0] - gx([x[0] - h, x[1]])[0]) / (2.0 * h);
            let hxy = (gx([x[0], x[1] + h])[0] - gx([x[0], x[1] - h])[0]) / (2.0 * h);
            let hyy = (gx([x[0], x[1] + h])[1] - gx([x[0], x[1] - h])[1]) / (2.0 * h);
            assert!((hs[0] - hxx).abs() < 1e-6 && (hs[1] - hxy).abs() < 1e-6 && (hs[2] - hyy).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_d_and_sp_vanish() {
        let c = Curve::flat();
        let (x, y) = (c.eval(0.2), c.eval(1.7));
        assert_eq!(kernel_d(1.5, &x, &y), 0.0);
        assert_eq!(kernel_sp(1.5, &x, &y), 0.0);
        assert_eq!(kernel_dp_diff(1.5, 1.5, &x, &y), 0.0);
    }

    #[test]
    fn dp_diff_matches_hessian_difference() {
        let c = gauss();
        let (x, y) = (c.eval(0.3), c.eval(1.1));
        let d = sub(x.pos, y.pos);
        let r = d[0].hypot(d[1]);
        let contract = |w: f64| {
            let (_, _, h) = green_derivs(w, d, r);
            let hn = [h[0] * y.normal[0] + h[1] * y.normal[1], h[1] * y.normal[0] + h[2] * y.normal[1]];
            -(x.normal[0] * hn[0] + x.normal[1] * hn[1])
        };
        let direct = contract(2.2) - contract(1.4);
        assert!((kernel_dp_diff(2.2, 1.4, &x, &y) - direct).abs() < 1e-13);
        // D and S' against gradients of G
        let gy = grad_green(1.4, y.pos, x.pos).unwrap();
        assert!((kernel_d(1.4, &x, &y) - dot(gy, y.normal)).abs() < 1e-14);
        let gx = grad_green(1.4, x.pos, y.pos).unwrap();
        assert!((kernel_sp(1.4, &x, &y) - dot(gx, x.normal)).abs() < 1e-14);
    }

    #[test]
    fn dp_diff_is_log_type() {
        let c = gauss();
        let x = c.eval(0.5);
        // n·∇∇(G_ω1 − G_ω2)·n ~ (ω1² − ω2²)/(4π)·log(1/r): fixed growth per decade
        let rate = (9.0 - 1.0) * 10f64.ln() / (4.0 * std::f64::consts::PI);
        let mut prev = 0.0f64;
        for k in 2..=8 {
            let h = 10f64.powi(-k);
            let v = kernel_dp_diff(3.0, 1.0, &x, &c.eval(0.5 + h)).abs();
            if k > 3 {
                assert!((v - prev - rate).abs() < 1e-2, "k {k}: step {}", v - prev);
            }
            prev = v;
        }
    }

    #[test]
    fn diagonal_limits() {
        let c = gauss();
        let kernels = [
            Kernel::S(1.7),
            Kernel::D(1.7),
            Kernel::Sp(1.7),
            Kernel::DpDiff(2.5, 1.1),
        ];
        for &t in &[-1.3, 0.0, 0.8] {
            let x = c.eval(t);
            for k in kernels {
                let (a0, b0) = k.diag(&x);
                for &h in &[1e-4, -1e-4] {
                    let y = c.eval(t + h);
                    let a = k.log_part(&x, &y);
                    let b = k.eval(&x, &y) - a * h.abs().ln();
                    assert!((a - a0).abs() < 1e-3, "{k:?} A {a} vs {a0}");
                    assert!((b - b0).abs() < 1e-3, "{k:?} B {b} vs {b0}");
                }
                // convergence: error shrinks with h
                let e = |h: f64| {
                    let y = c.eval(t + h);
                    let a = k.log_part(&x, &y);
                    (k.eval(&x, &y) - a * h.abs().ln() - b0).abs()
                };
                assert!(e(1e-5) < e(1e-3).max(1e-12) * 0.5 + 1e-11, "{k:?} at t={t}");
            }
        }
    }

    #[test]
    fn two_mass_block_consistent() {
        let c = gauss();
        let (x, y) = (c.eval(-0.2), c.eval(0.9));
        let blk = TwoMassBlock { w1: 1.5, w2: 2.5, mbar: 2.3 };
        let mut out = [0.0; 4];
        blk.eval(&x, &y, &mut out);
        let (w1, w2, m) = (1.5, 2.5, 2.3);
        let k11 = Kernel::Sp(w2).eval(&x, &y) - Kernel::Sp(w1).eval(&x, &y)
            + m * (Kernel::S(w2).eval(&x, &y) + Kernel::S(w1).eval(&x, &y));
        let k12 = m * (Kernel::D(w2).eval(&x, &y) + Kernel::D(w1).eval(&x, &y)) + Kernel::DpDiff(w2, w1).eval(&x, &y);
        let k21 = -(Kernel::S(w2).eval(&x, &y) - Kernel::S(w1).eval(&x, &y));
        let k22 = -(Kernel::D(w2).eval(&x, &y) - Kernel::D(w1).eval(&x, &y));
        for (a, b) in out.iter().zip([k11, k12, k21, k22]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
