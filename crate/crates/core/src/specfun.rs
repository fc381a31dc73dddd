//! Modified Bessel functions of order 0 and 1 and Legendre utilities.
//!
//! K0/K1 use the power series up to x = 2 and, beyond that, the trapezoidal
//! rule applied to the integral representation after the substitution
//! s = sqrt(2x) sinh(u/2):
//!
//!   e^x K0(x) = ∫ e^{-s²} / sqrt(2x + s²) ds
//!   e^x K1(x) = ∫ e^{-s²} (1 + s²/x) / sqrt(2x + s²) ds
//!
//! Both integrands are analytic in a strip of half-width sqrt(2x) ≥ 2, so a
//! step of 1/4 converges to machine precision.

use crate::error::{Error, Result};
use std::sync::OnceLock;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_SWITCH: f64 = 2.0;
const TRAP_STEP: f64 = 0.25;
const TRAP_HALF: usize = 27;

fn trap_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=TRAP_HALF)
            .map(|k| {
                let s = k as f64 * TRAP_STEP;
                let w = if k == 0 { TRAP_STEP } else { 2.0 * TRAP_STEP };
                (s * s, w * (-s * s).exp())
            })
            .collect()
    })
}

/// Series evaluation of (I0, I1, K0, K1, x K1(x) - 1) for 0 < x ≤ 2.
fn small_series(x: f64) -> (f64, f64, f64, f64, f64) {
    let y = 0.25 * x * x;
    let lg = (0.5 * x).ln();
    // term = y^k / (k!)^2, term1 = y^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut term1 = 1.0;
    let mut h = 0.0; // harmonic number H_k
    let mut i0 = 1.0;
    let mut i1s = 1.0;
    let mut k0s = 0.0;
    // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
    let mut k1s = 1.0 - 2.0 * EULER_GAMMA;
    for k in 1..40 {
        let kf = k as f64;
        term *= y / (kf * kf);
        term1 *= y / (kf * (kf + 1.0));
        h += 1.0 / kf;
        i0 += term;
        i1s += term1;
        k0s += h * term;
        k1s += (2.0 * h + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * term1;
        if term < 1e-18 * i0 {
            break;
        }
    }
    let i1 = 0.5 * x * i1s;
    let k0 = -(lg + EULER_GAMMA) * i0 + k0s;
    let xk1m1 = x * i1 * lg - 0.25 * x * x * k1s;
    let k1 = 1.0 / x + i1 * lg - 0.25 * x * k1s;
    (i0, i1, k0, k1, xk1m1)
}

/// Scaled pair (e^x K0(x), e^x K1(x)) for x > 2.
fn scaled_trap(x: f64) -> (f64, f64) {
    let two_x = 2.0 * x;
    let inv_x = 1.0 / x;
    let mut a = 0.0;
    let mut b = 0.0;
    for &(s2, w) in trap_table() {
        let g = w / (two_x + s2).sqrt();
        a += g;
        b += g * (1.0 + s2 * inv_x);
    }
    (a, b)
}

/// (K0(x), K1(x)) without argument checks; x must be positive.
#[inline]
pub fn bessel_k01(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        let (_, _, k0, k1, _) = small_series(x);
        (k0, k1)
    } else {
        let (a, b) = scaled_trap(x);
        let e = (-x).exp();
        (a * e, b * e)
    }
}

/// (e^x K0(x), e^x K1(x)) without argument checks.
pub fn bessel_k01_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        let (_, _, k0, k1, _) = small_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        scaled_trap(x)
    }
}

/// (K0(x), x K1(x) - 1) with the second entry free of cancellation near x = 0.
#[inline]
pub fn bessel_k0_xk1m1(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        let (_, _, k0, _, xk1m1) = small_series(x);
        (k0, xk1m1)
    } else {
        let (a, b) = scaled_trap(x);
        let e = (-x).exp();
        (a * e, x * b * e - 1.0)
    }
}

/// (I0(x), I1(x) / x), the latter finite at x = 0.
#[inline]
pub fn bessel_i0_i1x(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut term1 = 1.0;
    let mut i0 = 1.0;
    let mut i1s = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        term1 *= y / (kf * (kf + 1.0));
        i0 += term;
        i1s += term1;
        if term < 1e-17 * i0 {
            break;
        }
    }
    (i0, 0.5 * i1s)
}

/// (I0(x), I1(x)) by power series; accurate for 0 ≤ x ≤ 50.
#[inline]
pub fn bessel_i01(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut term1 = 1.0;
    let mut i0 = 1.0;
    let mut i1s = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        term1 *= y / (kf * (kf + 1.0));
        i0 += term;
        i1s += term1;
        if term < 1e-17 * i0 {
            break;
        }
    }
    (i0, 0.5 * x * i1s)
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("Bessel K needs a positive finite argument, got {x}")))
    }
}

fn check_i_range(x: f64) -> Result<()> {
    if (0.0..=50.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("Bessel I supported on [0, 50], got {x}")))
    }
}

pub fn bessel_k0(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(bessel_k01(x).0)
}

pub fn bessel_k1(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(bessel_k01(x).1)
}

/// e^x K0(x).
pub fn bessel_k0e(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(bessel_k01_scaled(x).0)
}

/// e^x K1(x).
pub fn bessel_k1e(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(bessel_k01_scaled(x).1)
}

pub fn bessel_i0(x: f64) -> Result<f64> {
    check_i_range(x)?;
    Ok(bessel_i01(x).0)
}

pub fn bessel_i1(x: f64) -> Result<f64> {
    check_i_range(x)?;
    Ok(bessel_i01(x).1)
}

/// Values P_0(x), ..., P_n(x) by the three-term recurrence.
pub fn legendre_all(n: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Gauss-Legendre nodes (increasing) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre rule with its discrete Legendre transform.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// vals[i * n + k] = P_k(x_i)
    vals: Vec<f64>,
}

impl LegendreBasis {
    pub fn new(n: usize) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(n)?;
        let mut vals = Vec::with_capacity(n * n);
        let mut buf = Vec::new();
        for &x in &nodes {
            legendre_all(n - 1, x, &mut buf);
            vals.extend_from_slice(&buf);
        }
        Ok(LegendreBasis {
            n,
            nodes,
            weights,
            vals,
        })
    }

    /// Cached 16- and 32-point bases.
    pub fn cached(n: usize) -> &'static LegendreBasis {
        static B16: OnceLock<LegendreBasis> = OnceLock::new();
        static B32: OnceLock<LegendreBasis> = OnceLock::new();
        match n {
            16 => B16.get_or_init(|| LegendreBasis::new(16).unwrap()),
            32 => B32.get_or_init(|| LegendreBasis::new(32).unwrap()),
            _ => panic!("no cached Legendre basis of order {n}"),
        }
    }

    pub fn p(&self, node: usize, k: usize) -> f64 {
        self.vals[node * self.n + k]
    }

    /// Samples at the nodes to Legendre coefficients.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                self.n,
                samples.len()
            )));
        }
        let mut c = vec![0.0; self.n];
        for (i, &f) in samples.iter().enumerate() {
            let wf = self.weights[i] * f;
            for (k, ck) in c.iter_mut().enumerate() {
                *ck += wf * self.p(i, k);
            }
        }
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= (2 * k + 1) as f64 / 2.0;
        }
        Ok(c)
    }

    /// Coefficients back to samples at the nodes.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                self.n,
                coeffs.len()
            )));
        }
        Ok((0..self.n)
            .map(|i| coeffs.iter().enumerate().map(|(k, c)| c * self.p(i, k)).sum())
            .collect())
    }
}

/// Legendre coefficients of samples taken at the n-point Gauss-Legendre nodes.
pub fn legendre_coeffs(samples: &[f64]) -> Result<Vec<f64>> {
    match samples.len() {
        16 | 32 => LegendreBasis::cached(samples.len()).forward(samples),
        0 => Err(Error::invalid("no samples")),
        n => LegendreBasis::new(n)?.forward(samples),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_at_one() {
        let v = bessel_k0(1.0).unwrap();
        assert!((v - 0.421_024_438_240_708_3).abs() < 1e-15);
    }

    #[test]
    fn small_argument_limits() {
        let x = 1e-8;
        let lead = -(x / 2.0_f64).ln() - EULER_GAMMA;
        assert!((bessel_k0(x).unwrap() - lead).abs() / lead < 1e-10);
        assert!((bessel_k1(x).unwrap() * x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wronskian() {
        for x in [0.5, 1.0, 2.0, 3.7, 20.0] {
            let (k0, k1) = bessel_k01(x);
            let (i0, i1) = bessel_i01(x);
            assert!((i0 * k1 + i1 * k0 - 1.0 / x).abs() * x < 1e-13, "x={x}");
        }
    }

    #[test]
    fn i_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        assert!((bessel_i0(1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!(bessel_i0(51.0).is_err());
    }

    #[test]
    fn xk1_minus_one_consistent() {
        for x in [1e-6, 0.01, 0.5, 1.9, 2.1, 7.0] {
            let (k0, k1) = bessel_k01(x);
            let (k0b, d) = bessel_k0_xk1m1(x);
            assert_eq!(k0, k0b);
            assert!((d - (x * k1 - 1.0)).abs() < 1e-14 * (1.0 + x * k1));
        }
        // leading behaviour (x²/2)(log(x/2) + γ - 1/2)
        let x: f64 = 1e-5;
        let lead = 0.5 * x * x * ((x / 2.0).ln() + EULER_GAMMA - 0.5);
        assert!((bessel_k0_xk1m1(x).1 - lead).abs() < 1e-6 * lead.abs());
        let (i0, i1x) = bessel_i0_i1x(0.7);
        let (a, b) = bessel_i01(0.7);
        assert_eq!(i0, a);
        assert!((i1x * 0.7 - b).abs() < 1e-16);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k0e(f64::NAN).is_err());
    }

    #[test]
    fn scaled_large() {
        // e^x K0(x) ~ sqrt(pi/2x) (1 - 1/8x)
        let x = 1e4;
        let v = bessel_k0e(x).unwrap();
        let approx = (std::f64::consts::PI / (2.0 * x)).sqrt() * (1.0 - 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x));
        assert!((v - approx).abs() / approx < 1e-11);
    }

    #[test]
    fn gl_two_point() {
        let (x, w) = gauss_legendre(2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn gl_exactness() {
        let (x, w) = gauss_legendre(16).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!(w.iter().all(|&w| w > 0.0));
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        for i in 0..16 {
            assert!((x[i] + x[15 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn legendre_roundtrip() {
        for n in [16, 32] {
            let b = LegendreBasis::cached(n);
            let f: Vec<f64> = b.nodes.iter().map(|x| (3.0 * x).sin() + x * x).collect();
            let c = b.forward(&f).unwrap();
            let g = b.inverse(&c).unwrap();
            for (a, b) in f.iter().zip(&g) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn legendre_p5_and_constant() {
        let b = LegendreBasis::cached(32);
        let mut buf = Vec::new();
        let f: Vec<f64> = b
            .nodes
            .iter()
            .map(|&x| {
                legendre_all(5, x, &mut buf);
                buf[5]
            })
            .collect();
        let c = legendre_coeffs(&f).unwrap();
        for (k, ck) in c.iter().enumerate() {
            let want = if k == 5 { 1.0 } else { 0.0 };
            assert!((ck - want).abs() < 1e-13);
        }
        let c = legendre_coeffs(&[2.5; 16]).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-14);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));
        assert!(b.forward(&[1.0; 3]).is_err());
    }

    #[test]
    fn exp_coefficients_decay() {
        let b = LegendreBasis::cached(32);
        let f: Vec<f64> = b.nodes.iter().map(|x| x.exp()).collect();
        let c = b.forward(&f).unwrap();
        for k in 1..14 {
            assert!(c[k].abs() < c[k - 1].abs());
        }
    }
}
