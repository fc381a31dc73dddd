//! Flat-interface analysis: Fourier symbols of the preconditioned operators, an
//! FFT solver for the flat problem, and a contour-integral reference field.

use crate::error::{Error, Result};
use crate::ops::MediumParams;
use crate::specfun::{bessel_k01, gauss_legendre};
use crate::C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
fn xi_omega(xi: f64, omega: f64) -> f64 {
    xi.hypot(omega)
}

/// Symbol of L P for one mass: (1 - m/ξ_ω)(1 - 2im²/(ξ² - E²)).
/// Uses 1 - m/ξ_ω = (ξ² - E²)/(ξ_ω(ξ_ω + m)), so ±E needs no special case.
pub fn symbol_a(xi: f64, m: f64, e: f64) -> C64 {
    let xw = xi_omega(xi, (m * m - e * e).sqrt());
    C64::new(1.0 - m / xw, -2.0 * m * m / (xw * (xw + m)))
}

/// (1 + m/ξ_ω)(1 + (2i + 1)m²/(ξ² - E² - 2im²)).
pub fn symbol_a_inv(xi: f64, m: f64, e: f64) -> C64 {
    let xw = xi_omega(xi, (m * m - e * e).sqrt());
    let den = C64::new(xi * xi - e * e, -2.0 * m * m);
    (1.0 + m / xw) * (1.0 + C64::new(1.0, 2.0) * (m * m) / den)
}

/// ξ_j = sqrt(ξ² + m_j² - E²).
fn xi12(xi: f64, p: &MediumParams) -> (f64, f64) {
    (xi_omega(xi, p.omega1()), xi_omega(xi, p.omega2()))
}

/// R(ξ) = -1 + ¼(ξ2 - ξ1)(1/ξ2 - 1/ξ1) + ¼(m1 + m2)(1/ξ2 + 1/ξ1).
pub fn symbol_r(xi: f64, p: &MediumParams) -> f64 {
    let (x1, x2) = xi12(xi, p);
    -1.0 + 0.25 * (x2 - x1) * (1.0 / x2 - 1.0 / x1) + 0.25 * (p.m1 + p.m2) * (1.0 / x2 + 1.0 / x1)
}

pub type Mat2 = [[C64; 2]; 2];

/// Flat symbol of L2 acting on (μ, ρ). Its determinant is -R(ξ).
pub fn two_mass_matrix(xi: f64, p: &MediumParams) -> Mat2 {
    let (x1, x2) = xi12(xi, p);
    let mb = p.mbar();
    let c = |v: f64| C64::new(v, 0.0);
    [
        [c(1.0 - 0.5 * mb * (1.0 / x2 + 1.0 / x1)), c(0.5 * (x2 - x1))],
        [c(0.5 * (1.0 / x2 - 1.0 / x1)), c(1.0)],
    ]
}

/// (-1, 1/(2m2) - 1/(2m1)), annihilated by the L2 symbol at ξ = ±E.
pub fn null_vector(p: &MediumParams) -> [f64; 2] {
    [-1.0, p.d()]
}

/// Flat symbol of L2 P2 acting on (σ1, σ2).
/// The pole of Q2 at ±E is cancelled analytically: M v = (ξ² - E²) w with
/// ξ_j - m_j = (ξ² - E²)/(ξ_j + m_j).
pub fn two_mass_p2_matrix(xi: f64, p: &MediumParams) -> Mat2 {
    let mut a = two_mass_matrix(xi, p);
    let (x1, x2) = xi12(xi, p);
    let (m1, m2, mb, d, det) = (p.m1, p.m2, p.mbar(), p.d(), p.det_v());
    let (e1, e2) = (1.0 / (x1 + m1), 1.0 / (x2 + m2));
    let w1 = -0.5 * mb * (e2 / (x2 * m2) + e1 / (x1 * m1)) + 0.5 * d * (e2 - e1);
    let w2 = 0.5 * (e2 / (x2 * m2) - e1 / (x1 * m1));
    let s = C64::new(0.0, -2.0 * mb * mb / det);
    for (row, w) in a.iter_mut().zip([w1, w2]) {
        row[0] += s * w;
        row[1] -= s * (w * d);
    }
    a
}

fn solve2(a: &Mat2, b: [C64; 2]) -> [C64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [(a[1][1] * b[0] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det]
}

/// A uniform grid x_k = x0 + k h, k < n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatGrid {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl FlatGrid {
    /// n points with spacing h, centred on 0.
    pub fn centered(h: f64, n: usize) -> FlatGrid {
        FlatGrid { x0: -0.5 * h * n as f64, h, n }
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + self.h * k as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Angular frequency of FFT bin k.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.n as i64;
        let k = k as i64;
        let kk = if k <= n / 2 { k } else { k - n };
        2.0 * PI * kk as f64 / (self.h * self.n as f64)
    }
}

/// Relative size of the grid-end samples below which the periodic extension is harmless.
pub const DECAY_GUARD: f64 = 1e-12;

fn check_decay(samples: &[C64]) -> Result<()> {
    let peak = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(());
    }
    let ends = samples[0].norm().max(samples[samples.len() - 1].norm());
    if ends > DECAY_GUARD * peak {
        return Err(Error::invalid(format!(
            "insufficient grid decay: end samples are {:.1e} of the peak",
            ends / peak
        )));
    }
    Ok(())
}

fn fft(data: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(data.len()) } else { planner.plan_fft_forward(data.len()) };
    plan.process(data);
    if inverse {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// Apply a Fourier multiplier to samples on a uniform grid.
pub fn apply_symbol(samples: &[C64], grid: &FlatGrid, symbol: impl Fn(f64) -> C64) -> Vec<C64> {
    assert_eq!(samples.len(), grid.n);
    let mut f = samples.to_vec();
    fft(&mut f, false);
    for (k, z) in f.iter_mut().enumerate() {
        *z *= symbol(grid.freq(k));
    }
    fft(&mut f, true);
    f
}

/// ρ = F⁻¹[a⁻¹ F[2m·trace]] for the one-mass flat problem.
pub fn flat_solve_fft(trace: &[C64], grid: &FlatGrid, m: f64, e: f64) -> Result<Vec<C64>> {
    if trace.len() != grid.n || grid.n < 2 {
        return Err(Error::invalid("trace length does not match the grid"));
    }
    check_decay(trace)?;
    let rhs: Vec<C64> = trace.iter().map(|z| z * (2.0 * m)).collect();
    Ok(apply_symbol(&rhs, grid, |xi| symbol_a_inv(xi, m, e)))
}

/// σ = (L2 P2)⁻¹ r for the two-mass flat problem; `r` and the result are
/// interleaved pairs per grid point.
pub fn flat_solve_fft2(r: &[C64], grid: &FlatGrid, p: &MediumParams) -> Result<Vec<C64>> {
    if r.len() != 2 * grid.n || grid.n < 2 {
        return Err(Error::invalid("right-hand side length does not match the grid"));
    }
    let (mut a, mut b): (Vec<C64>, Vec<C64>) = r.chunks(2).map(|c| (c[0], c[1])).unzip();
    check_decay(&a)?;
    check_decay(&b)?;
    fft(&mut a, false);
    fft(&mut b, false);
    for k in 0..grid.n {
        let s = solve2(&two_mass_p2_matrix(grid.freq(k), p), [a[k], b[k]]);
        a[k] = s[0];
        b[k] = s[1];
    }
    fft(&mut a, true);
    fft(&mut b, true);
    Ok(a.into_iter().zip(b).flat_map(|(x, y)| [x, y]).collect())
}

/// Trigonometric interpolant of grid samples evaluated at arbitrary points.
pub fn trig_interp(samples: &[C64], grid: &FlatGrid, xs: &[f64]) -> Vec<C64> {
    let mut f = samples.to_vec();
    fft(&mut f, false);
    let n = grid.n;
    let inv = 1.0 / n as f64;
    xs.iter()
        .map(|&x| {
            let dx = x - grid.x0;
            let mut s = C64::new(0.0, 0.0);
            for (k, c) in f.iter().enumerate() {
                if n % 2 == 0 && k == n / 2 {
                    s += c * (PI * dx / grid.h).cos();
                } else {
                    s += c * C64::from_polar(1.0, grid.freq(k) * dx);
                }
            }
            s * inv
        })
        .collect()
}

/// Gauss-Legendre order of the contour panels.
const CONTOUR_ORDER: usize = 24;
/// Agreement demanded between the two contour resolutions.
pub const SOMMERFELD_TOL: f64 = 1e-10;

/// Reference total field for a flat interface and equal masses: u = u_i + S_ω[μ]
/// with μ the outgoing solution, as the Fourier integral
/// (1/2π) ∫ g(ξ)/(ξ² - E²) dξ, g = m(ξ_ω + m)e^{-ξ_ω Y}e^{iξX}/(2ξ_ω), X = x - x_s, Y = |y| + |y_s|.
/// The outgoing condition puts +E above and -E below the path, which is deformed to
/// ξ = s - i c h(s) with h odd, h(±E) = ±1 and c < min(ω, |E|).
pub fn sommerfeld_field(x: [f64; 2], src: [f64; 2], m: f64, e: f64) -> Result<C64> {
    let coarse = sommerfeld_scattered(x, src, m, e, 1)?;
    let fine = sommerfeld_scattered(x, src, m, e, 2)?;
    let diff = (coarse - fine).norm();
    if diff > SOMMERFELD_TOL * fine.norm().max(1e-3) {
        return Err(Error::Convergence(format!("contour integral unresolved (change {diff:.1e})")));
    }
    let dx = [x[0] - src[0], x[1] - src[1]];
    let r = dx[0].hypot(dx[1]);
    if r == 0.0 {
        return Err(Error::invalid("field evaluated at the source"));
    }
    let omega = (m * m - e * e).sqrt();
    Ok(fine + bessel_k01(omega * r).0 / (2.0 * PI))
}

/// Scattered part only, with the contour split into panels refined `level` times.
pub fn sommerfeld_scattered(x: [f64; 2], src: [f64; 2], m: f64, e: f64, level: usize) -> Result<C64> {
    if !(e.abs() < m) || e == 0.0 {
        return Err(Error::invalid("need 0 < |E| < m"));
    }
    let y = x[1].abs() + src[1].abs();
    if x[1].abs() < 1e-12 || src[1].abs() < 1e-12 {
        return Err(Error::invalid("target and source must lie off the interface"));
    }
    let omega = (m * m - e * e).sqrt();
    let ea = e.abs();
    let c = 0.5 * omega.min(ea);
    let xx = x[0] - src[0];
    // integrand below 1e-18 of its peak beyond |s| = smax
    let smax = 2.0 * ea + omega + 42.0 / y;
    let width = (0.25f64).min(1.0 / (1.0 + xx.abs())).min(0.5 * ea) / level as f64;
    let panels = (2.0 * smax / width).ceil() as usize;
    let hw = smax / panels as f64;
    let (nodes, weights) = gauss_legendre(CONTOUR_ORDER)?;
    let h = |s: f64| {
        let q = s / ea;
        let g = (0.5 * (1.0 - q * q)).exp();
        (q * g, g * (1.0 - q * q) / ea)
    };
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = -smax + (2 * p + 1) as f64 * hw;
        for (t, w) in nodes.iter().zip(&weights) {
            let s = mid + hw * t;
            let (hv, hd) = h(s);
            let xi = C64::new(s, -c * hv);
            let dxi = C64::new(1.0, -c * hd);
            let xw = (xi * xi + omega * omega).sqrt();
            let g = m * (xw + m) * (-xw * y + I * xi * xx).exp() / (2.0 * xw);
            acc += g / (xi * xi - e * e) * dxi * (w * hw);
        }
    }
    Ok(acc / (2.0 * PI))
}

/// Reference probe values for a flat interface, as stored in the fixture file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbeTable {
    pub m: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub src: [f64; 2],
    /// (x, y, Re u, Im u)
    pub probes: Vec<[f64; 4]>,
}

/// Probe points used for flat-interface accuracy checks.
pub const FLAT_PROBES: [[f64; 2]; 4] = [[1.0, 1.0], [-2.0, 3.0], [0.5, -1.0], [3.0, -0.5]];

pub fn probe_table(m: f64, e: f64, src: [f64; 2], points: &[[f64; 2]]) -> Result<ProbeTable> {
    let probes = points
        .iter()
        .map(|&p| sommerfeld_field(p, src, m, e).map(|u| [p[0], p[1], u.re, u.im]))
        .collect::<Result<_>>()?;
    Ok(ProbeTable { m, e, src, probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_at_zero() {
        let a = symbol_a(0.0, 2.0, 1.0);
        let want = C64::new(1.0, 8.0) * (1.0 - 2.0 / 3f64.sqrt());
        assert!((a - want).norm() < 1e-14);
    }

    #[test]
    fn a_at_energy() {
        for xi in [1.0, -1.0] {
            assert!((symbol_a(xi, 2.0, 1.0) - C64::new(0.0, -1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn r_at_zero() {
        let p = MediumParams::new(2.0, 3.0, 1.0).unwrap();
        assert!((symbol_r(0.0, &p) - 0.10229).abs() < 1e-5);
    }

    #[test]
    fn grid_frequencies() {
        let g = FlatGrid::centered(0.5, 8);
        assert_eq!(g.freq(0), 0.0);
        assert!((g.freq(1) - 2.0 * PI / 4.0).abs() < 1e-15);
        assert!(g.freq(7) < 0.0);
    }
}
