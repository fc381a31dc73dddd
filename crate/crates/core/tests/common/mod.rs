//! Oracle comparisons shared by the module tests and the acceptance suite.
#![allow(dead_code)]

use edgewave::flatlab::{
    flat_solve_fft, flat_solve_fft2, symbol_a, trig_interp, two_mass_matrix, two_mass_p2_matrix, FlatGrid, Mat2,
};
use edgewave::geom::{uniform_panels, Boundary, Curve, CurveFamily};
use edgewave::ops::{LayerOperator, MediumParams, QOperator};
use edgewave::solver::{solve, CurveSpec, Incident, PointSource, ProblemConfig, Side};
use edgewave::C64;

pub fn l2_rel(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn flat() -> CurveSpec {
    CurveSpec { family: CurveFamily::Flat, params: vec![] }
}

/// Uniform flat line whose core spans [-40, 40], with buffers out to ±50.
pub fn flat_boundary() -> Boundary {
    let mut panels = uniform_panels(-50.0, 50.0, 200);
    for p in panels.iter_mut() {
        p.is_buffer = p.b <= -40.0 || p.a >= 40.0;
    }
    Boundary::new(Curve::flat(), panels).unwrap()
}

/// Windowed plane wave. The envelope is flat in the middle and its spectrum at
/// ξ0 ± E is negligible for ξ0 = 0.7 (L, L2) and ξ0 = 4 (anything involving Q).
pub fn plane_wave(b: &Boundary, xi0: f64, nodes: std::ops::Range<usize>) -> Vec<C64> {
    nodes.map(|j| C64::from_polar((-(b.t(j) / 25.0).powi(8)).exp(), xi0 * b.t(j))).collect()
}

fn worst_mid<F: Fn(usize) -> (C64, C64)>(b: &Boundary, nb: usize, f: F) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, j) in b.core.clone().enumerate() {
        if b.t(j).abs() < 8.0 {
            for c in 0..nb {
                let (got, want) = f(nb * k + c);
                worst = worst.max((got - want).norm() / want.norm());
            }
        }
    }
    worst
}

fn mat_vec(m: &Mat2, v: [C64; 2]) -> [C64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Worst mid-window relative deviation from the flat symbols.
#[derive(Debug, Clone, Copy)]
pub struct SymbolErrors {
    pub l: f64,
    pub p: f64,
    pub lp: f64,
    pub l2: f64,
    pub l2p2: f64,
}

impl SymbolErrors {
    pub fn max(&self) -> f64 {
        [self.l, self.p, self.lp, self.l2, self.l2p2].into_iter().fold(0.0, f64::max)
    }
}

pub fn flat_symbol_errors() -> SymbolErrors {
    let b = flat_boundary();
    let c0 = b.core.start;
    let (m, e) = (2.0, 1.0);
    let medium = MediumParams::equal(m, e).unwrap();
    let op = LayerOperator::single(&b, &medium, 1e-16).unwrap();

    let xi0: f64 = 0.7;
    let mu = plane_wave(&b, xi0, 0..b.n_over());
    let out = op.apply(&mu);
    let sym = 1.0 - m / (xi0 * xi0 + medium.omega1().powi(2)).sqrt();
    let l = worst_mid(&b, 1, |k| (out[k], sym * mu[c0 + k]));

    let xi0: f64 = 4.0;
    let rho = plane_wave(&b, xi0, b.core.clone());
    let p_rho = QOperator::single(&b, &medium).unwrap().apply_p(&rho);
    let p_sym = C64::new(1.0, -2.0 * m * m / (xi0 * xi0 - e * e));
    let p = worst_mid(&b, 1, |k| (p_rho[c0 + k], p_sym * rho[k]));
    let lp_out = op.apply(&p_rho);
    let a = symbol_a(xi0, m, e);
    let lp = worst_mid(&b, 1, |k| (lp_out[k], a * rho[k]));

    let medium = MediumParams::new(2.0, 3.0, 1.0).unwrap();
    let v = [C64::new(0.8, 0.3), C64::new(-0.4, 1.1)];
    let op = LayerOperator::two_mass(&b, &medium, 1e-16).unwrap();
    let xi0 = 0.7;
    let w = plane_wave(&b, xi0, 0..b.n_over());
    let x: Vec<C64> = w.iter().flat_map(|z| [v[0] * z, v[1] * z]).collect();
    let out = op.apply(&x);
    let mv = mat_vec(&two_mass_matrix(xi0, &medium), v);
    let l2 = worst_mid(&b, 2, |i| (out[i], mv[i % 2] * w[c0 + i / 2]));

    let xi0 = 4.0;
    let w = plane_wave(&b, xi0, b.core.clone());
    let sigma: Vec<C64> = w.iter().flat_map(|z| [v[0] * z, v[1] * z]).collect();
    let out = op.apply(&QOperator::two_mass(&b, &medium).unwrap().apply_p2(&sigma));
    let mv = mat_vec(&two_mass_p2_matrix(xi0, &medium), v);
    let l2p2 = worst_mid(&b, 2, |i| (out[i], mv[i % 2] * w[i / 2]));

    SymbolErrors { l, p, lp, l2, l2p2 }
}

pub fn point_trace(m: f64, e: f64, src: [f64; 2], g: &FlatGrid) -> Vec<C64> {
    let inc = Incident {
        medium: MediumParams::equal(m, e).unwrap(),
        sources: vec![PointSource { pos: src, strength: C64::new(1.0, 0.0), side: Side::Omega2 }],
    };
    g.points().iter().map(|&x| inc.value([x, 0.0], Side::Omega2).unwrap()).collect()
}

/// L2-relative gap between the curved solver on a straight line and the FFT solve, one mass.
pub fn one_mass_fft_gap(m: f64, e: f64, src: [f64; 2]) -> f64 {
    let cfg = ProblemConfig::point_source(MediumParams::equal(m, e).unwrap(), flat(), src, Side::Omega2);
    let sol = solve(&cfg).unwrap();
    let b = sol.boundary();
    let ts: Vec<f64> = b.core.clone().map(|j| b.t(j)).collect();
    let g = FlatGrid::centered(0.05, 4096);
    let rho = flat_solve_fft(&point_trace(m, e, src, &g), &g, m, e).unwrap();
    l2_rel(&sol.density, &trig_interp(&rho, &g, &ts))
}

/// Same for two masses with the source in Ω2; densities interleaved (σ1, σ2).
pub fn two_mass_fft_gap(p: MediumParams, src: [f64; 2]) -> f64 {
    let cfg = ProblemConfig::point_source(p, flat(), src, Side::Omega2);
    let sol = solve(&cfg).unwrap();
    let b = sol.boundary();
    let ts: Vec<f64> = b.core.clone().map(|j| b.t(j)).collect();
    let g = FlatGrid::centered(0.05, 4096);
    let inc = Incident { medium: p, sources: cfg.sources.clone() };
    // source only in Ω2: u_{i,1} = 0 and the normal is +y
    let r: Vec<C64> = g
        .points()
        .iter()
        .flat_map(|&x| {
            let (u2, g2) = inc.eval([x, 0.0], Side::Omega2).unwrap();
            [g2[1] + u2 * p.mbar(), -u2]
        })
        .collect();
    let sigma = flat_solve_fft2(&r, &g, &p).unwrap();
    let s1: Vec<C64> = sigma.iter().step_by(2).copied().collect();
    let s2: Vec<C64> = sigma.iter().skip(1).step_by(2).copied().collect();
    let (w1, w2) = (trig_interp(&s1, &g, &ts), trig_interp(&s2, &g, &ts));
    let want: Vec<C64> = w1.into_iter().zip(w2).flat_map(|(a, b)| [a, b]).collect();
    l2_rel(&sol.density, &want)
}
