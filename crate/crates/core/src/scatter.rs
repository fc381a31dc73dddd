//! Guided-wave amplitudes from density transforms, the reflection and transmission
//! coefficients built from them, and sweeps over the interface frequency b.

use crate::error::{Error, Result};
use crate::geom::{Boundary, CurveFamily};
use crate::solver::{solve, CurveSpec, Problem, ProblemConfig, Solution};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// ĝ(ξ) = ∫ e^{-iξσ} g(σ) dσ over the core, g given on core nodes, σ arclength.
pub fn density_fourier(boundary: &Boundary, g: &[C64], xi: f64) -> C64 {
    assert_eq!(g.len(), boundary.n_core());
    boundary
        .core
        .clone()
        .zip(g)
        .map(|(j, v)| C64::from_polar(boundary.weights[j], -xi * boundary.arclength[j]) * v)
        .sum()
}

/// Amplitudes of μ ≈ K± e^{±iEσ} as σ → ±∞, halved: (m²/2E) ρ̂(±E) for one mass.
/// Two masses use the Q2 input (σ1 - dσ2)/det V with prefactor -m̄²/E.
pub fn outgoing_amplitudes(sol: &Solution) -> (C64, C64) {
    let medium = sol.medium();
    let e = medium.energy;
    let b = sol.boundary();
    let (g, coef): (Vec<C64>, f64) = if sol.nb() == 1 {
        (sol.density.clone(), medium.m1 * medium.m1 / e)
    } else {
        let (d, det) = (medium.d(), medium.det_v());
        (sol.density.chunks(2).map(|s| (s[0] - s[1] * d) / det).collect(), -medium.mbar().powi(2) / e)
    };
    let half = 0.5 * coef;
    (density_fourier(b, &g, e) * half, density_fourier(b, &g, -e) * half)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterResult {
    pub b: f64,
    pub a: C64,
    pub b_amp: C64,
    pub c: C64,
    pub r_l: f64,
    pub t_l: f64,
    /// |C|²/|A|², computed independently of R_L.
    pub t_l_prime: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_s: f64,
}

/// Smallest |A| accepted.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;

/// B = L - B0 and A = C0 from a reflection-free baseline run.
pub fn reflection_transmission(run: &Solution, baseline: &Solution, b: f64) -> Result<ScatterResult> {
    let (c, l) = outgoing_amplitudes(run);
    let (c0, b0) = outgoing_amplitudes(baseline);
    let a = c0;
    if a.norm() <= AMPLITUDE_FLOOR {
        return Err(Error::Convergence("incoming amplitude vanishes".into()));
    }
    let bamp = l - b0;
    let r = bamp.norm_sqr() / a.norm_sqr();
    Ok(ScatterResult {
        b,
        a,
        b_amp: bamp,
        c,
        r_l: r,
        t_l: 1.0 - r,
        t_l_prime: c.norm_sqr() / a.norm_sqr(),
        iterations: run.report.iterations,
        converged: run.report.converged,
        wall_s: run.timings.gmres_s + run.timings.operators_s + run.timings.chunking_s,
    })
}

/// Default scattering setup: source (-40, 1), (m, E) = (4, 1), curve 2 e^{-0.05 t²} sin(b t + 0.4).
pub fn default_config(b: f64) -> ProblemConfig {
    use crate::ops::MediumParams;
    use crate::solver::Side;
    ProblemConfig::point_source(
        MediumParams::equal(4.0, 1.0).expect("valid medium"),
        CurveSpec { family: CurveFamily::GaussSine, params: vec![2.0, 0.05, b, 0.4] },
        [-40.0, 1.0],
        Side::Omega2,
    )
}

/// 61 points over [0, 3].
pub fn default_b_grid() -> Vec<f64> {
    (0..=60).map(|k| k as f64 * 0.05).collect()
}

fn with_b(template: &ProblemConfig, b: f64) -> Result<ProblemConfig> {
    if template.curve.family != CurveFamily::GaussSine || template.curve.params.len() != 4 {
        return Err(Error::config("curve", "b sweeps need a GaussSine curve"));
    }
    let mut c = template.clone();
    c.curve.params[2] = b;
    Ok(c)
}

/// Window shared by every run of a sweep: the union of the automatic windows at the extremes of the grid.
pub fn shared_window(template: &ProblemConfig, grid: &[f64]) -> Result<[f64; 2]> {
    if let Some(w) = template.window {
        return Ok(w);
    }
    let bmax = grid.iter().copied().fold(0.0, f64::max);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in [0.0, bmax] {
        let p = Problem::new(&with_b(template, b)?)?;
        let (a, bb) = p.boundary.window();
        lo = lo.min(a);
        hi = hi.max(bb);
    }
    Ok([lo, hi])
}

/// One row of a sweep; failed solves keep their error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b: f64,
    pub result: Option<ScatterResult>,
    pub error: Option<String>,
}

/// Reference run supplying A and B0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// The straight line with the same window and source: no reflection at all.
    #[default]
    Flat,
    /// The template curve at b = 0. Its residual bump reflects weakly, which
    /// biases R_L by up to twice the bump's reflection amplitude.
    ZeroB,
}

pub fn baseline_config(template: &ProblemConfig, kind: Baseline) -> Result<ProblemConfig> {
    match kind {
        Baseline::ZeroB => with_b(template, 0.0),
        Baseline::Flat => {
            let mut c = template.clone();
            c.curve = CurveSpec { family: CurveFamily::Flat, params: vec![] };
            Ok(c)
        }
    }
}

/// Solve the baseline and every grid point on a shared window.
pub fn sweep_b(template: &ProblemConfig, grid: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_b_with(template, grid, Baseline::default())
}

pub fn sweep_b_with(template: &ProblemConfig, grid: &[f64], baseline: Baseline) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::config("b_grid", "empty grid"));
    }
    if let Some(b) = grid.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
        return Err(Error::config("b_grid", format!("b must be finite and non-negative, got {b}")));
    }
    let mut shared = with_b(template, 0.0)?;
    shared.window = Some(shared_window(template, grid)?);
    let base = solve(&baseline_config(&shared, baseline)?)?;
    Ok(grid
        .par_iter()
        .map(|&b| {
            let start = Instant::now();
            let out = with_b(&shared, b).and_then(|c| solve(&c)).and_then(|s| reflection_transmission(&s, &base, b));
            match out {
                Ok(mut r) => {
                    r.wall_s = start.elapsed().as_secs_f64();
                    SweepRow { b, result: Some(r), error: None }
                }
                Err(e) => SweepRow { b, result: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// b, R_L, T_L, T_L_prime, ReA, ImA, ReB, ImB, ReC, ImC, n_iter, wall_s.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "b,R_L,T_L,T_L_prime,ReA,ImA,ReB,ImB,ReC,ImC,n_iter,wall_s")?;
    for row in rows {
        match &row.result {
            Some(r) => writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.6}",
                row.b,
                r.r_l,
                r.t_l,
                r.t_l_prime,
                r.a.re,
                r.a.im,
                r.b_amp.re,
                r.b_amp.im,
                r.c.re,
                r.c.im,
                r.iterations,
                r.wall_s
            )?,
            None => writeln!(w, "{},nan,nan,nan,nan,nan,nan,nan,nan,nan,0,0", row.b)?,
        }
    }
    Ok(())
}
