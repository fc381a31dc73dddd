//! A-posteriori checks of a solution: interface conditions, the PDE off the
//! curve, the outgoing behaviour of μ and the decay of the GMRES unknown.

use super::{Side, Solution};
use crate::error::Result;
use crate::geom::Point;
use crate::scatter::density_fourier;
use crate::C64;
use serde::{Deserialize, Serialize};

/// Offsets used for the one-sided limits, in units of the local panel arclength.
pub const JUMP_OFFSETS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpResidual {
    /// max |[[u]]| / max |u| over the sample points, extrapolated to zero offset.
    pub value: f64,
    /// max |[[n·∇u]] + (m1 + m2) u| / max (|n·∇u| + (m1 + m2)|u|), extrapolated.
    pub flux: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilResidual {
    pub point: [f64; 2],
    pub h: Vec<f64>,
    /// |(-Δ_h + ω²)u| / (ω² |u|) per step size.
    pub residual: Vec<f64>,
    /// residual(h) / residual(h/2).
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub jump: JumpResidual,
    pub stencil: Option<StencilResidual>,
    /// max over the outer 10% of core nodes of |μ - c e^{iE|σ|} ĝ(±E)| / max |μ|.
    pub outgoing: f64,
    /// ‖unknown‖ on the outer 10% of core nodes over the total.
    pub tail_fraction: f64,
}

pub fn diagnostics(sol: &Solution) -> Result<Diagnostics> {
    Ok(Diagnostics {
        jump: jump_residual(sol, 10)?,
        stencil: stencil_residual(sol)?,
        outgoing: outgoing_residual(sol),
        tail_fraction: tail_fraction(sol),
    })
}

/// Richardson extrapolation to δ = 0 from f(δ), f(δ/2), f(δ/4) with a smooth expansion in δ.
fn richardson(f: [C64; 3]) -> C64 {
    let a1 = f[1] * 2.0 - f[0];
    let a2 = f[2] * 2.0 - f[1];
    (a2 * 4.0 - a1) / 3.0
}

/// Jumps of u and of the flux condition at `n` points spread over the middle 80% of the window.
pub fn jump_residual(sol: &Solution, n: usize) -> Result<JumpResidual> {
    let b = sol.boundary();
    let (a, bb) = b.window();
    let ev = sol.evaluator();
    let msum = sol.medium().m1 + sol.medium().m2;
    let (mut r0, mut r1, mut s0, mut s1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..n {
        let t = a + (bb - a) * (0.1 + 0.8 * (k as f64 + 0.5) / n as f64);
        let p = b.curve.eval(t);
        let h = b.locate(t).map_or(1.0, |i| b.panel_arclength[i + 1] - b.panel_arclength[i]);
        let mut jv = [C64::new(0.0, 0.0); 3];
        let mut jf = [C64::new(0.0, 0.0); 3];
        let mut uavg = C64::new(0.0, 0.0);
        let mut flux = 0.0f64;
        for (i, &off) in JUMP_OFFSETS.iter().enumerate() {
            let d = off * h;
            let xp = [p.pos[0] + d * p.normal[0], p.pos[1] + d * p.normal[1]];
            let xm = [p.pos[0] - d * p.normal[0], p.pos[1] - d * p.normal[1]];
            let (up, gp) = sol.eval_on_side(&ev, xp, Side::Omega2)?;
            let (um, gm) = sol.eval_on_side(&ev, xm, Side::Omega1)?;
            let dnp = gp[0] * p.normal[0] + gp[1] * p.normal[1];
            let dnm = gm[0] * p.normal[0] + gm[1] * p.normal[1];
            jv[i] = up - um;
            jf[i] = dnp - dnm + (up + um) * (0.5 * msum);
            uavg = (up + um) * 0.5;
            flux = flux.max(dnp.norm().max(dnm.norm()));
        }
        r0 = r0.max(richardson(jv).norm());
        r1 = r1.max(richardson(jf).norm());
        s0 = s0.max(uavg.norm());
        s1 = s1.max(flux + msum * uavg.norm());
    }
    Ok(JumpResidual {
        value: if s0 > 0.0 { r0 / s0 } else { r0 },
        flux: if s1 > 0.0 { r1 / s1 } else { r1 },
        points: n,
    })
}

/// Five-point residual of (-Δ + ω²)u halfway between the first source and the interface.
pub fn stencil_residual(sol: &Solution) -> Result<Option<StencilResidual>> {
    let Some(src) = sol.config().sources.first() else {
        return Ok(None);
    };
    let b = sol.boundary();
    let foot = super::locate_point(b, src.pos);
    let g = b.curve.eval(foot.t).pos;
    let x0 = [0.5 * (src.pos[0] + g[0]), 0.5 * (src.pos[1] + g[1])];
    let d = 0.5 * foot.dist;
    let hs: Vec<f64> = [10.0, 20.0, 40.0].iter().map(|k| d / k).collect();
    let side = src.side;
    let w = match side {
        Side::Omega1 => sol.medium().omega1(),
        Side::Omega2 => sol.medium().omega2(),
    };
    let ev = sol.evaluator();
    let u = |x: Point| sol.eval_on_side(&ev, x, side).map(|v| v.0);
    let u0 = u(x0)?;
    let mut residual = Vec::new();
    for &h in &hs {
        let lap = (u([x0[0] + h, x0[1]])? + u([x0[0] - h, x0[1]])? + u([x0[0], x0[1] + h])? + u([x0[0], x0[1] - h])?
            - u0 * 4.0)
            / (h * h);
        residual.push((-lap + u0 * (w * w)).norm() / (w * w * u0.norm()));
    }
    let ratios = residual.windows(2).map(|r| r[0] / r[1]).collect();
    Ok(Some(StencilResidual { point: x0, h: hs, residual, ratios }))
}

/// The part of the GMRES unknown that feeds Q, with Q's prefactor sign folded in.
fn q_source(sol: &Solution) -> (Vec<C64>, f64) {
    let medium = sol.medium();
    if sol.nb() == 1 {
        (sol.density.clone(), medium.m1 * medium.m1 / medium.energy)
    } else {
        let (d, det) = (medium.d(), medium.det_v());
        let g = sol.density.chunks(2).map(|s| (s[0] - s[1] * d) / det).collect();
        (g, -medium.mbar() * medium.mbar() / medium.energy)
    }
}

/// Agreement of μ with its asymptotic plane waves on the outer 10% of the core.
pub fn outgoing_residual(sol: &Solution) -> f64 {
    let b = sol.boundary();
    let e = sol.medium().energy;
    let (g, coef) = q_source(sol);
    let gp = density_fourier(b, &g, e);
    let gm = density_fourier(b, &g, -e);
    let mu = sol.mu();
    let n = b.n_core();
    let outer = (n / 10).max(1);
    let scale = mu.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for k in (0..outer).chain(n - outer..n) {
        let j = b.core.start + k;
        let s = b.arclength[j];
        let pred = if k < n / 2 {
            C64::from_polar(coef, -e * s) * gm
        } else {
            C64::from_polar(coef, e * s) * gp
        };
        worst = worst.max((mu[j] - pred).norm());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Euclidean norm of the GMRES unknown on the outer 10% of core nodes relative to all of it.
pub fn tail_fraction(sol: &Solution) -> f64 {
    let nb = sol.nb();
    let n = sol.density.len() / nb;
    let outer = (n / 10).max(1);
    let total: f64 = sol.density.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = sol.density[..outer * nb]
        .iter()
        .chain(&sol.density[(n - outer) * nb..])
        .map(|z| z.norm_sqr())
        .sum();
    (tail / total).sqrt()
}
