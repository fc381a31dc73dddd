//! Problem setup, the preconditioned boundary integral solve, and field evaluation.

mod config;
pub mod diagnostics;
mod field;

pub use config::{CurveSpec, PointSource, ProblemConfig, Side};
pub use diagnostics::{diagnostics, Diagnostics, JumpResidual, StencilResidual};
pub use field::{locate_point, Foot, Incident, LayerEvaluator, ON_CURVE_TOL};

use crate::error::{Error, Result};
use crate::geom::{
    adaptive_chunk_with, balance_chunks, extend_with_buffers, suggest_window, uniform_panels, Boundary, BufferSpec,
    ChunkOptions, Curve, Point,
};
use crate::krylov::{gmres, GmresReport};
use crate::ops::{LayerOperator, MediumParams, QOperator};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub chunking_s: f64,
    pub operators_s: f64,
    pub gmres_s: f64,
    pub matvec_s: f64,
    pub eval_s: f64,
}

/// A discretized problem, ready to solve.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub medium: MediumParams,
    pub incident: Incident,
    pub boundary: Boundary,
    pub chunking_s: f64,
}

/// Longest core panel allowed in adaptive mode, in units of the shortest length scale.
const MAX_PANEL_SCALE: f64 = 4.0;

impl Problem {
    pub fn new(config: &ProblemConfig) -> Result<Problem> {
        config.validate()?;
        let start = Instant::now();
        let medium = config.medium;
        let curve = config.curve.build()?;
        let incident = Incident { medium, sources: config.sources.clone() };
        let trace = |t: f64| -> f64 {
            let x = curve.eval(t).pos;
            let a = incident.value(x, Side::Omega1).map_or(f64::INFINITY, |v| v.norm());
            let b = incident.value(x, Side::Omega2).map_or(f64::INFINITY, |v| v.norm());
            a.max(b)
        };
        let (a, b) = match config.window {
            Some([a, b]) => (a, b),
            None => suggest_window(&curve, config.eps, &trace),
        };
        let core = match config.n_c {
            Some(n) => uniform_panels(a, b, n),
            None => {
                let peak = (0..=400)
                    .map(|k| trace(a + (b - a) * k as f64 / 400.0))
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE);
                let extra = |t: f64| -> Vec<f64> {
                    let x = curve.eval(t).pos;
                    let mut v = Vec::with_capacity(4);
                    for side in [Side::Omega1, Side::Omega2] {
                        let u = incident.value(x, side).unwrap_or_default() / peak;
                        v.push(u.re);
                        v.push(u.im);
                    }
                    v
                };
                let scale = medium.omega1().max(medium.omega2()).max(medium.energy.abs());
                let opts = ChunkOptions { eps: config.eps, max_len: MAX_PANEL_SCALE / scale };
                balance_chunks(&adaptive_chunk_with(&curve, a, b, &opts, Some(&extra))?)
            }
        };
        let buffers = BufferSpec { eps: config.eps_trunc, tau: config.tau, omega0: medium.omega_min(), m0: medium.m_min() };
        let boundary = extend_with_buffers(&curve, &core, &buffers)?;
        for (k, s) in config.sources.iter().enumerate() {
            let foot = locate_point(&boundary, s.pos);
            if foot.dist < 1e-8 {
                return Err(Error::config(format!("sources[{k}]"), "source lies on the interface"));
            }
            if foot.side != s.side {
                return Err(Error::config(
                    format!("sources[{k}]"),
                    format!("source is tagged {:?} but lies in {:?}", s.side, foot.side),
                ));
            }
        }
        Ok(Problem { config: config.clone(), medium, incident, boundary, chunking_s: start.elapsed().as_secs_f64() })
    }

    pub fn curve(&self) -> &Curve {
        &self.boundary.curve
    }

    pub fn nb(&self) -> usize {
        if self.medium.is_equal() {
            1
        } else {
            2
        }
    }

    /// Right-hand side on the core nodes: 2m u_i for one mass, interleaved
    /// ([[n·∇u_i]] + 2m̄ ū_i, -[[u_i]]) for two, with ū_i the average of the two limits.
    pub fn incident_trace(&self) -> Result<Vec<C64>> {
        incident_trace(&self.incident, &self.boundary)
    }

    /// Build operators, run GMRES on L P or L2 P2, and recover the layer densities.
    pub fn solve(&self) -> Result<Solution> {
        let t0 = Instant::now();
        let cfg = &self.config;
        let b = &self.boundary;
        let rhs = self.incident_trace()?;
        let nb = self.nb();
        let (layer_op, q) = if nb == 1 {
            (LayerOperator::single(b, &self.medium, cfg.eps_trunc)?, QOperator::single(b, &self.medium)?)
        } else {
            (LayerOperator::two_mass(b, &self.medium, cfg.eps_trunc)?, QOperator::two_mass(b, &self.medium)?)
        };
        let operators_s = t0.elapsed().as_secs_f64();
        let p = |x: &[C64]| if nb == 1 { q.apply_p(x) } else { q.apply_p2(x) };
        let (density, report) = gmres(|x| layer_op.apply(&p(x)), &rhs, cfg.gmres_tol, cfg.gmres_max_iter)?;
        let layer = p(&density);
        let timings = Timings {
            chunking_s: self.chunking_s,
            operators_s,
            gmres_s: report.wall_s,
            matvec_s: report.matvec_s,
            eval_s: 0.0,
        };
        Ok(Solution { problem: self.clone(), density, layer, report, timings })
    }
}

pub fn incident_trace(incident: &Incident, boundary: &Boundary) -> Result<Vec<C64>> {
    let medium = &incident.medium;
    let core = &boundary.nodes[boundary.core.clone()];
    if medium.is_equal() {
        let m = medium.m1;
        core.par_iter()
            .map(|p| Ok(incident.value(p.pos, Side::Omega2)? * (2.0 * m)))
            .collect()
    } else {
        let mbar = medium.mbar();
        let pairs: Result<Vec<[C64; 2]>> = core
            .par_iter()
            .map(|p| {
                let (u2, g2) = incident.eval(p.pos, Side::Omega2)?;
                let (u1, g1) = incident.eval(p.pos, Side::Omega1)?;
                let n = p.normal;
                let dn = (g2[0] - g1[0]) * n[0] + (g2[1] - g1[1]) * n[1];
                Ok([dn + (u2 + u1) * mbar, -(u2 - u1)])
            })
            .collect();
        Ok(pairs?.into_iter().flatten().collect())
    }
}

/// Solve from a configuration.
pub fn solve(config: &ProblemConfig) -> Result<Solution> {
    Problem::new(config)?.solve()
}

/// Converged (or best-effort) densities and their provenance.
#[derive(Debug, Clone)]
pub struct Solution {
    pub problem: Problem,
    /// GMRES unknown on core nodes: ρ, or interleaved (σ1, σ2).
    pub density: Vec<C64>,
    /// Physical layer densities on all nodes: μ = Pρ, or interleaved (μ, ρ) = P2σ.
    pub layer: Vec<C64>,
    pub report: GmresReport,
    pub timings: Timings,
}

impl Solution {
    pub fn boundary(&self) -> &Boundary {
        &self.problem.boundary
    }

    pub fn medium(&self) -> &MediumParams {
        &self.problem.medium
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.problem.config
    }

    pub fn nb(&self) -> usize {
        self.problem.nb()
    }

    /// μ on all nodes.
    pub fn mu(&self) -> Vec<C64> {
        self.layer.iter().step_by(self.nb()).copied().collect()
    }

    /// ρ on all nodes: the zero-extended GMRES unknown for one mass, the second
    /// layer component for two.
    pub fn rho(&self) -> Vec<C64> {
        let b = self.boundary();
        if self.nb() == 1 {
            let mut r = vec![C64::new(0.0, 0.0); b.n_over()];
            r[b.core.clone()].copy_from_slice(&self.density);
            r
        } else {
            self.layer.iter().skip(1).step_by(2).copied().collect()
        }
    }

    pub fn evaluator(&self) -> LayerEvaluator<'_> {
        let rho = (self.nb() == 2).then(|| self.rho());
        LayerEvaluator::new(self.boundary(), *self.medium(), self.mu(), rho, self.config().eps_trunc)
    }

    /// u = u_i + u_s and ∇u at each target.
    pub fn eval_field_grad(&self, targets: &[Point]) -> Result<Vec<(C64, [C64; 2])>> {
        let ev = self.evaluator();
        targets
            .par_iter()
            .map(|&x| {
                let foot = locate_point(self.boundary(), x);
                if foot.dist < ON_CURVE_TOL {
                    return Err(Error::invalid(format!("target ({}, {}) lies on the interface", x[0], x[1])));
                }
                self.eval_on_side(&ev, x, foot.side)
            })
            .collect()
    }

    pub(crate) fn eval_on_side(&self, ev: &LayerEvaluator<'_>, x: Point, side: Side) -> Result<(C64, [C64; 2])> {
        let (ui, gi) = self.problem.incident.eval(x, side)?;
        let (us, gs) = ev.eval(x, side)?;
        Ok((ui + us, [gi[0] + gs[0], gi[1] + gs[1]]))
    }

    pub fn eval_field(&self, targets: &[Point]) -> Result<Vec<C64>> {
        Ok(self.eval_field_grad(targets)?.into_iter().map(|v| v.0).collect())
    }

    /// Field at each target, or None for points within `mask` of the interface.
    pub fn eval_field_masked(&self, targets: &[Point], mask: f64) -> Result<Vec<Option<C64>>> {
        let ev = self.evaluator();
        targets
            .par_iter()
            .map(|&x| {
                let foot = locate_point(self.boundary(), x);
                if foot.dist <= mask.max(ON_CURVE_TOL) {
                    return Ok(None);
                }
                Ok(Some(self.eval_on_side(&ev, x, foot.side)?.0))
            })
            .collect()
    }

    /// node_id, t, arclength, x, y, in_core, re_rho, im_rho, re_mu, im_mu.
    pub fn write_densities_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let b = self.boundary();
        let (mu, rho) = (self.mu(), self.rho());
        writeln!(w, "node_id,t,arclength,x,y,in_core,re_rho,im_rho,re_mu,im_mu")?;
        for (i, p) in b.nodes.iter().enumerate() {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                i,
                p.t,
                b.arclength[i],
                p.pos[0],
                p.pos[1],
                u8::from(b.core.contains(&i)),
                rho[i].re,
                rho[i].im,
                mu[i].re,
                mu[i].im
            )?;
        }
        Ok(())
    }
}
