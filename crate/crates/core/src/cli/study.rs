//! Convergence ladders in n_c and τ, measured at fixed probe points.

use crate::error::{Error, Result};
use crate::flatlab::sommerfeld_field;
use crate::geom::{CurveFamily, Point};
use crate::solver::{solve, ProblemConfig};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// What the ladder is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The largest ladder entry.
    SelfConverged,
    /// The contour-integral field; flat interface with equal masses only.
    Sommerfeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Nc,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub study: Study,
    pub n_c: usize,
    pub tau: f64,
    pub probe: usize,
    pub x: Point,
    pub u: C64,
    pub reference: C64,
    pub rel_err: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_s: f64,
}

struct Run {
    values: Vec<C64>,
    iterations: usize,
    converged: bool,
    wall_s: f64,
}

fn run(cfg: &ProblemConfig, n_c: usize, tau: f64, probes: &[Point]) -> Result<Run> {
    let mut c = cfg.clone();
    c.n_c = Some(n_c);
    c.tau = tau;
    let start = Instant::now();
    let sol = solve(&c)?;
    let values = sol.eval_field(probes)?;
    Ok(Run { values, iterations: sol.report.iterations, converged: sol.report.converged, wall_s: start.elapsed().as_secs_f64() })
}

fn rows(study: Study, n_c: usize, tau: f64, probes: &[Point], r: &Run, refs: &[C64]) -> Vec<LadderRow> {
    probes
        .iter()
        .enumerate()
        .map(|(k, &x)| LadderRow {
            study,
            n_c,
            tau,
            probe: k,
            x,
            u: r.values[k],
            reference: refs[k],
            rel_err: (r.values[k] - refs[k]).norm() / refs[k].norm(),
            iterations: r.iterations,
            converged: r.converged,
            wall_s: r.wall_s,
        })
        .collect()
}

fn check_probes(probes: &[Point]) -> Result<()> {
    if probes.is_empty() {
        return Err(Error::config("probes", "at least one probe point is needed"));
    }
    Ok(())
}

/// Error at each probe for every n_c in the ladder. With a self-converged
/// reference the largest entry is N* and gets no rows of its own.
pub fn nc_ladder(cfg: &ProblemConfig, ladder: &[usize], probes: &[Point], reference: Reference) -> Result<Vec<LadderRow>> {
    if ladder.len() < 2 {
        return Err(Error::config("n_c ladder", "needs at least two entries"));
    }
    if ladder.contains(&0) {
        return Err(Error::config("n_c ladder", "entries must be positive"));
    }
    check_probes(probes)?;
    let mut ns = ladder.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let refs: Vec<C64> = match reference {
        Reference::SelfConverged => run(cfg, *ns.last().unwrap(), cfg.tau, probes)?.values,
        Reference::Sommerfeld => {
            let m = &cfg.medium;
            if cfg.curve.family != CurveFamily::Flat || !m.is_equal() || cfg.sources.len() != 1 {
                return Err(Error::config(
                    "reference",
                    "the Sommerfeld reference needs a flat interface, equal masses and one source",
                ));
            }
            let s = &cfg.sources[0];
            probes
                .iter()
                .map(|&x| sommerfeld_field(x, s.pos, m.m1, m.energy).map(|u| u * s.strength))
                .collect::<Result<_>>()?
        }
    };
    let upto = if reference == Reference::SelfConverged { ns.len() - 1 } else { ns.len() };
    let mut out = Vec::new();
    for &n in &ns[..upto] {
        let r = run(cfg, n, cfg.tau, probes)?;
        out.extend(rows(Study::Nc, n, cfg.tau, probes, &r, &refs));
    }
    Ok(out)
}

/// Error at each probe for every τ at fixed n_c, against n_c = ref_nc at τ = 1.
/// A reference at the same τ would share the buffer truncation and hide it.
pub fn tau_ladder(cfg: &ProblemConfig, n_c: usize, taus: &[f64], ref_nc: usize, probes: &[Point]) -> Result<Vec<LadderRow>> {
    if taus.len() < 2 {
        return Err(Error::config("tau ladder", "needs at least two entries"));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::config("tau ladder", format!("entries must be positive, got {t}")));
    }
    check_probes(probes)?;
    let refs = run(cfg, ref_nc, 1.0, probes)?.values;
    let mut out = Vec::new();
    for &t in taus {
        let r = run(cfg, n_c, t, probes)?;
        out.extend(rows(Study::Tau, n_c, t, probes, &r, &refs));
    }
    Ok(out)
}

/// Largest relative error over the probes for each ladder entry, in ladder order.
pub fn worst_per_entry(rows: &[LadderRow]) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some(last) if last.0 == r.n_c && last.1 == r.tau => last.2 = last.2.max(r.rel_err),
            _ => out.push((r.n_c, r.tau, r.rel_err)),
        }
    }
    out
}

pub fn write_convergence_csv<W: Write>(rows: &[LadderRow], reference: &str, mut w: W) -> Result<()> {
    writeln!(w, "study,n_c,tau,probe,x,y,re_u,im_u,re_ref,im_ref,rel_err,reference,n_iter,converged,wall_s")?;
    for r in rows {
        let study = match r.study {
            Study::Nc => "nc",
            Study::Tau => "tau",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e},{},{},{},{:.6}",
            study,
            r.n_c,
            r.tau,
            r.probe,
            r.x[0],
            r.x[1],
            r.u.re,
            r.u.im,
            r.reference.re,
            r.reference.im,
            r.rel_err,
            reference,
            r.iterations,
            u8::from(r.converged),
            r.wall_s
        )?;
    }
    Ok(())
}
