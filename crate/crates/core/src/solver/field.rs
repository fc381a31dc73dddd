//! Incident fields, side location and off-curve evaluation of the layer potentials.

use super::config::{PointSource, Side};
use crate::error::{Error, Result};
use crate::geom::{dot, norm, sub, Boundary, CurvePoint, Point, NODES_PER_PANEL};
use crate::ops::{green_derivs, MediumParams};
use crate::quad::lagrange16;
use crate::specfun::LegendreBasis;
use crate::C64;

/// Points closer than this to the interface are treated as lying on it.
pub const ON_CURVE_TOL: f64 = 1e-12;
/// Recursion cap for near-field subdivision.
const MAX_NEAR_DEPTH: usize = 60;
/// A (sub)panel is integrated with 16 nodes once the target is this many lengths away.
const NEAR_RATIO: f64 = 1.5;

/// Point sources radiating with G_{ω_j} into their own side.
#[derive(Debug, Clone)]
pub struct Incident {
    pub medium: MediumParams,
    pub sources: Vec<PointSource>,
}

impl Incident {
    fn omega(&self, side: Side) -> f64 {
        match side {
            Side::Omega1 => self.medium.omega1(),
            Side::Omega2 => self.medium.omega2(),
        }
    }

    fn active<'a>(&'a self, side: Side) -> impl Iterator<Item = &'a PointSource> {
        let all = self.medium.is_equal();
        self.sources.iter().filter(move |s| all || s.side == side)
    }

    /// u_i and ∇u_i at x, seen from `side`.
    pub fn eval(&self, x: Point, side: Side) -> Result<(C64, [C64; 2])> {
        let w = self.omega(side);
        let mut u = C64::new(0.0, 0.0);
        let mut g = [C64::new(0.0, 0.0); 2];
        for s in self.active(side) {
            let d = sub(x, s.pos);
            let r = norm(d);
            if r == 0.0 {
                return Err(Error::invalid("field evaluated at a source point"));
            }
            let (v, gr, _) = green_derivs(w, d, r);
            u += s.strength * v;
            g[0] += s.strength * gr[0];
            g[1] += s.strength * gr[1];
        }
        Ok((u, g))
    }

    pub fn value(&self, x: Point, side: Side) -> Result<C64> {
        Ok(self.eval(x, side)?.0)
    }
}

/// Where a point sits relative to the curve.
#[derive(Debug, Clone, Copy)]
pub struct Foot {
    pub side: Side,
    pub dist: f64,
    pub t: f64,
}

/// Nearest curve point by node search plus Newton refinement, and the side it implies.
pub fn locate_point(boundary: &Boundary, x: Point) -> Foot {
    let mut best = (f64::INFINITY, 0.0);
    for p in &boundary.nodes {
        let d = sub(x, p.pos);
        let r = dot(d, d);
        if r < best.0 {
            best = (r, p.t);
        }
    }
    let curve = &boundary.curve;
    let mut t = best.1;
    let h = boundary
        .locate(t)
        .map_or(1.0, |k| boundary.panels[k].len());
    for _ in 0..30 {
        let p = curve.eval(t);
        let d = sub(p.pos, x);
        let f = dot(d, p.d1);
        let fp = dot(p.d1, p.d1) + dot(d, p.d2);
        let step = if fp > 0.0 { f / fp } else { f / dot(p.d1, p.d1) };
        let step = step.clamp(-h, h);
        t -= step;
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    let p = curve.eval(t);
    let d = sub(x, p.pos);
    let dist = norm(d);
    let side = if dot(d, p.normal) >= 0.0 { Side::Omega2 } else { Side::Omega1 };
    Foot { side, dist, t }
}

struct PanelInfo {
    bbox: [f64; 4],
    len: f64,
}

/// Evaluates u_s = S_ω[μ] (+ D_ω[ρ]) off the curve, with ω taken from the target's side.
pub struct LayerEvaluator<'a> {
    boundary: &'a Boundary,
    medium: MediumParams,
    mu: Vec<C64>,
    rho: Option<Vec<C64>>,
    panels: Vec<PanelInfo>,
    eps_trunc: f64,
}

impl<'a> LayerEvaluator<'a> {
    /// `mu` and `rho` cover all nodes.
    pub fn new(
        boundary: &'a Boundary,
        medium: MediumParams,
        mu: Vec<C64>,
        rho: Option<Vec<C64>>,
        eps_trunc: f64,
    ) -> LayerEvaluator<'a> {
        let panels = (0..boundary.panels.len())
            .map(|k| {
                let r = boundary.node_range(k);
                let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                let p = &boundary.panels[k];
                let ends = [boundary.curve.eval(p.a).pos, boundary.curve.eval(p.b).pos];
                for q in boundary.nodes[r.clone()].iter().map(|n| n.pos).chain(ends) {
                    b = [b[0].min(q[0]), b[1].min(q[1]), b[2].max(q[0]), b[3].max(q[1])];
                }
                PanelInfo { bbox: b, len: boundary.weights[r].iter().sum() }
            })
            .collect();
        LayerEvaluator { boundary, medium, mu, rho, panels, eps_trunc }
    }

    fn omega(&self, side: Side) -> f64 {
        match side {
            Side::Omega1 => self.medium.omega1(),
            Side::Omega2 => self.medium.omega2(),
        }
    }

    /// Layer potential value and gradient at x on `side`.
    pub fn eval(&self, x: Point, side: Side) -> Result<(C64, [C64; 2])> {
        let w = self.omega(side);
        let cutoff = (1.0 / self.eps_trunc).ln() / w;
        let mut acc = Acc::default();
        for (k, info) in self.panels.iter().enumerate() {
            let b = &info.bbox;
            let dx = (b[0] - x[0]).max(x[0] - b[2]).max(0.0);
            let dy = (b[1] - x[1]).max(x[1] - b[3]).max(0.0);
            if dx.hypot(dy) > cutoff {
                continue;
            }
            let range = self.boundary.node_range(k);
            let nodes = &self.boundary.nodes[range.clone()];
            let dmin = nodes
                .iter()
                .map(|p| {
                    let d = sub(x, p.pos);
                    norm(d)
                })
                .fold(f64::INFINITY, f64::min);
            if dmin > NEAR_RATIO * info.len {
                for (i, p) in nodes.iter().enumerate() {
                    let l = range.start + i;
                    let rho = self.rho.as_ref().map(|r| r[l]);
                    acc.add(w, x, p, self.boundary.weights[l], self.mu[l], rho)?;
                }
            } else {
                let p = &self.boundary.panels[k];
                let mu = &self.mu[range.clone()];
                let rho = self.rho.as_ref().map(|r| &r[range.clone()]);
                self.subdivide(k, p.a, p.b, x, w, mu, rho, 0, &mut acc)?;
            }
        }
        Ok((acc.u, acc.g))
    }

    #[allow(clippy::too_many_arguments)]
    fn subdivide(
        &self,
        k: usize,
        lo: f64,
        hi: f64,
        x: Point,
        w: f64,
        mu: &[C64],
        rho: Option<&[C64]>,
        depth: usize,
        acc: &mut Acc,
    ) -> Result<()> {
        let basis = LegendreBasis::cached(NODES_PER_PANEL);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let pts: Vec<CurvePoint> = basis.nodes.iter().map(|&s| self.boundary.curve.eval(mid + half * s)).collect();
        let len: f64 = pts.iter().zip(&basis.weights).map(|(p, wg)| p.speed * wg * half).sum();
        let dmin = pts
            .iter()
            .map(|p| {
                let d = sub(x, p.pos);
                norm(d)
            })
            .fold(f64::INFINITY, f64::min);
        if dmin > NEAR_RATIO * len {
            let panel = &self.boundary.panels[k];
            for (i, p) in pts.iter().enumerate() {
                let l = lagrange16(panel.unmap(p.t));
                let m: C64 = l.iter().zip(mu).map(|(a, b)| b * *a).sum();
                let r = rho.map(|r| l.iter().zip(r).map(|(a, b)| b * *a).sum::<C64>());
                acc.add(w, x, p, basis.weights[i] * half * p.speed, m, r)?;
            }
            return Ok(());
        }
        if depth >= MAX_NEAR_DEPTH || dmin < ON_CURVE_TOL {
            return Err(Error::invalid(format!("target ({}, {}) lies on the interface", x[0], x[1])));
        }
        self.subdivide(k, lo, mid, x, w, mu, rho, depth + 1, acc)?;
        self.subdivide(k, mid, hi, x, w, mu, rho, depth + 1, acc)
    }
}

#[derive(Default)]
struct Acc {
    u: C64,
    g: [C64; 2],
}

impl Acc {
    #[inline]
    fn add(&mut self, w: f64, x: Point, y: &CurvePoint, wt: f64, mu: C64, rho: Option<C64>) -> Result<()> {
        let d = sub(x, y.pos);
        let r = norm(d);
        if r < ON_CURVE_TOL {
            return Err(Error::invalid(format!("target ({}, {}) lies on the interface", x[0], x[1])));
        }
        let (g, gr, h) = green_derivs(w, d, r);
        let m = mu * wt;
        self.u += m * g;
        self.g[0] += m * gr[0];
        self.g[1] += m * gr[1];
        if let Some(rho) = rho {
            // ∂G/∂n_y = -∇_x G · n_y, and its x-gradient is -H n_y
            let q = rho * wt;
            let n = y.normal;
            self.u -= q * dot(gr, n);
            self.g[0] -= q * (h[0] * n[0] + h[1] * n[1]);
            self.g[1] -= q * (h[1] * n[0] + h[2] * n[1]);
        }
        Ok(())
    }
}
