use super::curve::{Curve, CurvePoint};
use crate::error::{Error, Result};
use crate::specfun::{legendre_all, LegendreBasis};
use std::io::Write;
use std::ops::Range;

pub const NODES_PER_PANEL: usize = 16;
pub const MAX_SPLIT_DEPTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub is_buffer: bool,
}

impl Panel {
    pub fn new(a: f64, b: f64) -> Panel {
        Panel {
            a,
            b,
            is_buffer: false,
        }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// Map a reference coordinate in [-1, 1] to the parameter.
    pub fn map(&self, x: f64) -> f64 {
        self.mid() + 0.5 * self.len() * x
    }

    /// Inverse of [`Panel::map`].
    pub fn unmap(&self, t: f64) -> f64 {
        (t - self.mid()) / (0.5 * self.len())
    }

    pub fn halves(&self) -> (Panel, Panel) {
        let m = self.mid();
        (
            Panel { b: m, ..*self },
            Panel { a: m, ..*self },
        )
    }
}

/// Options for adaptive chunking.
#[derive(Debug, Clone, Copy)]
pub struct ChunkOptions {
    /// Tolerance on the Legendre-coefficient tails.
    pub eps: f64,
    /// Upper bound on the parameter length of any panel.
    pub max_len: f64,
}

impl ChunkOptions {
    pub fn new(eps: f64) -> Self {
        ChunkOptions {
            eps,
            max_len: f64::INFINITY,
        }
    }
}

/// Root-mean-square of the upper half of the 32-point Legendre coefficients.
fn tail(coeffs: &[f64]) -> f64 {
    let hi = &coeffs[16..];
    (hi.iter().map(|c| c * c).sum::<f64>() / hi.len() as f64).sqrt()
}

/// Largest coefficient tail among x(t), y(t), s(t) and any extra data on the panel.
pub fn panel_tail(
    curve: &Curve,
    panel: &Panel,
    extra: Option<&dyn Fn(f64) -> Vec<f64>>,
) -> f64 {
    let basis = LegendreBasis::cached(32);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(32); 3];
    for &x in &basis.nodes {
        let t = panel.map(x);
        let p = curve.eval(t);
        cols[0].push(p.pos[0]);
        cols[1].push(p.pos[1]);
        cols[2].push(p.speed);
        if let Some(f) = extra {
            let vals = f(t);
            if cols.len() < 3 + vals.len() {
                cols.resize(3 + vals.len(), Vec::with_capacity(32));
            }
            for (k, v) in vals.into_iter().enumerate() {
                cols[3 + k].push(v);
            }
        }
    }
    cols.iter()
        .map(|c| tail(&basis.forward(c).expect("32 samples")))
        .fold(0.0, f64::max)
}

/// Recursively bisect [a, b] until every panel passes the resolution test.
pub fn adaptive_chunk(curve: &Curve, a: f64, b: f64, eps: f64) -> Result<Vec<Panel>> {
    adaptive_chunk_with(curve, a, b, &ChunkOptions::new(eps), None)
}

/// As [`adaptive_chunk`], additionally resolving `extra` data and capping panel length.
pub fn adaptive_chunk_with(
    curve: &Curve,
    a: f64,
    b: f64,
    opts: &ChunkOptions,
    extra: Option<&dyn Fn(f64) -> Vec<f64>>,
) -> Result<Vec<Panel>> {
    if !(a < b) {
        return Err(Error::Geometry(format!("empty interval [{a}, {b}]")));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::Geometry("resolution tolerance must be positive".into()));
    }
    let mut out = Vec::new();
    refine(curve, Panel::new(a, b), opts, extra, 0, &mut out)?;
    Ok(out)
}

fn refine(
    curve: &Curve,
    panel: Panel,
    opts: &ChunkOptions,
    extra: Option<&dyn Fn(f64) -> Vec<f64>>,
    depth: usize,
    out: &mut Vec<Panel>,
) -> Result<()> {
    let ok = panel.len() <= opts.max_len && panel_tail(curve, &panel, extra) <= opts.eps;
    if ok {
        out.push(panel);
        return Ok(());
    }
    if depth >= MAX_SPLIT_DEPTH {
        return Err(Error::Geometry(format!(
            "panel [{}, {}] still unresolved after {MAX_SPLIT_DEPTH} splits",
            panel.a, panel.b
        )));
    }
    let (l, r) = panel.halves();
    refine(curve, l, opts, extra, depth + 1, out)?;
    refine(curve, r, opts, extra, depth + 1, out)
}

/// Equal-length panels on [a, b].
pub fn uniform_panels(a: f64, b: f64, n: usize) -> Vec<Panel> {
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == n { b } else { a + h * (i + 1) as f64 };
            Panel::new(lo, hi)
        })
        .collect()
}

/// Split panels until adjacent lengths differ by at most a factor of two.
pub fn balance_chunks(panels: &[Panel]) -> Vec<Panel> {
    const SLACK: f64 = 1.0 + 1e-9;
    let mut cur = panels.to_vec();
    loop {
        let mut next = Vec::with_capacity(cur.len());
        let mut changed = false;
        for i in 0..cur.len() {
            let len = cur[i].len();
            let left = if i > 0 { cur[i - 1].len() } else { f64::INFINITY };
            let right = cur.get(i + 1).map_or(f64::INFINITY, Panel::len);
            if len > 2.0 * SLACK * left.min(right) {
                let (l, r) = cur[i].halves();
                next.push(l);
                next.push(r);
                changed = true;
            } else {
                next.push(cur[i]);
            }
        }
        cur = next;
        if !changed {
            return cur;
        }
    }
}

/// Buffer sizing: width per side and number of equal panels per side.
#[derive(Debug, Clone, Copy)]
pub struct BufferSpec {
    /// Truncation tolerance whose logarithm sets the width.
    pub eps: f64,
    /// Scale factor on the width and panel count.
    pub tau: f64,
    /// Smallest decay rate min ω_j.
    pub omega0: f64,
    /// Smallest mass min m_j.
    pub m0: f64,
}

impl BufferSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("buffer factor tau must be positive, got {}", self.tau)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("buffer tolerance must lie in (0, 1)"));
        }
        if !(self.omega0 > 0.0 && self.m0 > 0.0) {
            return Err(Error::invalid("buffer decay rate and mass must be positive"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.tau * (1.0 / self.eps).ln() / self.omega0
    }

    /// Panels per side for a core of `n_core` panels spanning parameter length `core_len`.
    pub fn panels_per_side(&self, n_core: usize, core_len: f64) -> usize {
        let raw = self.tau * n_core as f64 * (1.0 / self.eps).ln() / (self.m0 * core_len);
        2 * (raw.ceil() as usize).max(1)
    }
}

/// Attach equal-panel buffers of width `buffers.width()` on both sides and rebalance.
pub fn extend_with_buffers(curve: &Curve, core: &[Panel], buffers: &BufferSpec) -> Result<Boundary> {
    buffers.validate()?;
    if core.is_empty() {
        return Err(Error::Geometry("no core panels".into()));
    }
    let a = core[0].a;
    let b = core[core.len() - 1].b;
    let w = buffers.width();
    let k = buffers.panels_per_side(core.len(), b - a);
    let mut panels: Vec<Panel> = uniform_panels(a - w, a, k)
        .into_iter()
        .map(|p| Panel { is_buffer: true, ..p })
        .collect();
    panels.extend(core.iter().map(|p| Panel { is_buffer: false, ..*p }));
    panels.extend(
        uniform_panels(b, b + w, k)
            .into_iter()
            .map(|p| Panel { is_buffer: true, ..p }),
    );
    Boundary::new(curve.clone(), balance_chunks(&panels))
}

/// Panels with 16 Gauss-Legendre nodes each, split into a core window and two buffers.
#[derive(Debug, Clone)]
pub struct Boundary {
    pub curve: Curve,
    pub panels: Vec<Panel>,
    /// Panel indices of the core window.
    pub core_panels: Range<usize>,
    /// Node indices of the core window.
    pub core: Range<usize>,
    pub nodes: Vec<CurvePoint>,
    /// Smooth weights w_GL · s(t) · len/2.
    pub weights: Vec<f64>,
    /// Arclength coordinate at the nodes, anchored so that it equals t at the left end.
    pub arclength: Vec<f64>,
    /// Arclength coordinate at panel endpoints (one more entry than panels).
    pub panel_arclength: Vec<f64>,
    /// Legendre coefficients of the speed on each panel, 16 per panel.
    speed_coeffs: Vec<f64>,
}

impl Boundary {
    /// Discretize the given panel list; buffer panels must form a prefix and a suffix.
    pub fn new(curve: Curve, panels: Vec<Panel>) -> Result<Boundary> {
        if panels.is_empty() {
            return Err(Error::Geometry("no panels".into()));
        }
        for w in panels.windows(2) {
            if w[0].b != w[1].a {
                return Err(Error::Geometry(format!(
                    "panels not contiguous at {} / {}",
                    w[0].b, w[1].a
                )));
            }
        }
        if panels.iter().any(|p| !(p.len() > 0.0)) {
            return Err(Error::Geometry("degenerate panel".into()));
        }
        let first_core = panels.iter().position(|p| !p.is_buffer).ok_or_else(|| {
            Error::Geometry("boundary has no core panels".into())
        })?;
        let end_core = panels[first_core..]
            .iter()
            .position(|p| p.is_buffer)
            .map_or(panels.len(), |k| first_core + k);
        if panels[end_core..].iter().any(|p| !p.is_buffer) {
            return Err(Error::Geometry("core panels must be contiguous".into()));
        }

        let basis = LegendreBasis::cached(NODES_PER_PANEL);
        let n = panels.len() * NODES_PER_PANEL;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut arclength = Vec::with_capacity(n);
        let mut panel_arclength = Vec::with_capacity(panels.len() + 1);
        let mut speed_coeffs = Vec::with_capacity(n);
        let mut sigma = panels[0].a;
        let mut buf = Vec::new();
        for p in &panels {
            panel_arclength.push(sigma);
            let half = 0.5 * p.len();
            let mut speeds = [0.0; NODES_PER_PANEL];
            for (k, &x) in basis.nodes.iter().enumerate() {
                let cp = curve.eval(p.map(x));
                speeds[k] = cp.speed;
                weights.push(basis.weights[k] * cp.speed * half);
                nodes.push(cp);
            }
            let c = basis.forward(&speeds)?;
            for &x in &basis.nodes {
                arclength.push(sigma + half * integrate_series(&c, x, &mut buf));
            }
            sigma += half * 2.0 * c[0];
            speed_coeffs.extend_from_slice(&c);
        }
        panel_arclength.push(sigma);

        Ok(Boundary {
            curve,
            core_panels: first_core..end_core,
            core: first_core * NODES_PER_PANEL..end_core * NODES_PER_PANEL,
            panels,
            nodes,
            weights,
            arclength,
            panel_arclength,
            speed_coeffs,
        })
    }

    pub fn n_over(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_core(&self) -> usize {
        self.core.len()
    }

    pub fn n_core_panels(&self) -> usize {
        self.core_panels.len()
    }

    pub fn node_range(&self, panel: usize) -> Range<usize> {
        panel * NODES_PER_PANEL..(panel + 1) * NODES_PER_PANEL
    }

    pub fn panel_of(&self, node: usize) -> usize {
        node / NODES_PER_PANEL
    }

    /// Core window [a, b].
    pub fn window(&self) -> (f64, f64) {
        (
            self.panels[self.core_panels.start].a,
            self.panels[self.core_panels.end - 1].b,
        )
    }

    /// Extended window [a', b'].
    pub fn extended(&self) -> (f64, f64) {
        (self.panels[0].a, self.panels[self.panels.len() - 1].b)
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i].t
    }

    /// Arclength coordinate at an arbitrary parameter inside `panel`.
    pub fn arclength_at(&self, panel: usize, t: f64) -> f64 {
        let p = &self.panels[panel];
        let c = &self.speed_coeffs[panel * NODES_PER_PANEL..(panel + 1) * NODES_PER_PANEL];
        let mut buf = Vec::new();
        self.panel_arclength[panel] + 0.5 * p.len() * integrate_series(c, p.unmap(t), &mut buf)
    }

    /// Arclength of the core window from the smooth weights.
    pub fn core_arclength(&self) -> f64 {
        self.weights[self.core.clone()].iter().sum()
    }

    /// Index of the panel containing parameter t, if any.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.extended();
        if t < lo || t > hi {
            return None;
        }
        let k = self.panels.partition_point(|p| p.b < t);
        Some(k.min(self.panels.len() - 1))
    }

    /// CSV dump: panel_id, node_id, t, x, y, nx, ny, speed, weight, is_buffer.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "panel_id,node_id,t,x,y,nx,ny,speed,weight,is_buffer")?;
        for (i, p) in self.nodes.iter().enumerate() {
            let pid = self.panel_of(i);
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                pid,
                i,
                p.t,
                p.pos[0],
                p.pos[1],
                p.normal[0],
                p.normal[1],
                p.speed,
                self.weights[i],
                u8::from(self.panels[pid].is_buffer)
            )?;
        }
        Ok(())
    }
}

/// ∫_{-1}^{x} Σ c_k P_k.
fn integrate_series(c: &[f64], x: f64, buf: &mut Vec<f64>) -> f64 {
    legendre_all(c.len(), x, buf);
    let mut s = c[0] * (x + 1.0);
    for k in 1..c.len() {
        s += c[k] * (buf[k + 1] - buf[k - 1]) / (2 * k + 1) as f64;
    }
    s
}

/// Smallest symmetric-ish window outside which the curve is straight and `trace`
/// has dropped below `eps` relative to its peak. Searches outward from t = 0.
pub fn suggest_window(curve: &Curve, eps: f64, trace: &dyn Fn(f64) -> f64) -> (f64, f64) {
    const STEP: f64 = 0.25;
    const LOOKAHEAD: usize = 40;
    const LIMIT: f64 = 1e4;
    let (dl, dr) = curve.asymptotic_directions();
    let peak = (-400..=400)
        .map(|k| trace(k as f64 * STEP).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let good = |t: f64, dir: [f64; 2]| {
        let p = curve.eval(t);
        let dx = p.d1[0] / p.speed - dir[0];
        let dy = p.d1[1] / p.speed - dir[1];
        dx.hypot(dy) <= eps && trace(t).abs() <= eps * peak
    };
    let search = |sign: f64, dir: [f64; 2]| {
        let mut t = 0.0;
        while t < LIMIT {
            if (0..LOOKAHEAD).all(|k| good(sign * (t + k as f64 * STEP), dir)) {
                return sign * t;
            }
            t += STEP;
        }
        sign * LIMIT
    };
    (search(-1.0, dl).min(-STEP), search(1.0, dr).max(STEP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::curve::{build_curve, CurveFamily};

    fn gauss(b: f64) -> Curve {
        build_curve(CurveFamily::GaussSine, &[2.0, 0.05, b, 0.4]).unwrap()
    }

    #[test]
    fn flat_chunking_is_trivial() {
        let p = adaptive_chunk(&Curve::flat(), -3.0, 5.0, 1e-12).unwrap();
        assert_eq!(p.len(), 1);
        assert!(panel_tail(&Curve::flat(), &p[0], None) < 1e-13);
    }

    #[test]
    fn refinement_concentrates_and_grows() {
        let c = gauss(2.0);
        let coarse = adaptive_chunk(&c, -15.0, 15.0, 1e-8).unwrap();
        let fine = adaptive_chunk(&c, -15.0, 15.0, 1e-12).unwrap();
        assert!(fine.len() > coarse.len());
        let near0 = fine.iter().filter(|p| p.a.abs() < 3.0).map(Panel::len).fold(f64::INFINITY, f64::min);
        let far = fine.iter().filter(|p| p.a.abs() > 12.0).map(Panel::len).fold(0.0, f64::max);
        assert!(near0 < far);
        for p in &fine {
            assert!(panel_tail(&c, p, None) <= 1e-12);
        }
        let again = adaptive_chunk(&c, -15.0, 15.0, 1e-12).unwrap();
        assert_eq!(fine, again);
    }

    #[test]
    fn split_is_midpoint() {
        let (l, r) = Panel::new(1.0, 3.0).halves();
        assert_eq!((l.a, l.b, r.a, r.b), (1.0, 2.0, 2.0, 3.0));
    }

    #[test]
    fn balancing() {
        let ok = uniform_panels(0.0, 4.0, 4);
        assert_eq!(balance_chunks(&ok), ok);
        let p = vec![Panel::new(0.0, 1.0), Panel::new(1.0, 5.0)];
        let b = balance_chunks(&p);
        assert!(b.len() > p.len());
        for w in b.windows(2) {
            let r = w[1].len() / w[0].len();
            assert!((0.5..=2.0).contains(&r));
        }
    }

    #[test]
    fn buffers() {
        let buffers = BufferSpec {
            eps: 1e-16,
            tau: 1.0,
            omega0: 3f64.sqrt(),
            m0: 2.0,
        };
        let core = uniform_panels(-10.0, 10.0, 32);
        let bd = extend_with_buffers(&Curve::flat(), &core, &buffers).unwrap();
        let (a, b) = bd.window();
        let (a2, b2) = bd.extended();
        assert_eq!((a, b), (-10.0, 10.0));
        let w = (1e16f64).ln() / 3f64.sqrt();
        assert!((a - a2 - w).abs() < 1e-12 && (b2 - b - w).abs() < 1e-12);
        assert_eq!(bd.n_core_panels(), 32);
        let double = BufferSpec { tau: 2.0, ..buffers };
        let k1 = buffers.panels_per_side(32, 20.0);
        let k2 = double.panels_per_side(32, 20.0);
        assert!(k2 >= 2 * k1 - 2 && k2 <= 2 * k1);
        assert!(extend_with_buffers(&Curve::flat(), &core, &BufferSpec { tau: 0.0, ..buffers }).is_err());
    }

    #[test]
    fn weights_and_arclength() {
        let c = gauss(2.0);
        let core = adaptive_chunk(&c, -6.0, 6.0, 1e-13).unwrap();
        let bd = Boundary::new(c.clone(), core).unwrap();
        let total: f64 = bd.weights.iter().sum();
        let end = *bd.panel_arclength.last().unwrap() - bd.panel_arclength[0];
        assert!((total - end).abs() < 1e-12 * total);
        // arclength at a node equals the value from the interpolated antiderivative
        let i = 37;
        let s = bd.arclength_at(bd.panel_of(i), bd.t(i));
        assert!((s - bd.arclength[i]).abs() < 1e-13);
        for (i, p) in bd.nodes.iter().enumerate() {
            assert_eq!(*p, c.eval(bd.t(i)));
        }
    }

    #[test]
    fn csv_has_header() {
        let bd = Boundary::new(Curve::flat(), uniform_panels(0.0, 1.0, 2)).unwrap();
        let mut out = Vec::new();
        bd.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("panel_id,node_id,t,x,y,nx,ny,speed,weight,is_buffer\n"));
        assert_eq!(s.lines().count(), 33);
    }
}
