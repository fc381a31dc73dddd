//! Fast smooth-rule summation Σ_ℓ K(x_j, y_ℓ) w_ℓ q_ℓ over all node pairs j ≠ ℓ.
//!
//! Interactions beyond r_c = log(1/ε)/ω are dropped outright. What remains is
//! organised on a binary tree over the (parameter-ordered) nodes: well
//! separated cell pairs go through Chebyshev interpolation in the curve
//! parameter on both sides, the rest are summed directly. Without the tree, a
//! window much longer than r_c would still cost O(n²) once panels are refined
//! at fixed geometry, since r_c does not shrink with the panel size.

use super::kernels::BlockKernel;
use crate::geom::{Boundary, CurvePoint, NODES_PER_PANEL};
use crate::C64;
use rayon::prelude::*;
use std::ops::Range;

const CHEB: usize = 24;
const LEAF_NODES: usize = 2 * NODES_PER_PANEL;
/// Largest ω·(cell arclength) for which CHEB points resolve e^{-ω r}.
const MAX_DECAY_SPAN: f64 = 8.0;

#[derive(Debug, Clone)]
struct Cell {
    nodes: Range<usize>,
    children: Option<(usize, usize)>,
    /// Parameter hull of the nodes; the Chebyshev interval.
    t0: f64,
    t1: f64,
    /// Arclength hull.
    s0: f64,
    s1: f64,
    bbox: [f64; 4],
    smooth: bool,
    cheb: Vec<CurvePoint>,
    /// Leaves: CHEB × len matrix ℓ_k(t_i) at the cell's nodes.
    interp: Vec<f64>,
    /// CHEB × CHEB matrix ℓ^parent_k(τ_m) at this cell's Chebyshev points.
    to_parent: Vec<f64>,
}

impl Cell {
    fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    fn arc(&self) -> f64 {
        self.s1 - self.s0
    }
}

fn cheb_points(t0: f64, t1: f64) -> Vec<f64> {
    let (m, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
    (0..CHEB)
        .map(|k| m + h * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * CHEB) as f64).cos())
        .collect()
}

/// Lagrange basis on first-kind Chebyshev points of [t0, t1] evaluated at t.
fn cheb_lagrange(t0: f64, t1: f64, t: f64, out: &mut [f64]) {
    let pts = cheb_points(t0, t1);
    let mut den = 0.0;
    for k in 0..CHEB {
        if t == pts[k] {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let th = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * CHEB) as f64;
        let w = if k % 2 == 0 { th.sin() } else { -th.sin() };
        out[k] = w / (t - pts[k]);
        den += out[k];
    }
    out.iter_mut().for_each(|v| *v /= den);
}

fn bbox_of(points: impl Iterator<Item = [f64; 2]>) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in points {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    b
}

fn bbox_dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dx = (a[0] - b[2]).max(b[0] - a[2]).max(0.0);
    let dy = (a[1] - b[3]).max(b[1] - a[3]).max(0.0);
    dx.hypot(dy)
}

struct Block {
    source: usize,
    /// Row-major (rows·nb) × (cols·nb).
    mat: Vec<f64>,
}

/// Precomputed fast summation plan for one block kernel.
pub struct FarField {
    nb: usize,
    n: usize,
    cells: Vec<Cell>,
    /// Per cell: far interactions (target cell = index).
    m2l: Vec<Vec<Block>>,
    /// Per leaf: direct interactions.
    near: Vec<Vec<Block>>,
    targets: Range<usize>,
    cutoff: f64,
    weights: Vec<f64>,
}

impl FarField {
    /// Build the plan for output nodes `targets` and sources everywhere.
    pub fn build<K: BlockKernel>(
        boundary: &Boundary,
        kernel: &K,
        targets: Range<usize>,
        eps_trunc: f64,
    ) -> FarField {
        let nb = kernel.nb();
        let cutoff = (1.0 / eps_trunc).ln() / kernel.decay_rate();
        let mut cells = Vec::new();
        build_tree(boundary, 0..boundary.n_over(), &mut cells);
        mark_smooth(boundary, kernel.max_rate(), &mut cells);

        let mut m2l_pairs: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
        let mut near_pairs: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
        traverse(&cells, 0, 0, cutoff, &targets, &mut m2l_pairs, &mut near_pairs);

        let m2l: Vec<Vec<Block>> = m2l_pairs
            .par_iter()
            .enumerate()
            .map(|(x, ys)| {
                ys.iter()
                    .map(|&y| Block {
                        source: y,
                        mat: kernel_matrix(kernel, &cells[x].cheb, &cells[y].cheb, None, None),
                    })
                    .collect()
            })
            .collect();
        let near: Vec<Vec<Block>> = near_pairs
            .par_iter()
            .enumerate()
            .map(|(x, ys)| {
                let cx = &cells[x];
                ys.iter()
                    .map(|&y| {
                        let cy = &cells[y];
                        let xs = &boundary.nodes[cx.nodes.clone()];
                        let ysn = &boundary.nodes[cy.nodes.clone()];
                        let w = &boundary.weights[cy.nodes.clone()];
                        let diag = (x == y).then_some(());
                        Block {
                            source: y,
                            mat: kernel_matrix(kernel, xs, ysn, Some(w), diag),
                        }
                    })
                    .collect()
            })
            .collect();
        FarField {
            nb,
            n: boundary.n_over(),
            cells,
            m2l,
            near,
            targets,
            cutoff,
            weights: boundary.weights.clone(),
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Number of (far, near) cell pairs.
    pub fn pair_counts(&self) -> (usize, usize) {
        (
            self.m2l.iter().map(Vec::len).sum(),
            self.near.iter().map(Vec::len).sum(),
        )
    }

    /// out[j] += Σ_{ℓ≠j} K(x_j, y_ℓ) w_ℓ q_ℓ for j in the target range, with w the smooth weights.
    /// `q` and `out` hold nb interleaved components per node; `out` covers all nodes.
    pub fn apply(&self, q: &[C64], out: &mut [C64]) {
        let nb = self.nb;
        assert_eq!(q.len(), self.n * nb);
        assert_eq!(out.len(), self.n * nb);
        let pn = CHEB * nb;
        let ncell = self.cells.len();

        // upward: multipole weights at Chebyshev points
        let mut up = vec![C64::new(0.0, 0.0); ncell * pn];
        for c in (0..ncell).rev() {
            let cell = &self.cells[c];
            if !cell.smooth {
                continue;
            }
            let (head, tail) = up.split_at_mut((c + 1) * pn);
            let w = &mut head[c * pn..];
            match cell.children {
                None => {
                    let len = cell.nodes.len();
                    for k in 0..CHEB {
                        let row = &cell.interp[k * len..(k + 1) * len];
                        for b in 0..nb {
                            let mut acc = C64::new(0.0, 0.0);
                            for (i, &s) in row.iter().enumerate() {
                                let node = cell.nodes.start + i;
                                acc += q[node * nb + b] * (s * self.weights[node]);
                            }
                            w[k * nb + b] = acc;
                        }
                    }
                }
                Some((l, r)) => {
                    for ch in [l, r] {
                        let t = &self.cells[ch].to_parent;
                        let wc = &tail[(ch - c - 1) * pn..(ch - c) * pn];
                        for k in 0..CHEB {
                            for b in 0..nb {
                                let mut acc = C64::new(0.0, 0.0);
                                for m in 0..CHEB {
                                    acc += wc[m * nb + b] * t[k * CHEB + m];
                                }
                                w[k * nb + b] += acc;
                            }
                        }
                    }
                }
            }
        }

        // far interactions into local values at Chebyshev points
        let mut down: Vec<Vec<C64>> = (0..ncell)
            .into_par_iter()
            .map(|x| {
                let mut l = vec![C64::new(0.0, 0.0); if self.m2l[x].is_empty() { 0 } else { pn }];
                for blk in &self.m2l[x] {
                    let wy = &up[blk.source * pn..(blk.source + 1) * pn];
                    matvec_acc(&blk.mat, pn, pn, wy, &mut l);
                }
                l
            })
            .collect();

        // downward pass
        for c in 0..ncell {
            let cell = &self.cells[c];
            if !cell.smooth {
                continue;
            }
            if let Some((l, r)) = cell.children {
                if down[c].is_empty() {
                    continue;
                }
                let parent = std::mem::take(&mut down[c]);
                for ch in [l, r] {
                    let t = &self.cells[ch].to_parent;
                    let dc = &mut down[ch];
                    if dc.is_empty() {
                        dc.resize(pn, C64::new(0.0, 0.0));
                    }
                    for m in 0..CHEB {
                        for b in 0..nb {
                            let mut acc = C64::new(0.0, 0.0);
                            for k in 0..CHEB {
                                acc += parent[k * nb + b] * t[k * CHEB + m];
                            }
                            dc[m * nb + b] += acc;
                        }
                    }
                }
                down[c] = parent;
            }
        }

        // leaves: evaluate local expansions and add direct interactions
        let leaves: Vec<usize> = (0..ncell)
            .filter(|&c| self.cells[c].is_leaf() && overlaps(&self.cells[c].nodes, &self.targets))
            .collect();
        let results: Vec<(usize, Vec<C64>)> = leaves
            .par_iter()
            .map(|&x| {
                let cell = &self.cells[x];
                let len = cell.nodes.len();
                let mut o = vec![C64::new(0.0, 0.0); len * nb];
                if cell.smooth && !down[x].is_empty() {
                    let lx = &down[x];
                    for k in 0..CHEB {
                        let row = &cell.interp[k * len..(k + 1) * len];
                        for (i, &s) in row.iter().enumerate() {
                            for b in 0..nb {
                                o[i * nb + b] += lx[k * nb + b] * s;
                            }
                        }
                    }
                }
                for blk in &self.near[x] {
                    let ys = &self.cells[blk.source].nodes;
                    let src = &q[ys.start * nb..ys.end * nb];
                    matvec_acc(&blk.mat, len * nb, ys.len() * nb, src, &mut o);
                }
                (x, o)
            })
            .collect();
        for (x, o) in results {
            let cell = &self.cells[x];
            for (i, node) in cell.nodes.clone().enumerate() {
                if self.targets.contains(&node) {
                    for b in 0..nb {
                        out[node * nb + b] += o[i * nb + b];
                    }
                }
            }
        }
    }
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

#[inline]
fn matvec_acc(mat: &[f64], rows: usize, cols: usize, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(mat.len(), rows * cols);
    for (i, yi) in y.iter_mut().enumerate().take(rows) {
        let row = &mat[i * cols..(i + 1) * cols];
        let (mut re, mut im) = (0.0, 0.0);
        for (a, v) in row.iter().zip(x) {
            re += a * v.re;
            im += a * v.im;
        }
        yi.re += re;
        yi.im += im;
    }
}

/// Kernel block matrix between point sets; optional source weights and self-exclusion.
fn kernel_matrix<K: BlockKernel>(
    kernel: &K,
    xs: &[CurvePoint],
    ys: &[CurvePoint],
    weights: Option<&[f64]>,
    skip_diag: Option<()>,
) -> Vec<f64> {
    let nb = kernel.nb();
    let cols = ys.len() * nb;
    let mut m = vec![0.0; xs.len() * nb * cols];
    let mut blk = [0.0; 4];
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            if skip_diag.is_some() && i == j {
                continue;
            }
            kernel.eval(x, y, &mut blk[..nb * nb]);
            let w = weights.map_or(1.0, |w| w[j]);
            for a in 0..nb {
                for b in 0..nb {
                    m[(i * nb + a) * cols + j * nb + b] = blk[a * nb + b] * w;
                }
            }
        }
    }
    m
}

fn build_tree(boundary: &Boundary, nodes: Range<usize>, cells: &mut Vec<Cell>) -> usize {
    let idx = cells.len();
    let pts = &boundary.nodes[nodes.clone()];
    let t0 = pts[0].t;
    let t1 = pts[pts.len() - 1].t;
    cells.push(Cell {
        nodes: nodes.clone(),
        children: None,
        t0,
        t1,
        s0: boundary.arclength[nodes.start],
        s1: boundary.arclength[nodes.end - 1],
        bbox: bbox_of(pts.iter().map(|p| p.pos)),
        smooth: false,
        cheb: Vec::new(),
        interp: Vec::new(),
        to_parent: Vec::new(),
    });
    if nodes.len() > LEAF_NODES {
        let panels = nodes.len() / NODES_PER_PANEL;
        let mid = nodes.start + (panels / 2) * NODES_PER_PANEL;
        let l = build_tree(boundary, nodes.start..mid, cells);
        let r = build_tree(boundary, mid..nodes.end, cells);
        cells[idx].children = Some((l, r));
    }
    idx
}

/// A cell is smooth when the curve is resolved on its Chebyshev points, the
/// kernel decay across it is mild, and (for inner cells) both children are smooth.
fn mark_smooth(boundary: &Boundary, max_rate: f64, cells: &mut [Cell]) {
    let curve = &boundary.curve;
    for c in (0..cells.len()).rev() {
        let (t0, t1) = (cells[c].t0, cells[c].t1);
        let kids_ok = match cells[c].children {
            None => true,
            Some((l, r)) => cells[l].smooth && cells[r].smooth,
        };
        if !kids_ok || max_rate * cells[c].arc() > MAX_DECAY_SPAN || !(t1 > t0) {
            continue;
        }
        let tp = cheb_points(t0, t1);
        let cheb: Vec<CurvePoint> = tp.iter().map(|&t| curve.eval(t)).collect();
        // resolution check at points interleaved with the Chebyshev nodes
        let mut lag = [0.0; CHEB];
        let mut err: f64 = 0.0;
        let diam = {
            let b = bbox_of(cheb.iter().map(|p| p.pos));
            (b[2] - b[0]).hypot(b[3] - b[1])
        };
        for k in 0..CHEB - 1 {
            let t = 0.5 * (tp[k] + tp[k + 1]);
            cheb_lagrange(t0, t1, t, &mut lag);
            let exact = curve.eval(t);
            let mut approx = [0.0; 2];
            let mut nrm = [0.0; 2];
            // offsets from the first point, so rounding scales with the cell and not with |x|
            let origin = cheb[0].pos;
            for m in 0..CHEB {
                for d in 0..2 {
                    approx[d] += lag[m] * (cheb[m].pos[d] - origin[d]);
                    nrm[d] += lag[m] * cheb[m].normal[d];
                }
            }
            let ex = [exact.pos[0] - origin[0], exact.pos[1] - origin[1]];
            err = err
                .max((approx[0] - ex[0]).hypot(approx[1] - ex[1]) / (1.0 + diam))
                .max((nrm[0] - exact.normal[0]).hypot(nrm[1] - exact.normal[1]));
        }
        if err > 1e-14 {
            continue;
        }
        let cell = &mut cells[c];
        cell.bbox = {
            let b1 = cell.bbox;
            let b2 = bbox_of(cheb.iter().map(|p| p.pos));
            [b1[0].min(b2[0]), b1[1].min(b2[1]), b1[2].max(b2[2]), b1[3].max(b2[3])]
        };
        cell.cheb = cheb;
        cell.smooth = true;
    }
    // interpolation operators
    for c in 0..cells.len() {
        if !cells[c].smooth {
            continue;
        }
        let mut lag = [0.0; CHEB];
        match cells[c].children {
            None => {
                let len = cells[c].nodes.len();
                let mut m = vec![0.0; CHEB * len];
                for (i, node) in cells[c].nodes.clone().enumerate() {
                    cheb_lagrange(cells[c].t0, cells[c].t1, boundary.nodes[node].t, &mut lag);
                    for k in 0..CHEB {
                        m[k * len + i] = lag[k];
                    }
                }
                cells[c].interp = m;
            }
            Some((l, r)) => {
                let (t0, t1) = (cells[c].t0, cells[c].t1);
                for ch in [l, r] {
                    let mut m = vec![0.0; CHEB * CHEB];
                    for (mi, p) in cells[ch].cheb.iter().enumerate() {
                        cheb_lagrange(t0, t1, p.t, &mut lag);
                        for k in 0..CHEB {
                            m[k * CHEB + mi] = lag[k];
                        }
                    }
                    cells[ch].to_parent = m;
                }
            }
        }
    }
}

fn admissible(x: &Cell, y: &Cell) -> bool {
    let size = x.arc().max(y.arc());
    let gap = (x.s0 - y.s1).max(y.s0 - x.s1);
    gap >= size && bbox_dist(&x.bbox, &y.bbox) >= 0.5 * size
}

fn traverse(
    cells: &[Cell],
    x: usize,
    y: usize,
    cutoff: f64,
    targets: &Range<usize>,
    m2l: &mut [Vec<usize>],
    near: &mut [Vec<usize>],
) {
    let (cx, cy) = (&cells[x], &cells[y]);
    if !overlaps(&cx.nodes, targets) || bbox_dist(&cx.bbox, &cy.bbox) > cutoff {
        return;
    }
    if cx.smooth && cy.smooth && admissible(cx, cy) {
        m2l[x].push(y);
        return;
    }
    match (cx.children, cy.children) {
        (None, None) => near[x].push(y),
        (Some((a, b)), None) => {
            traverse(cells, a, y, cutoff, targets, m2l, near);
            traverse(cells, b, y, cutoff, targets, m2l, near);
        }
        (None, Some((a, b))) => {
            traverse(cells, x, a, cutoff, targets, m2l, near);
            traverse(cells, x, b, cutoff, targets, m2l, near);
        }
        (Some((a, b)), Some((c, d))) => {
            if cx.nodes.len() >= cy.nodes.len() {
                traverse(cells, a, y, cutoff, targets, m2l, near);
                traverse(cells, b, y, cutoff, targets, m2l, near);
            } else {
                traverse(cells, x, c, cutoff, targets, m2l, near);
                traverse(cells, x, d, cutoff, targets, m2l, near);
            }
        }
    }
}
