//! Discrete L = I - 2m S and L2 = I - K with local log corrections.
//!
//! The smooth rule is used for every pair except on the target panel and its
//! two neighbours, where the kernel split A log|t - s| + B is integrated with
//! log-corrected weights for the A part and the smooth rule for B.

use super::farfield::FarField;
use super::kernels::{BlockKernel, SingleLayer, TwoMassBlock};
use super::MediumParams;
use crate::error::Result;
use crate::geom::{Boundary, NODES_PER_PANEL};
use crate::quad::log_corrected_weights;
use crate::C64;
use rayon::prelude::*;
use std::ops::Range;

/// Correction to the smooth rule for one target node.
#[derive(Debug, Clone)]
pub struct Correction {
    pub target: usize,
    pub sources: Range<usize>,
    /// Row-major nb × (len · nb), added to the smooth-rule kernel sum.
    pub mat: Vec<f64>,
}

/// Corrections for every core node.
pub fn near_corrections<K: BlockKernel>(boundary: &Boundary, kernel: &K) -> Result<Vec<Correction>> {
    let nb = kernel.nb();
    let np = boundary.panels.len();
    let per_panel: Vec<Result<Vec<Correction>>> = boundary
        .core_panels
        .clone()
        .into_par_iter()
        .map(|i| {
            let p0 = i.saturating_sub(1);
            let p1 = (i + 2).min(np);
            let sources = p0 * NODES_PER_PANEL..p1 * NODES_PER_PANEL;
            let cols = sources.len() * nb;
            let mut out = Vec::with_capacity(NODES_PER_PANEL);
            let mut a = [0.0; 4];
            let mut b = [0.0; 4];
            for j in boundary.node_range(i) {
                let x = &boundary.nodes[j];
                let mut mat = vec![0.0; nb * cols];
                for p in p0..p1 {
                    let wl = log_corrected_weights(&boundary.panels[p], x.t)?;
                    for (k, l) in boundary.node_range(p).enumerate() {
                        let y = &boundary.nodes[l];
                        let col = (l - sources.start) * nb;
                        if l == j {
                            kernel.diag(x, &mut a[..nb * nb], &mut b[..nb * nb]);
                            for r in 0..nb {
                                for c in 0..nb {
                                    mat[r * cols + col + c] = wl[k] * a[r * nb + c] * y.speed
                                        + boundary.weights[l] * b[r * nb + c];
                                }
                            }
                        } else {
                            kernel.log_part(x, y, &mut a[..nb * nb]);
                            let f = wl[k] * y.speed - boundary.weights[l] * (x.t - y.t).abs().ln();
                            for r in 0..nb {
                                for c in 0..nb {
                                    mat[r * cols + col + c] = a[r * nb + c] * f;
                                }
                            }
                        }
                    }
                }
                out.push(Correction { target: j, sources: sources.clone(), mat });
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(boundary.n_core());
    for v in per_panel {
        all.extend(v?);
    }
    Ok(all)
}

/// Matrix-free I - K from buffered densities to core values.
pub struct LayerOperator {
    nb: usize,
    n: usize,
    core: Range<usize>,
    far: FarField,
    corr: Vec<Correction>,
}

impl LayerOperator {
    pub fn build<K: BlockKernel>(boundary: &Boundary, kernel: &K, eps_trunc: f64) -> Result<LayerOperator> {
        let corr = near_corrections(boundary, kernel)?;
        let far = FarField::build(boundary, kernel, boundary.core.clone(), eps_trunc);
        Ok(LayerOperator {
            nb: kernel.nb(),
            n: boundary.n_over(),
            core: boundary.core.clone(),
            far,
            corr,
        })
    }

    /// L = I - 2m S_ω for equal masses.
    pub fn single(boundary: &Boundary, medium: &MediumParams, eps_trunc: f64) -> Result<LayerOperator> {
        let kernel = SingleLayer { omega: medium.omega1(), coef: 2.0 * medium.m1 };
        LayerOperator::build(boundary, &kernel, eps_trunc)
    }

    /// L2 acting on interleaved (μ, ρ).
    pub fn two_mass(boundary: &Boundary, medium: &MediumParams, eps_trunc: f64) -> Result<LayerOperator> {
        let kernel = TwoMassBlock { w1: medium.omega1(), w2: medium.omega2(), mbar: medium.mbar() };
        LayerOperator::build(boundary, &kernel, eps_trunc)
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn far_field(&self) -> &FarField {
        &self.far
    }

    /// Σ_ℓ K(t_j, t_ℓ) q_ℓ with quadrature on the core nodes, interleaved.
    pub fn apply_kernel(&self, q: &[C64]) -> Vec<C64> {
        let nb = self.nb;
        let mut full = vec![C64::new(0.0, 0.0); self.n * nb];
        self.far.apply(q, &mut full);
        let mut out = full[self.core.start * nb..self.core.end * nb].to_vec();
        let c0 = self.core.start;
        out.par_chunks_mut(NODES_PER_PANEL * nb)
            .zip(self.corr.par_chunks(NODES_PER_PANEL))
            .for_each(|(o, cs)| {
                for c in cs {
                    let src = &q[c.sources.start * nb..c.sources.end * nb];
                    let cols = src.len();
                    let base = ((c.target - c0) % NODES_PER_PANEL) * nb;
                    for r in 0..nb {
                        let row = &c.mat[r * cols..(r + 1) * cols];
                        let (mut re, mut im) = (0.0, 0.0);
                        for (a, v) in row.iter().zip(src) {
                            re += a * v.re;
                            im += a * v.im;
                        }
                        o[base + r] += C64::new(re, im);
                    }
                }
            });
        out
    }

    /// (I - K)q restricted to core nodes; `q` covers all nodes.
    pub fn apply(&self, q: &[C64]) -> Vec<C64> {
        let nb = self.nb;
        let mut out = self.apply_kernel(q);
        for (o, v) in out.iter_mut().zip(&q[self.core.start * nb..self.core.end * nb]) {
            *o = *v - *o;
        }
        out
    }
}
