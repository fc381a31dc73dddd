//! Q, the convolution with c·e^{iE|σ - σ'|} from core densities to all nodes,
//! evaluated by two linear recurrences. σ is arclength, so the kernel is the
//! outgoing 1D Helmholtz kernel along the curve.

use super::MediumParams;
use crate::error::{Error, Result};
use crate::geom::{Boundary, NODES_PER_PANEL};
use crate::quad::kink_weights_with;
use crate::C64;
use rayon::prelude::*;
use std::ops::Range;

#[derive(Debug, Clone)]
pub struct QOperator {
    n: usize,
    core: Range<usize>,
    sigma: Vec<f64>,
    weights: Vec<f64>,
    energy: f64,
    coef: f64,
    /// Forward phase e^{iE(σ_j - σ_{j-1})}, entry 0 unused.
    phase: Vec<C64>,
    /// Per core node: replacement minus smooth rule on its own panel.
    corr: Vec<[C64; NODES_PER_PANEL]>,
    /// d and det V of the P2 change of variables.
    d: f64,
    det: f64,
}

impl QOperator {
    /// Q with prefactor `coef` (m²/E for one mass, m̄²/E for two).
    pub fn new(boundary: &Boundary, energy: f64, coef: f64) -> Result<QOperator> {
        if energy == 0.0 || !energy.is_finite() {
            return Err(Error::invalid("Q needs a finite nonzero energy"));
        }
        let sigma = boundary.arclength.clone();
        let n = sigma.len();
        let mut phase = vec![C64::new(1.0, 0.0); n];
        for j in 1..n {
            phase[j] = C64::from_polar(1.0, energy * (sigma[j] - sigma[j - 1]));
        }
        let corr: Vec<[C64; NODES_PER_PANEL]> = boundary
            .core
            .clone()
            .into_par_iter()
            .map(|j| {
                let p = boundary.panel_of(j);
                let panel = &boundary.panels[p];
                let sj = sigma[j];
                let mut w = kink_weights_with(panel, boundary.t(j), energy, |s| {
                    ((sj - boundary.arclength_at(p, s)).abs(), boundary.curve.eval(s).speed)
                });
                for (k, l) in boundary.node_range(p).enumerate() {
                    w[k] -= C64::from_polar(boundary.weights[l], energy * (sj - sigma[l]).abs());
                }
                w
            })
            .collect();
        Ok(QOperator {
            n,
            core: boundary.core.clone(),
            sigma,
            weights: boundary.weights.clone(),
            energy,
            coef,
            phase,
            corr,
            d: 0.0,
            det: -1.0,
        })
    }

    pub fn single(boundary: &Boundary, medium: &MediumParams) -> Result<QOperator> {
        let m = medium.m1;
        QOperator::new(boundary, medium.energy, m * m / medium.energy)
    }

    /// Q2 with prefactor m̄²/E, carrying the change of variables of P2.
    pub fn two_mass(boundary: &Boundary, medium: &MediumParams) -> Result<QOperator> {
        let m = medium.mbar();
        let mut q = QOperator::new(boundary, medium.energy, m * m / medium.energy)?;
        q.d = medium.d();
        q.det = medium.det_v();
        Ok(q)
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn coef(&self) -> f64 {
        self.coef
    }

    pub fn n_over(&self) -> usize {
        self.n
    }

    pub fn core(&self) -> Range<usize> {
        self.core.clone()
    }

    /// Qρ at all nodes for ρ on the core nodes.
    pub fn apply(&self, rho: &[C64]) -> Vec<C64> {
        assert_eq!(rho.len(), self.core.len());
        let n = self.n;
        let c0 = self.core.start;
        let charge = |j: usize| -> C64 {
            if self.core.contains(&j) {
                rho[j - c0] * self.weights[j]
            } else {
                C64::new(0.0, 0.0)
            }
        };
        let mut out = vec![C64::new(0.0, 0.0); n];
        // up[j] = Σ_{ℓ≤j} e^{iE(σ_j - σ_ℓ)} c_ℓ
        let mut up = C64::new(0.0, 0.0);
        for j in 0..n {
            up = self.phase[j] * up + charge(j);
            out[j] = up;
        }
        // down[j] = Σ_{ℓ>j} e^{iE(σ_ℓ - σ_j)} c_ℓ
        let mut down = C64::new(0.0, 0.0);
        for j in (0..n.saturating_sub(1)).rev() {
            down = self.phase[j + 1] * (down + charge(j + 1));
            out[j] += down;
        }
        for (k, j) in self.core.clone().enumerate() {
            let p0 = (j / NODES_PER_PANEL) * NODES_PER_PANEL;
            let src = &rho[p0 - c0..p0 - c0 + NODES_PER_PANEL];
            let s: C64 = self.corr[k].iter().zip(src).map(|(w, r)| w * r).sum();
            out[j] += s;
        }
        for v in out.iter_mut() {
            *v *= self.coef;
        }
        out
    }

    /// Pρ = ρ + Qρ with ρ extended by zero to all nodes.
    pub fn apply_p(&self, rho: &[C64]) -> Vec<C64> {
        let mut out = self.apply(rho);
        for (o, r) in out[self.core.clone()].iter_mut().zip(rho) {
            *o += r;
        }
        out
    }

    /// P2σ = (I + V diag(Q2, 0) V⁻¹)σ with V = [[-1, d], [d, 1]].
    /// Input interleaved (σ1, σ2) on core nodes; output interleaved (μ, ρ) on all nodes.
    pub fn apply_p2(&self, sigma: &[C64]) -> Vec<C64> {
        assert_eq!(sigma.len(), 2 * self.core.len());
        let (d, det) = (self.d, self.det);
        let first: Vec<C64> = sigma.chunks(2).map(|s| (s[0] - s[1] * d) / det).collect();
        let q = self.apply(&first);
        let mut out = vec![C64::new(0.0, 0.0); 2 * self.n];
        for (j, qj) in q.iter().enumerate() {
            out[2 * j] = -qj;
            out[2 * j + 1] = qj * d;
        }
        let c0 = self.core.start;
        for (k, s) in sigma.chunks(2).enumerate() {
            out[2 * (c0 + k)] += s[0];
            out[2 * (c0 + k) + 1] += s[1];
        }
        out
    }

    /// Dense column structure shared with the oracle: (σ_j, w_j).
    pub(crate) fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.sigma, &self.weights)
    }

    pub(crate) fn correction(&self, core_node: usize) -> &[C64; NODES_PER_PANEL] {
        &self.corr[core_node]
    }

    pub(crate) fn p2_params(&self) -> (f64, f64) {
        (self.d, self.det)
    }
}
