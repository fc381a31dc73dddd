//! Dense realizations of the discrete operators, used as test oracles and for dumps.

use super::kernels::BlockKernel;
use super::layer::near_corrections;
use super::sweep::QOperator;
use crate::error::{Error, Result};
use crate::geom::{Boundary, NODES_PER_PANEL};
use crate::C64;
use rayon::prelude::*;
use std::io::Write;

/// Largest n_over for which dense assembly is allowed.
pub const DENSE_LIMIT: usize = 6000;

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { what: "dense assembly", size: n, limit: DENSE_LIMIT });
    }
    Ok(())
}

/// I - K on core rows, every pair summed directly.
pub fn dense_layer<K: BlockKernel>(boundary: &Boundary, kernel: &K) -> Result<DenseMatrix> {
    guard(boundary.n_over())?;
    let nb = kernel.nb();
    let core = boundary.core.clone();
    let cols = boundary.n_over() * nb;
    let mut m = DenseMatrix::zeros(core.len() * nb, cols);
    m.data.par_chunks_mut(nb * cols).enumerate().for_each(|(k, rows)| {
        let j = core.start + k;
        let x = &boundary.nodes[j];
        let mut blk = [0.0; 4];
        for (l, y) in boundary.nodes.iter().enumerate() {
            if l == j {
                continue;
            }
            kernel.eval(x, y, &mut blk[..nb * nb]);
            for r in 0..nb {
                for c in 0..nb {
                    rows[r * cols + l * nb + c] = C64::new(-blk[r * nb + c] * boundary.weights[l], 0.0);
                }
            }
        }
    });
    for c in near_corrections(boundary, kernel)? {
        let k = c.target - core.start;
        let len = c.sources.len() * nb;
        for r in 0..nb {
            for (i, v) in c.mat[r * len..(r + 1) * len].iter().enumerate() {
                m.data[(k * nb + r) * cols + c.sources.start * nb + i] -= v;
            }
        }
    }
    for k in 0..core.len() * nb {
        m.data[k * cols + core.start * nb + k] += 1.0;
    }
    Ok(m)
}

/// Q from core densities to all nodes by the direct double sum.
pub fn dense_q(q: &QOperator) -> Result<DenseMatrix> {
    guard(q.n_over())?;
    let core = q.core();
    let (sigma, w) = q.nodes();
    let (e, coef) = (q.energy(), q.coef());
    let mut m = DenseMatrix::zeros(q.n_over(), core.len());
    m.data.par_chunks_mut(core.len()).enumerate().for_each(|(j, row)| {
        for (k, l) in core.clone().enumerate() {
            row[k] = C64::from_polar(coef * w[l], e * (sigma[j] - sigma[l]).abs());
        }
    });
    for (k, j) in core.clone().enumerate() {
        let p0 = (j / NODES_PER_PANEL) * NODES_PER_PANEL - core.start;
        for (i, c) in q.correction(k).iter().enumerate() {
            m.data[j * core.len() + p0 + i] += c * coef;
        }
    }
    Ok(m)
}

/// P = E + Q with E the zero extension from core to all nodes.
pub fn dense_p(q: &QOperator) -> Result<DenseMatrix> {
    let mut m = dense_q(q)?;
    let core = q.core();
    for (k, j) in core.clone().enumerate() {
        m.data[j * core.len() + k] += 1.0;
    }
    Ok(m)
}

/// P2 as a (2 n_over) × (2 n_core) matrix on interleaved components.
pub fn dense_p2(q: &QOperator) -> Result<DenseMatrix> {
    let mq = dense_q(q)?;
    let (d, det) = q.p2_params();
    let core = q.core();
    let nc = core.len();
    let mut m = DenseMatrix::zeros(2 * q.n_over(), 2 * nc);
    for j in 0..q.n_over() {
        for k in 0..nc {
            let v = mq.at(j, k) / det;
            // q = Q[(σ1 - d σ2)/det]; μ = σ1 - q, ρ = σ2 + d q
            m.data[(2 * j) * 2 * nc + 2 * k] = -v;
            m.data[(2 * j) * 2 * nc + 2 * k + 1] = v * d;
            m.data[(2 * j + 1) * 2 * nc + 2 * k] = v * d;
            m.data[(2 * j + 1) * 2 * nc + 2 * k + 1] = -v * d * d;
        }
    }
    for (k, j) in core.enumerate() {
        m.data[(2 * j) * 2 * nc + 2 * k] += 1.0;
        m.data[(2 * j + 1) * 2 * nc + 2 * k + 1] += 1.0;
    }
    Ok(m)
}

/// Binary dump: u64 rows, u64 cols (little endian), then row-major (re, im) f64 pairs.
pub fn write_matrix<W: Write>(m: &DenseMatrix, mut w: W) -> Result<()> {
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.cols as u64).to_le_bytes())?;
    for v in &m.data {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}
