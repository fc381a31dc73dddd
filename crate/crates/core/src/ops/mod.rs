//! Layer kernels and the discrete operators L, P, Q (one mass) and L2, P2 (two masses).
//!
//! Densities are complex vectors over boundary nodes. Two-mass densities are
//! interleaved per node as (μ, ρ) or (σ1, σ2).

pub mod dense;
pub mod farfield;
pub mod kernels;
pub mod layer;
pub mod sweep;

pub use dense::{dense_layer, dense_q, dense_p, dense_p2, write_matrix, DenseMatrix, DENSE_LIMIT};
pub use farfield::FarField;
pub use kernels::{
    green, grad_green, green_derivs, kernel_d, kernel_dp_diff, kernel_s, kernel_sp, BlockKernel, Kernel,
    SingleLayer, TwoMassBlock, INV_2PI,
};
pub use layer::{near_corrections, Correction, LayerOperator};
pub use sweep::QOperator;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Masses on both sides and the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    pub m1: f64,
    pub m2: f64,
    pub energy: f64,
}

impl MediumParams {
    pub fn new(m1: f64, m2: f64, energy: f64) -> Result<MediumParams> {
        let p = MediumParams { m1, m2, energy };
        p.validate()?;
        Ok(p)
    }

    pub fn equal(m: f64, energy: f64) -> Result<MediumParams> {
        MediumParams::new(m, m, energy)
    }

    pub fn validate(&self) -> Result<()> {
        let MediumParams { m1, m2, energy } = *self;
        if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
            return Err(Error::config("masses", "masses must be positive and finite"));
        }
        if !energy.is_finite() || energy == 0.0 {
            return Err(Error::config("energy", "energy must be finite and nonzero"));
        }
        if energy.abs() >= m1.min(m2) {
            return Err(Error::config(
                "energy",
                format!("|E| < min(m1, m2) is required, got |E| = {} and min(m) = {}", energy.abs(), m1.min(m2)),
            ));
        }
        Ok(())
    }

    pub fn omega1(&self) -> f64 {
        (self.m1 * self.m1 - self.energy * self.energy).sqrt()
    }

    pub fn omega2(&self) -> f64 {
        (self.m2 * self.m2 - self.energy * self.energy).sqrt()
    }

    pub fn omega_min(&self) -> f64 {
        self.omega1().min(self.omega2())
    }

    pub fn m_min(&self) -> f64 {
        self.m1.min(self.m2)
    }

    pub fn mbar(&self) -> f64 {
        0.5 * (self.m1 + self.m2)
    }

    /// d = 1/(2 m2) - 1/(2 m1), the second entry of the null vector (-1, d).
    pub fn d(&self) -> f64 {
        0.5 / self.m2 - 0.5 / self.m1
    }

    /// det V = -1 - d².
    pub fn det_v(&self) -> f64 {
        let d = self.d();
        -1.0 - d * d
    }

    pub fn is_equal(&self) -> bool {
        self.m1 == self.m2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medium_derived_quantities() {
        let p = MediumParams::new(2.0, 3.0, 1.0).unwrap();
        assert!((p.omega1() - 3f64.sqrt()).abs() < 1e-15);
        assert!((p.omega2() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.mbar(), 2.5);
        let expect = -1.0 - (1.0 / 6.0 - 0.25f64).powi(2);
        assert!((p.det_v() - expect).abs() < 1e-15);
        assert!((p.det_v() + 1.006_944_444_444_444).abs() < 1e-12);
        assert!(!p.is_equal());
    }

    #[test]
    fn medium_rejects_bad_energy() {
        assert!(MediumParams::new(2.0, 3.0, 2.0).is_err());
        assert!(MediumParams::new(2.0, 3.0, 0.0).is_err());
        assert!(MediumParams::new(-1.0, 3.0, 0.5).is_err());
        assert!(MediumParams::new(2.0, 3.0, -1.5).is_ok());
    }
}
