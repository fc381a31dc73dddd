use crate::error::{Error, Result};
use crate::geom::{build_curve, Curve, CurveFamily};
use crate::krylov::DEFAULT_TOL;
use crate::ops::MediumParams;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Ω1 lies below the interface (against the normal), Ω2 above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Omega1,
    Omega2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub pos: [f64; 2],
    /// Complex strength as [re, im].
    #[serde(default = "unit_strength")]
    pub strength: C64,
    pub side: Side,
}

fn unit_strength() -> C64 {
    C64::new(1.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub family: CurveFamily,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve> {
        build_curve(self.family, &self.params).map_err(|e| Error::config("curve", e.to_string()))
    }
}

fn default_eps() -> f64 {
    1e-12
}
fn default_tau() -> f64 {
    1.0
}
fn default_gmres_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_iter() -> usize {
    500
}
fn default_trunc() -> f64 {
    1e-16
}

/// Everything needed to set up and solve one interface problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub medium: MediumParams,
    pub curve: CurveSpec,
    /// Core window [a, b]; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Resolution tolerance for adaptive chunking and the automatic window.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Uniform core discretization with this many panels instead of adaptive chunking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c: Option<usize>,
    /// Buffer scale factor.
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub sources: Vec<PointSource>,
    #[serde(default = "default_gmres_tol")]
    pub gmres_tol: f64,
    #[serde(default = "default_max_iter")]
    pub gmres_max_iter: usize,
    /// Interactions below this size are dropped from the layer sums; also sets the buffer width.
    #[serde(default = "default_trunc")]
    pub eps_trunc: f64,
}

impl ProblemConfig {
    /// Equal masses, Gaussian-sine or flat curve, one unit source: the common demo setup.
    pub fn point_source(medium: MediumParams, curve: CurveSpec, src: [f64; 2], side: Side) -> ProblemConfig {
        ProblemConfig {
            medium,
            curve,
            window: None,
            eps: default_eps(),
            n_c: None,
            tau: default_tau(),
            sources: vec![PointSource { pos: src, strength: unit_strength(), side }],
            gmres_tol: default_gmres_tol(),
            gmres_max_iter: default_max_iter(),
            eps_trunc: default_trunc(),
        }
    }

    /// Field-level checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.curve.build()?;
        if let Some([a, b]) = self.window {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::config("window", format!("need a < b, got [{a}, {b}]")));
            }
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config("eps", "must lie in (0, 1)"));
        }
        if self.n_c == Some(0) {
            return Err(Error::config("n_c", "must be positive"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config("tau", "must be positive"));
        }
        if !(self.gmres_tol > 0.0) {
            return Err(Error::config("gmres_tol", "must be positive"));
        }
        if self.gmres_max_iter == 0 {
            return Err(Error::config("gmres_max_iter", "must be positive"));
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(Error::config("eps_trunc", "must lie in (0, 1)"));
        }
        for (k, s) in self.sources.iter().enumerate() {
            if !s.pos.iter().all(|v| v.is_finite()) || !(s.strength.re.is_finite() && s.strength.im.is_finite()) {
                return Err(Error::config(format!("sources[{k}]"), "non-finite entry"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<ProblemConfig> {
        let c: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ProblemConfig> {
        ProblemConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
