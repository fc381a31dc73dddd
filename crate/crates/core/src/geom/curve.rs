use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveFamily {
    Flat,
    GaussSine,
    VShape,
    Custom,
}

impl std::str::FromStr for CurveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(CurveFamily::Flat),
            "gausssine" | "gauss_sine" => Ok(CurveFamily::GaussSine),
            "vshape" | "v_shape" => Ok(CurveFamily::VShape),
            "custom" => Ok(CurveFamily::Custom),
            other => Err(Error::invalid(format!("unknown curve family '{other}'"))),
        }
    }
}

/// Everything the kernels need to know about one point of the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub pos: Point,
    pub d1: Point,
    pub d2: Point,
    pub speed: f64,
    pub normal: Point,
}

impl CurvePoint {
    /// γ''·n / s², the signed curvature.
    pub fn curvature(&self) -> f64 {
        (self.d2[0] * self.normal[0] + self.d2[1] * self.normal[1]) / (self.speed * self.speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Flat,
    /// y = A e^{-α t²} sin(b t + φ)
    GaussSine { amp: f64, alpha: f64, freq: f64, phase: f64 },
    /// y = k δ log(2 cosh(t/δ)): two rays of slope ±k joined smoothly
    VShape { slope: f64, width: f64 },
    /// (t + Σ a_k T_k(u), Σ b_k T_k(u)) with u = tanh(t/L)
    Custom { scale: f64, x: Vec<f64>, y: Vec<f64> },
}

/// Analytic interface parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    family: CurveFamily,
    params: Vec<f64>,
    shape: Shape,
}

/// Build a curve from a family name and its parameter list.
///
/// * `Flat`: no parameters.
/// * `GaussSine`: `[amplitude, envelope, frequency, phase]`.
/// * `VShape`: `[slope, width]`.
/// * `Custom`: `[scale, n, a_0..a_{n-1}, b_0..b_{n-1}]`, Chebyshev coefficients of
///   the horizontal and vertical displacements in the variable tanh(t/scale).
pub fn build_curve(family: CurveFamily, params: &[f64]) -> Result<Curve> {
    if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("non-finite curve parameter {bad}")));
    }
    let need = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{family:?} takes {n} parameters, got {}",
                params.len()
            )))
        }
    };
    let shape = match family {
        CurveFamily::Flat => {
            need(0)?;
            Shape::Flat
        }
        CurveFamily::GaussSine => {
            need(4)?;
            if params[1] <= 0.0 {
                return Err(Error::invalid("GaussSine envelope rate must be positive"));
            }
            Shape::GaussSine {
                amp: params[0],
                alpha: params[1],
                freq: params[2],
                phase: params[3],
            }
        }
        CurveFamily::VShape => {
            need(2)?;
            if params[1] <= 0.0 {
                return Err(Error::invalid("VShape width must be positive"));
            }
            Shape::VShape {
                slope: params[0],
                width: params[1],
            }
        }
        CurveFamily::Custom => {
            if params.len() < 2 {
                return Err(Error::invalid("Custom needs [scale, n, coefficients...]"));
            }
            let scale = params[0];
            let n = params[1];
            if scale <= 0.0 || n < 1.0 || n.fract() != 0.0 {
                return Err(Error::invalid("Custom needs a positive scale and integer n ≥ 1"));
            }
            let n = n as usize;
            need(2 + 2 * n)?;
            let shape = Shape::Custom {
                scale,
                x: params[2..2 + n].to_vec(),
                y: params[2 + n..].to_vec(),
            };
            // the horizontal speed must stay positive for a graph-like curve
            let probe = Curve {
                family,
                params: params.to_vec(),
                shape: shape.clone(),
            };
            for i in 0..=400 {
                let u = -0.999 + 1.998 * i as f64 / 400.0;
                let t = scale * u.atanh();
                if probe.eval(t).speed <= 1e-8 {
                    return Err(Error::invalid("Custom curve has vanishing speed"));
                }
            }
            shape
        }
    };
    Ok(Curve {
        family,
        params: params.to_vec(),
        shape,
    })
}

/// Stable log(2 cosh z).
fn log2cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Chebyshev T_k(u), T_k'(u), T_k''(u) series sums.
fn cheb_series(c: &[f64], u: f64) -> (f64, f64, f64) {
    let (mut t0, mut t1) = (1.0, u);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut f = 0.0;
    let mut fp = 0.0;
    let mut fpp = 0.0;
    for (k, &ck) in c.iter().enumerate() {
        let (t, d, s) = match k {
            0 => (t0, d0, s0),
            1 => (t1, d1, s1),
            _ => {
                let t2 = 2.0 * u * t1 - t0;
                let d2 = 2.0 * t1 + 2.0 * u * d1 - d0;
                let s2 = 4.0 * d1 + 2.0 * u * s1 - s0;
                t0 = t1;
                t1 = t2;
                d0 = d1;
                d1 = d2;
                s0 = s1;
                s1 = s2;
                (t2, d2, s2)
            }
        };
        f += ck * t;
        fp += ck * d;
        fpp += ck * s;
    }
    (f, fp, fpp)
}

impl Curve {
    pub fn family(&self) -> CurveFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn flat() -> Curve {
        build_curve(CurveFamily::Flat, &[]).unwrap()
    }

    /// γ(t), γ'(t), γ''(t) plus speed and unit normal (γ'/s rotated by +90°).
    pub fn eval(&self, t: f64) -> CurvePoint {
        let (pos, d1, d2) = match &self.shape {
            Shape::Flat => ([t, 0.0], [1.0, 0.0], [0.0, 0.0]),
            &Shape::GaussSine {
                amp,
                alpha,
                freq,
                phase,
            } => {
                let g = amp * (-alpha * t * t).exp();
                let (s, c) = (freq * t + phase).sin_cos();
                let y = g * s;
                let yp = g * (-2.0 * alpha * t * s + freq * c);
                let ypp = g * ((4.0 * alpha * alpha * t * t - 2.0 * alpha - freq * freq) * s
                    - 4.0 * alpha * freq * t * c);
                ([t, y], [1.0, yp], [0.0, ypp])
            }
            &Shape::VShape { slope, width } => {
                let z = t / width;
                let th = z.tanh();
                let sech2 = 1.0 - th * th;
                (
                    [t, slope * width * log2cosh(z)],
                    [1.0, slope * th],
                    [0.0, slope * sech2 / width],
                )
            }
            Shape::Custom { scale, x, y } => {
                let u = (t / scale).tanh();
                let up = (1.0 - u * u) / scale;
                let upp = -2.0 * u * up / scale;
                let (fx, fxp, fxpp) = cheb_series(x, u);
                let (fy, fyp, fypp) = cheb_series(y, u);
                (
                    [t + fx, fy],
                    [1.0 + fxp * up, fyp * up],
                    [fxpp * up * up + fxp * upp, fypp * up * up + fyp * upp],
                )
            }
        };
        let speed = d1[0].hypot(d1[1]);
        CurvePoint {
            t,
            pos,
            d1,
            d2,
            speed,
            normal: [-d1[1] / speed, d1[0] / speed],
        }
    }

    /// Unit tangents as t → -∞ and t → +∞.
    pub fn asymptotic_directions(&self) -> (Point, Point) {
        match &self.shape {
            &Shape::VShape { slope, .. } => {
                let s = slope.hypot(1.0);
                ([1.0 / s, -slope / s], [1.0 / s, slope / s])
            }
            _ => ([1.0, 0.0], [1.0, 0.0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<Curve> {
        vec![
            Curve::flat(),
            build_curve(CurveFamily::GaussSine, &[2.0, 0.05, 2.0, 0.4]).unwrap(),
            build_curve(CurveFamily::VShape, &[0.8, 0.7]).unwrap(),
            build_curve(CurveFamily::Custom, &[3.0, 3.0, 0.0, 0.3, 0.1, 0.5, -0.4, 0.2]).unwrap(),
        ]
    }

    #[test]
    fn gauss_sine_value() {
        let c = build_curve(CurveFamily::GaussSine, &[2.0, 0.05, 2.0, 0.4]).unwrap();
        let p = c.eval(0.0);
        assert_eq!(p.pos[0], 0.0);
        assert!((p.pos[1] - 0.778_836_684_617_301_1).abs() < 1e-15);
    }

    #[test]
    fn flat_values() {
        let p = Curve::flat().eval(3.5);
        assert_eq!(p.pos, [3.5, 0.0]);
        assert_eq!(p.normal, [0.0, 1.0]);
        assert_eq!(p.speed, 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for c in families() {
            for &t in &[-3.1, -0.4, 0.0, 0.9, 2.7] {
                let p = c.eval(t);
                let (pm, pp) = (c.eval(t - h), c.eval(t + h));
                for k in 0..2 {
                    let fd1 = (pp.pos[k] - pm.pos[k]) / (2.0 * h);
                    let fd2 = (pp.d1[k] - pm.d1[k]) / (2.0 * h);
                    assert!((fd1 - p.d1[k]).abs() < 1e-8, "{:?} t={t}", c.family());
                    assert!((fd2 - p.d2[k]).abs() < 1e-7, "{:?} t={t}", c.family());
                }
            }
        }
    }

    #[test]
    fn orientation_and_decay() {
        for c in families() {
            let p = c.eval(0.3);
            let cross = p.d1[0] * p.normal[1] - p.d1[1] * p.normal[0];
            assert!(cross > 0.0);
            let far = c.eval(60.0).d2;
            assert!(far[0].hypot(far[1]) < 1e-10, "{:?}", c.family());
        }
    }

    #[test]
    fn errors() {
        assert!(build_curve(CurveFamily::GaussSine, &[1.0]).is_err());
        assert!(build_curve(CurveFamily::Flat, &[f64::NAN]).is_err());
        assert!("spiral".parse::<CurveFamily>().is_err());
        assert_eq!("gausssine".parse::<CurveFamily>().unwrap(), CurveFamily::GaussSine);
    }
}
