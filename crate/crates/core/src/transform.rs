//! Scaled tanh map between R^d and the open cube (-1, 1)^d, the bubble
//! function that vanishes on the cube boundary, and the machine-epsilon
//! feasibility condition that keeps `u / b` well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Slope `L` of `z = tanh(L x)`.
    pub scale: f64,
    /// Exponent `beta` of `prod (1 - z_i^2)^beta`.
    pub bubble_exponent: f64,
    /// Bound `C` on standardized quadrature abscissae.
    pub safety_constant: f64,
    pub machine_eps: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { scale: 2.0, bubble_exponent: 1.0, safety_constant: 6.0, machine_eps: f64::EPSILON }
    }
}

impl TransformConfig {
    pub fn new(scale: f64, bubble_exponent: f64) -> Result<Self> {
        let cfg = Self { scale, bubble_exponent, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidInput(format!("transform scale must be positive, got {}", self.scale)));
        }
        if !(self.bubble_exponent >= 1.0 && self.bubble_exponent.is_finite()) {
            return Err(Error::InvalidInput(format!("bubble exponent must be >= 1, got {}", self.bubble_exponent)));
        }
        if !(self.safety_constant > 0.0 && self.safety_constant.is_finite()) {
            return Err(Error::InvalidInput("safety constant must be positive".into()));
        }
        if !(self.machine_eps > 0.0) {
            return Err(Error::InvalidInput("machine epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// `atanh(z)` as `0.5 * log1p(2z / (1 - z))`, accurate as |z| -> 1.
#[inline]
pub fn atanh(z: f64) -> f64 {
    0.5 * (2.0 * z / (1.0 - z)).ln_1p()
}

#[inline]
pub(crate) fn to_bounded_scalar(x: f64, scale: f64) -> f64 {
    (scale * x).tanh()
}

#[inline]
pub(crate) fn to_unbounded_scalar(z: f64, scale: f64) -> f64 {
    atanh(z) / scale
}

/// `(1 - tanh(t)^2)` evaluated as `sech(t)^2` so that it keeps full relative
/// precision when `tanh(t)` rounds to 1.
#[inline]
pub(crate) fn one_minus_tanh_sq(t: f64) -> f64 {
    let c = t.abs().cosh();
    1.0 / (c * c)
}

pub fn to_bounded(x: &[f64], cfg: &TransformConfig) -> Vec<f64> {
    x.iter().map(|&xi| to_bounded_scalar(xi, cfg.scale)).collect()
}

pub fn to_unbounded(z: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            if zi.abs() < 1.0 {
                Ok(to_unbounded_scalar(zi, cfg.scale))
            } else {
                Err(Error::InvalidInput(format!("coordinate {i} = {zi} is outside the open cube")))
            }
        })
        .collect()
}

pub fn bubble(z: &[f64], cfg: &TransformConfig) -> f64 {
    let base: f64 = z.iter().map(|&zi| (1.0 - zi * zi).max(0.0)).product();
    if cfg.bubble_exponent == 1.0 {
        base
    } else {
        base.powf(cfg.bubble_exponent)
    }
}

/// Bubble value at `tanh(L x)` computed from the unbounded coordinates.
pub(crate) fn bubble_from_unbounded(x: &[f64], cfg: &TransformConfig) -> f64 {
    let base: f64 = x.iter().map(|&xi| one_minus_tanh_sq(cfg.scale * xi)).product();
    if cfg.bubble_exponent == 1.0 {
        base
    } else {
        base.powf(cfg.bubble_exponent)
    }
}

/// One time step in bounded coordinates: `tanh(L (atanh(z)/L + y))`.
pub fn propagate(z: &[f64], y: &[f64], cfg: &TransformConfig) -> Result<Vec<f64>> {
    if z.len() != y.len() {
        return Err(Error::InvalidInput("propagate: dimension mismatch".into()));
    }
    let x = to_unbounded(z, cfg)?;
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((&xi, &yi), &zi)| if yi == 0.0 { zi } else { to_bounded_scalar(xi + yi, cfg.scale) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub holds: bool,
    /// `log(1/eps) / beta - log(lhs)`; non-negative iff the condition holds.
    pub margin: f64,
    pub log_lhs: f64,
}

/// Sufficient condition for `b > eps` at every propagated point:
/// `4^(L_I + d) / pi^(2d) * exp(2 C L sqrt(dt) sum sqrt(lambda_j)) <= eps^(-1/beta)`.
///
/// For `beta = 1` this is the classical bound; larger exponents shrink the
/// admissible region because `b` is raised to the power `beta`.
pub fn feasibility_check(level: usize, cfg: &TransformConfig, eigenvalues: &[f64], dt: f64) -> Feasibility {
    let d = eigenvalues.len() as f64;
    let sum_sqrt: f64 = eigenvalues.iter().map(|l| l.sqrt()).sum();
    let log_lhs = (level as f64 + d) * 4f64.ln() - 2.0 * d * std::f64::consts::PI.ln()
        + 2.0 * cfg.safety_constant * cfg.scale * dt.sqrt() * sum_sqrt;
    let log_rhs = -cfg.machine_eps.ln() / cfg.bubble_exponent;
    let margin = log_rhs - log_lhs;
    Feasibility { holds: margin >= 0.0, margin, log_lhs }
}
