//! Quadrature rules for expectations under an independent Gaussian step
//! `N(mean, diag(variances))`.

mod genz_keister;
mod hermite;
mod normal;
mod sobol;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::RotatedModel;
use crate::sparse_grid::smolyak_index_set;

pub use genz_keister::{
    stage_rule as genz_keister_stage, table_checksum as genz_keister_checksum, STAGE_DEGREES, STAGE_SIZES,
    TABLE_CHECKSUM as GENZ_KEISTER_CHECKSUM,
};
pub use hermite::{gauss_hermite_1d, normal_moment, MAX_HERMITE_POINTS};
pub use normal::{inverse_normal_cdf, normal_cdf};
pub use sobol::{Sobol, MAX_SOBOL_DIM};

/// Default cap on the number of rule points.
pub const DEFAULT_RULE_CAP: usize = 5_000_000;
/// Standardized clamp applied to Monte Carlo and quasi-Monte Carlo samples.
pub const DEFAULT_CLAMP: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStepSpec {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianStepSpec {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let s = Self { mean, variances };
        s.validate()?;
        Ok(s)
    }

    /// Law of the rotated log-price increment over `dt`: `N(mu dt, Lambda dt)`.
    pub fn from_model(model: &RotatedModel, dt: f64) -> Result<Self> {
        Self::new(model.drift.iter().map(|m| m * dt).collect(), model.eigenvalues.iter().map(|l| l * dt).collect())
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: vec![0.0; d], variances: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() || self.mean.len() != self.variances.len() {
            return Err(Error::InvalidInput("step mean and variances must be non-empty and equally long".into()));
        }
        if self.variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("step variances must be positive".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("step mean must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    Mc,
    RqmcSobol,
    GhTensor,
    GhSparse,
    GkSparse,
}

impl QuadratureKind {
    pub const ALL: [QuadratureKind; 5] = [Self::Mc, Self::RqmcSobol, Self::GhTensor, Self::GhSparse, Self::GkSparse];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mc => "mc",
            Self::RqmcSobol => "rqmc_sobol",
            Self::GhTensor => "gh_tensor",
            Self::GhSparse => "gh_sparse",
            Self::GkSparse => "gk_sparse",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::Mc | Self::RqmcSobol)
    }
}

impl fmt::Display for QuadratureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuadratureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown quadrature kind {s:?}")))
    }
}

/// How to build a rule: kind, size parameter (sample count for MC/RQMC,
/// points per dimension for `gh_tensor`, 1-based level for sparse kinds),
/// seed for stochastic kinds and the standardized clamp for sampled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: QuadratureKind,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

impl RuleSpec {
    pub fn new(kind: QuadratureKind, size: usize) -> Self {
        Self { kind, size, seed: 0, clamp: DEFAULT_CLAMP }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn build(&self, step: &GaussianStepSpec) -> Result<QuadratureRule> {
        build_rule_capped(self, step, DEFAULT_RULE_CAP)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    pub seed: Option<u64>,
    /// `max |y_j| / sqrt(var_j)` over all points and coordinates.
    pub max_standardized: f64,
    /// Number of sampled coordinates moved onto the clamp.
    pub clamped: usize,
}

impl QuadratureRule {
    fn from_standardized(
        kind: QuadratureKind,
        step: &GaussianStepSpec,
        std_points: Vec<f64>,
        weights: Vec<f64>,
        seed: Option<u64>,
        clamped: usize,
    ) -> Self {
        let d = step.dim();
        let sd: Vec<f64> = step.variances.iter().map(|v| v.sqrt()).collect();
        let points: Vec<f64> = std_points
            .chunks_exact(d)
            .flat_map(|p| p.iter().enumerate().map(|(j, &x)| step.mean[j] + sd[j] * x).collect::<Vec<_>>())
            .collect();
        let max_standardized =
            points.chunks_exact(d).flat_map(|y| y.iter().zip(&sd).map(|(yj, s)| yj.abs() / s)).fold(0.0, f64::max);
        Self { kind, dim: d, points, weights, seed, max_standardized, clamped }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, m: usize) -> &[f64] {
        &self.points[m * self.dim..(m + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per dimension, the distinct coordinate values (first-seen order) and
    /// for each point the position of its coordinate in that list.
    pub fn coordinate_index(&self) -> Vec<(Vec<f64>, Vec<u32>)> {
        (0..self.dim)
            .map(|j| {
                let mut seen: HashMap<u64, u32> = HashMap::new();
                let mut values = Vec::new();
                let idx = self
                    .points()
                    .map(|y| {
                        *seen.entry(y[j].to_bits()).or_insert_with(|| {
                            values.push(y[j]);
                            (values.len() - 1) as u32
                        })
                    })
                    .collect();
                (values, idx)
            })
            .collect()
    }

    /// Writes `m,w,y_1..y_d` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["m".to_string(), "w".to_string()];
        header.extend((1..=self.dim).map(|j| format!("y_{j}")));
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for (m, (y, wt)) in self.points().zip(&self.weights).enumerate() {
            let mut rec = vec![m.to_string(), wt.to_string()];
            rec.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_rule(kind: QuadratureKind, step: &GaussianStepSpec, size: usize, seed: u64) -> Result<QuadratureRule> {
    RuleSpec { kind, size, seed, clamp: DEFAULT_CLAMP }.build(step)
}

pub fn build_rule_capped(spec: &RuleSpec, step: &GaussianStepSpec, cap: usize) -> Result<QuadratureRule> {
    step.validate()?;
    let d = step.dim();
    let size = spec.size;
    if size == 0 {
        return Err(Error::InvalidInput(format!("{} rule size must be >= 1", spec.kind)));
    }
    let too_big = |n: f64| -> Result<()> {
        if n > cap as f64 {
            Err(Error::ResourceCap(format!("{} rule would have {n:.0} points, cap is {cap}", spec.kind)))
        } else {
            Ok(())
        }
    };
    match spec.kind {
        QuadratureKind::Mc | QuadratureKind::RqmcSobol => {
            if !(spec.clamp > 0.0) {
                return Err(Error::InvalidInput("sample clamp must be positive".into()));
            }
            too_big((size * d) as f64 / d as f64)?;
            let raw = if spec.kind == QuadratureKind::Mc {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                (0..size * d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()
            } else {
                Sobol::scrambled(d, spec.seed)?
                    .uniforms(size)?
                    .into_iter()
                    .map(inverse_normal_cdf)
                    .collect::<Result<Vec<f64>>>()?
            };
            let mut clamped = 0;
            let std_points = raw
                .into_iter()
                .map(|x| {
                    if x.abs() > spec.clamp {
                        clamped += 1;
                        spec.clamp.copysign(x)
                    } else {
                        x
                    }
                })
                .collect();
            let weights = vec![1.0 / size as f64; size];
            Ok(QuadratureRule::from_standardized(spec.kind, step, std_points, weights, Some(spec.seed), clamped))
        }
        QuadratureKind::GhTensor => {
            too_big((size as f64).powi(d as i32))?;
            let (x, w) = gauss_hermite_1d(size)?;
            let total = size.pow(d as u32);
            let mut pts = Vec::with_capacity(total * d);
            let mut wts = Vec::with_capacity(total);
            let mut pos = vec![0usize; d];
            for _ in 0..total {
                pts.extend(pos.iter().map(|&i| x[i]));
                wts.push(pos.iter().map(|&i| w[i]).product());
                for p in pos.iter_mut().rev() {
                    *p += 1;
                    if *p < size {
                        break;
                    }
                    *p = 0;
                }
            }
            Ok(QuadratureRule::from_standardized(spec.kind, step, pts, wts, None, 0))
        }
        QuadratureKind::GhSparse => {
            let (pts, wts) = smolyak_rule(d, size, cap, gauss_hermite_1d)?;
            Ok(QuadratureRule::from_standardized(spec.kind, step, pts, wts, None, 0))
        }
        QuadratureKind::GkSparse => {
            if size > STAGE_SIZES.len() {
                return Err(Error::InvalidInput(format!(
                    "Genz-Keister tables support levels 1..={}, got {size}",
                    STAGE_SIZES.len()
                )));
            }
            let (pts, wts) = smolyak_rule(d, size, cap, |stage| {
                genz_keister_stage(stage).ok_or_else(|| Error::InvalidInput(format!("no Genz-Keister stage {stage}")))
            })?;
            Ok(QuadratureRule::from_standardized(spec.kind, step, pts, wts, None, 0))
        }
    }
}

/// Smolyak combination of 1-d rules over stages `i >= 1` with
/// `sum(i_j - 1) <= level - 1`; coincident points (by bit pattern) merge.
fn smolyak_rule(
    d: usize,
    level: usize,
    cap: usize,
    rule: impl Fn(usize) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = level + d - 1;
    let stages: Vec<(Vec<f64>, Vec<f64>)> = (1..=level).map(&rule).collect::<Result<_>>()?;
    let mut merged: HashMap<Vec<u64>, f64> = HashMap::new();
    for (idx, coef) in smolyak_index_set(q, d) {
        let comps = idx.components();
        let size: f64 = comps.iter().map(|&i| stages[i - 1].0.len() as f64).product();
        if size > cap as f64 {
            return Err(Error::ResourceCap(format!("sparse quadrature tensor block of {size:.0} points")));
        }
        let mut pos = vec![0usize; d];
        loop {
            let key: Vec<u64> = comps.iter().zip(&pos).map(|(&i, &p)| stages[i - 1].0[p].to_bits()).collect();
            let w: f64 = comps.iter().zip(&pos).map(|(&i, &p)| stages[i - 1].1[p]).product();
            *merged.entry(key).or_insert(0.0) += coef as f64 * w;
            if merged.len() > cap {
                return Err(Error::ResourceCap(format!("sparse quadrature exceeds {cap} points")));
            }
            let mut j = 0;
            while j < d {
                pos[j] += 1;
                if pos[j] < stages[comps[j] - 1].0.len() {
                    break;
                }
                pos[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
    }
    let mut entries: Vec<(Vec<f64>, f64)> = merged
        .into_iter()
        .filter(|(_, w)| *w != 0.0)
        .map(|(k, w)| (k.into_iter().map(f64::from_bits).collect(), w))
        .collect();
    entries.sort_by(|a, b| {
        a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut pts = Vec::with_capacity(entries.len() * d);
    let mut wts = Vec::with_capacity(entries.len());
    for (p, w) in entries {
        pts.extend(p);
        wts.push(w);
    }
    Ok((pts, wts))
}

/// `sum_m w_m f(y_m)`, summed in point order.
pub fn integrate(rule: &QuadratureRule, mut f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
    let mut sum = 0.0;
    for (m, (y, w)) in rule.points().zip(rule.weights()).enumerate() {
        let v = f(y);
        if v.is_nan() {
            return Err(Error::IntegrandNaN(m));
        }
        sum += w * v;
    }
    Ok(sum)
}
