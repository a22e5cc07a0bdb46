//! Run configuration: one TOML document with `market`, `option`, `method`
//! and `output` tables. Unknown keys are rejected.
//!
//! ```toml
//! [market]
//! dim = 2                 # optional when any of spot/vol/dividend is a list
//! spot = 100.0            # scalar or one value per asset
//! rate = 0.03
//! dividend = 0.0
//! vol = 0.2
//! correlation = 0.5       # scalar (equicorrelation) or full matrix
//!
//! [option]
//! payoff = "geometric_put"   # or "arithmetic_put"
//! strike = 100.0
//! maturity = 0.25
//! exercise_count = 50
//!
//! [method]
//! level = 5               # `levels = [3, 4, 5]` for converge
//! scale = 2.0
//! bubble_exponent = 1.0
//! quadrature = "gk_sparse"
//! size = 5
//! seed = 0
//!
//! [output]
//! format = "csv"          # or "json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{PricingConfig, DEFAULT_MEMORY_CAP};
use crate::error::{Error, Result};
use crate::market::{decorrelate, MarketParams, OptionSpec, PayoffKind};
use crate::quadrature::{QuadratureKind, RuleSpec, DEFAULT_CLAMP, DEFAULT_RULE_CAP};
use crate::sparse_grid::{DEFAULT_GRID_CAP, MAX_INTERPOLATION_LEVEL};
use crate::transform::TransformConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAsset {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerAsset {
    fn len(&self) -> Option<usize> {
        match self {
            PerAsset::Scalar(_) => None,
            PerAsset::List(v) => Some(v.len()),
        }
    }

    fn expand(&self, d: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerAsset::Scalar(v) => Ok(vec![*v; d]),
            PerAsset::List(v) if v.len() == d => Ok(v.clone()),
            PerAsset::List(v) => Err(Error::Config(format!("market.{name} has {} entries, expected {d}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketBlock {
    pub dim: Option<usize>,
    pub spot: PerAsset,
    pub rate: f64,
    #[serde(default = "zero_per_asset")]
    pub dividend: PerAsset,
    pub vol: PerAsset,
    pub correlation: Correlation,
}

fn zero_per_asset() -> PerAsset {
    PerAsset::Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionBlock {
    pub payoff: PayoffKind,
    pub strike: f64,
    pub maturity: f64,
    pub exercise_count: usize,
}

/// One entry of a quadrature comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleEntry {
    pub kind: QuadratureKind,
    pub size: usize,
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodBlock {
    pub level: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub scale: f64,
    pub bubble_exponent: f64,
    pub quadrature: QuadratureKind,
    pub size: usize,
    pub seed: u64,
    /// Standardized clamp `C` for sampled rules.
    pub clamp: f64,
    pub machine_eps: f64,
    /// Replicates per stochastic rule in `quad-compare`.
    pub replicates: usize,
    pub rules: Vec<RuleEntry>,
    pub threads: Option<usize>,
    pub grid_cap: usize,
    pub rule_cap: usize,
    pub memory_cap: usize,
    /// Reference price for relative errors; derived from the 1-d oracle
    /// for geometric puts when absent.
    pub reference: Option<f64>,
    pub auto_reference: bool,
}

impl Default for MethodBlock {
    fn default() -> Self {
        Self {
            level: None,
            levels: None,
            scale: 2.0,
            bubble_exponent: 1.0,
            quadrature: QuadratureKind::GkSparse,
            size: 5,
            seed: 0,
            clamp: DEFAULT_CLAMP,
            machine_eps: f64::EPSILON,
            replicates: 1,
            rules: Vec::new(),
            threads: None,
            grid_cap: DEFAULT_GRID_CAP,
            rule_cap: DEFAULT_RULE_CAP,
            memory_cap: DEFAULT_MEMORY_CAP,
            reference: None,
            auto_reference: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
    pub verbosity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketBlock,
    pub option: OptionBlock,
    #[serde(default)]
    pub method: MethodBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    /// Parses and validates; every derived object is built once so a bad
    /// file fails before any computation.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.market()?;
        self.option()?;
        let levels = self.levels()?;
        for &level in &levels {
            self.pricing_config(level, self.rule())?.transform.validate()?;
        }
        if self.method.size == 0 || self.method.rules.iter().any(|r| r.size == 0) {
            return Err(Error::Config("quadrature size must be positive".into()));
        }
        if self.method.replicates == 0 || self.method.rules.iter().any(|r| r.replicates == Some(0)) {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if let Some(r) = self.method.reference {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("reference must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<usize> {
        let m = &self.market;
        let mut lens = [m.spot.len(), m.vol.len(), m.dividend.len()].into_iter().flatten();
        let d = m.dim.or_else(|| lens.next()).or(match &m.correlation {
            Correlation::Matrix(rows) => Some(rows.len()),
            Correlation::Scalar(_) => None,
        });
        match d {
            Some(d) if d >= 1 => Ok(d),
            _ => Err(Error::Config("market.dim is required when every market entry is a scalar".into())),
        }
    }

    pub fn market(&self) -> Result<MarketParams> {
        let d = self.dim()?;
        let m = &self.market;
        let correlation = match &m.correlation {
            Correlation::Scalar(rho) => (0..d * d).map(|k| if k / d == k % d { 1.0 } else { *rho }).collect(),
            Correlation::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("market.correlation must be {d}x{d}")));
                }
                rows.concat()
            }
        };
        let params = MarketParams::new(
            m.spot.expand(d, "spot")?,
            m.rate,
            m.dividend.expand(d, "dividend")?,
            m.vol.expand(d, "vol")?,
            correlation,
        )
        .map_err(as_config)?;
        decorrelate(&params).map_err(as_config)?;
        Ok(params)
    }

    pub fn option(&self) -> Result<OptionSpec> {
        let o = &self.option;
        OptionSpec::new(o.strike, o.maturity, o.payoff, o.exercise_count).map_err(as_config)
    }

    /// `levels` if given, else the single `level`.
    pub fn levels(&self) -> Result<Vec<usize>> {
        let levels = match (&self.method.levels, self.method.level) {
            (Some(ls), _) if !ls.is_empty() => ls.clone(),
            (_, Some(l)) => vec![l],
            _ => return Err(Error::Config("method.level or method.levels is required".into())),
        };
        if let Some(l) = levels.iter().find(|&&l| l > MAX_INTERPOLATION_LEVEL) {
            return Err(Error::Config(format!("interpolation level {l} exceeds {MAX_INTERPOLATION_LEVEL}")));
        }
        Ok(levels)
    }

    pub fn rule(&self) -> RuleSpec {
        RuleSpec {
            kind: self.method.quadrature,
            size: self.method.size,
            seed: self.method.seed,
            clamp: self.method.clamp,
        }
    }

    pub fn pricing_config(&self, level: usize, rule: RuleSpec) -> Result<PricingConfig> {
        let m = &self.method;
        let transform = TransformConfig {
            scale: m.scale,
            bubble_exponent: m.bubble_exponent,
            machine_eps: m.machine_eps,
            ..TransformConfig::default()
        };
        transform.validate().map_err(as_config)?;
        Ok(PricingConfig {
            threads: m.threads,
            grid_cap: m.grid_cap,
            rule_cap: m.rule_cap,
            memory_cap: m.memory_cap,
            transform,
            ..PricingConfig::new(level, rule)
        })
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::Config(msg),
        other => other,
    }
}
