//! Flat output records and their CSV / JSON-lines serialization.
//!
//! Every record is plain data, so CSV and JSON re-parse into the same value.
//! Wall times are opt-in columns: without them, reruns are byte-identical.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::engine::PricingResult;
use crate::error::{Error, Result};
use crate::market::{OptionSpec, PayoffKind};
use crate::oracles::{ConvergedPrice, Reduced1D};
use crate::quadrature::QuadratureKind;
use crate::sparse_grid::GridStats;

/// One pricing run; also a row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub d: usize,
    pub payoff: PayoffKind,
    pub exercise_count: usize,
    pub level: usize,
    pub quadrature: QuadratureKind,
    pub size: usize,
    pub seed: u64,
    pub points: usize,
    pub n_inner: u128,
    pub n_cgl: u128,
    pub price: f64,
    pub continuation_at_origin: f64,
    pub payoff_at_spot: f64,
    pub reference: Option<f64>,
    pub rel_err: Option<f64>,
    pub feasibility_margin: f64,
    pub min_bubble: f64,
    pub max_standardized: f64,
    pub clamped_samples: usize,
    pub streamed: bool,
    pub setup_seconds: Option<f64>,
    pub step_seconds: Option<f64>,
}

impl PriceRecord {
    pub fn new(
        spec: &OptionSpec,
        level: usize,
        size: usize,
        seed: u64,
        r: &PricingResult,
        reference: Option<f64>,
        timings: bool,
    ) -> Self {
        Self {
            d: r.grid.d,
            payoff: spec.payoff,
            exercise_count: spec.exercise_count,
            level,
            quadrature: r.quadrature_kind,
            size,
            seed,
            points: r.quadrature_points,
            n_inner: r.grid.n_inner,
            n_cgl: r.grid.n_cgl,
            price: r.price,
            continuation_at_origin: r.continuation_at_origin,
            payoff_at_spot: r.payoff_at_spot,
            reference,
            rel_err: reference.map(|v| relative_error(r.price, v)),
            feasibility_margin: r.feasibility_margin,
            min_bubble: r.min_bubble,
            max_standardized: r.max_standardized,
            clamped_samples: r.clamped_samples,
            streamed: r.streamed,
            setup_seconds: timings.then_some(r.setup_seconds),
            step_seconds: timings.then(|| r.step_seconds.iter().sum()),
        }
    }
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

/// One rule of a quadrature comparison. For replicated stochastic rules
/// `price` is the replicate mean and `rmse` is taken against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRecord {
    pub quadrature: QuadratureKind,
    pub size: usize,
    pub points: usize,
    pub replicates: usize,
    pub price: f64,
    pub std_dev: Option<f64>,
    pub rmse: Option<f64>,
    pub reference: Option<f64>,
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub d: usize,
    pub level: usize,
    pub n_full: Option<u128>,
    pub n_cgl: u128,
    pub n_inner: u128,
}

impl From<GridStats> for GridRecord {
    fn from(s: GridStats) -> Self {
        Self { d: s.d, level: s.level, n_full: s.n_full, n_cgl: s.n_cgl, n_inner: s.n_inner }
    }
}

/// The 1-d oracle's price together with its European counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub spot: f64,
    pub vol: f64,
    pub dividend: f64,
    pub exercise_count: usize,
    pub price: f64,
    pub last_change: f64,
    pub nodes: usize,
    pub panel_points: usize,
    pub european: f64,
}

impl ReferenceRecord {
    pub fn new(r: &Reduced1D, c: &ConvergedPrice, european: f64) -> Self {
        Self {
            spot: r.spot,
            vol: r.vol,
            dividend: r.dividend,
            exercise_count: r.exercise_count,
            price: c.price,
            last_change: c.change,
            nodes: c.refinement.nodes,
            panel_points: c.refinement.panel_points,
            european,
        }
    }
}

/// Machine-readable failure written to stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub error: String,
    pub category: String,
    pub message: String,
    pub exit_code: i32,
}

pub fn write_records<T: Serialize, W: Write>(records: &[T], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(|e| Error::Io(e.to_string()))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(text: &str, format: OutputFormat) -> Result<Vec<T>> {
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .map(|r| r.map_err(|e| Error::Io(e.to_string())))
            .collect(),
        OutputFormat::Json => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Io(e.to_string())))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_records_roundtrip() {
        let rows: Vec<GridRecord> = (1..=4).map(|d| GridStats::compute(d, 3).unwrap().into()).collect();
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let mut buf = Vec::new();
            write_records(&rows, format, &mut buf).unwrap();
            let back: Vec<GridRecord> = read_records(std::str::from_utf8(&buf).unwrap(), format).unwrap();
            assert_eq!(back, rows);
        }
    }

    #[test]
    fn quad_records_with_missing_fields_roundtrip() {
        let rows = vec![QuadRecord {
            quadrature: QuadratureKind::RqmcSobol,
            size: 256,
            points: 256,
            replicates: 20,
            price: 3.1812345678901234,
            std_dev: Some(1e-3),
            rmse: None,
            reference: None,
            rel_err: None,
        }];
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let mut buf = Vec::new();
            write_records(&rows, format, &mut buf).unwrap();
            let back: Vec<QuadRecord> = read_records(std::str::from_utf8(&buf).unwrap(), format).unwrap();
            assert_eq!(back, rows);
        }
    }
}
