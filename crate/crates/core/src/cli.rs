//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests drive it in-process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::engine::price;
use crate::error::{Error, ErrorCategory, Result};
use crate::market::{OptionSpec, PayoffKind};
use crate::oracles::{bermudan_put_reference, european_put_closed_form, geometric_reduction};
use crate::quadrature::RuleSpec;
use crate::report::{relative_error, write_records, ErrorRecord, GridRecord, PriceRecord, QuadRecord, ReferenceRecord};
use crate::sparse_grid::GridStats;

#[derive(Debug, Parser)]
#[command(name = "sgbermudan", version, about = "Bermudan basket put pricing on tanh-mapped sparse grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Seed for stochastic quadrature (replaces method.seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (replaces method.threads).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Add wall-time columns (output is then no longer reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price one configuration.
    Price {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep the interpolation level.
    Converge {
        config: PathBuf,
        /// Levels to run (replaces method.levels).
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare quadrature rules at a fixed level.
    QuadCompare {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sparse grid point counts.
    GridStats {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        level: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Print the one-asset reduction of a geometric basket.
    Reduce {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the 1-d reference pricer on the reduction.
    Reference {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Io => 1,
        ErrorCategory::Config => 2,
        ErrorCategory::Feasibility => 3,
        ErrorCategory::Resource => 4,
        ErrorCategory::Numerical => 5,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Io => "io",
        ErrorCategory::Config => "config",
        ErrorCategory::Feasibility => "feasibility",
        ErrorCategory::Resource => "resource",
        ErrorCategory::Numerical => "numerical",
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Failures are reported as one JSON object on `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ =
                if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let category = e.category();
            let record = ErrorRecord {
                error: e.kind().to_string(),
                category: category_name(category).to_string(),
                message: e.to_string(),
                exit_code: exit_code(category),
            };
            let _ = serde_json::to_writer(&mut *stderr, &record);
            let _ = stderr.write_all(b"\n");
            record.exit_code
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Price { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let records = converge_rows(&cfg, &cfg.levels()?[..1], &overrides, stderr)?;
            emit(&records, &cfg, &overrides, stdout)
        }
        Command::Converge { config, levels, overrides } => {
            let cfg = load(&config, &overrides)?;
            let levels = if levels.is_empty() { cfg.levels()? } else { levels };
            let records = converge_rows(&cfg, &levels, &overrides, stderr)?;
            emit(&records, &cfg, &overrides, stdout)
        }
        Command::QuadCompare { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let records = quad_rows(&cfg, stderr)?;
            emit(&records, &cfg, &overrides, stdout)
        }
        Command::GridStats { dims, level, output, format } => {
            if let Some(&d) = dims.iter().find(|&&d| d == 0) {
                return Err(Error::Config(format!("dimension must be positive, got {d}")));
            }
            let records =
                dims.iter().map(|&d| GridStats::compute(d, level).map(GridRecord::from)).collect::<Result<Vec<_>>>()?;
            write_to(&records, format.unwrap_or_default(), output.as_ref(), stdout)
        }
        Command::Reduce { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let reduced = geometric_reduction(&cfg.market()?, &cfg.option()?)?;
            emit(&[reduced], &cfg, &overrides, stdout)
        }
        Command::Reference { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let r = geometric_reduction(&cfg.market()?, &cfg.option()?)?;
            let converged = bermudan_put_reference(&r)?;
            let european = european_put_closed_form(r.spot, r.strike, r.rate, r.dividend, r.vol, r.maturity);
            emit(&[ReferenceRecord::new(&r, &converged, european)], &cfg, &overrides, stdout)
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        cfg.method.seed = seed;
    }
    if let Some(threads) = overrides.threads {
        cfg.method.threads = Some(threads);
    }
    Ok(cfg)
}

/// The configured reference, else the 1-d oracle for geometric puts.
fn reference(cfg: &RunConfig, spec: &OptionSpec) -> Result<Option<f64>> {
    if let Some(r) = cfg.method.reference {
        return Ok(Some(r));
    }
    if cfg.method.auto_reference && spec.payoff == PayoffKind::GeometricPut {
        let reduced = geometric_reduction(&cfg.market()?, spec)?;
        return Ok(Some(bermudan_put_reference(&reduced)?.price));
    }
    Ok(None)
}

fn converge_rows(
    cfg: &RunConfig,
    levels: &[usize],
    overrides: &Overrides,
    stderr: &mut dyn Write,
) -> Result<Vec<PriceRecord>> {
    let params = cfg.market()?;
    let spec = cfg.option()?;
    let reference = reference(cfg, &spec)?;
    let rule = cfg.rule();
    levels
        .iter()
        .map(|&level| {
            let result = price(&params, &spec, &cfg.pricing_config(level, rule)?)?;
            let record = PriceRecord::new(&spec, level, rule.size, rule.seed, &result, reference, overrides.timings);
            if cfg.output.verbosity > 0 {
                let _ = writeln!(stderr, "level {level}: price {:.6} rel_err {:?}", record.price, record.rel_err);
            }
            Ok(record)
        })
        .collect()
}

fn quad_rows(cfg: &RunConfig, stderr: &mut dyn Write) -> Result<Vec<QuadRecord>> {
    let params = cfg.market()?;
    let spec = cfg.option()?;
    let reference = reference(cfg, &spec)?;
    let level = cfg.levels()?[0];
    let entries: Vec<(RuleSpec, usize)> = if cfg.method.rules.is_empty() {
        vec![(cfg.rule(), cfg.method.replicates)]
    } else {
        cfg.method
            .rules
            .iter()
            .map(|e| {
                let spec = RuleSpec { kind: e.kind, size: e.size, ..cfg.rule() };
                (spec, e.replicates.unwrap_or(cfg.method.replicates))
            })
            .collect()
    };
    let mut rows = Vec::with_capacity(entries.len());
    for (rule, replicates) in entries {
        let replicates = if rule.kind.is_stochastic() {
            replicates
        } else {
            if replicates > 1 {
                let _ =
                    writeln!(stderr, "warning: {replicates} replicates ignored for deterministic rule {}", rule.kind);
            }
            1
        };
        let mut prices = Vec::with_capacity(replicates);
        let mut points = 0;
        for r in 0..replicates {
            let rule = rule.with_seed(rule.seed.wrapping_add(r as u64));
            let result = price(&params, &spec, &cfg.pricing_config(level, rule)?)?;
            points = result.quadrature_points;
            prices.push(result.price);
        }
        let n = prices.len() as f64;
        let mean = prices.iter().sum::<f64>() / n;
        let std_dev =
            (replicates > 1).then(|| (prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        let rmse = reference
            .filter(|_| rule.kind.is_stochastic())
            .map(|v| (prices.iter().map(|p| (p - v).powi(2)).sum::<f64>() / n).sqrt());
        rows.push(QuadRecord {
            quadrature: rule.kind,
            size: rule.size,
            points,
            replicates,
            price: mean,
            std_dev,
            rmse,
            reference,
            rel_err: reference.map(|v| relative_error(mean, v)),
        });
    }
    Ok(rows)
}

fn emit<T: Serialize>(records: &[T], cfg: &RunConfig, overrides: &Overrides, stdout: &mut dyn Write) -> Result<()> {
    let format = overrides.format.unwrap_or(cfg.output.format);
    let path = overrides.output.as_ref().or(cfg.output.path.as_ref());
    write_to(records, format, path, stdout)
}

fn write_to<T: Serialize>(
    records: &[T],
    format: OutputFormat,
    path: Option<&PathBuf>,
    stdout: &mut dyn Write,
) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            write_records(records, format, BufWriter::new(file))
        }
        None => write_records(records, format, stdout),
    }
}
