//! C ABI over `sgbermudan`.
//!
//! Objects are opaque heap handles created by `sgb_*_new` and released by
//! the matching `sgb_*_free`. Every fallible call returns an [`SgbStatus`];
//! on failure the message is kept per thread for [`sgb_last_error_message`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sgbermudan::engine::{Pricer, PricingConfig, PricingResult};
use sgbermudan::market::{MarketParams, OptionSpec, PayoffKind};
use sgbermudan::oracles::{bermudan_put_reference, european_put_closed_form, geometric_reduction};
use sgbermudan::quadrature::{QuadratureKind, RuleSpec};
use sgbermudan::sparse_grid::GridStats;
use sgbermudan::transform::TransformConfig;
use sgbermudan::{Error, ErrorCategory};

/// Status codes; the nonzero values mirror the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgbStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Feasibility = 3,
    Resource = 4,
    Numerical = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgbPayoff {
    ArithmeticPut = 0,
    GeometricPut = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgbQuadrature {
    Mc = 0,
    RqmcSobol = 1,
    GhTensor = 2,
    GhSparse = 3,
    GkSparse = 4,
}

/// Method parameters; start from [`sgb_pricing_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgbPricingOptions {
    pub level: usize,
    pub scale: f64,
    pub bubble_exponent: f64,
    pub quadrature: SgbQuadrature,
    pub size: usize,
    pub seed: u64,
    /// 0 uses the global thread pool.
    pub threads: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgbPriceResult {
    pub price: f64,
    pub continuation_at_origin: f64,
    pub payoff_at_spot: f64,
    pub n_inner: u64,
    pub n_cgl: u64,
    pub quadrature_points: u64,
    pub feasibility_margin: f64,
    pub min_bubble: f64,
}

pub struct SgbMarket(MarketParams);
pub struct SgbOption(OptionSpec);
pub struct SgbPricer(Pricer);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SgbStatus {
    match e.category() {
        ErrorCategory::Io => SgbStatus::Io,
        ErrorCategory::Config => SgbStatus::Config,
        ErrorCategory::Feasibility => SgbStatus::Feasibility,
        ErrorCategory::Resource => SgbStatus::Resource,
        ErrorCategory::Numerical => SgbStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgbStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SgbStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SgbStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sgb_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr().cast()
}

/// Copies this thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full length
/// including the terminator. Pass `buf = NULL` to query the size.
///
/// # Safety
/// `buf` must be NULL or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sgb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Market with per-asset arrays of length `d` and a row-major `d x d`
/// correlation matrix.
///
/// # Safety
/// Array pointers must be valid for the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sgb_market_new(
    d: usize,
    spot: *const f64,
    rate: f64,
    dividends: *const f64,
    vols: *const f64,
    correlation: *const f64,
    out: *mut *mut SgbMarket,
) -> SgbStatus {
    guard(|| {
        let params = MarketParams::new(
            slice(spot, d, "spot")?.to_vec(),
            rate,
            slice(dividends, d, "dividends")?.to_vec(),
            slice(vols, d, "vols")?.to_vec(),
            slice(correlation, d * d, "correlation")?.to_vec(),
        )?;
        store(out, SgbMarket(params))
    })
}

/// Identical assets with constant pairwise correlation.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sgb_market_equicorrelated(
    d: usize,
    spot: f64,
    rate: f64,
    dividend: f64,
    vol: f64,
    rho: f64,
    out: *mut *mut SgbMarket,
) -> SgbStatus {
    guard(|| store(out, SgbMarket(MarketParams::equicorrelated(d, spot, rate, dividend, vol, rho)?)))
}

/// # Safety
/// `market` must be NULL or a handle from `sgb_market_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgb_market_free(market: *mut SgbMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sgb_option_new(
    strike: f64,
    maturity: f64,
    payoff: SgbPayoff,
    exercise_count: usize,
    out: *mut *mut SgbOption,
) -> SgbStatus {
    let payoff = match payoff {
        SgbPayoff::ArithmeticPut => PayoffKind::ArithmeticPut,
        SgbPayoff::GeometricPut => PayoffKind::GeometricPut,
    };
    guard(|| store(out, SgbOption(OptionSpec::new(strike, maturity, payoff, exercise_count)?)))
}

/// # Safety
/// `option` must be NULL or a handle from `sgb_option_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgb_option_free(option: *mut SgbOption) {
    if !option.is_null() {
        drop(Box::from_raw(option));
    }
}

/// Level 5, `L = 2`, `beta = 1`, Genz-Keister sparse level 5.
#[no_mangle]
pub extern "C" fn sgb_pricing_options_default() -> SgbPricingOptions {
    SgbPricingOptions {
        level: 5,
        scale: 2.0,
        bubble_exponent: 1.0,
        quadrature: SgbQuadrature::GkSparse,
        size: 5,
        seed: 0,
        threads: 0,
    }
}

fn pricing_config(o: &SgbPricingOptions) -> Result<PricingConfig, Error> {
    let kind = match o.quadrature {
        SgbQuadrature::Mc => QuadratureKind::Mc,
        SgbQuadrature::RqmcSobol => QuadratureKind::RqmcSobol,
        SgbQuadrature::GhTensor => QuadratureKind::GhTensor,
        SgbQuadrature::GhSparse => QuadratureKind::GhSparse,
        SgbQuadrature::GkSparse => QuadratureKind::GkSparse,
    };
    let mut cfg = PricingConfig::new(o.level, RuleSpec::new(kind, o.size).with_seed(o.seed));
    cfg.transform = TransformConfig::new(o.scale, o.bubble_exponent)?;
    cfg.threads = (o.threads > 0).then_some(o.threads);
    Ok(cfg)
}

fn to_c(r: &PricingResult) -> SgbPriceResult {
    SgbPriceResult {
        price: r.price,
        continuation_at_origin: r.continuation_at_origin,
        payoff_at_spot: r.payoff_at_spot,
        n_inner: r.grid.n_inner as u64,
        n_cgl: r.grid.n_cgl as u64,
        quadrature_points: r.quadrature_points as u64,
        feasibility_margin: r.feasibility_margin,
        min_bubble: r.min_bubble,
    }
}

/// Builds grid and rule and checks feasibility; no pricing yet.
///
/// # Safety
/// Handles must be live; `options` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sgb_pricer_new(
    market: *const SgbMarket,
    option: *const SgbOption,
    options: *const SgbPricingOptions,
    out: *mut *mut SgbPricer,
) -> SgbStatus {
    guard(|| {
        let market = reference(market, "market")?;
        let option = reference(option, "option")?;
        let cfg = pricing_config(reference(options, "options")?)?;
        store(out, SgbPricer(Pricer::new(&market.0, &option.0, &cfg)?))
    })
}

/// Runs the backward induction.
///
/// # Safety
/// `pricer` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sgb_pricer_run(pricer: *mut SgbPricer, out: *mut SgbPriceResult) -> SgbStatus {
    guard(|| {
        let pricer = pricer.as_mut().ok_or(Failure::Null("pricer"))?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = to_c(&pricer.0.run()?);
        Ok(())
    })
}

/// # Safety
/// `pricer` must be NULL or a handle from `sgb_pricer_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgb_pricer_free(pricer: *mut SgbPricer) {
    if !pricer.is_null() {
        drop(Box::from_raw(pricer));
    }
}

/// Sparse grid sizes: all points and inner points. Fails with
/// `Resource` when a count does not fit in 64 bits.
///
/// # Safety
/// Output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sgb_grid_counts(d: usize, level: usize, n_cgl: *mut u64, n_inner: *mut u64) -> SgbStatus {
    guard(|| {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()).into());
        }
        let n_cgl = n_cgl.as_mut().ok_or(Failure::Null("n_cgl"))?;
        let n_inner = n_inner.as_mut().ok_or(Failure::Null("n_inner"))?;
        let stats = GridStats::compute(d, level)?;
        let fit = |v: u128| u64::try_from(v).map_err(|_| Error::ResourceCap(format!("grid count {v} exceeds 64 bits")));
        *n_cgl = fit(stats.n_cgl)?;
        *n_inner = fit(stats.n_inner)?;
        Ok(())
    })
}

/// Self-converged 1-d Bermudan price of the geometric basket's reduction.
///
/// # Safety
/// Handles must be live and `price` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sgb_geometric_reference(
    market: *const SgbMarket,
    option: *const SgbOption,
    price: *mut f64,
) -> SgbStatus {
    guard(|| {
        let reduced = geometric_reduction(&reference(market, "market")?.0, &reference(option, "option")?.0)?;
        let price = price.as_mut().ok_or(Failure::Null("price"))?;
        *price = bermudan_put_reference(&reduced)?.price;
        Ok(())
    })
}

/// Black-Scholes put with continuous dividend yield.
#[no_mangle]
pub extern "C" fn sgb_european_put(spot: f64, strike: f64, rate: f64, dividend: f64, vol: f64, maturity: f64) -> f64 {
    european_put_closed_form(spot, strike, rate, dividend, vol, maturity)
}
