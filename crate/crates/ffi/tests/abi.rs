use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sgbermudan_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 512];
    let needed = unsafe { sgb_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(needed >= 1);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn prices_through_handles() {
    unsafe {
        let mut market = ptr::null_mut();
        let mut option = ptr::null_mut();
        let mut pricer = ptr::null_mut();
        assert_eq!(sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5, &mut market), SgbStatus::Ok);
        assert_eq!(sgb_option_new(100.0, 0.25, SgbPayoff::ArithmeticPut, 10, &mut option), SgbStatus::Ok);
        let opts = SgbPricingOptions { level: 3, size: 4, ..sgb_pricing_options_default() };
        assert_eq!(sgb_pricer_new(market, option, &opts, &mut pricer), SgbStatus::Ok);
        let mut out = SgbPriceResult::default();
        assert_eq!(sgb_pricer_run(pricer, &mut out), SgbStatus::Ok);

        let params = sgbermudan::market::MarketParams::equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5).unwrap();
        let spec = sgbermudan::market::OptionSpec::new(100.0, 0.25, sgbermudan::market::PayoffKind::ArithmeticPut, 10)
            .unwrap();
        let rule = sgbermudan::quadrature::RuleSpec::new(sgbermudan::quadrature::QuadratureKind::GkSparse, 4);
        let direct =
            sgbermudan::engine::price(&params, &spec, &sgbermudan::engine::PricingConfig::new(3, rule)).unwrap();
        assert_eq!(out.price, direct.price);
        assert_eq!(out.n_inner as u128, direct.grid.n_inner);

        sgb_pricer_free(pricer);
        sgb_option_free(option);
        sgb_market_free(market);
    }
}

#[test]
fn explicit_market_matches_equicorrelated() {
    let spot = [100.0, 100.0];
    let zeros = [0.0, 0.0];
    let vols = [0.2, 0.2];
    let corr = [1.0, 0.5, 0.5, 1.0];
    unsafe {
        let mut a = ptr::null_mut();
        let status = sgb_market_new(2, spot.as_ptr(), 0.03, zeros.as_ptr(), vols.as_ptr(), corr.as_ptr(), &mut a);
        assert_eq!(status, SgbStatus::Ok);
        let mut option = ptr::null_mut();
        assert_eq!(sgb_option_new(100.0, 0.25, SgbPayoff::GeometricPut, 5, &mut option), SgbStatus::Ok);
        let mut price = 0.0;
        assert_eq!(sgb_geometric_reference(a, option, &mut price), SgbStatus::Ok);
        let mut b = ptr::null_mut();
        sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5, &mut b);
        let mut again = 0.0;
        assert_eq!(sgb_geometric_reference(b, option, &mut again), SgbStatus::Ok);
        assert_eq!(price, again);
        let vol = 0.2 * 3f64.sqrt() / 2.0;
        assert!(price >= sgb_european_put(100.0, 100.0, 0.03, 0.005, vol, 0.25));
        sgb_market_free(a);
        sgb_market_free(b);
        sgb_option_free(option);
    }
}

#[test]
fn status_codes_and_messages() {
    unsafe {
        let mut market = ptr::null_mut();
        assert_eq!(sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 1.5, &mut market), SgbStatus::Config);
        assert!(market.is_null());
        assert!(last_error().contains("correlation"), "{}", last_error());

        assert_eq!(sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5, ptr::null_mut()), SgbStatus::NullPointer);
        assert!(last_error().contains("null"));

        sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5, &mut market);
        let mut option = ptr::null_mut();
        sgb_option_new(100.0, 0.25, SgbPayoff::GeometricPut, 50, &mut option);
        let opts = SgbPricingOptions { scale: 200.0, ..sgb_pricing_options_default() };
        let mut pricer = ptr::null_mut();
        assert_eq!(sgb_pricer_new(market, option, &opts, &mut pricer), SgbStatus::Feasibility);
        assert!(pricer.is_null());

        let (mut n_cgl, mut n_inner) = (0u64, 0u64);
        assert_eq!(sgb_grid_counts(6, 5, &mut n_cgl, &mut n_inner), SgbStatus::Ok);
        assert_eq!((n_cgl, n_inner), (4865, 481));
        assert_eq!(sgb_grid_counts(0, 5, &mut n_cgl, &mut n_inner), SgbStatus::Config);
        assert_eq!(sgb_grid_counts(400, 40, &mut n_cgl, &mut n_inner), SgbStatus::Resource);

        // size query, then truncation keeps a terminator
        let needed = sgb_last_error_message(ptr::null_mut(), 0);
        let mut small = [1 as std::ffi::c_char; 4];
        assert_eq!(sgb_last_error_message(small.as_mut_ptr(), 4), needed);
        assert_eq!(small[3], 0);

        sgb_market_free(market);
        sgb_option_free(option);
        sgb_market_free(ptr::null_mut());
        sgb_pricer_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sgb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header =
        std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/sgbermudan.h")).unwrap();
    for name in [
        "sgb_version",
        "sgb_last_error_message",
        "sgb_market_new",
        "sgb_market_equicorrelated",
        "sgb_market_free",
        "sgb_option_new",
        "sgb_option_free",
        "sgb_pricing_options_default",
        "sgb_pricer_new",
        "sgb_pricer_run",
        "sgb_pricer_free",
        "sgb_grid_counts",
        "sgb_geometric_reference",
        "sgb_european_put",
        "SGB_STATUS_FEASIBILITY = 3",
        "typedef struct SgbPricer SgbPricer;",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the generated header and the
/// static library, when a C compiler is on the path.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libsgbermudan_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("no C compiler or static library; C link check not run");
        return;
    }
    let out_dir = tempfile_dir();
    let bin = out_dir.join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = stdout.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    assert_eq!(&fields[1..3], ["4865", "481"]);
    assert!(fields[3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(&fields[4..], ["2", "1"]);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sgb-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
