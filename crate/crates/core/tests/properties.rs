use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use sgbermudan::config::RunConfig;
use sgbermudan::engine::{price, PricingConfig};
use sgbermudan::market::{decorrelate, MarketParams, OptionSpec, PayoffKind};
use sgbermudan::oracles::{european_put_closed_form, geometric_reduction};
use sgbermudan::quadrature::{build_rule, integrate, normal_moment, GaussianStepSpec, QuadratureKind, RuleSpec};
use sgbermudan::sparse_grid::{build_grid, smolyak_index_set, Interpolant};
use sgbermudan::transform::{propagate, to_bounded, to_unbounded, TransformConfig};

/// Valid correlation matrices: normalized Gram matrices of random vectors
/// plus a ridge that keeps them well inside the positive-definite cone.
fn correlation(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |a| {
        let a = DMatrix::from_row_slice(d, d, &a);
        let g = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
        let s: Vec<f64> = (0..d).map(|i| g[(i, i)].sqrt()).collect();
        (0..d * d).map(|k| g[(k / d, k % d)] / (s[k / d] * s[k % d])).collect()
    })
}

fn market(d: usize) -> impl Strategy<Value = MarketParams> {
    (
        prop::collection::vec(50.0f64..150.0, d),
        0.0f64..0.08,
        prop::collection::vec(0.0f64..0.05, d),
        prop::collection::vec(0.05f64..0.6, d),
        correlation(d),
    )
        .prop_map(|(spot, rate, div, vols, corr)| MarketParams::new(spot, rate, div, vols, corr).unwrap())
}

fn any_market() -> impl Strategy<Value = MarketParams> {
    (1usize..=6).prop_flat_map(market)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_diagonalizes_covariance(m in any_market()) {
        let r = decorrelate(&m).unwrap();
        let d = m.dim();
        let cov = m.covariance();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.eigenvalues.clone()));
        let rebuilt = &r.rotation * lambda * r.rotation.transpose();
        prop_assert!((rebuilt - &cov).norm() <= 1e-12 * cov.norm());
        prop_assert!((r.rotation.transpose() * &r.rotation - DMatrix::identity(d, d)).norm() <= 1e-12);
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn prices_survive_rotation_roundtrip(m in any_market(), moves in prop::collection::vec(-0.5f64..0.5, 6)) {
        let r = decorrelate(&m).unwrap();
        let prices: Vec<f64> = m.spot.iter().zip(&moves).map(|(s, x)| s * x.exp()).collect();
        let x = r.rotated_from_prices(&m, &prices);
        let back = r.prices_from_rotated(&m, &x).unwrap();
        for (a, b) in back.iter().zip(&prices) {
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn tanh_map_roundtrips(z in prop::collection::vec(-0.999f64..0.999, 1..8), scale in 0.5f64..6.0) {
        let cfg = TransformConfig::new(scale, 1.0).unwrap();
        let back = to_bounded(&to_unbounded(&z, &cfg).unwrap(), &cfg);
        for (a, b) in back.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn shifts_compose(
        z in prop::collection::vec(-0.99f64..0.99, 3),
        y1 in prop::collection::vec(-0.5f64..0.5, 3),
        y2 in prop::collection::vec(-0.5f64..0.5, 3),
        scale in 0.5f64..4.0,
    ) {
        let cfg = TransformConfig::new(scale, 1.0).unwrap();
        let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let once = propagate(&z, &sum, &cfg).unwrap();
        let twice = propagate(&propagate(&z, &y1, &cfg).unwrap(), &y2, &cfg).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-10);
            prop_assert!(a.abs() < 1.0);
        }
    }

    #[test]
    fn reduction_keeps_positive_volatility(m in any_market()) {
        let spec = OptionSpec::new(100.0, 0.5, PayoffKind::GeometricPut, 4).unwrap();
        let r = geometric_reduction(&m, &spec).unwrap();
        prop_assert!(r.vol > 0.0 && r.spot > 0.0);
        if m.dim() == 1 {
            prop_assert!((r.vol - m.vols[0]).abs() <= 1e-15);
            prop_assert!((r.dividend - m.dividends[0]).abs() <= 1e-15);
            prop_assert!((r.spot - m.spot[0]).abs() <= 1e-12 * m.spot[0]);
        }
    }

    #[test]
    fn european_put_within_parity_bounds(
        spot in 10.0f64..300.0, strike in 10.0f64..300.0, rate in 0.0f64..0.1,
        dividend in 0.0f64..0.1, vol in 0.01f64..1.0, maturity in 0.01f64..5.0,
    ) {
        let put = european_put_closed_form(spot, strike, rate, dividend, vol, maturity);
        let bound = strike * (-rate * maturity).exp();
        prop_assert!(put >= 0.0 && put <= bound * (1.0 + 1e-14));
        // put >= discounted intrinsic of the forward
        prop_assert!(put >= bound - spot * (-dividend * maturity).exp() - 1e-10 * strike);
    }

    #[test]
    fn rules_are_normalized(
        kind in prop::sample::select(QuadratureKind::ALL.to_vec()),
        mean in prop::collection::vec(-0.1f64..0.1, 3),
        variances in prop::collection::vec(1e-4f64..0.1, 3),
        seed in 0u64..1000,
    ) {
        let size = match kind {
            QuadratureKind::GhTensor => 5,
            QuadratureKind::GhSparse | QuadratureKind::GkSparse => 3,
            _ => 128,
        };
        let step = GaussianStepSpec::new(mean.clone(), variances).unwrap();
        let rule = build_rule(kind, &step, size, seed).unwrap();
        prop_assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(rule.points().all(|p| p.iter().all(|v| v.is_finite())));
        if !kind.is_stochastic() {
            // symmetric rules reproduce the mean exactly
            for j in 0..3 {
                let got = integrate(&rule, |y| y[j]).unwrap();
                prop_assert!((got - mean[j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sparse_gauss_hermite_is_exact_to_total_degree(
        d in 1usize..=4, level in 1usize..=4, exps in prop::collection::vec(0u32..8, 4),
    ) {
        let mut a: Vec<u32> = exps[..d].to_vec();
        // trim to total degree <= 2 level - 1
        while a.iter().sum::<u32>() > 2 * level as u32 - 1 {
            let j = (0..d).max_by_key(|&j| a[j]).unwrap();
            a[j] -= 1;
        }
        let rule = build_rule(QuadratureKind::GhSparse, &GaussianStepSpec::standard(d), level, 0).unwrap();
        let got = integrate(&rule, |y| y.iter().zip(&a).map(|(v, &k)| v.powi(k as i32)).product()).unwrap();
        let exact: f64 = a.iter().map(|&k| normal_moment(k)).product();
        prop_assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1.0), "{a:?}: {got} vs {exact}");
    }

    #[test]
    fn interpolant_reproduces_nodal_values(d in 1usize..=4, level in 0usize..=4, seed in 0u64..u64::MAX) {
        let grid = Arc::new(build_grid(d, level).unwrap());
        // cheap deterministic pseudo-random values
        let values: Vec<f64> = (0..grid.len() as u64)
            .map(|p| ((p.wrapping_add(seed).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64) / (1u64 << 53) as f64 - 0.5)
            .collect();
        let it = Interpolant::fit(grid.clone(), values.clone()).unwrap();
        for (p, v) in values.iter().enumerate() {
            prop_assert!((it.evaluate(grid.point(p)) - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn combination_coefficients_sum_to_one() {
    for d in 1..=12 {
        for level in 0..=6 {
            let total: i64 = smolyak_index_set(level + d, d).iter().map(|(_, c)| c).sum();
            assert_eq!(total, 1, "d={d} L_I={level}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prices_respect_payoff_and_strike(
        spot in 70.0f64..130.0, vol in 0.1f64..0.4, rho in -0.3f64..0.8,
        payoff in prop::sample::select(vec![PayoffKind::GeometricPut, PayoffKind::ArithmeticPut]),
    ) {
        let m = MarketParams::equicorrelated(2, spot, 0.03, 0.0, vol, rho).unwrap();
        let spec = OptionSpec::new(100.0, 0.25, payoff, 8).unwrap();
        let r = price(&m, &spec, &PricingConfig::new(3, RuleSpec::new(QuadratureKind::GkSparse, 4))).unwrap();
        prop_assert!(r.price >= r.payoff_at_spot && r.price >= 0.0 && r.price <= spec.strike);
        prop_assert!(r.min_bubble > f64::EPSILON);
    }

    #[test]
    fn config_survives_toml_roundtrip(d in 1usize..=5, level in 1usize..=6, rho in -0.1f64..0.9, seed in 0u64..1000) {
        let text = format!(
            "[market]\ndim = {d}\nspot = 100.0\nrate = 0.03\nvol = 0.2\ncorrelation = {rho}\n\n\
             [option]\npayoff = \"geometric_put\"\nstrike = 100.0\nmaturity = 0.25\nexercise_count = 10\n\n\
             [method]\nlevel = {level}\nseed = {seed}\n"
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let again = RunConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg.market().unwrap(), again.market().unwrap());
        prop_assert_eq!(cfg.method.seed, seed);
        prop_assert_eq!(again.levels().unwrap(), vec![level]);
    }
}
