//! Independent references: the geometric-basket reduction to one asset, the
//! closed-form European put, a dense 1-d Bermudan pricer and a binomial tree.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketParams, OptionSpec};
use crate::quadrature::normal_cdf;
use crate::sparse_grid::barycentric_eval;

/// One-asset problem equivalent to a geometric basket put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduced1D {
    pub spot: f64,
    pub vol: f64,
    pub dividend: f64,
    pub rate: f64,
    pub strike: f64,
    pub maturity: f64,
    pub exercise_count: usize,
}

impl Reduced1D {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.spot, self.vol, self.strike, self.maturity];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.exercise_count == 0 {
            return Err(Error::InvalidInput(format!(
                "reduced problem needs positive spot, vol, strike, maturity and K: {self:?}"
            )));
        }
        if !self.rate.is_finite() || !self.dividend.is_finite() {
            return Err(Error::InvalidInput("reduced rate and dividend must be finite".into()));
        }
        Ok(())
    }

    pub fn with_exercise_count(self, exercise_count: usize) -> Self {
        Self { exercise_count, ..self }
    }
}

/// The geometric mean of the basket is itself lognormal.
pub fn geometric_reduction(params: &MarketParams, spec: &OptionSpec) -> Result<Reduced1D> {
    params.validate()?;
    spec.validate()?;
    let d = params.dim();
    let inv_d = 1.0 / d as f64;
    let spot = (params.spot.iter().map(|s| s.ln()).sum::<f64>() * inv_d).exp();
    let mut var = 0.0;
    for i in 0..d {
        for j in 0..d {
            var += params.vols[i] * params.vols[j] * params.correlation[i * d + j];
        }
    }
    let vol = var.sqrt() * inv_d;
    let carry: f64 = params.dividends.iter().zip(&params.vols).map(|(q, s)| q + 0.5 * s * s).sum();
    let reduced = Reduced1D {
        spot,
        vol,
        dividend: carry * inv_d - 0.5 * vol * vol,
        rate: params.rate,
        strike: spec.strike,
        maturity: spec.maturity,
        exercise_count: spec.exercise_count,
    };
    reduced.validate()?;
    Ok(reduced)
}

/// Black-Scholes put with continuous dividend yield.
pub fn european_put_closed_form(spot: f64, strike: f64, rate: f64, dividend: f64, vol: f64, maturity: f64) -> f64 {
    let disc = (-rate * maturity).exp();
    let forward = spot * ((rate - dividend) * maturity).exp();
    let sd = vol * maturity.sqrt();
    if !(sd > 0.0) {
        return disc * (strike - forward).max(0.0);
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    disc * (strike * normal_cdf(-d2) - forward * normal_cdf(-d1))
}

/// Discretization of [`bermudan_put_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// Chebyshev-Lobatto nodes of the continuation value.
    pub nodes: usize,
    /// Gauss-Legendre panels per unit standard deviation of one step.
    pub panels_per_sd: usize,
    /// Gauss-Legendre points per panel.
    pub panel_points: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { nodes: 129, panels_per_sd: 1, panel_points: 6 }
    }
}

impl Refinement {
    pub fn doubled(self) -> Self {
        Self { nodes: 2 * self.nodes - 1, panels_per_sd: self.panels_per_sd, panel_points: 2 * self.panel_points }
    }
}

/// Log-price half-width of the 1-d domain, in standard deviations over `T`.
const DOMAIN_SD: f64 = 9.0;
/// Standard-normal truncation of every step's expectation.
const TAIL_SD: f64 = 9.0;

/// Bermudan put exercisable at `0, dt, ..., T` (`dt = T / K`) on one
/// lognormal asset.
///
/// The continuation value `C_k` lives in log-moneyness `x` on a
/// Chebyshev-Lobatto grid over `|x| <= DOMAIN_SD sd(T)`. Each expectation is
/// split at the exercise boundary of the next date: the payoff side
/// `x < x*` integrates in closed form, the holding side by panelled
/// Gauss-Legendre against the normal density. Deep in the money the option
/// is exercised; beyond the upper edge the continuation value is dropped.
pub fn bermudan_put_1d(problem: &Reduced1D, refinement: Refinement) -> Result<f64> {
    problem.validate()?;
    if refinement.nodes < 3 || refinement.panel_points == 0 || refinement.panels_per_sd == 0 {
        return Err(Error::InvalidInput(format!("refinement too coarse: {refinement:?}")));
    }
    let k_total = problem.exercise_count;
    let dt = problem.maturity / k_total as f64;
    let sd = problem.vol * dt.sqrt();
    let drift = (problem.rate - problem.dividend - 0.5 * problem.vol * problem.vol) * dt;
    let disc = (-problem.rate * dt).exp();
    let half_width = DOMAIN_SD * problem.vol * problem.maturity.sqrt();
    let spot = problem.spot;
    let strike = problem.strike;
    let payoff = |x: f64| (strike - spot * x.exp()).max(0.0);
    let strike_x = (strike / spot).ln();

    let n = refinement.nodes;
    let nodes: Vec<f64> =
        (0..n).map(|k| -half_width * (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos()).collect();
    let bary: Vec<f64> = (0..n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    let (gl_x, gl_w) = gauss_legendre(refinement.panel_points)?;

    // E[V(x + drift + sd xi)] where V = payoff below `boundary` and `cont`
    // between `boundary` and the domain edge.
    let expectation = |x: f64, boundary: f64, cont: Option<&[f64]>| -> f64 {
        let mean = x + drift;
        let xi_star = ((boundary - mean) / sd).clamp(-TAIL_SD, TAIL_SD);
        // E[(strike - spot e^{mean + sd xi}) 1{xi < xi_star}]
        let exercised = strike * normal_cdf(xi_star) - spot * (mean + 0.5 * sd * sd).exp() * normal_cdf(xi_star - sd);
        let Some(values) = cont else {
            return exercised;
        };
        let hi = ((half_width - mean) / sd).min(TAIL_SD);
        if hi <= xi_star {
            return exercised;
        }
        let panels = ((hi - xi_star) * refinement.panels_per_sd as f64).ceil().max(1.0) as usize;
        let width = (hi - xi_star) / panels as f64;
        let mut held = 0.0;
        for p in 0..panels {
            let a = xi_star + p as f64 * width;
            for (t, w) in gl_x.iter().zip(&gl_w) {
                let xi = a + 0.5 * width * (t + 1.0);
                let y = mean + sd * xi;
                let c = barycentric_eval(&nodes, &bary, values, y.clamp(-half_width, half_width));
                held += w * 0.5 * width * c * (-0.5 * xi * xi).exp();
            }
        }
        exercised + held / (2.0 * std::f64::consts::PI).sqrt()
    };

    // Dates k = K-1 .. 1 on the grid; the final date's value is the payoff.
    let mut cont: Option<Vec<f64>> = None;
    let mut boundary = strike_x;
    for _ in 1..k_total {
        let values: Vec<f64> = nodes.iter().map(|&x| disc * expectation(x, boundary, cont.as_deref())).collect();
        boundary = exercise_boundary(&nodes, &bary, &values, -half_width, strike_x.min(half_width), payoff);
        cont = Some(values);
    }
    let c0 = disc * expectation(0.0, boundary, cont.as_deref());
    let v0 = payoff(0.0).max(c0);
    if !v0.is_finite() {
        return Err(Error::NonFinite { step: 0, point: 0 });
    }
    Ok(v0)
}

/// Root of `payoff - C` on `[lo, hi]`: below it exercising is optimal.
fn exercise_boundary(
    nodes: &[f64],
    bary: &[f64],
    values: &[f64],
    lo: f64,
    hi: f64,
    payoff: impl Fn(f64) -> f64,
) -> f64 {
    let gap = |x: f64| payoff(x) - barycentric_eval(nodes, bary, values, x);
    if gap(lo) <= 0.0 {
        return lo;
    }
    if gap(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if gap(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 1000 {
        return Err(Error::InvalidInput(format!("Gauss-Legendre size must be in 1..=1000, got {n}")));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        let k = i.max(j) as f64;
        if i.abs_diff(j) == 1 {
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        for _ in 0..5 {
            let (p, dp) = legendre(n, *xi);
            *xi -= p / dp;
        }
        let (_, dp) = legendre(n, *xi);
        *wi = 2.0 / ((1.0 - *xi * *xi) * dp * dp);
    }
    // exact symmetry
    for i in 0..n / 2 {
        let (a, b) = (0.5 * (x[n - 1 - i] - x[i]), 0.5 * (w[i] + w[n - 1 - i]));
        x[i] = -a;
        x[n - 1 - i] = a;
        w[i] = b;
        w[n - 1 - i] = b;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Outcome of [`bermudan_put_converged`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergedPrice {
    pub price: f64,
    /// `|price - previous|` under the last doubling.
    pub change: f64,
    pub refinement: Refinement,
}

/// Doubles the refinement until the price moves by at most `tol`.
pub fn bermudan_put_converged(
    problem: &Reduced1D,
    start: Refinement,
    tol: f64,
    max_doublings: usize,
) -> Result<ConvergedPrice> {
    let mut refinement = start;
    let mut prev = bermudan_put_1d(problem, refinement)?;
    for _ in 0..max_doublings {
        refinement = refinement.doubled();
        let price = bermudan_put_1d(problem, refinement)?;
        let change = (price - prev).abs();
        if change <= tol {
            return Ok(ConvergedPrice { price, change, refinement });
        }
        prev = price;
    }
    Err(Error::NoConvergence(format!("1-d Bermudan put did not settle to {tol:e} within {max_doublings} doublings")))
}

/// Default self-converged reference used by the CLI and the acceptance runs.
pub fn bermudan_put_reference(problem: &Reduced1D) -> Result<ConvergedPrice> {
    bermudan_put_converged(problem, Refinement::default(), 1e-7, 5)
}

/// Cox-Ross-Rubinstein tree with `steps_per_date` steps between exercise
/// dates; exercise is checked on the dates only. The average of two
/// consecutive step counts damps the odd-even oscillation.
pub fn binomial_bermudan_put(problem: &Reduced1D, steps_per_date: usize) -> Result<f64> {
    problem.validate()?;
    if steps_per_date == 0 {
        return Err(Error::InvalidInput("binomial tree needs at least one step per date".into()));
    }
    let a = crr(problem, steps_per_date);
    let b = crr(problem, steps_per_date + 1);
    Ok(0.5 * (a + b))
}

fn crr(p: &Reduced1D, per_date: usize) -> f64 {
    let n = per_date * p.exercise_count;
    let h = p.maturity / n as f64;
    let u = (p.vol * h.sqrt()).exp();
    let q = (((p.rate - p.dividend) * h).exp() - 1.0 / u) / (u - 1.0 / u);
    let disc = (-p.rate * h).exp();
    let payoff = |i: usize, step: usize| (p.strike - p.spot * u.powi(2 * i as i32 - step as i32)).max(0.0);
    let mut v: Vec<f64> = (0..=n).map(|i| payoff(i, n)).collect();
    for step in (0..n).rev() {
        for i in 0..=step {
            v[i] = disc * (q * v[i + 1] + (1.0 - q) * v[i]);
        }
        if step % per_date == 0 {
            for (i, vi) in v.iter_mut().enumerate().take(step + 1) {
                *vi = vi.max(payoff(i, step));
            }
        }
    }
    v[0]
}
