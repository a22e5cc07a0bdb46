//! Market and contract data, basket put payoffs, and the spectral rotation
//! that turns correlated log-prices into independent Gaussian components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible |(Q x)_i| before `exp` is considered misconfigured.
pub const MAX_LOG_MOVE: f64 = 700.0;

/// Correlated geometric Brownian motion market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub spot: Vec<f64>,
    pub rate: f64,
    pub dividends: Vec<f64>,
    pub vols: Vec<f64>,
    /// Row-major d x d correlation matrix.
    pub correlation: Vec<f64>,
}

impl MarketParams {
    pub fn new(spot: Vec<f64>, rate: f64, dividends: Vec<f64>, vols: Vec<f64>, correlation: Vec<f64>) -> Result<Self> {
        let m = Self { spot, rate, dividends, vols, correlation };
        m.validate()?;
        Ok(m)
    }

    /// Identical assets with constant pairwise correlation `rho`.
    pub fn equicorrelated(d: usize, spot: f64, rate: f64, dividend: f64, vol: f64, rho: f64) -> Result<Self> {
        let mut corr = vec![rho; d * d];
        for i in 0..d {
            corr[i * d + i] = 1.0;
        }
        Self::new(vec![spot; d], rate, vec![dividend; d], vec![vol; d], corr)
    }

    pub fn dim(&self) -> usize {
        self.spot.len()
    }

    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.correlation)
    }

    /// Covariance of log-returns per unit time, diag(sigma) P diag(sigma).
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.vols[i] * self.correlation[i * d + j] * self.vols[j])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidInput("market dimension must be at least 1".into()));
        }
        if self.dividends.len() != d || self.vols.len() != d {
            return Err(Error::InvalidInput(format!(
                "spot has {d} entries but dividends has {} and vols has {}",
                self.dividends.len(),
                self.vols.len()
            )));
        }
        if self.correlation.len() != d * d {
            return Err(Error::InvalidInput(format!(
                "correlation must have {} entries, got {}",
                d * d,
                self.correlation.len()
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidInput("rate must be finite".into()));
        }
        for (i, &s) in self.spot.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("spot[{i}] must be positive, got {s}")));
            }
        }
        for (i, &v) in self.vols.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("vol[{i}] must be positive, got {v}")));
            }
        }
        if self.dividends.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidInput("dividends must be finite".into()));
        }
        for i in 0..d {
            if (self.correlation[i * d + i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("correlation[{i}][{i}] must be 1")));
            }
            for j in 0..i {
                let (a, b) = (self.correlation[i * d + j], self.correlation[j * d + i]);
                if (a - b).abs() > 1e-12 || !a.is_finite() {
                    return Err(Error::InvalidInput(format!("correlation not symmetric at ({i},{j})")));
                }
                if a.abs() > 1.0 {
                    return Err(Error::InvalidInput(format!("correlation[{i}][{j}] = {a} is outside [-1, 1]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    ArithmeticPut,
    GeometricPut,
}

impl PayoffKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayoffKind::ArithmeticPut => "arithmetic_put",
            PayoffKind::GeometricPut => "geometric_put",
        }
    }
}

/// Basket put contract exercisable at `exercise_count` equidistant dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
    pub payoff: PayoffKind,
    pub exercise_count: usize,
}

impl OptionSpec {
    pub fn new(strike: f64, maturity: f64, payoff: PayoffKind, exercise_count: usize) -> Result<Self> {
        let spec = Self { strike, maturity, payoff, exercise_count };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidInput(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidInput(format!("maturity must be positive, got {}", self.maturity)));
        }
        if self.exercise_count == 0 {
            return Err(Error::InvalidInput("exercise_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.exercise_count as f64
    }

    /// `max(strike - mean(prices), 0)` with the arithmetic or geometric mean.
    pub fn payoff(&self, prices: &[f64]) -> f64 {
        let n = prices.len() as f64;
        let mean = match self.payoff {
            PayoffKind::ArithmeticPut => prices.iter().sum::<f64>() / n,
            PayoffKind::GeometricPut => (prices.iter().map(|s| s.ln()).sum::<f64>() / n).exp(),
        };
        (self.strike - mean).max(0.0)
    }
}

/// Decorrelated coordinates: `cov = Q diag(eigenvalues) Q^T`, drift `Q^T (r - delta - sigma^2/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedModel {
    pub rotation: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub drift: Vec<f64>,
}

impl RotatedModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Asset prices `S0 .* exp(Q x)` for a rotated log-price `x`.
    pub fn prices_from_rotated(&self, params: &MarketParams, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.prices_from_rotated_into(params, x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn prices_from_rotated_into(&self, params: &MarketParams, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, (o, s0)) in out.iter_mut().zip(&params.spot).enumerate() {
            let acc: f64 = x.iter().enumerate().map(|(j, xj)| self.rotation[(i, j)] * xj).sum();
            if !acc.is_finite() || acc.abs() > MAX_LOG_MOVE {
                return Err(Error::InvalidInput(format!(
                    "log-price move {acc:e} in asset {i} exceeds {MAX_LOG_MOVE}; check the transform scale"
                )));
            }
            *o = s0 * acc.exp();
        }
        Ok(())
    }

    /// Rotated log-price `Q^T ln(S ./ S0)`.
    pub fn rotated_from_prices(&self, params: &MarketParams, prices: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let logs: Vec<f64> = (0..d).map(|i| (prices[i] / params.spot[i]).ln()).collect();
        (0..d).map(|j| (0..d).map(|i| self.rotation[(i, j)] * logs[i]).sum()).collect()
    }
}

/// Spectral decomposition of the log-return covariance.
pub fn decorrelate(params: &MarketParams) -> Result<RotatedModel> {
    params.validate()?;
    let d = params.dim();
    let cov = params.covariance();
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps the solver's order on ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let max_ev = eigenvalues[0];
    let min_ev = eigenvalues[d - 1];
    if !(max_ev > 0.0) || min_ev <= 1e-12 * max_ev {
        return Err(Error::InvalidInput(format!(
            "correlation matrix is not positive definite (eigenvalues {min_ev:e} .. {max_ev:e})"
        )));
    }

    let mut rotation = DMatrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        // sign convention: the largest-magnitude entry is positive
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() + 1e-14 {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v = -v;
        }
        rotation.set_column(col, &v);
    }

    let base: Vec<f64> =
        (0..d).map(|i| params.rate - params.dividends[i] - 0.5 * params.vols[i] * params.vols[i]).collect();
    let drift = (0..d).map(|j| (0..d).map(|i| rotation[(i, j)] * base[i]).sum()).collect();

    Ok(RotatedModel { rotation, eigenvalues, drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn put(kind: PayoffKind) -> OptionSpec {
        OptionSpec::new(100.0, 0.25, kind, 50).unwrap()
    }

    #[test]
    fn one_dimensional_rotation_is_identity() {
        let m = MarketParams::new(vec![100.0], 0.03, vec![0.01], vec![0.2], vec![1.0]).unwrap();
        let rot = decorrelate(&m).unwrap();
        assert_eq!(rot.rotation[(0, 0)], 1.0);
        assert!((rot.eigenvalues[0] - 0.04).abs() < 1e-15);
        assert!((rot.drift[0] - (0.03 - 0.01 - 0.02)).abs() < 1e-15);
    }

    #[test]
    fn two_asset_eigenvalues() {
        let m = MarketParams::equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5).unwrap();
        let rot = decorrelate(&m).unwrap();
        assert!((rot.eigenvalues[0] - 0.06).abs() < 1e-14);
        assert!((rot.eigenvalues[1] - 0.02).abs() < 1e-14);
    }

    #[test]
    fn uncorrelated_is_signed_permutation() {
        let m = MarketParams::equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.0).unwrap();
        let rot = decorrelate(&m).unwrap();
        assert!((rot.eigenvalues[0] - 0.04).abs() < 1e-15);
        assert!((rot.eigenvalues[1] - 0.04).abs() < 1e-15);
        for j in 0..2 {
            let col: Vec<f64> = (0..2).map(|i| rot.rotation[(i, j)].abs()).collect();
            assert!(col.iter().any(|&c| (c - 1.0).abs() < 1e-14));
            assert!(col.iter().any(|&c| c.abs() < 1e-14));
        }
    }

    #[test]
    fn rejects_singular_correlation() {
        let m = MarketParams::equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 1.0).unwrap();
        assert!(matches!(decorrelate(&m), Err(Error::InvalidInput(_))));
        assert!(MarketParams::equicorrelated(2, 100.0, 0.03, 0.0, -0.2, 0.5).is_err());
        assert!(MarketParams::new(vec![100.0, 0.0], 0.0, vec![0.0; 2], vec![0.2; 2], vec![1.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(put(PayoffKind::ArithmeticPut).payoff(&[80.0, 100.0]), 10.0);
        assert!((put(PayoffKind::GeometricPut).payoff(&[81.0, 121.0]) - 1.0).abs() < 1e-12);
        for kind in [PayoffKind::ArithmeticPut, PayoffKind::GeometricPut] {
            assert_eq!(put(kind).payoff(&[200.0; 5]), 0.0);
        }
    }

    #[test]
    fn prices_from_rotated_examples() {
        let m = MarketParams::equicorrelated(3, 100.0, 0.03, 0.0, 0.2, 0.5).unwrap();
        let rot = decorrelate(&m).unwrap();
        assert_eq!(rot.prices_from_rotated(&m, &[0.0; 3]).unwrap(), vec![100.0; 3]);

        let m1 = MarketParams::new(vec![100.0], 0.0, vec![0.0], vec![0.2], vec![1.0]).unwrap();
        let r1 = decorrelate(&m1).unwrap();
        let s = r1.prices_from_rotated(&m1, &[2f64.ln()]).unwrap();
        assert!((s[0] - 200.0).abs() < 1e-12);

        assert!(rot.prices_from_rotated(&m, &[1300.0, 0.0, 0.0]).is_err());
    }
}
