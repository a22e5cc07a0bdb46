use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_HERMITE_POINTS: usize = 1000;

/// Gauss-Hermite rule for the standard normal density (probabilists'
/// convention): exact for polynomials of degree `<= 2n - 1`.
///
/// Nodes come from the Jacobi matrix eigenvalues and are polished by Newton
/// steps on the normalized Hermite functions `He_k(x) e^{-x^2/4} / sqrt(k!)`,
/// which stay bounded for every `n` supported here.
pub fn gauss_hermite_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_HERMITE_POINTS {
        return Err(Error::InvalidInput(format!("Gauss-Hermite size must be in 1..={MAX_HERMITE_POINTS}, got {n}")));
    }
    if n == 1 {
        return Ok((vec![0.0], vec![1.0]));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut guess: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guess.sort_by(f64::total_cmp);

    let half = n / 2;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Positive half only; the rule is symmetric and the odd-n centre is 0.
    for k in 0..half {
        let mut x = 0.5 * (guess[n - 1 - k] - guess[k]);
        for _ in 0..10 {
            let step = newton_step(n, x);
            x -= step;
            if step.abs() <= 1e-15 * x.abs() {
                break;
            }
        }
        let w = weight_at(n, x);
        nodes[n - 1 - k] = x;
        nodes[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    if n % 2 == 1 {
        nodes[half] = 0.0;
        weights[half] = weight_at(n, 0.0);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Normalized Hermite recurrence `psi_k = He_k / sqrt(k!)` at `x`, carried
/// with a running scale so outer nodes (`e^{-x^2/4}` below the f64 range
/// for `n` near the cap) neither underflow nor overflow.
struct Recurrence {
    /// `psi_n`, `psi_{n-1}` and `sum_{k<n} psi_k^2`, all divided by `e^{log_scale}`
    /// (the sum by `e^{2 log_scale}`).
    cur: f64,
    prev: f64,
    sum: f64,
    log_scale: f64,
}

impl Recurrence {
    fn run(n: usize, x: f64) -> Self {
        const BIG: f64 = 1e150;
        let mut r = Self { cur: 1.0, prev: 0.0, sum: 0.0, log_scale: -0.25 * x * x };
        for k in 0..n {
            r.sum += r.cur * r.cur;
            let next = (x * r.cur - (k as f64).sqrt() * r.prev) / ((k + 1) as f64).sqrt();
            r.prev = r.cur;
            r.cur = next;
            if r.cur.abs() > BIG {
                r.cur /= BIG;
                r.prev /= BIG;
                r.sum /= BIG * BIG;
                r.log_scale += BIG.ln();
            }
        }
        r
    }
}

/// Newton step `psi_n(x) / psi_n'(x)`; the common scale cancels.
fn newton_step(n: usize, x: f64) -> f64 {
    let r = Recurrence::run(n, x);
    r.cur / ((n as f64).sqrt() * r.prev)
}

/// Christoffel weight `e^{-x^2/2} / sum_{k<n} He_k(x)^2 / k!`.
fn weight_at(n: usize, x: f64) -> f64 {
    let r = Recurrence::run(n, x);
    (-0.5 * x * x - 2.0 * r.log_scale).exp() / r.sum
}

/// `E[X^k]` for a standard normal `X`.
pub fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(|j| j as f64).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        assert_eq!(gauss_hermite_1d(1).unwrap(), (vec![0.0], vec![1.0]));
        let (x, w) = gauss_hermite_1d(2).unwrap();
        assert!((x[1] - 1.0).abs() < 1e-15 && (x[0] + 1.0).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        let (x, w) = gauss_hermite_1d(3).unwrap();
        assert_eq!(x[1], 0.0);
        assert!((x[2] - 3f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!(gauss_hermite_1d(0).is_err());
        assert!(gauss_hermite_1d(MAX_HERMITE_POINTS + 1).is_err());
    }

    #[test]
    fn moments_exact() {
        for n in [1usize, 2, 3, 5, 8, 13, 20, 30] {
            let (x, w) = gauss_hermite_1d(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..(2 * n as u32) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let m = normal_moment(k);
                // odd moments cancel to zero; measure them against the even neighbour
                let scale = if k % 2 == 0 { m } else { normal_moment(k + 1) };
                assert!((q - m).abs() <= 1e-10 * scale.max(1.0), "n={n} k={k}: {q} vs {m}");
            }
        }
    }

    #[test]
    fn large_rules_are_sane() {
        // outer nodes of the larger rules sit where e^{-x^2/4} underflows
        for n in [400, 800, MAX_HERMITE_POINTS] {
            let (x, w) = gauss_hermite_1d(n).unwrap();
            assert!(x.iter().all(|v| v.is_finite()), "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]), "n={n}");
            assert!(w.iter().all(|&w| w >= 0.0 && w.is_finite()), "n={n}");
            let second: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            assert!((second - 1.0).abs() < 1e-12, "n={n}");
            let e: f64 = x.iter().zip(&w).map(|(x, w)| w * (0.3 * x).exp()).sum();
            assert!((e - (0.045f64).exp()).abs() < 1e-13, "n={n}");
        }
    }
}
