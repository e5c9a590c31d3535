//! Mean-variance portfolios from predictive moments, VaR quantiles and the
//! Kupiec proportion-of-failures backtest.

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::stats::{chi2_1_sf, quantile_sorted, sorted};
use nalgebra::{DMatrix, DVector};

/// Fewest predictive draws accepted by [`var_quantile`].
pub const MIN_VAR_DRAWS: usize = 1000;

/// Daily return targets, in raw log-return units.
pub const TARGETS: [f64; 3] = [0.00005, 0.0001, 0.0002];

/// VaR levels of the backtest.
pub const ALPHAS: [f64; 3] = [0.005, 0.01, 0.05];

/// Allocation rule: variance-minimizing at a target mean, or target-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Allocation {
    Target(f64),
    MinVariance,
}

impl Allocation {
    /// The three targeted rules followed by the target-free one.
    pub fn standard() -> Vec<Allocation> {
        TARGETS.iter().map(|&m| Allocation::Target(m)).chain([Allocation::MinVariance]).collect()
    }

    pub fn label(&self) -> String {
        match self {
            Allocation::Target(m) => alloc::format!("{m}"),
            Allocation::MinVariance => "free".into(),
        }
    }
}

/// Forecast mean `g` and SPD covariance `D` of the returns.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInputs {
    pub g: DVector<f64>,
    pub d: DMatrix<f64>,
}

impl PortfolioInputs {
    pub fn new(g: DVector<f64>, d: DMatrix<f64>) -> Result<Self> {
        let k = g.len();
        if k == 0 || d.nrows() != k || d.ncols() != k {
            return Err(Error::Dimension(alloc::format!("mean of length {k}, covariance {}x{}", d.nrows(), d.ncols())));
        }
        if g.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite forecast moments"));
        }
        Ok(Self { g, d })
    }

    /// Sample mean and covariance of draws, with a ridge of
    /// `1e-10 · trace / k` added only when the sample covariance is not
    /// numerically SPD.
    pub fn from_draws(draws: &[Vec<f64>]) -> Result<Self> {
        let n = draws.len();
        if n < 2 {
            return Err(Error::TooFewDraws { need: 2, got: n });
        }
        let k = draws[0].len();
        let mut g = DVector::zeros(k);
        for y in draws {
            if y.len() != k {
                return Err(Error::Dimension("ragged predictive draws".into()));
            }
            g += DVector::from_column_slice(y);
        }
        g /= n as f64;
        let mut d = DMatrix::zeros(k, k);
        for y in draws {
            let e = DVector::from_column_slice(y) - &g;
            d.ger(1.0, &e, &e, 1.0);
        }
        d /= (n - 1) as f64;
        if d.clone().cholesky().is_none() {
            let ridge = 1e-10 * d.trace().abs().max(f64::MIN_POSITIVE) / k as f64;
            for i in 0..k {
                d[(i, i)] += ridge;
            }
        }
        Self::new(g, d)
    }

    fn precision(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .d
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("forecast covariance".into()))?;
        Ok(chol.inverse())
    }

    pub fn weights(&self, rule: Allocation) -> Result<DVector<f64>> {
        match rule {
            Allocation::Target(m) => target_portfolio(self, m),
            Allocation::MinVariance => minvar_portfolio(&self.d),
        }
    }
}

/// Minimizes `ω'Dω` subject to `ω'g = m` and `ω'1 = 1`:
/// `ω = K(λ₁1 + λ₂g)` with `K = D⁻¹` and the multipliers solving the 2×2
/// system `[1'K1, 1'Kg; 1'Kg, g'Kg] λ = (1, m)`.
pub fn target_portfolio(inputs: &PortfolioInputs, m: f64) -> Result<DVector<f64>> {
    if !m.is_finite() {
        return Err(Error::invalid("target return must be finite"));
    }
    let kmat = inputs.precision()?;
    let one = DVector::from_element(inputs.g.len(), 1.0);
    let k1 = &kmat * &one;
    let kg = &kmat * &inputs.g;
    let a = one.dot(&k1);
    let b = one.dot(&kg);
    let c = inputs.g.dot(&kg);
    let det = a * c - b * b;
    // det = 0 iff g ∝ 1 (Cauchy-Schwarz in the K inner product)
    if !(det > 1e-12 * a * c) {
        return Err(Error::Degenerate("forecast means are proportional to the unit vector".into()));
    }
    let l1 = (c - b * m) / det;
    let l2 = (a * m - b) / det;
    Ok(k1 * l1 + kg * l2)
}

/// `ω* = K1 / (1'K1)`.
pub fn minvar_portfolio(d: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = d.nrows();
    let inputs = PortfolioInputs::new(DVector::zeros(k), d.clone())?;
    let k1 = inputs.precision()? * DVector::from_element(k, 1.0);
    let s = k1.sum();
    Ok(k1 / s)
}

/// Empirical `alpha`-quantile of `ω'y` over predictive draws.
pub fn var_quantile(weights: &DVector<f64>, draws: &[Vec<f64>], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid(alloc::format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    if draws.len() < MIN_VAR_DRAWS {
        return Err(Error::TooFewDraws { need: MIN_VAR_DRAWS, got: draws.len() });
    }
    let r: Vec<f64> = draws.iter().map(|y| portfolio_return(weights, y)).collect();
    Ok(quantile_sorted(&sorted(&r), alpha))
}

pub fn portfolio_return(weights: &DVector<f64>, y: &[f64]) -> f64 {
    weights.iter().zip(y).map(|(w, v)| w * v).sum()
}

/// A violation is a realized return strictly below the VaR forecast.
pub fn count_violations(realized: &[f64], var: &[f64]) -> usize {
    realized.iter().zip(var).filter(|(r, v)| r < v).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarReport {
    pub alpha: f64,
    /// Experiment days `N`.
    pub days: usize,
    pub violations: usize,
    pub lr: f64,
    pub p_value: f64,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Likelihood-ratio test that violations occur at rate `alpha`, referred
/// to χ²(1).
pub fn kupiec_test(n: usize, days: usize, alpha: f64) -> Result<VarReport> {
    if n > days {
        return Err(Error::invalid(alloc::format!("{n} violations in {days} days")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(alloc::format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (nf, big) = (n as f64, days as f64);
    let lr = if days == 0 || nf == alpha * big {
        0.0
    } else {
        let pi = nf / big;
        let hat = xlogy(nf, pi) + xlogy(big - nf, 1.0 - pi);
        let null = nf * alpha.ln() + (big - nf) * (1.0 - alpha).ln();
        (2.0 * (hat - null)).max(0.0)
    };
    Ok(VarReport { alpha, days, violations: n, lr, p_value: chi2_1_sf(lr).clamp(0.0, 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_two_asset_target() {
        let inp = PortfolioInputs::new(DVector::from_vec(vec![0.01, 0.02]), DMatrix::identity(2, 2)).unwrap();
        let w = target_portfolio(&inp, 0.015).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn equal_means_are_degenerate() {
        let inp = PortfolioInputs::new(DVector::from_element(3, 0.01), DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(target_portfolio(&inp, 0.01), Err(Error::Degenerate(_))));
    }

    #[test]
    fn minvar_precision_weights() {
        let w = minvar_portfolio(&DMatrix::identity(5, 5)).unwrap();
        assert!(w.iter().all(|&x| (x - 0.2).abs() < 1e-12));
        let w = minvar_portfolio(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        assert_abs_diff_eq!(w[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn var_of_constant_draws() {
        let draws = vec![vec![0.5, 0.5]; 1000];
        let w = DVector::from_vec(vec![0.3, 0.7]);
        assert_abs_diff_eq!(var_quantile(&w, &draws, 0.05).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(var_quantile(&w, &draws[..999], 0.05), Err(Error::TooFewDraws { .. })));
    }

    #[test]
    fn kupiec_exact_rate_and_limits() {
        let r = kupiec_test(5, 500, 0.01).unwrap();
        assert_eq!(r.lr, 0.0);
        assert_eq!(r.p_value, 1.0);
        // n = 0: LR = -2N ln(1-α)
        let r = kupiec_test(0, 100, 0.05).unwrap();
        assert_abs_diff_eq!(r.lr, -200.0 * 0.95f64.ln(), epsilon = 1e-10);
        let r = kupiec_test(100, 100, 0.05).unwrap();
        assert_abs_diff_eq!(r.lr, -200.0 * 0.05f64.ln(), epsilon = 1e-10);
        assert!(kupiec_test(3, 2, 0.05).is_err());
    }

    #[test]
    fn violations_are_strict() {
        assert_eq!(count_violations(&[-1.0, -2.0, 0.0], &[-1.0, -1.0, -1.0]), 1);
    }
}
