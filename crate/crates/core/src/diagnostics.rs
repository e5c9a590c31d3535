//! Chain diagnostics: autocorrelations, initial-monotone-sequence effective
//! sample size and acceptance rates.

use crate::engine::McmcDraws;
use crate::prelude::*;

/// Lags reported in [`ParamDiagnostics::acf`].
pub const ACF_LAGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDiagnostics {
    pub name: String,
    pub ess: f64,
    /// Autocorrelations at lags `1..=ACF_LAGS` (fewer for short chains).
    pub acf: Vec<f64>,
    /// The chain never moved; `ess` is then reported as 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub params: Vec<ParamDiagnostics>,
    pub acceptance: Vec<(String, f64)>,
}

/// Sample autocorrelations at lags `0..=max_lag`; `None` for a constant
/// chain.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = crate::stats::mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return None;
    }
    let max_lag = max_lag.min(n - 1);
    Some(
        (0..=max_lag)
            .map(|k| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0)
            .collect(),
    )
}

/// Effective sample size by Geyer's initial monotone sequence estimator,
/// clamped to `[1, n]`. Returns `None` for a constant chain.
/// Autocorrelations are evaluated lazily up to the truncation point.
pub fn effective_sample_size(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = crate::stats::mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum::<f64>();
    if !(c0 > 0.0) {
        return None;
    }
    let rho = |k: usize| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0;
    // Γ_m = ρ_{2m} + ρ_{2m+1}, truncated at the first non-positive pair and
    // forced monotone
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let mut g = if m == 0 { 1.0 } else { rho(2 * m) } + rho(2 * m + 1);
        if g <= 0.0 {
            break;
        }
        if g > prev {
            g = prev;
        }
        sum += g;
        prev = g;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Some((n as f64 / tau).clamp(1.0, n as f64))
}

pub fn diagnostics(draws: &McmcDraws) -> ChainDiagnostics {
    let params = draws
        .traces()
        .into_iter()
        .map(|(name, tr)| match effective_sample_size(&tr) {
            Some(ess) => ParamDiagnostics {
                name,
                ess,
                acf: autocorrelation(&tr, ACF_LAGS).map(|r| r[1..].to_vec()).unwrap_or_default(),
                degenerate: false,
            },
            None => ParamDiagnostics { name, ess: 1.0, acf: Vec::new(), degenerate: true },
        })
        .collect();
    ChainDiagnostics { params, acceptance: draws.acceptance.rates.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::standard_normal;
    use crate::rng::{stream, Block};

    #[test]
    fn iid_chain_has_full_ess() {
        let mut rng = stream(1, Block::Prior, 0);
        let x: Vec<f64> = (0..20_000).map(|_| standard_normal(&mut rng)).collect();
        let ess = effective_sample_size(&x).unwrap();
        assert!((ess / 20_000.0 - 1.0).abs() < 0.1, "ess {ess}");
    }

    #[test]
    fn ar1_chain_matches_analytic_ess() {
        let phi: f64 = 0.8;
        let n = 200_000;
        let mut rng = stream(2, Block::Prior, 0);
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = phi * x[t - 1] + (1.0 - phi * phi).sqrt() * standard_normal(&mut rng);
        }
        let ess = effective_sample_size(&x).unwrap();
        let expected = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((ess / expected - 1.0).abs() < 0.15, "ess {ess} vs {expected}");
        let acf = autocorrelation(&x, 3).unwrap();
        assert!((acf[1] - phi).abs() < 0.02);
    }

    #[test]
    fn constant_chain_is_degenerate() {
        assert!(effective_sample_size(&[3.0; 50]).is_none());
        assert!(autocorrelation(&[1.0], 5).is_none());
    }
}
