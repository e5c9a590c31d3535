//! Data generation from the full model and the replicated skewness study.

use crate::distributions::{sample_inverse_gamma, standard_normal};
use crate::error::{Error, Result};
use crate::model::{clamp_h, inverse_structural_transform, n_states, LatentStates};
use crate::panel::ReturnsPanel;
use crate::par;
use crate::prelude::*;
use crate::rng::{stream, Block};
use crate::stats::{quantile_sorted, skewness, sorted};
use nalgebra::DMatrix;
use rand::Rng;

/// Data-generating parameters of one series. Zero noise (`sigma = 0`) is
/// allowed here, unlike in the posterior parameter types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruth {
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
    pub rho: f64,
    pub nu: f64,
    pub beta: f64,
}

/// Data-generating AR(1) parameters of one covariance state; `v_a = 0`
/// holds the state at `mu_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovTruth {
    pub mu_a: f64,
    pub phi_a: f64,
    pub v_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub series: Vec<SeriesTruth>,
    pub cov: Vec<CovTruth>,
}

impl Truth {
    pub fn k(&self) -> usize {
        self.series.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.cov.len() != n_states(k) {
            return Err(Error::Dimension(alloc::format!(
                "{} covariance states for {k} series",
                self.cov.len()
            )));
        }
        for s in &self.series {
            let ok = s.mu.is_finite()
                && s.phi.abs() < 1.0
                && s.sigma >= 0.0
                && s.rho.abs() <= 1.0
                && s.nu > 4.0
                && s.beta.is_finite();
            if !ok {
                return Err(Error::invalid(alloc::format!("series truth out of range: {s:?}")));
            }
        }
        for q in &self.cov {
            if !(q.mu_a.is_finite() && q.phi_a.abs() < 1.0 && q.v_a >= 0.0) {
                return Err(Error::invalid(alloc::format!("covariance truth out of range: {q:?}")));
            }
        }
        Ok(())
    }
}

/// A generated panel together with every latent quantity behind it.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub panel: ReturnsPanel,
    pub states: LatentStates,
    /// `ε[i][t]` and `η[i][t]`.
    pub eps: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
}

/// Simulates `t` observations: `y_t = A_t^{-1} Λ_t w_t` with skew-t `w`,
/// leverage-correlated volatility shocks and AR(1) covariance states, all
/// started from their stationary distributions.
pub fn generate_dataset<R: Rng + ?Sized>(truth: &Truth, t: usize, rng: &mut R) -> Result<SimulatedData> {
    truth.validate()?;
    if t == 0 {
        return Err(Error::invalid("cannot simulate an empty sample"));
    }
    let k = truth.k();
    let p = n_states(k);
    let mut h: Vec<f64> = truth
        .series
        .iter()
        .map(|s| s.mu + s.sigma / (1.0 - s.phi * s.phi).sqrt() * standard_normal(rng))
        .collect();
    let mut a: Vec<f64> = truth
        .cov
        .iter()
        .map(|q| q.mu_a + q.v_a / (1.0 - q.phi_a * q.phi_a).sqrt() * standard_normal(rng))
        .collect();
    let mut y = DMatrix::zeros(t, k);
    let mut hs = vec![vec![0.0; t]; k];
    let mut zs = vec![vec![0.0; t]; k];
    let mut as_ = vec![vec![0.0; t]; p];
    let mut eps = vec![vec![0.0; t]; k];
    let mut eta = vec![vec![0.0; t]; k];
    let mut ytil = vec![0.0; k];
    for tt in 0..t {
        for (i, s) in truth.series.iter().enumerate() {
            let z = sample_inverse_gamma(0.5 * s.nu, 0.5 * s.nu, rng)?;
            let e = standard_normal(rng);
            let n = s.sigma * (s.rho * e + (1.0 - s.rho * s.rho).sqrt() * standard_normal(rng));
            let c = s.nu / (s.nu - 2.0);
            ytil[i] = (s.beta * (z - c) + z.sqrt() * e) * (0.5 * clamp_h(h[i])).exp();
            hs[i][tt] = h[i];
            zs[i][tt] = z;
            eps[i][tt] = e;
            eta[i][tt] = n;
            h[i] = s.mu + s.phi * (h[i] - s.mu) + n;
        }
        let yt = inverse_structural_transform(&ytil, &a)?;
        for i in 0..k {
            y[(tt, i)] = yt[i];
        }
        for (j, q) in truth.cov.iter().enumerate() {
            as_[j][tt] = a[j];
            a[j] = q.mu_a + q.phi_a * (a[j] - q.mu_a) + q.v_a * standard_normal(rng);
        }
    }
    let panel = ReturnsPanel::from_matrix(y)?;
    let states = LatentStates::new(hs, zs, as_)?;
    Ok(SimulatedData { panel, states, eps, eta })
}

/// The four skewness configurations of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaConfig {
    /// All zero.
    I,
    /// All minus one.
    II,
    /// Minus one for the first three series.
    III,
    /// Minus one for the last three series.
    IV,
}

impl BetaConfig {
    pub const ALL: [BetaConfig; 4] = [BetaConfig::I, BetaConfig::II, BetaConfig::III, BetaConfig::IV];

    pub fn label(self) -> &'static str {
        match self {
            BetaConfig::I => "i",
            BetaConfig::II => "ii",
            BetaConfig::III => "iii",
            BetaConfig::IV => "iv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        BetaConfig::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(alloc::format!("unknown beta configuration `{s}`")))
    }

    /// `β` vector for five series; other sizes reuse the pattern, with the
    /// split point at 3 for configs (iii) and (iv) measured from the start
    /// and end respectively.
    pub fn betas(self, k: usize) -> Vec<f64> {
        (0..k)
            .map(|i| match self {
                BetaConfig::I => 0.0,
                BetaConfig::II => -1.0,
                BetaConfig::III => if i < 3 { -1.0 } else { 0.0 },
                BetaConfig::IV => if i + 3 >= k { -1.0 } else { 0.0 },
            })
            .collect()
    }
}

/// One cell of the skewness study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub label: String,
    pub t: usize,
    pub truth: Truth,
    pub replications: usize,
}

impl SimScenario {
    /// `φ = 0.995, σ = 0.05, ρ = -0.5, μ = -9, ν = 20`, covariance states
    /// fixed at 0.5, `T = 1000`, `k = 5`.
    pub fn reference(config: BetaConfig, replications: usize) -> Self {
        Self::shared(config, 5, 1000, replications)
    }

    pub fn shared(config: BetaConfig, k: usize, t: usize, replications: usize) -> Self {
        let series = config
            .betas(k)
            .into_iter()
            .map(|beta| SeriesTruth { mu: -9.0, phi: 0.995, sigma: 0.05, rho: -0.5, nu: 20.0, beta })
            .collect();
        let cov = vec![CovTruth { mu_a: 0.5, phi_a: 0.0, v_a: 0.0 }; n_states(k)];
        Self { label: config.label().into(), t, truth: Truth { series, cov }, replications }
    }
}

/// Replication summary of the sample skewness of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewnessRow {
    pub config: String,
    /// One-based series index.
    pub series: usize,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub q10: f64,
    pub q90: f64,
}

/// Simulates every scenario `replications` times and summarizes the
/// bias-adjusted sample skewness of each series. Replication `r` of
/// scenario `s` draws from stream `(s << 24) | r`.
pub fn skewness_study(scenarios: &[SimScenario], seed: u64) -> Result<Vec<SkewnessRow>> {
    let mut out = Vec::new();
    for (si, sc) in scenarios.iter().enumerate() {
        if sc.replications < 1 {
            return Err(Error::invalid("the study needs at least one replication"));
        }
        if sc.t < 3 {
            return Err(Error::invalid("sample skewness needs at least three observations"));
        }
        let k = sc.truth.k();
        let reps: Vec<Result<Vec<f64>>> = par::map_range(sc.replications, |r| {
            let mut rng = stream(seed, Block::Simulate, ((si as u64) << 24) | r as u64);
            let d = generate_dataset(&sc.truth, sc.t, &mut rng)?;
            Ok((0..k).map(|i| skewness(d.panel.series(i))).collect())
        });
        let reps: Vec<Vec<f64>> = reps.into_iter().collect::<Result<_>>()?;
        for i in 0..k {
            let col: Vec<f64> = reps.iter().map(|r| r[i]).collect();
            let s = sorted(&col);
            out.push(SkewnessRow {
                config: sc.label.clone(),
                series: i + 1,
                mean: crate::stats::mean(&col),
                q25: quantile_sorted(&s, 0.25),
                q75: quantile_sorted(&s, 0.75),
                q10: quantile_sorted(&s, 0.10),
                q90: quantile_sorted(&s, 0.90),
            });
        }
    }
    Ok(out)
}
