//! Posterior predictive simulation, Rao-Blackwellized predictive densities,
//! log predictive density ratios and recursive out-of-sample refits.
//!
//! Each stored posterior draw is propagated forward through the volatility
//! and covariance-state recursions with fresh mixing variables. Conditional
//! on the propagated states, `y_{t+d}` is Gaussian with mean
//! `A⁻¹Λ·β(z−c)` and covariance `A⁻¹Λ diag(z) ΛA⁻ᵀ`, so the predictive
//! density is evaluated as the equal-weight mixture of those components.

use crate::distributions::{mvn_logpdf_chol, sample_inverse_gamma, standard_normal};
use crate::engine::{run_mcmc, McmcDraws};
use crate::error::{Error, Result};
use crate::model::{scale_factor, ModelConfig};
use crate::panel::ReturnsPanel;
use crate::par;
use crate::portfolio::{portfolio_return, var_quantile, Allocation, PortfolioInputs, ALPHAS};
use crate::prelude::*;
use crate::rng::{derive_seed, stream, Block};
use crate::stats::log_sum_exp;
use nalgebra::{DMatrix, DVector};

/// Seed-derivation tag of refit jobs.
const REFIT_TAG: u64 = 0x52_4546;

/// One posterior draw propagated to a single horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveComponent {
    /// Simulated return vector.
    pub y: Vec<f64>,
    /// Conditional mean `A⁻¹Λ·β(z−c)`.
    pub mean: Vec<f64>,
    /// Lower Cholesky factor of the conditional covariance.
    pub chol: DMatrix<f64>,
    /// Propagated log variances, mixing variables and covariance states.
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDrawSet {
    pub k: usize,
    /// `horizons[d - 1][m]`.
    pub horizons: Vec<Vec<PredictiveComponent>>,
    /// Components whose factor needed a diagonal floor.
    pub jitter_repairs: usize,
}

impl PredictiveDrawSet {
    pub fn d_max(&self) -> usize {
        self.horizons.len()
    }

    pub fn n_draws(&self) -> usize {
        self.horizons.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self, d: usize) -> Result<&[PredictiveComponent]> {
        if d == 0 || d > self.d_max() {
            return Err(Error::invalid(alloc::format!("horizon {d} outside 1..={}", self.d_max())));
        }
        Ok(&self.horizons[d - 1])
    }

    pub fn y_draws(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        Ok(self.horizon(d)?.iter().map(|c| c.y.clone()).collect())
    }

    /// Exact mean and covariance of the component mixture: average
    /// conditional covariance plus dispersion of conditional means.
    pub fn mixture_moments(&self, d: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let comps = self.horizon(d)?;
        let n = comps.len() as f64;
        let mut mean = DVector::zeros(self.k);
        let mut second = DMatrix::zeros(self.k, self.k);
        for c in comps {
            let m = DVector::from_column_slice(&c.mean);
            second += &c.chol * c.chol.transpose();
            second.ger(1.0, &m, &m, 1.0);
            mean += m;
        }
        mean /= n;
        second /= n;
        second.ger(-1.0, &mean, &mean, 1.0);
        Ok((mean, second))
    }
}

/// Floors non-positive or underflowed diagonal entries of a triangular
/// factor; returns whether a repair was needed.
fn repair_factor(l: &mut DMatrix<f64>) -> Result<bool> {
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("predictive covariance factor is not finite".into()));
    }
    let k = l.nrows();
    let top = (0..k).map(|i| l[(i, i)].abs()).fold(0.0, f64::max);
    let floor = 1e-8 * top.max(f64::MIN_POSITIVE.sqrt());
    let mut repaired = false;
    for i in 0..k {
        if !(l[(i, i)] > floor) {
            l[(i, i)] = floor;
            repaired = true;
        }
    }
    Ok(repaired)
}

/// Propagates every stored draw `d_max` steps ahead. Draw `m` uses its own
/// RNG stream, so the set is independent of worker count.
pub fn predictive_draws(draws: &McmcDraws, d_max: usize) -> Result<PredictiveDrawSet> {
    if d_max == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if draws.n_draws() == 0 {
        return Err(Error::TooFewDraws { need: 1, got: 0 });
    }
    let k = draws.k();
    let seed = draws.seed();
    let paths: Vec<Result<(Vec<PredictiveComponent>, usize)>> = par::map_range(draws.n_draws(), |m| {
        let mut rng = stream(seed, Block::Forecast, m as u64);
        let series = &draws.series[m];
        let cov = &draws.cov[m];
        let term = &draws.terminal[m];
        let mut h = term.h.clone();
        let mut eps = term.eps.clone();
        let mut a = term.a.clone();
        let mut z = vec![0.0; k];
        let mut w = vec![0.0; k];
        let mut out = Vec::with_capacity(d_max);
        let mut repairs = 0;
        for _ in 0..d_max {
            for (i, p) in series.iter().enumerate() {
                let eta = p.sigma * (p.rho * eps[i] + (1.0 - p.rho * p.rho).sqrt() * standard_normal(&mut rng));
                h[i] = p.mu + p.phi * (h[i] - p.mu) + eta;
            }
            for (j, q) in cov.iter().enumerate() {
                a[j] = q.mu_a + q.phi_a * (a[j] - q.mu_a) + q.v_a * standard_normal(&mut rng);
            }
            for (i, p) in series.iter().enumerate() {
                z[i] = sample_inverse_gamma(0.5 * p.nu, 0.5 * p.nu, &mut rng)?;
                w[i] = p.beta * (z[i] - p.c());
                eps[i] = standard_normal(&mut rng);
            }
            let base = scale_factor(&a, &h, None)?;
            let mut chol = scale_factor(&a, &h, Some(&z))?;
            if repair_factor(&mut chol)? {
                repairs += 1;
            }
            let mean = &base * DVector::from_column_slice(&w);
            let y = &mean + &chol * DVector::from_column_slice(&eps);
            out.push(PredictiveComponent {
                y: y.as_slice().to_vec(),
                mean: mean.as_slice().to_vec(),
                chol,
                h: h.clone(),
                z: z.clone(),
                a: a.clone(),
            });
        }
        Ok((out, repairs))
    });
    let mut horizons: Vec<Vec<PredictiveComponent>> = (0..d_max).map(|_| Vec::with_capacity(paths.len())).collect();
    let mut jitter_repairs = 0;
    for p in paths {
        let (comps, r) = p?;
        jitter_repairs += r;
        for (d, c) in comps.into_iter().enumerate() {
            horizons[d].push(c);
        }
    }
    Ok(PredictiveDrawSet { k, horizons, jitter_repairs })
}

/// `log (1/M) Σ_m N(y; mean_m, cov_m)`.
pub fn predictive_logdensity(components: &[PredictiveComponent], y: &[f64]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::TooFewDraws { need: 1, got: 0 });
    }
    if components.iter().any(|c| c.mean.len() != y.len()) {
        return Err(Error::Dimension(alloc::format!("observation of length {}", y.len())));
    }
    let lp: Vec<f64> = components.iter().map(|c| mvn_logpdf_chol(y, &c.mean, &c.chol)).collect();
    let v = log_sum_exp(&lp) - (components.len() as f64).ln();
    if !v.is_finite() {
        return Err(Error::Overflow("every mixture component underflowed".into()));
    }
    Ok(v)
}

/// One evaluated log predictive density, keyed by forecast origin and
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensityPoint {
    pub origin: usize,
    pub horizon: usize,
    pub value: f64,
}

/// Cumulative log predictive density ratios by horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdrTable {
    pub horizons: Vec<usize>,
    /// `cumulative[h][n]`: running sum over the first `n + 1` origins.
    pub cumulative: Vec<Vec<f64>>,
    /// Final cumulative value per horizon.
    pub totals: Vec<f64>,
    pub total: f64,
}

/// `Σ_t log p₁(y_{t+d}) − log p₀(y_{t+d})` per horizon `d`. Both inputs
/// must list the same `(origin, horizon)` keys in the same order.
pub fn lpdr(model1: &[LogDensityPoint], model0: &[LogDensityPoint]) -> Result<LpdrTable> {
    if model1.len() != model0.len() {
        return Err(Error::Dimension(alloc::format!("{} versus {} log densities", model1.len(), model0.len())));
    }
    let mut horizons: Vec<usize> = Vec::new();
    let mut cumulative: Vec<Vec<f64>> = Vec::new();
    for (a, b) in model1.iter().zip(model0) {
        if a.origin != b.origin || a.horizon != b.horizon {
            return Err(Error::invalid(alloc::format!(
                "misaligned forecasts: (origin {}, horizon {}) versus (origin {}, horizon {})",
                a.origin,
                a.horizon,
                b.origin,
                b.horizon
            )));
        }
        let idx = match horizons.iter().position(|&h| h == a.horizon) {
            Some(i) => i,
            None => {
                horizons.push(a.horizon);
                cumulative.push(Vec::new());
                horizons.len() - 1
            }
        };
        let c = &mut cumulative[idx];
        let prev = c.last().copied().unwrap_or(0.0);
        c.push(prev + (a.value - b.value));
    }
    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by_key(|&i| horizons[i]);
    let horizons: Vec<usize> = order.iter().map(|&i| horizons[i]).collect();
    let cumulative: Vec<Vec<f64>> = order.iter().map(|&i| core::mem::take(&mut cumulative[i])).collect();
    let totals: Vec<f64> = cumulative.iter().map(|c| c.last().copied().unwrap_or(0.0)).collect();
    let total = totals.iter().sum();
    Ok(LpdrTable { horizons, cumulative, totals, total })
}

/// Recursive refit schedule: refit `i` uses the first
/// `initial + i·step` observations and forecasts horizons `1..=d_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastPlan {
    pub initial: usize,
    pub step: usize,
    pub refits: usize,
    pub d_max: usize,
}

impl ForecastPlan {
    pub fn validate(&self, t_data: usize) -> Result<()> {
        if self.step == 0 || self.refits == 0 || self.d_max == 0 {
            return Err(Error::invalid("step, refits and horizon must be at least 1"));
        }
        if self.d_max > self.step {
            return Err(Error::invalid(alloc::format!(
                "horizon {} exceeds the refit step {}",
                self.d_max,
                self.step
            )));
        }
        if self.initial < crate::engine::MIN_T {
            return Err(Error::invalid(alloc::format!("initial cut {} is too short", self.initial)));
        }
        let need = self.initial + self.step * self.refits;
        if need > t_data {
            return Err(Error::invalid(alloc::format!("plan needs {need} observations, data has {t_data}")));
        }
        Ok(())
    }

    pub fn origin(&self, refit: usize) -> usize {
        self.initial + refit * self.step
    }
}

/// Portfolio outcome of one allocation rule on one forecast day.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioOutcome {
    pub rule: Allocation,
    pub weights: Vec<f64>,
    pub realized: f64,
    /// VaR forecasts at each level of [`ALPHAS`].
    pub var: Vec<f64>,
}

/// One model's evaluation of one forecast day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelForecast {
    /// `None` when the refit failed.
    pub logdensity: Option<f64>,
    /// Outcomes per rule of [`Allocation::standard`]; `None` when the rule
    /// was degenerate or the refit failed.
    pub portfolios: Vec<Option<PortfolioOutcome>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub refit: usize,
    /// Observations used by the refit.
    pub origin: usize,
    pub horizon: usize,
    pub date: String,
    pub realized: Vec<f64>,
    /// Aligned with [`ForecastArchive::models`].
    pub models: Vec<ModelForecast>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitSummary {
    pub refit: usize,
    pub model: String,
    pub seed: u64,
    pub draws: usize,
    pub jitter_repairs: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastArchive {
    pub plan: ForecastPlan,
    pub models: Vec<String>,
    pub names: Vec<String>,
    pub records: Vec<ForecastRecord>,
    pub refits: Vec<RefitSummary>,
}

impl ForecastArchive {
    pub fn logdensities(&self, model: usize) -> Vec<Option<LogDensityPoint>> {
        self.records
            .iter()
            .map(|r| {
                r.models[model].logdensity.map(|value| LogDensityPoint { origin: r.origin, horizon: r.horizon, value })
            })
            .collect()
    }

    /// LPDR of `model1` against `model0` over the days both evaluated.
    pub fn lpdr(&self, model1: usize, model0: usize) -> Result<LpdrTable> {
        if model1 >= self.models.len() || model0 >= self.models.len() {
            return Err(Error::invalid("model index out of range"));
        }
        let (a, b): (Vec<_>, Vec<_>) = self
            .logdensities(model1)
            .into_iter()
            .zip(self.logdensities(model0))
            .filter_map(|(a, b)| Some((a?, b?)))
            .unzip();
        lpdr(&a, &b)
    }
}

fn evaluate_day(set: &PredictiveDrawSet, d: usize, realized: &[f64]) -> Result<ModelForecast> {
    let comps = set.horizon(d)?;
    let logdensity = Some(predictive_logdensity(comps, realized)?);
    let y = set.y_draws(d)?;
    let inputs = PortfolioInputs::from_draws(&y)?;
    let portfolios = Allocation::standard()
        .into_iter()
        .map(|rule| {
            let w = inputs.weights(rule).ok()?;
            let var = ALPHAS.iter().map(|&a| var_quantile(&w, &y, a)).collect::<Result<Vec<_>>>().ok()?;
            Some(PortfolioOutcome {
                rule,
                weights: w.as_slice().to_vec(),
                realized: portfolio_return(&w, realized),
                var,
            })
        })
        .collect();
    Ok(ModelForecast { logdensity, portfolios })
}

/// Refits every model on each expanding window and evaluates the following
/// `d_max` days. Refit `i` runs with seed `derive_seed(seed_i, ·, i)` where
/// `seed_i` is the model's configured seed; jobs share no RNG state, so the
/// archive does not depend on scheduling. A failed refit is recorded and
/// leaves its days unevaluated.
pub fn recursive_forecast(plan: &ForecastPlan, configs: &[ModelConfig], data: &ReturnsPanel) -> Result<ForecastArchive> {
    plan.validate(data.t())?;
    if configs.is_empty() {
        return Err(Error::invalid("no models to forecast"));
    }
    for c in configs {
        c.validate()?;
        if c.k != data.k() {
            return Err(Error::Dimension(alloc::format!("model has k={} but data has {} series", c.k, data.k())));
        }
    }
    let n_models = configs.len();
    let jobs = plan.refits * n_models;
    let results: Vec<(RefitSummary, Vec<ModelForecast>)> = par::map_range(jobs, |job| {
        let (refit, mi) = (job / n_models, job % n_models);
        let mut cfg = configs[mi].clone();
        cfg.mcmc.seed = derive_seed(configs[mi].mcmc.seed, REFIT_TAG, refit as u64);
        let origin = plan.origin(refit);
        let mut summary = RefitSummary {
            refit,
            model: cfg.variant.name().into(),
            seed: cfg.mcmc.seed,
            draws: 0,
            jitter_repairs: 0,
            error: None,
        };
        let run = || -> Result<(usize, usize, Vec<ModelForecast>)> {
            let fit = run_mcmc(&cfg, &data.head(origin)?)?;
            let set = predictive_draws(&fit, plan.d_max)?;
            let days = (1..=plan.d_max)
                .map(|d| evaluate_day(&set, d, &data.row(origin + d - 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok((fit.n_draws(), set.jitter_repairs, days))
        };
        match run() {
            Ok((draws, repairs, days)) => {
                summary.draws = draws;
                summary.jitter_repairs = repairs;
                (summary, days)
            }
            Err(e) => {
                summary.error = Some(e.to_string());
                (summary, vec![ModelForecast::default(); plan.d_max])
            }
        }
    });

    let mut records = Vec::with_capacity(plan.refits * plan.d_max);
    for refit in 0..plan.refits {
        let origin = plan.origin(refit);
        for d in 1..=plan.d_max {
            let day = origin + d - 1;
            records.push(ForecastRecord {
                refit,
                origin,
                horizon: d,
                date: data.dates()[day].clone(),
                realized: data.row(day),
                models: (0..n_models).map(|mi| results[refit * n_models + mi].1[d - 1].clone()).collect(),
            });
        }
    }
    Ok(ForecastArchive {
        plan: *plan,
        models: configs.iter().map(|c| c.variant.name().to_string()).collect(),
        names: data.names().to_vec(),
        records,
        refits: results.into_iter().map(|(s, _)| s).collect(),
    })
}

/// Violation counts and Kupiec tests per model, level and rule, over every
/// evaluated day.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    pub model: String,
    pub rule: Allocation,
    pub report: crate::portfolio::VarReport,
}

pub fn backtest(archive: &ForecastArchive) -> Result<Vec<BacktestRow>> {
    let rules = Allocation::standard();
    let mut out = Vec::new();
    for (mi, model) in archive.models.iter().enumerate() {
        for (ai, &alpha) in ALPHAS.iter().enumerate() {
            for (ri, &rule) in rules.iter().enumerate() {
                let (mut n, mut days) = (0, 0);
                for r in &archive.records {
                    if let Some(Some(p)) = r.models[mi].portfolios.get(ri) {
                        days += 1;
                        n += (p.realized < p.var[ai]) as usize;
                    }
                }
                out.push(BacktestRow {
                    model: model.clone(),
                    rule,
                    report: crate::portfolio::kupiec_test(n, days, alpha)?,
                });
            }
        }
    }
    Ok(out)
}
