//! One-sweep conditional samplers.
//!
//! A [`SweepContext`] owns the complete chain state. [`SweepContext::sweep`]
//! runs the blocks in the fixed order `z → h → a → β → κ → θ_i → θ_aj`;
//! series-indexed blocks run in parallel, each series (or covariance row,
//! or state) drawing from its own RNG stream so results do not depend on
//! the number of workers.

pub mod covariance;
pub mod hyper;
pub mod mixing;
pub mod skewness;
pub mod volatility;

use crate::error::{Error, Result};
use crate::model::{n_states, state_index, CovParams, LatentStates, SeriesParams, SparsityState, Variant};
use crate::par;
use crate::prelude::*;
use crate::priors::PriorSet;
use crate::rng::{stream, Block, StreamRng};
use hyper::{SvAdapt, SvHyperStats};

/// Metropolis-Hastings acceptance counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accept {
    pub accepted: u64,
    pub proposed: u64,
}

impl Accept {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn merge(&mut self, other: Accept) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }

    /// Acceptance rate; 1 when nothing was proposed.
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Acceptance counters of one series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeriesAcceptance {
    pub volatility: Accept,
    pub mixing: Accept,
    pub hyper: SvHyperStats,
}

/// State, parameters and RNG streams of one series.
#[derive(Debug, Clone)]
pub struct SeriesBlock {
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    /// Structural returns `ỹ_i = (A_t y_t)_i`, kept in sync with `a`.
    pub ytil: Vec<f64>,
    pub params: SeriesParams,
    pub acceptance: SeriesAcceptance,
    adapt: SvAdapt,
    rng_mixing: StreamRng,
    rng_volatility: StreamRng,
    rng_skewness: StreamRng,
    rng_hyper: StreamRng,
}

/// Covariance states and parameters of row `row ≥ 1` of `A_t`.
#[derive(Debug, Clone)]
pub struct CovRow {
    pub row: usize,
    /// `a[j][t]` is entry `(row, j)` at time `t`.
    pub a: Vec<Vec<f64>>,
    pub params: Vec<CovParams>,
    pub phi_acceptance: Accept,
    rng_states: StreamRng,
    rng_hyper: Vec<StreamRng>,
}

/// Complete chain state for one model fit.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub variant: Variant,
    pub priors: PriorSet,
    /// Observed returns, series-major: `y[i][t]`.
    pub y: Vec<Vec<f64>>,
    pub series: Vec<SeriesBlock>,
    /// Rows `1..k` of `A_t`; empty for uncorrelated variants.
    pub rows: Vec<CovRow>,
    /// `None` when `κ` is fixed by the variant.
    pub sparsity: Option<SparsityState>,
    pub block_len: usize,
    rng_kappa: StreamRng,
    pub(crate) sigma_scale: f64,
}

impl SweepContext {
    /// Assembles a context from explicit states and parameters, enforcing
    /// the variant's constraints.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: Variant,
        priors: PriorSet,
        y: Vec<Vec<f64>>,
        states: LatentStates,
        series_params: Vec<SeriesParams>,
        cov_params: Vec<CovParams>,
        sparsity: Option<SparsityState>,
        seed: u64,
        block_len: usize,
    ) -> Result<Self> {
        states.validate()?;
        priors.validate()?;
        let k = states.k();
        let n = states.t();
        if y.len() != k || y.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("returns do not match the state dimensions".into()));
        }
        if series_params.len() != k || cov_params.len() != n_states(k) {
            return Err(Error::Dimension(alloc::format!(
                "{} series parameter sets and {} covariance parameter sets for k={k}",
                series_params.len(),
                cov_params.len()
            )));
        }
        for p in &series_params {
            p.validate()?;
            if !variant.skewed() && (p.included || p.beta != 0.0) {
                return Err(Error::invalid("variant C requires beta = 0"));
            }
            if variant.skewed() && !variant.sparse() && !p.included {
                return Err(Error::invalid("variants without sparsity keep every beta in the slab"));
            }
        }
        if variant.correlated() {
            for q in &cov_params {
                q.validate()?;
            }
        } else if states.a.iter().flatten().any(|&v| v != 0.0) {
            return Err(Error::invalid("uncorrelated variants require a = 0"));
        }
        if variant.sparse() != sparsity.is_some() {
            return Err(Error::invalid("sparsity state must be present exactly for SS and CSS"));
        }
        if block_len == 0 {
            return Err(Error::invalid("block_len must be at least 1"));
        }

        let LatentStates { h, z, a } = states;
        let series = h
            .into_iter()
            .zip(z)
            .zip(series_params)
            .enumerate()
            .map(|(i, ((h, z), params))| {
                let idx = i as u64;
                SeriesBlock {
                    ytil: vec![0.0; n],
                    h,
                    z,
                    params,
                    acceptance: SeriesAcceptance::default(),
                    adapt: SvAdapt::default(),
                    rng_mixing: stream(seed, Block::Mixing, idx),
                    rng_volatility: stream(seed, Block::Volatility, idx),
                    rng_skewness: stream(seed, Block::Skewness, idx),
                    rng_hyper: stream(seed, Block::SvHyper, idx),
                }
            })
            .collect();
        let rows = if variant.correlated() {
            let mut a = a.into_iter();
            let mut cp = cov_params.into_iter();
            (1..k)
                .map(|row| CovRow {
                    row,
                    a: a.by_ref().take(row).collect(),
                    params: cp.by_ref().take(row).collect(),
                    phi_acceptance: Accept::default(),
                    rng_states: stream(seed, Block::CovStates, row as u64),
                    rng_hyper: (0..row)
                        .map(|j| stream(seed, Block::CovHyper, state_index(row, j) as u64))
                        .collect(),
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut ctx = Self {
            variant,
            priors,
            y,
            series,
            rows,
            sparsity,
            block_len,
            rng_kappa: stream(seed, Block::Sparsity, 0),
            sigma_scale: 1.0,
        };
        ctx.refresh_structural();
        Ok(ctx)
    }

    /// Starting point: `h` at a smoothed log variance (see
    /// [`initial_log_variance`]), `z` at
    /// its prior mean, `a = 0`, hyper-parameters at prior centres and
    /// `β = 0` in the slab where the variant allows.
    pub fn initialize(
        variant: Variant,
        priors: PriorSet,
        y: Vec<Vec<f64>>,
        seed: u64,
        block_len: usize,
    ) -> Result<Self> {
        let k = y.len();
        let n = y.first().map_or(0, Vec::len);
        let sp = priors.center_series(variant);
        let h = y.iter().map(|col| initial_log_variance(col)).collect();
        let z = vec![vec![sp.c(); n]; k];
        let a = vec![vec![0.0; n]; n_states(k)];
        let states = LatentStates::new(h, z, a)?;
        let sparsity = if variant.sparse() {
            Some(SparsityState::new(priors.kappa.mean())?)
        } else {
            None
        };
        let cov = vec![priors.center_cov(); n_states(k)];
        Self::new(variant, priors, y, states, vec![sp; k], cov, sparsity, seed, block_len)
    }

    pub fn k(&self) -> usize {
        self.series.len()
    }

    pub fn t(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    /// Current `κ`; fixed at 1 for variants without sparsity.
    pub fn kappa(&self) -> f64 {
        self.sparsity.map_or(1.0, |s| s.kappa())
    }

    pub fn series_params(&self) -> Vec<SeriesParams> {
        self.series.iter().map(|s| s.params).collect()
    }

    /// Covariance parameters in stacked order; prior centres for
    /// uncorrelated variants.
    pub fn cov_params(&self) -> Vec<CovParams> {
        if self.rows.is_empty() {
            vec![self.priors.center_cov(); n_states(self.k())]
        } else {
            self.rows.iter().flat_map(|r| r.params.iter().copied()).collect()
        }
    }

    /// Covariance state `j` (stacked order) at time `t`.
    pub fn a_value(&self, j: usize, t: usize) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let (i, c) = crate::model::state_row_col(j);
        self.rows[i - 1].a[c][t]
    }

    pub fn latent_states(&self) -> LatentStates {
        let n = self.t();
        let a = if self.rows.is_empty() {
            vec![vec![0.0; n]; n_states(self.k())]
        } else {
            self.rows.iter().flat_map(|r| r.a.iter().cloned()).collect()
        };
        LatentStates {
            h: self.series.iter().map(|s| s.h.clone()).collect(),
            z: self.series.iter().map(|s| s.z.clone()).collect(),
            a,
        }
    }

    /// Recomputes `ỹ` from `y` and the current covariance states.
    pub fn refresh_structural(&mut self) {
        let y = &self.y;
        let rows = &self.rows;
        par::for_each_mut(&mut self.series, |i, s| {
            s.ytil.copy_from_slice(&y[i]);
            if i > 0 && !rows.is_empty() {
                let row = &rows[i - 1];
                for (j, aj) in row.a.iter().enumerate() {
                    for t in 0..s.ytil.len() {
                        s.ytil[t] -= aj[t] * y[j][t];
                    }
                }
            }
        });
    }

    /// One full sweep. `adapt` enables burn-in proposal adaptation.
    pub fn sweep(&mut self, sweep_no: usize, adapt: bool) -> Result<()> {
        self.sample_mixing(sweep_no)?;
        self.sample_volatility(sweep_no)?;
        if self.variant.correlated() {
            self.sample_cov_states(sweep_no)?;
        }
        if self.variant.skewed() {
            self.sample_beta(sweep_no);
        }
        if self.variant.sparse() {
            self.sample_kappa();
        }
        self.sample_sv_hyper(sweep_no, adapt)?;
        if self.variant.correlated() {
            self.sample_cov_hyper(sweep_no)?;
        }
        Ok(())
    }

    pub fn sample_mixing(&mut self, sweep_no: usize) -> Result<()> {
        par::try_for_each_mut(&mut self.series, |i, s| {
            let acc = mixing::sample_path(&mut s.z, &s.ytil, &s.h, &s.params, &mut s.rng_mixing)
                .map_err(|d| sweep_error("mixing", Some(i), sweep_no, d))?;
            s.acceptance.mixing.merge(acc);
            Ok(())
        })
    }

    pub fn sample_volatility(&mut self, sweep_no: usize) -> Result<()> {
        let b = self.block_len;
        par::try_for_each_mut(&mut self.series, |i, s| {
            let acc = volatility::sample_path(&mut s.h, &s.ytil, &s.z, &s.params, b, &mut s.rng_volatility)
                .map_err(|d| sweep_error("volatility", Some(i), sweep_no, d))?;
            s.acceptance.volatility.merge(acc);
            Ok(())
        })
    }

    pub fn sample_cov_states(&mut self, sweep_no: usize) -> Result<()> {
        if self.rows.is_empty() {
            return Ok(());
        }
        {
            let y = &self.y;
            let series = &self.series;
            par::try_for_each_mut(&mut self.rows, |_, r| {
                let s = &series[r.row];
                let obs = covariance::RowObservations::build(r.row, y, &s.h, &s.z, &s.params);
                covariance::ffbs(r.row, &obs, &r.params, &mut r.a, &mut r.rng_states)
                    .map_err(|e| e.in_sweep("covariance states", Some(r.row), sweep_no))
            })?;
        }
        self.refresh_structural();
        Ok(())
    }

    pub fn sample_beta(&mut self, _sweep_no: usize) {
        let kappa = self.kappa();
        let slab = self.priors.beta_slab;
        par::for_each_mut(&mut self.series, |_, s| {
            let post = skewness::beta_posterior(&s.ytil, &s.h, &s.z, &s.params, &slab, kappa);
            let (beta, included) = skewness::draw_beta(&post, &mut s.rng_skewness);
            s.params.beta = beta;
            s.params.included = included;
        });
    }

    pub fn sample_kappa(&mut self) {
        if self.sparsity.is_none() {
            return;
        }
        let n1 = self.series.iter().filter(|s| s.params.included).count();
        let kappa = skewness::draw_kappa(&self.priors.kappa, n1, self.k(), &mut self.rng_kappa);
        self.sparsity = Some(SparsityState::new(kappa).expect("clamped into (0, 1)"));
    }

    pub fn sample_sv_hyper(&mut self, sweep_no: usize, adapt: bool) -> Result<()> {
        let priors = self.priors;
        let opts = hyper::HyperOptions { adapt_sweep: adapt.then_some(sweep_no), sigma_scale: self.sigma_scale };
        par::try_for_each_mut(&mut self.series, |i, s| {
            hyper::sample_sv_hyper(
                &mut s.h,
                &s.ytil,
                &s.z,
                &mut s.params,
                &priors,
                &mut s.adapt,
                &mut s.acceptance.hyper,
                opts,
                &mut s.rng_hyper,
            )
            .map_err(|d| sweep_error("volatility hyper-parameters", Some(i), sweep_no, d))
        })
    }

    pub fn sample_cov_hyper(&mut self, sweep_no: usize) -> Result<()> {
        let priors = self.priors;
        par::try_for_each_mut(&mut self.rows, |_, r| {
            for j in 0..r.row {
                let ok = hyper::sample_cov_hyper(&r.a[j], &mut r.params[j], &priors, &mut r.rng_hyper[j])
                    .map_err(|d| sweep_error("covariance hyper-parameters", Some(state_index(r.row, j)), sweep_no, d))?;
                r.phi_acceptance.record(ok);
            }
            Ok(())
        })
    }
}

/// Half-width of the moving window behind the initial log-variance path.
const INIT_HALF_WINDOW: usize = 20;

/// Log of a centred moving average of squared demeaned returns, floored at
/// 1% of the sample variance. Starting from the raw `ln y²` instead pins
/// every scaled return at ±1 and leaves a path so rough that block
/// independence proposals are almost never accepted from it.
pub(crate) fn initial_log_variance(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let m = crate::stats::mean(col);
    let sq: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
    let var = if n > 1 { crate::stats::variance(col) } else { 0.0 };
    let floor = (0.01 * var).max(1e-12);
    let mut prefix = vec![0.0; n + 1];
    for t in 0..n {
        prefix[t + 1] = prefix[t] + sq[t];
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(INIT_HALF_WINDOW);
            let hi = (t + INIT_HALF_WINDOW + 1).min(n);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(floor).ln()
        })
        .collect()
}

fn sweep_error(block: &'static str, series: Option<usize>, sweep: usize, detail: String) -> Error {
    Error::Sweep { block, series, sweep, detail }
}
