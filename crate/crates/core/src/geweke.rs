//! Joint-distribution ("getting it right") test of the sampler suite.
//!
//! The successive-conditional simulator alternates one posterior sweep with
//! a fresh draw of the data given all states and parameters. Its stationary
//! distribution is the prior, so every parameter's trace must match
//! independent prior draws. Each marginal is compared with a two-sample
//! Kolmogorov-Smirnov test whose effective size uses the trace's ESS.

use crate::diagnostics::effective_sample_size;
use crate::distributions::standard_normal;
use crate::error::{Error, Result};
use crate::model::{clamp_h, inverse_structural_transform, n_states, ModelConfig, SeriesParams, SparsityState};
use crate::prelude::*;
use crate::rng::{stream, Block};
use crate::samplers::mixing::leverage_moments;
use crate::samplers::SweepContext;
use crate::simulate::{generate_dataset, CovTruth, SeriesTruth, Truth};
use crate::stats::{ks_p_value, ks_statistic};

/// Deliberate sampler corruptions used to check that the test has power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// The `(σ, ρ)` target evaluates the likelihood at `2σ`.
    SigmaOffByTwo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeOptions {
    /// Length of the simulated data.
    pub t: usize,
    /// Independent prior draws forming the reference sample.
    pub n_prior: usize,
    /// Adaptive sweeps discarded before recording.
    pub burn_in: usize,
    pub mutation: Option<Mutation>,
}

impl Default for GewekeOptions {
    fn default() -> Self {
        Self { t: 30, n_prior: 20_000, burn_in: 2_000, mutation: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeRow {
    pub name: String,
    pub ks: f64,
    pub p_value: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GewekeReport {
    pub rows: Vec<GewekeRow>,
}

impl GewekeReport {
    pub fn get(&self, name: &str) -> Option<&GewekeRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Whether every row has `p > level`.
    pub fn passes(&self, level: f64) -> bool {
        self.rows.iter().all(|r| r.p_value > level)
    }
}

fn truth_of(series: &[SeriesParams], cov: &[crate::model::CovParams]) -> Truth {
    Truth {
        series: series
            .iter()
            .map(|p| SeriesTruth { mu: p.mu, phi: p.phi, sigma: p.sigma, rho: p.rho, nu: p.nu, beta: p.beta })
            .collect(),
        cov: cov.iter().map(|q| CovTruth { mu_a: q.mu_a, phi_a: q.phi_a, v_a: q.v_a }).collect(),
    }
}

/// Scalar summaries tracked by the test, in a fixed order.
fn record(ctx: &SweepContext, names: &mut Vec<String>, values: &mut Vec<f64>) {
    let v = ctx.variant;
    let with_names = names.is_empty();
    let mut push = |n: String, x: f64| {
        if with_names {
            names.push(n);
        }
        values.push(x);
    };
    for (i, s) in ctx.series.iter().enumerate() {
        let p = &s.params;
        let i = i + 1;
        push(alloc::format!("mu[{i}]"), p.mu);
        push(alloc::format!("phi[{i}]"), p.phi);
        push(alloc::format!("sigma[{i}]"), p.sigma);
        push(alloc::format!("rho[{i}]"), p.rho);
        push(alloc::format!("nu[{i}]"), p.nu);
        if v.skewed() {
            push(alloc::format!("beta[{i}]"), p.beta);
        }
    }
    if v.sparse() {
        push("kappa".into(), ctx.kappa());
    }
    if v.correlated() {
        for (j, q) in ctx.cov_params().iter().enumerate() {
            let j = j + 1;
            push(alloc::format!("mu_a[{j}]"), q.mu_a);
            push(alloc::format!("phi_a[{j}]"), q.phi_a);
            push(alloc::format!("v_a[{j}]"), q.v_a);
        }
    }
}

/// Draws `y` given every state and parameter: `ε_t | η_t` from its
/// leverage conditional, then `y_t = A_t^{-1} ỹ_t`.
fn regenerate_data(ctx: &mut SweepContext, rng: &mut crate::rng::StreamRng) -> Result<()> {
    let k = ctx.k();
    let n = ctx.t();
    let mut ytil = vec![0.0; k];
    let mut a_t = vec![0.0; n_states(k)];
    for t in 0..n {
        for (i, s) in ctx.series.iter().enumerate() {
            let p = &s.params;
            let (m, v) = leverage_moments(&s.h, t, p);
            let eps = m + v.sqrt() * standard_normal(rng);
            let z = s.z[t];
            ytil[i] = (p.beta * (z - p.c()) + z.sqrt() * eps) * (0.5 * clamp_h(s.h[t])).exp();
        }
        for (j, a) in a_t.iter_mut().enumerate() {
            *a = ctx.a_value(j, t);
        }
        let y = inverse_structural_transform(&ytil, &a_t)?;
        for i in 0..k {
            ctx.y[i][t] = y[i];
        }
    }
    ctx.refresh_structural();
    Ok(())
}

pub fn geweke_joint_test(config: &ModelConfig, n_sweeps: usize) -> Result<GewekeReport> {
    geweke_joint_test_with(config, n_sweeps, &GewekeOptions::default())
}

pub fn geweke_joint_test_with(config: &ModelConfig, n_sweeps: usize, opts: &GewekeOptions) -> Result<GewekeReport> {
    config.validate()?;
    if n_sweeps == 0 {
        return Ok(GewekeReport::default());
    }
    if config.k > 3 || opts.t == 0 || opts.t > 30 {
        return Err(Error::invalid("the joint-distribution test is sized for k <= 3 and 1 <= T <= 30"));
    }
    let variant = config.variant;
    let priors = config.priors;
    let seed = config.mcmc.seed;
    let k = config.k;

    // marginal-conditional reference sample
    let mut prior_rng = stream(seed, Block::Prior, 0);
    let mut reference: Vec<Vec<f64>> = Vec::new();
    for _ in 0..opts.n_prior {
        let kappa = if variant.sparse() { priors.sample_kappa(&mut prior_rng).kappa() } else { 1.0 };
        let mut row = Vec::new();
        for _ in 0..k {
            let p = priors.sample_series(variant, kappa, &mut prior_rng);
            row.extend([p.mu, p.phi, p.sigma, p.rho, p.nu]);
            if variant.skewed() {
                row.push(p.beta);
            }
        }
        if variant.sparse() {
            row.push(kappa);
        }
        if variant.correlated() {
            for _ in 0..n_states(k) {
                let q = priors.sample_cov(&mut prior_rng);
                row.extend([q.mu_a, q.phi_a, q.v_a]);
            }
        }
        reference.push(row);
    }

    // successive-conditional chain, started from a joint prior draw
    let mut init_rng = stream(seed, Block::Geweke, 1);
    let sparsity = variant.sparse().then(|| priors.sample_kappa(&mut init_rng));
    let kappa = sparsity.map_or(1.0, |s: SparsityState| s.kappa());
    let series: Vec<SeriesParams> = (0..k).map(|_| priors.sample_series(variant, kappa, &mut init_rng)).collect();
    let cov: Vec<_> = (0..n_states(k)).map(|_| priors.sample_cov(&mut init_rng)).collect();
    let mut truth = truth_of(&series, &cov);
    if !variant.correlated() {
        for q in &mut truth.cov {
            *q = CovTruth { mu_a: 0.0, phi_a: 0.0, v_a: 0.0 };
        }
    }
    let sim = generate_dataset(&truth, opts.t, &mut init_rng)?;
    let y: Vec<Vec<f64>> = (0..k).map(|i| sim.panel.series(i).to_vec()).collect();
    let mut ctx = SweepContext::new(
        variant,
        priors,
        y,
        sim.states,
        series,
        cov,
        sparsity,
        seed,
        config.mcmc.block_len,
    )?;
    if opts.mutation == Some(Mutation::SigmaOffByTwo) {
        ctx.sigma_scale = 2.0;
    }
    let mut data_rng = stream(seed, Block::Geweke, 0);
    for s in 0..opts.burn_in {
        ctx.sweep(s, true)?;
        regenerate_data(&mut ctx, &mut data_rng)?;
    }
    let mut names = Vec::new();
    let mut trace: Vec<Vec<f64>> = Vec::with_capacity(n_sweeps);
    for s in 0..n_sweeps {
        ctx.sweep(opts.burn_in + s, false)?;
        regenerate_data(&mut ctx, &mut data_rng)?;
        let mut v = Vec::new();
        record(&ctx, &mut names, &mut v);
        trace.push(v);
    }

    let rows = names
        .into_iter()
        .enumerate()
        .map(|(c, name)| {
            let chain: Vec<f64> = trace.iter().map(|r| r[c]).collect();
            let refs: Vec<f64> = reference.iter().map(|r| r[c]).collect();
            let ess = effective_sample_size(&chain).unwrap_or(1.0);
            let ks = ks_statistic(&chain, &refs);
            let n_eff = ess * refs.len() as f64 / (ess + refs.len() as f64);
            GewekeRow { name, ks, p_value: ks_p_value(ks, n_eff), ess }
        })
        .collect();
    Ok(GewekeReport { rows })
}
