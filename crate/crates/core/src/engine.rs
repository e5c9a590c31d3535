//! MCMC orchestration: initialization, burn-in, thinning and storage.

use crate::error::{Error, Result};
use crate::model::{CovParams, ModelConfig, SeriesParams, Variant};
use crate::panel::ReturnsPanel;
use crate::prelude::*;
use crate::samplers::{Accept, SweepContext};
use crate::stats::{quantile_sorted, sorted};

/// Smallest panel length accepted for fitting.
pub const MIN_T: usize = 10;

/// Upper bound on the number of state paths kept for summaries.
pub const MAX_STATE_PATHS: usize = 1000;

/// Run lengths, thinning and sampler tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub burn_in: usize,
    /// Post-burn-in sweeps; `draws / thin` of them are stored.
    pub draws: usize,
    pub thin: usize,
    pub seed: u64,
    /// Extra thinning of stored draws feeding the state summaries.
    pub state_thin: usize,
    /// Length of the volatility blocks updated jointly.
    pub block_len: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self { burn_in: 5_000, draws: 50_000, thin: 1, seed: 1, state_thin: 5, block_len: 40 }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.thin == 0 || self.state_thin == 0 || self.block_len == 0 {
            return Err(Error::invalid("draws, thin, state_thin and block_len must be at least 1"));
        }
        if self.draws < self.thin {
            return Err(Error::invalid("draws must be at least thin"));
        }
        Ok(())
    }

    pub fn n_stored(&self) -> usize {
        self.draws / self.thin
    }
}

/// Quantities at the last time point needed to propagate one draw forward.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalState {
    pub h: Vec<f64>,
    /// Structural shock `ε` at the last time point.
    pub eps: Vec<f64>,
    pub a: Vec<f64>,
}

/// Pointwise posterior summaries of a family of state paths,
/// `mean[j][t]` etc.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateSummary {
    pub mean: Vec<Vec<f64>>,
    pub q05: Vec<Vec<f64>>,
    pub q50: Vec<Vec<f64>>,
    pub q95: Vec<Vec<f64>>,
    /// Number of paths behind the summary.
    pub paths: usize,
}

impl StateSummary {
    fn from_paths(paths: &[Vec<Vec<f64>>], rows: usize, t: usize) -> Self {
        let mut s = StateSummary { paths: paths.len(), ..Default::default() };
        if paths.is_empty() {
            return s;
        }
        let mut buf = vec![0.0; paths.len()];
        for j in 0..rows {
            let (mut m, mut a, mut b, mut c) = (vec![0.0; t], vec![0.0; t], vec![0.0; t], vec![0.0; t]);
            for tt in 0..t {
                for (d, p) in paths.iter().enumerate() {
                    buf[d] = p[j][tt];
                }
                m[tt] = crate::stats::mean(&buf);
                let srt = sorted(&buf);
                a[tt] = quantile_sorted(&srt, 0.05);
                b[tt] = quantile_sorted(&srt, 0.50);
                c[tt] = quantile_sorted(&srt, 0.95);
            }
            s.mean.push(m);
            s.q05.push(a);
            s.q50.push(b);
            s.q95.push(c);
        }
        s
    }
}

/// Post-burn-in acceptance rates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceptanceReport {
    /// `(name, rate)` pairs, e.g. `("volatility[1]", 0.74)`.
    pub rates: Vec<(String, f64)>,
}

/// Stored output of one run.
#[derive(Debug, Clone)]
pub struct McmcDraws {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub dates: Vec<String>,
    /// `series[d][i]`.
    pub series: Vec<Vec<SeriesParams>>,
    /// `cov[d][j]`; empty rows for uncorrelated variants.
    pub cov: Vec<Vec<CovParams>>,
    pub kappa: Vec<f64>,
    pub terminal: Vec<TerminalState>,
    pub h_summary: StateSummary,
    pub a_summary: StateSummary,
    pub acceptance: AcceptanceReport,
    /// Wall-clock seconds of the run, when measured.
    pub elapsed_secs: Option<f64>,
}

impl McmcDraws {
    pub fn n_draws(&self) -> usize {
        self.series.len()
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn seed(&self) -> u64 {
        self.config.mcmc.seed
    }

    /// Equality of everything except timing metadata.
    pub fn same_chain(&self, other: &Self) -> bool {
        self.config == other.config
            && self.names == other.names
            && self.series == other.series
            && self.cov == other.cov
            && self.kappa == other.kappa
            && self.terminal == other.terminal
            && self.h_summary == other.h_summary
            && self.a_summary == other.a_summary
            && self.acceptance == other.acceptance
    }

    /// Named scalar traces of every sampled parameter. Parameters fixed by
    /// the variant are omitted.
    pub fn traces(&self) -> Vec<(String, Vec<f64>)> {
        let v = self.variant();
        let mut out = Vec::new();
        let fields: [(&str, fn(&SeriesParams) -> f64); 5] = [
            ("mu", |p| p.mu),
            ("phi", |p| p.phi),
            ("sigma", |p| p.sigma),
            ("rho", |p| p.rho),
            ("nu", |p| p.nu),
        ];
        for i in 0..self.k() {
            for (name, f) in fields {
                out.push((alloc::format!("{name}[{}]", i + 1), self.series.iter().map(|d| f(&d[i])).collect()));
            }
            if v.skewed() {
                out.push((alloc::format!("beta[{}]", i + 1), self.series.iter().map(|d| d[i].beta).collect()));
            }
            if v.sparse() {
                out.push((
                    alloc::format!("included[{}]", i + 1),
                    self.series.iter().map(|d| d[i].included as u8 as f64).collect(),
                ));
            }
        }
        if v.correlated() {
            let cov_fields: [(&str, fn(&CovParams) -> f64); 3] =
                [("mu_a", |q| q.mu_a), ("phi_a", |q| q.phi_a), ("v_a", |q| q.v_a)];
            for j in 0..self.config.p() {
                for (name, f) in cov_fields {
                    out.push((alloc::format!("{name}[{}]", j + 1), self.cov.iter().map(|d| f(&d[j])).collect()));
                }
            }
        }
        if v.sparse() {
            out.push(("kappa".into(), self.kappa.clone()));
        }
        out
    }

    /// Posterior inclusion probability of `β_i` (1 for variants without
    /// sparsity, 0 under variant C).
    pub fn inclusion_probability(&self, i: usize) -> f64 {
        let n = self.n_draws().max(1) as f64;
        self.series.iter().filter(|d| d[i].included).count() as f64 / n
    }

    pub fn posterior_mean(&self, f: impl Fn(&SeriesParams) -> f64, i: usize) -> f64 {
        let n = self.n_draws().max(1) as f64;
        self.series.iter().map(|d| f(&d[i])).sum::<f64>() / n
    }
}

fn acceptance_of(ctx: &SweepContext) -> Vec<(String, Accept)> {
    let mut v = Vec::new();
    for (i, s) in ctx.series.iter().enumerate() {
        let a = &s.acceptance;
        let i = i + 1;
        v.push((alloc::format!("volatility[{i}]"), a.volatility));
        v.push((alloc::format!("mixing[{i}]"), a.mixing));
        v.push((alloc::format!("phi[{i}]"), a.hyper.phi));
        v.push((alloc::format!("sigma_rho[{i}]"), a.hyper.sigma_rho));
        v.push((alloc::format!("nu[{i}]"), a.hyper.nu));
        v.push((alloc::format!("interweave[{i}]"), a.hyper.interweave));
    }
    for r in &ctx.rows {
        v.push((alloc::format!("phi_a[row {}]", r.row + 1), r.phi_acceptance));
    }
    v
}

fn terminal_of(ctx: &SweepContext) -> TerminalState {
    let n = ctx.t();
    let last = n - 1;
    let h = ctx.series.iter().map(|s| s.h[last]).collect();
    let eps = ctx
        .series
        .iter()
        .map(|s| {
            let p = &s.params;
            let u = s.ytil[last] * (-0.5 * crate::model::clamp_h(s.h[last])).exp();
            (u - p.beta * (s.z[last] - p.c())) / s.z[last].sqrt()
        })
        .collect();
    let a = (0..ctx.k() * (ctx.k() - 1) / 2).map(|j| ctx.a_value(j, last)).collect();
    TerminalState { h, eps, a }
}

/// Fits the configured variant to `data`. Deterministic given the seed and
/// independent of the number of worker threads.
pub fn run_mcmc(config: &ModelConfig, data: &ReturnsPanel) -> Result<McmcDraws> {
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();
    config.validate()?;
    if data.k() != config.k {
        return Err(Error::Dimension(alloc::format!("config has k={} but data has {} series", config.k, data.k())));
    }
    if data.t() < MIN_T {
        return Err(Error::Data(alloc::format!("need at least {MIN_T} observations, got {}", data.t())));
    }
    let s = &config.mcmc;
    let y: Vec<Vec<f64>> = (0..data.k()).map(|i| data.series(i).to_vec()).collect();
    let mut ctx = SweepContext::initialize(config.variant, config.priors, y, s.seed, s.block_len)?;
    for sweep in 0..s.burn_in {
        ctx.sweep(sweep, true)?;
    }
    let at_burn = acceptance_of(&ctx);

    let n_stored = s.n_stored();
    let stride = s.state_thin.max(n_stored.div_ceil(MAX_STATE_PATHS));
    let n = data.t();
    let mut out_series = Vec::with_capacity(n_stored);
    let mut out_cov = Vec::with_capacity(n_stored);
    let mut out_kappa = Vec::with_capacity(n_stored);
    let mut out_term = Vec::with_capacity(n_stored);
    let mut h_paths = Vec::new();
    let mut a_paths = Vec::new();
    for it in 0..s.draws {
        ctx.sweep(s.burn_in + it, false)?;
        if (it + 1) % s.thin != 0 {
            continue;
        }
        let d = out_series.len();
        out_series.push(ctx.series_params());
        out_cov.push(if config.variant.correlated() { ctx.cov_params() } else { Vec::new() });
        out_kappa.push(ctx.kappa());
        out_term.push(terminal_of(&ctx));
        if d % stride == 0 {
            h_paths.push(ctx.series.iter().map(|b| b.h.clone()).collect::<Vec<_>>());
            if config.variant.correlated() {
                let st = ctx.latent_states();
                a_paths.push(st.a);
            }
        }
    }
    let at_end = acceptance_of(&ctx);
    let rates = at_end
        .into_iter()
        .zip(at_burn)
        .map(|((name, e), (_, b))| {
            let diff = Accept { accepted: e.accepted - b.accepted, proposed: e.proposed - b.proposed };
            (name, diff.rate())
        })
        .collect();

    #[allow(unused_mut)]
    let mut draws = McmcDraws {
        config: config.clone(),
        names: data.names().to_vec(),
        dates: data.dates().to_vec(),
        series: out_series,
        cov: out_cov,
        kappa: out_kappa,
        terminal: out_term,
        h_summary: StateSummary::from_paths(&h_paths, config.k, n),
        a_summary: StateSummary::from_paths(&a_paths, if config.variant.correlated() { config.p() } else { 0 }, n),
        acceptance: AcceptanceReport { rates },
        elapsed_secs: None,
    };
    #[cfg(feature = "std")]
    {
        draws.elapsed_secs = Some(start.elapsed().as_secs_f64());
    }
    Ok(draws)
}
