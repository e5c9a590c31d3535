//! Series ordering by univariate skewness: each series is fitted alone with
//! the skew-t volatility model (no covariance states, no sparsity) and the
//! panel is ordered by ascending posterior mean of `β_i`.

use crate::engine::run_mcmc;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::panel::ReturnsPanel;
use crate::par;
use crate::prelude::*;
use crate::rng::derive_seed;

const ORDER_TAG: u64 = 0x4f_5244;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOrdering {
    /// `permutation[r]` is the original index placed at rank `r`.
    pub permutation: Vec<usize>,
    /// Posterior mean of `β_i` per original series.
    pub beta_means: Vec<f64>,
}

/// Univariate fits use the priors and run lengths of `config`, with the
/// seed of series `i` derived from the configured seed and `i`. Ties keep
/// the original order.
pub fn order_series(panel: &ReturnsPanel, config: &ModelConfig) -> Result<SeriesOrdering> {
    config.mcmc.validate()?;
    config.priors.validate()?;
    let k = panel.k();
    let fits: Vec<Result<f64>> = par::map_range(k, |i| {
        let mut mcmc = config.mcmc.clone();
        mcmc.seed = derive_seed(config.mcmc.seed, ORDER_TAG, i as u64);
        let cfg = ModelConfig::new(1, Variant::S, config.priors, mcmc)?;
        let single = ReturnsPanel::new(
            panel.dates().to_vec(),
            vec![panel.names()[i].clone()],
            nalgebra::DMatrix::from_column_slice(panel.t(), 1, panel.series(i)),
        )?;
        let draws = run_mcmc(&cfg, &single)?;
        Ok(draws.posterior_mean(|p| p.beta, 0))
    });
    let mut beta_means = Vec::with_capacity(k);
    for (i, f) in fits.into_iter().enumerate() {
        match f {
            Ok(b) => beta_means.push(b),
            Err(e) => {
                return Err(Error::Data(alloc::format!("univariate fit of `{}` failed: {e}", panel.names()[i])));
            }
        }
    }
    let mut permutation: Vec<usize> = (0..k).collect();
    permutation.sort_by(|&a, &b| beta_means[a].total_cmp(&beta_means[b]));
    Ok(SeriesOrdering { permutation, beta_means })
}
