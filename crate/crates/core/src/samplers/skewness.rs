//! Spike-and-slab update of `β_i` and the conjugate update of `κ`.

use super::mixing::leverage_moments;
use crate::distributions::{sample_beta, standard_normal};
use crate::model::{clamp_h, SeriesParams};
use crate::priors::{BetaPrior, NormalPrior};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

/// Slab posterior and posterior inclusion probability of `β_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPosterior {
    pub mean: f64,
    pub var: f64,
    /// `ln b_i`: log marginal-likelihood ratio of slab over spike.
    pub ln_bayes_factor: f64,
    pub inclusion_prob: f64,
}

/// Weighted regression of `ỹ e^{-h/2} - √z m` on `z - c` with variances
/// `z v`, under the slab prior, combined with the prior inclusion
/// probability `kappa`.
pub fn beta_posterior(
    ytil: &[f64],
    h: &[f64],
    z: &[f64],
    p: &SeriesParams,
    slab: &NormalPrior,
    kappa: f64,
) -> BetaPosterior {
    let c = p.c();
    let (mut sxx, mut sxr) = (0.0, 0.0);
    for t in 0..ytil.len() {
        let (m, v) = leverage_moments(h, t, p);
        let u = ytil[t] * (-0.5 * clamp_h(h[t])).exp();
        let r = u - z[t].sqrt() * m;
        let x = z[t] - c;
        let w = z[t] * v;
        sxx += x * x / w;
        sxr += x * r / w;
    }
    let prec = 1.0 / slab.var + sxx;
    let var = 1.0 / prec;
    let mean = var * (slab.mean / slab.var + sxr);
    let ln_b = 0.5 * (var / slab.var).ln() + 0.5 * mean * mean / var - 0.5 * slab.mean * slab.mean / slab.var;
    let inclusion_prob = if kappa >= 1.0 {
        1.0
    } else if kappa <= 0.0 {
        0.0
    } else {
        let logit = kappa.ln() - (1.0 - kappa).ln() + ln_b;
        1.0 / (1.0 + (-logit).exp())
    };
    BetaPosterior { mean, var, ln_bayes_factor: ln_b, inclusion_prob }
}

/// Draws `(β, included)`.
pub fn draw_beta<R: Rng + ?Sized>(post: &BetaPosterior, rng: &mut R) -> (f64, bool) {
    if rng.random::<f64>() < post.inclusion_prob {
        (post.mean + post.var.sqrt() * standard_normal(rng), true)
    } else {
        (0.0, false)
    }
}

/// `κ | n1 ~ Beta(a + n1, b + k - n1)`.
pub fn draw_kappa<R: Rng + ?Sized>(prior: &BetaPrior, n_included: usize, k: usize, rng: &mut R) -> f64 {
    let a = prior.a + n_included as f64;
    let b = prior.b + (k - n_included) as f64;
    sample_beta(a, b, rng).expect("positive beta parameters").clamp(1e-12, 1.0 - 1e-12)
}
