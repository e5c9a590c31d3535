//! Hyper-parameter updates for the volatility and covariance-state AR(1)
//! processes.
//!
//! Volatility block, per series, in order:
//! - `μ`: conjugate normal draw.
//! - `φ`: independence MH with the Gaussian implied by the transition
//!   regression; the stationary initial density and the prior enter the
//!   acceptance ratio.
//! - `(σ, ρ)`: joint random-walk MH on `(ln σ, atanh ρ)`.
//! - `(μ, φ, σ, ρ)` again, non-centred: the standardized innovations stay
//!   fixed while the parameters move, which moves the whole log-variance
//!   path with them (interweaving).
//! - `ν`: random-walk MH on `ln(ν - 4)`.
//!
//! With small `σ` the centred moves mix slowly because `ρ` and `μ` are
//! nearly determined by the current path; the non-centred moves break that
//! coupling.
//!
//! Random-walk scales adapt by Robbins-Monro during burn-in only.

use super::Accept;
use crate::distributions::{sample_gamma, standard_normal};
use crate::model::{clamp_h, CovParams, SeriesParams};
use crate::prelude::*;
use crate::priors::{PriorSet, ShiftedBeta, NU_MIN};
use crate::stats::inverse_gamma_ln_pdf;
use rand::Rng;

const TARGET_ACCEPT: f64 = 0.3;
const BASE_LOG_SIGMA_STEP: f64 = 0.1;
const BASE_ATANH_RHO_STEP: f64 = 0.2;
const BASE_NU_STEP: f64 = 0.25;
const BASE_PHI_STEP: f64 = 0.1;
const BASE_NC_LEVEL_STEP: f64 = 0.05;
const BASE_NC_PHI_STEP: f64 = 0.1;

/// Per-series adaptive proposal scales (log multipliers of the base steps).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvAdapt {
    pub sigma_rho: f64,
    pub nu: f64,
    pub nc_level: f64,
    pub nc_phi: f64,
    pub nc_sigma_rho: f64,
}

/// Acceptance counters of the volatility hyper-parameter moves.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvHyperStats {
    pub phi: Accept,
    pub sigma_rho: Accept,
    pub nu: Accept,
    /// All three non-centred moves pooled.
    pub interweave: Accept,
}

fn rm_step(log_scale: &mut f64, accepted: bool, sweep: usize) {
    let gain = (1.0 / (sweep as f64 + 1.0)).powf(0.6).min(0.5);
    let a = if accepted { 1.0 } else { 0.0 };
    *log_scale = (*log_scale + gain * (a - TARGET_ACCEPT)).clamp(-8.0, 4.0);
}

fn accept<R: Rng + ?Sized>(log_alpha: f64, rng: &mut R) -> Result<bool, String> {
    if log_alpha.is_nan() {
        return Err("NaN acceptance ratio".into());
    }
    Ok(log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha)
}

/// `ε_t = (ỹ_t e^{-h_t/2} - β(z_t - c)) / √z_t`.
pub fn structural_shocks(ytil: &[f64], h: &[f64], z: &[f64], beta: f64, c: f64) -> Vec<f64> {
    (0..ytil.len())
        .map(|t| (ytil[t] * (-0.5 * clamp_h(h[t])).exp() - beta * (z[t] - c)) / z[t].sqrt())
        .collect()
}

/// `ln p(h | μ, φ, σ, ρ, ε)` with leverage, including the stationary
/// initial density and every normalizing term that depends on the
/// parameters.
pub fn sv_loglik(h: &[f64], eps: &[f64], mu: f64, phi: f64, sigma: f64, rho: f64) -> f64 {
    let n = h.len();
    if n == 0 {
        return 0.0;
    }
    let s2 = sigma * sigma * (1.0 - rho * rho);
    let init_var = sigma * sigma / (1.0 - phi * phi);
    let d0 = h[0] - mu;
    let mut lp = -0.5 * init_var.ln() - 0.5 * d0 * d0 / init_var;
    let ln_s2 = s2.ln();
    for t in 0..n - 1 {
        let r = h[t + 1] - mu - phi * (h[t] - mu) - rho * sigma * eps[t];
        lp += -0.5 * ln_s2 - 0.5 * r * r / s2;
    }
    lp
}

/// Terms of the observation density that depend on `ν` through `c`
/// (none when `β = 0`) plus the mixing prior.
fn nu_target(ytil: &[f64], h: &[f64], z: &[f64], p: &SeriesParams, nu: f64, priors: &PriorSet) -> f64 {
    if nu <= NU_MIN {
        return f64::NEG_INFINITY;
    }
    let half = 0.5 * nu;
    let mut lp: f64 = z.iter().map(|&zt| inverse_gamma_ln_pdf(zt, half, half)).sum();
    if p.beta != 0.0 {
        let c = nu / (nu - 2.0);
        let eps = structural_shocks(ytil, h, z, p.beta, c);
        lp += -0.5 * eps.iter().map(|e| e * e).sum::<f64>();
        lp += sv_loglik(h, &eps, p.mu, p.phi, p.sigma, p.rho);
    }
    lp + priors.nu_ln_pdf(nu) + (nu - NU_MIN).ln()
}

/// Conjugate normal draw of an AR(1) level given the rest, for a process
/// whose transition innovations have mean `offset_t` and variance `s2`.
fn draw_level<R: Rng + ?Sized>(
    x: &[f64],
    offset: impl Fn(usize) -> f64,
    phi: f64,
    init_var: f64,
    s2: f64,
    prior_mean: f64,
    prior_var: f64,
    rng: &mut R,
) -> f64 {
    let n = x.len();
    let one_m = 1.0 - phi;
    let mut prec = 1.0 / prior_var + 1.0 / init_var;
    let mut num = prior_mean / prior_var + x[0] / init_var;
    if n >= 2 {
        prec += (n - 1) as f64 * one_m * one_m / s2;
        let s: f64 = (0..n - 1).map(|t| x[t + 1] - phi * x[t] - offset(t)).sum();
        num += one_m * s / s2;
    }
    let var = 1.0 / prec;
    var * num + var.sqrt() * standard_normal(rng)
}

/// Independence MH for an AR(1) coefficient given the level. `offset_t`
/// is the innovation mean, `s2` the innovation variance and `init_var_unit`
/// the stationary variance times `(1 - φ²)`.
#[allow(clippy::too_many_arguments)]
fn update_phi<R: Rng + ?Sized>(
    x: &[f64],
    offset: impl Fn(usize) -> f64,
    phi: f64,
    s2: f64,
    init_var_unit: f64,
    prior: &ShiftedBeta,
    full: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Result<(f64, bool), String> {
    let n = x.len();
    let outer = |f: f64| prior.ln_pdf(f) + 0.5 * (1.0 - f * f).ln() - 0.5 * x[0] * x[0] * (1.0 - f * f) / init_var_unit;
    let sxx: f64 = x[..n.saturating_sub(1)].iter().map(|v| v * v).sum();
    if n >= 2 && sxx > 1e-300 {
        let sxy: f64 = (0..n - 1).map(|t| x[t] * (x[t + 1] - offset(t))).sum();
        let mean = sxy / sxx;
        let sd = (s2 / sxx).sqrt();
        let prop = mean + sd * standard_normal(rng);
        if prop.abs() >= 1.0 {
            return Ok((phi, false));
        }
        let ok = accept(outer(prop) - outer(phi), rng)?;
        Ok(if ok { (prop, true) } else { (phi, false) })
    } else {
        let prop = (phi.atanh() + BASE_PHI_STEP * standard_normal(rng)).tanh();
        if prop.abs() >= 1.0 {
            return Ok((phi, false));
        }
        let jac = |f: f64| (1.0 - f * f).ln();
        let ok = accept(full(prop) + jac(prop) - full(phi) - jac(phi), rng)?;
        Ok(if ok { (prop, true) } else { (phi, false) })
    }
}

/// Fixed coordinates of the non-centred parameterization:
/// `h̃_0 = (h_0 - μ)√(1-φ²)/σ` and
/// `η̃_t = ((h_{t+1} - μ - φ(h_t - μ))/σ - ρε_t) / √(1-ρ²)`.
struct NonCentred<'a> {
    ytil: &'a [f64],
    z: &'a [f64],
    beta: f64,
    c: f64,
    h0: f64,
    innov: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Theta {
    mu: f64,
    phi: f64,
    sigma: f64,
    rho: f64,
}

impl<'a> NonCentred<'a> {
    fn eps(&self, t: usize, h: f64) -> f64 {
        (self.ytil[t] * (-0.5 * clamp_h(h)).exp() - self.beta * (self.z[t] - self.c)) / self.z[t].sqrt()
    }

    fn from_path(h: &[f64], ytil: &'a [f64], z: &'a [f64], p: &SeriesParams) -> Self {
        let mut nc = NonCentred { ytil, z, beta: p.beta, c: p.c(), h0: 0.0, innov: Vec::new() };
        nc.h0 = (h[0] - p.mu) * (1.0 - p.phi * p.phi).sqrt() / p.sigma;
        let sr = (1.0 - p.rho * p.rho).sqrt();
        nc.innov = (0..h.len() - 1)
            .map(|t| {
                let eta = h[t + 1] - p.mu - p.phi * (h[t] - p.mu);
                (eta / p.sigma - p.rho * nc.eps(t, h[t])) / sr
            })
            .collect();
        nc
    }

    /// Rebuilds the path at `th` into `h` and returns the observation part
    /// `Σ_t -ĥ_t/2 - ε_t²/2` of the target (`ĥ` clamped); `-∞` if the path leaves the
    /// finite range.
    fn rebuild(&self, th: Theta, h: &mut [f64]) -> f64 {
        let sr = (1.0 - th.rho * th.rho).sqrt();
        h[0] = th.mu + th.sigma / (1.0 - th.phi * th.phi).sqrt() * self.h0;
        let mut lp = 0.0;
        for t in 0..h.len() {
            let e = self.eps(t, h[t]);
            lp += -0.5 * clamp_h(h[t]) - 0.5 * e * e;
            if t + 1 < h.len() {
                h[t + 1] = th.mu + th.phi * (h[t] - th.mu) + th.sigma * (th.rho * e + sr * self.innov[t]);
            }
        }
        if lp.is_finite() {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Prior of `θ` in the coordinates `(μ, atanh φ, ln σ, atanh ρ)`.
fn theta_prior(th: Theta, priors: &PriorSet) -> f64 {
    priors.mu.ln_pdf(th.mu)
        + priors.phi.ln_pdf(th.phi)
        + (1.0 - th.phi * th.phi).ln()
        + priors.sigma_ln_pdf(th.sigma)
        + th.sigma.ln()
        + priors.rho.ln_pdf(th.rho)
        + (1.0 - th.rho * th.rho).ln()
}

/// Three random-walk moves on `θ` with the innovations held fixed.
#[allow(clippy::too_many_arguments)]
fn interweave<R: Rng + ?Sized>(
    h: &mut [f64],
    ytil: &[f64],
    z: &[f64],
    p: &mut SeriesParams,
    priors: &PriorSet,
    adapt: &mut SvAdapt,
    stats: &mut SvHyperStats,
    adapt_sweep: Option<usize>,
    rng: &mut R,
) -> Result<(), String> {
    let nc = NonCentred::from_path(h, ytil, z, p);
    let mut cur = Theta { mu: p.mu, phi: p.phi, sigma: p.sigma, rho: p.rho };
    let mut lp_cur = nc.rebuild(cur, h) + theta_prior(cur, priors);
    let mut buf = h.to_vec();
    for m in 0..3 {
        let (scale, prop) = match m {
            0 => {
                let s = (adapt.nc_sigma_rho).exp();
                let ls = cur.sigma.ln() + s * BASE_LOG_SIGMA_STEP * standard_normal(rng);
                let at = cur.rho.atanh() + s * BASE_ATANH_RHO_STEP * standard_normal(rng);
                (&mut adapt.nc_sigma_rho, Theta { sigma: ls.exp(), rho: at.tanh(), ..cur })
            }
            1 => {
                let s = adapt.nc_level.exp();
                (&mut adapt.nc_level, Theta { mu: cur.mu + s * BASE_NC_LEVEL_STEP * standard_normal(rng), ..cur })
            }
            _ => {
                let s = adapt.nc_phi.exp();
                let phi = (cur.phi.atanh() + s * BASE_NC_PHI_STEP * standard_normal(rng)).tanh();
                (&mut adapt.nc_phi, Theta { phi, ..cur })
            }
        };
        let valid = prop.sigma > 0.0 && prop.sigma.is_finite() && prop.rho.abs() < 1.0 && prop.phi.abs() < 1.0;
        let lp_prop = if valid { nc.rebuild(prop, &mut buf) + theta_prior(prop, priors) } else { f64::NEG_INFINITY };
        let ok = lp_prop.is_finite() && accept(lp_prop - lp_cur, rng)?;
        if ok {
            cur = prop;
            lp_cur = lp_prop;
            h.copy_from_slice(&buf);
        }
        stats.interweave.record(ok);
        if let Some(s) = adapt_sweep {
            rm_step(scale, ok, s);
        }
    }
    p.mu = cur.mu;
    p.phi = cur.phi;
    p.sigma = cur.sigma;
    p.rho = cur.rho;
    Ok(())
}

/// Options of one volatility hyper-parameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperOptions {
    /// `Some(sweep)` during burn-in enables scale adaptation.
    pub adapt_sweep: Option<usize>,
    /// Multiplier applied to `σ` inside the `(σ, ρ)` target. Always 1 except
    /// in the mutation check of the joint-distribution test.
    pub sigma_scale: f64,
}

/// Updates `μ, φ, σ, ρ, ν` of one series; the non-centred moves also
/// shift `h`.
#[allow(clippy::too_many_arguments)]
pub fn sample_sv_hyper<R: Rng + ?Sized>(
    h: &mut [f64],
    ytil: &[f64],
    z: &[f64],
    p: &mut SeriesParams,
    priors: &PriorSet,
    adapt: &mut SvAdapt,
    stats: &mut SvHyperStats,
    opts: HyperOptions,
    rng: &mut R,
) -> Result<(), String> {
    let adapt_sweep = opts.adapt_sweep;
    let n = h.len();
    if n == 0 {
        let d = priors.sample_series(crate::model::Variant::S, 1.0, rng);
        p.mu = d.mu;
        p.phi = d.phi;
        p.sigma = d.sigma;
        p.rho = d.rho;
        p.nu = d.nu;
        return Ok(());
    }
    let eps = structural_shocks(ytil, h, z, p.beta, p.c());

    // μ
    {
        let s2 = p.sigma * p.sigma * (1.0 - p.rho * p.rho);
        let init_var = p.sigma * p.sigma / (1.0 - p.phi * p.phi);
        let rs = p.rho * p.sigma;
        p.mu = draw_level(h, |t| rs * eps[t], p.phi, init_var, s2, priors.mu.mean, priors.mu.var, rng);
    }

    // φ
    {
        let x: Vec<f64> = h.iter().map(|v| v - p.mu).collect();
        let s2 = p.sigma * p.sigma * (1.0 - p.rho * p.rho);
        let rs = p.rho * p.sigma;
        let (mu, sigma, rho) = (p.mu, p.sigma, p.rho);
        let full = |f: f64| priors.phi.ln_pdf(f) + sv_loglik(h, &eps, mu, f, sigma, rho);
        let (phi, ok) = update_phi(&x, |t| rs * eps[t], p.phi, s2, p.sigma * p.sigma, &priors.phi, full, rng)?;
        p.phi = phi;
        stats.phi.record(ok);
    }

    // (σ, ρ)
    {
        let k = opts.sigma_scale;
        let target = |sigma: f64, rho: f64| {
            sv_loglik(h, &eps, p.mu, p.phi, k * sigma, rho)
                + priors.sigma_ln_pdf(sigma)
                + sigma.ln()
                + priors.rho.ln_pdf(rho)
                + (1.0 - rho * rho).ln()
        };
        let scale = adapt.sigma_rho.exp();
        let ls = p.sigma.ln() + scale * BASE_LOG_SIGMA_STEP * standard_normal(rng);
        let at = p.rho.atanh() + scale * BASE_ATANH_RHO_STEP * standard_normal(rng);
        let (sigma, rho) = (ls.exp(), at.tanh());
        let ok = if sigma > 0.0 && sigma.is_finite() && rho.abs() < 1.0 {
            accept(target(sigma, rho) - target(p.sigma, p.rho), rng)?
        } else {
            false
        };
        if ok {
            p.sigma = sigma;
            p.rho = rho;
        }
        stats.sigma_rho.record(ok);
        if let Some(s) = adapt_sweep {
            rm_step(&mut adapt.sigma_rho, ok, s);
        }
    }

    interweave(h, ytil, z, p, priors, adapt, stats, adapt_sweep, rng)?;
    let h: &[f64] = h;

    // ν
    {
        let step = BASE_NU_STEP * adapt.nu.exp();
        let prop = NU_MIN + ((p.nu - NU_MIN).ln() + step * standard_normal(rng)).exp();
        let ok = if prop > NU_MIN && prop.is_finite() {
            accept(nu_target(ytil, h, z, p, prop, priors) - nu_target(ytil, h, z, p, p.nu, priors), rng)?
        } else {
            false
        };
        if ok {
            p.nu = prop;
        }
        stats.nu.record(ok);
        if let Some(s) = adapt_sweep {
            rm_step(&mut adapt.nu, ok, s);
        }
    }
    Ok(())
}

/// Updates `μ_a, φ_a, v_a` of one covariance state path. Returns whether
/// the `φ_a` proposal was accepted.
pub fn sample_cov_hyper<R: Rng + ?Sized>(
    a: &[f64],
    q: &mut CovParams,
    priors: &PriorSet,
    rng: &mut R,
) -> Result<bool, String> {
    let n = a.len();
    if n == 0 {
        *q = priors.sample_cov(rng);
        return Ok(true);
    }
    let v2 = q.v_a * q.v_a;
    q.mu_a = draw_level(a, |_| 0.0, q.phi_a, v2 / (1.0 - q.phi_a * q.phi_a), v2, priors.mu_a.mean, priors.mu_a.var, rng);

    let x: Vec<f64> = a.iter().map(|v| v - q.mu_a).collect();
    let full = |f: f64| {
        let init = v2 / (1.0 - f * f);
        let mut lp = priors.phi_a.ln_pdf(f) - 0.5 * init.ln() - 0.5 * x[0] * x[0] / init;
        for t in 0..n.saturating_sub(1) {
            let r = x[t + 1] - f * x[t];
            lp -= 0.5 * r * r / v2;
        }
        lp
    };
    let (phi, ok) = update_phi(&x, |_| 0.0, q.phi_a, v2, v2, &priors.phi_a, full, rng)?;
    q.phi_a = phi;

    let mut ss = x[0] * x[0] * (1.0 - phi * phi);
    for t in 0..n - 1 {
        let r = x[t + 1] - phi * x[t];
        ss += r * r;
    }
    let prec = sample_gamma(priors.va_prec.shape + 0.5 * n as f64, priors.va_prec.rate + 0.5 * ss, rng)
        .map_err(|e| e.to_string())?;
    q.v_a = prec.recip().sqrt();
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Block};
    use crate::stats::{ks_p_value, normal_cdf};

    /// Posterior mean and variance of the AR(1) level by grid quadrature of
    /// prior × stationary initial density × transitions.
    fn level_by_quadrature(x: &[f64], phi: f64, sigma: f64, m0: f64, v0: f64) -> (f64, f64) {
        let init_var = sigma * sigma / (1.0 - phi * phi);
        let lp = |mu: f64| {
            let mut l = -0.5 * (mu - m0).powi(2) / v0 - 0.5 * (x[0] - mu).powi(2) / init_var;
            for t in 0..x.len() - 1 {
                l -= 0.5 * (x[t + 1] - mu - phi * (x[t] - mu)).powi(2) / (sigma * sigma);
            }
            l
        };
        let (lo, hi, n) = (-14.0, -4.0, 200_000);
        let dx = (hi - lo) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * dx).collect();
        let top = grid.iter().map(|&m| lp(m)).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = grid.iter().map(|&m| (lp(m) - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean = grid.iter().zip(&w).map(|(m, w)| m * w).sum::<f64>() / z;
        let var = grid.iter().zip(&w).map(|(m, w)| (m - mean).powi(2) * w).sum::<f64>() / z;
        (mean, var)
    }

    #[test]
    fn level_draw_matches_quadrature_posterior() {
        let (phi, sigma) = (0.7, 0.4);
        let x = [-9.3, -9.1, -8.6, -9.4, -9.0, -8.8, -9.7, -9.2];
        let (m, v) = level_by_quadrature(&x, phi, sigma, -10.0, 1.0);
        let mut rng = stream(1, Block::SvHyper, 0);
        let init_var = sigma * sigma / (1.0 - phi * phi);
        let mut d: Vec<f64> =
            (0..20_000).map(|_| draw_level(&x, |_| 0.0, phi, init_var, sigma * sigma, -10.0, 1.0, &mut rng)).collect();
        d.sort_by(f64::total_cmp);
        let n = d.len() as f64;
        let ks = d
            .iter()
            .enumerate()
            .map(|(i, &v_i)| {
                let f = normal_cdf((v_i - m) / v.sqrt());
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks_p_value(ks, n) > 0.01, "KS {ks}");
    }

    #[test]
    fn non_centred_round_trip_reproduces_path() {
        let ytil = [0.01, -0.02, 0.005, 0.03, -0.01];
        let z = [1.1, 0.9, 1.4, 0.7, 1.0];
        let h = [-9.0, -8.8, -9.3, -9.1, -8.9];
        let p = SeriesParams { mu: -9.0, phi: 0.9, sigma: 0.2, rho: -0.5, nu: 10.0, beta: -0.3, included: true };
        let nc = NonCentred::from_path(&h, &ytil, &z, &p);
        let mut out = [0.0; 5];
        nc.rebuild(Theta { mu: p.mu, phi: p.phi, sigma: p.sigma, rho: p.rho }, &mut out);
        for (a, b) in h.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
