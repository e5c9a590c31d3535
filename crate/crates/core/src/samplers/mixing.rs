//! Mixing-variable sampler.
//!
//! Given `ε_t | η_t ~ N(m_t, v_t)` with `m_t = ρη_t/σ`, `v_t = 1 - ρ²`
//! (and `m = 0`, `v = 1` at the last time point), the conditional of `z_t`
//! is proportional to
//!
//! ```text
//! GIG(z | -(ν+1)/2, ν + a²/v, β²/v) · exp{ m (a/√z - β√z) / v },
//! a = ỹ_t e^{-h_t/2} + βc.
//! ```
//!
//! The GIG factor is the proposal of an independence MH step, so the move is
//! an exact Gibbs draw whenever `m = 0`.

use super::Accept;
use crate::distributions::{sample_gig, GigParams};
use crate::model::{clamp_h, SeriesParams};
use crate::prelude::*;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

pub const Z_FLOOR: f64 = 1e-10;

/// `(m_t, v_t)`: conditional mean and variance of `ε_t` given the next
/// volatility innovation.
#[inline]
pub(crate) fn leverage_moments(h: &[f64], t: usize, p: &SeriesParams) -> (f64, f64) {
    if t + 1 < h.len() {
        let eta = h[t + 1] - p.mu - p.phi * (h[t] - p.mu);
        (p.rho * eta / p.sigma, 1.0 - p.rho * p.rho)
    } else {
        (0.0, 1.0)
    }
}

pub(crate) fn sample_path<R: Rng + ?Sized>(
    z: &mut [f64],
    ytil: &[f64],
    h: &[f64],
    p: &SeriesParams,
    rng: &mut R,
) -> Result<Accept, String> {
    let mut acc = Accept::default();
    let c = p.c();
    let lambda = -(p.nu + 1.0) / 2.0;
    for t in 0..z.len() {
        let (m, v) = leverage_moments(h, t, p);
        let a = ytil[t] * (-0.5 * clamp_h(h[t])).exp() + p.beta * c;
        let gig = GigParams::new(lambda, p.nu + a * a / v, p.beta * p.beta / v)
            .map_err(|e| alloc::format!("t={t}: {e}"))?;
        let prop = sample_gig(&gig, rng).max(Z_FLOOR);
        if m == 0.0 {
            z[t] = prop;
            acc.record(true);
            continue;
        }
        let g = |zz: f64| {
            let sz = zz.sqrt();
            m * (a / sz - p.beta * sz) / v
        };
        let log_alpha = g(prop) - g(z[t]);
        if log_alpha.is_nan() {
            return Err(alloc::format!("non-finite acceptance ratio at t={t}"));
        }
        let ok = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
        if ok {
            z[t] = prop;
        }
        acc.record(ok);
    }
    Ok(acc)
}
