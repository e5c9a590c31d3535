//! Multi-move volatility sampler.
//!
//! The path is cut into blocks of length `block_len` starting at a random
//! offset. Each block is updated by an independence Metropolis-Hastings step
//! whose proposal is a Gaussian centred at the conditional mode, with a
//! tridiagonal precision built from the observation curvature and a
//! Gauss-Newton approximation of the leverage transition terms.
//!
//! Target for one series, with `ĥ_t` the log variance clamped as in
//! [`clamp_h`], `u_t = ỹ_t e^{-ĥ_t/2}`,
//! `ε_t = (u_t - β(z_t - c)) / √z_t`, `s² = σ²(1 - ρ²)`:
//!
//! ```text
//! Σ_t [-ĥ_t/2 - ε_t²/2]
//!   + Σ_{t<T-1} -(h_{t+1} - μ - φ(h_t - μ) - ρσε_t)² / (2s²)
//!   - (h_0 - μ)²(1 - φ²) / (2σ²)
//! ```
//!
//! The last observation carries no transition term: the next log variance is
//! integrated out, leaving `ε_{T-1} ~ N(0, 1)`.

use super::Accept;
use crate::model::{clamp_h, SeriesParams};
use crate::prelude::*;
use crate::distributions::standard_normal;
use rand::Rng;

const MAX_NEWTON: usize = 30;

pub(crate) struct VolTarget<'a> {
    ytil: &'a [f64],
    z: &'a [f64],
    mu: f64,
    phi: f64,
    rho_sigma: f64,
    s2: f64,
    init_prec: f64,
    beta: f64,
    c: f64,
}

impl<'a> VolTarget<'a> {
    pub(crate) fn new(ytil: &'a [f64], z: &'a [f64], p: &SeriesParams) -> Self {
        Self {
            ytil,
            z,
            mu: p.mu,
            phi: p.phi,
            rho_sigma: p.rho * p.sigma,
            s2: p.sigma * p.sigma * (1.0 - p.rho * p.rho),
            init_prec: (1.0 - p.phi * p.phi) / (p.sigma * p.sigma),
            beta: p.beta,
            c: p.c(),
        }
    }

    fn n(&self) -> usize {
        self.ytil.len()
    }

    /// `(u_t, ε_t)` at log variance `h`.
    #[inline]
    fn eps(&self, t: usize, h: f64) -> (f64, f64) {
        let u = self.ytil[t] * (-0.5 * clamp_h(h)).exp();
        let sz = self.z[t].sqrt();
        (u, (u - self.beta * (self.z[t] - self.c)) / sz)
    }

    #[inline]
    fn residual(&self, h: &[f64], t: usize, eps_t: f64) -> f64 {
        h[t + 1] - self.mu - self.phi * (h[t] - self.mu) - self.rho_sigma * eps_t
    }

    /// Sum of every target term touching `h[s..=e]`.
    pub(crate) fn block_lp(&self, h: &[f64], s: usize, e: usize) -> f64 {
        let n = self.n();
        let mut lp = 0.0;
        for t in s..=e {
            let (_, eps) = self.eps(t, h[t]);
            lp += -0.5 * clamp_h(h[t]) - 0.5 * eps * eps;
        }
        let t_lo = s.saturating_sub(1);
        let t_hi = e.min(n.saturating_sub(2));
        if n >= 2 {
            for t in t_lo..=t_hi {
                let (_, eps) = self.eps(t, h[t]);
                let r = self.residual(h, t, eps);
                lp -= r * r / (2.0 * self.s2);
            }
        }
        if s == 0 {
            let d = h[0] - self.mu;
            lp -= 0.5 * d * d * self.init_prec;
        }
        lp
    }

    /// Gradient and tridiagonal precision (negated approximate Hessian) over
    /// the block `h[s..=e]`.
    fn grad_prec(&self, h: &[f64], s: usize, e: usize, g: &mut [f64], d: &mut [f64], o: &mut [f64]) {
        let n = self.n();
        g.fill(0.0);
        d.fill(0.0);
        o.fill(0.0);
        for t in s..=e {
            let j = t - s;
            let (u, eps) = self.eps(t, h[t]);
            let z = self.z[t];
            let deps = -u / (2.0 * z.sqrt());
            g[j] += -0.5 - eps * deps;
            let b = self.beta * (z - self.c);
            d[j] += ((2.0 * u * u - b * u) / (4.0 * z)).max(0.0);
        }
        if n >= 2 {
            let t_lo = s.saturating_sub(1);
            let t_hi = e.min(n - 2);
            for t in t_lo..=t_hi {
                let (u, eps) = self.eps(t, h[t]);
                let r = self.residual(h, t, eps);
                let deps = -u / (2.0 * self.z[t].sqrt());
                let dr_t = -self.phi - self.rho_sigma * deps;
                let in_t = t >= s;
                let in_next = t < e;
                if in_t {
                    let j = t - s;
                    g[j] -= r * dr_t / self.s2;
                    d[j] += dr_t * dr_t / self.s2;
                }
                if in_next {
                    let j = t + 1 - s;
                    g[j] -= r / self.s2;
                    d[j] += 1.0 / self.s2;
                }
                if in_t && in_next {
                    o[t - s] += dr_t / self.s2;
                }
            }
        }
        if s == 0 {
            g[0] -= (h[0] - self.mu) * self.init_prec;
            d[0] += self.init_prec;
        }
    }
}

/// Cholesky factor of a symmetric tridiagonal matrix: `ld` is the diagonal
/// and `lo` the sub-diagonal of `L`.
fn tridiag_cholesky(d: &[f64], o: &[f64], ld: &mut [f64], lo: &mut [f64]) -> bool {
    let m = d.len();
    let mut prev = 0.0;
    for j in 0..m {
        let v = d[j] - prev * prev;
        if !(v > 0.0) || !v.is_finite() {
            return false;
        }
        ld[j] = v.sqrt();
        if j + 1 < m {
            lo[j] = o[j] / ld[j];
            prev = lo[j];
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place.
fn tridiag_solve(ld: &[f64], lo: &[f64], b: &mut [f64]) {
    let m = ld.len();
    for j in 0..m {
        if j > 0 {
            b[j] -= lo[j - 1] * b[j - 1];
        }
        b[j] /= ld[j];
    }
    back_substitute(ld, lo, b);
}

/// Solves `Lᵀ x = b` in place.
fn back_substitute(ld: &[f64], lo: &[f64], b: &mut [f64]) {
    let m = ld.len();
    for j in (0..m).rev() {
        if j + 1 < m {
            b[j] -= lo[j] * b[j + 1];
        }
        b[j] /= ld[j];
    }
}

/// `ln q(x)` for the Gaussian with mean `mode` and precision `L Lᵀ`, up to
/// the shared `2π` constant.
fn ln_q(x: &[f64], mode: &[f64], ld: &[f64], lo: &[f64]) -> f64 {
    // ||Lᵀ (x - mode)||²
    let m = x.len();
    let mut quad = 0.0;
    for j in 0..m {
        let mut v = ld[j] * (x[j] - mode[j]);
        if j + 1 < m {
            v += lo[j] * (x[j + 1] - mode[j + 1]);
        }
        quad += v * v;
    }
    ld.iter().map(|l| l.ln()).sum::<f64>() - 0.5 * quad
}

pub(crate) struct BlockWork {
    g: Vec<f64>,
    d: Vec<f64>,
    o: Vec<f64>,
    ld: Vec<f64>,
    lo: Vec<f64>,
    mode: Vec<f64>,
    step: Vec<f64>,
    cur: Vec<f64>,
}

impl BlockWork {
    pub(crate) fn new(m: usize) -> Self {
        let v = || vec![0.0; m];
        Self { g: v(), d: v(), o: v(), ld: v(), lo: v(), mode: v(), step: v(), cur: v() }
    }
}

/// One MH update of `h[s..=e]`. Returns `Ok(accepted)` or a diagnostic.
fn update_block<R: Rng + ?Sized>(
    tgt: &VolTarget<'_>,
    h: &mut [f64],
    s: usize,
    e: usize,
    w: &mut BlockWork,
    rng: &mut R,
) -> Result<bool, String> {
    let m = e - s + 1;
    let (g, d, o) = (&mut w.g[..m], &mut w.d[..m], &mut w.o[..m]);
    let (ld, lo) = (&mut w.ld[..m], &mut w.lo[..m]);
    let (mode, step, cur) = (&mut w.mode[..m], &mut w.step[..m], &mut w.cur[..m]);
    cur.copy_from_slice(&h[s..=e]);

    // deterministic start: the AR(1) forecast from the left neighbour
    for j in 0..m {
        h[s + j] = if s == 0 {
            tgt.mu
        } else {
            tgt.mu + tgt.phi.powi(j as i32 + 1) * (h[s - 1] - tgt.mu)
        };
    }
    let mut lp = tgt.block_lp(h, s, e);
    for _ in 0..MAX_NEWTON {
        tgt.grad_prec(h, s, e, g, d, o);
        if !tridiag_cholesky(d, o, ld, lo) {
            return Err("proposal precision not positive definite during mode search".into());
        }
        step.copy_from_slice(g);
        tridiag_solve(ld, lo, step);
        let mut t = 1.0;
        let mut improved = false;
        mode.copy_from_slice(&h[s..=e]);
        for _ in 0..12 {
            for j in 0..m {
                h[s + j] = mode[j] + t * step[j];
            }
            let cand = tgt.block_lp(h, s, e);
            if cand >= lp {
                lp = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            h[s..=e].copy_from_slice(mode);
            break;
        }
        if step.iter().map(|x| (t * x).abs()).fold(0.0, f64::max) < 1e-8 {
            break;
        }
    }
    mode.copy_from_slice(&h[s..=e]);
    tgt.grad_prec(h, s, e, g, d, o);
    if !tridiag_cholesky(d, o, ld, lo) {
        return Err("proposal precision not positive definite at the mode".into());
    }

    // x' = mode + L^{-T} ζ
    for v in step.iter_mut() {
        *v = standard_normal(rng);
    }
    back_substitute(ld, lo, step);
    for j in 0..m {
        step[j] += mode[j];
    }
    let lq_new = ln_q(step, mode, ld, lo);
    let lq_old = ln_q(cur, mode, ld, lo);

    h[s..=e].copy_from_slice(step);
    let lp_new = tgt.block_lp(h, s, e);
    h[s..=e].copy_from_slice(cur);
    let lp_old = tgt.block_lp(h, s, e);

    let log_alpha = lp_new - lp_old + lq_old - lq_new;
    if log_alpha.is_nan() || lp_old.is_nan() || log_alpha == f64::INFINITY {
        return Err(alloc::format!(
            "non-finite acceptance ratio on block [{s}, {e}]: target {lp_old} -> {lp_new}"
        ));
    }
    if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
        h[s..=e].copy_from_slice(step);
        Ok(true)
    } else {
        Ok(false)
    }
}

/// One full pass over the path. Blocks start at a uniformly random offset.
pub(crate) fn sample_path<R: Rng + ?Sized>(
    h: &mut [f64],
    ytil: &[f64],
    z: &[f64],
    p: &SeriesParams,
    block_len: usize,
    rng: &mut R,
) -> Result<Accept, String> {
    let n = h.len();
    let mut acc = Accept::default();
    if n == 0 {
        return Ok(acc);
    }
    let tgt = VolTarget::new(ytil, z, p);
    let b = block_len.min(n);
    let mut w = BlockWork::new(b);
    let offset = if b < n { rng.random_range(0..b) } else { 0 };
    let mut s = 0;
    let mut e = if offset == 0 { b - 1 } else { offset - 1 };
    loop {
        acc.record(update_block(&tgt, h, s, e, &mut w, rng)?);
        if e + 1 >= n {
            break;
        }
        s = e + 1;
        e = (s + b - 1).min(n - 1);
    }
    Ok(acc)
}
