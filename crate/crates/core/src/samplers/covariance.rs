//! Forward filtering, backward sampling for the covariance states of one
//! row of `A_t`.
//!
//! For row `i` (zero-based, `i ≥ 1`) the state is the `i`-vector of free
//! entries and the observation equation is
//!
//! ```text
//! ŷ_t = x_tᵀ α_t + e_t,    e_t ~ N(0, z_t v_t),
//! ŷ_t = y_it e^{-h_it/2} - β_i(z_t - c_i) - √z_t m_t,
//! x_tj = y_jt e^{-h_it/2},
//! ```
//!
//! with `(m_t, v_t)` the leverage moments of the mixing sampler.

use super::mixing::leverage_moments;
use crate::distributions::standard_normal;
use crate::error::Error;
use crate::model::{clamp_h, CovParams, SeriesParams};
use crate::prelude::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Observation quantities of one row: responses, regressors (`T × i`,
/// row-major per time) and variances.
pub struct RowObservations {
    pub yhat: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub var: Vec<f64>,
}

impl RowObservations {
    /// `y[j]` is the observed series `j`; `h`, `z`, `p` belong to series `row`.
    pub fn build(row: usize, y: &[Vec<f64>], h: &[f64], z: &[f64], p: &SeriesParams) -> Self {
        let n = h.len();
        let c = p.c();
        let mut yhat = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        for t in 0..n {
            let s = (-0.5 * clamp_h(h[t])).exp();
            let (m, v) = leverage_moments(h, t, p);
            let sz = z[t].sqrt();
            yhat.push(y[row][t] * s - p.beta * (z[t] - c) - sz * m);
            x.push(DVector::from_iterator(row, (0..row).map(|j| y[j][t] * s)));
            var.push(z[t] * v);
        }
        Self { yhat, x, var }
    }
}

type Chol = nalgebra::Cholesky<f64, nalgebra::Dyn>;

/// Cholesky decomposition with a jitter fallback, sized relative to
/// `scale`, for covariances that are singular up to rounding.
fn robust_chol(m: &DMatrix<f64>, scale: f64) -> Option<Chol> {
    if let Some(c) = Chol::new(m.clone()) {
        return Some(c);
    }
    let scale = scale.abs().max(f64::MIN_POSITIVE);
    for eps in [1e-12, 1e-10, 1e-8] {
        let mut j = m.clone();
        for d in 0..m.nrows() {
            j[(d, d)] += eps * scale;
        }
        if let Some(c) = Chol::new(j) {
            return Some(c);
        }
    }
    None
}

/// Draws the row's state paths; `a[j][t]` is free entry `j` of the row.
pub fn ffbs<R: Rng + ?Sized>(
    row: usize,
    obs: &RowObservations,
    params: &[CovParams],
    a: &mut [Vec<f64>],
    rng: &mut R,
) -> Result<(), Error> {
    let dim = params.len();
    let n = obs.yhat.len();
    if n == 0 {
        return Ok(());
    }
    let mu = DVector::from_iterator(dim, params.iter().map(|q| q.mu_a));
    let phi = DVector::from_iterator(dim, params.iter().map(|q| q.phi_a));
    let w = DVector::from_iterator(dim, params.iter().map(|q| q.v_a * q.v_a));

    let mut mf: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut pf: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut m = mu.clone();
    let mut p = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        params.iter().map(|q| q.v_a * q.v_a / (1.0 - q.phi_a * q.phi_a)),
    ));
    for t in 0..n {
        if t > 0 {
            m = &mu + phi.component_mul(&(&m - &mu));
            for r in 0..dim {
                for c in 0..dim {
                    p[(r, c)] *= phi[r] * phi[c];
                }
                p[(r, r)] += w[r];
            }
        }
        let x = &obs.x[t];
        let px = &p * x;
        let s = x.dot(&px) + obs.var[t];
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::FilterBreakdown { row, t });
        }
        let k = &px / s;
        m += &k * (obs.yhat[t] - x.dot(&m));
        p -= &k * px.transpose();
        p = (&p + p.transpose()) * 0.5;
        mf.push(m.clone());
        pf.push(p.clone());
    }

    let draw = |mean: &DVector<f64>, cov: &DMatrix<f64>, scale: f64, rng: &mut R| -> Option<DVector<f64>> {
        let l = robust_chol(cov, scale)?.unpack();
        let zeta = DVector::from_fn(dim, |_, _| standard_normal(rng));
        Some(mean + l * zeta)
    };

    let mut next = draw(&mf[n - 1], &pf[n - 1], pf[n - 1].trace() / dim as f64, rng).ok_or(Error::FilterBreakdown { row, t: n - 1 })?;
    store(a, n - 1, &next);
    for t in (0..n - 1).rev() {
        // α_t | α_{t+1} via the smoother gain G = P_t Φ (Φ P_t Φ + W)^{-1}
        let pt = &pf[t];
        let mut pred = pt.clone();
        for r in 0..dim {
            for c in 0..dim {
                pred[(r, c)] *= phi[r] * phi[c];
            }
            pred[(r, r)] += w[r];
        }
        let chol = robust_chol(&pred, pred.trace() / dim as f64).ok_or(Error::FilterBreakdown { row, t })?;
        // G = P_t Φ pred^{-1}
        let pphi = DMatrix::from_fn(dim, dim, |r, c| pt[(r, c)] * phi[c]);
        let g = chol.solve(&pphi.transpose()).transpose();
        let resid = &next - (&mu + phi.component_mul(&(&mf[t] - &mu)));
        let mean = &mf[t] + &g * resid;
        let mut cov = pt - &g * pphi.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        next = draw(&mean, &cov, pt.trace() / dim as f64, rng).ok_or(Error::FilterBreakdown { row, t })?;
        store(a, t, &next);
    }
    Ok(())
}

fn store(a: &mut [Vec<f64>], t: usize, v: &DVector<f64>) {
    for (j, row) in a.iter_mut().enumerate() {
        row[t] = v[j];
    }
}
