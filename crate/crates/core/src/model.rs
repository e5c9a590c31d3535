//! Model types and the Cholesky algebra tying structural shocks, log
//! variances, covariance states and observed returns together.
//!
//! Covariance states are the strictly lower-triangular entries of `A_t`
//! stacked by rows: for `k = 4` the order is `a21, a31, a32, a41, a42, a43`.
//! With zero-based series indices, entry `(i, j)`, `i > j`, lives at
//! [`state_index`]`(i, j) = i(i-1)/2 + j`, and `A_t[(i, j)] = -a`.

use crate::distributions::mixing_mean;
use crate::engine::McmcSettings;
use crate::error::{Error, Result};
use crate::prelude::*;
use crate::priors::PriorSet;
use nalgebra::DMatrix;

/// Log-variances are clamped to this range before exponentiation.
pub const H_CLAMP: f64 = 40.0;

#[inline]
pub fn clamp_h(h: f64) -> f64 {
    h.clamp(-H_CLAMP, H_CLAMP)
}

/// The five model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Skew t, no sparsity (κ ≡ 1), no correlation (A ≡ I).
    S,
    /// Skew t with sparsity, no correlation.
    SS,
    /// Symmetric t (β ≡ 0) with correlation.
    C,
    /// Skew t, no sparsity, with correlation.
    CS,
    /// Skew t with sparsity and correlation.
    CSS,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::S, Variant::SS, Variant::C, Variant::CS, Variant::CSS];

    pub fn correlated(self) -> bool {
        matches!(self, Variant::C | Variant::CS | Variant::CSS)
    }

    pub fn skewed(self) -> bool {
        !matches!(self, Variant::C)
    }

    pub fn sparse(self) -> bool {
        matches!(self, Variant::SS | Variant::CSS)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::S => "S",
            Variant::SS => "SS",
            Variant::C => "C",
            Variant::CS => "CS",
            Variant::CSS => "CSS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(alloc::format!("unknown model variant `{s}`")))
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub k: usize,
    pub variant: Variant,
    pub priors: PriorSet,
    pub mcmc: McmcSettings,
}

impl ModelConfig {
    pub fn new(k: usize, variant: Variant, priors: PriorSet, mcmc: McmcSettings) -> Result<Self> {
        let cfg = Self { k, variant, priors, mcmc };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.priors.validate()?;
        self.mcmc.validate()
    }

    /// Number of covariance states, `k(k-1)/2`.
    pub fn p(&self) -> usize {
        n_states(self.k)
    }
}

pub fn n_states(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Stacked position of `A[(i, j)]`, `i > j`, zero-based.
pub fn state_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Inverse of [`state_index`].
pub fn state_row_col(idx: usize) -> (usize, usize) {
    let mut i = 1;
    while (i + 1) * i / 2 <= idx {
        i += 1;
    }
    (i, idx - i * (i - 1) / 2)
}

/// Series count implied by a stacked state vector length.
pub fn k_from_p(p: usize) -> Result<usize> {
    let mut k = 1;
    while n_states(k) < p {
        k += 1;
    }
    if n_states(k) == p {
        Ok(k)
    } else {
        Err(Error::Dimension(alloc::format!("{p} is not a triangular number k(k-1)/2")))
    }
}

/// Per-series stochastic volatility hyper-parameters and skewness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
    pub rho: f64,
    pub nu: f64,
    pub beta: f64,
    pub included: bool,
}

impl SeriesParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu.is_finite()
            && self.phi.abs() < 1.0
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && self.rho.abs() < 1.0
            && self.nu > 4.0
            && self.nu.is_finite()
            && self.beta.is_finite()
            && (self.included || self.beta == 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!("series parameters out of support: {self:?}")))
        }
    }

    pub fn c(&self) -> f64 {
        mixing_mean(self.nu)
    }
}

/// AR(1) hyper-parameters of one covariance state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovParams {
    pub mu_a: f64,
    pub phi_a: f64,
    pub v_a: f64,
}

impl CovParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu_a.is_finite() && self.phi_a.abs() < 1.0 && self.v_a > 0.0 && self.v_a.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!("covariance parameters out of support: {self:?}")))
        }
    }
}

/// Sparsity probability κ of a non-zero skewness parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityState {
    kappa: f64,
}

impl SparsityState {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa < 1.0 {
            Ok(Self { kappa })
        } else {
            Err(Error::invalid(alloc::format!("kappa must lie in (0, 1), got {kappa}")))
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Latent paths, stored series-major: `h[i][t]`, `z[i][t]`, `a[j][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStates {
    pub h: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl LatentStates {
    pub fn new(h: Vec<Vec<f64>>, z: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self { h, z, a };
        s.validate()?;
        Ok(s)
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn t(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (k, t) = (self.k(), self.t());
        if self.z.len() != k || self.a.len() != n_states(k) {
            return Err(Error::Dimension(alloc::format!(
                "states hold {} h rows, {} z rows, {} a rows",
                k,
                self.z.len(),
                self.a.len()
            )));
        }
        if self.h.iter().chain(&self.z).chain(&self.a).any(|row| row.len() != t) {
            return Err(Error::Dimension("state paths have unequal lengths".into()));
        }
        if self.z.iter().flatten().any(|z| !(*z > 0.0)) {
            return Err(Error::invalid("mixing states must be strictly positive"));
        }
        Ok(())
    }

    /// Column of covariance states at time `t`.
    pub fn a_at(&self, t: usize) -> Vec<f64> {
        self.a.iter().map(|row| row[t]).collect()
    }

    pub fn h_at(&self, t: usize) -> Vec<f64> {
        self.h.iter().map(|row| row[t]).collect()
    }
}

/// Unit lower-triangular `A_t` with `-a` below the diagonal.
pub fn build_a(a_t: &[f64]) -> Result<DMatrix<f64>> {
    let k = k_from_p(a_t.len())?;
    let mut m = DMatrix::identity(k, k);
    for i in 1..k {
        for j in 0..i {
            m[(i, j)] = -a_t[state_index(i, j)];
        }
    }
    Ok(m)
}

/// `A_t^{-1}` by forward substitution on the unit lower-triangular system.
pub fn a_inverse(a_t: &[f64]) -> Result<DMatrix<f64>> {
    let k = k_from_p(a_t.len())?;
    let mut inv = DMatrix::identity(k, k);
    // column c of the inverse solves A x = e_c
    for c in 0..k {
        for i in (c + 1)..k {
            let mut s = 0.0;
            for j in c..i {
                s += a_t[state_index(i, j)] * inv[(j, c)];
            }
            inv[(i, c)] = s;
        }
    }
    Ok(inv)
}

/// `Σ_t = A_t^{-1} diag(exp h_t) A_t^{-T}`.
pub fn sigma_t(a_t: &[f64], h_t: &[f64]) -> Result<DMatrix<f64>> {
    let l = scale_factor(a_t, h_t, None)?;
    Ok(&l * l.transpose())
}

/// Lower-triangular factor `A^{-1} Λ diag(sqrt z)`; with `z = None` the
/// mixing scale is one. Its product with its transpose is the conditional
/// covariance, and it already is the Cholesky factor of that matrix.
pub fn scale_factor(a_t: &[f64], h_t: &[f64], z_t: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let mut l = a_inverse(a_t)?;
    let k = l.nrows();
    if h_t.len() != k || z_t.is_some_and(|z| z.len() != k) {
        return Err(Error::Dimension(alloc::format!(
            "{k} series implied by covariance states, got {} log variances",
            h_t.len()
        )));
    }
    for (j, &h) in h_t.iter().enumerate() {
        if !h.is_finite() {
            return Err(Error::Overflow(alloc::format!("log variance {h} for series {j}")));
        }
        let mut s = (0.5 * clamp_h(h)).exp();
        if let Some(z) = z_t {
            s *= z[j].sqrt();
        }
        for i in j..k {
            l[(i, j)] *= s;
        }
    }
    Ok(l)
}

/// `ỹ_t = A_t y_t`.
pub fn structural_transform(y_t: &[f64], a_t: &[f64]) -> Result<Vec<f64>> {
    let k = y_t.len();
    if n_states(k) != a_t.len() {
        return Err(Error::Dimension(alloc::format!(
            "{k} returns but {} covariance states",
            a_t.len()
        )));
    }
    Ok((0..k)
        .map(|i| y_t[i] - (0..i).map(|j| a_t[state_index(i, j)] * y_t[j]).sum::<f64>())
        .collect())
}

/// Solves `A_t y_t = ỹ_t`.
pub fn inverse_structural_transform(ytil_t: &[f64], a_t: &[f64]) -> Result<Vec<f64>> {
    let k = ytil_t.len();
    if n_states(k) != a_t.len() {
        return Err(Error::Dimension(alloc::format!(
            "{k} structural returns but {} covariance states",
            a_t.len()
        )));
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = ytil_t[i] + (0..i).map(|j| a_t[state_index(i, j)] * y[j]).sum::<f64>();
    }
    Ok(y)
}
