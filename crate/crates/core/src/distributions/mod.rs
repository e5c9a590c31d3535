//! Random variates and densities used by the model.

mod gig;

pub use gig::{sample_gig, GigParams};

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::stats::LN_2PI;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma draw, shape/rate parameterization.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "gamma requires finite positive shape and rate, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Inverse gamma draw with density `∝ x^(-shape-1) exp(-scale/x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "inverse gamma requires finite positive shape and scale, got ({shape}, {scale})"
        )));
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    loop {
        let x: f64 = g.sample(rng);
        if x > 0.0 {
            return Ok(scale / x);
        }
    }
}

/// Gamma(shape, rate) restricted to `x > lower`.
///
/// Plain rejection while the truncation point sits below the mode; beyond
/// the mode, a shifted exponential proposal with rate `rate - (shape-1)/lower`
/// dominates the tail.
pub fn sample_truncated_gamma<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    lower: f64,
    rng: &mut R,
) -> Result<f64> {
    let mode = if shape > 1.0 { (shape - 1.0) / rate } else { 0.0 };
    if lower <= mode || lower <= 0.0 {
        loop {
            let x = sample_gamma(shape, rate, rng)?;
            if x > lower {
                return Ok(x);
            }
        }
    }
    let tilt = rate - (shape - 1.0).max(0.0) / lower;
    loop {
        let e: f64 = -rng.random::<f64>().ln() / tilt;
        let x = lower + e;
        let ln_accept = (shape - 1.0) * (x / lower).ln() - (rate - tilt) * e;
        if rng.random::<f64>().ln() <= ln_accept {
            return Ok(x);
        }
    }
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(d.sample(rng))
}

/// Parameters of the GH skew-t mixture `w = m + βz + sqrt(z) ε`,
/// `z ~ IG(ν/2, ν/2)`, `m = -βc`, `c = E z = ν/(ν-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhSkewTParams {
    beta: f64,
    nu: f64,
}

impl GhSkewTParams {
    /// `nu > 4` keeps the variance finite.
    pub fn new(beta: f64, nu: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::invalid("skewness beta must be finite"));
        }
        if !(nu > 4.0) || !nu.is_finite() {
            return Err(Error::invalid(alloc::format!("degrees of freedom must satisfy nu > 4, got {nu}")));
        }
        Ok(Self { beta, nu })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Mean of the mixing variable.
    pub fn c(&self) -> f64 {
        mixing_mean(self.nu)
    }

    /// Location offset that centers the mixture at zero.
    pub fn m(&self) -> f64 {
        -self.beta * self.c()
    }

    /// `Var w = β² Var z + E z`.
    pub fn variance(&self) -> f64 {
        let c = self.c();
        let var_z = c * c / (0.5 * self.nu - 2.0);
        self.beta * self.beta * var_z + c
    }

    /// `E (w - Ew)³ = β³ μ₃(z) + 3β Var z`; finite for `ν > 6`.
    pub fn third_central_moment(&self) -> Option<f64> {
        if self.nu <= 6.0 {
            return None;
        }
        let a = 0.5 * self.nu;
        let c = self.c();
        let var_z = c * c / (a - 2.0);
        let mu3_z = 4.0 * a * a * a / ((a - 1.0).powi(3) * (a - 2.0) * (a - 3.0));
        Some(self.beta.powi(3) * mu3_z + 3.0 * self.beta * var_z)
    }

    pub fn skewness(&self) -> Option<f64> {
        self.third_central_moment()
            .map(|m3| m3 / self.variance().powf(1.5))
    }
}

/// `c = ν / (ν - 2)`.
pub fn mixing_mean(nu: f64) -> f64 {
    nu / (nu - 2.0)
}

pub fn skewt_draw<R: Rng + ?Sized>(p: &GhSkewTParams, rng: &mut R) -> f64 {
    let z = sample_inverse_gamma(0.5 * p.nu, 0.5 * p.nu, rng).expect("nu > 4");
    p.m() + p.beta * z + z.sqrt() * standard_normal(rng)
}

/// Exact multivariate normal log density through a Cholesky factorization.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let k = x.len();
    if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
        return Err(Error::Dimension(alloc::format!(
            "x has length {k}, mean {}, cov {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("covariance in mvn_logpdf".into()))?;
    let l = chol.l();
    Ok(mvn_logpdf_chol(x.as_slice(), mean.as_slice(), &l))
}

/// Log density given the lower Cholesky factor of the covariance.
pub fn mvn_logpdf_chol(x: &[f64], mean: &[f64], l: &DMatrix<f64>) -> f64 {
    let k = x.len();
    let mut v: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut log_det = 0.0;
    for i in 0..k {
        let mut s = v[i];
        for j in 0..i {
            s -= l[(i, j)] * v[j];
        }
        v[i] = s / l[(i, i)];
        log_det += l[(i, i)].ln();
    }
    let quad: f64 = v.iter().map(|e| e * e).sum();
    -0.5 * (k as f64 * LN_2PI + quad) - log_det
}
