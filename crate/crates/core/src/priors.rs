//! Prior families and prior sets.
//!
//! Gamma priors are parameterized by shape and rate. Normal priors carry a
//! mean and a variance.

use crate::distributions::{sample_beta, sample_gamma, sample_truncated_gamma, standard_normal};
use crate::error::{Error, Result};
use crate::model::{CovParams, SeriesParams, SparsityState, Variant};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use crate::stats::{beta_ln_pdf, gamma_ln_pdf, normal_ln_pdf};
use rand::Rng;

/// Beta prior on `(x + 1) / 2` for `x ∈ (-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedBeta {
    pub a: f64,
    pub b: f64,
}

impl ShiftedBeta {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        beta_ln_pdf(0.5 * (x + 1.0), self.a, self.b) - core::f64::consts::LN_2
    }

    pub fn mean(&self) -> f64 {
        2.0 * self.a / (self.a + self.b) - 1.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = sample_beta(self.a, self.b, rng).expect("validated beta prior");
        // keep strictly inside the open interval
        (2.0 * u - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.mean, self.var)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.var.sqrt() * standard_normal(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        gamma_ln_pdf(x, self.shape, self.rate)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_gamma(self.shape, self.rate, rng).expect("validated gamma prior")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_beta(self.a, self.b, rng).expect("validated beta prior")
    }
}

/// Lower truncation point of the degrees-of-freedom prior.
pub const NU_MIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSet {
    pub phi: ShiftedBeta,
    pub mu: NormalPrior,
    /// Prior on `σ^{-2}`.
    pub sigma_prec: GammaPrior,
    pub rho: ShiftedBeta,
    /// Gamma prior on `ν`, truncated to `ν > 4`.
    pub nu: GammaPrior,
    /// Slab of the spike-and-slab prior on `β`.
    pub beta_slab: NormalPrior,
    pub kappa: BetaPrior,
    pub phi_a: ShiftedBeta,
    pub mu_a: NormalPrior,
    /// Prior on `v_a^{-2}`.
    pub va_prec: GammaPrior,
}

impl Default for PriorSet {
    fn default() -> Self {
        Self::baseline()
    }
}

impl PriorSet {
    pub fn baseline() -> Self {
        Self {
            phi: ShiftedBeta { a: 20.0, b: 1.5 },
            mu: NormalPrior { mean: -10.0, var: 1.0 },
            sigma_prec: GammaPrior { shape: 20.0, rate: 0.01 },
            rho: ShiftedBeta { a: 1.0, b: 1.0 },
            nu: GammaPrior { shape: 16.0, rate: 0.8 },
            beta_slab: NormalPrior { mean: 0.0, var: 10.0 },
            kappa: BetaPrior { a: 2.0, b: 2.0 },
            phi_a: ShiftedBeta { a: 20.0, b: 1.5 },
            mu_a: NormalPrior { mean: 0.0, var: 1.0 },
            va_prec: GammaPrior { shape: 20.0, rate: 0.01 },
        }
    }

    /// Sensitivity presets: `baseline`, `prior1` (κ ~ B(2, 8)), `prior2`
    /// (slab N(-1, 2)) and `prior3` (ν ~ G(24, 0.6) truncated to ν > 4).
    pub fn preset(name: &str) -> Result<Self> {
        let mut p = Self::baseline();
        match name.trim().to_ascii_lowercase().as_str() {
            "baseline" => {}
            "prior1" => p.kappa = BetaPrior { a: 2.0, b: 8.0 },
            "prior2" => p.beta_slab = NormalPrior { mean: -1.0, var: 2.0 },
            "prior3" => p.nu = GammaPrior { shape: 24.0, rate: 0.6 },
            other => return Err(Error::invalid(alloc::format!("unknown prior preset `{other}`"))),
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("phi.a", self.phi.a),
            ("phi.b", self.phi.b),
            ("mu.var", self.mu.var),
            ("sigma_prec.shape", self.sigma_prec.shape),
            ("sigma_prec.rate", self.sigma_prec.rate),
            ("rho.a", self.rho.a),
            ("rho.b", self.rho.b),
            ("nu.shape", self.nu.shape),
            ("nu.rate", self.nu.rate),
            ("beta_slab.var", self.beta_slab.var),
            ("kappa.a", self.kappa.a),
            ("kappa.b", self.kappa.b),
            ("phi_a.a", self.phi_a.a),
            ("phi_a.b", self.phi_a.b),
            ("mu_a.var", self.mu_a.var),
            ("va_prec.shape", self.va_prec.shape),
            ("va_prec.rate", self.va_prec.rate),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!("prior hyper-parameter {name} must be positive, got {v}")));
            }
        }
        let locs = [self.mu.mean, self.beta_slab.mean, self.mu_a.mean];
        if locs.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("prior means must be finite"));
        }
        Ok(())
    }

    /// `ln p(ν)` up to the truncation constant.
    pub fn nu_ln_pdf(&self, nu: f64) -> f64 {
        if nu <= NU_MIN {
            f64::NEG_INFINITY
        } else {
            self.nu.ln_pdf(nu)
        }
    }

    /// `ln p(σ)` induced by the gamma prior on `σ^{-2}`.
    pub fn sigma_ln_pdf(&self, sigma: f64) -> f64 {
        prec_scale_ln_pdf(&self.sigma_prec, sigma)
    }

    pub fn va_ln_pdf(&self, v: f64) -> f64 {
        prec_scale_ln_pdf(&self.va_prec, v)
    }

    /// Mean of the truncated `ν` prior, by quadrature on the gamma density.
    pub fn nu_mean(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        let hi = self.nu.mean() + 30.0 * self.nu.shape.sqrt() / self.nu.rate;
        let n = 20_000;
        let dx = (hi - NU_MIN) / n as f64;
        for j in 0..n {
            let x = NU_MIN + (j as f64 + 0.5) * dx;
            let w = self.nu.ln_pdf(x).exp();
            num += x * w;
            den += w;
        }
        num / den
    }

    /// Starting values at prior centers.
    pub fn center_series(&self, variant: Variant) -> SeriesParams {
        SeriesParams {
            mu: self.mu.mean,
            phi: self.phi.mean(),
            sigma: self.sigma_prec.mean().recip().sqrt(),
            rho: self.rho.mean(),
            nu: self.nu_mean(),
            beta: 0.0,
            included: variant.skewed(),
        }
    }

    pub fn center_cov(&self) -> CovParams {
        CovParams {
            mu_a: self.mu_a.mean,
            phi_a: self.phi_a.mean(),
            v_a: self.va_prec.mean().recip().sqrt(),
        }
    }

    /// One joint draw of `θ_i` and `β_i` given the sparsity level.
    pub fn sample_series<R: Rng + ?Sized>(&self, variant: Variant, kappa: f64, rng: &mut R) -> SeriesParams {
        let mu = self.mu.sample(rng);
        let phi = self.phi.sample(rng);
        let sigma = self.sigma_prec.sample(rng).recip().sqrt();
        let rho = self.rho.sample(rng);
        let nu = sample_truncated_gamma(self.nu.shape, self.nu.rate, NU_MIN, rng).expect("validated nu prior");
        let included = variant.skewed() && (!variant.sparse() || rng.random::<f64>() < kappa);
        let beta = if included { self.beta_slab.sample(rng) } else { 0.0 };
        SeriesParams { mu, phi, sigma, rho, nu, beta, included }
    }

    pub fn sample_cov<R: Rng + ?Sized>(&self, rng: &mut R) -> CovParams {
        CovParams {
            mu_a: self.mu_a.sample(rng),
            phi_a: self.phi_a.sample(rng),
            v_a: self.va_prec.sample(rng).recip().sqrt(),
        }
    }

    pub fn sample_kappa<R: Rng + ?Sized>(&self, rng: &mut R) -> SparsityState {
        let k = self.kappa.sample(rng).clamp(1e-12, 1.0 - 1e-12);
        SparsityState::new(k).expect("clamped into (0, 1)")
    }
}

/// Density of `s` when `s^{-2} ~ Gamma(shape, rate)`:
/// `p(s) = g(s^{-2}) · 2 s^{-3}`.
fn prec_scale_ln_pdf(g: &GammaPrior, s: f64) -> f64 {
    if s <= 0.0 {
        return f64::NEG_INFINITY;
    }
    g.ln_pdf(s.powi(-2)) + core::f64::consts::LN_2 - 3.0 * s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Block};
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_differ_only_where_stated() {
        let b = PriorSet::baseline();
        let p1 = PriorSet::preset("prior1").unwrap();
        assert_eq!(p1.kappa, BetaPrior { a: 2.0, b: 8.0 });
        assert_eq!(PriorSet { kappa: b.kappa, ..p1 }, b);
        let p2 = PriorSet::preset("Prior2").unwrap();
        assert_eq!(p2.beta_slab, NormalPrior { mean: -1.0, var: 2.0 });
        let p3 = PriorSet::preset("prior3").unwrap();
        assert_eq!(p3.nu, GammaPrior { shape: 24.0, rate: 0.6 });
        assert!(PriorSet::preset("prior4").is_err());
    }

    #[test]
    fn baseline_centers() {
        let p = PriorSet::baseline();
        assert_abs_diff_eq!(p.phi.mean(), 2.0 * 20.0 / 21.5 - 1.0);
        assert_abs_diff_eq!(p.sigma_prec.mean(), 2000.0);
        // truncation at 4 is far in the left tail of G(16, 0.8)
        assert_abs_diff_eq!(p.nu_mean(), 20.0, epsilon = 1e-3);
        assert!(p.validate().is_ok());
        let bad = PriorSet { mu: NormalPrior { mean: 0.0, var: 0.0 }, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scale_density_normalizes() {
        let p = PriorSet::baseline();
        let n = 100_000;
        let (lo, hi) = (0.005, 0.08);
        let dx = (hi - lo) / n as f64;
        let s: f64 = (0..n).map(|j| p.sigma_ln_pdf(lo + (j as f64 + 0.5) * dx).exp() * dx).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn prior_draws_respect_variant() {
        let p = PriorSet::baseline();
        let mut rng = stream(1, Block::Prior, 0);
        for _ in 0..200 {
            let s = p.sample_series(Variant::C, 0.5, &mut rng);
            assert!(!s.included && s.beta == 0.0);
            assert!(s.validate().is_ok());
            let s = p.sample_series(Variant::CS, 0.0, &mut rng);
            assert!(s.included);
        }
    }
}
