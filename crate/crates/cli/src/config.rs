//! Run configuration: one flat TOML table whose keys are listed on
//! [`RunConfig`]. Unknown keys are rejected; omitted keys take the defaults
//! shown there.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewmsv::forecast::ForecastPlan;
use skewmsv::priors::{BetaPrior, GammaPrior, NormalPrior, ShiftedBeta};
use skewmsv::simulate::{BetaConfig, CovTruth, SeriesTruth, SimScenario, Truth};
use skewmsv::{McmcSettings, ModelConfig, PriorSet, Variant};

use crate::error::{CliError, CliResult};

/// Every key of a run configuration.
///
/// | key | default | used by |
/// |---|---|---|
/// | `data` | none | order, fit, forecast (recursive) |
/// | `variant` | `"CSS"` | fit |
/// | `order` | `false` | fit, forecast: reorder series by univariate skewness first |
/// | `seed` | `1` | all; `--seed` overrides |
/// | `burn_in`, `draws`, `thin` | `5000`, `50000`, `1` | MCMC runs |
/// | `state_thin`, `block_len` | `5`, `40` | MCMC runs |
/// | `prior` | `"baseline"` | preset: `baseline`, `prior1`, `prior2`, `prior3` |
/// | `prior_*` | preset value | single hyper-parameter overrides, see below |
/// | `forecast_mode` | `"store"` | `store`: predict from the fit in `--out`; `recursive`: refit schedule |
/// | `horizon` | `5` | forecast: days ahead |
/// | `variants` | all five | forecast (recursive) |
/// | `baseline` | `"S"` | forecast (recursive): denominator of the density ratios |
/// | `forecast_initial`, `forecast_step`, `forecast_refits` | none, `5`, none | forecast (recursive) |
/// | `sim_configs` | `["i","ii","iii","iv"]` | simulate |
/// | `sim_k`, `sim_t`, `sim_replications` | `5`, `1000`, `1000` | simulate |
/// | `sim_mu`, `sim_phi`, `sim_sigma`, `sim_rho`, `sim_nu`, `sim_a` | `-9`, `0.995`, `0.05`, `-0.5`, `20`, `0.5` | simulate |
/// | `sim_prices` | none | simulate: also write one price panel under this β configuration |
/// | `sim_start_price` | `100` | simulate |
/// | `geweke_variant`, `geweke_k`, `geweke_t` | `"CSS"`, `2`, `30` | geweke-test |
/// | `geweke_sweeps`, `geweke_prior_draws`, `geweke_burn_in` | `100000`, `20000`, `2000` | geweke-test |
/// | `geweke_mutation` | `false` | geweke-test: run the deliberately corrupted sampler |
///
/// Prior overrides: `prior_phi_a`, `prior_phi_b`, `prior_mu_mean`,
/// `prior_mu_var`, `prior_sigma_shape`, `prior_sigma_rate`, `prior_rho_a`,
/// `prior_rho_b`, `prior_nu_shape`, `prior_nu_rate`, `prior_beta_mean`,
/// `prior_beta_var`, `prior_kappa_a`, `prior_kappa_b`, `prior_phia_a`,
/// `prior_phia_b`, `prior_mua_mean`, `prior_mua_var`, `prior_va_shape`,
/// `prior_va_rate`. The `sigma` and `va` gamma priors are on the precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub variant: String,
    pub order: bool,
    pub seed: u64,
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    pub state_thin: usize,
    pub block_len: usize,

    pub prior: String,
    #[serde(flatten)]
    pub prior_overrides: PriorOverrides,

    pub forecast_mode: String,
    pub horizon: usize,
    pub variants: Vec<String>,
    pub baseline: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast_initial: Option<usize>,
    pub forecast_step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast_refits: Option<usize>,

    pub sim_configs: Vec<String>,
    pub sim_k: usize,
    pub sim_t: usize,
    pub sim_replications: usize,
    pub sim_mu: f64,
    pub sim_phi: f64,
    pub sim_sigma: f64,
    pub sim_rho: f64,
    pub sim_nu: f64,
    pub sim_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_prices: Option<String>,
    pub sim_start_price: f64,

    pub geweke_variant: String,
    pub geweke_k: usize,
    pub geweke_t: usize,
    pub geweke_sweeps: usize,
    pub geweke_prior_draws: usize,
    pub geweke_burn_in: usize,
    pub geweke_mutation: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_phi_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_phi_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mu_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mu_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_sigma_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_sigma_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_rho_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_rho_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_nu_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_nu_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_beta_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_beta_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_kappa_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_kappa_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_phia_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_phia_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mua_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mua_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_va_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_va_rate: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mcmc = McmcSettings::default();
        Self {
            data: None,
            variant: "CSS".into(),
            order: false,
            seed: mcmc.seed,
            burn_in: mcmc.burn_in,
            draws: mcmc.draws,
            thin: mcmc.thin,
            state_thin: mcmc.state_thin,
            block_len: mcmc.block_len,
            prior: "baseline".into(),
            prior_overrides: PriorOverrides::default(),
            forecast_mode: "store".into(),
            horizon: 5,
            variants: ["S", "SS", "C", "CS", "CSS"].map(String::from).to_vec(),
            baseline: "S".into(),
            forecast_initial: None,
            forecast_step: 5,
            forecast_refits: None,
            sim_configs: ["i", "ii", "iii", "iv"].map(String::from).to_vec(),
            sim_k: 5,
            sim_t: 1000,
            sim_replications: 1000,
            sim_mu: -9.0,
            sim_phi: 0.995,
            sim_sigma: 0.05,
            sim_rho: -0.5,
            sim_nu: 20.0,
            sim_a: 0.5,
            sim_prices: None,
            sim_start_price: 100.0,
            geweke_variant: "CSS".into(),
            geweke_k: 2,
            geweke_t: 30,
            geweke_sweeps: 100_000,
            geweke_prior_draws: 20_000,
            geweke_burn_in: 2_000,
            geweke_mutation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastMode {
    Store,
    Recursive,
}

impl RunConfig {
    /// Parses and validates a config file. A relative `data` path is taken
    /// relative to the config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|message| CliError::Config { path: path.into(), message })?;
        if let (Some(d), Some(dir)) = (&cfg.data, path.parent()) {
            if d.is_relative() {
                cfg.data = Some(dir.join(d));
            }
        }
        cfg.validate().map_err(|message| CliError::Config { path: path.into(), message })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Canonical TOML rendering; the config hash is taken over it.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> String {
        crate::manifest::hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let err = |e: skewmsv::Error| e.to_string();
        Variant::parse(&self.variant).map_err(err)?;
        Variant::parse(&self.geweke_variant).map_err(err)?;
        Variant::parse(&self.baseline).map_err(err)?;
        if self.variants.is_empty() {
            return Err("`variants` must list at least one model".into());
        }
        for v in &self.variants {
            Variant::parse(v).map_err(err)?;
        }
        self.mcmc().validate().map_err(err)?;
        self.priors()?.validate().map_err(err)?;
        self.forecast_mode()?;
        if self.horizon == 0 {
            return Err("`horizon` must be at least 1".into());
        }
        for c in &self.sim_configs {
            BetaConfig::parse(c).map_err(err)?;
        }
        if let Some(c) = &self.sim_prices {
            BetaConfig::parse(c).map_err(err)?;
        }
        if self.sim_k == 0 || self.sim_t < 3 || self.sim_replications == 0 {
            return Err("`sim_k`, `sim_replications` must be positive and `sim_t` at least 3".into());
        }
        if !(self.sim_start_price > 0.0 && self.sim_start_price.is_finite()) {
            return Err("`sim_start_price` must be positive".into());
        }
        self.sim_truth(BetaConfig::I).validate().map_err(err)?;
        Ok(())
    }

    pub fn forecast_mode(&self) -> Result<ForecastMode, String> {
        match self.forecast_mode.as_str() {
            "store" => Ok(ForecastMode::Store),
            "recursive" => Ok(ForecastMode::Recursive),
            other => Err(format!("`forecast_mode` must be `store` or `recursive`, got `{other}`")),
        }
    }

    pub fn mcmc(&self) -> McmcSettings {
        McmcSettings {
            burn_in: self.burn_in,
            draws: self.draws,
            thin: self.thin,
            seed: self.seed,
            state_thin: self.state_thin,
            block_len: self.block_len,
        }
    }

    pub fn priors(&self) -> Result<PriorSet, String> {
        let mut p = PriorSet::preset(&self.prior).map_err(|e| e.to_string())?;
        let o = &self.prior_overrides;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        let ShiftedBeta { a, b } = &mut p.phi;
        set(a, o.prior_phi_a);
        set(b, o.prior_phi_b);
        let NormalPrior { mean, var } = &mut p.mu;
        set(mean, o.prior_mu_mean);
        set(var, o.prior_mu_var);
        let GammaPrior { shape, rate } = &mut p.sigma_prec;
        set(shape, o.prior_sigma_shape);
        set(rate, o.prior_sigma_rate);
        let ShiftedBeta { a, b } = &mut p.rho;
        set(a, o.prior_rho_a);
        set(b, o.prior_rho_b);
        let GammaPrior { shape, rate } = &mut p.nu;
        set(shape, o.prior_nu_shape);
        set(rate, o.prior_nu_rate);
        let NormalPrior { mean, var } = &mut p.beta_slab;
        set(mean, o.prior_beta_mean);
        set(var, o.prior_beta_var);
        let BetaPrior { a, b } = &mut p.kappa;
        set(a, o.prior_kappa_a);
        set(b, o.prior_kappa_b);
        let ShiftedBeta { a, b } = &mut p.phi_a;
        set(a, o.prior_phia_a);
        set(b, o.prior_phia_b);
        let NormalPrior { mean, var } = &mut p.mu_a;
        set(mean, o.prior_mua_mean);
        set(var, o.prior_mua_var);
        let GammaPrior { shape, rate } = &mut p.va_prec;
        set(shape, o.prior_va_shape);
        set(rate, o.prior_va_rate);
        Ok(p)
    }

    pub fn model_config(&self, k: usize, variant: &str) -> CliResult<ModelConfig> {
        let variant = Variant::parse(variant)?;
        let priors = self.priors().map_err(CliError::Usage)?;
        Ok(ModelConfig::new(k, variant, priors, self.mcmc())?)
    }

    pub fn plan(&self, t_data: usize) -> CliResult<ForecastPlan> {
        let missing = |key: &str| CliError::Usage(format!("recursive forecasting needs `{key}` in the config"));
        let plan = ForecastPlan {
            initial: self.forecast_initial.ok_or_else(|| missing("forecast_initial"))?,
            step: self.forecast_step,
            refits: self.forecast_refits.ok_or_else(|| missing("forecast_refits"))?,
            d_max: self.horizon,
        };
        plan.validate(t_data)?;
        Ok(plan)
    }

    pub fn sim_truth(&self, config: BetaConfig) -> Truth {
        let series = config
            .betas(self.sim_k)
            .into_iter()
            .map(|beta| SeriesTruth {
                mu: self.sim_mu,
                phi: self.sim_phi,
                sigma: self.sim_sigma,
                rho: self.sim_rho,
                nu: self.sim_nu,
                beta,
            })
            .collect();
        let p = self.sim_k * (self.sim_k - 1) / 2;
        Truth { series, cov: vec![CovTruth { mu_a: self.sim_a, phi_a: 0.0, v_a: 0.0 }; p] }
    }

    pub fn scenarios(&self) -> Vec<SimScenario> {
        self.sim_configs
            .iter()
            .map(|c| {
                let config = BetaConfig::parse(c).expect("validated");
                SimScenario {
                    label: config.label().into(),
                    t: self.sim_t,
                    truth: self.sim_truth(config),
                    replications: self.sim_replications,
                }
            })
            .collect()
    }
}
