use std::path::{Path, PathBuf};
use std::time::Instant;

use skewmsv::forecast::{backtest, predictive_draws, recursive_forecast};
use skewmsv::geweke::{geweke_joint_test_with, GewekeOptions, Mutation};
use skewmsv::order::order_series;
use skewmsv::portfolio::{var_quantile, Allocation, PortfolioInputs, ALPHAS, MIN_VAR_DRAWS};
use skewmsv::rng::{stream, Block};
use skewmsv::simulate::{generate_dataset, skewness_study, BetaConfig};
use skewmsv::stats::{mean, quantile_sorted, sorted, variance};
use skewmsv::{run_mcmc, ReturnsPanel};

use crate::archive::{archive_info, read_archive, write_archive};
use crate::config::{ForecastMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{load_prices_csv, write_prices_csv, CsvOut};
use crate::manifest::{DataInfo, Manifest};
use crate::store::{fit_info, read_draws, write_draws};

/// Stream index of the optional simulated price panel, outside the range
/// used by study replications.
const PRICE_PANEL_STREAM: u64 = (1 << 40) - 1;

/// Subdirectory of the output directory holding the recursive forecast
/// archive.
pub const ARCHIVE_DIR: &str = "archive";

fn data_path(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.data.as_deref().ok_or_else(|| CliError::Usage("this command needs `data` in the config or --data".into()))
}

/// Loads the price panel and, when `order` is set, reorders its series by
/// posterior skewness. Returns the panel in model order and the ordering.
fn load_panel(cfg: &RunConfig) -> CliResult<(PathBuf, ReturnsPanel, Vec<usize>)> {
    let path = data_path(cfg)?.to_path_buf();
    let panel = load_prices_csv(&path)?;
    let identity: Vec<usize> = (0..panel.k()).collect();
    if !cfg.order {
        return Ok((path, panel, identity));
    }
    let ordering = order_series(&panel, &cfg.model_config(1, &cfg.variant)?)?;
    let panel = panel.permute(&ordering.permutation)?;
    Ok((path, panel, ordering.permutation))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let rows = skewness_study(&cfg.scenarios(), cfg.seed)?;
    let mut w = CsvOut::create(&out.join("skewness.csv"))?;
    w.row(["config", "series", "mean", "q10", "q25", "q75", "q90"])?;
    for r in &rows {
        w.row([
            r.config.clone(),
            r.series.to_string(),
            r.mean.to_string(),
            r.q10.to_string(),
            r.q25.to_string(),
            r.q75.to_string(),
            r.q90.to_string(),
        ])?;
    }
    w.finish()?;

    if let Some(label) = &cfg.sim_prices {
        let truth = cfg.sim_truth(BetaConfig::parse(label)?);
        let d = generate_dataset(&truth, cfg.sim_t, &mut stream(cfg.seed, Block::Simulate, PRICE_PANEL_STREAM))?;
        write_prices_csv(&out.join("prices.csv"), &d.panel, cfg.sim_start_price)?;
    }
    Manifest::new("simulate", cfg, start.elapsed().as_secs_f64()).write(out)
}

pub fn order(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let path = data_path(cfg)?;
    let panel = load_prices_csv(path)?;
    let ordering = order_series(&panel, &cfg.model_config(1, &cfg.variant)?)?;
    let mut w = CsvOut::create(&out.join("order.csv"))?;
    w.row(["rank", "column", "name", "beta_mean"])?;
    for (rank, &i) in ordering.permutation.iter().enumerate() {
        w.row([
            (rank + 1).to_string(),
            (i + 1).to_string(),
            panel.names()[i].clone(),
            ordering.beta_means[i].to_string(),
        ])?;
    }
    w.finish()?;
    let mut m = Manifest::new("order", cfg, start.elapsed().as_secs_f64());
    m.data = Some(DataInfo::new(path, &panel.permute(&ordering.permutation)?, ordering.permutation)?);
    m.write(out)
}

pub fn fit(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let (path, panel, order) = load_panel(cfg)?;
    let draws = run_mcmc(&cfg.model_config(panel.k(), &cfg.variant)?, &panel)?;
    write_draws(out, &draws)?;
    let mut m = Manifest::new("fit", cfg, start.elapsed().as_secs_f64());
    m.data = Some(DataInfo::new(&path, &panel, order)?);
    m.fit = Some(fit_info(&draws));
    m.write(out)
}

pub fn forecast(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    match cfg.forecast_mode().map_err(CliError::Usage)? {
        ForecastMode::Store => forecast_from_store(cfg, out),
        ForecastMode::Recursive => forecast_recursive(cfg, out),
    }
}

/// Predictive summaries from the fit stored in `out`.
fn forecast_from_store(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (_, draws) = read_draws(out)?;
    let set = predictive_draws(&draws, cfg.horizon)?;

    let mut w = CsvOut::create(&out.join("predictive.csv"))?;
    w.row(["horizon", "series", "name", "mean", "sd", "q05", "q50", "q95"])?;
    let mut p = CsvOut::create(&out.join("predictive_portfolio.csv"))?;
    let mut header = vec!["horizon".to_string(), "rule".into(), "mean".into(), "sd".into()];
    header.extend(ALPHAS.iter().map(|a| format!("var_{a}")));
    header.extend(draws.names.iter().map(|n| format!("w_{n}")));
    p.row(&header)?;

    for d in 1..=cfg.horizon {
        let y = set.y_draws(d)?;
        let (mix_mean, mix_cov) = set.mixture_moments(d)?;
        for i in 0..draws.k() {
            let col: Vec<f64> = y.iter().map(|v| v[i]).collect();
            let s = sorted(&col);
            w.row([
                d.to_string(),
                (i + 1).to_string(),
                draws.names[i].clone(),
                mix_mean[i].to_string(),
                mix_cov[(i, i)].sqrt().to_string(),
                quantile_sorted(&s, 0.05).to_string(),
                quantile_sorted(&s, 0.50).to_string(),
                quantile_sorted(&s, 0.95).to_string(),
            ])?;
        }
        // Rules that are degenerate for this forecast are left out.
        let inputs = PortfolioInputs::from_draws(&y)?;
        for rule in Allocation::standard() {
            let Ok(wt) = inputs.weights(rule) else { continue };
            let r: Vec<f64> = y.iter().map(|v| skewmsv::portfolio::portfolio_return(&wt, v)).collect();
            let mut rec = vec![d.to_string(), rule.label(), mean(&r).to_string(), variance(&r).sqrt().to_string()];
            for &a in &ALPHAS {
                // VaR needs enough draws for the tail quantile; short runs leave it blank.
                rec.push(if y.len() >= MIN_VAR_DRAWS { var_quantile(&wt, &y, a)?.to_string() } else { String::new() });
            }
            rec.extend(wt.iter().map(f64::to_string));
            p.row(&rec)?;
        }
    }
    w.finish()?;
    p.finish()
}

fn forecast_recursive(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let (path, panel, order) = load_panel(cfg)?;
    let plan = cfg.plan(panel.t())?;
    let configs = cfg.variants.iter().map(|v| cfg.model_config(panel.k(), v)).collect::<CliResult<Vec<_>>>()?;
    let archive = recursive_forecast(&plan, &configs, &panel)?;
    let dir = out.join(ARCHIVE_DIR);
    write_archive(&dir, &archive, &cfg.baseline)?;
    let mut m = Manifest::new("forecast", cfg, start.elapsed().as_secs_f64());
    m.data = Some(DataInfo::new(&path, &panel, order)?);
    m.archive = Some(archive_info(&archive, &cfg.baseline));
    m.write(&dir)
}

/// Writes `backtest.csv` with one row per model and VaR level, holding the
/// violation count and Kupiec p-value under every allocation rule, and
/// `backtest_long.csv` with one row per model, level and target rule.
pub fn run_backtest(out: &Path) -> CliResult<()> {
    let (_, archive) = read_archive(&out.join(ARCHIVE_DIR))?;
    let rows = backtest(&archive)?;
    let rules: Vec<String> = Allocation::standard().iter().map(Allocation::label).collect();

    let mut w = CsvOut::create(&out.join("backtest_long.csv"))?;
    w.row(["model", "alpha", "target", "days", "violations", "rate", "lr", "p_value"])?;
    for r in &rows {
        let rate = if r.report.days > 0 { r.report.violations as f64 / r.report.days as f64 } else { f64::NAN };
        w.row([
            r.model.clone(),
            r.report.alpha.to_string(),
            r.rule.label(),
            r.report.days.to_string(),
            r.report.violations.to_string(),
            rate.to_string(),
            r.report.lr.to_string(),
            r.report.p_value.to_string(),
        ])?;
    }
    w.finish()?;

    let mut w = CsvOut::create(&out.join("backtest.csv"))?;
    let mut header = vec!["model".to_string(), "alpha".into(), "days".into()];
    header.extend(rules.iter().map(|r| format!("n_{r}")));
    header.extend(rules.iter().map(|r| format!("p_{r}")));
    w.row(&header)?;
    // `backtest` emits rules innermost, so each table row is a run of them.
    for group in rows.chunks(rules.len()) {
        let days = group.iter().map(|r| r.report.days).max().unwrap_or(0);
        let mut rec = vec![group[0].model.clone(), group[0].report.alpha.to_string(), days.to_string()];
        rec.extend(group.iter().map(|r| r.report.violations.to_string()));
        rec.extend(group.iter().map(|r| r.report.p_value.to_string()));
        w.row(&rec)?;
    }
    w.finish()
}

pub fn geweke(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let config = cfg.model_config(cfg.geweke_k, &cfg.geweke_variant)?;
    let opts = GewekeOptions {
        t: cfg.geweke_t,
        n_prior: cfg.geweke_prior_draws,
        burn_in: cfg.geweke_burn_in,
        mutation: cfg.geweke_mutation.then_some(Mutation::SigmaOffByTwo),
    };
    let report = geweke_joint_test_with(&config, cfg.geweke_sweeps, &opts)?;
    let mut w = CsvOut::create(&out.join("geweke.csv"))?;
    w.row(["name", "ks", "p_value", "ess"])?;
    for r in &report.rows {
        w.row([r.name.clone(), r.ks.to_string(), r.p_value.to_string(), r.ess.to_string()])?;
    }
    w.finish()?;
    Manifest::new("geweke-test", cfg, start.elapsed().as_secs_f64()).write(out)
}
