//! Forecast archive on disk: one directory with `days.csv` (realized
//! returns per forecast day), `records.csv` (log predictive densities),
//! `portfolios.csv`, `refits.csv`, `lpdr.csv` and `manifest.toml`. Missing
//! evaluations are absent rows, not sentinel values.

use std::path::Path;

use skewmsv::forecast::{ForecastArchive, ForecastPlan, ForecastRecord, ModelForecast, PortfolioOutcome, RefitSummary};
use skewmsv::portfolio::{Allocation, ALPHAS};

use crate::error::{CliError, CliResult};
use crate::io::{CsvOut, CsvTable};
use crate::manifest::{ArchiveInfo, Manifest};

fn var_col(alpha: f64) -> String {
    format!("var_{alpha}")
}

pub fn archive_info(a: &ForecastArchive, baseline: &str) -> ArchiveInfo {
    ArchiveInfo {
        models: a.models.clone(),
        baseline: baseline.into(),
        initial: a.plan.initial,
        step: a.plan.step,
        refits: a.plan.refits,
        d_max: a.plan.d_max,
    }
}

pub fn write_archive(dir: &Path, a: &ForecastArchive, baseline: &str) -> CliResult<()> {
    let k = a.names.len();

    let mut w = CsvOut::create(&dir.join("days.csv"))?;
    let mut header = vec!["refit".to_string(), "origin".into(), "horizon".into(), "date".into()];
    header.extend(a.names.iter().cloned());
    w.row(&header)?;
    for r in &a.records {
        let mut rec = vec![r.refit.to_string(), r.origin.to_string(), r.horizon.to_string(), r.date.clone()];
        rec.extend(r.realized.iter().map(f64::to_string));
        w.row(&rec)?;
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("records.csv"))?;
    w.row(["refit", "horizon", "date", "model", "logdensity"])?;
    for r in &a.records {
        for (m, f) in a.models.iter().zip(&r.models) {
            if let Some(ld) = f.logdensity {
                w.row([r.refit.to_string(), r.horizon.to_string(), r.date.clone(), m.clone(), ld.to_string()])?;
            }
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("portfolios.csv"))?;
    let mut header = vec!["refit".to_string(), "horizon".into(), "model".into(), "rule".into(), "realized".into()];
    header.extend(ALPHAS.iter().map(|&al| var_col(al)));
    header.extend((1..=k).map(|i| format!("w{i}")));
    w.row(&header)?;
    for r in &a.records {
        for (m, f) in a.models.iter().zip(&r.models) {
            for p in f.portfolios.iter().flatten() {
                let mut rec = vec![r.refit.to_string(), r.horizon.to_string(), m.clone(), p.rule.label(), p.realized.to_string()];
                rec.extend(p.var.iter().map(f64::to_string));
                rec.extend(p.weights.iter().map(f64::to_string));
                w.row(&rec)?;
            }
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("refits.csv"))?;
    w.row(["refit", "model", "seed", "draws", "jitter_repairs", "error"])?;
    for s in &a.refits {
        w.row([
            s.refit.to_string(),
            s.model.clone(),
            s.seed.to_string(),
            s.draws.to_string(),
            s.jitter_repairs.to_string(),
            s.error.clone().unwrap_or_default(),
        ])?;
    }
    w.finish()?;

    write_lpdr(&dir.join("lpdr.csv"), a, baseline)
}

/// Cumulative log predictive density ratio of every model against the
/// baseline, per horizon and number of evaluated origins. Skipped when the
/// baseline was not forecast.
fn write_lpdr(path: &Path, a: &ForecastArchive, baseline: &str) -> CliResult<()> {
    let mut w = CsvOut::create(path)?;
    w.row(["model", "baseline", "horizon", "n", "cumulative"])?;
    if let Some(b) = a.models.iter().position(|m| m == baseline) {
        for (mi, m) in a.models.iter().enumerate() {
            let table = a.lpdr(mi, b)?;
            for (h, cum) in table.horizons.iter().zip(&table.cumulative) {
                for (n, v) in cum.iter().enumerate() {
                    w.row([m.clone(), baseline.to_string(), h.to_string(), (n + 1).to_string(), v.to_string()])?;
                }
            }
        }
    }
    w.finish()
}

fn rule_of(label: &str) -> Option<(usize, Allocation)> {
    Allocation::standard().into_iter().enumerate().find(|(_, r)| r.label() == label)
}

/// Reloads an archive written by [`write_archive`].
pub fn read_archive(dir: &Path) -> CliResult<(Manifest, ForecastArchive)> {
    let manifest = Manifest::read(dir)?;
    let info = manifest
        .archive
        .clone()
        .ok_or_else(|| CliError::artifact(dir.join("manifest.toml"), "not a forecast archive"))?;
    let names = manifest.data.as_ref().map(|d| d.names.clone()).unwrap_or_default();
    let k = names.len();
    let n_models = info.models.len();
    let n_rules = Allocation::standard().len();
    let model_index = |t: &CsvTable, r: usize, c: usize| -> CliResult<usize> {
        let m = &t.rows[r][c];
        info.models.iter().position(|x| x == m).ok_or_else(|| CliError::artifact(&t.path, format!("row {}: unknown model `{m}`", r + 2)))
    };

    let t = CsvTable::read(&dir.join("days.csv"))?;
    let (rc, oc, hc, dc) = (t.col("refit")?, t.col("origin")?, t.col("horizon")?, t.col("date")?);
    let value_cols: Vec<usize> = names.iter().map(|n| t.col(n)).collect::<CliResult<_>>()?;
    let mut records = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        records.push(ForecastRecord {
            refit: t.parse(r, rc)?,
            origin: t.parse(r, oc)?,
            horizon: t.parse(r, hc)?,
            date: t.rows[r][dc].clone(),
            realized: value_cols.iter().map(|&c| t.parse(r, c)).collect::<CliResult<_>>()?,
            models: vec![ModelForecast { logdensity: None, portfolios: vec![None; n_rules] }; n_models],
        });
    }
    let slot = |t: &CsvTable, refit: usize, horizon: usize, r: usize| -> CliResult<usize> {
        if horizon == 0 || horizon > info.d_max || refit >= info.refits {
            return Err(CliError::artifact(&t.path, format!("row {}: no forecast day (refit {refit}, horizon {horizon})", r + 2)));
        }
        Ok(refit * info.d_max + horizon - 1)
    };
    if records.len() != info.refits * info.d_max
        || records.iter().enumerate().any(|(i, rec)| rec.refit * info.d_max + rec.horizon != i + 1)
    {
        return Err(CliError::artifact(&t.path, "forecast days do not match the plan"));
    }

    let t = CsvTable::read(&dir.join("records.csv"))?;
    let (rc, hc, mc, lc) = (t.col("refit")?, t.col("horizon")?, t.col("model")?, t.col("logdensity")?);
    for r in 0..t.rows.len() {
        let s = slot(&t, t.parse(r, rc)?, t.parse(r, hc)?, r)?;
        let m = model_index(&t, r, mc)?;
        records[s].models[m].logdensity = Some(t.parse(r, lc)?);
    }

    let t = CsvTable::read(&dir.join("portfolios.csv"))?;
    let (rc, hc, mc, uc, zc) = (t.col("refit")?, t.col("horizon")?, t.col("model")?, t.col("rule")?, t.col("realized")?);
    let var_cols: Vec<usize> = ALPHAS.iter().map(|&al| t.col(&var_col(al))).collect::<CliResult<_>>()?;
    let w_cols: Vec<usize> = (1..=k).map(|i| t.col(&format!("w{i}"))).collect::<CliResult<_>>()?;
    for r in 0..t.rows.len() {
        let s = slot(&t, t.parse(r, rc)?, t.parse(r, hc)?, r)?;
        let m = model_index(&t, r, mc)?;
        let label = &t.rows[r][uc];
        let (ri, rule) = rule_of(label).ok_or_else(|| CliError::artifact(&t.path, format!("row {}: unknown rule `{label}`", r + 2)))?;
        records[s].models[m].portfolios[ri] = Some(PortfolioOutcome {
            rule,
            weights: w_cols.iter().map(|&c| t.parse(r, c)).collect::<CliResult<_>>()?,
            realized: t.parse(r, zc)?,
            var: var_cols.iter().map(|&c| t.parse(r, c)).collect::<CliResult<_>>()?,
        });
    }
    // A model with no outcome on a day was not evaluated at all.
    for rec in &mut records {
        for f in &mut rec.models {
            if f.logdensity.is_none() && f.portfolios.iter().all(Option::is_none) {
                f.portfolios.clear();
            }
        }
    }

    let t = CsvTable::read(&dir.join("refits.csv"))?;
    let cols: Vec<usize> = ["refit", "model", "seed", "draws", "jitter_repairs", "error"].iter().map(|c| t.col(c)).collect::<CliResult<_>>()?;
    let mut refits = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let error = &t.rows[r][cols[5]];
        refits.push(RefitSummary {
            refit: t.parse(r, cols[0])?,
            model: t.rows[r][cols[1]].clone(),
            seed: t.parse(r, cols[2])?,
            draws: t.parse(r, cols[3])?,
            jitter_repairs: t.parse(r, cols[4])?,
            error: (!error.is_empty()).then(|| error.clone()),
        });
    }

    let plan = ForecastPlan { initial: info.initial, step: info.step, refits: info.refits, d_max: info.d_max };
    Ok((manifest, ForecastArchive { plan, models: info.models, names, records, refits }))
}
