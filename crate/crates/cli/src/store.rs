//! Columnar draw store. A fit directory holds `manifest.toml` and a
//! `draws/` directory of CSV files; floats use the shortest representation
//! that parses back to the same bits, so a stored run reloads exactly.

use std::path::Path;

use skewmsv::diagnostics::diagnostics;
use skewmsv::engine::{AcceptanceReport, StateSummary, TerminalState};
use skewmsv::{CovParams, McmcDraws, ModelConfig, SeriesParams};

use crate::error::{CliError, CliResult};
use crate::io::{CsvOut, CsvTable};
use crate::manifest::{FitInfo, Manifest};

const SERIES_COLS: [&str; 7] = ["mu", "phi", "sigma", "rho", "nu", "beta", "included"];
const COV_COLS: [&str; 3] = ["mu_a", "phi_a", "v_a"];

pub fn fit_info(draws: &McmcDraws) -> FitInfo {
    FitInfo {
        variant: draws.variant().name().into(),
        k: draws.k(),
        stored_draws: draws.n_draws(),
        h_paths: draws.h_summary.paths,
        a_paths: draws.a_summary.paths,
    }
}

pub fn write_draws(dir: &Path, draws: &McmcDraws) -> CliResult<()> {
    let dir = dir.join("draws");

    let mut w = CsvOut::create(&dir.join("series.csv"))?;
    w.row(["draw", "series"].iter().chain(SERIES_COLS.iter()))?;
    for (d, row) in draws.series.iter().enumerate() {
        for (i, p) in row.iter().enumerate() {
            let v = [p.mu, p.phi, p.sigma, p.rho, p.nu, p.beta];
            let mut rec = vec![d.to_string(), (i + 1).to_string()];
            rec.extend(v.iter().map(f64::to_string));
            rec.push((p.included as u8).to_string());
            w.row(&rec)?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("cov.csv"))?;
    w.row(["draw", "state"].iter().chain(COV_COLS.iter()))?;
    for (d, row) in draws.cov.iter().enumerate() {
        for (j, q) in row.iter().enumerate() {
            w.row([d.to_string(), (j + 1).to_string(), q.mu_a.to_string(), q.phi_a.to_string(), q.v_a.to_string()])?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("kappa.csv"))?;
    w.row(["draw", "kappa"])?;
    for (d, k) in draws.kappa.iter().enumerate() {
        w.row([d.to_string(), k.to_string()])?;
    }
    w.finish()?;

    let mut w = CsvOut::create(&dir.join("terminal.csv"))?;
    w.row(["draw", "field", "index", "value"])?;
    for (d, s) in draws.terminal.iter().enumerate() {
        for (field, v) in [("h", &s.h), ("eps", &s.eps), ("a", &s.a)] {
            for (i, x) in v.iter().enumerate() {
                w.row([d.to_string(), field.to_string(), (i + 1).to_string(), x.to_string()])?;
            }
        }
    }
    w.finish()?;

    write_summary(&dir.join("h_summary.csv"), "series", &draws.h_summary, &draws.dates)?;
    write_summary(&dir.join("a_summary.csv"), "state", &draws.a_summary, &draws.dates)?;

    let mut w = CsvOut::create(&dir.join("acceptance.csv"))?;
    w.row(["name", "rate"])?;
    for (name, rate) in &draws.acceptance.rates {
        w.row([name.clone(), rate.to_string()])?;
    }
    w.finish()?;

    let diag = diagnostics(draws);
    let lags = skewmsv::diagnostics::ACF_LAGS;
    let mut w = CsvOut::create(&dir.join("diagnostics.csv"))?;
    let mut header = vec!["name".to_string(), "mean".into(), "sd".into(), "ess".into(), "degenerate".into()];
    header.extend((1..=lags).map(|l| format!("acf{l}")));
    w.row(&header)?;
    let traces = draws.traces();
    for (p, (_, tr)) in diag.params.iter().zip(&traces) {
        let mean = skewmsv::stats::mean(tr);
        let sd = skewmsv::stats::variance(tr).sqrt();
        let mut rec = vec![p.name.clone(), mean.to_string(), sd.to_string(), p.ess.to_string(), p.degenerate.to_string()];
        rec.extend((0..lags).map(|l| p.acf.get(l).map_or(String::new(), f64::to_string)));
        w.row(&rec)?;
    }
    w.finish()
}

fn write_summary(path: &Path, key: &str, s: &StateSummary, dates: &[String]) -> CliResult<()> {
    let mut w = CsvOut::create(path)?;
    w.row([key, "t", "date", "mean", "q05", "q50", "q95"])?;
    for j in 0..s.mean.len() {
        for t in 0..s.mean[j].len() {
            let date = dates.get(t).cloned().unwrap_or_default();
            w.row([
                (j + 1).to_string(),
                t.to_string(),
                date,
                s.mean[j][t].to_string(),
                s.q05[j][t].to_string(),
                s.q50[j][t].to_string(),
                s.q95[j][t].to_string(),
            ])?;
        }
    }
    w.finish()
}

/// Index of a one-based key column, checked against `n`.
fn key(table: &CsvTable, row: usize, col: usize, n: usize) -> CliResult<usize> {
    let v: usize = table.parse(row, col)?;
    if v == 0 || v > n {
        return Err(CliError::artifact(&table.path, format!("row {}: index {v} outside 1..={n}", row + 2)));
    }
    Ok(v - 1)
}

fn draw_index(table: &CsvTable, row: usize, col: usize, n: usize) -> CliResult<usize> {
    let d: usize = table.parse(row, col)?;
    if d >= n {
        return Err(CliError::artifact(&table.path, format!("row {}: draw {d} beyond {n} stored draws", row + 2)));
    }
    Ok(d)
}

/// Reloads a fit written by [`write_draws`] together with its manifest.
pub fn read_draws(dir: &Path) -> CliResult<(Manifest, McmcDraws)> {
    let manifest = Manifest::read(dir)?;
    let mpath = dir.join("manifest.toml");
    let (fit, data) = match (&manifest.fit, &manifest.data) {
        (Some(f), Some(d)) => (f.clone(), d.clone()),
        _ => return Err(CliError::artifact(&mpath, "not a fit directory")),
    };
    let config = ModelConfig::new(fit.k, skewmsv::Variant::parse(&fit.variant)?, manifest.config.priors().map_err(|e| CliError::artifact(&mpath, e))?, manifest.config.mcmc())?;
    let k = fit.k;
    let p = config.p();
    let n = fit.stored_draws;
    let dir = dir.join("draws");

    let blank = SeriesParams { mu: 0.0, phi: 0.0, sigma: 0.0, rho: 0.0, nu: 0.0, beta: 0.0, included: false };
    let mut series = vec![vec![blank; k]; n];
    let t = CsvTable::read(&dir.join("series.csv"))?;
    let cols: Vec<usize> = ["draw", "series"].iter().chain(SERIES_COLS.iter()).map(|c| t.col(c)).collect::<CliResult<_>>()?;
    if t.rows.len() != n * k {
        return Err(CliError::artifact(&t.path, format!("{} rows, expected {}", t.rows.len(), n * k)));
    }
    for r in 0..t.rows.len() {
        let d = draw_index(&t, r, cols[0], n)?;
        let i = key(&t, r, cols[1], k)?;
        let included: u8 = t.parse(r, cols[8])?;
        series[d][i] = SeriesParams {
            mu: t.parse(r, cols[2])?,
            phi: t.parse(r, cols[3])?,
            sigma: t.parse(r, cols[4])?,
            rho: t.parse(r, cols[5])?,
            nu: t.parse(r, cols[6])?,
            beta: t.parse(r, cols[7])?,
            included: included != 0,
        };
    }

    let t = CsvTable::read(&dir.join("cov.csv"))?;
    let cols: Vec<usize> = ["draw", "state"].iter().chain(COV_COLS.iter()).map(|c| t.col(c)).collect::<CliResult<_>>()?;
    let per_draw = if t.rows.is_empty() { 0 } else { p };
    let mut cov = vec![vec![CovParams { mu_a: 0.0, phi_a: 0.0, v_a: 0.0 }; per_draw]; n];
    if t.rows.len() != n * per_draw {
        return Err(CliError::artifact(&t.path, format!("{} rows, expected {}", t.rows.len(), n * p)));
    }
    for r in 0..t.rows.len() {
        let d = draw_index(&t, r, cols[0], n)?;
        let j = key(&t, r, cols[1], p)?;
        cov[d][j] = CovParams { mu_a: t.parse(r, cols[2])?, phi_a: t.parse(r, cols[3])?, v_a: t.parse(r, cols[4])? };
    }

    let t = CsvTable::read(&dir.join("kappa.csv"))?;
    let kc = t.col("kappa")?;
    let kappa = (0..t.rows.len()).map(|r| t.parse(r, kc)).collect::<CliResult<Vec<f64>>>()?;

    let t = CsvTable::read(&dir.join("terminal.csv"))?;
    let (dc, fc, ic, vc) = (t.col("draw")?, t.col("field")?, t.col("index")?, t.col("value")?);
    let mut terminal = vec![TerminalState { h: Vec::new(), eps: Vec::new(), a: Vec::new() }; n];
    for r in 0..t.rows.len() {
        let d = draw_index(&t, r, dc, n)?;
        let target = match t.rows[r][fc].as_str() {
            "h" => &mut terminal[d].h,
            "eps" => &mut terminal[d].eps,
            "a" => &mut terminal[d].a,
            other => return Err(CliError::artifact(&t.path, format!("row {}: unknown field `{other}`", r + 2))),
        };
        let i: usize = t.parse(r, ic)?;
        if i != target.len() + 1 {
            return Err(CliError::artifact(&t.path, format!("row {}: index {i} out of sequence", r + 2)));
        }
        target.push(t.parse(r, vc)?);
    }

    let h_summary = read_summary(&dir.join("h_summary.csv"), "series", fit.h_paths)?;
    let a_summary = read_summary(&dir.join("a_summary.csv"), "state", fit.a_paths)?;

    let t = CsvTable::read(&dir.join("acceptance.csv"))?;
    let (nc, rc) = (t.col("name")?, t.col("rate")?);
    let rates = (0..t.rows.len()).map(|r| Ok((t.rows[r][nc].clone(), t.parse(r, rc)?))).collect::<CliResult<_>>()?;

    let draws = McmcDraws {
        config,
        names: data.names,
        dates: data.dates,
        series,
        cov,
        kappa,
        terminal,
        h_summary,
        a_summary,
        acceptance: AcceptanceReport { rates },
        elapsed_secs: Some(manifest.elapsed_secs),
    };
    Ok((manifest, draws))
}

fn read_summary(path: &Path, key_col: &str, paths: usize) -> CliResult<StateSummary> {
    let t = CsvTable::read(path)?;
    let cols: Vec<usize> = [key_col, "t", "mean", "q05", "q50", "q95"].iter().map(|c| t.col(c)).collect::<CliResult<_>>()?;
    let mut s = StateSummary { paths, ..Default::default() };
    for r in 0..t.rows.len() {
        let j: usize = t.parse(r, cols[0])?;
        let tt: usize = t.parse(r, cols[1])?;
        if j == s.mean.len() + 1 && tt == 0 {
            for v in [&mut s.mean, &mut s.q05, &mut s.q50, &mut s.q95] {
                v.push(Vec::new());
            }
        }
        if j != s.mean.len() || tt != s.mean[j - 1].len() {
            return Err(CliError::artifact(&t.path, format!("row {}: out of sequence", r + 2)));
        }
        s.mean[j - 1].push(t.parse(r, cols[2])?);
        s.q05[j - 1].push(t.parse(r, cols[3])?);
        s.q50[j - 1].push(t.parse(r, cols[4])?);
        s.q95[j - 1].push(t.parse(r, cols[5])?);
    }
    Ok(s)
}
