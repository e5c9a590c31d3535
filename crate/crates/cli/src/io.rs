//! Price panels on disk and small CSV helpers.
//!
//! A price file has a `date` column followed by one column per series, ISO
//! dates strictly ascending and strictly positive prices. Log returns are
//! dated by the later of the two prices.

use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use skewmsv::ReturnsPanel;

use crate::error::{CliError, CliResult};

pub fn load_prices_csv(path: &Path) -> CliResult<ReturnsPanel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_prices(&text, path)
}

/// Parses price CSV text; `path` only labels errors.
pub fn parse_prices(text: &str, path: &Path) -> CliResult<ReturnsPanel> {
    let bad = |line: u64, message: String| CliError::Input { path: path.into(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.get(0) != Some("date") {
        return Err(bad(1, "first column must be `date`".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if names.is_empty() {
        return Err(bad(1, "no price columns".into()));
    }
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() {
            return Err(bad(1, format!("column {} has an empty name", i + 2)));
        }
        if names[..i].contains(n) {
            return Err(bad(1, format!("duplicate column `{n}`")));
        }
    }

    let k = names.len();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut prices: Vec<f64> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != k + 1 {
            return Err(bad(line, format!("expected {} fields, found {}", k + 1, rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| bad(line, format!("bad date `{}`: {e}", &rec[0])))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(bad(line, format!("date {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        for (j, field) in rec.iter().skip(1).enumerate() {
            let p: f64 = field.parse().map_err(|_| bad(line, format!("`{field}` in column `{}` is not a number", names[j])))?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad(line, format!("price {p} in column `{}` is not positive", names[j])));
            }
            prices.push(p);
        }
    }
    if dates.len() < 2 {
        return Err(bad(1, format!("need at least two price rows, found {}", dates.len())));
    }

    let t = dates.len() - 1;
    let returns = DMatrix::from_fn(t, k, |r, c| prices[(r + 1) * k + c].ln() - prices[r * k + c].ln());
    let labels = dates[1..].iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
    ReturnsPanel::new(labels, names, returns).map_err(|e| bad(1, e.to_string()))
}

/// Writes the price path implied by `panel` starting from `start` on the day
/// before its first date. Panels whose dates are not ISO dates are written
/// with consecutive calendar days from 2000-01-03.
pub fn write_prices_csv(path: &Path, panel: &ReturnsPanel, start: f64) -> CliResult<()> {
    let parsed: Option<Vec<NaiveDate>> =
        panel.dates().iter().map(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok()).collect();
    let dates = match parsed {
        Some(d) if d.windows(2).all(|w| w[0] < w[1]) => {
            let first = d[0].pred_opt().expect("date after the calendar start");
            std::iter::once(first).chain(d).collect::<Vec<_>>()
        }
        _ => {
            let base = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
            (0..=panel.t()).map(|i| base + chrono::Days::new(i as u64)).collect()
        }
    };
    let mut w = CsvOut::create(path)?;
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    w.row(&header)?;
    let mut level = vec![start.ln(); panel.k()];
    for (i, date) in dates.iter().enumerate() {
        if i > 0 {
            for (j, l) in level.iter_mut().enumerate() {
                *l += panel.returns()[(i - 1, j)];
            }
        }
        let mut row = vec![date.format("%Y-%m-%d").to_string()];
        row.extend(level.iter().map(|l| l.exp().to_string()));
        w.row(&row)?;
    }
    w.finish()
}

/// CSV writer that tags every failure with its path.
pub struct CsvOut {
    path: std::path::PathBuf,
    inner: csv::Writer<std::fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path) -> CliResult<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let inner = csv::Writer::from_path(path).map_err(|e| CliError::artifact(path, e))?;
        Ok(Self { path: path.into(), inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| CliError::artifact(&self.path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Header-keyed CSV reader over a whole file, for the artifacts this tool
/// writes itself.
pub struct CsvTable {
    pub path: std::path::PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::artifact(path, e))?;
        let header = reader.headers().map_err(|e| CliError::artifact(path, e))?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| CliError::artifact(path, e))?;
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        Ok(Self { path: path.into(), header, rows })
    }

    pub fn col(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::artifact(&self.path, format!("missing column `{name}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, row: usize, col: usize) -> CliResult<T> {
        let s = &self.rows[row][col];
        s.parse().map_err(|_| {
            CliError::artifact(&self.path, format!("row {}: cannot parse `{s}` in column `{}`", row + 2, self.header[col]))
        })
    }

    /// Empty cells read as `None`.
    pub fn parse_opt<T: std::str::FromStr>(&self, row: usize, col: usize) -> CliResult<Option<T>> {
        if self.rows[row][col].is_empty() {
            Ok(None)
        } else {
            self.parse(row, col).map(Some)
        }
    }
}
