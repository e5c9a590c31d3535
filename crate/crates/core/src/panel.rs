use crate::error::{Error, Result};
use crate::prelude::*;
use nalgebra::DMatrix;

/// `T × k` panel of log returns with a date index and series names.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<String>,
    names: Vec<String>,
    returns: DMatrix<f64>,
}

impl ReturnsPanel {
    /// Builds a panel, rejecting non-finite values, duplicate names and
    /// inconsistent shapes. The minimum length for fitting is checked by the
    /// engine, not here.
    pub fn new(dates: Vec<String>, names: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        let (t, k) = returns.shape();
        if k == 0 || names.len() != k {
            return Err(Error::Dimension(alloc::format!("{} names for {k} columns", names.len())));
        }
        if dates.len() != t {
            return Err(Error::Dimension(alloc::format!("{} dates for {t} rows", dates.len())));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Data(alloc::format!("duplicate series name `{n}`")));
            }
        }
        if let Some(idx) = returns.iter().position(|x| !x.is_finite()) {
            let (r, c) = (idx % t, idx / t);
            return Err(Error::Data(alloc::format!("non-finite return at row {r}, series `{}`", names[c])));
        }
        Ok(Self { dates, names, returns })
    }

    /// Panel with generated names `y1..yk` and dates `0..T`.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let (t, k) = returns.shape();
        let names = (1..=k).map(|i| alloc::format!("y{i}")).collect();
        let dates = (0..t).map(|i| i.to_string()).collect();
        Self::new(dates, names, returns)
    }

    pub fn t(&self) -> usize {
        self.returns.nrows()
    }

    pub fn k(&self) -> usize {
        self.returns.ncols()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    /// Column `i` as a contiguous slice (storage is column-major).
    pub fn series(&self, i: usize) -> &[f64] {
        let t = self.t();
        &self.returns.as_slice()[i * t..(i + 1) * t]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.returns.row(t).iter().copied().collect()
    }

    /// First `n` observations.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.t() {
            return Err(Error::invalid(alloc::format!("cannot take {n} of {} rows", self.t())));
        }
        Ok(Self {
            dates: self.dates[..n].to_vec(),
            names: self.names.clone(),
            returns: self.returns.rows(0, n).into_owned(),
        })
    }

    /// Reorders the series so column `j` of the result is column `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the series indices"));
        }
        let cols: Vec<_> = perm.iter().map(|&p| self.returns.column(p).into_owned()).collect();
        Ok(Self {
            dates: self.dates.clone(),
            names: perm.iter().map(|&p| self.names[p].clone()).collect(),
            returns: DMatrix::from_columns(&cols),
        })
    }
}
