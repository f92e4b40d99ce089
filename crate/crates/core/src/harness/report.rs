//! Sweep results and their CSV form.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "snr_db,estimator,empirical_mse,analytic_mse,ber,bits_counted,trials,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    /// Estimator label, optionally suffixed with `.port1` / `.port2`.
    pub estimator: String,
    pub empirical_mse: Option<f64>,
    pub analytic_mse: Option<f64>,
    pub ber: Option<f64>,
    pub bits_counted: Option<u64>,
    pub trials: u64,
    pub seed: u64,
    /// Reason the row could not be computed.
    pub failed: Option<String>,
}

impl SweepRow {
    pub fn failed(
        snr_db: f64,
        estimator: impl Into<String>,
        trials: u64,
        seed: u64,
        reason: String,
    ) -> Self {
        Self {
            snr_db,
            estimator: estimator.into(),
            empirical_mse: None,
            analytic_mse: None,
            ber: None,
            bits_counted: None,
            trials,
            seed,
            failed: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.snr_db
                .total_cmp(&b.snr_db)
                .then_with(|| a.estimator.cmp(&b.estimator))
        });
    }

    pub fn get(&self, snr_db: f64, estimator: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.estimator == estimator)
    }

    pub fn mse(&self, snr_db: f64, estimator: &str) -> Option<f64> {
        self.get(snr_db, estimator).and_then(|r| r.empirical_mse)
    }

    pub fn ber(&self, snr_db: f64, estimator: &str) -> Option<f64> {
        self.get(snr_db, estimator).and_then(|r| r.ber)
    }

    /// Divides both MSE columns by the pilot count.
    pub fn per_subcarrier(mut self, p: usize) -> Self {
        let p = p as f64;
        for r in &mut self.rows {
            r.empirical_mse = r.empirical_mse.map(|v| v / p);
            r.analytic_mse = r.analytic_mse.map(|v| v / p);
        }
        self
    }

    /// CSV text, rows sorted by `(snr_db, estimator)`. Floats carry nine
    /// significant digits; a failed row shows `NaN` in its metric columns.
    pub fn to_csv(&self) -> String {
        let mut sorted = self.clone();
        sorted.sort();
        let mut out = String::with_capacity(64 * (sorted.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &sorted.rows {
            let metric = |v: Option<f64>| match (&r.failed, v) {
                (Some(_), _) => "NaN".to_string(),
                (None, v) => opt_float(v),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                float9(r.snr_db),
                r.estimator,
                metric(r.empirical_mse),
                opt_float(r.analytic_mse),
                metric(r.ber),
                r.bits_counted.map_or(String::new(), |b| b.to_string()),
                r.trials,
                r.seed
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Config(format!("unexpected CSV header {other:?}")));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Config(format!(
                    "row {}: expected 8 fields, got {}",
                    i + 1,
                    f.len()
                )));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Config(format!("row {}: bad number '{s}'", i + 1)))
                }
            };
            let int = |s: &str| -> Result<u64> {
                s.parse::<u64>()
                    .map_err(|_| Error::Config(format!("row {}: bad integer '{s}'", i + 1)))
            };
            let empirical_mse = num(f[2])?;
            let failed = empirical_mse.is_some_and(f64::is_nan).then(String::new);
            let drop_nan = |v: Option<f64>| v.filter(|x| !x.is_nan());
            rows.push(SweepRow {
                snr_db: num(f[0])?.unwrap_or(f64::NAN),
                estimator: f[1].to_string(),
                empirical_mse: drop_nan(empirical_mse),
                analytic_mse: num(f[3])?,
                ber: drop_nan(num(f[4])?),
                bits_counted: if f[5].is_empty() {
                    None
                } else {
                    Some(int(f[5])?)
                },
                trials: int(f[6])?,
                seed: int(f[7])?,
                failed,
            });
        }
        Ok(Self { rows })
    }
}

/// Nine significant digits in scientific notation.
pub fn float9(v: f64) -> String {
    format!("{v:.8e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or(String::new(), float9)
}

pub fn write_report(report: &SweepReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_csv()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<SweepReport> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SweepReport::from_csv(&text)
}
