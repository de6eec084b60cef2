//! File formats shared by the experiments.
//!
//! CSV: header row, comma separator, reals as `{:.16e}` (17 significant
//! digits, round-trip exact). JSON summaries carry `schema_version`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use super::ExperimentError;

pub const SCHEMA_VERSION: u32 = 1;

/// Formats a real for CSV output.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `rows` under `header` to `path`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Box-plot quantiles of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Quantiles {
    /// Quantiles under the median-unbiased rule (Hyndman–Fan type 8).
    pub fn of(values: &[f64]) -> Self {
        let mut d = Data::new(values.to_vec());
        Self {
            q05: d.quantile(0.05),
            q25: d.quantile(0.25),
            q50: d.median(),
            q75: d.quantile(0.75),
            q95: d.quantile(0.95),
        }
    }
}

/// Median, with infinities ordered last.
pub fn median(values: &[f64]) -> f64 {
    let mut d = Data::new(values.to_vec());
    d.median()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(f64::INFINITY), "inf");
        assert_eq!(real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn quantiles_are_ordered() {
        let v: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let q = Quantiles::of(&v);
        assert_eq!(q.q50, 50.0);
        assert!(q.q05 < q.q25 && q.q25 < q.q50 && q.q50 < q.q75 && q.q75 < q.q95);
        assert_eq!(median(&[1.0, f64::INFINITY, 0.5]), 1.0);
    }
}
