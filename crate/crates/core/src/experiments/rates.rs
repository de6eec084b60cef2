use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{rate_exponents, RateExponents};

use super::report::{ensure_dir, real, write_csv, write_json, SCHEMA_VERSION};
use super::{ExperimentConfig, ExperimentKind, Result};

#[derive(Clone, Debug)]
pub struct RatesReport {
    pub config: ExperimentConfig,
    /// `(r, s, exponents)` with `s = 2r`.
    pub rows: Vec<(f64, f64, RateExponents)>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    rows: usize,
    ours_dominates_shawe_taylor: bool,
    ours_at_r_max: f64,
}

impl RatesReport {
    pub fn ours_dominates(&self) -> bool {
        self.rows.iter().all(|(_, _, e)| e.ours_dr >= e.shawe_taylor)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let rates = dir.join("rates.csv");
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(r, s, e)| vec![real(*r), real(*s), real(e.ours_dr), real(e.shawe_taylor), real(e.blanchard)])
            .collect();
        write_csv(&rates, &["r", "s", "ours_dR", "shawe_taylor", "blanchard"], &rows)?;
        let summary = dir.join("summary.json");
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Rates,
                config: &self.config,
                rows: self.rows.len(),
                ours_dominates_shawe_taylor: self.ours_dominates(),
                ours_at_r_max: self.rows.last().map_or(f64::NAN, |row| row.2.ours_dr),
            },
        )?;
        Ok(vec![rates, summary])
    }
}

/// Rate exponents on the grid `r = r_min, r_min + r_step, …, r_max`, with the
/// best fourth-moment constant `s = 2r`.
pub fn run_rates(config: &ExperimentConfig) -> Result<RatesReport> {
    config.validate()?;
    let start = (config.r_min / config.r_step).round();
    let steps = ((config.r_max - config.r_min) / config.r_step + 1e-9).floor() as usize;
    let rows = (0..=steps)
        .map(|i| {
            // integer multiples of the step keep grid values such as 2.0 exact
            let r = (start + i as f64) * config.r_step;
            let s = 2.0 * r;
            Ok((r, s, rate_exponents(r, s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatesReport {
        config: config.clone(),
        rows,
    })
}
