use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::log_floor;

use super::report::{ensure_dir, real, write_csv, write_json, Quantiles, SCHEMA_VERSION};
use super::{draw_samples, parallel_trials, trial_rng, ExperimentConfig, ExperimentKind, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConcentrationTrial {
    pub trial_index: usize,
    /// `‖B_n‖_∞` at `t = (9/n) ln(n/δ)`.
    pub norm: f64,
    /// The same at `t_scale · t`.
    pub scaled_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub config: ExperimentConfig,
    pub t: f64,
    pub trials: Vec<ConcentrationTrial>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    t: f64,
    scaled_t: f64,
    threshold: f64,
    exceedance_fraction: f64,
    norm_quantiles: Quantiles,
    scaled_norm_quantiles: Quantiles,
    all_scaled_smaller: bool,
}

impl ConcentrationReport {
    /// Fraction of trials with `‖B_n‖_∞ > 1/2`.
    pub fn exceedance_fraction(&self) -> f64 {
        let over = self.trials.iter().filter(|t| t.norm > 0.5).count();
        over as f64 / self.trials.len() as f64
    }

    pub fn all_scaled_smaller(&self) -> bool {
        self.trials.iter().all(|t| t.scaled_norm < t.norm)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let trials = dir.join("trials.csv");
        let scaled_t = self.t * self.config.t_scale;
        let rows: Vec<Vec<String>> = self
            .trials
            .iter()
            .map(|r| {
                vec![
                    r.trial_index.to_string(),
                    real(self.t),
                    real(r.norm),
                    real(scaled_t),
                    real(r.scaled_norm),
                ]
            })
            .collect();
        write_csv(&trials, &["trial_index", "t", "bn_norm", "scaled_t", "scaled_bn_norm"], &rows)?;
        let norms: Vec<f64> = self.trials.iter().map(|t| t.norm).collect();
        let scaled: Vec<f64> = self.trials.iter().map(|t| t.scaled_norm).collect();
        let summary = dir.join("summary.json");
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Concentration,
                config: &self.config,
                t: self.t,
                scaled_t,
                threshold: 0.5,
                exceedance_fraction: self.exceedance_fraction(),
                norm_quantiles: Quantiles::of(&norms),
                scaled_norm_quantiles: Quantiles::of(&scaled),
                all_scaled_smaller: self.all_scaled_smaller(),
            },
        )?;
        Ok(vec![trials, summary])
    }
}

/// Distribution of `‖(C+tI)^{-1/2}(C − C_n)(C+tI)^{-1/2}‖_∞` at the
/// smallest admissible `t`.
pub fn run_concentration(config: &ExperimentConfig) -> Result<ConcentrationReport> {
    config.validate()?;
    let measure = config.measure();
    let reference = config.reference()?;
    let t = log_floor(config.n, config.delta)?;
    let ts = [t, t * config.t_scale];
    let trials = parallel_trials(config.trials, config.workers, |i| {
        let mut rng = trial_rng(config.seed, i as u64);
        let samples = draw_samples(&measure, config.n, &mut rng)?;
        let norms = reference.bn_operator_norms(&samples, &ts)?;
        Ok(ConcentrationTrial {
            trial_index: i,
            norm: norms[0],
            scaled_norm: norms[1],
        })
    })?;
    Ok(ConcentrationReport {
        config: config.clone(),
        t,
        trials,
    })
}
