use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{
    kstar, thm1_bound, thm2_bound, write_curve_csv_path, BoundParams, DecayModel, SpectrumInput,
};
use crate::oracle::{abel_spectrum_closed_form, loglog_slope};

use super::report::{ensure_dir, real, write_csv, write_json, SCHEMA_VERSION};
use super::{ExperimentConfig, ExperimentKind, Result};

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub config: ExperimentConfig,
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    pub slope: f64,
    pub decay: DecayModel,
    pub kstar: f64,
    /// `(k, bound)` for `k = 1..=n`.
    pub thm1_curve: Vec<(usize, f64)>,
    pub thm2_curve: Vec<(usize, f64)>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    trace: f64,
    loglog_slope: f64,
    decay_model: DecayModel,
    kstar: f64,
    top_eigenvalues: Vec<f64>,
    closed_form_top: Vec<f64>,
}

impl SpectrumReport {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let spectrum = dir.join("spectrum.csv");
        let rows: Vec<Vec<String>> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i + 1).to_string(), real(*l)])
            .collect();
        write_csv(&spectrum, &["k", "lambda_k"], &rows)?;
        let thm1 = dir.join("thm1_bound.csv");
        write_curve_csv_path(&thm1, &self.thm1_curve)?;
        let thm2 = dir.join("thm2_bound.csv");
        write_curve_csv_path(&thm2, &self.thm2_curve)?;
        let summary = dir.join("summary.json");
        let top = self.eigenvalues.len().min(10);
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Spectrum,
                config: &self.config,
                trace: self.trace,
                loglog_slope: self.slope,
                decay_model: self.decay,
                kstar: self.kstar,
                top_eigenvalues: self.eigenvalues[..top].to_vec(),
                closed_form_top: abel_spectrum_closed_form(self.config.gamma, top),
            },
        )?;
        Ok(vec![spectrum, thm1, thm2, summary])
    }
}

/// Reference spectrum, fitted decay model and bound curves over `k = 1..=n`.
pub fn run_spectrum(config: &ExperimentConfig) -> Result<SpectrumReport> {
    config.validate()?;
    let reference = config.reference()?;
    let eig = reference.eigenvalues().to_vec();
    let (lo, hi) = config.fit_window;
    let slope = loglog_slope(&eig, lo, hi).map_or(f64::NAN, |s| s.0);
    let decay = DecayModel::fit(&eig, lo, hi)?;
    let mut thm1_curve = Vec::with_capacity(config.n);
    let mut thm2_curve = Vec::with_capacity(config.n);
    for k in 1..=config.n {
        let params = BoundParams::new(config.alpha, config.p, config.n, config.delta, k)?;
        thm1_curve.push((k, thm1_bound(&params, SpectrumInput::ValuesWithDecay(&eig, &decay))?));
        thm2_curve.push((k, thm2_bound(&decay, &params)?));
    }
    Ok(SpectrumReport {
        config: config.clone(),
        trace: reference.trace(),
        kstar: kstar(&decay, config.n, config.delta)?,
        eigenvalues: eig,
        slope,
        decay,
        thm1_curve,
        thm2_curve,
    })
}
