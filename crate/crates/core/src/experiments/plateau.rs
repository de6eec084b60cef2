use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{kstar, thm1_bound, thm2_bound, BoundParams, DecayModel, SpectrumInput};
use crate::oracle::{loglog_slope, DistanceSpec};
use crate::subspace::fit_kpca;

use super::report::{ensure_dir, real, write_csv, write_json, Quantiles, SCHEMA_VERSION};
use super::{draw_samples, parallel_trials, trial_rng, ExperimentConfig, ExperimentKind, Result};

/// One `(trial, k)` observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub k: usize,
    pub empirical_dr: f64,
    pub true_dr: f64,
    pub true_dalpha_p: f64,
    pub thm1_bound: f64,
    pub thm2_bound: f64,
}

impl TrialRecord {
    pub const HEADER: [&'static str; 7] = [
        "trial_index",
        "k",
        "empirical_dR",
        "true_dR",
        "true_dalpha_p",
        "thm1_bound",
        "thm2_bound",
    ];

    fn row(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.k.to_string(),
            real(self.empirical_dr),
            real(self.true_dr),
            real(self.true_dalpha_p),
            real(self.thm1_bound),
            real(self.thm2_bound),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct PlateauReport {
    pub config: ExperimentConfig,
    /// Trial-major, `k` in grid order.
    pub records: Vec<TrialRecord>,
    pub decay: DecayModel,
    pub kstar: f64,
    pub reference_trace: f64,
    pub reference_slope: f64,
    pub thm1: Vec<f64>,
    pub thm2: Vec<f64>,
}

#[derive(Serialize)]
struct PerK {
    k: usize,
    empirical_dr: Quantiles,
    true_dr: Quantiles,
    true_dalpha_p: Quantiles,
    thm1_bound: f64,
    thm2_bound: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    reference_trace: f64,
    reference_slope: f64,
    decay_model: DecayModel,
    kstar: f64,
    bound_coverage: f64,
    per_k: Vec<PerK>,
}

impl PlateauReport {
    /// Values of one column for a given `k`, in trial order.
    pub fn column(&self, k: usize, pick: impl Fn(&TrialRecord) -> f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.k == k).map(pick).collect()
    }

    pub fn median(&self, k: usize, pick: impl Fn(&TrialRecord) -> f64) -> f64 {
        super::report::median(&self.column(k, pick))
    }

    /// Records of one trial, in grid order.
    pub fn trial(&self, index: usize) -> &[TrialRecord] {
        let g = self.config.k_grid.len();
        &self.records[index * g..(index + 1) * g]
    }

    /// Fraction of trials whose Theorem 1 bound dominates `d_{α,p}` at every `k`.
    pub fn bound_coverage(&self) -> f64 {
        let trials = self.config.trials;
        let ok = (0..trials)
            .filter(|&i| self.trial(i).iter().all(|r| r.thm1_bound >= r.true_dalpha_p))
            .count();
        ok as f64 / trials as f64
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let trials = dir.join("trials.csv");
        let rows: Vec<Vec<String>> = self.records.iter().map(TrialRecord::row).collect();
        write_csv(&trials, &TrialRecord::HEADER, &rows)?;
        let per_k = self
            .config
            .k_grid
            .iter()
            .enumerate()
            .map(|(i, &k)| PerK {
                k,
                empirical_dr: Quantiles::of(&self.column(k, |r| r.empirical_dr)),
                true_dr: Quantiles::of(&self.column(k, |r| r.true_dr)),
                true_dalpha_p: Quantiles::of(&self.column(k, |r| r.true_dalpha_p)),
                thm1_bound: self.thm1[i],
                thm2_bound: self.thm2[i],
            })
            .collect();
        let summary = dir.join("summary.json");
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Plateau,
                config: &self.config,
                reference_trace: self.reference_trace,
                reference_slope: self.reference_slope,
                decay_model: self.decay,
                kstar: self.kstar,
                bound_coverage: self.bound_coverage(),
                per_k,
            },
        )?;
        Ok(vec![trials, summary])
    }
}

/// Distance from the reference subspace to `k`-truncated estimates, over
/// many samples, next to the Theorem 1 and 2 bounds.
pub fn run_plateau(config: &ExperimentConfig) -> Result<PlateauReport> {
    config.validate()?;
    let kernel = config.kernel_model()?;
    let measure = config.measure();
    let reference = config.reference()?;
    let eig = reference.eigenvalues();
    let (lo, hi) = config.fit_window;
    let decay = DecayModel::fit(eig, lo, hi)?;
    let reference_slope = loglog_slope(eig, lo, hi).map_or(f64::NAN, |s| s.0);
    let spec = DistanceSpec::new(config.alpha, config.p)?;
    let grid = &config.k_grid;
    let mut thm1 = Vec::with_capacity(grid.len());
    let mut thm2 = Vec::with_capacity(grid.len());
    for &k in grid {
        let params = BoundParams::new(config.alpha, config.p, config.n, config.delta, k)?;
        thm1.push(thm1_bound(&params, SpectrumInput::ValuesWithDecay(eig, &decay))?);
        thm2.push(thm2_bound(&decay, &params)?);
    }
    let kmax = *grid.iter().max().expect("validated non-empty");

    let per_trial = parallel_trials(config.trials, config.workers, |i| {
        let mut rng = trial_rng(config.seed, i as u64);
        let samples = draw_samples(&measure, config.n, &mut rng)?;
        let model = fit_kpca(&samples, &kernel, kmax)?;
        let true_dr = reference.true_reconstruction_error_profile(&model, grid)?;
        let dap = reference.true_dalpha_p_profile(&model, grid, &spec)?;
        grid.iter()
            .enumerate()
            .map(|(g, &k)| {
                Ok(TrialRecord {
                    trial_index: i,
                    k,
                    empirical_dr: model.truncate(k)?.empirical_reconstruction_error(),
                    true_dr: true_dr[g],
                    true_dalpha_p: dap[g],
                    thm1_bound: thm1[g],
                    thm2_bound: thm2[g],
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(PlateauReport {
        config: config.clone(),
        records: per_trial.into_iter().flatten().collect(),
        decay,
        kstar: kstar(&decay, config.n, config.delta)?,
        reference_trace: reference.trace(),
        reference_slope,
        thm1,
        thm2,
    })
}
