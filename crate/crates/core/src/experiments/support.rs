use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::kernels::SampleSet;
use crate::oracle::Measure;
use crate::subspace::{admits_residual, fit_kpca, hausdorff_1d};

use super::report::{ensure_dir, median, real, write_csv, write_json, SCHEMA_VERSION};
use super::{draw_samples, parallel_trials, trial_rng, ExperimentConfig, ExperimentKind, Result};

/// Hausdorff error of one `(n, trial, k, τ)` support estimate. Infinite when
/// the estimate contains no grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupportRow {
    pub n: usize,
    pub trial_index: usize,
    pub k: usize,
    pub tau: f64,
    pub hausdorff: f64,
}

#[derive(Clone, Debug)]
pub struct SupportReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SupportRow>,
}

/// Best threshold for one `(n, k)` and its median error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BestTau {
    pub n: usize,
    pub k_label: usize,
    pub tau: f64,
    pub median_hausdorff: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    best: Vec<BestTau>,
    median_best_strictly_decreasing: bool,
}

impl SupportReport {
    /// For each `n` (in grid order) and each entry of `support_k`, the `τ`
    /// minimizing the median Hausdorff error over trials. `k_label` is the
    /// index into `support_k`.
    pub fn best_tau(&self) -> Vec<BestTau> {
        let mut out = Vec::new();
        for &n in &self.config.support_n_grid {
            for (ki, rank) in self.config.support_k.iter().enumerate() {
                let k = rank.resolve(n);
                let mut best: Option<BestTau> = None;
                for &tau in &self.config.tau_grid {
                    let vals: Vec<f64> = self
                        .rows
                        .iter()
                        .filter(|r| r.n == n && r.k == k && r.tau == tau)
                        .map(|r| r.hausdorff)
                        .collect();
                    let m = median(&vals);
                    if best.is_none_or(|b| m < b.median_hausdorff) {
                        best = Some(BestTau {
                            n,
                            k_label: ki,
                            tau,
                            median_hausdorff: m,
                        });
                    }
                }
                out.extend(best);
            }
        }
        out
    }

    /// Whether the best median error falls strictly along the `n` grid, for
    /// every entry of `support_k`.
    pub fn strictly_decreasing(&self) -> bool {
        let best = self.best_tau();
        (0..self.config.support_k.len()).all(|ki| {
            let curve: Vec<f64> = best
                .iter()
                .filter(|b| b.k_label == ki)
                .map(|b| b.median_hausdorff)
                .collect();
            curve.windows(2).all(|w| w[1] < w[0])
        })
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let support = dir.join("support.csv");
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.trial_index.to_string(),
                    r.k.to_string(),
                    real(r.tau),
                    real(r.hausdorff),
                ]
            })
            .collect();
        write_csv(&support, &["n", "trial_index", "k", "tau", "hausdorff"], &rows)?;
        let summary = dir.join("summary.json");
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Support,
                config: &self.config,
                best: self.best_tau(),
                median_best_strictly_decreasing: self.strictly_decreasing(),
            },
        )?;
        Ok(vec![support, summary])
    }
}

/// Step-`h` grid of `[0, 1]`.
pub fn unit_grid(step: f64) -> Vec<f64> {
    let count = (1.0 / step + 1e-9).floor() as usize;
    (0..=count).map(|i| i as f64 * step).collect()
}

/// Support recovery for `ρ` uniform on a sub-interval of `[0, 1]`.
pub fn run_support(config: &ExperimentConfig) -> Result<SupportReport> {
    config.validate()?;
    let kernel = config.kernel_model()?;
    let (lo, hi) = config.support_interval;
    let measure = Measure::uniform_interval(lo, hi)?;
    let grid = unit_grid(config.grid_step);
    let truth: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x >= lo - 1e-12 && x <= hi + 1e-12)
        .collect();
    let grid_set = SampleSet::from_scalars(&grid)?;
    let kzz: Vec<f64> = grid.iter().map(|&x| kernel.eval_unchecked(&[x], &[x])).collect();

    let mut rows = Vec::new();
    for (ni, &n) in config.support_n_grid.iter().enumerate() {
        let per_trial = parallel_trials(config.trials, config.workers, |i| {
            let stream = ((ni as u64) << 32) | i as u64;
            let mut rng = trial_rng(config.seed, stream);
            let samples = draw_samples(&measure, n, &mut rng)?;
            let full = fit_kpca(&samples, &kernel, n)?;
            let mut out = Vec::new();
            for rank in &config.support_k {
                let k = rank.resolve(n);
                let res = full.truncate(k)?.residuals_sq(&grid_set)?;
                for &tau in &config.tau_grid {
                    let members: Vec<f64> = grid
                        .iter()
                        .zip(&res)
                        .zip(&kzz)
                        .filter(|((_, &r), &kz)| admits_residual(r, kz, tau))
                        .map(|((&x, _), _)| x)
                        .collect();
                    let hausdorff = if members.is_empty() {
                        f64::INFINITY
                    } else {
                        hausdorff_1d(&truth, &members)?
                    };
                    out.push(SupportRow {
                        n,
                        trial_index: i,
                        k,
                        tau,
                        hausdorff,
                    });
                }
            }
            Ok(out)
        })?;
        rows.extend(per_trial.into_iter().flatten());
    }
    Ok(SupportReport {
        config: config.clone(),
        rows,
    })
}
