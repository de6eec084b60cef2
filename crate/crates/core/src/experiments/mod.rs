//! Monte Carlo harness: configuration, deterministic seeding and the
//! experiments themselves.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Trial `i`
//! draws from a ChaCha8 stream keyed by `(seed, i)`, trials run on a private
//! pool of `workers` threads, and results are assembled by index, so the
//! written files do not depend on the worker count.

mod concentration;
mod config;
mod instability;
mod plateau;
mod rates;
pub mod report;
mod spectrum;
mod support;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use concentration::{run_concentration, ConcentrationReport, ConcentrationTrial};
pub use config::{default_k_grid, default_tau_grid, ExperimentConfig, ExperimentKind, SupportRank};
pub use instability::{
    point_distances, run_instability, InstabilityReport, InstabilityRow, PathVariant, StableDistances,
};
pub use plateau::{run_plateau, PlateauReport, TrialRecord};
pub use rates::{run_rates, RatesReport};
pub use spectrum::{run_spectrum, SpectrumReport};
pub use support::{run_support, SupportReport, SupportRow};

use crate::bounds::BoundsError;
use crate::kernels::{KernelError, KernelModel, KernelRegistry, SampleSet};
use crate::linalg::LinalgError;
use crate::oracle::{build_reference, Measure, OracleError, ReferenceOperator};
use crate::subspace::SubspaceError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid configuration; nothing was sampled.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Independent generator for one trial: stream `stream` of the ChaCha8
/// sequence seeded by `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` uniform draws from `measure`.
pub fn draw_samples(measure: &Measure, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
    use rand::Rng;
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| measure.sample_with(|| rng.random::<f64>()))
        .collect();
    Ok(SampleSet::from_points(&pts)?)
}

/// Runs `f(i)` for `i < count` on `workers` threads, returning results in
/// index order.
pub fn parallel_trials<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

impl ExperimentConfig {
    /// Kernel named by the config.
    pub fn kernel_model(&self) -> Result<KernelModel> {
        KernelRegistry::with_builtins()
            .resolve(&self.kernel, self.gamma)
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Uniform measure on `[0, 1]`.
    pub fn measure(&self) -> Measure {
        Measure::unit_interval()
    }

    pub fn reference(&self) -> Result<ReferenceOperator> {
        Ok(build_reference(&self.kernel_model()?, &self.measure(), self.m_quadrature)?)
    }
}

/// Runs the configured experiment and writes its files into `output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    config.kernel_model()?;
    let dir = &config.output_dir;
    match config.experiment {
        ExperimentKind::Spectrum => run_spectrum(config)?.write(dir),
        ExperimentKind::Plateau => run_plateau(config)?.write(dir),
        ExperimentKind::Instability => run_instability(config)?.write(dir),
        ExperimentKind::Rates => run_rates(config)?.write(dir),
        ExperimentKind::Support => run_support(config)?.write(dir),
        ExperimentKind::Concentration => run_concentration(config)?.write(dir),
    }
}
