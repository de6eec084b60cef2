use std::path::{Path, PathBuf};

use faer::Mat;
use serde::Serialize;

use crate::kernels::{KernelModel, SampleSet};
use crate::linalg::{eigh_desc, Precision};

use super::report::{ensure_dir, real, write_csv, write_json, SCHEMA_VERSION};
use super::{draw_samples, parallel_trials, trial_rng, ExperimentConfig, ExperimentKind, Result};

/// Arithmetic and pseudo-inverse policy of one distance computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PathVariant {
    /// 32 or 64.
    pub bits: u32,
    /// Eigenvalues below the relative cutoff are skipped when true; every
    /// nonzero eigenvalue is inverted otherwise.
    pub protected: bool,
}

impl PathVariant {
    pub const ALL: [PathVariant; 4] = [
        PathVariant { bits: 32, protected: true },
        PathVariant { bits: 32, protected: false },
        PathVariant { bits: 64, protected: true },
        PathVariant { bits: 64, protected: false },
    ];

    fn label(self) -> &'static str {
        if self.protected {
            "protected"
        } else {
            "raw"
        }
    }
}

/// Largest point-distance deviation from the stable `f64` evaluation of the
/// same cutoff policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstabilityRow {
    pub trial_index: usize,
    pub k: usize,
    pub variant: PathVariant,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug)]
pub struct InstabilityReport {
    pub config: ExperimentConfig,
    pub rows: Vec<InstabilityRow>,
}

#[derive(Serialize)]
struct Curve {
    bits: u32,
    pinv: &'static str,
    k: usize,
    median_error: f64,
    max_error: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    curves: Vec<Curve>,
}

impl InstabilityReport {
    pub fn errors(&self, k: usize, variant: PathVariant) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.k == k && r.variant == variant)
            .map(|r| r.max_abs_error)
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = ensure_dir(dir)?;
        let trials = dir.join("trials.csv");
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.trial_index.to_string(),
                    r.k.to_string(),
                    r.variant.bits.to_string(),
                    r.variant.label().to_owned(),
                    real(r.max_abs_error),
                ]
            })
            .collect();
        write_csv(&trials, &["trial_index", "k", "bits", "pinv", "max_abs_error"], &rows)?;
        let mut curves = Vec::new();
        for v in PathVariant::ALL {
            for &k in &self.config.k_grid {
                let e = self.errors(k, v);
                curves.push(Curve {
                    bits: v.bits,
                    pinv: v.label(),
                    k,
                    median_error: super::report::median(&e),
                    max_error: e.iter().copied().fold(0.0, f64::max),
                });
            }
        }
        let summary = dir.join("summary.json");
        write_json(
            &summary,
            &Summary {
                schema_version: SCHEMA_VERSION,
                experiment: ExperimentKind::Instability,
                config: &self.config,
                curves,
            },
        )?;
        Ok(vec![trials, summary])
    }
}

/// Point distances `sqrt(K(z,z) − ⟨t_z, (K_n^k)† t_z⟩)` for every `k` in
/// `ks`, with the pseudo-inverse formed explicitly and everything computed in
/// precision `T`.
pub fn point_distances<T: Precision>(
    kernel: &KernelModel,
    samples: &SampleSet,
    eval: &SampleSet,
    ks: &[usize],
    protected: bool,
) -> Result<Vec<Vec<f64>>> {
    let n = samples.len();
    let kn = Mat::from_fn(n, n, |i, j| {
        T::from_f64(kernel.eval_unchecked(samples.point(i), samples.point(j)))
    });
    let (vals, vecs) = eigh_desc(kn.as_ref())?;
    let kx = Mat::from_fn(n, eval.len(), |l, a| {
        T::from_f64(kernel.eval_unchecked(samples.point(l), eval.point(a)))
    });
    let top = vals.first().map_or(0.0, |v| v.to_f64());
    let cutoff = top * T::pinv_rel_threshold();
    let keep = |s: T| {
        let s = s.to_f64();
        if protected {
            s > cutoff
        } else {
            s != 0.0
        }
    };
    let zero = T::from_f64(0.0);
    ks.iter()
        .map(|&k| {
            let upto = k.min(n);
            let scaled = Mat::from_fn(n, upto, |l, j| {
                if keep(vals[j]) {
                    vecs[(l, j)] / vals[j]
                } else {
                    zero
                }
            });
            let pinv = &scaled * vecs.subcols(0, upto).transpose();
            let pt = &pinv * &kx;
            Ok(eval
                .iter()
                .enumerate()
                .map(|(a, z)| {
                    let mut q = zero;
                    for l in 0..n {
                        q += kx[(l, a)] * pt[(l, a)];
                    }
                    let kzz = T::from_f64(kernel.eval_unchecked(z, z));
                    (kzz - q).to_f64().max(0.0).sqrt()
                })
                .collect())
        })
        .collect()
}

/// The same distances in `f64` through the eigenbasis,
/// `K(z,z) − Σ_{j<k} (v_jᵀ t_z)² / σ_j`, which never forms the
/// pseudo-inverse.
pub struct StableDistances {
    vals: Vec<f64>,
    /// `n × points`: `v_jᵀ t_z`.
    y: Mat<f64>,
    kzz: Vec<f64>,
}

impl StableDistances {
    pub fn new(kernel: &KernelModel, samples: &SampleSet, eval: &SampleSet) -> Result<Self> {
        let n = samples.len();
        let kn = Mat::from_fn(n, n, |i, j| kernel.eval_unchecked(samples.point(i), samples.point(j)));
        let (vals, vecs) = eigh_desc(kn.as_ref())?;
        let kx = Mat::from_fn(n, eval.len(), |l, a| {
            kernel.eval_unchecked(samples.point(l), eval.point(a))
        });
        Ok(Self {
            vals,
            y: vecs.transpose() * &kx,
            kzz: eval.iter().map(|z| kernel.eval_unchecked(z, z)).collect(),
        })
    }

    /// Distances for every `k` in `ks`. Eigenvalues at or below
    /// `rel_cutoff · σ_1` are skipped; with `None` only exact zeros are.
    pub fn profile(&self, ks: &[usize], rel_cutoff: Option<f64>) -> Vec<Vec<f64>> {
        let n = self.vals.len();
        let cutoff = rel_cutoff.map_or(0.0, |r| r * self.vals.first().copied().unwrap_or(0.0));
        let mut order: Vec<usize> = (0..ks.len()).collect();
        order.sort_by_key(|&i| ks[i]);
        let mut q = vec![0.0; self.kzz.len()];
        let mut done = 0;
        let mut out = vec![Vec::new(); ks.len()];
        for slot in order {
            let upto = ks[slot].min(n);
            for j in done..upto {
                let s = self.vals[j];
                let keep = if rel_cutoff.is_some() { s > cutoff } else { s != 0.0 };
                if keep {
                    for (a, qa) in q.iter_mut().enumerate() {
                        *qa += self.y[(j, a)] * self.y[(j, a)] / s;
                    }
                }
            }
            done = done.max(upto);
            out[slot] = self
                .kzz
                .iter()
                .zip(&q)
                .map(|(kz, qa)| (kz - qa).max(0.0).sqrt())
                .collect();
        }
        out
    }
}

fn variant_distances(
    v: PathVariant,
    kernel: &KernelModel,
    samples: &SampleSet,
    eval: &SampleSet,
    ks: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if v.bits == 32 {
        point_distances::<f32>(kernel, samples, eval, ks, v.protected)
    } else {
        point_distances::<f64>(kernel, samples, eval, ks, v.protected)
    }
}

fn rel_cutoff(v: PathVariant) -> Option<f64> {
    match (v.protected, v.bits) {
        (false, _) => None,
        (true, 32) => Some(<f32 as Precision>::pinv_rel_threshold()),
        (true, _) => Some(<f64 as Precision>::pinv_rel_threshold()),
    }
}

/// Explicit pseudo-inverse point distances with and without the cutoff, in
/// 32- and 64-bit arithmetic. Each path is scored against the same cutoff
/// policy evaluated stably in `f64`, so the error is pure round-off.
pub fn run_instability(config: &ExperimentConfig) -> Result<InstabilityReport> {
    config.validate()?;
    let kernel = config.kernel_model()?;
    let measure = config.measure();
    let e = config.eval_points;
    let pts: Vec<f64> = if e == 1 {
        vec![0.5]
    } else {
        (0..e).map(|i| i as f64 / (e - 1) as f64).collect()
    };
    let eval = SampleSet::from_scalars(&pts)?;
    let grid = &config.k_grid;
    let per_trial = parallel_trials(config.trials, config.workers, |i| {
        let mut rng = trial_rng(config.seed, i as u64);
        let samples = draw_samples(&measure, config.n, &mut rng)?;
        let stable = StableDistances::new(&kernel, &samples, &eval)?;
        let mut rows = Vec::with_capacity(grid.len() * PathVariant::ALL.len());
        for v in PathVariant::ALL {
            let baseline = stable.profile(grid, rel_cutoff(v));
            let d = variant_distances(v, &kernel, &samples, &eval, grid)?;
            for (g, &k) in grid.iter().enumerate() {
                let err = d[g]
                    .iter()
                    .zip(&baseline[g])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                rows.push(InstabilityRow {
                    trial_index: i,
                    k,
                    variant: v,
                    max_abs_error: err,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(InstabilityReport {
        config: config.clone(),
        rows: per_trial.into_iter().flatten().collect(),
    })
}
