//! Quadrature ground truth for the population covariance operator.
//!
//! The covariance `C = E[φ(x) ⊗ φ(x)]` is discretized with a composite
//! midpoint rule `C_m = Σ_a ω_a φ(w_a) ⊗ φ(w_a)`. Its nonzero eigenpairs come
//! from the weighted Gram matrix `D^{1/2} K_m D^{1/2} = Ψ Λ Ψᵀ`: the
//! eigenvalues coincide, and the feature-space eigenvectors are
//!
//! ```text
//! e_i = λ_i^{-1/2} Σ_a ω_a^{1/2} ψ_i[a] φ(w_a),
//! ```
//!
//! which are exactly orthonormal in `H`. Every empirical kernel-PCA direction
//! is also a finite kernel expansion, so all inner products between the two
//! families reduce to kernel evaluations. That is what makes the distances
//! below computable without ever materializing `φ`.

use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{cross_gram, KernelError, KernelModel, SampleSet};
use crate::linalg::{
    psd_eig, schatten_norm_of, sym_eigenvalues, LinalgError, SchattenOrder, Spectrum, SymMatrix,
};
use crate::subspace::{SubspaceError, SubspaceModel};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("reference and model use different kernels ({reference} vs {model})")]
    KernelMismatch { reference: String, model: String },
    #[error("quadrature needs at least 2 nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("unsupported measure family `{0}`")]
    UnsupportedMeasure(String),
    #[error("invalid measure bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("alpha must lie in [0, 1/2], got {0}")]
    InvalidAlpha(f64),
    #[error("regularization t must be positive, got {0}")]
    InvalidShift(f64),
    #[error("sample dimension {got} does not match the measure dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

/// Data distribution `ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Measure {
    /// Uniform on a product of intervals.
    UniformBox { bounds: Vec<(f64, f64)> },
}

impl Measure {
    pub fn uniform_interval(lo: f64, hi: f64) -> Result<Self> {
        Self::uniform_box(vec![(lo, hi)])
    }

    pub fn unit_interval() -> Self {
        Measure::UniformBox {
            bounds: vec![(0.0, 1.0)],
        }
    }

    pub fn uniform_box(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(OracleError::InvalidBounds { lo, hi });
            }
        }
        Ok(Measure::UniformBox { bounds })
    }

    /// Looks a family up by name.
    pub fn from_name(name: &str, bounds: Vec<(f64, f64)>) -> Result<Self> {
        match name {
            "uniform" | "uniform_box" => Self::uniform_box(bounds),
            other => Err(OracleError::UnsupportedMeasure(other.to_owned())),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::UniformBox { bounds } => bounds.len(),
        }
    }

    /// Composite-midpoint nodes (tensor grid, `m` per axis) and equal weights.
    pub fn midpoint_rule(&self, m: usize) -> Result<(SampleSet, Vec<f64>)> {
        if m < 2 {
            return Err(OracleError::TooFewNodes(m));
        }
        match self {
            Measure::UniformBox { bounds } => {
                let d = bounds.len();
                let total = m.pow(d as u32);
                let mut points = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut p = Vec::with_capacity(d);
                    for &(lo, hi) in bounds {
                        let i = rem % m;
                        rem /= m;
                        p.push(lo + (i as f64 + 0.5) * (hi - lo) / m as f64);
                    }
                    points.push(p);
                }
                let nodes = SampleSet::from_points(&points)?;
                Ok((nodes, vec![1.0 / total as f64; total]))
            }
        }
    }

    /// Draws one point from the measure using `u01`, a source of uniforms on `[0, 1)`.
    pub fn sample_with(&self, mut u01: impl FnMut() -> f64) -> Vec<f64> {
        match self {
            Measure::UniformBox { bounds } => bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * u01())
                .collect(),
        }
    }
}

/// `d_{α,p}` parameters: `0 ≤ α ≤ 1/2`, `1 ≤ p ≤ ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceSpec {
    pub alpha: f64,
    pub p: SchattenOrder,
}

impl DistanceSpec {
    pub fn new(alpha: f64, p: SchattenOrder) -> Result<Self> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(OracleError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, p })
    }

    /// `α = 1/2, p = 2`, whose square is the reconstruction error.
    pub fn reconstruction() -> Self {
        Self {
            alpha: 0.5,
            p: SchattenOrder::Finite(2.0),
        }
    }
}

/// Discretized covariance operator and its eigenbasis.
#[derive(Clone, Debug)]
pub struct ReferenceOperator {
    kernel: KernelModel,
    measure: Measure,
    nodes: SampleSet,
    weights: Vec<f64>,
    spectrum: Spectrum,
    rank: usize,
    /// `M × rank`, `e_i = Σ_a coeffs[a, i] φ(w_a)`.
    coeffs: Mat<f64>,
    trace: f64,
}

/// Builds the reference with `m` midpoint nodes per axis.
pub fn build_reference(kernel: &KernelModel, measure: &Measure, m: usize) -> Result<ReferenceOperator> {
    let (nodes, weights) = measure.midpoint_rule(m)?;
    let total = nodes.len();
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let weighted = SymMatrix::from_fn(total, |a, b| {
        sw[a] * sw[b] * kernel.eval_unchecked(nodes.point(a), nodes.point(b))
    })?;
    let spectrum = psd_eig(&weighted)?;
    let rank = spectrum.numerical_rank();
    let psi = spectrum.vectors().expect("eigenvectors requested");
    let vals = spectrum.values();
    let coeffs = Mat::from_fn(total, rank, |a, i| sw[a] * psi[(a, i)] / vals[i].sqrt());
    let trace = nodes
        .iter()
        .zip(&weights)
        .map(|(w, om)| om * kernel.eval_unchecked(w, w))
        .sum();
    Ok(ReferenceOperator {
        kernel: kernel.clone(),
        measure: measure.clone(),
        nodes,
        weights,
        spectrum,
        rank,
        coeffs,
        trace,
    })
}

/// Inner products `G[i, j] = ⟨e_i, u_j⟩` between the reference eigenbasis and
/// the directions of an empirical model.
#[derive(Clone, Debug)]
pub struct FeatureOverlap {
    pub g: Mat<f64>,
    /// `‖G[:, j]‖²`: the part of `u_j` captured by the reference span.
    pub column_norms_sq: Vec<f64>,
}

/// One side of a subspace distance.
#[derive(Clone, Copy, Debug)]
pub enum SubspaceRef<'a> {
    /// The span of the support, `ran C`.
    Reference,
    Model(&'a SubspaceModel),
}

impl ReferenceOperator {
    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn nodes(&self) -> &SampleSet {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// All eigenvalues of the discretized operator, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    /// Eigenvalues kept in the reference basis (`λ_i > 1e-12 λ_1`).
    pub fn kept_eigenvalues(&self) -> &[f64] {
        &self.spectrum.values()[..self.rank]
    }

    /// Eigenvalues dropped from the basis; they only enter through tail terms.
    pub fn discarded_eigenvalues(&self) -> &[f64] {
        &self.spectrum.values()[self.rank..]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Σ_a ω_a K(w_a, w_a)`, equal to `tr C_m`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    fn check_kernel(&self, model: &SubspaceModel) -> Result<()> {
        if model.kernel() != &self.kernel {
            return Err(OracleError::KernelMismatch {
                reference: self.kernel.family().name().to_owned(),
                model: model.kernel().family().name().to_owned(),
            });
        }
        Ok(())
    }

    /// `rank × points.len()` matrix of `⟨e_i, φ(z_l)⟩`.
    pub fn feature_coordinates(&self, points: &SampleSet) -> Result<Mat<f64>> {
        if points.dim() != self.nodes.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.nodes.dim(),
                got: points.dim(),
            });
        }
        let kwz = cross_gram(&self.kernel, &self.nodes, points)?;
        Ok(self.coeffs.transpose() * &kwz)
    }

    /// `⟨e_i, u_j⟩` for the top `effective_rank()` directions of `model`.
    pub fn feature_inner_products(&self, model: &SubspaceModel) -> Result<FeatureOverlap> {
        self.check_kernel(model)?;
        let t = self.feature_coordinates(model.samples())?;
        let g = &t * model.basis_coefficients();
        let column_norms_sq = (0..g.ncols())
            .map(|j| (0..g.nrows()).map(|i| g[(i, j)] * g[(i, j)]).sum())
            .collect();
        Ok(FeatureOverlap { g, column_norms_sq })
    }

    fn alpha_powers(&self, alpha: f64) -> Vec<f64> {
        self.kept_eigenvalues()
            .iter()
            .map(|&l| if alpha == 0.0 { 1.0 } else { l.powf(alpha) })
            .collect()
    }

    /// `(Σ λ^{αp})^{1/p}` over the discarded eigenvalues (`max` for `p = ∞`).
    fn tail_term(&self, spec: &DistanceSpec) -> f64 {
        let tail: Vec<f64> = self
            .discarded_eigenvalues()
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| if spec.alpha == 0.0 { 1.0 } else { l.powf(spec.alpha) })
            .collect();
        schatten_norm_of(&tail, spec.p)
    }

    /// `d_{α,p}(U, V) = ‖(P_U − P_V) C^α‖_p` with `C` the discretized operator.
    ///
    /// Singular values come from `N = Λ^α [⟨(P_U−P_V)e_i, (P_U−P_V)e_j⟩] Λ^α`.
    /// For `p = 2` only the trace of `N` is needed.
    pub fn subspace_distance(
        &self,
        u: SubspaceRef<'_>,
        v: SubspaceRef<'_>,
        spec: &DistanceSpec,
    ) -> Result<f64> {
        let core = match (u, v) {
            (SubspaceRef::Reference, SubspaceRef::Reference) => return Ok(0.0),
            (SubspaceRef::Reference, SubspaceRef::Model(m))
            | (SubspaceRef::Model(m), SubspaceRef::Reference) => {
                let ov = self.feature_inner_products(m)?;
                let core = self.reference_vs_overlap(&ov.g, spec)?;
                let tail = self.tail_term(spec);
                return Ok(match spec.p {
                    SchattenOrder::Infinity => core.max(tail),
                    SchattenOrder::Finite(p) => (core.powf(p) + tail.powf(p)).powf(1.0 / p),
                });
            }
            (SubspaceRef::Model(a), SubspaceRef::Model(b)) => self.model_vs_model(a, b, spec)?,
        };
        Ok(core)
    }

    fn reference_vs_overlap(&self, g: &Mat<f64>, spec: &DistanceSpec) -> Result<f64> {
        let pw = self.alpha_powers(spec.alpha);
        if spec.p == SchattenOrder::Finite(2.0) {
            let mut tr = 0.0;
            for (i, w) in pw.iter().enumerate() {
                let row: f64 = (0..g.ncols()).map(|j| g[(i, j)] * g[(i, j)]).sum();
                tr += w * w * (1.0 - row);
            }
            return Ok(tr.max(0.0).sqrt());
        }
        let ggt = g * g.transpose();
        let r = self.rank;
        let n = SymMatrix::from_fn(r, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            pw[i] * (id - ggt[(i, j)]) * pw[j]
        })?;
        singular_schatten(&n, spec.p)
    }

    /// Two truncations of one fit differ by the projector onto the
    /// directions between their ranks, which avoids any cancellation.
    fn nested_difference(&self, a: &SubspaceModel, b: &SubspaceModel, spec: &DistanceSpec) -> Result<f64> {
        let (small, large) = if a.effective_rank() <= b.effective_rank() { (a, b) } else { (b, a) };
        let (lo, hi) = (small.effective_rank(), large.effective_rank());
        if lo == hi {
            return Ok(0.0);
        }
        let g = self.feature_inner_products(large)?.g;
        let mid = g.subcols(lo, hi - lo);
        let pw = self.alpha_powers(spec.alpha);
        if spec.p == SchattenOrder::Finite(2.0) {
            let tr: f64 = pw
                .iter()
                .enumerate()
                .map(|(i, w)| w * w * (0..hi - lo).map(|j| mid[(i, j)] * mid[(i, j)]).sum::<f64>())
                .sum();
            return Ok(tr.sqrt());
        }
        let pm = mid * mid.transpose();
        let n = SymMatrix::from_fn(self.rank, |i, j| pw[i] * pm[(i, j)] * pw[j])?;
        singular_schatten(&n, spec.p)
    }

    fn model_vs_model(&self, a: &SubspaceModel, b: &SubspaceModel, spec: &DistanceSpec) -> Result<f64> {
        self.check_kernel(a)?;
        self.check_kernel(b)?;
        if a.same_fit(b) {
            return self.nested_difference(a, b, spec);
        }
        let ga = self.feature_inner_products(a)?.g;
        let gb = self.feature_inner_products(b)?.g;
        let kab = cross_gram(&self.kernel, a.samples(), b.samples())?;
        // H[j, l] = ⟨u_j, v_l⟩
        let h = a.basis_coefficients().transpose() * &kab * b.basis_coefficients();
        let pw = self.alpha_powers(spec.alpha);
        let r = self.rank;
        let x = &ga * &h; // rank × k_b
        if spec.p == SchattenOrder::Finite(2.0) {
            let mut tr = 0.0;
            for (i, w) in pw.iter().enumerate() {
                let aa: f64 = (0..ga.ncols()).map(|j| ga[(i, j)] * ga[(i, j)]).sum();
                let bb: f64 = (0..gb.ncols()).map(|j| gb[(i, j)] * gb[(i, j)]).sum();
                let ab: f64 = (0..gb.ncols()).map(|j| x[(i, j)] * gb[(i, j)]).sum();
                tr += w * w * (aa + bb - 2.0 * ab);
            }
            return Ok(tr.max(0.0).sqrt());
        }
        let cross = &x * gb.transpose();
        let pa = &ga * ga.transpose();
        let pb = &gb * gb.transpose();
        let n = SymMatrix::from_fn(r, |i, j| {
            let m = pa[(i, j)] + pb[(i, j)] - cross[(i, j)] - cross[(j, i)];
            pw[i] * m * pw[j]
        })?;
        singular_schatten(&n, spec.p)
    }

    /// `d_{α,p}(S_ρ, Ŝ)` for a truncated model.
    pub fn true_dalpha_p(&self, model: &SubspaceModel, spec: &DistanceSpec) -> Result<f64> {
        self.subspace_distance(SubspaceRef::Reference, SubspaceRef::Model(model), spec)
    }

    /// `d_{α,p}(S_ρ, Ŝ^k)` for every `k` in `ks`, sharing one overlap computation.
    ///
    /// `model` must be fitted at full truncation (or at least `max(ks)`).
    pub fn true_dalpha_p_profile(
        &self,
        model: &SubspaceModel,
        ks: &[usize],
        spec: &DistanceSpec,
    ) -> Result<Vec<f64>> {
        if spec.p != SchattenOrder::Finite(2.0) {
            return ks
                .iter()
                .map(|&k| self.true_dalpha_p(&model.truncate(k)?, spec))
                .collect();
        }
        let ov = self.feature_inner_products(model)?;
        let pw = self.alpha_powers(spec.alpha);
        let total: f64 = pw.iter().map(|w| w * w).sum();
        // captured[j] = Σ_i λ_i^{2α} G[i, j]²
        let captured: Vec<f64> = (0..ov.g.ncols())
            .map(|j| {
                pw.iter()
                    .enumerate()
                    .map(|(i, w)| w * w * ov.g[(i, j)] * ov.g[(i, j)])
                    .sum()
            })
            .collect();
        let tail = self.tail_term(spec);
        Ok(ks
            .iter()
            .map(|&k| {
                let upto = k.min(captured.len());
                let core = (total - captured[..upto].iter().sum::<f64>()).max(0.0);
                (core + tail * tail).sqrt()
            })
            .collect())
    }

    /// `E_ρ ‖φ(x) − P_Ŝ φ(x)‖²` by quadrature over the reference nodes.
    pub fn true_reconstruction_error(&self, model: &SubspaceModel) -> Result<f64> {
        self.check_kernel(model)?;
        let res = model.residuals_sq(&self.nodes)?;
        Ok(res.iter().zip(&self.weights).map(|(r, w)| r * w).sum())
    }

    /// Reconstruction error for every `k` in `ks`, sharing one projection.
    pub fn true_reconstruction_error_profile(
        &self,
        model: &SubspaceModel,
        ks: &[usize],
    ) -> Result<Vec<f64>> {
        self.check_kernel(model)?;
        let prof = model.residual_profile(&self.nodes, ks)?;
        Ok(prof
            .iter()
            .map(|res| res.iter().zip(&self.weights).map(|(r, w)| r * w).sum())
            .collect())
    }

    /// `‖(C+tI)^{-1/2}(C − C_n)(C+tI)^{-1/2}‖_∞` on the reference section.
    pub fn bn_operator_norm(&self, samples: &SampleSet, t: f64) -> Result<f64> {
        Ok(self.bn_operator_norms(samples, &[t])?[0])
    }

    /// [`Self::bn_operator_norm`] for several shifts, sharing the kernel work.
    pub fn bn_operator_norms(&self, samples: &SampleSet, ts: &[f64]) -> Result<Vec<f64>> {
        if let Some(&bad) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(OracleError::InvalidShift(bad));
        }
        let coords = self.feature_coordinates(samples)?;
        let n = samples.len() as f64;
        let lam = self.kept_eigenvalues();
        let r = self.rank;
        ts.iter()
            .map(|&t| {
                let scale: Vec<f64> = lam.iter().map(|l| 1.0 / (l + t).sqrt()).collect();
                let w = Mat::from_fn(r, coords.ncols(), |i, l| scale[i] * coords[(i, l)]);
                let wwt = &w * w.transpose();
                let b = SymMatrix::from_fn(r, |i, j| {
                    let c = if i == j { lam[i] / (lam[i] + t) } else { 0.0 };
                    c - wwt[(i, j)] / n
                })?;
                let ev = sym_eigenvalues(&b)?;
                Ok(ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            })
            .collect()
    }
}

fn singular_schatten(n: &SymMatrix, p: SchattenOrder) -> Result<f64> {
    let sv: Vec<f64> = sym_eigenvalues(n)?
        .into_iter()
        .map(|mu| mu.max(0.0).sqrt())
        .collect();
    Ok(schatten_norm_of(&sv, p))
}

/// Free-function forms matching the operation names used elsewhere.
pub fn feature_inner_products(r: &ReferenceOperator, m: &SubspaceModel) -> Result<FeatureOverlap> {
    r.feature_inner_products(m)
}

pub fn true_dalpha_p(r: &ReferenceOperator, m: &SubspaceModel, spec: &DistanceSpec) -> Result<f64> {
    r.true_dalpha_p(m, spec)
}

pub fn true_reconstruction_error(r: &ReferenceOperator, m: &SubspaceModel) -> Result<f64> {
    r.true_reconstruction_error(m)
}

pub fn bn_operator_norm(r: &ReferenceOperator, s: &SampleSet, t: f64) -> Result<f64> {
    r.bn_operator_norm(s, t)
}

/// `2γ / ((kπ)² + γ²)` for `k = 1..=count`.
pub fn abel_spectrum_closed_form(gamma: f64, count: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    (1..=count)
        .map(|k| {
            let kp = k as f64 * pi;
            2.0 * gamma / (kp * kp + gamma * gamma)
        })
        .collect()
}

/// Least-squares slope and intercept of `ln λ_k` against `ln k` for `k` in
/// `[lo, hi]` (1-based, inclusive). Non-positive eigenvalues are skipped.
pub fn loglog_slope(values: &[f64], lo: usize, hi: usize) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(values.len()))
        .filter(|&k| values[k - 1] > 0.0)
        .map(|k| ((k as f64).ln(), values[k - 1].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
