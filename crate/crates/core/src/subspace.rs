//! Truncated kernel-PCA subspace estimates and the queries built on them.
//!
//! A [`SubspaceModel`] stores the eigendecomposition `K_n = V Σ Vᵀ` of the
//! sample Gram matrix. The `j`-th empirical principal direction is
//! `u_j = σ_j^{-1/2} Σ_l v_{jl} φ(z_l)`, so coordinates of any `φ(z)` along
//! `u_j` only need kernel evaluations against the training samples.
//! Truncating to a smaller `k` reuses the same decomposition, which makes the
//! family of estimates nested by construction.

use std::sync::{Arc, OnceLock};

use faer::Mat;
use thiserror::Error;

use crate::kernels::{cross_gram, gram, kernel_column, KernelError, KernelModel, SampleSet};
use crate::linalg::{pinv_from_spectrum, psd_eig, LinalgError, PseudoInverse, Spectrum};

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("truncation level {k} is outside 1..={n}")]
    TruncationOutOfRange { k: usize, n: usize },
    #[error("point has dimension {got}, samples have dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point set is empty")]
    EmptySet,
    #[error("support threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = SubspaceError> = std::result::Result<T, E>;

#[derive(Debug)]
struct KpcaFit {
    samples: SampleSet,
    kernel: KernelModel,
    spectrum: Spectrum,
    numerical_rank: usize,
}

/// `k`-truncated kernel-PCA estimate of the span of the data in feature space.
#[derive(Clone, Debug)]
pub struct SubspaceModel {
    fit: Arc<KpcaFit>,
    k: usize,
    pinv: OnceLock<Arc<PseudoInverse>>,
}

/// Coordinates of `φ(z)` on the top-`k` empirical directions.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub coords: Vec<f64>,
    /// How many of the `k` directions sit on an eigenvalue below the
    /// pseudo-inverse cutoff and were reported as zero.
    pub suppressed: usize,
}

/// Fits the kernel-PCA model and keeps the top `trunc` directions.
pub fn fit_kpca(samples: &SampleSet, kernel: &KernelModel, trunc: usize) -> Result<SubspaceModel> {
    let n = samples.len();
    if trunc == 0 || trunc > n {
        return Err(SubspaceError::TruncationOutOfRange { k: trunc, n });
    }
    let k_n = gram(kernel, samples)?;
    let spectrum = psd_eig(&k_n)?;
    let numerical_rank = spectrum.numerical_rank();
    Ok(SubspaceModel {
        fit: Arc::new(KpcaFit {
            samples: samples.clone(),
            kernel: kernel.clone(),
            spectrum,
            numerical_rank,
        }),
        k: trunc,
        pinv: OnceLock::new(),
    })
}

impl SubspaceModel {
    /// Same samples and decomposition, different truncation level. No refit.
    pub fn truncate(&self, k: usize) -> Result<SubspaceModel> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(SubspaceError::TruncationOutOfRange { k, n });
        }
        Ok(SubspaceModel {
            fit: Arc::clone(&self.fit),
            k,
            pinv: OnceLock::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fit.samples.len()
    }

    pub fn samples(&self) -> &SampleSet {
        &self.fit.samples
    }

    pub fn kernel(&self) -> &KernelModel {
        &self.fit.kernel
    }

    /// Eigendecomposition of the Gram matrix (all `n` eigenpairs).
    pub fn gram_spectrum(&self) -> &Spectrum {
        &self.fit.spectrum
    }

    /// Number of Gram eigenvalues above the pseudo-inverse cutoff.
    pub fn numerical_rank(&self) -> usize {
        self.fit.numerical_rank
    }

    /// Directions actually spanned: `min(k, numerical rank)`.
    pub fn effective_rank(&self) -> usize {
        self.k.min(self.fit.numerical_rank)
    }

    /// True when both models share the same fitted decomposition.
    pub fn same_fit(&self, other: &SubspaceModel) -> bool {
        Arc::ptr_eq(&self.fit, &other.fit)
    }

    /// `n × r` matrix `A` with `u_j = Σ_l A[l, j] φ(z_l)`, `r = effective_rank()`.
    pub fn basis_coefficients(&self) -> Mat<f64> {
        let r = self.effective_rank();
        let v = self.fit.spectrum.vectors().expect("fit keeps eigenvectors");
        let vals = self.fit.spectrum.values();
        Mat::from_fn(self.n(), r, |l, j| v[(l, j)] / vals[j].sqrt())
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.fit.samples.dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.fit.samples.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `⟨φ(z), u_j⟩ = σ_j^{-1/2} Σ_l K(z, z_l) v_{jl}` for `j = 1..k`.
    pub fn project_coords(&self, z: &[f64]) -> Result<Projection> {
        self.check_dim(z)?;
        let t = kernel_column(&self.fit.kernel, &self.fit.samples, z)?;
        let v = self.fit.spectrum.vectors().expect("fit keeps eigenvectors");
        let vals = self.fit.spectrum.values();
        let r = self.effective_rank();
        let mut coords = vec![0.0; self.k];
        for (j, c) in coords.iter_mut().enumerate().take(r) {
            let dot: f64 = (0..self.n()).map(|l| t[l] * v[(l, j)]).sum();
            *c = dot / vals[j].sqrt();
        }
        Ok(Projection {
            coords,
            suppressed: self.k - r,
        })
    }

    /// Pseudo-inverse of the rank-`k` Gram approximation, computed once.
    pub fn truncated_pinv(&self) -> &PseudoInverse {
        self.pinv
            .get_or_init(|| Arc::new(pinv_from_spectrum(&self.fit.spectrum, self.k)))
    }

    /// Feature-space distance from `φ(z)` to the estimate,
    /// `sqrt(K(z,z) - ⟨t_z, (K_n^k)† t_z⟩)` with `(t_z)_i = K(z, z_i)`.
    pub fn point_subspace_dist(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        let t = kernel_column(&self.fit.kernel, &self.fit.samples, z)?;
        let q = self.truncated_pinv().matrix.quad_form(&t)?;
        let kzz = self.fit.kernel.eval_unchecked(z, z);
        Ok((kzz - q).max(0.0).sqrt())
    }

    /// `(1/n) Σ_{j>k} σ_j(K_n)`, the empirical reconstruction error.
    pub fn empirical_reconstruction_error(&self) -> f64 {
        let tail: f64 = self.fit.spectrum.values().iter().skip(self.k).sum();
        tail / self.n() as f64
    }

    /// Coordinates of many points at once: `points.len() × effective_rank()`.
    pub fn coordinates(&self, points: &SampleSet) -> Result<Mat<f64>> {
        let kx = cross_gram(&self.fit.kernel, points, &self.fit.samples)?;
        let a = self.basis_coefficients();
        Ok(&kx * &a)
    }

    /// Squared residuals `‖φ(z) - P φ(z)‖²` of many points, clamped at zero.
    pub fn residuals_sq(&self, points: &SampleSet) -> Result<Vec<f64>> {
        let y = self.coordinates(points)?;
        Ok(residuals_from_coords(&self.fit.kernel, points, &y, y.ncols()))
    }

    /// Squared residuals of many points for several truncation levels at once.
    ///
    /// Returns one vector per entry of `ks` (each clipped to the effective
    /// rank of this model). Values are non-increasing along increasing `k`.
    pub fn residual_profile(&self, points: &SampleSet, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
        let y = self.coordinates(points)?;
        let r = y.ncols();
        let diag: Vec<f64> = points
            .iter()
            .map(|p| self.fit.kernel.eval_unchecked(p, p))
            .collect();
        let mut order: Vec<usize> = (0..ks.len()).collect();
        order.sort_by_key(|&i| ks[i]);
        let mut out = vec![Vec::new(); ks.len()];
        let mut acc = vec![0.0; points.len()];
        let mut done = 0;
        for &slot in &order {
            let upto = ks[slot].min(r);
            for j in done..upto {
                for (a, s) in acc.iter_mut().enumerate() {
                    *s += y[(a, j)] * y[(a, j)];
                }
            }
            done = done.max(upto);
            out[slot] = diag
                .iter()
                .zip(&acc)
                .map(|(kzz, s)| (kzz - s).max(0.0))
                .collect();
        }
        Ok(out)
    }
}

pub(crate) fn residuals_from_coords(
    kernel: &KernelModel,
    points: &SampleSet,
    coords: &Mat<f64>,
    upto: usize,
) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(a, p)| {
            let s: f64 = (0..upto).map(|j| coords[(a, j)] * coords[(a, j)]).sum();
            (kernel.eval_unchecked(p, p) - s).max(0.0)
        })
        .collect()
}

/// Squared residuals this small, relative to `K(z, z)`, are cancellation
/// noise; training points of a full-rank model must land inside at `τ = 0`.
pub const MEMBERSHIP_SLACK: f64 = 1e-10;

/// Membership rule shared by every support query: `‖(I−P)φ(z)‖² ≤ τ²`
/// up to [`MEMBERSHIP_SLACK`].
pub fn admits_residual(residual_sq: f64, kzz: f64, tau: f64) -> bool {
    residual_sq <= tau * tau + MEMBERSHIP_SLACK * kzz
}

/// `M̂ = {z : d(φ(z), Ŝ) ≤ τ}`, membership evaluated pointwise.
#[derive(Clone, Debug)]
pub struct SupportEstimate {
    model: SubspaceModel,
    tau: f64,
}

impl SupportEstimate {
    pub fn new(model: SubspaceModel, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(SubspaceError::InvalidThreshold(tau));
        }
        Ok(Self { model, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn model(&self) -> &SubspaceModel {
        &self.model
    }

    fn admits(&self, residual_sq: f64, kzz: f64) -> bool {
        admits_residual(residual_sq, kzz, self.tau)
    }

    /// Inclusive membership test, `dist ≤ τ` up to rounding.
    pub fn contains(&self, z: &[f64]) -> Result<bool> {
        let d = self.model.point_subspace_dist(z)?;
        Ok(self.admits(d * d, self.model.kernel().eval_unchecked(z, z)))
    }

    /// Membership of every grid point, in grid order.
    pub fn membership(&self, grid: &SampleSet) -> Result<Vec<bool>> {
        let res = self.model.residuals_sq(grid)?;
        Ok(grid
            .iter()
            .zip(res)
            .map(|(p, r)| self.admits(r, self.model.kernel().eval_unchecked(p, p)))
            .collect())
    }

    /// Points of `grid` that belong to the estimate.
    pub fn members(&self, grid: &SampleSet) -> Result<Vec<Vec<f64>>> {
        let inside = self.membership(grid)?;
        Ok(grid
            .iter()
            .zip(inside)
            .filter(|(_, m)| *m)
            .map(|(p, _)| p.to_vec())
            .collect())
    }
}

/// Free-function form of [`SupportEstimate::contains`].
pub fn support_contains(estimate: &SupportEstimate, z: &[f64]) -> Result<bool> {
    estimate.contains(z)
}

/// Free-function form of [`fit_kpca`]'s queries, kept for symmetry with the
/// other operations.
pub fn point_subspace_dist(model: &SubspaceModel, z: &[f64]) -> Result<f64> {
    model.point_subspace_dist(z)
}

pub fn project_coords(model: &SubspaceModel, z: &[f64]) -> Result<Projection> {
    model.project_coords(z)
}

pub fn empirical_reconstruction_error(model: &SubspaceModel) -> f64 {
    model.empirical_reconstruction_error()
}

/// Hausdorff distance between two finite point sets under the Euclidean metric.
pub fn hausdorff_on_grid<P: AsRef<[f64]>, Q: AsRef<[f64]>>(a: &[P], b: &[Q]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SubspaceError::EmptySet);
    }
    let d = a[0].as_ref().len();
    for p in a.iter().map(|p| p.as_ref()).chain(b.iter().map(|q| q.as_ref())) {
        if p.len() != d {
            return Err(SubspaceError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    if d == 1 {
        let xs: Vec<f64> = a.iter().map(|p| p.as_ref()[0]).collect();
        let ys: Vec<f64> = b.iter().map(|p| p.as_ref()[0]).collect();
        return hausdorff_1d(&xs, &ys);
    }
    let directed = |from: &[&[f64]], to: &[&[f64]]| {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| euclid(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max)
    };
    let a: Vec<&[f64]> = a.iter().map(|p| p.as_ref()).collect();
    let b: Vec<&[f64]> = b.iter().map(|p| p.as_ref()).collect();
    Ok(directed(&a, &b).max(directed(&b, &a)))
}

/// Hausdorff distance between two sets of reals, `O((|a| + |b|) log)`.
pub fn hausdorff_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SubspaceError::EmptySet);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(directed_1d(&sa, &sb).max(directed_1d(&sb, &sa)))
}

fn directed_1d(from: &[f64], sorted_to: &[f64]) -> f64 {
    from.iter()
        .map(|&x| {
            let i = sorted_to.partition_point(|&y| y < x);
            let right = sorted_to.get(i).map_or(f64::INFINITY, |&y| y - x);
            let left = if i > 0 { x - sorted_to[i - 1] } else { f64::INFINITY };
            left.min(right)
        })
        .fold(0.0_f64, f64::max)
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abel() -> KernelModel {
        KernelModel::abel(1.0).unwrap()
    }

    #[test]
    fn fit_examples() {
        let dup = SampleSet::from_scalars(&[0.5, 0.5]).unwrap();
        let m = fit_kpca(&dup, &abel(), 1).unwrap();
        let vals = m.gram_spectrum().values();
        assert!((vals[0] - 2.0).abs() < 1e-14 && vals[1].abs() < 1e-14);
        assert_eq!(m.numerical_rank(), 1);

        let single = SampleSet::from_scalars(&[0.2]).unwrap();
        let m = fit_kpca(&single, &abel(), 1).unwrap();
        assert_eq!(m.gram_spectrum().values(), &[1.0]);

        let pair = SampleSet::from_scalars(&[0.0, 1.0]).unwrap();
        let m = fit_kpca(&pair, &abel(), 2).unwrap();
        let c = (-1.0_f64).exp();
        assert!((m.gram_spectrum().values()[0] - (1.0 + c)).abs() < 1e-14);
        assert!((m.gram_spectrum().values()[1] - (1.0 - c)).abs() < 1e-14);

        assert!(matches!(
            fit_kpca(&pair, &abel(), 0),
            Err(SubspaceError::TruncationOutOfRange { .. })
        ));
        assert!(matches!(
            fit_kpca(&pair, &abel(), 3),
            Err(SubspaceError::TruncationOutOfRange { .. })
        ));
    }

    #[test]
    fn coordinate_examples() {
        let single = SampleSet::from_scalars(&[0.2]).unwrap();
        let m = fit_kpca(&single, &abel(), 1).unwrap();
        let p = m.project_coords(&[0.2]).unwrap();
        assert!((p.coords[0].abs() - 1.0).abs() < 1e-14);

        let dup = SampleSet::from_scalars(&[0.5, 0.5]).unwrap();
        let m = fit_kpca(&dup, &abel(), 1).unwrap();
        let p = m.project_coords(&[0.5]).unwrap();
        assert!((p.coords[0].abs() - 1.0).abs() < 1e-14);
        assert_eq!(p.suppressed, 0);
        // second direction sits on a zero eigenvalue
        let full = m.truncate(2).unwrap();
        let p = full.project_coords(&[0.5]).unwrap();
        assert_eq!(p.suppressed, 1);
        assert_eq!(p.coords[1], 0.0);

        // orthogonal point under the linear kernel
        let lin = SampleSet::from_points(&[[1.0, 0.0]]).unwrap();
        let m = fit_kpca(&lin, &KernelModel::linear(), 1).unwrap();
        assert_eq!(m.project_coords(&[0.0, 3.0]).unwrap().coords, vec![0.0]);
        assert!(m.project_coords(&[0.0]).is_err());
    }

    #[test]
    fn distance_examples() {
        let pts = SampleSet::from_scalars(&[0.1, 0.35, 0.9]).unwrap();
        let m = fit_kpca(&pts, &abel(), 3).unwrap();
        for z in pts.iter() {
            assert!(m.point_subspace_dist(z).unwrap() < 1e-7);
        }

        let lin = SampleSet::from_points(&[[1.0, 0.0]]).unwrap();
        let m = fit_kpca(&lin, &KernelModel::linear(), 1).unwrap();
        assert!((m.point_subspace_dist(&[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);

        // duplicate pair: ⟨t, K† t⟩ = c² for t = (c, c)
        let dup = SampleSet::from_scalars(&[0.5, 0.5]).unwrap();
        let m = fit_kpca(&dup, &abel(), 1).unwrap();
        let z = [0.8];
        let c = (-0.3_f64).exp();
        let expect = (1.0 - c * c).sqrt();
        assert!((m.point_subspace_dist(&z).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_error_examples() {
        let pts = SampleSet::from_scalars(&[0.1, 0.6, 0.8]).unwrap();
        let m = fit_kpca(&pts, &abel(), 3).unwrap();
        assert_eq!(m.empirical_reconstruction_error(), 0.0);

        // orthonormal features: K_n = I
        let lin = SampleSet::from_points(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = fit_kpca(&lin, &KernelModel::linear(), 1).unwrap();
        assert!((m.empirical_reconstruction_error() - 0.5).abs() < 1e-15);

        let dup = SampleSet::from_scalars(&[0.5, 0.5]).unwrap();
        let m = fit_kpca(&dup, &abel(), 1).unwrap();
        assert!(m.empirical_reconstruction_error().abs() < 1e-14);
    }

    #[test]
    fn support_examples() {
        let pts = SampleSet::from_scalars(&[0.1, 0.35, 0.9]).unwrap();
        let m = fit_kpca(&pts, &abel(), 3).unwrap();
        let est = SupportEstimate::new(m, 0.0).unwrap();
        for z in pts.iter() {
            assert!(est.contains(z).unwrap());
        }
        assert!(est.membership(&pts).unwrap().iter().all(|m| *m));
        assert!(!est.contains(&[0.6]).unwrap());

        let lin = SampleSet::from_points(&[[1.0, 0.0]]).unwrap();
        let m = fit_kpca(&lin, &KernelModel::linear(), 1).unwrap();
        let est = SupportEstimate::new(m.clone(), 0.1).unwrap();
        assert!(!support_contains(&est, &[0.0, 1.0]).unwrap());
        // boundary is inclusive
        let on_edge = SupportEstimate::new(m, 1.0).unwrap();
        assert!(on_edge.contains(&[0.0, 1.0]).unwrap());

        assert!(SupportEstimate::new(est.model().clone(), -0.1).is_err());
        assert!(SupportEstimate::new(est.model().clone(), f64::NAN).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_on_grid(&[[0.0], [1.0]], &[[0.0], [1.0]]).unwrap(), 0.0);
        assert_eq!(hausdorff_on_grid(&[[0.0]], &[[1.0]]).unwrap(), 1.0);
        let grid: Vec<[f64; 1]> = (0..=100).map(|i| [i as f64 * 0.01]).collect();
        let h = hausdorff_on_grid(&grid, &[[0.5]]).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        let empty: Vec<[f64; 1]> = vec![];
        assert!(matches!(hausdorff_on_grid(&empty, &[[0.5]]), Err(SubspaceError::EmptySet)));
        let h2 = hausdorff_on_grid(&[[0.0, 0.0]], &[[3.0, 4.0], [0.0, 1.0]]).unwrap();
        assert!((h2 - 5.0).abs() < 1e-15);
    }

    #[test]
    fn batch_residuals_match_pointwise_distance() {
        let pts = SampleSet::from_scalars(&[0.05, 0.2, 0.33, 0.61, 0.77, 0.93]).unwrap();
        let m = fit_kpca(&pts, &abel(), 4).unwrap();
        let grid = SampleSet::from_scalars(&[0.0, 0.15, 0.5, 0.99]).unwrap();
        let res = m.residuals_sq(&grid).unwrap();
        for (z, r) in grid.iter().zip(&res) {
            let d = m.point_subspace_dist(z).unwrap();
            assert!((d * d - r).abs() < 1e-12);
        }
        let prof = m.residual_profile(&grid, &[4, 1, 2]).unwrap();
        assert_eq!(prof[0], res);
        for a in 0..grid.len() {
            assert!(prof[1][a] >= prof[2][a] && prof[2][a] >= prof[0][a]);
        }
    }
}
