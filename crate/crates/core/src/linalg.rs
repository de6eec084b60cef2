//! Dense symmetric spectral linear algebra.
//!
//! Everything in this crate that touches an eigendecomposition goes through
//! [`sym_eig`] (or its precision-generic sibling [`eigh_desc`]), so the
//! ordering, clamping and thresholding conventions live in one place:
//!
//! * eigenvalues are reported in non-increasing order;
//! * covariance-type spectra are clamped at zero when they dip below
//!   `-TOL_PSD_REL * max(1, lambda_max)`, and rejected when they go further;
//! * pseudo-inversion drops eigenvalues below `PINV_REL_THRESHOLD * lambda_max`.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Relative tolerance under which negative eigenvalues of PSD inputs are round-off.
pub const TOL_PSD_REL: f64 = 1e-10;

/// Relative eigenvalue cutoff used by every pseudo-inverse in double precision.
pub const PINV_REL_THRESHOLD: f64 = 1e-12;

/// Orthonormality tolerance for eigenvector sets.
pub const TOL_ORTH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("eigensolver did not converge (dim {dim}, max off-diagonal magnitude {residual:e})")]
    NoConvergence { dim: usize, residual: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {value:e} is below -{tol:e}")]
    NotPsd { value: f64, tol: f64 },
    #[error("invalid Schatten order p = {0}; p must be >= 1")]
    InvalidOrder(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Floating-point types the spectral routines can run in.
///
/// The double-precision path is the default everywhere; single precision is
/// only exercised by the numerical-instability experiment.
pub trait Precision:
    faer::traits::RealField + Copy + PartialOrd + Send + Sync + fmt::Debug + 'static
{
    /// Machine epsilon of the type, widened to `f64`.
    const EPS: f64;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Relative pseudo-inverse cutoff scaled to this precision. Equals
    /// [`PINV_REL_THRESHOLD`] for `f64`.
    fn pinv_rel_threshold() -> f64 {
        PINV_REL_THRESHOLD * (Self::EPS / f64::EPSILON)
    }
}

impl Precision for f64 {
    const EPS: f64 = f64::EPSILON;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Precision for f32 {
    const EPS: f64 = f32::EPSILON as f64;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Dense real symmetric matrix with finite entries.
///
/// Construction symmetrizes the input as `(A + Aᵀ) / 2`, so `get(i, j) ==
/// get(j, i)` holds bit-for-bit afterwards.
#[derive(Clone, Debug)]
pub struct SymMatrix {
    data: Mat<f64>,
}

impl SymMatrix {
    pub fn from_mat(mut data: Mat<f64>) -> Result<Self> {
        let (rows, cols) = (data.nrows(), data.ncols());
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        for j in 0..cols {
            for i in 0..rows {
                if !data[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        for j in 0..cols {
            for i in (j + 1)..rows {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(Self { data })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_mat(Mat::from_fn(dim, dim, f))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(LinalgError::NotSquare {
                    rows: dim,
                    cols: r.as_ref().len(),
                });
            }
        }
        Self::from_fn(dim, |i, j| rows[i].as_ref()[j])
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: Mat::identity(dim, dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: Mat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for j in 0..n {
            let mut col = 0.0;
            for i in 0..n {
                col += self.data[(i, j)] * x[i];
            }
            acc += col * x[j];
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        let n = self.dim().min(other.dim());
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((self.data[(i, j)] - other.data[(i, j)]).abs());
            }
        }
        worst
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            data: &self.data + &other.data,
        })
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            data: &self.data - &other.data,
        })
    }

    /// Congruence `C A Cᵀ` for a (possibly rectangular) `C`.
    pub fn congruence(&self, c: MatRef<'_, f64>) -> Result<SymMatrix> {
        if c.ncols() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: c.ncols(),
            });
        }
        let tmp = c * self.data.as_ref();
        SymMatrix::from_mat(&tmp * c.transpose())
    }
}

/// Order `p` of a Schatten norm, `1 <= p <= ∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchattenOrder {
    Finite(f64),
    Infinity,
}

impl SchattenOrder {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(LinalgError::InvalidOrder(p));
        }
        if p.is_infinite() {
            Ok(SchattenOrder::Infinity)
        } else {
            Ok(SchattenOrder::Finite(p))
        }
    }

    /// `p` as a float (`f64::INFINITY` for the operator norm).
    pub fn value(self) -> f64 {
        match self {
            SchattenOrder::Finite(p) => p,
            SchattenOrder::Infinity => f64::INFINITY,
        }
    }

    /// `1 / p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            SchattenOrder::Finite(p) => 1.0 / p,
            SchattenOrder::Infinity => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, SchattenOrder::Infinity)
    }
}

impl fmt::Display for SchattenOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenOrder::Finite(p) => write!(f, "{p}"),
            SchattenOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for SchattenOrder {
    type Err = LinalgError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞") {
            return Ok(SchattenOrder::Infinity);
        }
        let p: f64 = t.parse().map_err(|_| LinalgError::InvalidOrder(f64::NAN))?;
        SchattenOrder::new(p)
    }
}

impl Serialize for SchattenOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SchattenOrder::Finite(p) => s.serialize_f64(*p),
            SchattenOrder::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SchattenOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => SchattenOrder::new(p),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `(Σ|λ_i|^p)^{1/p}`, or `max|λ_i|` for `p = ∞`. Zero for an empty list.
pub fn schatten_norm_of(values: &[f64], p: SchattenOrder) -> f64 {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    match p {
        SchattenOrder::Infinity => scale,
        SchattenOrder::Finite(p) => {
            let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
            scale * s.powf(1.0 / p)
        }
    }
}

/// Eigenvalues in non-increasing order, with optional aligned orthonormal
/// eigenvectors stored as matrix columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Option<Mat<f64>>,
}

impl Spectrum {
    /// Builds a value-only spectrum, sorting into non-increasing order.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self {
            values,
            vectors: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> Option<MatRef<'_, f64>> {
        self.vectors.as_ref().map(|v| v.as_ref())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest eigenvalue, zero when empty.
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn schatten_norm(&self, p: SchattenOrder) -> f64 {
        schatten_norm_of(&self.values, p)
    }

    /// Zeroes every eigenvalue past index `k`; eigenvectors are kept.
    pub fn truncate(&self, k: usize) -> Spectrum {
        let mut out = self.clone();
        for v in out.values.iter_mut().skip(k) {
            *v = 0.0;
        }
        out
    }

    /// Clamps round-off negatives to zero, rejecting genuinely indefinite input.
    pub fn clamp_psd(mut self) -> Result<Spectrum> {
        let tol = psd_tolerance(&self.values);
        for v in self.values.iter_mut() {
            if *v < -tol {
                return Err(LinalgError::NotPsd { value: *v, tol });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(self)
    }

    /// Number of eigenvalues strictly above `PINV_REL_THRESHOLD * λ_max`.
    pub fn numerical_rank(&self) -> usize {
        let cut = pinv_cutoff(self.max());
        self.values.iter().take_while(|&&v| v > cut).count()
    }

    /// `V diag(λ) Vᵀ`, if eigenvectors are present.
    pub fn reconstruct(&self) -> Option<Mat<f64>> {
        let v = self.vectors.as_ref()?;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.values[j]);
        Some(&scaled * v.transpose())
    }

    /// Applies `f` to every eigenvalue and reassembles `V diag(f(λ)) Vᵀ`.
    pub fn map_reassemble(&self, f: impl Fn(f64) -> f64) -> Option<SymMatrix> {
        let v = self.vectors.as_ref()?;
        let vals: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * vals[j]);
        SymMatrix::from_mat(&scaled * v.transpose()).ok()
    }
}

/// Absolute tolerance for PSD clamping given a spectrum.
pub fn psd_tolerance(values: &[f64]) -> f64 {
    let lmax = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    TOL_PSD_REL * lmax.max(1.0)
}

/// Absolute pseudo-inverse cutoff for a spectrum with top eigenvalue `lambda_max`.
pub fn pinv_cutoff(lambda_max: f64) -> f64 {
    PINV_REL_THRESHOLD * lambda_max.max(0.0)
}

fn max_offdiag(m: MatRef<'_, f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// Symmetric eigendecomposition in an arbitrary precision.
///
/// Returns eigenvalues in non-increasing order and the matching eigenvector
/// columns. No clamping is applied.
pub fn eigh_desc<T: Precision>(a: MatRef<'_, T>) -> Result<(Vec<T>, Mat<T>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| {
        let widened = Mat::from_fn(n, n, |i, j| a[(i, j)].to_f64());
        LinalgError::NoConvergence {
            dim: n,
            residual: max_offdiag(widened.as_ref()),
        }
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer reports ascending order
    let values: Vec<T> = (0..n).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Eigendecomposition of a symmetric matrix, eigenvalues non-increasing.
pub fn sym_eig(m: &SymMatrix) -> Result<Spectrum> {
    let (values, vectors) = eigh_desc(m.as_ref())?;
    Ok(Spectrum {
        values,
        vectors: Some(vectors),
    })
}

/// Eigenvalues only, non-increasing.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut vals = m
        .as_ref()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence {
            dim: n,
            residual: max_offdiag(m.as_ref()),
        })?;
    vals.reverse();
    Ok(vals)
}

/// Eigendecomposition of a PSD matrix with round-off negatives clamped to zero.
pub fn psd_eig(m: &SymMatrix) -> Result<Spectrum> {
    sym_eig(m)?.clamp_psd()
}

/// Keeps the top `k` eigenvalues and zeroes the rest.
pub fn truncate_spectrum(s: &Spectrum, k: usize) -> Spectrum {
    s.truncate(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PinvStatus {
    /// All `k` requested eigenvalues were inverted.
    Complete,
    /// Fewer than `k` eigenvalues cleared the threshold.
    ThresholdLimited { requested: usize, kept: usize },
    /// No eigenvalue cleared the threshold; the result is the zero matrix.
    RankZero,
}

#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub matrix: SymMatrix,
    pub rank: usize,
    pub status: PinvStatus,
}

/// Pseudo-inverse of the rank-`k` truncation of a PSD matrix.
pub fn pinv_truncated(m: &SymMatrix, k: usize) -> Result<PseudoInverse> {
    let spec = psd_eig(m)?;
    Ok(pinv_from_spectrum(&spec, k))
}

/// Same as [`pinv_truncated`] for an already decomposed PSD matrix.
///
/// # Panics
/// If the spectrum carries no eigenvectors.
pub fn pinv_from_spectrum(spec: &Spectrum, k: usize) -> PseudoInverse {
    let v = spec
        .vectors()
        .expect("pseudo-inverse needs eigenvectors");
    let n = v.nrows();
    let cut = pinv_cutoff(spec.max());
    let kept = spec
        .values()
        .iter()
        .take(k)
        .take_while(|&&x| x > cut)
        .count();
    let mut out = Mat::<f64>::zeros(n, n);
    if kept > 0 {
        let scaled = Mat::from_fn(n, kept, |i, j| v[(i, j)] / spec.values()[j]);
        out = &scaled * v.subcols(0, kept).transpose();
    }
    let status = if kept == 0 {
        PinvStatus::RankZero
    } else if kept < k.min(spec.len()) {
        PinvStatus::ThresholdLimited { requested: k, kept }
    } else {
        PinvStatus::Complete
    };
    PseudoInverse {
        matrix: SymMatrix::from_mat(out).expect("finite by construction"),
        rank: kept,
        status,
    }
}

/// `A^r` for PSD `A` via its eigendecomposition.
///
/// Eigenvalues within the PSD tolerance of zero are treated as exact zeros;
/// fractional powers would otherwise amplify their round-off.
pub fn psd_power(m: &SymMatrix, r: f64) -> Result<SymMatrix> {
    let spec = psd_eig(m)?;
    let tol = psd_tolerance(spec.values());
    Ok(spec
        .map_reassemble(|x| if x > tol { x.powf(r) } else { 0.0 })
        .expect("eigenvectors present"))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

/// Operator norm `‖A‖_∞` of a (not necessarily square) matrix.
pub fn operator_norm(a: MatRef<'_, f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let sv = a.singular_values().map_err(|_| LinalgError::NoConvergence {
        dim: a.nrows().max(a.ncols()),
        residual: f64::NAN,
    })?;
    Ok(sv.first().copied().unwrap_or(0.0))
}
