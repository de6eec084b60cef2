//! Kernel functions, sample containers and Gram matrices.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use thiserror::Error;

use crate::linalg::{LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("kernel parameter gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("unknown kernel family `{0}`")]
    UnknownFamily(String),
    #[error("sample set is empty")]
    Empty,
    #[error("sample point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("point {index} has dimension {got}, expected {expected}")]
    RaggedPoints {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("failed to read samples: {0}")]
    Csv(#[from] csv::Error),
    #[error("failed to parse `{value}` as a number on row {row}")]
    Parse { row: usize, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A user-supplied kernel registered under a name.
///
/// Two custom kernels compare equal iff their names match.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    func: Arc<KernelFn>,
}

impl CustomKernel {
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CustomKernel").field(&self.name).finish()
    }
}

impl PartialEq for CustomKernel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelFamily {
    /// `exp(-γ ‖z - w‖₁)`, the Abel / Laplace kernel.
    AbelL1,
    /// `exp(-γ ‖z - w‖₂²)`.
    Gaussian,
    /// `⟨z, w⟩`.
    Linear,
    Custom(CustomKernel),
}

impl KernelFamily {
    pub fn name(&self) -> &str {
        match self {
            KernelFamily::AbelL1 => "abel_l1",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Linear => "linear",
            KernelFamily::Custom(c) => c.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    family: KernelFamily,
    gamma: f64,
}

impl KernelModel {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self, KernelError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(KernelError::InvalidGamma(gamma));
        }
        Ok(Self { family, gamma })
    }

    pub fn abel(gamma: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::AbelL1, gamma)
    }

    pub fn gaussian(gamma: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            gamma: 1.0,
        }
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `K(z, w)`.
    pub fn eval(&self, z: &[f64], w: &[f64]) -> Result<f64, KernelError> {
        if z.len() != w.len() {
            return Err(KernelError::DimensionMismatch {
                left: z.len(),
                right: w.len(),
            });
        }
        Ok(self.eval_unchecked(z, w))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64], w: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::AbelL1 => {
                let d: f64 = z.iter().zip(w).map(|(a, b)| (a - b).abs()).sum();
                (-self.gamma * d).exp()
            }
            KernelFamily::Gaussian => {
                let d: f64 = z.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d).exp()
            }
            KernelFamily::Linear => z.iter().zip(w).map(|(a, b)| a * b).sum(),
            KernelFamily::Custom(c) => (c.func)(z, w),
        }
    }
}

/// Name-based lookup of kernel families.
///
/// Ships with `abel_l1`, `gaussian` and `linear`; experiments can register
/// further kernels without touching this module.
#[derive(Clone, Debug)]
pub struct KernelRegistry {
    custom: BTreeMap<String, CustomKernel>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl KernelRegistry {
    pub fn with_builtins() -> Self {
        Self {
            custom: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, kernel: CustomKernel) {
        self.custom.insert(kernel.name().to_owned(), kernel);
    }

    pub fn resolve(&self, name: &str, gamma: f64) -> Result<KernelModel, KernelError> {
        let family = match name {
            "abel_l1" | "abel" | "laplace" => KernelFamily::AbelL1,
            "gaussian" | "rbf" => KernelFamily::Gaussian,
            "linear" => KernelFamily::Linear,
            other => KernelFamily::Custom(
                self.custom
                    .get(other)
                    .cloned()
                    .ok_or_else(|| KernelError::UnknownFamily(other.to_owned()))?,
            ),
        };
        KernelModel::new(family, gamma)
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = ["abel_l1", "gaussian", "linear"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        out.extend(self.custom.keys().cloned());
        out
    }
}

/// Points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleSet {
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self, KernelError> {
        let first = points.first().ok_or(KernelError::Empty)?;
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(points.len() * d);
        for (index, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != d {
                return Err(KernelError::RaggedPoints {
                    index,
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(KernelError::NonFinite { index });
            }
            data.extend_from_slice(p);
        }
        Ok(Self {
            data,
            n: points.len(),
            d,
        })
    }

    /// One-dimensional samples.
    pub fn from_scalars(xs: &[f64]) -> Result<Self, KernelError> {
        if xs.is_empty() {
            return Err(KernelError::Empty);
        }
        if let Some(index) = xs.iter().position(|x| !x.is_finite()) {
            return Err(KernelError::NonFinite { index });
        }
        Ok(Self {
            data: xs.to_vec(),
            n: xs.len(),
            d: 1,
        })
    }

    /// Reads one point per row, `d` comma-separated columns, no header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, KernelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let p = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| KernelError::Parse {
                        row,
                        value: v.to_owned(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            points.push(p);
        }
        Self::from_points(&points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }
}

/// `n×n` Gram matrix `K(z_i, z_j)`.
pub fn gram(kernel: &KernelModel, samples: &SampleSet) -> Result<SymMatrix, KernelError> {
    let n = samples.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let zj = samples.point(j);
        for i in j..n {
            let v = kernel.eval_unchecked(samples.point(i), zj);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(SymMatrix::from_mat(m)?)
}

/// Rectangular kernel matrix `K(a_i, b_j)`.
pub fn cross_gram(
    kernel: &KernelModel,
    a: &SampleSet,
    b: &SampleSet,
) -> Result<Mat<f64>, KernelError> {
    if a.dim() != b.dim() {
        return Err(KernelError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(Mat::from_fn(a.len(), b.len(), |i, j| {
        kernel.eval_unchecked(a.point(i), b.point(j))
    }))
}

/// Vector `(K(z, z_i))_i`.
pub fn kernel_column(
    kernel: &KernelModel,
    samples: &SampleSet,
    z: &[f64],
) -> Result<Vec<f64>, KernelError> {
    if z.len() != samples.dim() {
        return Err(KernelError::DimensionMismatch {
            left: z.len(),
            right: samples.dim(),
        });
    }
    Ok(samples.iter().map(|p| kernel.eval_unchecked(z, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    #[test]
    fn eval_examples() {
        let abel = KernelModel::abel(1.0).unwrap();
        assert_eq!(abel.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        let v = abel.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0_f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert_eq!(KernelModel::linear().eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            abel.eval(&[0.0], &[0.0, 1.0]),
            Err(KernelError::DimensionMismatch { .. })
        ));
        let g = KernelModel::gaussian(2.0).unwrap();
        assert!((g.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - (-4.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(KernelModel::abel(0.0).is_err());
        assert!(KernelModel::gaussian(-1.0).is_err());
        assert!(KernelModel::abel(f64::NAN).is_err());
    }

    #[test]
    fn gram_examples() {
        let abel = KernelModel::abel(1.0).unwrap();
        let dup = SampleSet::from_scalars(&[0.4, 0.4]).unwrap();
        let g = gram(&abel, &dup).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        let s = sym_eig(&g).unwrap();
        assert!((s.values()[0] - 2.0).abs() < 1e-14);
        assert!(s.values()[1].abs() < 1e-14);

        let single = SampleSet::from_scalars(&[0.7]).unwrap();
        assert_eq!(gram(&abel, &single).unwrap().get(0, 0), 1.0);

        let pair = SampleSet::from_scalars(&[0.0, 1.0]).unwrap();
        let g = gram(&abel, &pair).unwrap();
        let c = (-1.0_f64).exp();
        assert_eq!(g.get(0, 0), 1.0);
        assert!((g.get(0, 1) - c).abs() < 1e-15);
        assert!((g.get(1, 0) - c).abs() < 1e-15);
    }

    #[test]
    fn registry_resolves_builtins_and_custom() {
        let mut reg = KernelRegistry::with_builtins();
        assert_eq!(reg.resolve("abel_l1", 1.0).unwrap(), KernelModel::abel(1.0).unwrap());
        assert!(matches!(reg.resolve("nope", 1.0), Err(KernelError::UnknownFamily(_))));
        reg.register(CustomKernel::new("cauchy", |a, b| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            1.0 / (1.0 + d)
        }));
        let k = reg.resolve("cauchy", 1.0).unwrap();
        assert_eq!(k.eval(&[0.0], &[1.0]).unwrap(), 0.5);
        assert!(reg.names().contains(&"cauchy".to_string()));
    }

    #[test]
    fn csv_loading() {
        let text = "0.1, 0.2\n0.3,0.4\n";
        let s = SampleSet::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.point(1), &[0.3, 0.4]);
        assert!(SampleSet::from_csv_reader("1,2\n3\n".as_bytes()).is_err());
        assert!(SampleSet::from_csv_reader("1,x\n".as_bytes()).is_err());
        assert!(matches!(
            SampleSet::from_csv_reader("".as_bytes()),
            Err(KernelError::Empty)
        ));
    }

    #[test]
    fn non_finite_points_rejected() {
        assert!(matches!(
            SampleSet::from_scalars(&[0.0, f64::INFINITY]),
            Err(KernelError::NonFinite { index: 1 })
        ));
    }
}
