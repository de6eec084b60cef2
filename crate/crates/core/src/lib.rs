//! Kernel-PCA subspace estimation with quadrature ground truth, learning
//! bounds and a reproducible Monte Carlo harness.

pub mod bounds;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod subspace;

pub use kernels::{KernelFamily, KernelModel, KernelRegistry, SampleSet};
pub use linalg::{SchattenOrder, Spectrum, SymMatrix};
pub use oracle::{build_reference, DistanceSpec, Measure, ReferenceOperator};
pub use subspace::{fit_kpca, SubspaceModel, SupportEstimate};
