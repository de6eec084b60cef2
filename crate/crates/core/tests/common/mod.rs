//! Property checks shared by the proptest suites and the acceptance target.
#![allow(dead_code)]

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subspace_core::linalg::{
    min_eigenvalue, operator_norm, psd_eig, psd_power, psd_tolerance, SchattenOrder, SymMatrix,
};
use subspace_core::{fit_kpca, KernelModel, SampleSet, SubspaceModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `G Gᵀ` with `G` of shape `d × rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> SymMatrix {
    let g = random_mat(rng, d, rank);
    SymMatrix::from_mat(&g * g.transpose()).unwrap()
}

/// `A ⪯ B` built as `B = A + H Hᵀ`, dimension 2..=8.
pub fn random_lowner_pair(rng: &mut ChaCha8Rng) -> (SymMatrix, SymMatrix) {
    let d = rng.random_range(2..=8);
    let (ra, rh) = (rng.random_range(1..=d), rng.random_range(1..=d));
    let a = random_psd(rng, d, ra);
    let h = random_psd(rng, d, rh);
    let b = a.add(&h).unwrap();
    (a, b)
}

fn tol_for(m: &SymMatrix) -> f64 {
    let diag: Vec<f64> = (0..m.dim()).map(|i| m.get(i, i).abs()).collect();
    // scale-aware tolerance, a few orders above round-off
    1e3 * psd_tolerance(&diag)
}

fn check_psd_gap(lo: &SymMatrix, hi: &SymMatrix, what: &str) -> Result<(), String> {
    let diff = hi.sub(lo).unwrap();
    let tol = tol_for(hi).max(tol_for(lo));
    let m = min_eigenvalue(&diff).unwrap();
    if m >= -tol {
        Ok(())
    } else {
        Err(format!("{what}: min eigenvalue {m:e} below -{tol:e}"))
    }
}

/// `C A Cᵀ ⪯ C B Cᵀ` for a random rectangular `C`.
pub fn check_lowner_congruence(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (a, b) = random_lowner_pair(&mut r);
    let rows = r.random_range(1..=8);
    let c = random_mat(&mut r, rows, a.dim());
    let ca = a.congruence(c.as_ref()).unwrap();
    let cb = b.congruence(c.as_ref()).unwrap();
    check_psd_gap(&ca, &cb, "congruence")
}

/// `A^r ⪯ B^r` for `r ∈ {0.25, 0.5, 0.75, 1}`.
pub fn check_lowner_powers(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (a, b) = random_lowner_pair(&mut r);
    for p in [0.25, 0.5, 0.75, 1.0] {
        let ap = psd_power(&a, p).unwrap();
        let bp = psd_power(&b, p).unwrap();
        check_psd_gap(&ap, &bp, &format!("power {p}"))?;
    }
    Ok(())
}

/// `‖A‖_p ≤ ‖B‖_p` for `p ∈ {1, 2, ∞}`.
pub fn check_lowner_norms(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (a, b) = random_lowner_pair(&mut r);
    let sa = psd_eig(&a).unwrap();
    let sb = psd_eig(&b).unwrap();
    for p in [SchattenOrder::Finite(1.0), SchattenOrder::Finite(2.0), SchattenOrder::Infinity] {
        let (na, nb) = (sa.schatten_norm(p), sb.schatten_norm(p));
        if na > nb * (1.0 + 1e-12) + 1e-12 {
            return Err(format!("p={p}: {na} > {nb}"));
        }
    }
    Ok(())
}

/// `‖A^α B^α‖_∞ ≤ ‖AB‖_∞^α` for independent PSD `A`, `B`, `α ∈ (0, 1/2]`.
pub fn check_cordes(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.random_range(2..=8);
    let (ra, rb) = (r.random_range(1..=d), r.random_range(1..=d));
    let a = random_psd(&mut r, d, ra);
    let b = random_psd(&mut r, d, rb);
    let alpha: f64 = 0.5 * (1.0 - r.random::<f64>());
    let aa = psd_power(&a, alpha).unwrap();
    let ba = psd_power(&b, alpha).unwrap();
    let lhs = operator_norm((aa.as_ref() * ba.as_ref()).as_ref()).unwrap();
    let rhs = operator_norm((a.as_ref() * b.as_ref()).as_ref()).unwrap().powf(alpha);
    if lhs <= rhs * (1.0 + 1e-9) + 1e-9 {
        Ok(())
    } else {
        Err(format!("alpha={alpha}: {lhs} > {rhs}"))
    }
}

pub fn uniform_samples(rng: &mut ChaCha8Rng, n: usize) -> SampleSet {
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    SampleSet::from_scalars(&xs).unwrap()
}

/// Kernel-PCA model on `n` uniform points with a random truncation level.
pub fn random_model(rng: &mut ChaCha8Rng, kernel: &KernelModel, n_max: usize) -> SubspaceModel {
    let n = rng.random_range(2..=n_max);
    let k = rng.random_range(1..=n);
    fit_kpca(&uniform_samples(rng, n), kernel, k).unwrap()
}
