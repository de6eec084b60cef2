mod common;

use proptest::prelude::*;
use rand::Rng;
use subspace_core::kernels::gram;
use subspace_core::linalg::{min_eigenvalue, psd_tolerance};
use subspace_core::{fit_kpca, KernelModel, SampleSet, SubspaceModel, SupportEstimate};

fn kernels() -> [KernelModel; 3] {
    [
        KernelModel::abel(1.0).unwrap(),
        KernelModel::gaussian(4.0).unwrap(),
        KernelModel::abel(10.0).unwrap(),
    ]
}

/// Forward-error allowance for squared distances: the explicit
/// pseudo-inverse loses about `n ε ‖t_z‖² / σ_min` to round-off.
fn sq_tol(m: &SubspaceModel, z: &[f64]) -> f64 {
    let t_sq: f64 = m.samples().iter().map(|x| m.kernel().eval(z, x).unwrap().powi(2)).sum();
    let r = m.effective_rank().max(1);
    let sigma = m.gram_spectrum().values()[r - 1];
    1e-9 + 64.0 * m.n() as f64 * f64::EPSILON * t_sq / sigma
}

fn queries(r: &mut rand_chacha::ChaCha8Rng, count: usize) -> SampleSet {
    let xs: Vec<f64> = (0..count).map(|_| r.random_range(-0.2..1.2)).collect();
    SampleSet::from_scalars(&xs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_psd_with_bounded_trace(seed in any::<u64>(), which in 0usize..3) {
        let mut r = common::rng(seed);
        let n = r.random_range(1..=50);
        let s = common::uniform_samples(&mut r, n);
        let k = &kernels()[which];
        let g = gram(k, &s).unwrap();
        let diag: Vec<f64> = (0..n).map(|i| g.get(i, i)).collect();
        prop_assert!(min_eigenvalue(&g).unwrap() >= -psd_tolerance(&diag));
        prop_assert!(g.trace() / n as f64 <= 1.0 + 1e-15);
    }

    #[test]
    fn kernel_is_exactly_symmetric(z in -5.0f64..5.0, w in -5.0f64..5.0, which in 0usize..3) {
        let k = &kernels()[which];
        prop_assert_eq!(k.eval(&[z], &[w]).unwrap(), k.eval(&[w], &[z]).unwrap());
    }

    #[test]
    fn estimates_are_nested(seed in any::<u64>(), which in 0usize..3) {
        let mut r = common::rng(seed);
        let n = r.random_range(2..=40);
        let full = fit_kpca(&common::uniform_samples(&mut r, n), &kernels()[which], n).unwrap();
        let q = queries(&mut r, 16);
        let k1 = r.random_range(1..n);
        let k2 = r.random_range(k1 + 1..=n);
        let (a, b) = (full.truncate(k1).unwrap(), full.truncate(k2).unwrap());
        for z in q.iter() {
            let (da, db) = (a.point_subspace_dist(z).unwrap(), b.point_subspace_dist(z).unwrap());
            let tol = sq_tol(&a, z).max(sq_tol(&b, z));
            prop_assert!(db * db <= da * da + tol, "k={k1}: {da}, k={k2}: {db}");
        }
        let errs: Vec<f64> = (1..=n)
            .map(|k| full.truncate(k).unwrap().empirical_reconstruction_error())
            .collect();
        prop_assert!(errs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn pythagoras_on_training_points(seed in any::<u64>(), which in 0usize..3) {
        let mut r = common::rng(seed);
        let n = r.random_range(2..=40);
        let s = common::uniform_samples(&mut r, n);
        let k = &kernels()[which];
        let m = fit_kpca(&s, k, n).unwrap();
        for z in s.iter() {
            let c = m.project_coords(z).unwrap();
            let norm_sq: f64 = c.coords.iter().map(|x| x * x).sum();
            let d = m.point_subspace_dist(z).unwrap();
            let kzz = k.eval(z, z).unwrap();
            prop_assert!((norm_sq + d * d - kzz).abs() <= sq_tol(&m, z));
        }
    }

    #[test]
    fn distance_routes_agree(seed in any::<u64>(), which in 0usize..3) {
        let mut r = common::rng(seed);
        let k = &kernels()[which];
        let m = common::random_model(&mut r, k, 40);
        let q = queries(&mut r, 16);
        let res = m.residuals_sq(&q).unwrap();
        for (z, rs) in q.iter().zip(&res) {
            let c = m.project_coords(z).unwrap();
            let via_coords = k.eval(z, z).unwrap() - c.coords.iter().map(|x| x * x).sum::<f64>();
            let d = m.point_subspace_dist(z).unwrap();
            let tol = sq_tol(&m, z);
            prop_assert!((d * d - via_coords.max(0.0)).abs() <= tol);
            prop_assert!((rs - via_coords.max(0.0)).abs() <= tol);
        }
    }

    #[test]
    fn support_grows_with_tau_and_k(seed in any::<u64>(), which in 0usize..3) {
        let mut r = common::rng(seed);
        let n = r.random_range(2..=30);
        let full = fit_kpca(&common::uniform_samples(&mut r, n), &kernels()[which], n).unwrap();
        let grid = queries(&mut r, 40);
        let k1 = r.random_range(1..=n);
        let k2 = r.random_range(k1..=n);
        let t1: f64 = r.random_range(0.0..0.5);
        let t2 = t1 + r.random_range(0.0..0.5);
        let inside = |k: usize, tau: f64| {
            SupportEstimate::new(full.truncate(k).unwrap(), tau)
                .unwrap()
                .membership(&grid)
                .unwrap()
        };
        let base = inside(k1, t1);
        for wider in [inside(k1, t2), inside(k2, t1)] {
            for (a, b) in base.iter().zip(&wider) {
                prop_assert!(!a || *b);
            }
        }
    }
}
