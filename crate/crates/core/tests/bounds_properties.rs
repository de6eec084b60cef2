use proptest::prelude::*;
use statrs::function::gamma::gamma;
use subspace_core::bounds::{
    kstar, lemma3_integral_term_c, lemma3_term_c, qprime, regularized_norm, thm1_bound,
    thm2_bound, BoundParams, DecayModel, SpectrumInput,
};
use subspace_core::{build_reference, KernelModel, Measure, SchattenOrder};

fn order(p: f64) -> SchattenOrder {
    if p.is_infinite() {
        SchattenOrder::Infinity
    } else {
        SchattenOrder::new(p).unwrap()
    }
}

/// Direct numerical `∫_0^∞ (f/(f+t))^{αp} dx` with `f(x) = g x^{-1/γ}`,
/// split at the crossover `f(x) = t` and mapped to finite intervals.
fn integral_oracle(g: f64, gam: f64, e: f64, t: f64) -> f64 {
    let f = |x: f64| g * x.powf(-1.0 / gam);
    let h = |x: f64| {
        let fx = f(x);
        if fx.is_infinite() {
            1.0
        } else {
            (fx / (fx + t)).powf(e)
        }
    };
    let x0 = (g / t).powf(gam);
    let steps = 200_000;
    // [0, x0] directly; [x0, ∞) via x = x0 s^{-β}, with β large enough
    // that the transformed integrand vanishes at s = 0
    let beta = 2.0 / (e / gam - 1.0) + 1.0;
    let head: f64 = (0..steps)
        .map(|i| h(x0 * (i as f64 + 0.5) / steps as f64) * x0 / steps as f64)
        .sum();
    let tail: f64 = (0..steps)
        .map(|i| {
            let s = (i as f64 + 0.5) / steps as f64;
            h(x0 * s.powf(-beta)) * x0 * beta * s.powf(-beta - 1.0) / steps as f64
        })
        .sum();
    head + tail
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_constant_matches_quadrature(
        g in 0.1f64..2.0,
        gam in 0.2f64..0.8,
        alpha in 0.3f64..0.5,
        p in 2.0f64..4.0,
        logt in -4.0f64..0.0,
    ) {
        prop_assume!(alpha * p > gam + 0.2);
        let t = 10f64.powf(logt);
        let c = lemma3_integral_term_c(g, gam, alpha, order(p), t).unwrap();
        let exact = integral_oracle(g, gam, alpha * p, t).powf(1.0 / p);
        prop_assert!((c - exact).abs() <= 1e-4 * exact, "{c} vs {exact}");
    }

    #[test]
    fn integral_form_dominates_power_law_sums(
        g in 0.1f64..2.0,
        gam in 0.2f64..0.8,
        alpha in 0.3f64..0.5,
        p in 1.5f64..4.0,
        logt in -4.0f64..0.0,
    ) {
        prop_assume!(alpha * p > gam + 0.05);
        let t = 10f64.powf(logt);
        let sigma: Vec<f64> = (1..=20_000).map(|j| g * (j as f64).powf(-1.0 / gam)).collect();
        let direct = regularized_norm(&sigma, None, alpha, order(p), t).unwrap();
        let c = lemma3_integral_term_c(g, gam, alpha, order(p), t).unwrap();
        prop_assert!(direct <= c * (1.0 + 1e-12), "{direct} > {c}");
    }

    #[test]
    fn stated_and_integral_constants_differ_by_gamma_ratio(
        g in 0.1f64..2.0,
        gam in 0.2f64..0.8,
        alpha in 0.3f64..0.5,
        p in 2.0f64..4.0,
        t in 1e-3f64..1.0,
    ) {
        prop_assume!(alpha * p > gam);
        let stated = lemma3_term_c(g, gam, alpha, order(p), t).unwrap();
        let integral = lemma3_integral_term_c(g, gam, alpha, order(p), t).unwrap();
        let ratio = (gamma(gam) / gamma(alpha * p)).powf(1.0 / p);
        prop_assert!((integral / stated - ratio).abs() <= 1e-12 * ratio);
    }

    #[test]
    fn bounds_are_finite_and_non_negative(
        q in 0.01f64..0.99,
        spread in 1.0f64..5.0,
        r in 1.1f64..6.0,
        alpha in 0.0f64..0.5,
        p in prop_oneof![Just(f64::INFINITY), 1.0f64..6.0],
        n in 4usize..100_000,
        delta in 0.001f64..0.999,
        k in 1usize..5000,
    ) {
        let d = DecayModel::new(q, q * spread, r).unwrap();
        let params = BoundParams::new(alpha, order(p), n, delta, k).unwrap();
        prop_assume!(d.check_posed(alpha, order(p)).is_ok());
        for b in [
            thm1_bound(&params, SpectrumInput::Decay(&d)).unwrap(),
            thm2_bound(&d, &params).unwrap(),
            kstar(&d, n, delta).unwrap(),
            qprime(&d, alpha, order(p)).unwrap(),
        ] {
            prop_assert!(b.is_finite() && b >= 0.0, "{b}");
        }
    }

    #[test]
    fn thm1_never_grows_with_k(
        q in 0.01f64..0.99,
        r in 1.1f64..4.0,
        p in prop_oneof![Just(f64::INFINITY), 2.0f64..6.0],
        n in 4usize..100_000,
    ) {
        let d = DecayModel::new(q, q, r).unwrap();
        prop_assume!(d.check_posed(0.5, order(p)).is_ok());
        let values = d.upper_envelope(400);
        let mut last = f64::INFINITY;
        for k in 1..=400 {
            let params = BoundParams::new(0.5, order(p), n, 0.1, k).unwrap();
            let b = thm1_bound(&params, SpectrumInput::ValuesWithDecay(&values, &d)).unwrap();
            prop_assert!(b <= last * (1.0 + 1e-12), "k={k}: {b} > {last}");
            last = b;
        }
    }

    #[test]
    fn thm2_is_continuous_and_flat_past_kstar(
        q in 0.01f64..0.99,
        r in 2.1f64..4.0,
        n in 1000usize..10_000_000,
    ) {
        let d = DecayModel::new(q, 1.0, r).unwrap();
        let two = SchattenOrder::Finite(2.0);
        let ks = kstar(&d, n, 0.1).unwrap();
        prop_assume!(ks >= 1.0);
        let left_limit = qprime(&d, 0.5, two).unwrap() * ks.powf(-0.5 * r + 0.5);
        let first = ks.ceil() as usize;
        let params = BoundParams::new(0.5, two, n, 0.1, first).unwrap();
        let at = thm2_bound(&d, &params).unwrap();
        prop_assert!((at - left_limit).abs() <= 1e-12 * left_limit.max(1.0));
        for k in [first + 1, 2 * first + 3, n] {
            prop_assert_eq!(thm2_bound(&d, &params.with_k(k).unwrap()).unwrap(), at);
        }
    }
}

/// The integral relaxation dominates the termwise norm on the quadrature
/// spectrum of the Abel kernel, for every shift in a log grid over
/// `[1e-4, 1]`.
#[test]
fn integral_relaxation_dominates_reference_spectrum() {
    let r = build_reference(&KernelModel::abel(1.0).unwrap(), &Measure::unit_interval(), 2000).unwrap();
    let sigma = r.eigenvalues();
    let two = SchattenOrder::Finite(2.0);
    for decay in [2.0, 2.13] {
        let g = sigma
            .iter()
            .enumerate()
            .map(|(j, s)| s * ((j + 1) as f64).powf(decay))
            .fold(0.0, f64::max);
        for i in 0..=40 {
            let t = 10f64.powf(-4.0 + 0.1 * i as f64);
            let direct = regularized_norm(sigma, None, 0.5, two, t).unwrap();
            let c = lemma3_integral_term_c(g, 1.0 / decay, 0.5, two, t).unwrap();
            assert!(direct <= c, "decay {decay}, t={t}: {direct} > {c}");
        }
    }
}
