use fraclab::config::{validate_config, ExperimentConfig};
use fraclab::geometry::{
    build_ansatz, interaction_sum, parity_identity, sector_of, symmetry_check, SymmetryClass,
};
use fraclab::norms::{Flavor, NormSpec};
use fraclab::params::{Bubble, Mode, ProblemParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn samples(n: usize, r: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..40)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0) * r).collect())
        .collect()
}

fn mode_of(sign_changing: bool) -> Mode {
    if sign_changing {
        Mode::SignChanging
    } else {
        Mode::Positive
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ansatz_stays_in_its_symmetry_class(
        k in 2usize..13,
        r in 2.0f64..50.0,
        eps in 0.3f64..3.0,
        sign_changing in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let p = ProblemParams { mode: mode_of(sign_changing), ..Default::default() };
        let kern = p.kernel();
        let a = build_ansatz(&p, k, r, eps, p.mode).unwrap();
        let (class, order) = a.symmetry();
        prop_assert_eq!(order, k);
        prop_assert_eq!(class, if sign_changing { SymmetryClass::HPrime } else { SymmetryClass::H });
        let xs = samples(p.n, r, seed);
        let u = symmetry_check(|x| a.eval(&kern, x), class, k, &xs, 1e-10);
        let l = symmetry_check(|x| a.frac_lap(&kern, x), class, k, &xs, 1e-10);
        prop_assert!(u.pass, "u deviation {}", u.max_deviation);
        prop_assert!(l.pass, "(-Δ)^s u deviation {}", l.max_deviation);
    }

    #[test]
    fn bubble_is_a_rescaled_standard_bubble(
        eps in 0.05f64..20.0,
        x in prop::collection::vec(-30.0f64..30.0, 5),
        xi in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let p = ProblemParams::default();
        let kern = p.kernel();
        let b = Bubble::new(eps, xi.clone(), 1.0);
        let unit = Bubble::centered(5, 1.0);
        let y: Vec<f64> = x.iter().zip(&xi).map(|(a, c)| (a - c) / eps).collect();
        let scaled = eps.powf(-p.eta() / 2.0) * kern.eval(&unit, &y);
        let u = kern.eval(&b, &x);
        prop_assert!((u / scaled - 1.0).abs() < 1e-12);
        // the bubble equation holds pointwise in closed form
        let rhs = u.powf(p.p_exp());
        prop_assert!((kern.frac_lap(&b, &x) / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_index_is_the_nearest_center(
        k in 2usize..20,
        rho in 0.1f64..10.0,
        theta in 0.0f64..(2.0 * PI),
    ) {
        let x = [rho * theta.cos(), rho * theta.sin(), 0.3, -0.2, 0.1];
        let s = sector_of(&x, k);
        let d = |i: usize| {
            let a = 2.0 * PI * i as f64 / k as f64;
            (x[0] - a.cos()).powi(2) + (x[1] - a.sin()).powi(2)
        };
        let best = (0..k).map(d).fold(f64::INFINITY, f64::min);
        prop_assert!(d(s.index - 1) <= best + 1e-9);
        prop_assert!(s.index >= 1 && s.index <= k);
    }

    #[test]
    fn lattice_sum_scales_with_radius(
        k in 2usize..200,
        r in 0.1f64..100.0,
        eta in 1.1f64..4.0,
        alt in any::<bool>(),
    ) {
        let one = interaction_sum(k, 1.0, eta, alt).unwrap();
        let at_r = interaction_sum(k, r, eta, alt).unwrap();
        prop_assert!((at_r - one * r.powf(-eta)).abs() <= 1e-12 * one.abs().max(1e-300) * r.powf(-eta) * k as f64);
        let (lhs, rhs) = parity_identity(k, r, eta, alt).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()) * k as f64);
    }

    #[test]
    fn valid_configs_round_trip(
        s in 0.05f64..0.95,
        n in 3usize..8,
        frac in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let base = ProblemParams { n, s, ..Default::default() };
        let (lo, hi) = (base.m_lower(), n as f64 - 2.0 * s);
        prop_assume!(lo < hi && n as f64 > 2.0 + 2.0 * s);
        let cfg = ExperimentConfig {
            problem: ProblemParams { m: lo + frac * (hi - lo), ..base },
            seed,
            ..Default::default()
        };
        prop_assume!(cfg.issues().is_empty());
        let text = cfg.to_toml();
        let back = validate_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn weighted_norms_are_absolutely_homogeneous(t in -1e3f64..1e3, shift in 0.0f64..2.0) {
        let p = ProblemParams::default();
        let kern = p.kernel();
        let a = build_ansatz(&p, 4, 20.0, 1.0, Mode::Positive).unwrap();
        for flavor in [Flavor::Star, Flavor::Dstar] {
            let spec = NormSpec::standard(&p, a.centers(), 1.0, flavor);
            let f = |x: &[f64]| a.d_eps(&kern, x) + shift * a.eval(&kern, x);
            let base = spec.norm(f).unwrap().value;
            let scaled = spec.norm(|x: &[f64]| t * f(x)).unwrap().value;
            prop_assert!((scaled - t.abs() * base).abs() <= 1e-12 * t.abs().max(1.0) * base);
        }
    }
}
