use fraclab::correction::{assemble, GalerkinBasis, LinearSystem, SolverKind, SymmetricSource};
use fraclab::energy::{compute_constants, critical_integral, PotentialModel};
use fraclab::geometry::{build_ansatz, Ansatz};
use fraclab::params::{Mode, ProblemParams};
use fraclab::quadrature::{riesz_apply, Feature, QuadratureSpec, RieszSource, Symmetry};
use fraclab::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

const NU: f64 = 200.0;

fn params(mode: Mode) -> ProblemParams {
    ProblemParams {
        mode,
        ..ProblemParams::default()
    }
}

fn width() -> f64 {
    static W: OnceLock<f64> = OnceLock::new();
    *W.get_or_init(|| {
        let p = params(Mode::Positive);
        let c = compute_constants(&p, &QuadratureSpec::default().with_rel_tol(1e-8)).unwrap();
        1.0 / c.eps0(&p, false)
    })
}

fn polygon(mode: Mode, k: usize) -> Ansatz {
    build_ansatz(&params(mode), k, NU, width(), mode).unwrap()
}

fn system_k4() -> &'static LinearSystem {
    static S: OnceLock<LinearSystem> = OnceLock::new();
    S.get_or_init(|| {
        let p = params(Mode::Positive);
        let basis = GalerkinBasis::standard(&p, &polygon(Mode::Positive, 4)).unwrap();
        assemble(&basis, &PotentialModel::for_mode(&p), NU).unwrap()
    })
}

fn single_bubble() -> &'static LinearSystem {
    static S: OnceLock<LinearSystem> = OnceLock::new();
    S.get_or_init(|| {
        let p = params(Mode::Positive);
        let basis = GalerkinBasis::standard(&p, &Ansatz::single(5, 1.0)).unwrap();
        assemble(&basis, &PotentialModel::unit(&p), 1.0).unwrap()
    })
}

fn along(d: f64) -> Vec<f64> {
    let mut x = vec![0.0; 5];
    x[0] = d;
    x
}

#[test]
fn gauss_potential_matches_riesz_quadrature() {
    let p = params(Mode::Positive);
    let basis = GalerkinBasis::standard(&p, &Ansatz::single(5, 1.0)).unwrap();
    let spec = QuadratureSpec::default().with_rel_tol(1e-8);
    let sigma = 1.7;
    let f = move |y: &[f64]| (-y.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).exp();
    let src = RieszSource {
        f: &f,
        decay_exponent: 40.0,
        symmetry: Symmetry::Radial {
            center: vec![0.0; 5],
        },
        features: vec![Feature {
            center: vec![0.0; 5],
            scale: sigma,
        }],
    };
    for d in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let q = riesz_apply(&p, &src, &along(d * sigma), &spec)
            .unwrap()
            .value;
        let (v, g) = basis.gauss_pot(sigma, (d * sigma).powi(2));
        assert!((v / q - 1.0).abs() < 1e-6, "d={d}: {v} vs {q}");
        assert!((g - (-d * d).exp()).abs() <= 1e-12 * g);
    }
}

#[test]
fn power_potential_matches_riesz_quadrature() {
    let p = params(Mode::Positive);
    let basis = GalerkinBasis::standard(&p, &Ansatz::single(5, 1.0)).unwrap();
    let spec = QuadratureSpec::default().with_rel_tol(1e-8);
    for (sigma, beta) in [(1.0, 1.8), (2.5, 3.2)] {
        let f = move |y: &[f64]| {
            (1.0 + y.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).powf(-beta)
        };
        let src = RieszSource {
            f: &f,
            decay_exponent: 2.0 * beta,
            symmetry: Symmetry::Radial {
                center: vec![0.0; 5],
            },
            features: vec![Feature {
                center: vec![0.0; 5],
                scale: sigma,
            }],
        };
        for d in [0.0, 1.0, 3.0, 30.0] {
            let q = riesz_apply(&p, &src, &along(d * sigma), &spec)
                .unwrap()
                .value;
            let (v, _) = basis.power_pair(sigma, beta, (d * sigma).powi(2));
            assert!(
                (v / q - 1.0).abs() < 1e-6,
                "σ={sigma} β={beta} d={d}: {v} vs {q}"
            );
        }
    }
}

#[test]
fn sector_integral_recovers_bubble_mass() {
    let p = params(Mode::Positive);
    let a = polygon(Mode::Positive, 4);
    let basis = GalerkinBasis::standard(&p, &a).unwrap();
    let kern = p.kernel();
    let q = p.two_star();
    let got = basis.sector_integral(|x| a.bubbles.iter().map(|b| kern.eval(b, x).powf(q)).sum());
    let want = 4.0 * critical_integral(&p);
    assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn dictionary_shape() {
    let a = polygon(Mode::Positive, 4);
    assert_eq!(GalerkinBasis::local_fns(&a).len(), 24);
    assert!(GalerkinBasis::polygon_fns(&Ansatz::single(5, 1.0)).is_empty());
    let basis = GalerkinBasis::standard(&params(Mode::Positive), &a).unwrap();
    assert!(basis.len() > 24);
    let json = serde_json::to_string(&basis).unwrap();
    assert!(json.contains("Z_eps") && json.contains("gauss_pot"));
}

#[test]
fn kernel_modes_alone_are_degenerate() {
    let p = params(Mode::Positive);
    let basis = GalerkinBasis::kernel_only(&p, &polygon(Mode::Positive, 4)).unwrap();
    match assemble(&basis, &PotentialModel::for_mode(&p), NU) {
        Err(Error::Degenerate(msg)) => eprintln!("{msg}"),
        other => panic!(
            "expected a degenerate system, got {:?}",
            other.map(|s| s.report)
        ),
    }
}

#[test]
fn assembled_matrices_are_symmetric() {
    let sys = system_k4();
    eprintln!("{:?}", sys.report);
    let a = sys.quadratic_form();
    assert_eq!(a, a.transpose());
    // the unsymmetrized ∫ b_i (−Δ)^s b_j differs from its transpose by quadrature error only
    assert!(
        sys.report.raw_asymmetry < 1e-4,
        "{}",
        sys.report.raw_asymmetry
    );
    assert!(sys.report.cond < 1e10);
}

#[test]
fn single_bubble_has_morse_index_one() {
    let sys = single_bubble();
    let ev = sys.constrained_spectrum().unwrap();
    eprintln!("constrained spectrum {ev:?}");
    let p = params(Mode::Positive);
    // U satisfies both constraints and gives ⟨LU, U⟩ / ‖U‖² = 1 − p
    assert!(
        ev[0] < 0.0 && (ev[0] - (1.0 - p.p_exp())).abs() < 1e-3,
        "{}",
        ev[0]
    );
    assert!(ev[1] > 0.1, "{}", ev[1]);
}

#[test]
fn single_bubble_fixed_point_is_zero_in_one_step() {
    let st = single_bubble().fixed_point(10, 1e-12, None).unwrap();
    assert!(st.converged);
    assert_eq!(st.trace.len(), 1);
    assert!(st.coeffs.iter().all(|c| *c == 0.0));
    assert_eq!(st.phi_star, 0.0);
    assert_eq!(st.uncorrected_dstar, Some(0.0));
}

#[test]
fn zero_source_gives_zero_correction() {
    let sys = system_k4();
    for kind in [SolverKind::Collocation, SolverKind::Galerkin] {
        let st = sys.clone().with_solver(kind).solve_linear(|_| 0.0).unwrap();
        assert!(st.coeffs.iter().all(|c| *c == 0.0), "{kind:?}");
        assert_eq!(st.multipliers, [0.0, 0.0]);
        assert_eq!(st.phi_star, 0.0);
    }
}

#[test]
fn constraints_hold_after_solves() {
    let sys = system_k4();
    for seed in 0..4 {
        let src = SymmetricSource::random(&sys.basis.ansatz, seed, 4);
        let st = sys.solve_linear(|x| src.eval(&sys.basis, x)).unwrap();
        assert!(
            st.constraint_residue <= 1e-8,
            "seed {seed}: {}",
            st.constraint_residue
        );
        assert!(st.residual_dstar < 0.2 * st.rhs_dstar, "seed {seed}");
    }
    let src = SymmetricSource::random(&sys.basis.ansatz, 11, 4);
    let g = sys.clone().with_solver(SolverKind::Galerkin);
    let st = g.solve_linear(|x| src.eval(&g.basis, x)).unwrap();
    assert!(
        st.constraint_residue <= 1e-8,
        "galerkin: {}",
        st.constraint_residue
    );
}

#[test]
fn correction_stays_in_symmetry_class() {
    for mode in [Mode::Positive, Mode::SignChanging] {
        let p = params(mode);
        let a = polygon(mode, 4);
        let basis = GalerkinBasis::standard(&p, &a).unwrap();
        let count = a.len();
        let coeffs: Vec<f64> = (0..basis.len())
            .map(|j| ((j * 37 % 11) as f64 - 5.0) / 7.0)
            .collect();
        let sign = match mode {
            Mode::Positive => 1.0,
            Mode::SignChanging => -1.0,
        };
        let th = 2.0 * std::f64::consts::PI / count as f64;
        let mut worst = 0.0f64;
        for (i, x) in [
            [190.0, 12.0, 3.0, -4.0, 1.0],
            [5.0, -7.0, 0.5, 0.0, 2.0],
            [260.0, 90.0, 10.0, 1.0, 1.0],
        ]
        .iter()
        .enumerate()
        {
            let v = basis.combine(&coeffs, x);
            let (s, c) = th.sin_cos();
            let rot = [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2], x[3], x[4]];
            let refl = [x[0], -x[1], x[2], x[3], x[4]];
            let spin = [x[0], x[1], x[3], -x[2], x[4]];
            let scale = v.abs().max(1e-300);
            worst = worst
                .max((basis.combine(&coeffs, &rot) - sign * v).abs() / scale)
                .max((basis.combine(&coeffs, &refl) - v).abs() / scale)
                .max((basis.combine(&coeffs, &spin) - v).abs() / scale);
            eprintln!("{mode:?} point {i}: φ = {v:.6e}");
        }
        assert!(worst <= 1e-10, "{mode:?}: orbit deviation {worst}");
    }
}

#[test]
fn contraction_at_desk_scale() {
    let sys = system_k4();
    // the trust region ν^{-m/2} is only reached for larger ν; see the ledger
    match sys.fixed_point(30, 1e-12, None) {
        Err(Error::Divergence(msg)) => eprintln!("default trust region: {msg}"),
        other => panic!(
            "expected a trust-region violation, got {:?}",
            other.map(|s| s.phi_star)
        ),
    }
    let st = sys.fixed_point(30, 1e-12, Some(f64::INFINITY)).unwrap();
    let ratios = st.contraction_ratios();
    eprintln!(
        "‖φ‖_* {:.3e} gain {:.3} ratios {ratios:?} noise-limited {}",
        st.phi_star,
        st.residual_gain().unwrap(),
        st.noise_limited
    );
    assert!(st.converged);
    assert!(!ratios.is_empty() && ratios.iter().all(|r| *r <= 0.5));
    assert!(st.residual_gain().unwrap() >= 5.0);
    assert!(st.constraint_residue <= 1e-8);
    let diffs: Vec<f64> = st.trace.iter().skip(1).map(|t| t.diff_star).collect();
    for w in diffs.windows(2) {
        assert!(w[1] <= w[0] || w[1] <= 1e-9 * st.phi_star);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn frozen_operator_is_linear(t in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0], seed in 0u64..1000) {
        let sys = system_k4();
        let f = SymmetricSource::random(&sys.basis.ansatz, seed, 3);
        let g = SymmetricSource::random(&sys.basis.ansatz, seed + 1000, 3);
        let op = sys.frozen_operator(|x| f.eval(&sys.basis, x));
        let a = op.solve(|x| f.eval(&sys.basis, x)).unwrap();
        let b = op.solve(|x| g.eval(&sys.basis, x)).unwrap();
        let c = op.solve(|x| t * f.eval(&sys.basis, x) + g.eval(&sys.basis, x)).unwrap();
        let scale = a.coeffs.iter().chain(&b.coeffs).fold(0.0f64, |m, v| m.max(v.abs())) * (1.0 + t.abs());
        for ((ca, cb), cc) in a.coeffs.iter().zip(&b.coeffs).zip(&c.coeffs) {
            prop_assert!((cc - t * ca - cb).abs() <= 1e-10 * scale, "{} vs {}", cc, t * ca + cb);
        }
        // one multiplier can be ~1e-5 of the other, so compare against the pair's scale
        let mscale = (0..2).map(|l| t.abs() * a.multipliers[l].abs() + b.multipliers[l].abs()).fold(0.0, f64::max);
        for l in 0..2 {
            let want = t * a.multipliers[l] + b.multipliers[l];
            prop_assert!((c.multipliers[l] - want).abs() <= 1e-10 * mscale, "{} vs {}", c.multipliers[l], want);
        }
    }

    #[test]
    fn adaptive_solve_is_homogeneous_to_reweighting_noise(t in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0], seed in 0u64..1000) {
        let sys = system_k4();
        let src = SymmetricSource::random(&sys.basis.ansatz, seed, 3);
        let a = sys.solve_linear(|x| src.eval(&sys.basis, x)).unwrap();
        let b = sys.solve_linear(|x| t * src.eval(&sys.basis, x)).unwrap();
        let dphi = (b.phi_star / (t.abs() * a.phi_star) - 1.0).abs();
        let dres = (b.residual_dstar / (t.abs() * a.residual_dstar) - 1.0).abs();
        // the minimax optimum is flat, so reweighting lands on slightly different fits
        prop_assert!(dphi < 1e-4, "{}", dphi);
        prop_assert!(dres < 1e-2, "{}", dres);
    }
}
