use fraclab::energy::{compute_constants, energy_excess, ExpansionConstants, PotentialModel};
use fraclab::geometry::build_ansatz;
use fraclab::params::{Mode, ProblemParams};
use fraclab::quadrature::QuadratureSpec;
use fraclab::reduced::{
    Face, FlowKind, FlowOptions, LatticeSum, ModelForm, ReducedModel, Termination,
};
use proptest::prelude::*;
use std::sync::OnceLock;

fn params(mode: Mode) -> ProblemParams {
    ProblemParams {
        mode,
        ..ProblemParams::default()
    }
}

fn consts() -> &'static ExpansionConstants {
    static C: OnceLock<ExpansionConstants> = OnceLock::new();
    C.get_or_init(|| {
        compute_constants(
            &params(Mode::Positive),
            &QuadratureSpec::default().with_rel_tol(1e-8),
        )
        .unwrap()
    })
}

fn model(mode: Mode, k: usize) -> ReducedModel {
    ReducedModel::new(&params(mode), consts(), k).unwrap()
}

#[test]
fn model_at_center_matches_display() {
    for mode in [Mode::Positive, Mode::SignChanging] {
        let m = model(mode, 8);
        let p = &m.p;
        let c = consts();
        let (r, e) = (m.r_center(), 0.2);
        let (b0, b3, sign) = match mode {
            Mode::Positive => (c.b0.value, c.b3.value, 1.0),
            Mode::SignChanging => (c.b0p.value, c.b3p.value, -1.0),
        };
        let eta = p.eta();
        let kf = m.k as f64;
        let per = c.a.value
            + sign * (b0 / (e * m.nu).powf(p.m) - b3 * kf.powf(eta) / (e * m.nu * p.r0).powf(eta));
        let got = m.f_model(r, e) / m.count();
        assert!((got - per).abs() < 1e-12 * per, "{mode:?}: {got} vs {per}");
        assert_eq!(m.grad_f(r, e).0, 0.0);
    }
}

#[test]
fn eps0_is_root_of_derivative() {
    for mode in [Mode::Positive, Mode::SignChanging] {
        for k in [4, 8, 16, 32] {
            let m = model(mode, k);
            let e0 = m.eps0();
            let d = m.df_deps_model(m.r_center(), e0);
            let scale = m.scale() * m.p.m * consts().b0.value * e0.powf(-m.p.m - 1.0);
            assert!(d.abs() <= 1e-12 * scale, "{mode:?} k={k}: {d} vs {scale}");
        }
    }
    let p = params(Mode::Positive);
    let bigger = ExpansionConstants {
        b3: consts().b3.scaled(1.5),
        ..*consts()
    };
    assert!(bigger.eps0(&p, false) > consts().eps0(&p, false));
    assert!((model(Mode::Positive, 4).eps0() - consts().eps0(&p, false)).abs() < 1e-15);
}

#[test]
fn sign_changing_derivative_flips_leading_signs() {
    let pos = model(Mode::Positive, 8);
    let neg = model(Mode::SignChanging, 8);
    // past ε0 the B0 term dominates: F decreases in ε for positive, F̄ increases for sign-changing
    for f in [1.5, 3.0] {
        assert!(pos.df_deps_model(pos.r_center(), f * pos.eps0()) < 0.0);
        assert!(neg.df_deps_model(neg.r_center(), f * neg.eps0()) > 0.0);
        assert!(pos.df_deps_model(pos.r_center(), pos.eps0() / f) > 0.0);
        assert!(neg.df_deps_model(neg.r_center(), neg.eps0() / f) < 0.0);
    }
}

#[test]
fn omega_rejects_nonpositive_eps() {
    let p = params(Mode::Positive);
    assert!(ReducedModel::build(
        &p,
        consts(),
        8,
        p.nu_of_k(8),
        true,
        0.05,
        ModelForm::Localized
    )
    .is_err());
    let m = model(Mode::Positive, 8);
    let om = m.omega();
    assert!(om.e_lo > 0.0 && om.r_lo < om.r_hi);
    assert!(m
        .flow_solve(
            (om.r_hi + 1.0, m.eps0()),
            FlowKind::Descent,
            &FlowOptions::default()
        )
        .is_err());
}

#[test]
fn descent_from_top_face_moves_inward_and_is_monotone() {
    let m = model(Mode::Positive, 16);
    let om = m.omega();
    let start = (m.r_center(), om.e_hi);
    let ge = m.grad_g(start.0, start.1).1;
    assert!(ge > 0.0);
    let opts = FlowOptions::default();
    let tr = m.flow_solve(start, FlowKind::Descent, &opts).unwrap();
    assert!(tr.path[1].1 < om.e_hi);
    for w in tr.values.windows(2) {
        assert!(w[1] <= w[0]);
    }
    // on the symmetry line r = νr0 the descent slides to the saddle
    assert_eq!(tr.termination, Termination::Converged);
    assert!((tr.eps - m.eps0()).abs() < 1e-6 * m.eps0());

    // slightly off the line it leaves through the sublevel α1 before reaching a face
    let off = (m.r_center() + 1e-3 * (om.r_hi - m.r_center()), m.eps0());
    assert!(m.g(off.0, off.1) > m.alpha_levels_g().0);
    let tr = m.flow_solve(off, FlowKind::Descent, &opts).unwrap();
    eprintln!(
        "descent off-line: {:?} after {} steps",
        tr.termination, tr.iterations
    );
    assert_eq!(tr.termination, Termination::Sublevel);
    assert!(tr.iterations > 0 && om.contains(tr.r, tr.eps));
    for w in tr.values.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn landscape_coupled_regime() {
    for mode in [Mode::Positive, Mode::SignChanging] {
        for k in [16, 32] {
            let m = model(mode, k);
            let rep = m.landscape(64, 64, 10, 11).unwrap();
            eprintln!(
                "{mode:?} k={k}: eps rel {:.2e} |∇F| {:.2e} spread {:.2e} sig {:?} faces {:?} cert {:?}",
                rep.eps_rel_error(),
                rep.critical.grad_norm,
                rep.start_spread(),
                rep.hessian_signature,
                rep.faces.iter().map(|f| f.margin).collect::<Vec<_>>(),
                rep.certificate
            );
            assert_eq!(rep.grid.len(), 64 * 64);
            assert!(rep.eps_rel_error() <= 1e-6);
            for t in std::iter::once(&rep.critical).chain(&rep.starts) {
                assert!(t.converged(), "{:?}", t.termination);
                assert!(t.grad_norm <= 1e-10 * k as f64);
                assert!(rep.omega.contains(t.r, t.eps));
            }
            assert!(rep.start_spread() < 1e-8);
            assert_eq!(rep.hessian_signature, (1, 1));
            assert!(rep.faces.iter().all(|f| f.pass), "{:?}", rep.faces);
            assert!(rep.certificate.pass());
            assert!(rep.certificate.alpha1 < rep.certificate.alpha2);
        }
    }
}

#[test]
fn faces_are_reported_individually() {
    let m = model(Mode::Positive, 16);
    let faces: Vec<Face> = m.boundary_signs(32).iter().map(|f| f.face).collect();
    assert_eq!(
        faces,
        vec![Face::RLow, Face::RHigh, Face::EpsLow, Face::EpsHigh]
    );
}

#[test]
fn expansion_form_critical_point_approaches_eps0() {
    let mut devs = Vec::new();
    for k in [4, 8, 16, 32] {
        // the expansion-form shift of r* is O(1/ν), outside the θ̄ = 0.6 window at k = 4
        let m = model(Mode::Positive, k)
            .with_theta_bar(0.3)
            .unwrap()
            .with_form(ModelForm::Expansion)
            .unwrap();
        let cp = m.critical_point().unwrap();
        assert!(cp.converged(), "k={k}: {:?}", cp.termination);
        devs.push((cp.eps - m.eps0()).abs());
    }
    eprintln!("|eps* - eps0| over k: {devs:?}");
    for w in devs.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn argmin_invariant_under_b_scaling() {
    let m = model(Mode::Positive, 16)
        .with_form(ModelForm::Expansion)
        .unwrap();
    let a = m.critical_point().unwrap();
    for f in [0.25, 3.0, 40.0] {
        let s = m.with_constants(&consts().scale_b(f)).unwrap();
        let b = s.critical_point().unwrap();
        assert!((a.r - b.r).abs() <= 1e-12 * a.r, "{f}: {} vs {}", a.r, b.r);
        assert!(
            (a.eps - b.eps).abs() <= 1e-10 * a.eps,
            "{f}: {} vs {}",
            a.eps,
            b.eps
        );
    }
}

// The analytic model drops O(k ν^{-m-ϵ}) terms; the largest dropped piece at
// k=4 is the gap between the exact chord sum and its large-k asymptote.
#[test]
fn model_matches_quadrature_energy_at_desk_scale() {
    let p = params(Mode::Positive);
    let k = 4;
    let nu = 200.0;
    let exact = ReducedModel::decoupled(&p, consts(), k, nu)
        .unwrap()
        .with_lattice(LatticeSum::Exact)
        .unwrap();
    let asym = ReducedModel::decoupled(&p, consts(), k, nu).unwrap();
    let (r, e) = (nu * p.r0, asym.eps0());
    let a = build_ansatz(&p, k, r, 1.0 / e, Mode::Positive).unwrap();
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    let measured = energy_excess(&a, &PotentialModel::for_mode(&p), nu, &p, &spec).unwrap();
    let m_exact = exact.f_excess(r, e);
    let m_asym = asym.f_excess(r, e);
    eprintln!("excess: quadrature {measured:.6e} exact-sum model {m_exact:.6e} asymptotic model {m_asym:.6e}");
    assert!((measured / m_exact - 1.0).abs() < 0.05);
    let dropped = (m_exact - m_asym).abs() + 0.05 * m_exact.abs();
    assert!((measured - m_asym).abs() <= dropped);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_match_finite_differences(
        k in 4usize..40,
        u in -1.0f64..1.0,
        v in -1.0f64..1.0,
        sign in any::<bool>(),
        expansion in any::<bool>(),
    ) {
        let mode = if sign { Mode::SignChanging } else { Mode::Positive };
        let form = if expansion { ModelForm::Expansion } else { ModelForm::Localized };
        let m = model(mode, k).with_form(form).unwrap();
        let om = m.omega();
        let r = m.r_center() + u * (om.r_hi - om.r_lo) / 2.0;
        let e = m.eps0() + v * (om.e_hi - om.e_lo) / 2.0;
        let (gr, ge) = m.grad_g(r, e);
        let he = 1e-6 * e;
        let hr = 0.05 * (om.r_hi - om.r_lo);
        let fe = (m.g(r, e + he) - m.g(r, e - he)) / (2.0 * he);
        let cd = |h: f64| {
            let (rp, rm) = (r + h, r - h);
            (m.g(rp, e) - m.g(rm, e)) / (rp - rm)
        };
        let fr = (4.0 * cd(hr / 2.0) - cd(hr)) / 3.0;
        // round-off floor: g is a sum of O(B0 ε^-m) terms evaluated at r ± h
        let mag = 4.0 * consts().b0.value * e.powf(-m.p.m);
        let floor = |h: f64| 64.0 * f64::EPSILON * mag / h;
        prop_assert!((fe - ge).abs() <= 1e-8 * ge.abs() + floor(he), "eps: {} vs {}", fe, ge);
        prop_assert!((fr - gr).abs() <= 1e-8 * gr.abs() + floor(hr / 2.0), "r: {} vs {}", fr, gr);
        // F and F̃ differ only by the sign convention
        let (fr1, fe1) = m.grad_f(r, e);
        prop_assert!((fe1 - m.df_deps_model(r, e)).abs() == 0.0);
        prop_assert!((fr1.abs() - m.scale() * gr.abs()).abs() <= 1e-12 * fr1.abs().max(1e-300));
    }
}
