use fraclab::energy::{
    compute_constants, decay_gain_trend, energy, energy_excess, l_k_eval, pair_interaction,
    product_bound_sup, verify_expansion, verify_n_estimate, ExpansionConstants, PotentialKind,
    PotentialModel,
};
use fraclab::geometry::{build_ansatz, Ansatz};
use fraclab::norms::{Flavor, NormSpec};
use fraclab::params::{Mode, ProblemParams};
use fraclab::quadrature::{fit_slope, QuadratureSpec};
use std::sync::OnceLock;

fn params() -> ProblemParams {
    ProblemParams::default()
}

fn consts() -> &'static ExpansionConstants {
    static C: OnceLock<ExpansionConstants> = OnceLock::new();
    C.get_or_init(|| {
        compute_constants(&params(), &QuadratureSpec::default().with_rel_tol(1e-8)).unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

// Reference values from an independent one-dimensional radial quadrature
// (scipy, rel 1e-13) of the defining integrals at the default parameters.
#[test]
fn constants_match_frozen_oracle() {
    let c = consts();
    let expect = [
        (c.a.value, 158.60086207770328),
        (c.b0.value, 99.68688451304558),
        (c.b1.value, 311.521514103351),
        (c.b_int.value, 5702.20552179637),
        (c.b2.value, 2851.102760898185),
        (c.b3.value, 18.571791371733706),
        (c.b3p.value, 133.5235068410017),
    ];
    for (got, want) in expect {
        assert!(rel(got, want) < 1e-9, "{got} vs {want}");
    }
    for (name, k) in c.rows() {
        assert!(k.value > 0.0, "{name}");
        assert!(k.error < 1e-5 * k.value, "{name}: error bar {}", k.error);
    }
    let p = params();
    assert!(rel(c.eps0(&p, false), 0.12900549330185532) < 1e-9);
    assert!(rel(c.eps0(&p, true), 2.1600856225350396) < 1e-9);
    let ratio = c.b1.value / c.b0.value;
    let m = p.m;
    let mom = fraclab::energy::moment_integral(&p, m - 2.0).unwrap()
        / fraclab::energy::moment_integral(&p, m).unwrap();
    assert!(rel(ratio, m * (m - 1.0) / 2.0 * mom) < 1e-12);
}

#[test]
fn pair_interaction_decay_and_coefficient() {
    let p = params();
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    let ds = [20.0, 40.0, 80.0, 160.0];
    let vals: Vec<f64> = ds
        .iter()
        .map(|&d| pair_interaction(d, 1.0, &p, &spec).unwrap())
        .collect();
    let lx: Vec<f64> = ds.iter().map(|d: &f64| d.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    assert!(rel(slope, -p.eta()) < 0.02, "slope {slope}");
    let coeff = vals[3] * 160f64.powf(p.eta());
    assert!(
        rel(coeff, consts().b_int.value) < 0.03,
        "coefficient {coeff}"
    );
    for w in vals.windows(2) {
        assert!(w[1] < w[0] && w[1] > 0.0);
    }
}

#[test]
fn single_bubble_energy_is_a() {
    let p = params();
    let spec = QuadratureSpec::default().with_rel_tol(1e-8);
    let a = Ansatz::single(5, 1.0);
    let e = energy(&a, &PotentialModel::unit(&p), 1.0, &p, &spec).unwrap();
    assert!(rel(e, consts().a.value) < 1e-6, "{e}");
}

#[test]
fn two_far_bubbles_excess_is_minus_pair() {
    let p = params();
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    let d = 40.0;
    let a = build_ansatz(&p, 2, d / 2.0, 1.0, Mode::Positive).unwrap();
    let unit = PotentialModel::unit(&p);
    let ex = energy_excess(&a, &unit, 1.0, &p, &spec).unwrap();
    let pair = pair_interaction(d, 1.0, &p, &spec).unwrap();
    assert!(ex < 0.0);
    // leading order: I − 2A = −∫U_1^{p}U_2 (two ordered pairs, factor ½ each)
    assert!(rel(-ex, pair) < 0.05, "{ex} vs {pair}");
    // scale invariance with K ≡ 1
    let b = build_ansatz(&p, 2, 3.0 * d / 2.0, 3.0, Mode::Positive).unwrap();
    let ex3 = energy_excess(&b, &unit, 1.0, &p, &spec).unwrap();
    assert!(rel(ex3, ex) < 1e-5, "{ex3} vs {ex}");
    let full = energy(&a, &unit, 1.0, &p, &spec).unwrap();
    assert!((full - 2.0 * consts().a.value - ex).abs() < 1e-5 * full);
}

#[test]
fn expansion_terms_at_desk_scale() {
    let p = params();
    let c = consts();
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    let model = PotentialModel::for_mode(&p);
    let rep = verify_expansion(&p, &model, c, 4, 200.0, c.eps0(&p, false), 0.6, &spec).unwrap();
    for t in &rep.terms {
        eprintln!(
            "{}: measured {:.6e} modeled {:.6e} dev {:.3e}",
            t.name, t.measured, t.modeled, t.rel_dev
        );
    }
    assert!(rep.term("k_deficit").unwrap().rel_dev < 0.05);
    assert!(rep.term("quadratic").unwrap().rel_dev < 0.10);
    assert!(rep.term("cross").unwrap().rel_dev < 0.05);
}

#[test]
fn deficit_scales_as_eps_to_minus_m() {
    let p = params();
    let c = consts();
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    let model = PotentialModel::new(&p, PotentialKind::KMax);
    let es = [0.5, 1.0, 2.0];
    let vals: Vec<f64> = es
        .iter()
        .map(|&e| {
            let r = verify_expansion(&p, &model, c, 1, 400.0, e, 0.6, &spec).unwrap();
            r.term("k_deficit").unwrap().measured
        })
        .collect();
    let lx: Vec<f64> = es.iter().map(|e: &f64| e.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    assert!((slope + p.m).abs() < 0.05 * p.m, "{slope}");
}

#[test]
fn error_term_decays_with_nu() {
    let p = params();
    let c = consts();
    let kern = p.kernel();
    let model = PotentialModel::for_mode(&p);
    let w = 1.0 / c.eps0(&p, false);
    let nus = [50.0, 100.0, 200.0, 400.0];
    let mut norms = Vec::new();
    for &nu in &nus {
        let a = build_ansatz(&p, 4, nu * p.r0, w, Mode::Positive).unwrap();
        let spec = NormSpec::standard(&p, a.centers(), w, Flavor::Dstar);
        norms.push(
            spec.norm(|x| l_k_eval(&a, &kern, &model, nu, x))
                .unwrap()
                .value,
        );
    }
    let lx: Vec<f64> = nus.iter().map(|v: &f64| v.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    eprintln!("l_k norms {norms:?} slope {slope}");
    assert!(slope <= -p.m / 2.0 * 0.85);
    // single exact bubble with K ≡ 1 has no error term
    let one = Ansatz::single(5, 1.0);
    let unit = PotentialModel::unit(&p);
    assert_eq!(
        l_k_eval(&one, &kern, &unit, 1.0, &[0.3, 0.1, 0.0, 0.2, 0.0]),
        0.0
    );
}

#[test]
fn nonlinearity_power() {
    let p = params();
    let rep = verify_n_estimate(&p, consts()).unwrap();
    eprintln!("N slopes {:?} constants {:?}", rep.slopes, rep.constants);
    assert!(rep.min_slope >= rep.power - 0.1);
}

#[test]
fn product_bound_ratio_is_bounded() {
    let r = product_bound_sup(5, 20_000, 7);
    eprintln!("{r:?}");
    assert!(r.sup_full <= r.bound);
    assert!(r.growth < 0.10);
}

#[test]
fn convolution_gains_decay() {
    let p = params();
    let spec = QuadratureSpec::default().with_rel_tol(1e-6);
    let r = decay_gain_trend(&p, 0.5, &[2.0, 4.0, 8.0, 16.0, 32.0, 64.0], &spec).unwrap();
    eprintln!("{r:?}");
    assert!(r.gain > 0.0);
}
