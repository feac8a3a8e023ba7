use fraclab::params::{Bubble, ProblemParams};
use fraclab::quadrature::{
    axial_weight, convolution_decay_check, integrate, riesz_apply, Integrand, QuadratureSpec,
    RieszSource, Symmetry,
};
use fraclab::special::gamma_fn;
use std::f64::consts::PI;

fn params() -> ProblemParams {
    ProblemParams::default()
}

fn bubble_energy_oracle(p: &ProblemParams) -> f64 {
    let n = p.n as f64;
    p.alpha().powf(p.two_star()) * PI.powf(n / 2.0) * gamma_fn(n / 2.0).unwrap()
        / gamma_fn(n).unwrap()
}

#[test]
fn bubble_critical_integral_matches_beta_oracle() {
    let p = params();
    let k = p.kernel();
    let b = Bubble::centered(5, 1.0);
    let ts = p.two_star();
    let f = move |x: &[f64]| k.eval(&b, x).powf(ts);
    let spec = QuadratureSpec::default().with_rel_tol(1e-8);
    let oracle = bubble_energy_oracle(&p);
    for sym in [
        Symmetry::Radial {
            center: vec![0.0; 5],
        },
        Symmetry::Axis {
            origin: vec![0.0; 5],
            dir: vec![1.0, 0.0, 0.0, 0.0, 0.0],
        },
        Symmetry::Axial,
    ] {
        let ig = Integrand::new(&f, 5, 5.0)
            .symmetry(sym.clone())
            .feature(vec![0.0; 5], 1.0);
        let r = integrate(&ig, &spec).unwrap();
        let rel = (r.value / oracle - 1.0).abs();
        assert!(
            rel < 1e-6,
            "{sym:?}: {} vs {oracle} (rel {rel}), est err {}",
            r.value,
            r.error
        );
        assert!(
            r.error >= (r.value - oracle).abs() * 0.5,
            "{sym:?} error estimate too small"
        );
    }
}

#[test]
fn gaussian_through_axial_reduction() {
    let f = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp();
    let ig = Integrand::new(&f, 5, 10.0)
        .symmetry(Symmetry::Axial)
        .feature(vec![0.0; 5], 1.0);
    let r = integrate(&ig, &QuadratureSpec::default().with_rel_tol(1e-9)).unwrap();
    assert!((r.value / PI.powf(2.5) - 1.0).abs() < 1e-6);
    // the weight of the t-variable is the area of S^{N-3}
    assert!((axial_weight(5) - 4.0 * PI).abs() < 1e-14);
}

#[test]
fn odd_integrand_vanishes() {
    let f = |x: &[f64]| x[0] * (-x.iter().map(|v| v * v).sum::<f64>()).exp();
    let spec = QuadratureSpec::default().with_abs_tol(1e-10);
    let ig = Integrand::new(&f, 5, 10.0)
        .symmetry(Symmetry::Axial)
        .feature(vec![0.0; 5], 1.0);
    let r = integrate(&ig, &spec).unwrap();
    assert!(r.value.abs() <= 1e-10, "{}", r.value);
}

#[test]
fn riesz_inverts_bubble_identity() {
    let p = params();
    let k = p.kernel();
    let b = Bubble::centered(5, 1.0);
    let bb = b.clone();
    let f = move |x: &[f64]| k.frac_lap(&bb, x);
    let src = RieszSource {
        f: &f,
        decay_exponent: 5.0 + 1.8,
        symmetry: Symmetry::Radial {
            center: vec![0.0; 5],
        },
        features: vec![fraclab::quadrature::Feature {
            center: vec![0.0; 5],
            scale: 1.0,
        }],
    };
    let spec = QuadratureSpec::default().with_rel_tol(1e-7);
    for d in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let mut x = vec![0.0; 5];
        x[0] = d;
        let r = riesz_apply(&p, &src, &x, &spec).unwrap();
        let u = k.eval(&b, &x);
        assert!(
            (r.value / u - 1.0).abs() < 1e-5,
            "d={d}: {} vs {u}",
            r.value
        );
    }
}

#[test]
fn decay_fit() {
    let p = params();
    let spec = QuadratureSpec::default().with_rel_tol(1e-6);
    let ys = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    for kappa in [0.5, 1.0] {
        let fit = convolution_decay_check(&p, kappa, &ys, &spec).unwrap();
        eprintln!("{kappa}: {:?}", fit);
        assert!((fit.exponent / kappa - 1.0).abs() < 0.1);
    }
}
