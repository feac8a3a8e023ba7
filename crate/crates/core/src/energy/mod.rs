//! Potential K, the energy functional on the ansatz, the error term l_k and
//! the nonlinearity N(φ), expansion constants and their term-by-term checks.

mod constants;
mod potential;
mod verify;

pub use constants::{
    compute_constants, critical_integral, moment_integral, source_integral, Constant,
    ExpansionConstants, Provenance,
};
pub use potential::{k_eval, k_scaled, nu_of_k, PotentialKind, PotentialModel};
pub use verify::{
    decay_gain_trend, product_bound_sup, verify_expansion, verify_n_estimate, DecayGainReport,
    ExpansionReport, NEstimateReport, ProductBoundReport, TermCheck,
};

use crate::error::{Error, Result};
use crate::geometry::Ansatz;
use crate::params::{odd_pow, Bubble, BubbleKernel, Mode, ProblemParams};
use crate::quadrature::{integrate, Integrand, QuadratureSpec, Symmetry};
use std::f64::consts::PI;

/// ∫ U_{ε,0}^{2*_s-1} U_{ε,d e_1}.
pub fn pair_interaction(d: f64, eps: f64, p: &ProblemParams, spec: &QuadratureSpec) -> Result<f64> {
    if !(d > 0.0) || !(eps > 0.0) {
        return Err(Error::Invalid(format!(
            "pair_interaction needs d > 0 and eps > 0, got d={d}, eps={eps}"
        )));
    }
    let kern = p.kernel();
    let b0 = Bubble::centered(p.n, eps);
    let mut c = vec![0.0; p.n];
    c[0] = d;
    let b1 = Bubble::new(eps, c.clone(), 1.0);
    let pe = p.p_exp();
    let f = |x: &[f64]| kern.eval(&b0, x).powf(pe) * kern.eval(&b1, x);
    let mut dir = vec![0.0; p.n];
    dir[0] = 1.0;
    let ig = Integrand::new(&f, p.n, p.n as f64)
        .symmetry(Symmetry::Axis {
            origin: vec![0.0; p.n],
            dir,
        })
        .feature(vec![0.0; p.n], eps)
        .feature(c, eps);
    Ok(integrate(&ig, spec)?.value)
}

/// Fundamental wedge of the configuration's symmetry group and its multiplicity.
fn wedge_of(a: &Ansatz) -> Option<(f64, f64)> {
    // the wedge [0, π/count] is a fundamental domain only when x^1 lies on the
    // positive x_1 axis
    if a.len() < 2 || a.bubbles[0].xi[1].abs() > 1e-12 * a.r || a.bubbles[0].xi[0] <= 0.0 {
        return None;
    }
    let count = a.len() as f64;
    Some((PI / count, 2.0 * count))
}

/// Distinct cross terms s_1 s_j ∫U_1^{p} U_j with their multiplicities.
fn cross_terms(a: &Ansatz, p: &ProblemParams, spec: &QuadratureSpec) -> Result<f64> {
    let count = a.len();
    let mut total = 0.0;
    for j in 2..=count {
        let mirror = count + 2 - j;
        if mirror < j {
            continue;
        }
        let mult = if mirror == j { 1.0 } else { 2.0 };
        let d = a.bubbles[0].dist2(&a.bubbles[j - 1].xi).sqrt();
        let sgn = a.bubbles[0].sign * a.bubbles[j - 1].sign;
        total += mult * sgn * pair_interaction(d, a.eps, p, spec)?;
    }
    Ok(total)
}

fn check_symmetric(a: &Ansatz) -> Result<()> {
    if a.len() >= 2 && a.mode == Mode::Positive && a.len() != a.k {
        return Err(Error::Invalid(
            "ansatz bubble count does not match k".into(),
        ));
    }
    Ok(())
}

fn domain_integral<F>(a: &Ansatz, p: &ProblemParams, f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut ig = Integrand::new(&f, p.n, p.n as f64).symmetry(Symmetry::Axial);
    for b in &a.bubbles {
        ig = ig.feature(b.xi.clone(), a.eps);
    }
    if let Some((angle, copies)) = wedge_of(a) {
        ig = ig.wedge(angle, copies);
    }
    Ok(integrate(&ig, spec)?.value)
}

/// I(U) = ½ ΣΣ s_i s_j ∫U_i^{p}U_j − (1/2*_s) ∫ K(|x|/ν)|U|^{2*_s}, with the
/// diagonal of the quadratic part in closed form and the rest by quadrature.
pub fn energy(
    a: &Ansatz,
    model: &PotentialModel,
    nu: f64,
    p: &ProblemParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_symmetric(a)?;
    let kern = p.kernel();
    let q = p.two_star();
    let count = a.len() as f64;
    let diag = count * critical_integral(p);
    let cross = if a.len() > 1 {
        count * cross_terms(a, p, spec)?
    } else {
        0.0
    };
    let f = |x: &[f64]| model.scaled(x, nu) * a.eval(&kern, x).abs().powf(q);
    let pot = domain_integral(a, p, f, spec)?;
    Ok(0.5 * (diag + cross) - pot / q)
}

/// |ΣU_i|^q − Σ|U_i|^q without cancellation when one bubble dominates.
fn mixing(kern: &BubbleKernel, bubbles: &[Bubble], x: &[f64], q: f64) -> f64 {
    let vals: Vec<f64> = bubbles.iter().map(|b| kern.eval(b, x)).collect();
    let mut top = 0;
    for (i, v) in vals.iter().enumerate() {
        if v.abs() > vals[top].abs() {
            top = i;
        }
    }
    let u1 = vals[top];
    let mut rest = 0.0;
    let mut others = 0.0;
    for (i, v) in vals.iter().enumerate() {
        if i != top {
            rest += v;
            others += v.abs().powf(q);
        }
    }
    let t = rest / u1;
    if t.abs() <= 0.5 {
        u1.abs().powf(q) * (q * t.ln_1p()).exp_m1() - others
    } else {
        (u1 + rest).abs().powf(q) - u1.abs().powf(q) - others
    }
}

/// I(U) − (#bubbles)·A integrated term by term, so that the small excess is
/// never formed as a difference of O(k) totals.
pub fn energy_excess(
    a: &Ansatz,
    model: &PotentialModel,
    nu: f64,
    p: &ProblemParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_symmetric(a)?;
    let kern = p.kernel();
    let q = p.two_star();
    let count = a.len() as f64;
    let cross = if a.len() > 1 {
        0.5 * count * cross_terms(a, p, spec)?
    } else {
        0.0
    };
    let f = |x: &[f64]| {
        let off = model.offset(x.iter().map(|v| v * v).sum::<f64>().sqrt() / nu);
        let kpart = if off == 0.0 {
            0.0
        } else {
            off * a.eval(&kern, x).abs().powf(q)
        };
        let mix = if a.len() > 1 {
            mixing(&kern, &a.bubbles, x, q)
        } else {
            0.0
        };
        kpart + mix
    };
    let pot = domain_integral(a, p, f, spec)?;
    Ok(cross - pot / q)
}

/// l_k = K(|x|/ν)|U|^{p-1}U − Σ_i |U_i|^{p-1}U_i.
pub fn l_k_eval(
    a: &Ansatz,
    kern: &BubbleKernel,
    model: &PotentialModel,
    nu: f64,
    x: &[f64],
) -> f64 {
    let u = a.eval(kern, x);
    model.scaled(x, nu) * odd_pow(u, kern.p) - a.frac_lap(kern, x)
}

/// f(u+φ) − f(u) − f'(u)φ for f(u) = |u|^{p-1}u, accurate for |φ| ≪ |u|.
pub fn nonlinearity(u: f64, phi: f64, p: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    if u != 0.0 {
        let t = phi / u;
        if t.abs() < 1e-2 {
            // binomial series in t, f(u)·Σ_{j≥2} C(p,j) t^j
            let mut c = p * (p - 1.0) / 2.0;
            let mut tj = t * t;
            let mut acc = 0.0;
            for j in 2..12 {
                acc += c * tj;
                c *= (p - j as f64) / (j as f64 + 1.0);
                tj *= t;
            }
            return odd_pow(u, p) * acc;
        }
    }
    odd_pow(u + phi, p) - odd_pow(u, p) - p * u.abs().powf(p - 1.0) * phi
}

/// N(φ)(x) = K(|x|/ν)[f(U+φ) − f(U) − f'(U)φ] given φ(x).
pub fn n_phi_eval(
    a: &Ansatz,
    kern: &BubbleKernel,
    model: &PotentialModel,
    nu: f64,
    phi: f64,
    x: &[f64],
) -> f64 {
    model.scaled(x, nu) * nonlinearity(a.eval(kern, x), phi, kern.p)
}
