use super::{n_phi_eval, pair_interaction, ExpansionConstants, PotentialModel};
use crate::error::{Error, Result};
use crate::geometry::{build_ansatz, chord};
use crate::norms::{Flavor, NormSpec};
use crate::params::{Bubble, Mode, ProblemParams};
use crate::quadrature::{
    fit_slope, integrate, riesz_apply, Feature, Integrand, QuadratureSpec, RieszSource, Symmetry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TermCheck {
    pub name: String,
    pub measured: f64,
    pub modeled: f64,
    pub rel_dev: f64,
    /// Quadrature error estimate of the measured value.
    pub error: f64,
}

impl TermCheck {
    fn new(name: &str, measured: f64, modeled: f64, error: f64) -> Self {
        TermCheck {
            name: name.to_string(),
            measured,
            modeled,
            rel_dev: (measured / modeled - 1.0).abs(),
            error,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub k: usize,
    pub nu: f64,
    /// Concentration ε (the bubble width is 1/ε).
    pub eps: f64,
    pub offsets: Vec<f64>,
    pub quadratic_values: Vec<f64>,
    pub terms: Vec<TermCheck>,
}

impl ExpansionReport {
    pub fn term(&self, name: &str) -> Option<&TermCheck> {
        self.terms.iter().find(|t| t.name == name)
    }
}

fn e1(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// (1/2*_s) ∫ g(|y + c e_1|/ν) U_{w,0}^{2*_s}(y) dy for a radial weight g.
fn shifted_k_integral<G>(
    p: &ProblemParams,
    w: f64,
    g: G,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let kern = p.kernel();
    let b = Bubble::centered(p.n, w);
    let q = p.two_star();
    let f = |y: &[f64]| {
        let v = g(y);
        if v == 0.0 {
            0.0
        } else {
            v * kern.eval(&b, y).powf(q)
        }
    };
    let ig = Integrand::new(&f, p.n, p.n as f64)
        .symmetry(Symmetry::Axis {
            origin: vec![0.0; p.n],
            dir: e1(p.n),
        })
        .feature(vec![0.0; p.n], w);
    let r = integrate(&ig, spec)?;
    Ok((r.value / q, r.error / q))
}

fn radius_shifted(y: &[f64], c: f64) -> f64 {
    let mut s = (y[0] + c) * (y[0] + c);
    for v in &y[1..] {
        s += v * v;
    }
    s.sqrt()
}

/// Term-by-term check of the energy expansion of the ansatz at r = νr0.
///
/// Each term is integrated on its own: the potential deficit of one bubble,
/// the change of that deficit when the center moves by Δ ∈ {0,±1,±2}·ν^{-θ̄},
/// and the cross interactions with the other bubbles.
pub fn verify_expansion(
    p: &ProblemParams,
    model: &PotentialModel,
    consts: &ExpansionConstants,
    k: usize,
    nu: f64,
    eps: f64,
    theta_bar: f64,
    spec: &QuadratureSpec,
) -> Result<ExpansionReport> {
    if !(eps > 0.0) || !(nu > 0.0) {
        return Err(Error::Invalid(format!(
            "need eps > 0 and nu > 0, got {eps}, {nu}"
        )));
    }
    let w = 1.0 / eps;
    let r = nu * p.r0;
    let m = p.m;
    let eta = p.eta();
    let alternating = p.mode == Mode::SignChanging;
    let mut terms = Vec::new();

    let (def, def_err) =
        shifted_k_integral(p, w, |y| model.deficit(radius_shifted(y, r) / nu), spec)?;
    let b0 = if alternating {
        consts.b0p.value
    } else {
        consts.b0.value
    };
    let sign = model.deficit(p.r0 + 0.5 * p.delta).signum();
    terms.push(TermCheck::new(
        "k_deficit",
        def,
        sign * b0 * (w / nu).powf(m),
        def_err,
    ));

    let h = nu.powf(-theta_bar);
    let offsets: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|j| j * h).collect();
    let mut qv = Vec::new();
    let mut qerr: f64 = 0.0;
    for &d in &offsets {
        if d == 0.0 {
            qv.push(0.0);
            continue;
        }
        let (v, e) = shifted_k_integral(
            p,
            w,
            |y| {
                model.deficit(radius_shifted(y, r + d) / nu)
                    - model.deficit(radius_shifted(y, r) / nu)
            },
            spec,
        )?;
        qv.push(v);
        qerr = qerr.max(e);
    }
    // least squares for D(Δ) = bΔ + cΔ²
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&d, &v) in offsets.iter().zip(&qv) {
        s11 += d * d;
        s12 += d * d * d;
        s22 += d * d * d * d;
        t1 += d * v;
        t2 += d * d * v;
    }
    let det = s11 * s22 - s12 * s12;
    let c2 = (s11 * t2 - s12 * t1) / det;
    let b1 = if alternating {
        consts.b1p.value
    } else {
        consts.b1.value
    };
    terms.push(TermCheck::new(
        "quadratic",
        c2,
        sign * b1 * w.powf(m - 2.0) / nu.powf(m),
        qerr / (h * h),
    ));

    if k >= 2 {
        let count = if alternating { 2 * k } else { k };
        let mut measured = 0.0;
        let mut modeled = 0.0;
        for j in 2..=count {
            let mirror = count + 2 - j;
            if mirror < j {
                continue;
            }
            let mult = if mirror == j { 1.0 } else { 2.0 };
            let sgn = if alternating && j % 2 == 0 { -1.0 } else { 1.0 };
            let d = chord(count, r, j);
            measured += mult * sgn * 0.5 * pair_interaction(d, w, p, spec)?;
            modeled += mult * sgn * consts.b2.value * (w / d).powf(eta);
        }
        terms.push(TermCheck::new(
            "cross",
            measured,
            modeled,
            spec.rel_tol * measured.abs(),
        ));
    }
    Ok(ExpansionReport {
        k,
        nu,
        eps,
        offsets,
        quadratic_values: qv,
        terms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NEstimateReport {
    pub ts: Vec<f64>,
    /// ‖tψ‖_* per dictionary entry.
    pub star: Vec<Vec<f64>>,
    /// ‖N(tψ)‖_** per dictionary entry.
    pub dstar: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    pub min_slope: f64,
    /// Expected power min{2*_s − 1, 2}.
    pub power: f64,
    /// sup over t of ‖N(tψ)‖_** / ‖tψ‖_*^power per dictionary entry.
    pub constants: Vec<f64>,
}

/// Slope of ‖N(tψ)‖_** against ‖tψ‖_* for a fixed dictionary of ψ around the
/// k = 4 ansatz at ν = 200, t ∈ [1e-3, 1e-1].
pub fn verify_n_estimate(
    p: &ProblemParams,
    consts: &ExpansionConstants,
) -> Result<NEstimateReport> {
    let k = 4;
    let nu = 200.0;
    let alternating = p.mode == Mode::SignChanging;
    let w = 1.0 / consts.eps0(p, alternating);
    let a = build_ansatz(p, k, nu * p.r0, w, p.mode)?;
    let kern = p.kernel();
    let model = PotentialModel::for_mode(p);
    let star = NormSpec::standard(p, a.centers(), w, Flavor::Star);
    let dstar = star.with_flavor(p, Flavor::Dstar);
    let ts: Vec<f64> = (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    let dict: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = vec![
        Box::new(|x: &[f64]| a.d_eps(&kern, x)),
        Box::new(|x: &[f64]| a.d_r(&kern, x)),
        Box::new(|x: &[f64]| star.weight(x)),
    ];
    let power = (p.p_exp()).min(2.0);
    let mut out_star = Vec::new();
    let mut out_dstar = Vec::new();
    let mut slopes = Vec::new();
    let mut consts_out = Vec::new();
    for psi in &dict {
        let base = star.norm(|x| psi(x))?.value;
        let mut sv = Vec::new();
        let mut dv = Vec::new();
        for &t in &ts {
            let c = t / base;
            sv.push(star.norm(|x| c * psi(x))?.value);
            dv.push(
                dstar
                    .norm(|x| n_phi_eval(&a, &kern, &model, nu, c * psi(x), x))?
                    .value,
            );
        }
        let lx: Vec<f64> = sv.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = dv.iter().map(|v| v.ln()).collect();
        slopes.push(fit_slope(&lx, &ly));
        consts_out.push(
            sv.iter()
                .zip(&dv)
                .map(|(s, d)| d / s.powf(power))
                .fold(0.0, f64::max),
        );
        out_star.push(sv);
        out_dstar.push(dv);
    }
    let min_slope = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(NEstimateReport {
        ts,
        star: out_star,
        dstar: out_dstar,
        slopes,
        min_slope,
        power,
        constants: consts_out,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductBoundReport {
    pub samples: usize,
    pub sup_half: f64,
    pub sup_full: f64,
    /// sup_full / sup_half − 1.
    pub growth: f64,
    /// Elementary bound 2^{σ_max}.
    pub bound: f64,
}

/// Empirical sup of LHS/RHS (with C = 1) of the two-center product bound
/// (1+|y−x^i|)^{-a}(1+|y−x^j|)^{-b} ≤ C|x^i−x^j|^{-σ}[(1+|y−x^i|)^{-(a+b−σ)} + (1+|y−x^j|)^{-(a+b−σ)}].
///
/// The first half of the samples gives `sup_half`; all of them `sup_full`.
pub fn product_bound_sup(n: usize, samples: usize, seed: u64) -> ProductBoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (amin, amax) = (0.5, 4.0);
    let mut sup_half: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..samples {
        let a: f64 = rng.random_range(amin..amax);
        let b: f64 = rng.random_range(amin..amax);
        let sigma = rng.random_range(0.0..1.0) * a.min(b);
        let d = 10f64.powf(rng.random_range(-2.0..3.0));
        // y relative to x^i at a scale comparable to d, in a random direction
        let ry = d * 10f64.powf(rng.random_range(-2.0..1.0));
        let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        dir.iter_mut().for_each(|v| *v /= l);
        let y: Vec<f64> = dir.iter().map(|v| v * ry).collect();
        let di = 1.0 + ry;
        let dj = 1.0 + {
            let mut s = (y[0] - d) * (y[0] - d);
            for v in &y[1..] {
                s += v * v;
            }
            s.sqrt()
        };
        let e = a + b - sigma;
        let lhs = di.powf(-a) * dj.powf(-b);
        let rhs = d.powf(-sigma) * (di.powf(-e) + dj.powf(-e));
        let ratio = lhs / rhs;
        sup = sup.max(ratio);
        if i + 1 == samples / 2 {
            sup_half = sup;
        }
    }
    ProductBoundReport {
        samples,
        sup_half,
        sup_full: sup,
        growth: sup / sup_half - 1.0,
        bound: 2f64.powf(amax),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayGainReport {
    pub sigma: f64,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub weight_exponent: f64,
    pub plain_exponent: f64,
    /// Richardson-extrapolated decay exponent of the convolution.
    pub exponent: f64,
    /// Decay gained over the weight: exponent − weight_exponent.
    pub gain: f64,
}

/// Decay of ∫|x−y|^{-(N−2s)} U^{4s/(N−2s)}(y)(1+|y|)^{-((N−2s)/2+σ)} dy for one
/// unit bubble, compared with the weight exponent (N−2s)/2 + σ.
pub fn decay_gain_trend(
    p: &ProblemParams,
    sigma: f64,
    ys: &[f64],
    spec: &QuadratureSpec,
) -> Result<DecayGainReport> {
    if ys.len() < 3 {
        return Err(Error::Invalid(
            "decay fit needs at least 3 grid points".into(),
        ));
    }
    let kern = p.kernel();
    let b = Bubble::centered(p.n, 1.0);
    let eta = p.eta();
    let we = eta / 2.0 + sigma;
    let pw = 4.0 * p.s / eta;
    let f = |y: &[f64]| {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        kern.eval(&b, y).powf(pw) * (1.0 + r).powf(-we)
    };
    let src = RieszSource {
        f: &f,
        decay_exponent: 4.0 * p.s + we,
        symmetry: Symmetry::Radial {
            center: vec![0.0; p.n],
        },
        features: vec![Feature {
            center: vec![0.0; p.n],
            scale: 1.0,
        }],
    };
    let mut values = Vec::new();
    for &y in ys {
        let mut x = vec![0.0; p.n];
        x[0] = y;
        values.push(riesz_apply(p, &src, &x, spec)?.value * p.riesz_gamma());
    }
    let lx: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let plain = -fit_slope(&lx, &ly);
    let m = ys.len() - 1;
    let e_last = -(ly[m] - ly[m - 1]) / (lx[m] - lx[m - 1]);
    let e_prev = -(ly[m - 1] - ly[m - 2]) / (lx[m - 1] - lx[m - 2]);
    let qr = ys[m] / ys[m - 1];
    let exponent = (qr * e_last - e_prev) / (qr - 1.0);
    Ok(DecayGainReport {
        sigma,
        ys: ys.to_vec(),
        values,
        weight_exponent: we,
        plain_exponent: plain,
        exponent,
        gain: exponent - we,
    })
}
