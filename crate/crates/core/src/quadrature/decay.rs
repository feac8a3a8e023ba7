//! Decay of h(y) = ∫ |x|^{-(N-2s)} (1+|y-x|)^{-(2s+κ)} dx, expected ~ |y|^{-κ}.

use super::{riesz_apply, QuadratureSpec, RieszSource, Symmetry};
use crate::error::{Error, Result};
use crate::params::ProblemParams;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub kappa: f64,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of log h against log |y| over the whole grid, negated.
    pub plain_exponent: f64,
    /// −Δlog h/Δlog|y| between consecutive grid points.
    pub local_exponents: Vec<f64>,
    /// Richardson extrapolation of the last two local exponents, assuming an
    /// O(1/|y|) correction to the leading power law.
    pub exponent: f64,
}

/// h(y) at |y| = `y` (unnormalized Riesz convolution).
pub fn convolution_profile(
    p: &ProblemParams,
    kappa: f64,
    y: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let n = p.n;
    let e = 2.0 * p.s + kappa;
    let f = move |z: &[f64]| {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + r).powf(-e)
    };
    let src = RieszSource {
        f: &f,
        decay_exponent: e,
        symmetry: Symmetry::Radial {
            center: vec![0.0; n],
        },
        features: vec![super::Feature {
            center: vec![0.0; n],
            scale: 1.0,
        }],
    };
    let mut x = vec![0.0; n];
    x[0] = y;
    let out = riesz_apply(p, &src, &x, spec)?;
    Ok(out.value * p.riesz_gamma())
}

pub fn convolution_decay_check(
    p: &ProblemParams,
    kappa: f64,
    ys: &[f64],
    spec: &QuadratureSpec,
) -> Result<DecayFit> {
    if !(kappa > 0.0 && kappa < p.eta()) {
        return Err(Error::Domain {
            func: "convolution_decay_check",
            arg: kappa,
            reason: "requires 0 < kappa < N - 2s",
        });
    }
    if ys.len() < 3 {
        return Err(Error::Invalid(
            "decay fit needs at least 3 grid points".into(),
        ));
    }
    let values = ys
        .iter()
        .map(|&y| convolution_profile(p, kappa, y, spec))
        .collect::<Result<Vec<f64>>>()?;
    let lx: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let plain_exponent = -fit_slope(&lx, &ly);
    let local: Vec<f64> = (1..ys.len())
        .map(|i| -(ly[i] - ly[i - 1]) / (lx[i] - lx[i - 1]))
        .collect();
    let m = local.len();
    // e_j = κ + c/y_j with y_j/y_{j-1} = q  ⇒  κ = (q e_j − e_{j−1})/(q − 1)
    let q = ys[m] / ys[m - 1];
    let exponent = (q * local[m - 1] - local[m - 2]) / (q - 1.0);
    Ok(DecayFit {
        kappa,
        ys: ys.to_vec(),
        values,
        plain_exponent,
        local_exponents: local,
        exponent,
    })
}

/// Ordinary least-squares slope.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
