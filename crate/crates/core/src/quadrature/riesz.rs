//! Riesz potential (−Δ)^{−s} f(x) = γ(N,s)^{-1} ∫ f(y) |x−y|^{−(N−2s)} dy.
//!
//! Integration is done in polar coordinates centered at x, where the kernel
//! combines with the volume element into ρ^{2s−1}. Near ρ = 0 the substitution
//! ρ = ρ₁ ξ^{1/(2s)} turns that weight into a constant, so no panel sees a
//! singular or non-smooth factor.

use super::cubature::{tensor_cells, Cell};
use super::{clean_breaks, clustered, layered, Feature, QuadResult, QuadratureSpec, Symmetry};
use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::special::sphere_area;
use std::f64::consts::PI;

pub struct RieszSource<'a> {
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// d with |f(y)| ≲ C |y|^{-d}; the potential converges only for d > 2s.
    pub decay_exponent: f64,
    /// `Radial` or `Axial`.
    pub symmetry: Symmetry,
    pub features: Vec<Feature>,
}

struct RadialMap {
    rho1: f64,
    two_s: f64,
}

impl RadialMap {
    fn rho(&self, xi: f64) -> f64 {
        if xi <= 1.0 {
            self.rho1 * xi.powf(1.0 / self.two_s)
        } else {
            self.rho1 * xi
        }
    }

    /// ρ'(ξ) ρ^{2s-1}
    fn jac(&self, xi: f64) -> f64 {
        if xi <= 1.0 {
            self.rho1.powf(self.two_s) / self.two_s
        } else {
            self.rho1 * (self.rho1 * xi).powf(self.two_s - 1.0)
        }
    }

    fn xi(&self, rho: f64) -> f64 {
        if rho <= self.rho1 {
            (rho / self.rho1).powf(self.two_s)
        } else {
            rho / self.rho1
        }
    }
}

pub fn riesz_apply(
    p: &ProblemParams,
    src: &RieszSource,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    let two_s = 2.0 * p.s;
    if !(src.decay_exponent > two_s) {
        return Err(Error::Invalid(format!(
            "Riesz potential needs source decay faster than |y|^(-2s) = |y|^(-{two_s}); declared {}",
            src.decay_exponent
        )));
    }
    let gamma = p.riesz_gamma();
    let out = match &src.symmetry {
        Symmetry::Radial { center } => radial(p, src, center, x, spec)?,
        Symmetry::Axial => axial(p, src, x, spec)?,
        _ => {
            return Err(Error::Invalid(
                "riesz_apply supports radial or x''-invariant sources".into(),
            ))
        }
    };
    Ok(QuadResult {
        value: out.value / gamma,
        error: out.error / gamma,
        ..out
    })
}

fn feature_scale(src: &RieszSource) -> f64 {
    src.features
        .iter()
        .map(|f| f.scale)
        .fold(f64::INFINITY, f64::min)
        .min(1e300)
}

fn radial(
    p: &ProblemParams,
    src: &RieszSource,
    center: &[f64],
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let n = p.n;
    let d = x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let h = if src.features.is_empty() {
        1.0
    } else {
        feature_scale(src)
    };
    let rho1 = if d > 0.0 { h.min(0.5 * d) } else { h };
    let map = RadialMap {
        rho1,
        two_s: 2.0 * p.s,
    };
    let area = sphere_area(n - 1);
    let e = (n - 2) as i32;
    let g = |z: &[f64]| {
        let rho = map.rho(z[0]);
        let th = z[1];
        let r2 = (d * d + rho * rho + 2.0 * d * rho * th.cos()).max(0.0);
        let mut y = center.to_vec();
        y[0] += r2.sqrt();
        map.jac(z[0]) * area * th.sin().powi(e) * (src.f)(&y)
    };
    let theta_breaks = {
        let mut v: Vec<f64> = (0..=8).map(|i| PI * i as f64 / 8.0).collect();
        if d > 0.0 {
            let mut a = 0.25 * h / d;
            while a < PI {
                v.push(PI - a);
                a *= 2.0;
            }
        }
        clean_breaks(v, 0.0, PI)
    };
    let make = |a: f64, b: f64| {
        let mut rb = clustered(&[(d, h), (0.0, h)], a, b);
        rb.push(rho1);
        let xb: Vec<f64> = clean_breaks(rb, a, b)
            .into_iter()
            .map(|r| map.xi(r))
            .collect();
        tensor_cells(&[xb, theta_breaks.clone()])
    };
    let probe = |r: f64| {
        let mut c: f64 = 0.0;
        for i in 0..=8 {
            let th = PI * i as f64 / 8.0;
            let r2 = (d * d + r * r + 2.0 * d * r * th.cos()).max(0.0);
            let mut y = center.to_vec();
            y[0] += r2.sqrt();
            c = c.max((src.f)(&y).abs());
        }
        c * r.powf(src.decay_exponent)
    };
    let r0 = d + 16.0 * h;
    let out = layered(&g, make, probe, r0, n, src.decay_exponent - 2.0 * p.s, spec)?;
    Ok(QuadResult {
        value: out.value,
        error: out.error,
        evals: out.evals,
        regions: out.regions,
        budget_exhausted: out.exhausted,
    })
}

fn axial(
    p: &ProblemParams,
    src: &RieszSource,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let n = p.n;
    if n < 3 {
        return Err(Error::Invalid("axial Riesz potential needs N >= 3".into()));
    }
    if x[2..].iter().any(|v| *v != 0.0) {
        return Err(Error::Invalid(
            "axial Riesz potential is evaluated at points with x'' = 0".into(),
        ));
    }
    let h = if src.features.is_empty() {
        1.0
    } else {
        feature_scale(src)
    };
    let mut dists = Vec::new();
    let mut psis = Vec::new();
    for ft in &src.features {
        let dx = ft.center[0] - x[0];
        let dy = ft.center[1] - x[1];
        let dd = (dx * dx + dy * dy).sqrt();
        dists.push((dd, ft.scale));
        if dd > 0.0 {
            let mut a = dy.atan2(dx);
            if a < 0.0 {
                a += 2.0 * PI;
            }
            psis.push((a, ft.scale / dd));
        }
    }
    dists.push((0.0, h));
    let dmin = dists
        .iter()
        .filter(|v| v.0 > 0.0)
        .map(|v| v.0)
        .fold(f64::INFINITY, f64::min);
    let rho1 = if dmin.is_finite() {
        h.min(0.5 * dmin)
    } else {
        h
    };
    let map = RadialMap {
        rho1,
        two_s: 2.0 * p.s,
    };
    let area = sphere_area(n - 2);
    let e = (n - 3) as i32;
    let g = |z: &[f64]| {
        let rho = map.rho(z[0]);
        let (sphi, cphi) = z[1].sin_cos();
        let (spsi, cpsi) = z[2].sin_cos();
        let mut y = vec![0.0; n];
        y[0] = x[0] + rho * sphi * cpsi;
        y[1] = x[1] + rho * sphi * spsi;
        y[2] = rho * cphi;
        map.jac(z[0]) * area * cphi.powi(e) * sphi * (src.f)(&y)
    };
    let phi_breaks = {
        let mut v: Vec<f64> = (0..=4).map(|i| 0.5 * PI * i as f64 / 4.0).collect();
        for &(dd, sc) in &dists {
            if dd > 0.0 {
                let mut a = 0.25 * sc / dd;
                while a < 0.5 * PI {
                    v.push(0.5 * PI - a);
                    a *= 2.0;
                }
            }
        }
        clean_breaks(v, 0.0, 0.5 * PI)
    };
    let psi_breaks = {
        let mut v: Vec<f64> = (0..=16).map(|i| 2.0 * PI * i as f64 / 16.0).collect();
        for &(c, w) in &psis {
            for cc in [c, c - 2.0 * PI, c + 2.0 * PI] {
                v.push(cc);
                let mut a = 0.25 * w;
                while a < PI {
                    v.push(cc - a);
                    v.push(cc + a);
                    a *= 2.0;
                }
            }
        }
        clean_breaks(v, 0.0, 2.0 * PI)
    };
    let make = |a: f64, b: f64| -> Vec<Cell> {
        let mut rb = clustered(&dists, a, b);
        rb.push(rho1);
        let xb: Vec<f64> = clean_breaks(rb, a, b)
            .into_iter()
            .map(|r| map.xi(r))
            .collect();
        tensor_cells(&[xb, phi_breaks.clone(), psi_breaks.clone()])
    };
    let probe = |r: f64| {
        let mut c: f64 = 0.0;
        for i in 0..=4 {
            let phi = 0.5 * PI * i as f64 / 4.0;
            for j in 0..8 {
                let psi = 2.0 * PI * j as f64 / 8.0;
                let mut y = vec![0.0; n];
                y[0] = x[0] + r * phi.sin() * psi.cos();
                y[1] = x[1] + r * phi.sin() * psi.sin();
                y[2] = r * phi.cos();
                c = c.max((src.f)(&y).abs());
            }
        }
        c * r.powf(src.decay_exponent)
    };
    let r0 = dists.iter().map(|v| v.0 + 16.0 * v.1).fold(0.0, f64::max);
    let out = layered(&g, make, probe, r0, n, src.decay_exponent - 2.0 * p.s, spec)?;
    Ok(QuadResult {
        value: out.value,
        error: out.error,
        evals: out.evals,
        regions: out.regions,
        budget_exhausted: out.exhausted,
    })
}
