use crate::error::Result;
use crate::geometry::{asymptote_coefficient, interaction_sum};
use crate::params::{Bubble, ProblemParams};
use crate::quadrature::{integrate, Integrand, QuadratureSpec, Symmetry};
use crate::special::{gamma_fn, sphere_area};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    Fit,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Quadrature => "quadrature",
            Provenance::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constant {
    pub value: f64,
    /// Absolute error bar: disagreement with the independent cross-check plus
    /// the cross-check's own error estimate.
    pub error: f64,
    pub provenance: Provenance,
}

impl Constant {
    fn closed(value: f64, check: f64, check_err: f64) -> Self {
        Constant {
            value,
            error: (value - check).abs() + check_err,
            provenance: Provenance::ClosedForm,
        }
    }

    pub fn scaled(self, f: f64) -> Self {
        Constant {
            value: self.value * f,
            error: self.error * f.abs(),
            provenance: self.provenance,
        }
    }
}

/// Expansion constants; the primed (sign-changing) set shares B0, B1, B2 and
/// differs in the lattice-sum coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionConstants {
    pub a: Constant,
    pub b0: Constant,
    pub b1: Constant,
    /// α ∫U^{2*_s-1}: far-field pair interaction coefficient.
    pub b_int: Constant,
    pub b2: Constant,
    pub b3: Constant,
    pub b0p: Constant,
    pub b1p: Constant,
    pub b2p: Constant,
    pub b3p: Constant,
}

impl ExpansionConstants {
    /// All B's multiplied by a common factor (A untouched).
    pub fn scale_b(&self, f: f64) -> Self {
        ExpansionConstants {
            a: self.a,
            b0: self.b0.scaled(f),
            b1: self.b1.scaled(f),
            b_int: self.b_int.scaled(f),
            b2: self.b2.scaled(f),
            b3: self.b3.scaled(f),
            b0p: self.b0p.scaled(f),
            b1p: self.b1p.scaled(f),
            b2p: self.b2p.scaled(f),
            b3p: self.b3p.scaled(f),
        }
    }

    /// Balancing concentration (B3 η / (B0 m r0^η))^{1/(η-m)}; primed constants when
    /// `alternating`.
    pub fn eps0(&self, p: &ProblemParams, alternating: bool) -> f64 {
        let eta = p.eta();
        let (b0, b3) = if alternating {
            (self.b0p.value, self.b3p.value)
        } else {
            (self.b0.value, self.b3.value)
        };
        (b3 * eta / (b0 * p.m * p.r0.powf(eta))).powf(1.0 / (eta - p.m))
    }

    pub fn rows(&self) -> Vec<(&'static str, Constant)> {
        vec![
            ("A", self.a),
            ("B0", self.b0),
            ("B1", self.b1),
            ("B_int", self.b_int),
            ("B2", self.b2),
            ("B3", self.b3),
            ("B0'", self.b0p),
            ("B1'", self.b1p),
            ("B2'", self.b2p),
            ("B3'", self.b3p),
        ]
    }
}

/// ∫ U_{1,0}^{2*_s} in closed form.
pub fn critical_integral(p: &ProblemParams) -> f64 {
    let n = p.n as f64;
    p.alpha().powf(p.two_star()) * PI.powf(n / 2.0) * gamma_fn(n / 2.0).unwrap_or(f64::NAN)
        / gamma_fn(n).unwrap_or(f64::NAN)
}

/// ∫ |x_1|^a U_{1,0}^{2*_s} in closed form (a < N).
pub fn moment_integral(p: &ProblemParams, a: f64) -> Result<f64> {
    let n = p.n as f64;
    // E|θ_1|^a on the unit sphere times the radial Beta integral
    let ang =
        gamma_fn(n / 2.0)? * gamma_fn((a + 1.0) / 2.0)? / (PI.sqrt() * gamma_fn((n + a) / 2.0)?);
    let rad = gamma_fn((n + a) / 2.0)? * gamma_fn((n - a) / 2.0)? / (2.0 * gamma_fn(n)?);
    Ok(p.alpha().powf(p.two_star()) * sphere_area(p.n) * ang * rad)
}

/// ∫ U_{1,0}^{2*_s-1} in closed form.
pub fn source_integral(p: &ProblemParams) -> Result<f64> {
    let n = p.n as f64;
    let rad = gamma_fn(n / 2.0)? * gamma_fn(p.s)? / (2.0 * gamma_fn(n / 2.0 + p.s)?);
    Ok(p.alpha().powf(p.p_exp()) * sphere_area(p.n) * rad)
}

fn axis_integral<F>(
    p: &ProblemParams,
    f: F,
    decay: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut dir = vec![0.0; p.n];
    dir[0] = 1.0;
    let ig = Integrand::new(&f, p.n, decay)
        .symmetry(Symmetry::Axis {
            origin: vec![0.0; p.n],
            dir,
        })
        .feature(vec![0.0; p.n], 1.0);
    let r = integrate(&ig, spec)?;
    Ok((r.value, r.error))
}

/// Closed-form constants, each cross-checked by quadrature (lattice
/// coefficients by a large-k direct sum).
pub fn compute_constants(p: &ProblemParams, spec: &QuadratureSpec) -> Result<ExpansionConstants> {
    p.validate()?;
    let kern = p.kernel();
    let b = Bubble::centered(p.n, 1.0);
    let q = p.two_star();
    let pe = p.p_exp();
    let n = p.n as f64;

    let iq = critical_integral(p);
    let (iq_num, iq_err) = axis_integral(p, |x| kern.eval(&b, x).powf(q), n, spec)?;
    let a = Constant::closed(p.s / n * iq, p.s / n * iq_num, p.s / n * iq_err);

    let c = p.c0 / q;
    let mm = moment_integral(p, p.m)?;
    let (mm_num, mm_err) = axis_integral(
        p,
        |x| x[0].abs().powf(p.m) * kern.eval(&b, x).powf(q),
        n - p.m,
        spec,
    )?;
    let b0 = Constant::closed(c * mm, c * mm_num, c * mm_err);

    let f1 = c * p.m * (p.m - 1.0) / 2.0;
    let m2 = moment_integral(p, p.m - 2.0)?;
    let (m2_num, m2_err) = axis_integral(
        p,
        |x| x[0].abs().powf(p.m - 2.0) * kern.eval(&b, x).powf(q),
        n - p.m + 2.0,
        spec,
    )?;
    let b1 = Constant::closed(f1 * m2, f1 * m2_num, f1 * m2_err);

    let ip = source_integral(p)?;
    let (ip_num, ip_err) = axis_integral(p, |x| kern.eval(&b, x).powf(pe), 2.0 * p.s, spec)?;
    let al = p.alpha();
    let b_int = Constant::closed(al * ip, al * ip_num, al * ip_err);
    let b2 = Constant::closed(0.5 * b_int.value, 0.5 * b_int.value, 0.5 * b_int.error);

    let eta = p.eta();
    let lattice = |alternating: bool| -> Result<Constant> {
        let coeff = asymptote_coefficient(eta, alternating)?;
        let k = 4096usize;
        let direct = interaction_sum(k, 1.0, eta, alternating)? * (k as f64).powf(-eta);
        Ok(Constant::closed(
            b2.value * coeff,
            b2.value * direct,
            b2.error * coeff,
        ))
    };
    let b3 = lattice(false)?;
    let b3p = lattice(true)?;
    Ok(ExpansionConstants {
        a,
        b0,
        b1,
        b_int,
        b2,
        b3,
        b0p: b0,
        b1p: b1,
        b2p: b2,
        b3p,
    })
}
