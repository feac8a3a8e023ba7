//! Problem parameters, the fractional bubble and its closed-form identities.

use crate::error::{Error, Result};
use crate::special::gamma_unchecked;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which side of the extremum the potential sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// K has a local maximum at r0; bubbles on a k-gon, all positive.
    #[default]
    Positive,
    /// K has a local minimum at r0; alternating signs on a 2k-gon.
    SignChanging,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Positive => "positive",
            Mode::SignChanging => "sign_changing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub m: f64,
    pub c0: f64,
    pub theta: f64,
    pub delta: f64,
    pub r0: f64,
    #[serde(default)]
    pub mode: Mode,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            n: 5,
            s: 0.9,
            m: 2.5,
            c0: 1.0,
            theta: 0.5,
            delta: 0.25,
            r0: 1.0,
            mode: Mode::Positive,
        }
    }
}

impl ProblemParams {
    /// Validated constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        s: f64,
        m: f64,
        c0: f64,
        theta: f64,
        delta: f64,
        r0: f64,
        mode: Mode,
    ) -> Result<Self> {
        let p = ProblemParams {
            n,
            s,
            m,
            c0,
            theta,
            delta,
            r0,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    /// Lower end of the admissible flatness interval.
    pub fn m_lower(&self) -> f64 {
        let n = self.n as f64;
        let a = n - 2.0 * self.s;
        let b = n + 2.0 * self.s;
        f64::max(2.0, a - 2.0 * a * a / b)
    }

    /// All violated constraints, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.n as f64;
        if !(self.s > 0.0 && self.s < 1.0) {
            errs.push(format!("s = {} must satisfy 0 < s < 1", self.s));
        }
        if !(n > 2.0 + 2.0 * self.s) {
            errs.push(format!(
                "N = {} must exceed 2 + 2s = {}",
                self.n,
                2.0 + 2.0 * self.s
            ));
        }
        let upper = n - 2.0 * self.s;
        let lower = self.m_lower();
        if !(self.m > lower) {
            errs.push(format!(
                "m = {} must exceed max{{2, N-2s-2(N-2s)^2/(N+2s)}} = {lower}",
                self.m
            ));
        }
        if !(self.m < upper) {
            errs.push(format!(
                "m = {} must be strictly below N-2s = {upper} (open upper bound)",
                self.m
            ));
        }
        for (name, v) in [
            ("c0", self.c0),
            ("theta", self.theta),
            ("delta", self.delta),
            ("r0", self.r0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name} = {v} must be positive and finite"));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Params(errs))
        }
    }

    /// N - 2s, the decay exponent of the Riesz kernel and the interaction power.
    pub fn eta(&self) -> f64 {
        self.n as f64 - 2.0 * self.s
    }

    /// Critical exponent 2*_s = 2N/(N-2s).
    pub fn two_star(&self) -> f64 {
        2.0 * self.n as f64 / self.eta()
    }

    /// Nonlinearity power 2*_s - 1 = (N+2s)/(N-2s).
    pub fn p_exp(&self) -> f64 {
        self.two_star() - 1.0
    }

    /// τ = (N-2s-m)/(N-2s).
    pub fn tau(&self) -> f64 {
        (self.eta() - self.m) / self.eta()
    }

    /// ν = k^{(N-2s)/(N-2s-m)}.
    pub fn nu_of_k(&self, k: usize) -> f64 {
        (k as f64).powf(self.eta() / (self.eta() - self.m))
    }

    pub fn alpha(&self) -> f64 {
        alpha_const(self)
    }

    /// γ(N,s) = π^{N/2} 2^{2s} Γ(s) / Γ(N/2 - s), normalizing the Riesz potential.
    pub fn riesz_gamma(&self) -> f64 {
        let n = self.n as f64;
        PI.powf(n / 2.0) * 4f64.powf(self.s) * gamma_unchecked(self.s)
            / gamma_unchecked(n / 2.0 - self.s)
    }

    pub fn kernel(&self) -> BubbleKernel {
        BubbleKernel::new(self)
    }
}

/// α_{N,s} = (2^{2s} Γ((N+2s)/2) / Γ((N-2s)/2))^{(N-2s)/(4s)}.
pub fn alpha_const(p: &ProblemParams) -> f64 {
    let n = p.n as f64;
    let lambda = 4f64.powf(p.s) * gamma_unchecked((n + 2.0 * p.s) / 2.0)
        / gamma_unchecked((n - 2.0 * p.s) / 2.0);
    lambda.powf((n - 2.0 * p.s) / (4.0 * p.s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    /// Width (concentration scale) of the profile.
    pub eps: f64,
    pub xi: Vec<f64>,
    pub sign: f64,
}

impl Bubble {
    pub fn new(eps: f64, xi: Vec<f64>, sign: f64) -> Self {
        Bubble { eps, xi, sign }
    }

    pub fn centered(n: usize, eps: f64) -> Self {
        Bubble {
            eps,
            xi: vec![0.0; n],
            sign: 1.0,
        }
    }

    pub fn dist2(&self, x: &[f64]) -> f64 {
        self.xi.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum()
    }
}

/// Precomputed constants for fast bubble evaluation.
#[derive(Debug, Clone, Copy)]
pub struct BubbleKernel {
    pub n: usize,
    /// (N-2s)/2
    pub q: f64,
    pub alpha: f64,
    /// 2*_s - 1
    pub p: f64,
}

impl BubbleKernel {
    pub fn new(p: &ProblemParams) -> Self {
        BubbleKernel {
            n: p.n,
            q: p.eta() / 2.0,
            alpha: alpha_const(p),
            p: p.p_exp(),
        }
    }

    /// Unsigned profile α (ε/(ε²+d²))^q as a function of squared distance.
    #[inline]
    pub fn profile(&self, eps: f64, d2: f64) -> f64 {
        self.alpha * (eps / (eps * eps + d2)).powf(self.q)
    }

    #[inline]
    pub fn eval(&self, b: &Bubble, x: &[f64]) -> f64 {
        b.sign * self.profile(b.eps, b.dist2(x))
    }

    /// ∂U/∂ε.
    pub fn d_eps(&self, b: &Bubble, x: &[f64]) -> f64 {
        let d2 = b.dist2(x);
        let e2 = b.eps * b.eps;
        let u = self.profile(b.eps, d2);
        b.sign * self.q * u * (d2 - e2) / (b.eps * (e2 + d2))
    }

    /// Derivative of U with respect to the center, 2qU(x-ξ)/(ε²+|x-ξ|²).
    pub fn grad_center(&self, b: &Bubble, x: &[f64]) -> Vec<f64> {
        let d2 = b.dist2(x);
        let u = b.sign * self.profile(b.eps, d2);
        let f = 2.0 * self.q * u / (b.eps * b.eps + d2);
        x.iter().zip(&b.xi).map(|(a, c)| f * (a - c)).collect()
    }

    /// Derivative with respect to the radius of the center, ξ = ρ(cos θ, sin θ, 0).
    pub fn d_r(&self, b: &Bubble, x: &[f64]) -> Result<f64> {
        let rho = (b.xi[0] * b.xi[0] + b.xi[1] * b.xi[1]).sqrt();
        if rho == 0.0 {
            return Err(Error::Invalid(
                "bubble_dr needs a center off the origin of the x'-plane".into(),
            ));
        }
        let d2 = b.dist2(x);
        let u = b.sign * self.profile(b.eps, d2);
        let f = 2.0 * self.q * u / (b.eps * b.eps + d2);
        let ex = b.xi[0] / rho;
        let ey = b.xi[1] / rho;
        Ok(f * ((x[0] - b.xi[0]) * ex + (x[1] - b.xi[1]) * ey))
    }

    /// (-Δ)^s U = |U|^{p-1} U in closed form.
    #[inline]
    pub fn frac_lap(&self, b: &Bubble, x: &[f64]) -> f64 {
        b.sign * self.profile(b.eps, b.dist2(x)).powf(self.p)
    }
}

pub fn bubble_eval(b: &Bubble, p: &ProblemParams, x: &[f64]) -> f64 {
    p.kernel().eval(b, x)
}

pub fn bubble_deps(b: &Bubble, p: &ProblemParams, x: &[f64]) -> f64 {
    p.kernel().d_eps(b, x)
}

pub fn bubble_dr(b: &Bubble, p: &ProblemParams, x: &[f64]) -> Result<f64> {
    p.kernel().d_r(b, x)
}

pub fn frac_lap_bubble(b: &Bubble, p: &ProblemParams, x: &[f64]) -> f64 {
    p.kernel().frac_lap(b, x)
}

/// Signed odd power |u|^{e-1} u.
#[inline]
pub fn odd_pow(u: f64, e: f64) -> f64 {
    u.signum() * u.abs().powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        let p = ProblemParams::default();
        p.validate().unwrap();
        assert!((p.two_star() - 3.125).abs() < 1e-15);
        assert!((p.tau() - 0.21875).abs() < 1e-15);
        assert!((p.m_lower() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_matches_closed_form() {
        let p = ProblemParams::default();
        let a = alpha_const(&p);
        assert!((a - 8.846_972_709_551_725).abs() < 1e-11);
        let lhs = a.powf(4.0 * p.s / p.eta());
        let rhs = 2f64.powf(1.8) * gamma_unchecked(3.4) / gamma_unchecked(1.6);
        assert!((lhs / rhs - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gates_reject_bad_params() {
        let mut p = ProblemParams::default();
        p.m = p.eta();
        let e = p.violations();
        assert_eq!(e.len(), 1);
        assert!(e[0].contains("open upper bound"));
        p.m = 1.9;
        assert!(p.validate().is_err());
        let q = ProblemParams {
            s: 1.0,
            ..Default::default()
        };
        assert!(!q.violations().is_empty());
        let r = ProblemParams {
            n: 3,
            s: 0.9,
            ..Default::default()
        };
        assert!(r
            .violations()
            .iter()
            .any(|e| e.contains("must exceed 2 + 2s")));
    }

    #[test]
    fn bubble_center_and_unit_distance() {
        let p = ProblemParams::default();
        let k = p.kernel();
        let b = Bubble::new(0.7, vec![1.0, 2.0, 0.0, 0.0, 0.0], 1.0);
        let c = k.eval(&b, &[1.0, 2.0, 0.0, 0.0, 0.0]);
        assert!((c / (k.alpha * 0.7f64.powf(-1.6)) - 1.0).abs() < 1e-14);
        let b1 = Bubble::centered(5, 1.0);
        let v = k.eval(&b1, &[0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((v / (k.alpha * 2f64.powf(-1.6)) - 1.0).abs() < 1e-14);
        let de = k.d_eps(&b, &b.xi.clone());
        let expect = k.alpha * (-1.6) * 0.7f64.powf(-2.6);
        assert!((de / expect - 1.0).abs() < 1e-13);
        assert!((k.frac_lap(&b1, &[0.0; 5]) / k.alpha.powf(k.p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn d_r_rejects_origin_center() {
        let p = ProblemParams::default();
        let b = Bubble::centered(5, 1.0);
        assert!(bubble_dr(&b, &p, &[1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn serde_keys() {
        let p = ProblemParams::default();
        let t = toml::to_string(&p).unwrap();
        for key in [
            "N =", "s =", "m =", "c0 =", "theta =", "delta =", "r0 =", "mode =",
        ] {
            assert!(t.contains(key), "{t}");
        }
        let back: ProblemParams = toml::from_str(&t).unwrap();
        assert_eq!(back, p);
    }
}
