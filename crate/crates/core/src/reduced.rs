//! Reduced functional F(r, ε) on Ω, its flow and the max-min critical point.
//!
//! Both modes share one normalized form. With c the bubble count and
//! G = −F (positive) or G = F̄ (sign-changing),
//!
//!   G = c (∓A + ν^{-m} g),   g = −B0 ε^{-m} − B1 (νr0−r)² ε^{2−m} + B3 ε^{-η} S(r),
//!
//! where S(r) = k^η ν^m / R^η and R = r (expansion form) or νr0 (localized
//! form). G has a minimum in ε and a maximum in r near (νr0, ε0). All
//! iterations run on g, whose size does not depend on ν.

use crate::energy::ExpansionConstants;
use crate::error::{Error, Result};
use crate::geometry::interaction_sum;
use crate::params::{Mode, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelForm {
    /// Interaction evaluated at R = νr0; the critical point is exactly (νr0, ε0)
    /// in the coupled regime.
    Localized,
    /// Interaction evaluated at R = r.
    Expansion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeSum {
    /// B3 k^η / R^η.
    Asymptotic,
    /// B2 Σ_j w_j d_j^{-η} over the actual polygon chords.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Steepest descent of G.
    Descent,
    /// Ascent in r of min_ε G, followed by Newton polishing.
    MaxMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Omega {
    pub r_lo: f64,
    pub r_hi: f64,
    pub e_lo: f64,
    pub e_hi: f64,
}

impl Omega {
    pub fn contains(&self, r: f64, e: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi && e >= self.e_lo && e <= self.e_hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    RLow,
    RHigh,
    EpsLow,
    EpsHigh,
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub p: ProblemParams,
    pub consts: ExpansionConstants,
    pub k: usize,
    pub nu: f64,
    pub coupled: bool,
    pub theta_bar: f64,
    pub form: ModelForm,
    pub lattice: LatticeSum,
    /// Slack η in α2, as a multiple of A.
    pub eta_frac: f64,
    b0: f64,
    b1: f64,
    b3: f64,
    /// Coefficient of ε^{-η} ν^m R^{-η} in g.
    b3k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hessian {
    pub rr: f64,
    pub re: f64,
    pub ee: f64,
}

impl ReducedModel {
    /// Coupled regime ν = k^{η/(η−m)}, θ̄ = 0.6, localized form.
    pub fn new(p: &ProblemParams, consts: &ExpansionConstants, k: usize) -> Result<Self> {
        Self::build(p, consts, k, p.nu_of_k(k), true, 0.6, ModelForm::Localized)
    }

    /// Decoupled regime with ν given.
    pub fn decoupled(
        p: &ProblemParams,
        consts: &ExpansionConstants,
        k: usize,
        nu: f64,
    ) -> Result<Self> {
        Self::build(p, consts, k, nu, false, 0.6, ModelForm::Localized)
    }

    pub fn build(
        p: &ProblemParams,
        consts: &ExpansionConstants,
        k: usize,
        nu: f64,
        coupled: bool,
        theta_bar: f64,
        form: ModelForm,
    ) -> Result<Self> {
        Self::build_with(
            p,
            consts,
            k,
            nu,
            coupled,
            theta_bar,
            form,
            LatticeSum::Asymptotic,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn build_with(
        p: &ProblemParams,
        consts: &ExpansionConstants,
        k: usize,
        nu: f64,
        coupled: bool,
        theta_bar: f64,
        form: ModelForm,
        lattice: LatticeSum,
    ) -> Result<Self> {
        p.validate()?;
        if k < 2 {
            return Err(Error::Invalid(format!(
                "reduced model needs k >= 2, got {k}"
            )));
        }
        if !(theta_bar > 0.0) || !(nu > 1.0) {
            return Err(Error::Invalid(format!(
                "reduced model needs theta_bar > 0 and nu > 1, got {theta_bar}, {nu}"
            )));
        }
        let (b0, b1, b3) = match p.mode {
            Mode::Positive => (consts.b0.value, consts.b1.value, consts.b3.value),
            Mode::SignChanging => (consts.b0p.value, consts.b1p.value, consts.b3p.value),
        };
        if !(b0 > 0.0 && b1 > 0.0 && b3 > 0.0) {
            return Err(Error::Invalid(
                "expansion constants must be positive".into(),
            ));
        }
        let eta = p.eta();
        let b2 = match p.mode {
            Mode::Positive => consts.b2.value,
            Mode::SignChanging => consts.b2p.value,
        };
        let alternating = p.mode == Mode::SignChanging;
        let b3k = match lattice {
            LatticeSum::Asymptotic => b3 * (k as f64).powf(eta),
            LatticeSum::Exact => b2 * interaction_sum(k, 1.0, eta, alternating)?,
        };
        let model = ReducedModel {
            p: p.clone(),
            consts: *consts,
            k,
            nu,
            coupled,
            theta_bar,
            form,
            lattice,
            eta_frac: 0.1,
            b0,
            b1,
            b3,
            b3k,
        };
        let om = model.omega();
        if !(om.e_lo > 0.0) {
            return Err(Error::Invalid(format!(
                "Ω contains nonpositive ε: eps0 = {}, half-width ν^(-3θ̄/2) = {}; increase theta_bar or k",
                model.eps0(),
                model.eps0() - om.e_lo
            )));
        }
        Ok(model)
    }

    fn rebuild(
        &self,
        consts: &ExpansionConstants,
        theta_bar: f64,
        form: ModelForm,
        lattice: LatticeSum,
    ) -> Result<Self> {
        let mut m = Self::build_with(
            &self.p,
            consts,
            self.k,
            self.nu,
            self.coupled,
            theta_bar,
            form,
            lattice,
        )?;
        m.eta_frac = self.eta_frac;
        Ok(m)
    }

    pub fn with_theta_bar(&self, theta_bar: f64) -> Result<Self> {
        self.rebuild(&self.consts, theta_bar, self.form, self.lattice)
    }

    pub fn with_form(&self, form: ModelForm) -> Result<Self> {
        self.rebuild(&self.consts, self.theta_bar, form, self.lattice)
    }

    pub fn with_lattice(&self, lattice: LatticeSum) -> Result<Self> {
        self.rebuild(&self.consts, self.theta_bar, self.form, lattice)
    }

    pub fn with_constants(&self, consts: &ExpansionConstants) -> Result<Self> {
        self.rebuild(consts, self.theta_bar, self.form, self.lattice)
    }

    pub fn with_eta_frac(mut self, f: f64) -> Self {
        self.eta_frac = f;
        self
    }

    pub fn mode(&self) -> Mode {
        self.p.mode
    }

    /// Number of bubbles, the prefactor of F.
    pub fn count(&self) -> f64 {
        match self.p.mode {
            Mode::Positive => self.k as f64,
            Mode::SignChanging => 2.0 * self.k as f64,
        }
    }

    /// Factor converting g into G − c(∓A): c ν^{-m}.
    pub fn scale(&self) -> f64 {
        self.count() * self.nu.powf(-self.p.m)
    }

    fn base(&self) -> f64 {
        match self.p.mode {
            Mode::Positive => -self.consts.a.value,
            Mode::SignChanging => self.consts.a.value,
        }
    }

    /// ∓1 such that F = c·A + sign_f·c ν^{-m} g.
    fn sign_f(&self) -> f64 {
        match self.p.mode {
            Mode::Positive => -1.0,
            Mode::SignChanging => 1.0,
        }
    }

    pub fn r_center(&self) -> f64 {
        self.nu * self.p.r0
    }

    pub fn eps0(&self) -> f64 {
        let eta = self.p.eta();
        (self.b3 * eta / (self.b0 * self.p.m * self.p.r0.powf(eta))).powf(1.0 / (eta - self.p.m))
    }

    pub fn omega(&self) -> Omega {
        let hr = self.nu.powf(-self.theta_bar);
        let he = self.nu.powf(-1.5 * self.theta_bar);
        let e0 = self.eps0();
        Omega {
            r_lo: self.r_center() - hr,
            r_hi: self.r_center() + hr,
            e_lo: e0 - he,
            e_hi: e0 + he,
        }
    }

    /// B3·S(R) and its first two r-derivatives.
    fn s_terms(&self, r: f64) -> (f64, f64, f64) {
        let eta = self.p.eta();
        let lead = self.b3k * self.nu.powf(self.p.m);
        match self.form {
            ModelForm::Localized => (lead * self.r_center().powf(-eta), 0.0, 0.0),
            ModelForm::Expansion => {
                let s = lead * r.powf(-eta);
                (s, -eta * s / r, eta * (eta + 1.0) * s / (r * r))
            }
        }
    }

    /// Normalized excess g(r, ε).
    pub fn g(&self, r: f64, e: f64) -> f64 {
        let m = self.p.m;
        let eta = self.p.eta();
        let d = self.r_center() - r;
        let (s, _, _) = self.s_terms(r);
        -self.b0 * e.powf(-m) - self.b1 * d * d * e.powf(2.0 - m) + e.powf(-eta) * s
    }

    /// (∂_r g, ∂_ε g).
    pub fn grad_g(&self, r: f64, e: f64) -> (f64, f64) {
        let m = self.p.m;
        let eta = self.p.eta();
        let d = self.r_center() - r;
        let (s, s1, _) = self.s_terms(r);
        let gr = 2.0 * self.b1 * d * e.powf(2.0 - m) + e.powf(-eta) * s1;
        let ge = m * self.b0 * e.powf(-m - 1.0)
            - (2.0 - m) * self.b1 * d * d * e.powf(1.0 - m)
            - eta * e.powf(-eta - 1.0) * s;
        (gr, ge)
    }

    pub fn hess_g(&self, r: f64, e: f64) -> Hessian {
        let m = self.p.m;
        let eta = self.p.eta();
        let d = self.r_center() - r;
        let (s, s1, s2) = self.s_terms(r);
        Hessian {
            rr: -2.0 * self.b1 * e.powf(2.0 - m) + e.powf(-eta) * s2,
            re: 2.0 * (2.0 - m) * self.b1 * d * e.powf(1.0 - m) - eta * e.powf(-eta - 1.0) * s1,
            ee: -m * (m + 1.0) * self.b0 * e.powf(-m - 2.0)
                - (2.0 - m) * (1.0 - m) * self.b1 * d * d * e.powf(-m)
                + eta * (eta + 1.0) * e.powf(-eta - 2.0) * s,
        }
    }

    /// Leading-order reduced functional F (F̄ in the sign-changing mode).
    pub fn f_model(&self, r: f64, e: f64) -> f64 {
        self.count() * self.consts.a.value + self.sign_f() * self.scale() * self.g(r, e)
    }

    /// The max-min objective G (F̃ = −F for positive, F̄ for sign-changing).
    pub fn f_tilde(&self, r: f64, e: f64) -> f64 {
        self.count() * self.base() + self.scale() * self.g(r, e)
    }

    /// F − c·A, formed without the O(c·A) constant.
    pub fn f_excess(&self, r: f64, e: f64) -> f64 {
        self.sign_f() * self.scale() * self.g(r, e)
    }

    /// (∂F/∂r, ∂F/∂ε).
    pub fn grad_f(&self, r: f64, e: f64) -> (f64, f64) {
        let (gr, ge) = self.grad_g(r, e);
        let c = self.sign_f() * self.scale();
        (c * gr, c * ge)
    }

    pub fn df_deps_model(&self, r: f64, e: f64) -> f64 {
        self.grad_f(r, e).1
    }

    /// α1 and α2 in normalized units (compare with g).
    pub fn alpha_levels_g(&self) -> (f64, f64) {
        let m = self.p.m;
        let eta = self.p.eta();
        let e0 = self.eps0();
        let a1 = -self.b0 * e0.powf(-m) + self.b3 * (e0 * self.p.r0).powf(-eta)
            - self.nu.powf(-2.5 * self.theta_bar);
        let a2 = self.eta_frac * self.consts.a.value * self.nu.powf(m);
        (a1, a2)
    }

    /// α1 and α2 as values of G.
    pub fn alpha_levels(&self) -> (f64, f64) {
        let (a1, _) = self.alpha_levels_g();
        let c = self.count();
        (
            c * self.base() + self.scale() * a1,
            c * (self.base() + self.eta_frac * self.consts.a.value),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub max_iter: usize,
    /// Stop when ‖∇F‖ ≤ grad_tol·k.
    pub grad_tol: f64,
    /// Stop once G drops below α1 (descent only).
    pub stop_at_sublevel: bool,
    pub armijo: f64,
    pub newton_polish: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_iter: 5000,
            grad_tol: 1e-10,
            stop_at_sublevel: true,
            armijo: 1e-4,
            newton_polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "face")]
pub enum Termination {
    Converged,
    Sublevel,
    Boundary(Face),
    MaxIter,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub kind: FlowKind,
    pub start: (f64, f64),
    pub r: f64,
    pub eps: f64,
    /// Normalized objective g along the path (G = c(∓A) + cν^{-m} g).
    pub values: Vec<f64>,
    pub path: Vec<(f64, f64)>,
    pub termination: Termination,
    /// ‖∇F‖ at the end point.
    pub grad_norm: f64,
    /// ‖∇g‖ in window-normalized coordinates.
    pub grad_norm_g: f64,
    pub iterations: usize,
}

impl Trajectory {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceCheck {
    pub face: Face,
    /// Worst signed margin over the sampled face; positive means the expected sign holds.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub alpha1: f64,
    pub alpha2: f64,
    /// (ii): sup of G over the r-faces.
    pub sup_r_faces: f64,
    /// α1 − sup over r-faces, in units of cν^{-m}.
    pub margin_ii: f64,
    /// (i): min over ε of G on the fiber r = νr0 (a lower bound for every deformation's max).
    pub fiber_min: f64,
    /// fiber min − α1, in units of cν^{-m}.
    pub margin_i: f64,
    /// α2 − max_Ω G, in units of cν^{-m}.
    pub margin_c: f64,
    pub pass_i: bool,
    pub pass_ii: bool,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.pass_i && self.pass_ii
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub r: f64,
    pub eps: f64,
    pub f: f64,
    /// F − c·A.
    pub f_excess: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeReport {
    pub mode: Mode,
    pub form: ModelForm,
    pub k: usize,
    pub nu: f64,
    pub theta_bar: f64,
    pub omega: Omega,
    pub eps0: f64,
    pub nr: usize,
    pub ne: usize,
    pub grid: Vec<GridPoint>,
    pub critical: Trajectory,
    /// (positive, negative) eigenvalue counts of the Hessian of F at the critical point.
    pub hessian_signature: (usize, usize),
    pub starts: Vec<Trajectory>,
    pub faces: Vec<FaceCheck>,
    pub certificate: Certificate,
}

impl LandscapeReport {
    pub fn eps_rel_error(&self) -> f64 {
        (self.critical.eps - self.eps0).abs() / self.eps0
    }

    /// Largest spread of end points across the random starts, window-normalized.
    pub fn start_spread(&self) -> f64 {
        let om = &self.omega;
        let (hr, he) = ((om.r_hi - om.r_lo) / 2.0, (om.e_hi - om.e_lo) / 2.0);
        self.starts
            .iter()
            .map(|t| {
                ((t.r - self.critical.r) / hr)
                    .abs()
                    .max(((t.eps - self.critical.eps) / he).abs())
            })
            .fold(0.0, f64::max)
    }
}

fn eig2(h: &Hessian) -> (f64, f64) {
    let tr = h.rr + h.ee;
    let det = h.rr * h.ee - h.re * h.re;
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

impl ReducedModel {
    fn half_widths(&self) -> (f64, f64) {
        let om = self.omega();
        ((om.r_hi - om.r_lo) / 2.0, (om.e_hi - om.e_lo) / 2.0)
    }

    /// ‖∇g‖ in coordinates normalized by the Ω half-widths.
    fn grad_norm_g(&self, r: f64, e: f64) -> f64 {
        let (hr, he) = self.half_widths();
        let (gr, ge) = self.grad_g(r, e);
        (hr * gr).hypot(he * ge)
    }

    pub fn grad_norm_f(&self, r: f64, e: f64) -> f64 {
        let (fr, fe) = self.grad_f(r, e);
        fr.hypot(fe)
    }

    fn exit_face(&self, r: f64, e: f64) -> Face {
        let om = self.omega();
        let (hr, he) = self.half_widths();
        let dr = [(om.r_lo - r) / hr, (r - om.r_hi) / hr];
        let de = [(om.e_lo - e) / he, (e - om.e_hi) / he];
        let faces = [
            (dr[0], Face::RLow),
            (dr[1], Face::RHigh),
            (de[0], Face::EpsLow),
            (de[1], Face::EpsHigh),
        ];
        faces
            .iter()
            .fold(faces[0], |a, b| if b.0 > a.0 { *b } else { a })
            .1
    }

    fn check_start(&self, r: f64, e: f64) -> Result<()> {
        if !self.omega().contains(r, e) {
            return Err(Error::Invalid(format!(
                "flow start ({r}, {e}) is outside Ω"
            )));
        }
        Ok(())
    }

    /// Flow of G from `start`. Descent follows −∇G with Armijo backtracking,
    /// steps limited to Ω. MaxMin ascends r ↦ min_ε G and then polishes with Newton.
    pub fn flow_solve(
        &self,
        start: (f64, f64),
        kind: FlowKind,
        opts: &FlowOptions,
    ) -> Result<Trajectory> {
        self.check_start(start.0, start.1)?;
        match kind {
            FlowKind::Descent => self.descent(start, opts),
            FlowKind::MaxMin => self.maxmin(start, opts),
        }
    }

    fn finish(
        &self,
        kind: FlowKind,
        start: (f64, f64),
        path: Vec<(f64, f64)>,
        values: Vec<f64>,
        termination: Termination,
        iterations: usize,
    ) -> Trajectory {
        let (r, eps) = *path.last().unwrap();
        Trajectory {
            kind,
            start,
            r,
            eps,
            values,
            path,
            termination,
            grad_norm: self.grad_norm_f(r, eps),
            grad_norm_g: self.grad_norm_g(r, eps),
            iterations,
        }
    }

    fn converged_at(&self, r: f64, e: f64, opts: &FlowOptions) -> bool {
        // the unscaled criterion alone is met trivially for large ν, so the
        // normalized gradient must be at round-off level too
        let g_scale = self.b0 * e.powf(-self.p.m);
        self.grad_norm_f(r, e) <= opts.grad_tol * self.k as f64
            && self.grad_norm_g(r, e) <= 1e-11 * g_scale
    }

    fn descent(&self, start: (f64, f64), opts: &FlowOptions) -> Result<Trajectory> {
        let om = self.omega();
        let (a1, _) = self.alpha_levels_g();
        let (mut r, mut e) = start;
        let mut val = self.g(r, e);
        let mut path = vec![(r, e)];
        let mut values = vec![val];
        let mut t: f64 = 1.0;
        for it in 0..opts.max_iter {
            if opts.stop_at_sublevel && val <= a1 {
                return Ok(self.finish(
                    FlowKind::Descent,
                    start,
                    path,
                    values,
                    Termination::Sublevel,
                    it,
                ));
            }
            if self.converged_at(r, e, opts) {
                return Ok(self.finish(
                    FlowKind::Descent,
                    start,
                    path,
                    values,
                    Termination::Converged,
                    it,
                ));
            }
            let (gr, ge) = self.grad_g(r, e);
            let (pr, pe) = self.diag_scale(r, e);
            let (dr, de) = (-pr * gr, -pe * ge);
            let slope = gr * dr + ge * de;
            if slope >= 0.0 {
                return Ok(self.finish(
                    FlowKind::Descent,
                    start,
                    path,
                    values,
                    Termination::Converged,
                    it,
                ));
            }
            t = (t * 4.0).min(1.0);
            loop {
                let (rn, en) = (r + t * dr, e + t * de);
                if om.contains(rn, en) {
                    let vn = self.g(rn, en);
                    if vn <= val + opts.armijo * t * slope {
                        r = rn;
                        e = en;
                        val = vn;
                        break;
                    }
                } else if t < 1e-12 {
                    let face = self.exit_face(rn, en);
                    return Ok(self.finish(
                        FlowKind::Descent,
                        start,
                        path,
                        values,
                        Termination::Boundary(face),
                        it,
                    ));
                }
                t *= 0.5;
                if t < 1e-30 {
                    return Err(Error::StepUnderflow { r, eps: e });
                }
            }
            path.push((r, e));
            values.push(val);
        }
        let n = opts.max_iter;
        Ok(self.finish(
            FlowKind::Descent,
            start,
            path,
            values,
            Termination::MaxIter,
            n,
        ))
    }

    /// Diagonal preconditioner 1/|∂²g|, falling back to the squared window
    /// half-widths where a curvature vanishes.
    fn diag_scale(&self, r: f64, e: f64) -> (f64, f64) {
        let (hr, he) = self.half_widths();
        let h = self.hess_g(r, e);
        let pick = |c: f64, w: f64| {
            if c.abs() > 0.0 && c.is_finite() {
                1.0 / c.abs()
            } else {
                w * w
            }
        };
        (pick(h.rr, hr), pick(h.ee, he))
    }

    /// argmin over ε ∈ [e_lo, e_hi] of g(r, ·): safeguarded Newton on ∂_ε g.
    fn inner_min(&self, r: f64, e_guess: f64) -> f64 {
        let om = self.omega();
        let (mut lo, mut hi) = (om.e_lo, om.e_hi);
        if self.grad_g(r, lo).1 >= 0.0 {
            return lo;
        }
        if self.grad_g(r, hi).1 <= 0.0 {
            return hi;
        }
        let mut e = e_guess.clamp(lo, hi);
        for _ in 0..200 {
            let ge = self.grad_g(r, e).1;
            if ge > 0.0 {
                hi = e;
            } else if ge < 0.0 {
                lo = e;
            } else {
                return e;
            }
            let h = self.hess_g(r, e).ee;
            let mut next = if h > 0.0 { e - ge / h } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - e).abs() <= 4.0 * f64::EPSILON * e.abs() {
                return next;
            }
            e = next;
        }
        e
    }

    fn maxmin(&self, start: (f64, f64), opts: &FlowOptions) -> Result<Trajectory> {
        let om = self.omega();
        let (hr, _) = self.half_widths();
        let (mut r, mut e) = start;
        e = self.inner_min(r, e);
        let mut phi = self.g(r, e);
        let mut path = vec![start, (r, e)];
        let mut values = vec![self.g(start.0, start.1), phi];
        let mut t: f64 = 1.0;
        let mut iters = 0;
        while iters < opts.max_iter {
            iters += 1;
            // envelope: d/dr min_ε g = ∂_r g at the inner minimizer
            let gr = self.grad_g(r, e).0;
            if (hr * gr).abs() <= 1e-6 * self.b0 * e.powf(-self.p.m) {
                break;
            }
            let dr = self.diag_scale(r, e).0 * gr;
            t = (t * 4.0).min(1.0);
            loop {
                let rn = (r + t * dr).clamp(om.r_lo, om.r_hi);
                let en = self.inner_min(rn, e);
                let vn = self.g(rn, en);
                if vn >= phi + opts.armijo * t * gr * dr || (rn - r).abs() <= f64::EPSILON * r {
                    r = rn;
                    e = en;
                    phi = vn;
                    break;
                }
                t *= 0.5;
                if t < 1e-30 {
                    return Err(Error::StepUnderflow { r, eps: e });
                }
            }
            path.push((r, e));
            values.push(phi);
            if r <= om.r_lo || r >= om.r_hi {
                let face = if r <= om.r_lo {
                    Face::RLow
                } else {
                    Face::RHigh
                };
                return Ok(self.finish(
                    FlowKind::MaxMin,
                    start,
                    path,
                    values,
                    Termination::Boundary(face),
                    iters,
                ));
            }
        }
        if opts.newton_polish {
            let (rp, ep) = self.newton_polish(r, e)?;
            r = rp;
            e = ep;
            path.push((r, e));
            values.push(self.g(r, e));
        }
        let term = if self.converged_at(r, e, opts) {
            Termination::Converged
        } else if iters >= opts.max_iter {
            Termination::MaxIter
        } else if !om.contains(r, e) {
            Termination::Boundary(self.exit_face(r, e))
        } else {
            Termination::MaxIter
        };
        Ok(self.finish(FlowKind::MaxMin, start, path, values, term, iters))
    }

    /// Newton on ∇g = 0 with backtracking on the normalized gradient norm.
    fn newton_polish(&self, mut r: f64, mut e: f64) -> Result<(f64, f64)> {
        let om = self.omega();
        let mut gn = self.grad_norm_g(r, e);
        for _ in 0..50 {
            let (gr, ge) = self.grad_g(r, e);
            let h = self.hess_g(r, e);
            let det = h.rr * h.ee - h.re * h.re;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Degenerate(format!(
                    "singular reduced Hessian at ({r}, {e})"
                )));
            }
            let dr = -(h.ee * gr - h.re * ge) / det;
            let de = -(h.rr * ge - h.re * gr) / det;
            let mut t: f64 = 1.0;
            let mut moved = false;
            while t > 1e-6 {
                let (rn, en) = (r + t * dr, e + t * de);
                if om.contains(rn, en) {
                    let gnn = self.grad_norm_g(rn, en);
                    if gnn < gn {
                        r = rn;
                        e = en;
                        gn = gnn;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Ok((r, e))
    }

    /// The interior max-min critical point, from the center of Ω.
    pub fn critical_point(&self) -> Result<Trajectory> {
        self.flow_solve(
            (self.r_center(), self.eps0()),
            FlowKind::MaxMin,
            &FlowOptions::default(),
        )
    }

    /// Uniform random points in the interior of Ω (shrunk by 5%).
    pub fn random_starts(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let om = self.omega();
        let (hr, he) = self.half_widths();
        let (rc, ec) = (self.r_center(), self.eps0());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(-0.95..0.95);
                let v: f64 = rng.random_range(-0.95..0.95);
                (
                    (rc + u * hr).clamp(om.r_lo, om.r_hi),
                    (ec + v * he).clamp(om.e_lo, om.e_hi),
                )
            })
            .collect()
    }

    /// (positive, negative) eigenvalue counts of ∇²F.
    pub fn hessian_signature(&self, r: f64, e: f64) -> (usize, usize) {
        let h = self.hess_g(r, e);
        let c = self.sign_f();
        let (l1, l2) = eig2(&Hessian {
            rr: c * h.rr,
            re: c * h.re,
            ee: c * h.ee,
        });
        let pos = [l1, l2].iter().filter(|&&l| l > 0.0).count();
        let neg = [l1, l2].iter().filter(|&&l| l < 0.0).count();
        (pos, neg)
    }

    /// Sign conditions on the four faces of Ω: ∂_ε G > 0 at ε_hi, < 0 at
    /// ε_lo, and G < α1 on both r-faces.
    pub fn boundary_signs(&self, samples: usize) -> Vec<FaceCheck> {
        let om = self.omega();
        let n = samples.max(2);
        let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
        let (a1, _) = self.alpha_levels_g();
        let eps_face = |e: f64, sign: f64| -> f64 {
            (0..n)
                .map(|i| sign * self.grad_g(lin(om.r_lo, om.r_hi, i), e).1)
                .fold(f64::INFINITY, f64::min)
        };
        let r_face = |r: f64| -> f64 {
            (0..n)
                .map(|i| a1 - self.g(r, lin(om.e_lo, om.e_hi, i)))
                .fold(f64::INFINITY, f64::min)
        };
        let checks = [
            (Face::RLow, r_face(om.r_lo)),
            (Face::RHigh, r_face(om.r_hi)),
            (Face::EpsLow, eps_face(om.e_lo, -1.0)),
            (Face::EpsHigh, eps_face(om.e_hi, 1.0)),
        ];
        checks
            .iter()
            .map(|&(face, margin)| FaceCheck {
                face,
                margin,
                pass: margin > 0.0,
            })
            .collect()
    }

    /// Numerical check of the two max-min conditions on the analytic model.
    pub fn maxmin_certificate(&self, samples: usize) -> Certificate {
        let om = self.omega();
        let n = samples.max(2);
        let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
        let (a1g, a2g) = self.alpha_levels_g();
        let (alpha1, alpha2) = self.alpha_levels();
        let base = self.count() * self.base();
        let sc = self.scale();

        let sup_faces = (0..n)
            .flat_map(|i| {
                let e = lin(om.e_lo, om.e_hi, i);
                [self.g(om.r_lo, e), self.g(om.r_hi, e)]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let fiber_min = (0..n)
            .map(|i| self.g(self.r_center(), lin(om.e_lo, om.e_hi, i)))
            .fold(f64::INFINITY, f64::min)
            .min(self.g(
                self.r_center(),
                self.inner_min(self.r_center(), self.eps0()),
            ));
        let max_omega = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.g(lin(om.r_lo, om.r_hi, i), lin(om.e_lo, om.e_hi, j)))
            .fold(f64::NEG_INFINITY, f64::max);

        let margin_ii = a1g - sup_faces;
        let margin_i = fiber_min - a1g;
        let margin_c = a2g - max_omega;
        Certificate {
            alpha1,
            alpha2,
            sup_r_faces: base + sc * sup_faces,
            margin_ii,
            fiber_min: base + sc * fiber_min,
            margin_i,
            margin_c,
            pass_i: margin_i > 0.0 && margin_c > 0.0,
            pass_ii: margin_ii > 0.0,
        }
    }

    /// F on an nr × ne grid over Ω, evaluated in parallel.
    pub fn grid(&self, nr: usize, ne: usize) -> Result<Vec<GridPoint>> {
        if nr < 2 || ne < 2 {
            return Err(Error::Invalid(format!(
                "landscape grid needs at least 2x2 points, got {nr}x{ne}"
            )));
        }
        let om = self.omega();
        Ok((0..nr * ne)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / ne, idx % ne);
                let r = om.r_lo + (om.r_hi - om.r_lo) * i as f64 / (nr - 1) as f64;
                let eps = om.e_lo + (om.e_hi - om.e_lo) * j as f64 / (ne - 1) as f64;
                GridPoint {
                    r,
                    eps,
                    f: self.f_model(r, eps),
                    f_excess: self.f_excess(r, eps),
                    grad_norm: self.grad_norm_f(r, eps),
                }
            })
            .collect())
    }

    /// Grid, critical point, random-start flows, face signs and certificate.
    pub fn landscape(
        &self,
        nr: usize,
        ne: usize,
        n_starts: usize,
        seed: u64,
    ) -> Result<LandscapeReport> {
        let grid = self.grid(nr, ne)?;
        let critical = self.critical_point()?;
        let opts = FlowOptions::default();
        let starts = self
            .random_starts(n_starts, seed)
            .into_par_iter()
            .map(|s| self.flow_solve(s, FlowKind::MaxMin, &opts))
            .collect::<Result<Vec<_>>>()?;
        let samples = nr.max(ne).max(64);
        Ok(LandscapeReport {
            mode: self.p.mode,
            form: self.form,
            k: self.k,
            nu: self.nu,
            theta_bar: self.theta_bar,
            omega: self.omega(),
            eps0: self.eps0(),
            nr,
            ne,
            grid,
            hessian_signature: self.hessian_signature(critical.r, critical.eps),
            critical,
            starts,
            faces: self.boundary_signs(samples),
            certificate: self.maxmin_certificate(samples),
        })
    }
}
