//! Projected linear problem in a symmetry-adapted dictionary and the
//! contraction iteration for the correction φ.
//!
//! Every dictionary function has a closed-form fractional Laplacian: bubbles
//! map to bubble^p, the kernel modes Σ∂U_i to pΣ|U_i|^{p-1}∂U_i, and Riesz
//! potentials of Gaussians to the Gaussians themselves. The discrete L_k is a
//! constrained weighted least-squares fit on a sector point cloud, pushed
//! toward the ‖·‖_** minimax solution by Lawson reweighting.

use crate::energy::{l_k_eval, nonlinearity, PotentialModel};
use crate::error::{Error, Result};
use crate::geometry::Ansatz;
use crate::norms::{build_cloud, CloudSpec, Flavor, NormSpec};
use crate::params::{Bubble, BubbleKernel, Mode, ProblemParams};
use crate::quadrature::cubature::{gauss_legendre, gauss_legendre_panels};
use crate::special::{gamma_fn, hyp2f1_neg, kummer_m, sphere_area};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Profile {
    /// Σ_i ∂U_i/∂ε.
    KernelEps,
    /// Σ_i ∂U_i/∂r.
    KernelR,
    /// Bubble profile of the given width.
    Bubble { width: f64 },
    /// Riesz potential of exp(−|y|²/σ²).
    GaussPot { sigma: f64 },
    /// Riesz potential of (1 + |y|²/σ²)^{−β}, β > s. With β = 2s the source has
    /// the shape of U^{p−1} and the potential decays like |y|^{−2s}.
    PowerPot { sigma: f64, beta: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisFn {
    pub name: String,
    pub profile: Profile,
    /// Offsets (radial, transverse) in each center's frame; the local function is
    /// the sum of the profile placed at each offset.
    pub offsets: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
struct Frame {
    xi: Vec<f64>,
    er: Vec<f64>,
    et: Vec<f64>,
    sign: f64,
}

/// Symmetrized dictionary around the centers of an ansatz.
#[derive(Debug, Clone, Serialize)]
pub struct GalerkinBasis {
    pub fns: Vec<BasisFn>,
    #[serde(skip)]
    pub ansatz: Ansatz,
    #[serde(skip)]
    p: ProblemParams,
    #[serde(skip)]
    frames: Vec<Frame>,
    gauss_const: f64,
}

impl Frame {
    /// (|y|², y·e_r, y·e_t) for y = x − x^i.
    fn local(&self, x: &[f64]) -> (f64, f64, f64) {
        let (mut d2, mut z, mut zt) = (0.0, 0.0, 0.0);
        for (i, (xv, c)) in x.iter().zip(&self.xi).enumerate() {
            let y = xv - c;
            d2 += y * y;
            if i < 2 {
                z += y * self.er[i];
                zt += y * self.et[i];
            }
        }
        (d2, z, zt)
    }
}

fn frames_of(a: &Ansatz) -> Vec<Frame> {
    a.bubbles
        .iter()
        .map(|b| {
            let rho = (b.xi[0] * b.xi[0] + b.xi[1] * b.xi[1]).sqrt();
            let mut er = vec![0.0; a.n];
            if rho > 0.0 {
                er[0] = b.xi[0] / rho;
                er[1] = b.xi[1] / rho;
            } else {
                er[0] = 1.0;
            }
            let mut et = vec![0.0; a.n];
            et[0] = -er[1];
            et[1] = er[0];
            Frame {
                xi: b.xi.clone(),
                er,
                et,
                sign: b.sign,
            }
        })
        .collect()
}

/// (∂U/∂ε, ∂U/∂r) of one bubble; a bubble at the origin uses translation along e1.
fn kernel_modes(kern: &BubbleKernel, b: &Bubble, x: &[f64]) -> (f64, f64) {
    let ze = kern.d_eps(b, x);
    let zr = match kern.d_r(b, x) {
        Ok(v) => v,
        Err(_) => kern.grad_center(b, x)[0],
    };
    (ze, zr)
}

impl GalerkinBasis {
    /// Default dictionary: the 24 local functions plus, for a polygon, functions
    /// placed between and inside the bubbles (see `polygon_fns`).
    pub fn standard(p: &ProblemParams, ansatz: &Ansatz) -> Result<Self> {
        let mut fns = Self::local_fns(ansatz);
        fns.extend(Self::polygon_fns(ansatz));
        Self::from_fns(p, ansatz, fns)
    }

    /// The 24 functions built on each center alone: kernel modes, bubbles and
    /// radial pairs of bubbles and Gaussian potentials, widths in units of w.
    pub fn local_fns(ansatz: &Ansatz) -> Vec<BasisFn> {
        let w = ansatz.eps;
        let mut fns = vec![
            BasisFn {
                name: "Z_eps".into(),
                profile: Profile::KernelEps,
                offsets: vec![[0.0, 0.0]],
            },
            BasisFn {
                name: "Z_r".into(),
                profile: Profile::KernelR,
                offsets: vec![[0.0, 0.0]],
            },
        ];
        let scales = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        for &sg in &scales {
            fns.push(BasisFn {
                name: format!("bubble_{sg}"),
                profile: Profile::Bubble { width: sg * w },
                offsets: vec![[0.0, 0.0]],
            });
        }
        for &sg in &scales {
            fns.push(BasisFn {
                name: format!("bubble_pair_{sg}"),
                profile: Profile::Bubble { width: sg * w },
                offsets: vec![[-sg * w, 0.0], [sg * w, 0.0]],
            });
        }
        for &sg in &scales[1..] {
            fns.push(BasisFn {
                name: format!("gauss_pair_{sg}"),
                profile: Profile::GaussPot { sigma: sg * w },
                offsets: vec![[-sg * w, 0.0], [sg * w, 0.0]],
            });
        }
        for sg in [1.0, 4.0] {
            fns.push(BasisFn {
                name: format!("gauss_{sg}"),
                profile: Profile::GaussPot { sigma: sg * w },
                offsets: vec![[0.0, 0.0]],
            });
        }
        fns
    }

    /// Functions resolving the region between bubbles, where the interaction
    /// and the K deficit acting on the bubble tails dominate the ** norm:
    /// bubbles between neighbouring centers, Gaussian potentials displaced
    /// toward the origin, and a ring of Gaussian potentials over the polygon
    /// interior and exterior. Empty for a single centered bubble.
    ///
    /// In sign-changing mode the mid-ray between neighbours is a nodal line on
    /// which symmetrized functions cancel, so those are placed at a quarter of
    /// the sector angle instead.
    pub fn polygon_fns(ansatz: &Ansatz) -> Vec<BasisFn> {
        let count = ansatz.len();
        let r = ansatz.r;
        let w = ansatz.eps;
        if count < 2 || r <= 0.0 {
            return Vec::new();
        }
        let th = PI / count as f64;
        let half = r * th.sin();
        let mid = match ansatz.mode {
            Mode::Positive => 1.0,
            Mode::SignChanging => 0.5,
        };
        // point at polar (ρr, frac·π/count) relative to the first center and its mirror
        let polar = |rho: f64, frac: f64| -> Vec<[f64; 2]> {
            let ang = frac * th;
            let (px, py) = (rho * r * ang.cos() - r, rho * r * ang.sin());
            if py.abs() < 1e-12 * r {
                vec![[px, 0.0]]
            } else {
                vec![[px, py], [px, -py]]
            }
        };
        let mut fns = Vec::new();
        for (sg, rho) in [
            (0.25, 1.0),
            (0.5, 1.0),
            (1.0, 1.0),
            (2.0, 1.0),
            (0.5, 0.7),
            (1.0, 0.7),
            (1.0, 0.5),
            (1.0, 1.4),
            (2.0, 1.4),
        ] {
            fns.push(BasisFn {
                name: format!("mid_bubble_{sg}h_{rho}r"),
                profile: Profile::Bubble {
                    width: (sg * half).max(2.0 * w),
                },
                offsets: polar(rho, mid),
            });
        }
        for (sg, d) in [(2.0, 4.0), (4.0, 8.0), (8.0, 16.0)] {
            fns.push(BasisFn {
                name: format!("inward_gauss_{sg}"),
                profile: Profile::GaussPot { sigma: sg * w },
                offsets: vec![[-d * w, 0.0]],
            });
        }
        let fracs: &[f64] = match ansatz.mode {
            Mode::Positive => &[0.0, 0.5, 1.0],
            Mode::SignChanging => &[0.0, 0.5],
        };
        for rho in [0.25, 0.5, 0.75, 1.5, 2.0] {
            for &frac in fracs {
                let ang = frac * th;
                let (px, py) = (rho * r * ang.cos() - r, rho * r * ang.sin());
                let (qx, qy) = (r * (2.0 * th).cos() - r, r * (2.0 * th).sin());
                let dist = px.hypot(py).min((px - qx).hypot(py - qy));
                let sigma = (0.35 * dist).max(4.0 * w);
                // angular copies closer than a width are nearly dependent
                if frac > 0.0 && rho * r * ang < sigma {
                    continue;
                }
                fns.push(BasisFn {
                    name: format!("ring_gauss_{rho}r_{frac}"),
                    profile: Profile::GaussPot { sigma },
                    offsets: polar(rho, frac),
                });
            }
        }
        fns
    }

    /// Only the two kernel modes; the constrained system on this basis is empty.
    pub fn kernel_only(p: &ProblemParams, ansatz: &Ansatz) -> Result<Self> {
        let fns = Self::local_fns(ansatz).into_iter().take(2).collect();
        Self::from_fns(p, ansatz, fns)
    }

    pub fn from_fns(p: &ProblemParams, ansatz: &Ansatz, fns: Vec<BasisFn>) -> Result<Self> {
        p.validate()?;
        if p.n < 3 {
            return Err(Error::Invalid(format!(
                "correction solver needs N >= 3, got {}",
                p.n
            )));
        }
        if fns.is_empty() {
            return Err(Error::Invalid("empty dictionary".into()));
        }
        // clamped widths can make two entries identical
        let mut fns = fns;
        let mut seen: Vec<(Profile, Vec<[f64; 2]>)> = Vec::new();
        fns.retain(|f| {
            let key = (f.profile, f.offsets.clone());
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
        let n = p.n as f64;
        let gauss_const = gamma_fn(n / 2.0 - p.s)? / (4f64.powf(p.s) * gamma_fn(n / 2.0)?);
        Ok(GalerkinBasis {
            fns,
            ansatz: ansatz.clone(),
            p: p.clone(),
            frames: frames_of(ansatz),
            gauss_const,
        })
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    /// Riesz potential of exp(−d²/σ²) and the source itself.
    fn gauss_pair(&self, sigma: f64, d2: f64) -> (f64, f64) {
        let s = self.p.s;
        let n = self.p.n as f64;
        let z = d2 / (sigma * sigma);
        let m = kummer_m(n / 2.0 - s, n / 2.0, -z).unwrap_or(0.0);
        (self.gauss_const * sigma.powf(2.0 * s) * m, (-z).exp())
    }

    /// Riesz potential of (1 + d²/σ²)^{−β} and the source itself.
    pub fn power_pair(&self, sigma: f64, beta: f64, d2: f64) -> (f64, f64) {
        let s = self.p.s;
        let h = self.p.n as f64 / 2.0;
        let z = d2 / (sigma * sigma);
        let c = gamma_fn(beta - s).unwrap_or(f64::NAN) * gamma_fn(h - s).unwrap_or(f64::NAN)
            / (4f64.powf(s) * gamma_fn(beta).unwrap_or(f64::NAN) * gamma_fn(h).unwrap_or(f64::NAN));
        let f = hyp2f1_neg(beta - s, h - s, h, -z).unwrap_or(f64::NAN);
        (c * sigma.powf(2.0 * s) * f, (1.0 + z).powf(-beta))
    }

    /// Riesz potential of exp(−d²/σ²) and the source itself.
    pub fn gauss_pot(&self, sigma: f64, d2: f64) -> (f64, f64) {
        self.gauss_pair(sigma, d2)
    }

    /// Values b_j(x) and (−Δ)^s b_j(x) for all dictionary functions.
    pub fn eval_all(&self, x: &[f64], b: &mut [f64], lap: &mut [f64]) {
        let kern = self.p.kernel();
        let pe = kern.p;
        b.iter_mut().for_each(|v| *v = 0.0);
        lap.iter_mut().for_each(|v| *v = 0.0);
        for (fr, bub) in self.frames.iter().zip(&self.ansatz.bubbles) {
            let (d2, z, zt) = fr.local(x);
            let shifted = |o: &[f64; 2]| {
                (d2 - 2.0 * (o[0] * z + o[1] * zt) + o[0] * o[0] + o[1] * o[1]).max(0.0)
            };
            let mut modes: Option<(f64, f64, f64)> = None;
            for (j, f) in self.fns.iter().enumerate() {
                match f.profile {
                    Profile::KernelEps | Profile::KernelR => {
                        let (ze, zr, up) = *modes.get_or_insert_with(|| {
                            let (ze, zr) = kernel_modes(&kern, bub, x);
                            let u = kern.profile(bub.eps, d2);
                            (ze, zr, pe * u.powf(pe - 1.0))
                        });
                        let zv = if f.profile == Profile::KernelEps {
                            ze
                        } else {
                            zr
                        };
                        b[j] += zv;
                        lap[j] += up * zv;
                    }
                    Profile::Bubble { width } => {
                        for o in &f.offsets {
                            let dd = shifted(o);
                            let u = kern.profile(width, dd);
                            b[j] += fr.sign * u;
                            lap[j] += fr.sign * u.powf(pe);
                        }
                    }
                    Profile::GaussPot { sigma } => {
                        for o in &f.offsets {
                            let dd = shifted(o);
                            let (v, g) = self.gauss_pair(sigma, dd);
                            b[j] += fr.sign * v;
                            lap[j] += fr.sign * g;
                        }
                    }
                    Profile::PowerPot { sigma, beta } => {
                        for o in &f.offsets {
                            let dd = shifted(o);
                            let (v, g) = self.power_pair(sigma, beta, dd);
                            b[j] += fr.sign * v;
                            lap[j] += fr.sign * g;
                        }
                    }
                }
            }
        }
    }

    /// Σ_j β_j b_j(x).
    pub fn combine(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        let nb = self.len();
        let mut b = vec![0.0; nb];
        let mut l = vec![0.0; nb];
        self.eval_all(x, &mut b, &mut l);
        b.iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    /// Y_l(x) = Σ_i |U_i|^{p-1} Z_{i,l}(x).
    pub fn y_modes(&self, x: &[f64]) -> [f64; 2] {
        let kern = self.p.kernel();
        let mut y = [0.0; 2];
        for bub in &self.ansatz.bubbles {
            let (ze, zr) = kernel_modes(&kern, bub, x);
            let u = kern.profile(bub.eps, bub.dist2(x)).powf(kern.p - 1.0);
            y[0] += u * ze;
            y[1] += u * zr;
        }
        y
    }

    /// Partition-of-unity weight of the first center.
    fn chi1(&self, x: &[f64]) -> f64 {
        let w2 = self.ansatz.eps * self.ansatz.eps;
        let psi = |c: &[f64]| {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (1.0 + d2 / w2).powi(-4)
        };
        let own = psi(&self.frames[0].xi);
        let total: f64 = self.frames.iter().map(|f| psi(&f.xi)).sum();
        own / total
    }

    /// Quadrature nodes in spherical coordinates around the first center,
    /// exact in the angle between e_t and x'' for functions of (x_1, x_2, |x''|).
    fn local_nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.p.n;
        let w = self.ansatz.eps;
        let fr = &self.frames[0];
        let reach = self
            .fns
            .iter()
            .map(|f| {
                let scale = match f.profile {
                    Profile::Bubble { width } => width,
                    Profile::GaussPot { sigma } | Profile::PowerPot { sigma, .. } => sigma,
                    _ => w,
                };
                scale
                    + f.offsets
                        .iter()
                        .fold(0.0f64, |a, o| a.max(o[0].hypot(o[1])))
            })
            .fold(w, f64::max);
        let r_max = 4.0 * (2.0 * self.ansatz.r + reach);
        let mut breaks = vec![0.0];
        let mut b = w / 16.0;
        while b < r_max {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(b);
        let (mut rs, mut rw) = gauss_legendre_panels(&breaks, 8);
        // tail R = b u^{-5/2}: an R^{-1.4} tail (slowest stiffness integrand) maps to a constant
        let (tu, tw) = gauss_legendre(16);
        for (u, wu) in tu.iter().zip(&tw) {
            let uu = 0.5 * (u + 1.0);
            rs.push(b * uu.powf(-2.5));
            rw.push(0.5 * wu * 2.5 * b * uu.powf(-3.5));
        }
        let (pa, pw) = gauss_legendre(32);
        let (qa, qw) = gauss_legendre(12);
        let omega = sphere_area(n - 2);
        let mut out = Vec::with_capacity(rs.len() * pa.len() * qa.len());
        for (r, wr) in rs.iter().zip(&rw) {
            let radial = wr * r.powi(n as i32 - 1);
            for (a, wa) in pa.iter().zip(&pw) {
                let phi = 0.5 * PI * (a + 1.0);
                let (sp, cp) = phi.sin_cos();
                let wphi = 0.5 * PI * wa * sp.powi(n as i32 - 2);
                for (c, wc) in qa.iter().zip(&qw) {
                    let psi = 0.5 * PI * (c + 1.0);
                    let (ss, cs) = psi.sin_cos();
                    let wpsi = 0.5 * PI * wc * ss.powi(n as i32 - 3);
                    let mut x = fr.xi.clone();
                    for i in 0..2 {
                        x[i] += r * (cp * fr.er[i] + sp * cs * fr.et[i]);
                    }
                    x[2] += r * sp * ss;
                    out.push((x, radial * wphi * wpsi * omega));
                }
            }
        }
        out
    }

    /// ∫_{R^N} F for a group-invariant integrand, reduced to the first sector.
    pub fn sector_integral<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let count = self.frames.len() as f64;
        // fixed chunks summed in order keep the result independent of scheduling
        let parts: Vec<f64> = self
            .local_nodes()
            .par_chunks(NODE_CHUNK)
            .map(|c| c.iter().map(|(x, w)| w * self.chi1(x) * f(x)).sum::<f64>())
            .collect();
        parts.iter().sum::<f64>() * count
    }
}

/// Precomputed values on a point cloud.
#[derive(Debug, Clone)]
struct CloudData {
    points: Vec<Vec<f64>>,
    /// npts × nb, values of L b_j.
    lb: DMatrix<f64>,
    /// npts × nb, values of b_j.
    b: DMatrix<f64>,
    y: DMatrix<f64>,
    u: Vec<f64>,
    k: Vec<f64>,
    w_star: Vec<f64>,
    w_dstar: Vec<f64>,
}

impl CloudData {
    fn build(
        basis: &GalerkinBasis,
        model: &PotentialModel,
        nu: f64,
        points: Vec<Vec<f64>>,
    ) -> Self {
        let p = &basis.p;
        let kern = p.kernel();
        let nb = basis.len();
        let centers = basis.ansatz.centers();
        let star = NormSpec::new(p, centers.clone(), Flavor::Star, Vec::new());
        let dstar = NormSpec::new(p, centers, Flavor::Dstar, Vec::new());
        let rows: Vec<(Vec<f64>, Vec<f64>, [f64; 2], f64, f64, f64, f64)> = points
            .par_iter()
            .map(|x| {
                let mut b = vec![0.0; nb];
                let mut lap = vec![0.0; nb];
                basis.eval_all(x, &mut b, &mut lap);
                let u = basis.ansatz.eval(&kern, x);
                let kv = model.scaled(x, nu);
                let pot = kern.p * kv * u.abs().powf(kern.p - 1.0);
                let lb: Vec<f64> = lap.iter().zip(&b).map(|(l, v)| l - pot * v).collect();
                (
                    b,
                    lb,
                    basis.y_modes(x),
                    u,
                    kv,
                    star.weight(x),
                    dstar.weight(x),
                )
            })
            .collect();
        let npts = points.len();
        let mut bm = DMatrix::zeros(npts, nb);
        let mut lbm = DMatrix::zeros(npts, nb);
        let mut ym = DMatrix::zeros(npts, 2);
        let mut u = Vec::with_capacity(npts);
        let mut k = Vec::with_capacity(npts);
        let mut ws = Vec::with_capacity(npts);
        let mut wd = Vec::with_capacity(npts);
        for (i, row) in rows.into_iter().enumerate() {
            for j in 0..nb {
                bm[(i, j)] = row.0[j];
                lbm[(i, j)] = row.1[j];
            }
            ym[(i, 0)] = row.2[0];
            ym[(i, 1)] = row.2[1];
            u.push(row.3);
            k.push(row.4);
            ws.push(row.5);
            wd.push(row.6);
        }
        CloudData {
            points,
            lb: lbm,
            b: bm,
            y: ym,
            u,
            k,
            w_star: ws,
            w_dstar: wd,
        }
    }

    fn norm(values: &[f64], weights: &[f64]) -> f64 {
        Self::norm_arg(values, weights).0
    }

    fn norm_arg(values: &[f64], weights: &[f64]) -> (f64, usize) {
        values
            .iter()
            .zip(weights)
            .map(|(v, w)| v.abs() / w)
            .enumerate()
            .fold(
                (0.0, 0),
                |best, (i, v)| if v > best.0 { (v, i) } else { best },
            )
    }

    fn phi(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        (&self.b * coeffs).iter().copied().collect()
    }

    /// L φ − H − Σ c_l Y_l.
    fn residual(&self, coeffs: &DVector<f64>, c: &[f64; 2], h: &[f64]) -> Vec<f64> {
        let lphi = &self.lb * coeffs;
        (0..self.points.len())
            .map(|i| lphi[i] - h[i] - c[0] * self.y[(i, 0)] - c[1] * self.y[(i, 1)])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Constrained least squares on the sector cloud in the ** weight with Lawson
    /// minimax reweighting.
    Collocation,
    /// Galerkin KKT system of the weak form.
    Galerkin,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssemblyReport {
    pub n_basis: usize,
    /// Condition number of the Jacobi-scaled stiffness matrix.
    pub cond: f64,
    /// max |S − Sᵀ| / max |S| before symmetrization (quadrature error).
    pub raw_asymmetry: f64,
    pub fit_points: usize,
    pub eval_points: usize,
    pub quad_nodes: usize,
}

/// Assembled projected problem for one ansatz, potential and ν.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub basis: GalerkinBasis,
    pub model: PotentialModel,
    pub nu: f64,
    /// ⟨(−Δ)^{s/2}b_a, (−Δ)^{s/2}b_b⟩.
    pub stiffness: DMatrix<f64>,
    /// p ∫ K |U|^{p-1} b_a b_b.
    pub potential: DMatrix<f64>,
    /// Constraint rows ⟨|U_1|^{p-1} Z_{1,l}, b_j⟩.
    pub constraints: DMatrix<f64>,
    /// Orthonormal basis of ker(constraints).
    pub nullspace: DMatrix<f64>,
    pub report: AssemblyReport,
    pub kind: SolverKind,
    pub lawson_steps: usize,
    /// Fit-cloud design [L N | −Y] / w**, columns scaled to unit norm.
    design: DMatrix<f64>,
    colnorm: Vec<f64>,
    fit: CloudData,
    eval: CloudData,
}

/// Sample clouds and solver settings for the projected problem.
#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    pub fit_cloud: CloudSpec,
    /// Seeded random points added to the fit set (seed + 1).
    pub fit_random: usize,
    pub eval_cloud: CloudSpec,
    /// Extra seeded random points in the evaluation set (log-uniform radius
    /// around the first center, uniform direction).
    pub eval_random: usize,
    pub seed: u64,
    pub lawson_steps: usize,
    pub solver: SolverKind,
    pub cond_limit: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        let mut fit = CloudSpec::standard();
        fit.shells.extend([64.0, 128.0]);
        let mut fit = fit.refined().refined().symmetric();
        fit.lattice = 2;
        CorrectionOptions {
            fit_cloud: fit,
            fit_random: 12000,
            eval_cloud: CloudSpec::standard().refined().refined().symmetric(),
            eval_random: 8000,
            seed: 7,
            lawson_steps: 40,
            solver: SolverKind::Collocation,
            cond_limit: 1e10,
        }
    }
}

/// Seeded sample points: half log-radial around the first center, half spread
/// over the first sector of the disk |x'| ≤ 2.5 r with log-distributed |x''|.
fn random_points(a: &Ansatz, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = &a.bubbles[0].xi;
    let w = a.eps;
    let (lo, hi) = ((w / 16.0).ln(), (8.0 * (a.r + 32.0 * w)).ln());
    let half = PI / a.len() as f64;
    let unit_dir = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<f64> {
        let d: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.into_iter().map(|v| v / nrm).collect()
    };
    (0..count)
        .map(|i| {
            if a.r > 0.0 && i % 2 == 1 {
                let rho = 2.5 * a.r * rng.random::<f64>().sqrt();
                let ang = rng.random_range(-half..half);
                let t = rng.random_range((w / 4.0).ln()..(2.0 * a.r).ln()).exp();
                let dir = unit_dir(&mut rng, a.n - 2);
                let mut x = vec![rho * ang.cos(), rho * ang.sin()];
                x.extend(dir.iter().map(|d| t * d));
                x
            } else {
                let rad = rng.random_range(lo..hi).exp();
                let dir = unit_dir(&mut rng, a.n);
                c.iter().zip(&dir).map(|(x, d)| x + rad * d).collect()
            }
        })
        .collect()
}

pub fn assemble(basis: &GalerkinBasis, model: &PotentialModel, nu: f64) -> Result<LinearSystem> {
    assemble_with(basis, model, nu, &CorrectionOptions::default())
}

pub fn assemble_with(
    basis: &GalerkinBasis,
    model: &PotentialModel,
    nu: f64,
    opts: &CorrectionOptions,
) -> Result<LinearSystem> {
    let p = &basis.p;
    let kern = p.kernel();
    let nb = basis.len();
    let a = &basis.ansatz;
    let count = a.len() as f64;
    let nodes = basis.local_nodes();
    let b1 = &a.bubbles[0];

    type Acc = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);
    let zero = || -> Acc {
        (
            DMatrix::zeros(nb, nb),
            DMatrix::zeros(nb, nb),
            DMatrix::zeros(2, nb),
        )
    };
    let parts: Vec<Acc> = nodes
        .par_chunks(NODE_CHUNK)
        .map(|chunk| {
            chunk.iter().fold(zero(), |mut acc, (x, wt)| {
                let mut b = vec![0.0; nb];
                let mut lap = vec![0.0; nb];
                basis.eval_all(x, &mut b, &mut lap);
                let chi = basis.chi1(x) * wt * count;
                let u = a.eval(&kern, x);
                let pot = chi * kern.p * model.scaled(x, nu) * u.abs().powf(kern.p - 1.0);
                for i in 0..nb {
                    let bi = b[i];
                    for j in 0..nb {
                        acc.0[(i, j)] += chi * bi * lap[j];
                        acc.1[(i, j)] += pot * bi * b[j];
                    }
                }
                let (ze, zr) = kernel_modes(&kern, b1, x);
                let u1 = kern.profile(b1.eps, b1.dist2(x)).powf(kern.p - 1.0) * wt;
                for j in 0..nb {
                    acc.2[(0, j)] += u1 * ze * b[j];
                    acc.2[(1, j)] += u1 * zr * b[j];
                }
                acc
            })
        })
        .collect();
    let (s_raw, m_raw, c_raw) = parts
        .into_iter()
        .fold(zero(), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));

    let smax = s_raw.amax();
    let raw_asymmetry = (&s_raw - s_raw.transpose()).amax() / smax;
    let stiffness = (&s_raw + s_raw.transpose()) * 0.5;
    let potential = (&m_raw + m_raw.transpose()) * 0.5;

    let diag: Vec<f64> = (0..nb).map(|i| stiffness[(i, i)]).collect();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::IllConditioned(
            "stiffness matrix has a nonpositive diagonal entry; remove the offending dictionary function".into(),
        ));
    }
    let scaled = DMatrix::from_fn(nb, nb, |i, j| {
        stiffness[(i, j)] / (diag[i] * diag[j]).sqrt()
    });
    let ev = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > opts.cond_limit {
        return Err(Error::IllConditioned(format!(
            "stiffness condition number {cond:.3e} exceeds {:.0e}; reduce the dictionary",
            opts.cond_limit
        )));
    }

    let constraints = c_raw;
    if nb <= 2 {
        return Err(Error::Degenerate(format!(
            "dictionary of {nb} functions is annihilated by the two orthogonality constraints"
        )));
    }
    let sv = constraints.clone().svd(false, false).singular_values;
    if sv.len() < 2 || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::Degenerate(
            "constraint rows are linearly dependent on this dictionary".into(),
        ));
    }
    let nullspace = orth_complement(&constraints)?;

    let w = a.eps;
    let mut fit_pts = build_cloud(p.n, &a.centers(), w, &opts.fit_cloud);
    fit_pts.extend(random_points(a, opts.fit_random, opts.seed.wrapping_add(1)));
    let mut eval_pts = build_cloud(p.n, &a.centers(), w, &opts.eval_cloud);
    eval_pts.extend(random_points(a, opts.eval_random, opts.seed));
    let fit = CloudData::build(basis, model, nu, fit_pts);
    let eval = CloudData::build(basis, model, nu, eval_pts);
    let (design, colnorm) = design_matrix(&fit, &nullspace);
    let report = AssemblyReport {
        n_basis: nb,
        cond,
        raw_asymmetry,
        fit_points: fit.points.len(),
        eval_points: eval.points.len(),
        quad_nodes: nodes.len(),
    };
    Ok(LinearSystem {
        basis: basis.clone(),
        model: *model,
        nu,
        stiffness,
        potential,
        constraints,
        nullspace,
        report,
        kind: opts.solver,
        lawson_steps: opts.lawson_steps,
        design,
        colnorm,
        fit,
        eval,
    })
}

fn design_matrix(fit: &CloudData, nullspace: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let npts = fit.points.len();
    let nn = nullspace.ncols();
    let ln = &fit.lb * nullspace;
    let mut d = DMatrix::zeros(npts, nn + 2);
    for i in 0..npts {
        let wd = fit.w_dstar[i];
        for j in 0..nn {
            d[(i, j)] = ln[(i, j)] / wd;
        }
        d[(i, nn)] = -fit.y[(i, 0)] / wd;
        d[(i, nn + 1)] = -fit.y[(i, 1)] / wd;
    }
    let colnorm: Vec<f64> = (0..nn + 2)
        .map(|j| d.column(j).norm().max(1e-300))
        .collect();
    for (j, c) in colnorm.iter().enumerate() {
        d.column_mut(j).scale_mut(1.0 / c);
    }
    (d, colnorm)
}

/// Orthonormal basis of the null space of `c` (2 × nb).
fn orth_complement(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nb = c.ncols();
    // eigenvectors of CᵀC with zero eigenvalue
    let ctc = c.transpose() * c;
    let eig = SymmetricEigen::new(ctc);
    let mut idx: Vec<usize> = (0..nb).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let keep = &idx[..nb - c.nrows()];
    if keep.is_empty() {
        return Err(Error::Degenerate(
            "no functions left after imposing the constraints".into(),
        ));
    }
    Ok(DMatrix::from_fn(nb, keep.len(), |i, j| {
        eig.eigenvectors[(i, keep[j])]
    }))
}

const NODE_CHUNK: usize = 2048;

/// Relative ‖·‖_* level below which successive differences are round-off.
pub const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    /// ‖φ_{n} − φ_{n-1}‖_*.
    pub diff_star: f64,
    /// diff_n / diff_{n-1}.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectionState {
    pub coeffs: Vec<f64>,
    pub multipliers: [f64; 2],
    pub phi_star: f64,
    pub rhs_dstar: f64,
    /// ‖Lφ − H − Σc_lY_l‖_** (linear solve) or the full projected residual of U+φ (fixed point).
    pub residual_dstar: f64,
    /// ‖l_k‖_**, the residual of U alone (fixed point only).
    pub uncorrected_dstar: Option<f64>,
    /// |Cβ| / (|C||β|).
    pub constraint_residue: f64,
    /// Evaluation point where the weighted residual peaks.
    pub residual_argmax: Vec<f64>,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
    /// Stopped on stagnation at the round-off floor rather than on the tolerance.
    pub noise_limited: bool,
}

impl CorrectionState {
    /// Ratios of successive differences from the second iteration on, dropping
    /// differences already at the round-off floor.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        let size = self.phi_star;
        self.trace
            .iter()
            .filter(|t| t.diff_star > NOISE_FLOOR * size)
            .filter_map(|t| t.ratio)
            .collect()
    }

    pub fn residual_gain(&self) -> Option<f64> {
        self.uncorrected_dstar.map(|u| u / self.residual_dstar)
    }
}

struct Frozen {
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    sqrt_u: DVector<f64>,
}

pub struct FrozenOperator<'a> {
    sys: &'a LinearSystem,
    frozen: Frozen,
}

impl FrozenOperator<'_> {
    pub fn solve<F>(&self, h: F) -> Result<CorrectionState>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let sys = self.sys;
        let h_fit: Vec<f64> = sys.fit.points.par_iter().map(|x| h(x)).collect();
        let h_eval: Vec<f64> = sys.eval.points.par_iter().map(|x| h(x)).collect();
        let s = sys.frozen_solve(&self.frozen, &sys.scaled_rhs(&h_fit))?;
        sys.state(&s, &h_eval)
    }
}

struct Solve {
    coeffs: DVector<f64>,
    c: [f64; 2],
}

impl LinearSystem {
    pub fn with_solver(mut self, kind: SolverKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_lawson_steps(mut self, steps: usize) -> Self {
        self.lawson_steps = steps;
        self
    }

    pub fn quadratic_form(&self) -> DMatrix<f64> {
        &self.stiffness - &self.potential
    }

    /// Eigenvalues of the quadratic form on the constrained subspace, relative to
    /// the stiffness metric, ascending.
    pub fn constrained_spectrum(&self) -> Result<Vec<f64>> {
        let n = &self.nullspace;
        let a = n.transpose() * self.quadratic_form() * n;
        let g = n.transpose() * &self.stiffness * n;
        let chol = g.cholesky().ok_or_else(|| {
            Error::IllConditioned("constrained stiffness is not positive definite".into())
        })?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::IllConditioned("singular Cholesky factor".into()))?;
        let m = &linv * a * linv.transpose();
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    pub fn fit_points(&self) -> &[Vec<f64>] {
        &self.fit.points
    }

    pub fn eval_points(&self) -> &[Vec<f64>] {
        &self.eval.points
    }

    fn constraint_residue(&self, coeffs: &DVector<f64>) -> f64 {
        let r = &self.constraints * coeffs;
        let scale = self.constraints.abs() * coeffs.abs();
        let s = scale.amax();
        if s == 0.0 {
            0.0
        } else {
            r.amax() / s
        }
    }

    fn scaled_rhs(&self, h: &[f64]) -> DVector<f64> {
        DVector::from_iterator(h.len(), h.iter().zip(&self.fit.w_dstar).map(|(v, w)| v / w))
    }

    /// SVD of the row-weighted design for repeated solves with fixed weights.
    fn freeze(&self, u: &[f64]) -> Frozen {
        let sqrt_u = DVector::from_iterator(u.len(), u.iter().map(|v| v.sqrt()));
        let mut dw = self.design.clone();
        for (i, s) in sqrt_u.iter().enumerate() {
            dw.row_mut(i).scale_mut(*s);
        }
        Frozen {
            svd: dw.svd(true, true),
            sqrt_u,
        }
    }

    fn frozen_solve(&self, f: &Frozen, rhs: &DVector<f64>) -> Result<Solve> {
        let z = f
            .svd
            .solve(&rhs.component_mul(&f.sqrt_u), 1e-13)
            .map_err(|e| Error::IllConditioned(format!("least-squares solve failed: {e}")))?;
        Ok(self.unscale(&z))
    }

    fn unscale(&self, z: &DVector<f64>) -> Solve {
        let nn = self.nullspace.ncols();
        let zs: Vec<f64> = z.iter().zip(&self.colnorm).map(|(v, c)| v / c).collect();
        Solve {
            coeffs: &self.nullspace * DVector::from_column_slice(&zs[..nn]),
            c: [zs[nn], zs[nn + 1]],
        }
    }

    /// Lawson reweighting toward the minimax fit; returns the weights of the
    /// step with the smallest maximum residual. Steps use the normal equations.
    fn lawson_weights(&self, rhs: &DVector<f64>) -> Vec<f64> {
        let d = &self.design;
        let npts = d.nrows();
        // power-of-two prescaling keeps the iteration exactly homogeneous in H
        let amax = rhs.amax();
        let rhs = &(rhs * 2f64.powi(-(amax.log2().round() as i32)));
        let mut u = vec![1.0 / npts as f64; npts];
        let mut best = (f64::INFINITY, u.clone());
        for _ in 0..self.lawson_steps.max(1) {
            let mut du = d.clone();
            let mut ru = rhs.clone();
            for i in 0..npts {
                du.row_mut(i).scale_mut(u[i]);
                ru[i] *= u[i];
            }
            let g = d.transpose() * &du;
            let b = d.transpose() * &ru;
            let z = match g.clone().cholesky() {
                Some(ch) => ch.solve(&b),
                None => match g.svd(true, true).solve(&b, 1e-14) {
                    Ok(z) => z,
                    Err(_) => break,
                },
            };
            let res = d * &z - rhs;
            let worst = res.amax();
            // a margin keeps near-ties from flipping under round-off
            if worst < best.0 * (1.0 - 1e-6) {
                best = (worst, u.clone());
            }
            let mut tot = 0.0;
            for i in 0..npts {
                u[i] *= res[i].abs();
                tot += u[i];
            }
            if !(tot > 0.0) {
                break;
            }
            u.iter_mut().for_each(|v| *v /= tot);
        }
        best.1
    }

    fn solve_fit(&self, h: &[f64]) -> Result<Solve> {
        if h.iter().all(|v| *v == 0.0) {
            return Ok(Solve {
                coeffs: DVector::zeros(self.basis.len()),
                c: [0.0; 2],
            });
        }
        let rhs = self.scaled_rhs(h);
        let u = self.lawson_weights(&rhs);
        self.frozen_solve(&self.freeze(&u), &rhs)
    }

    fn solve_galerkin<F>(&self, h: &F) -> Result<Solve>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let nb = self.basis.len();
        let count = self.basis.ansatz.len() as f64;
        let mut hv = DVector::zeros(nb);
        let nodes = self.basis.local_nodes();
        let parts: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|(x, wt)| {
                let mut b = vec![0.0; nb];
                let mut l = vec![0.0; nb];
                self.basis.eval_all(x, &mut b, &mut l);
                let f = wt * self.basis.chi1(x) * count * h(x);
                b.iter().map(|v| v * f).collect()
            })
            .collect();
        for row in parts {
            for j in 0..nb {
                hv[j] += row[j];
            }
        }
        if hv.iter().all(|v| *v == 0.0) {
            return Ok(Solve {
                coeffs: DVector::zeros(nb),
                c: [0.0; 2],
            });
        }
        // ⟨Y_l, b_j⟩ = count · C_lj by symmetry
        let a = self.quadratic_form();
        let mut kkt = DMatrix::zeros(nb + 2, nb + 2);
        kkt.view_mut((0, 0), (nb, nb)).copy_from(&a);
        for l in 0..2 {
            for j in 0..nb {
                kkt[(j, nb + l)] = -count * self.constraints[(l, j)];
                kkt[(nb + l, j)] = self.constraints[(l, j)];
            }
        }
        let mut rhs = DVector::zeros(nb + 2);
        rhs.rows_mut(0, nb).copy_from(&hv);
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::IllConditioned("singular KKT system".into()))?;
        Ok(Solve {
            coeffs: sol.rows(0, nb).into_owned(),
            c: [sol[nb], sol[nb + 1]],
        })
    }

    fn state(&self, s: &Solve, h_eval: &[f64]) -> Result<CorrectionState> {
        let phi = self.eval.phi(&s.coeffs);
        let res = self.eval.residual(&s.coeffs, &s.c, h_eval);
        let (res_norm, arg) = CloudData::norm_arg(&res, &self.eval.w_dstar);
        Ok(CorrectionState {
            coeffs: s.coeffs.iter().copied().collect(),
            multipliers: s.c,
            phi_star: CloudData::norm(&phi, &self.eval.w_star),
            rhs_dstar: CloudData::norm(h_eval, &self.eval.w_dstar),
            residual_dstar: res_norm,
            residual_argmax: self.eval.points[arg].clone(),
            uncorrected_dstar: None,
            constraint_residue: self.constraint_residue(&s.coeffs),
            trace: Vec::new(),
            converged: true,
            noise_limited: false,
        })
    }

    /// Discrete L_k(H): φ in the constrained dictionary span and multipliers c_l
    /// with Lφ ≈ H + Σ c_l Y_l.
    pub fn solve_linear<F>(&self, h: F) -> Result<CorrectionState>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let h_fit: Vec<f64> = self.fit.points.par_iter().map(|x| h(x)).collect();
        let h_eval: Vec<f64> = self.eval.points.par_iter().map(|x| h(x)).collect();
        let s = match self.kind {
            SolverKind::Collocation => self.solve_fit(&h_fit)?,
            SolverKind::Galerkin => self.solve_galerkin(&h)?,
        };
        self.state(&s, &h_eval)
    }

    /// The discrete L_k with Lawson weights fixed by a reference right-hand side.
    /// Unlike `solve_linear`, whose weights adapt to each H, this is exactly linear.
    pub fn frozen_operator<F>(&self, h_ref: F) -> FrozenOperator<'_>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let h_fit: Vec<f64> = self.fit.points.par_iter().map(|x| h_ref(x)).collect();
        let npts = h_fit.len();
        let u = if h_fit.iter().all(|v| *v == 0.0) {
            vec![1.0 / npts as f64; npts]
        } else {
            self.lawson_weights(&self.scaled_rhs(&h_fit))
        };
        FrozenOperator {
            sys: self,
            frozen: self.freeze(&u),
        }
    }

    /// φ(x) for a coefficient vector.
    pub fn phi(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        self.basis.combine(coeffs, x)
    }

    /// φ = L_k(l_k + N(φ)) by successive substitution. The Lawson weights of the
    /// first solve are frozen so the discrete L_k is linear along the iteration.
    /// `trust` bounds ‖φ_1‖_* (defaults to ν^{-m/2}).
    pub fn fixed_point(
        &self,
        max_iter: usize,
        tol: f64,
        trust: Option<f64>,
    ) -> Result<CorrectionState> {
        let a = &self.basis.ansatz;
        let p = &self.basis.p;
        let kern = p.kernel();
        let lk = |x: &[f64]| l_k_eval(a, &kern, &self.model, self.nu, x);
        let l_fit: Vec<f64> = self.fit.points.par_iter().map(|x| lk(x)).collect();
        let l_eval: Vec<f64> = self.eval.points.par_iter().map(|x| lk(x)).collect();
        let uncorrected = CloudData::norm(&l_eval, &self.eval.w_dstar);
        let n_of = |cloud: &CloudData, phi: &[f64]| -> Vec<f64> {
            (0..phi.len())
                .map(|i| cloud.k[i] * nonlinearity(cloud.u[i], phi[i], kern.p))
                .collect()
        };

        let l_rhs = self.scaled_rhs(&l_fit);
        let frozen = if l_fit.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(self.freeze(&self.lawson_weights(&l_rhs)))
        };
        let first = match &frozen {
            Some(f) => self.frozen_solve(f, &l_rhs)?,
            None => self.solve_fit(&l_fit)?,
        };
        let trust = trust.unwrap_or_else(|| self.nu.powf(-p.m / 2.0));
        let phi1 = self.eval.phi(&first.coeffs);
        let phi1_star = CloudData::norm(&phi1, &self.eval.w_star);
        if phi1_star > trust {
            return Err(Error::Divergence(format!(
                "first iterate ‖φ_1‖_* = {phi1_star:.3e} is outside the trust region {trust:.3e}"
            )));
        }

        let mut cur = first;
        let mut trace = vec![IterRecord {
            iter: 1,
            diff_star: phi1_star,
            ratio: None,
        }];
        let mut converged = phi1_star == 0.0;
        let mut noise_limited = false;
        let mut up_streak = 0;
        let mut it = 1;
        while !converged && it < max_iter {
            it += 1;
            let phi_fit = self.fit.phi(&cur.coeffs);
            let nf = n_of(&self.fit, &phi_fit);
            let rhs: Vec<f64> = l_fit.iter().zip(&nf).map(|(l, n)| l + n).collect();
            let next = match &frozen {
                Some(f) => self.frozen_solve(f, &self.scaled_rhs(&rhs))?,
                None => self.solve_fit(&rhs)?,
            };
            let delta = &next.coeffs - &cur.coeffs;
            let diff = CloudData::norm(&self.eval.phi(&delta), &self.eval.w_star);
            let prev = trace.last().map(|t| t.diff_star).unwrap_or(0.0);
            let ratio = if prev > 0.0 { Some(diff / prev) } else { None };
            trace.push(IterRecord {
                iter: it,
                diff_star: diff,
                ratio,
            });
            cur = next;
            let size = CloudData::norm(&self.eval.phi(&cur.coeffs), &self.eval.w_star);
            if diff <= tol * size.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            let noisy = diff <= NOISE_FLOOR * size;
            if noisy && ratio.is_some_and(|r| r >= 0.5) {
                // stagnation at the round-off level of the discrete solve
                converged = true;
                noise_limited = true;
                break;
            }
            if !noisy && ratio.is_some_and(|r| r >= 1.0) {
                up_streak += 1;
                if up_streak >= 3 {
                    return Err(Error::Divergence(format!(
                        "successive differences grew for 3 steps: {:?}",
                        trace.iter().map(|t| t.diff_star).collect::<Vec<_>>()
                    )));
                }
            } else {
                up_streak = 0;
            }
        }

        let phi_eval = self.eval.phi(&cur.coeffs);
        let n_eval = n_of(&self.eval, &phi_eval);
        let rhs_eval: Vec<f64> = l_eval.iter().zip(&n_eval).map(|(l, n)| l + n).collect();
        let mut st = self.state(&cur, &rhs_eval)?;
        st.uncorrected_dstar = Some(uncorrected);
        st.trace = trace;
        st.converged = converged;
        st.noise_limited = noise_limited;
        Ok(st)
    }
}

/// Random right-hand side in the symmetry class: a random combination of the
/// sources (−Δ)^s b of the local non-kernel dictionary functions, replicated
/// over the polygon. Shapes are fixed in units of the bubble width, so the
/// same seed gives comparable data at every k.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetricSource {
    pub terms: Vec<(f64, BasisFn)>,
}

impl SymmetricSource {
    pub fn random(ansatz: &Ansatz, seed: u64, n_terms: usize) -> Self {
        let shapes: Vec<BasisFn> = GalerkinBasis::local_fns(ansatz)
            .into_iter()
            .filter(|f| !matches!(f.profile, Profile::KernelEps | Profile::KernelR))
            .collect();
        let w = ansatz.eps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n_terms)
            .map(|_| {
                let f = shapes[rng.random_range(0..shapes.len())].clone();
                let size = match f.profile {
                    Profile::Bubble { width } => width,
                    Profile::GaussPot { sigma } | Profile::PowerPot { sigma, .. } => sigma,
                    _ => w,
                };
                // broad shapes would otherwise dominate the ** norm
                let amp: f64 = rng.sample::<f64, _>(StandardNormal) * (w / size).powi(3);
                (amp, f)
            })
            .collect();
        SymmetricSource { terms }
    }

    pub fn eval(&self, basis: &GalerkinBasis, x: &[f64]) -> f64 {
        let kern = basis.p.kernel();
        let mut acc = 0.0;
        for fr in &basis.frames {
            let (d2, z, zt) = fr.local(x);
            for (amp, f) in &self.terms {
                for o in &f.offsets {
                    let dd =
                        (d2 - 2.0 * (o[0] * z + o[1] * zt) + o[0] * o[0] + o[1] * o[1]).max(0.0);
                    let v = match f.profile {
                        Profile::Bubble { width } => kern.profile(width, dd).powf(kern.p),
                        Profile::GaussPot { sigma } => (-dd / (sigma * sigma)).exp(),
                        Profile::PowerPot { sigma, beta } => {
                            (1.0 + dd / (sigma * sigma)).powf(-beta)
                        }
                        Profile::KernelEps | Profile::KernelR => 0.0,
                    };
                    acc += fr.sign * amp * v;
                }
            }
        }
        acc
    }
}
