//! Symmetric bubble configurations, sectors, symmetry checks and lattice sums.

use crate::error::{Error, Result};
use crate::params::{Bubble, BubbleKernel, Mode, ProblemParams};
use crate::special::{dirichlet_eta, zeta_fn, KahanSum};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Signed sum of equal-width bubbles centered on a circle in the x'-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ansatz {
    pub mode: Mode,
    /// Polygon parameter: number of bubbles for `Positive`, half of it for `SignChanging`.
    pub k: usize,
    pub r: f64,
    /// Shared width.
    pub eps: f64,
    pub n: usize,
    pub bubbles: Vec<Bubble>,
}

pub fn build_ansatz(p: &ProblemParams, k: usize, r: f64, eps: f64, mode: Mode) -> Result<Ansatz> {
    if k < 2 {
        return Err(Error::Invalid(format!("ansatz needs k >= 2, got {k}")));
    }
    if !(r > 0.0) || !(eps > 0.0) {
        return Err(Error::Invalid(format!(
            "ansatz needs r > 0 and eps > 0, got r={r}, eps={eps}"
        )));
    }
    let (count, step) = match mode {
        Mode::Positive => (k, 2.0 * PI / k as f64),
        Mode::SignChanging => (2 * k, PI / k as f64),
    };
    let bubbles = (0..count)
        .map(|i| {
            let a = step * i as f64;
            let mut xi = vec![0.0; p.n];
            xi[0] = r * a.cos();
            xi[1] = r * a.sin();
            let sign = match mode {
                Mode::Positive => 1.0,
                Mode::SignChanging => {
                    if i % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            Bubble::new(eps, xi, sign)
        })
        .collect();
    Ok(Ansatz {
        mode,
        k,
        r,
        eps,
        n: p.n,
        bubbles,
    })
}

impl Ansatz {
    /// One positive bubble at the origin; the k = 1 reference configuration.
    pub fn single(n: usize, eps: f64) -> Ansatz {
        Ansatz {
            mode: Mode::Positive,
            k: 1,
            r: 0.0,
            eps,
            n,
            bubbles: vec![Bubble::centered(n, eps)],
        }
    }

    pub fn len(&self) -> usize {
        self.bubbles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bubbles.is_empty()
    }

    /// Rotation angle generating the symmetry group and its character.
    pub fn symmetry(&self) -> (SymmetryClass, usize) {
        match self.mode {
            Mode::Positive => (SymmetryClass::H, self.k.max(1)),
            Mode::SignChanging => (SymmetryClass::HPrime, self.k),
        }
    }

    pub fn eval(&self, kern: &BubbleKernel, x: &[f64]) -> f64 {
        self.bubbles.iter().map(|b| kern.eval(b, x)).sum()
    }

    /// Sum of |U_i|^{p-1} U_i, i.e. the fractional Laplacian of the ansatz.
    pub fn frac_lap(&self, kern: &BubbleKernel, x: &[f64]) -> f64 {
        self.bubbles.iter().map(|b| kern.frac_lap(b, x)).sum()
    }

    /// Σ_i ∂U_i/∂r, the symmetrized radial kernel mode.
    pub fn d_r(&self, kern: &BubbleKernel, x: &[f64]) -> f64 {
        if self.r == 0.0 {
            // single centered bubble: translation along e1 stands in for the radial mode
            return kern.grad_center(&self.bubbles[0], x)[0];
        }
        self.bubbles
            .iter()
            .map(|b| kern.d_r(b, x).unwrap_or(0.0))
            .sum()
    }

    /// Σ_i ∂U_i/∂ε.
    pub fn d_eps(&self, kern: &BubbleKernel, x: &[f64]) -> f64 {
        self.bubbles.iter().map(|b| kern.d_eps(b, x)).sum()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.bubbles.iter().map(|b| b.xi.clone()).collect()
    }

    /// Minimum distance between two distinct centers.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.bubbles.iter().enumerate() {
            for b in &self.bubbles[i + 1..] {
                best = best.min(a.dist2(&b.xi).sqrt());
            }
        }
        best
    }

    /// Copy with every center rotated by `angle` in the x'-plane.
    pub fn rotated(&self, angle: f64) -> Ansatz {
        let mut out = self.clone();
        for b in &mut out.bubbles {
            b.xi = rotate_xprime(&b.xi, angle);
        }
        out
    }
}

pub fn rotate_xprime(x: &[f64], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    let mut y = x.to_vec();
    y[0] = c * x[0] - s * x[1];
    y[1] = s * x[0] + c * x[1];
    y
}

/// Sector of the k-gon containing a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sector {
    /// 1-based index, matching the center labels x^1..x^k.
    pub index: usize,
    /// True on a sector boundary (including x' = 0).
    pub boundary: bool,
}

impl Sector {
    pub fn half_angle(k: usize) -> f64 {
        PI / k as f64
    }
}

/// Sector Ω_i containing x, ties broken toward the smaller index.
pub fn sector_of(x: &[f64], k: usize) -> Sector {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if rho == 0.0 || k == 0 {
        return Sector {
            index: 1,
            boundary: true,
        };
    }
    let step = 2.0 * PI / k as f64;
    let cos_all: Vec<f64> = (0..k)
        .map(|i| {
            let a = step * i as f64;
            (x[0] * a.cos() + x[1] * a.sin()) / rho
        })
        .collect();
    let best = cos_all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12;
    let ties: Vec<usize> = (0..k).filter(|&i| cos_all[i] >= best - tol).collect();
    Sector {
        index: ties[0] + 1,
        boundary: ties.len() > 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Invariant under rotation by 2π/k and even in x_2..x_N.
    H,
    /// Negates under rotation by π/k and even in x_2..x_N.
    HPrime,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// Largest |u(g·x) - χ(g)u(x)| divided by the largest |u| seen.
    pub max_deviation: f64,
    pub scale: f64,
    pub checked: usize,
    pub pass: bool,
}

/// Probe a function against the group generating H (or H′) on the given samples.
pub fn symmetry_check<F>(
    u: F,
    class: SymmetryClass,
    k: usize,
    samples: &[Vec<f64>],
    tol: f64,
) -> SymmetryReport
where
    F: Fn(&[f64]) -> f64,
{
    let (order, step, chi) = match class {
        SymmetryClass::H => (k, 2.0 * PI / k as f64, 1.0),
        SymmetryClass::HPrime => (2 * k, PI / k as f64, -1.0),
    };
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for x in samples {
        let ux = u(x);
        scale = scale.max(ux.abs());
        let mut ch = 1.0;
        for j in 1..order {
            ch *= chi;
            let y = rotate_xprime(x, step * j as f64);
            worst = worst.max((u(&y) - ch * ux).abs());
            checked += 1;
        }
        for j in 1..x.len() {
            let mut y = x.clone();
            y[j] = -y[j];
            worst = worst.max((u(&y) - ux).abs());
            checked += 1;
        }
        if x.len() >= 4 {
            // rotation inside x'' (a symmetry of every profile built from x'-plane centers)
            let (s, c) = 0.7f64.sin_cos();
            let mut y = x.clone();
            y[2] = c * x[2] - s * x[3];
            y[3] = s * x[2] + c * x[3];
            worst = worst.max((u(&y) - ux).abs());
            checked += 1;
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { worst };
    SymmetryReport {
        max_deviation: rel,
        scale,
        checked,
        pass: rel <= tol,
    }
}

/// Chord length |x^i - x^1| on a regular `count`-gon of radius r (i is 1-based).
pub fn chord(count: usize, r: f64, i: usize) -> f64 {
    2.0 * r * ((i - 1) as f64 * PI / count as f64).sin()
}

/// Exact lattice sum Σ_{i≥2} (±1)/|x^i - x^1|^eta.
///
/// Non-alternating: the k-gon with all weights +1. Alternating: the 2k-gon with
/// weight (-1)^j on vertex j, the combination entering the sign-changing energy.
pub fn interaction_sum(k: usize, r: f64, eta: f64, alternating: bool) -> Result<f64> {
    if k < 2 {
        return Err(Error::Invalid(format!(
            "interaction_sum needs k >= 2, got {k}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Invalid(format!(
            "interaction_sum needs r > 0, got {r}"
        )));
    }
    let mut acc = KahanSum::default();
    if alternating {
        let count = 2 * k;
        for j in 2..=count {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * chord(count, r, j).powf(-eta));
        }
    } else {
        for i in 2..=k {
            acc.add(chord(k, r, i).powf(-eta));
        }
    }
    Ok(acc.value())
}

/// Leading coefficient c with interaction_sum ≈ c k^eta / r^eta.
pub fn asymptote_coefficient(eta: f64, alternating: bool) -> Result<f64> {
    if !(eta > 1.0) {
        return Err(Error::Domain {
            func: "interaction_asymptote",
            arg: eta,
            reason: "requires eta > 1",
        });
    }
    if alternating {
        Ok(2.0 * dirichlet_eta(eta)? / PI.powf(eta))
    } else {
        Ok(2.0 * zeta_fn(eta)? / (2.0 * PI).powf(eta))
    }
}

pub fn interaction_asymptote(k: usize, r: f64, eta: f64, alternating: bool) -> Result<f64> {
    Ok(asymptote_coefficient(eta, alternating)? * (k as f64 / r).powf(eta))
}

/// Both sides of the 2k-gon folding identity used for the sign-changing sum:
/// Σ_{j=2}^{2k} w_j d_j^{-η} = 2 Σ_{j=2}^{k} w_j d_j^{-η} + w_{k+1} (2r)^{-η},
/// with w_j = (-1)^j (alternating) or 1.
pub fn parity_identity(k: usize, r: f64, eta: f64, alternating: bool) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::Invalid(format!(
            "parity identity needs k >= 2, got {k}"
        )));
    }
    let count = 2 * k;
    let w = |j: usize| {
        if alternating && j % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    };
    let mut lhs = KahanSum::default();
    for j in 2..=count {
        lhs.add(w(j) * chord(count, r, j).powf(-eta));
    }
    let mut half = KahanSum::default();
    for j in 2..=k {
        half.add(w(j) * chord(count, r, j).powf(-eta));
    }
    let rhs = 2.0 * half.value() + w(k + 1) * (2.0 * r).powf(-eta);
    Ok((lhs.value(), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_chord_and_two_gon() {
        let p = ProblemParams::default();
        let a = build_ansatz(&p, 4, 1.0, 0.1, Mode::Positive).unwrap();
        let d = a.bubbles[0].dist2(&a.bubbles[1].xi).sqrt();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        let sc = build_ansatz(&p, 2, 1.0, 0.1, Mode::SignChanging).unwrap();
        assert_eq!(sc.len(), 4);
        let signs: Vec<f64> = sc.bubbles.iter().map(|b| b.sign).collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0, -1.0]);
        assert!((sc.bubbles[1].xi[1] - 1.0).abs() < 1e-15);
        assert!(build_ansatz(&p, 1, 1.0, 0.1, Mode::Positive).is_err());
    }

    #[test]
    fn value_at_origin_is_k_times_one_bubble() {
        let p = ProblemParams::default();
        let kern = p.kernel();
        let a = build_ansatz(&p, 7, 3.0, 0.5, Mode::Positive).unwrap();
        let one = kern.eval(&a.bubbles[0], &[0.0; 5]);
        assert!((a.eval(&kern, &[0.0; 5]) / (7.0 * one) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sectors() {
        let k = 6;
        assert_eq!(sector_of(&[2.0, 0.0, 0.0], k).index, 1);
        let a = 2.0 * PI / k as f64;
        let s = sector_of(&[a.cos(), a.sin(), 0.0], k);
        assert_eq!(s.index, 2);
        let h = PI / k as f64;
        let t = sector_of(&[h.cos(), h.sin(), 0.0], k);
        assert_eq!(t.index, 1);
        assert!(t.boundary);
        let o = sector_of(&[0.0, 0.0, 1.0], k);
        assert!(o.boundary && o.index == 1);
    }

    #[test]
    fn antipodal_pair_sum() {
        let v = interaction_sum(2, 1.0, 2.0, false).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let c = asymptote_coefficient(2.0, false).unwrap();
        assert!((c - 1.0 / 12.0).abs() < 1e-14);
        assert!(asymptote_coefficient(1.0, false).is_err());
    }
}
