use crate::params::{Mode, ProblemParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// Local maximum at r0: K = 1 - c0|r-r0|^m near r0.
    KMax,
    /// Local minimum at r0: K = 1 + c0|r-r0|^m near r0.
    KMin,
    /// K ≡ 1.
    Unit,
}

/// Radial potential with the prescribed local law on (r0-δ, r0+δ), tapered
/// smoothly to 1 over (r0±δ, r0±2δ) and clipped below at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub kind: PotentialKind,
    pub c0: f64,
    pub m: f64,
    pub r0: f64,
    pub delta: f64,
    /// Exponent θ of the remainder term.
    pub theta: f64,
    /// Coefficient of |r-r0|^{m+θ}; zero gives the pure power law.
    pub theta_coeff: f64,
    pub taper: f64,
    pub floor: f64,
}

/// C^∞ step: 1 for t ≤ 0, 0 for t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / (1.0 - t)).exp();
    let b = (-1.0 / t).exp();
    a / (a + b)
}

impl PotentialModel {
    pub fn new(p: &ProblemParams, kind: PotentialKind) -> Self {
        PotentialModel {
            kind,
            c0: p.c0,
            m: p.m,
            r0: p.r0,
            delta: p.delta,
            theta: p.theta,
            theta_coeff: 0.0,
            taper: p.delta,
            floor: 0.5,
        }
    }

    /// K_max for positive solutions, K_min for the sign-changing ones.
    pub fn for_mode(p: &ProblemParams) -> Self {
        let kind = match p.mode {
            Mode::Positive => PotentialKind::KMax,
            Mode::SignChanging => PotentialKind::KMin,
        };
        Self::new(p, kind)
    }

    pub fn unit(p: &ProblemParams) -> Self {
        Self::new(p, PotentialKind::Unit)
    }

    pub fn with_remainder(mut self, coeff: f64) -> Self {
        self.theta_coeff = coeff;
        self
    }

    fn sign(&self) -> f64 {
        match self.kind {
            PotentialKind::KMax => 1.0,
            PotentialKind::KMin => -1.0,
            PotentialKind::Unit => 0.0,
        }
    }

    /// Unsigned local law c0 h^m + c_θ h^{m+θ}, tapered.
    fn law(&self, r: f64) -> f64 {
        let h = (r - self.r0).abs();
        let t = smooth_step((h - self.delta) / self.taper);
        if t == 0.0 {
            return 0.0;
        }
        let mut v = self.c0 * h.powf(self.m);
        if self.theta_coeff != 0.0 {
            v += self.theta_coeff * h.powf(self.m + self.theta);
        }
        v * t
    }

    /// 1 - K(r) before clipping, computed without forming K.
    pub fn deficit(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Unit => 0.0,
            _ => self.sign() * self.law(r),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (1.0 - self.deficit(r)).max(self.floor)
    }

    /// K(r) − 1 without cancellation.
    pub fn offset(&self, r: f64) -> f64 {
        let d = self.deficit(r);
        if 1.0 - d < self.floor {
            self.floor - 1.0
        } else {
            -d
        }
    }

    /// K(|x|/ν).
    pub fn scaled(&self, x: &[f64], nu: f64) -> f64 {
        self.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt() / nu)
    }
}

pub fn k_eval(model: &PotentialModel, r: f64) -> f64 {
    model.eval(r)
}

pub fn k_scaled(model: &PotentialModel, x: &[f64], nu: f64) -> f64 {
    model.scaled(x, nu)
}

pub fn nu_of_k(p: &ProblemParams, k: usize) -> f64 {
    p.nu_of_k(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_law_and_taper() {
        let p = ProblemParams::default();
        let km = PotentialModel::new(&p, PotentialKind::KMax);
        assert_eq!(km.eval(1.0), 1.0);
        let h = p.delta / 2.0;
        assert!((km.eval(1.0 + h) - (1.0 - h.powf(2.5))).abs() < 1e-15);
        assert_eq!(km.eval(1.0 + h), km.eval(1.0 - h));
        assert_eq!(km.eval(1.0 + 2.0 * p.delta + 1e-9), 1.0);
        assert_eq!(km.eval(0.0), 1.0);
        let kn = PotentialModel::new(&p, PotentialKind::KMin);
        assert!((kn.eval(1.0 + h) - (1.0 + h.powf(2.5))).abs() < 1e-15);
        for i in 0..=50 {
            let r = 1.0 + p.delta * (1.0 + i as f64 / 50.0);
            let k = km.eval(r);
            assert!(k >= km.floor && k <= 1.0);
        }
    }
}
