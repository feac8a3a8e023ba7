//! Weighted sup-norms ‖·‖_* and ‖·‖_** evaluated on deterministic point clouds.

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Flavor {
    /// Weight exponent (N-2s)/2 + τ.
    Star,
    /// Weight exponent (N+2s)/2 + τ.
    Dstar,
}

#[derive(Debug, Clone)]
pub struct NormSpec {
    pub centers: Vec<Vec<f64>>,
    pub tau: f64,
    pub flavor: Flavor,
    pub exponent: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub argmax: Vec<f64>,
}

/// Layout of the sample cloud.
#[derive(Debug, Clone)]
pub struct CloudSpec {
    /// Shell radii in units of the bubble width.
    pub shells: Vec<f64>,
    /// Direction lattice half-size: directions are {-l..l}^3 \ 0, normalized.
    pub lattice: i32,
    /// Only shells around the first center (enough for functions whose modulus is
    /// invariant under the polygon rotations).
    pub first_center_only: bool,
}

impl CloudSpec {
    pub fn standard() -> Self {
        CloudSpec {
            shells: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            lattice: 1,
            first_center_only: false,
        }
    }

    /// One refinement: geometric midpoints between shells and the 5^3 lattice.
    pub fn refined(&self) -> Self {
        let mut shells = self.shells.clone();
        for w in self.shells.windows(2) {
            let mid = if w[0] == 0.0 {
                0.5 * w[1]
            } else {
                (w[0] * w[1]).sqrt()
            };
            shells.push(mid);
        }
        shells.sort_by(|a, b| a.total_cmp(b));
        shells.dedup();
        CloudSpec {
            shells,
            lattice: self.lattice * 2,
            first_center_only: self.first_center_only,
        }
    }

    pub fn symmetric(mut self) -> Self {
        self.first_center_only = true;
        self
    }
}

fn directions(l: i32) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::new();
    for a in -l..=l {
        for b in -l..=l {
            for c in -l..=l {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let n = ((a * a + b * b + c * c) as f64).sqrt();
                let d = [a as f64 / n, b as f64 / n, c as f64 / n];
                if !out.iter().any(|e| {
                    (e[0] - d[0]).abs() + (e[1] - d[1]).abs() + (e[2] - d[2]).abs() < 1e-12
                }) {
                    out.push(d);
                }
            }
        }
    }
    out
}

/// Sample cloud for centers on a circle (or a single center at the origin).
///
/// Directions live in the (radial, tangential, x_3) frame of each center. Mid-sector
/// probes sit between neighbouring centers, far-field probes on rays out to
/// eight times the configuration radius.
pub fn build_cloud(n: usize, centers: &[Vec<f64>], width: f64, cloud: &CloudSpec) -> Vec<Vec<f64>> {
    let dirs = directions(cloud.lattice);
    let mut pts = Vec::new();
    let used: &[Vec<f64>] = if cloud.first_center_only && !centers.is_empty() {
        &centers[..1]
    } else {
        centers
    };
    for c in used {
        let rho = (c[0] * c[0] + c[1] * c[1]).sqrt();
        let (er, et) = if rho > 0.0 {
            ([c[0] / rho, c[1] / rho], [-c[1] / rho, c[0] / rho])
        } else {
            ([1.0, 0.0], [0.0, 1.0])
        };
        for &sh in &cloud.shells {
            let r = sh * width;
            if r == 0.0 {
                pts.push(c.clone());
                continue;
            }
            for d in &dirs {
                let mut x = c.clone();
                x[0] += r * (d[0] * er[0] + d[1] * et[0]);
                x[1] += r * (d[0] * er[1] + d[1] * et[1]);
                if n > 2 {
                    x[2] += r * d[2];
                }
                pts.push(x);
            }
        }
    }
    let radius = centers
        .iter()
        .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
        .fold(0.0, f64::max);
    let count = centers.len().max(1);
    let base_angle = if radius > 0.0 {
        centers[0][1].atan2(centers[0][0])
    } else {
        0.0
    };
    let half = PI / count as f64;
    let outer = radius + 32.0 * width;
    if radius > 0.0 {
        // mid-sector probes between the first two centers (and symmetric ones)
        let n_mid = if cloud.first_center_only { 1 } else { count };
        for i in 0..n_mid {
            let a = base_angle + half * (2 * i + 1) as f64;
            for f in [0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0] {
                let mut x = vec![0.0; n];
                x[0] = radius * f * a.cos();
                x[1] = radius * f * a.sin();
                pts.push(x);
            }
        }
        let mut o = vec![0.0; n];
        o[0] = 0.0;
        pts.push(o);
    }
    // far-field rays
    let lattice_rays: Vec<[f64; 3]> = directions(1);
    for f in [2.0, 4.0, 8.0] {
        for d in &lattice_rays {
            let a = base_angle;
            let mut x = vec![0.0; n];
            x[0] = outer * f * (d[0] * a.cos() - d[1] * a.sin());
            x[1] = outer * f * (d[0] * a.sin() + d[1] * a.cos());
            if n > 2 {
                x[2] = outer * f * d[2];
            }
            pts.push(x);
        }
    }
    pts
}

impl NormSpec {
    pub fn new(
        p: &ProblemParams,
        centers: Vec<Vec<f64>>,
        flavor: Flavor,
        points: Vec<Vec<f64>>,
    ) -> Self {
        let n = p.n as f64;
        let base = match flavor {
            Flavor::Star => (n - 2.0 * p.s) / 2.0,
            Flavor::Dstar => (n + 2.0 * p.s) / 2.0,
        };
        let tau = p.tau();
        NormSpec {
            centers,
            tau,
            flavor,
            exponent: base + tau,
            points,
        }
    }

    /// Spec with the standard cloud around `centers` of width `width`.
    pub fn standard(p: &ProblemParams, centers: Vec<Vec<f64>>, width: f64, flavor: Flavor) -> Self {
        let pts = build_cloud(p.n, &centers, width, &CloudSpec::standard());
        NormSpec::new(p, centers, flavor, pts)
    }

    pub fn with_cloud(
        p: &ProblemParams,
        centers: Vec<Vec<f64>>,
        width: f64,
        flavor: Flavor,
        cloud: &CloudSpec,
    ) -> Self {
        let pts = build_cloud(p.n, &centers, width, cloud);
        NormSpec::new(p, centers, flavor, pts)
    }

    /// Σ_i (1+|x-x^i|)^{-exponent}
    pub fn weight(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .map(|c| {
                let d = c
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (1.0 + d).powf(-self.exponent)
            })
            .sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.par_iter().map(|x| self.weight(x)).collect()
    }

    pub fn with_flavor(&self, p: &ProblemParams, flavor: Flavor) -> NormSpec {
        NormSpec::new(p, self.centers.clone(), flavor, self.points.clone())
    }

    /// Discrete norm from values already sampled on `self.points`.
    pub fn norm_of_values(&self, values: &[f64], weights: &[f64]) -> Result<NormValue> {
        if self.points.is_empty() {
            return Err(Error::Invalid("empty sample set".into()));
        }
        let mut best = 0.0;
        let mut arg = 0;
        for (i, (v, w)) in values.iter().zip(weights).enumerate() {
            let r = v.abs() / w;
            if r > best {
                best = r;
                arg = i;
            }
        }
        Ok(NormValue {
            value: best,
            argmax: self.points[arg].clone(),
        })
    }

    pub fn norm<F>(&self, u: F) -> Result<NormValue>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let vals: Vec<f64> = self.points.par_iter().map(|x| u(x)).collect();
        let w = self.weights();
        self.norm_of_values(&vals, &w)
    }
}

/// ‖u‖_* on the spec's cloud (the spec must carry the star exponent).
pub fn star_norm<F>(u: F, spec: &NormSpec) -> Result<NormValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    debug_assert_eq!(spec.flavor, Flavor::Star);
    spec.norm(u)
}

/// ‖f‖_** on the spec's cloud (the spec must carry the dstar exponent).
pub fn dstar_norm<F>(f: F, spec: &NormSpec) -> Result<NormValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    debug_assert_eq!(spec.flavor, Flavor::Dstar);
    spec.norm(f)
}
