//! Importance-sampled Monte Carlo over R^N.
//!
//! The proposal is an equal-weight mixture of multivariate Cauchy densities,
//! one per declared feature, whose |x|^{-(N+1)} tails dominate every integrand
//! with decay hint σ ≥ 1. Samples are drawn in fixed-size chunks, each from its
//! own ChaCha stream, so results do not depend on the thread count.

use super::{Integrand, QuadResult, QuadratureSpec};
use crate::error::{Error, Result};
use crate::special::gamma_unchecked;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

const CHUNK: usize = 4096;

struct Mixture {
    centers: Vec<Vec<f64>>,
    scales: Vec<f64>,
    norm: f64,
    n: usize,
}

impl Mixture {
    fn density(&self, y: &[f64]) -> f64 {
        let nf = self.n as f64;
        let mut acc = 0.0;
        for (c, h) in self.centers.iter().zip(&self.scales) {
            let d2: f64 = c.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += self.norm * h.powf(-nf) * (1.0 + d2 / (h * h)).powf(-(nf + 1.0) / 2.0);
        }
        acc / self.centers.len() as f64
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let j = rng.random_range(0..self.centers.len());
        let g: f64 = rng.sample::<f64, _>(StandardNormal).abs().max(1e-300);
        let h = self.scales[j];
        self.centers[j]
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                c + h * z / g
            })
            .collect()
    }
}

pub fn integrate_mc(f: &Integrand, spec: &QuadratureSpec) -> Result<QuadResult> {
    let n = f.n;
    let nf = n as f64;
    let feats = f.reduced_features();
    let mix = Mixture {
        centers: feats.iter().map(|ft| ft.center.clone()).collect(),
        scales: feats.iter().map(|ft| ft.scale).collect(),
        norm: gamma_unchecked((nf + 1.0) / 2.0) / PI.powf((nf + 1.0) / 2.0),
        n,
    };
    let total = spec.max_evals;
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Result<(f64, f64, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.mc_seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(total - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let y = mix.sample(&mut rng);
                let v = (f.f)(&y);
                if v.is_nan() {
                    return Err(Error::NanIntegrand(y));
                }
                let w = v / mix.density(&y);
                s += w;
                s2 += w * w;
            }
            Ok((s, s2, count))
        })
        .collect();
    let mut s = 0.0;
    let mut s2 = 0.0;
    let mut cnt = 0usize;
    for p in parts {
        let (a, b, c) = p?;
        s += a;
        s2 += b;
        cnt += c;
    }
    let m = cnt as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok(QuadResult {
        value: mean,
        error: (var / m).sqrt(),
        evals: cnt,
        regions: chunks,
        budget_exhausted: false,
    })
}
