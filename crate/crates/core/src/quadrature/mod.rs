//! Integrals over R^N with symmetry reductions, truncation from a declared
//! decay rate, Riesz potentials and a Monte Carlo fallback.

pub mod cubature;
mod decay;
mod mc;
mod riesz;

pub use decay::{convolution_decay_check, convolution_profile, fit_slope, DecayFit};
pub use mc::integrate_mc;
pub use riesz::{riesz_apply, RieszSource};

use crate::error::{Error, Result};
use crate::special::sphere_area;
use cubature::{adaptive, tensor_cells, Cell, Tolerance};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Axial3d,
    FullMc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    pub reduction: Reduction,
    pub mc_seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-300,
            max_evals: 20_000_000,
            reduction: Reduction::Axial3d,
            mc_seed: 12345,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel: f64) -> Self {
        self.rel_tol = rel;
        self
    }

    pub fn with_abs_tol(mut self, abs: f64) -> Self {
        self.abs_tol = abs;
        self
    }

    pub fn monte_carlo(mut self, samples: usize, seed: u64) -> Self {
        self.reduction = Reduction::FullMc;
        self.max_evals = samples;
        self.mc_seed = seed;
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.rel_tol > 1e-12 && self.rel_tol < 1e-1) {
            e.push(format!(
                "rel_tol = {} must lie in (1e-12, 1e-1)",
                self.rel_tol
            ));
        }
        if self.max_evals == 0 {
            e.push("max_evals must be positive".into());
        }
        if !(self.abs_tol >= 0.0) {
            e.push(format!("abs_tol = {} must be nonnegative", self.abs_tol));
        }
        e
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.violations();
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(e.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error (domain part plus truncated tail).
    pub error: f64,
    pub evals: usize,
    pub regions: usize,
    pub budget_exhausted: bool,
}

/// Invariance of an integrand, used to pick a reduced parametrization.
#[derive(Debug, Clone, PartialEq)]
pub enum Symmetry {
    /// Depends only on |x - center|.
    Radial { center: Vec<f64> },
    /// Invariant under rotations fixing the line origin + t·dir (dir a unit vector).
    Axis { origin: Vec<f64>, dir: Vec<f64> },
    /// Invariant under rotations of x'' = (x_3, ..., x_N).
    Axial,
    /// No usable symmetry.
    General,
}

/// A point where the integrand concentrates, with its length scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub center: Vec<f64>,
    pub scale: f64,
}

/// Restriction of an x''-invariant integrand to a wedge 0 ≤ φ ≤ angle of the
/// x'-plane, multiplied by `copies` (for integrands invariant under a dihedral group).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wedge {
    pub angle: f64,
    pub copies: f64,
}

pub struct Integrand<'a> {
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub n: usize,
    /// σ > 0 with |f(x)| ≲ C |x|^{-(N+σ)} for large |x|.
    pub decay: f64,
    pub symmetry: Symmetry,
    pub features: Vec<Feature>,
    pub wedge: Option<Wedge>,
    /// Extra breakpoints in reduced coordinates as (axis, value).
    pub breaks: Vec<(usize, f64)>,
}

impl<'a> Integrand<'a> {
    pub fn new(f: &'a (dyn Fn(&[f64]) -> f64 + Sync), n: usize, decay: f64) -> Self {
        Integrand {
            f,
            n,
            decay,
            symmetry: Symmetry::General,
            features: Vec::new(),
            wedge: None,
            breaks: Vec::new(),
        }
    }

    pub fn symmetry(mut self, s: Symmetry) -> Self {
        self.symmetry = s;
        self
    }

    pub fn feature(mut self, center: Vec<f64>, scale: f64) -> Self {
        self.features.push(Feature { center, scale });
        self
    }

    pub fn wedge(mut self, angle: f64, copies: f64) -> Self {
        self.wedge = Some(Wedge { angle, copies });
        self
    }

    pub fn breakpoint(mut self, axis: usize, value: f64) -> Self {
        self.breaks.push((axis, value));
        self
    }

    fn reduced_features(&self) -> Vec<Feature> {
        if self.features.is_empty() {
            vec![Feature {
                center: vec![0.0; self.n],
                scale: 1.0,
            }]
        } else {
            self.features.clone()
        }
    }
}

/// Integrate over R^N.
pub fn integrate(f: &Integrand, spec: &QuadratureSpec) -> Result<QuadResult> {
    spec.validate()?;
    if !(f.decay > 0.0) {
        return Err(Error::Invalid(format!(
            "integrand decay hint must be positive, got {}",
            f.decay
        )));
    }
    if spec.reduction == Reduction::FullMc {
        return integrate_mc(f, spec);
    }
    match &f.symmetry {
        Symmetry::Radial { center } => integrate_radial(f, center, spec),
        Symmetry::Axis { origin, dir } => integrate_axis(f, origin, dir, spec),
        Symmetry::Axial => integrate_axial(f, spec),
        Symmetry::General => Err(Error::Invalid(
            "integrand without rotational symmetry: use the full_mc reduction".into(),
        )),
    }
}

/// Geometric scale ladder h·2^j (j ≥ -2) up to `limit`.
fn ladder(h: f64, limit: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = 0.25 * h;
    while x < limit {
        v.push(x);
        x *= 2.0;
    }
    v
}

fn clean_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.push(lo);
    v.push(hi);
    v.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    v.sort_by(|a, b| a.total_cmp(b));
    let span = hi - lo;
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().is_none_or(|&l| x - l > 1e-9 * span) {
            out.push(x);
        }
    }
    if let Some(l) = out.last_mut() {
        *l = hi;
    }
    out
}

/// Breakpoints on [lo, hi] clustering around `points` with scales.
fn clustered(points: &[(f64, f64)], lo: f64, hi: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for &(c, h) in points {
        v.push(c);
        for d in ladder(h, hi - lo) {
            v.push(c - d);
            v.push(c + d);
        }
    }
    clean_breaks(v, lo, hi)
}

struct Layered {
    value: f64,
    error: f64,
    evals: usize,
    regions: usize,
    exhausted: bool,
}

/// Integrate the inner domain then doubling shells until the analytic tail
/// bound drops below a tenth of the tolerance.
fn layered<G, C, P>(
    g: &G,
    make_cells: C,
    probe: P,
    r0: f64,
    n: usize,
    decay: f64,
    spec: &QuadratureSpec,
) -> Result<Layered>
where
    G: Fn(&[f64]) -> f64 + Sync,
    C: Fn(f64, f64) -> Vec<Cell>,
    P: Fn(f64) -> f64,
{
    let mut total = Layered {
        value: 0.0,
        error: 0.0,
        evals: 0,
        regions: 0,
        exhausted: false,
    };
    let mut inner = 0.0;
    let mut outer = r0;
    let area = sphere_area(n);
    for layer in 0..40 {
        let cells = make_cells(inner, outer);
        let budget = spec.max_evals.saturating_sub(total.evals).max(1);
        // each shell gets the full relative target of the running total
        let tol = Tolerance {
            rel: spec.rel_tol * 0.5,
            abs: (spec.abs_tol * 0.5).max(0.5 * spec.rel_tol * total.value.abs()),
        };
        let out = adaptive(g, cells, tol, budget)?;
        total.value += out.value;
        total.error += out.error;
        total.evals += out.evals;
        total.regions += out.regions;
        total.exhausted |= out.exhausted;
        let c = probe(outer);
        let tail = area * c * outer.powf(-decay) / decay;
        let target = spec.abs_tol.max(spec.rel_tol * total.value.abs());
        if tail <= 0.1 * target || total.exhausted || layer == 39 {
            total.error += tail;
            if tail > 0.1 * target {
                total.exhausted = true;
            }
            break;
        }
        inner = outer;
        outer *= 2.0;
    }
    Ok(total)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn extent(f: &Integrand, origin: &[f64]) -> f64 {
    f.reduced_features()
        .iter()
        .map(|ft| {
            let d: Vec<f64> = ft.center.iter().zip(origin).map(|(a, b)| a - b).collect();
            norm(&d) + 16.0 * ft.scale
        })
        .fold(0.0, f64::max)
}

fn integrate_radial(f: &Integrand, center: &[f64], spec: &QuadratureSpec) -> Result<QuadResult> {
    let n = f.n;
    let area = sphere_area(n);
    let nm1 = (n - 1) as i32;
    let g = |x: &[f64]| {
        let mut y = center.to_vec();
        y[0] += x[0];
        area * x[0].powi(nm1) * (f.f)(&y)
    };
    let feats: Vec<(f64, f64)> = f
        .reduced_features()
        .iter()
        .map(|ft| {
            let d: Vec<f64> = ft.center.iter().zip(center).map(|(a, b)| a - b).collect();
            (norm(&d), ft.scale)
        })
        .collect();
    let extra: Vec<f64> = f.breaks.iter().filter(|b| b.0 == 0).map(|b| b.1).collect();
    let make = |a: f64, b: f64| {
        let mut v = clustered(&feats, a, b);
        v.extend(extra.iter().cloned());
        let v = clean_breaks(v, a, b);
        v.windows(2)
            .map(|w| Cell::new(vec![w[0]], vec![w[1]]))
            .collect()
    };
    let probe = |r: f64| {
        let mut y = center.to_vec();
        y[0] += r;
        (f.f)(&y).abs() * r.powf(n as f64 + f.decay)
    };
    let out = layered(&g, make, probe, extent(f, center), n, f.decay, spec)?;
    Ok(QuadResult {
        value: out.value,
        error: out.error,
        evals: out.evals,
        regions: out.regions,
        budget_exhausted: out.exhausted,
    })
}

/// A unit vector orthogonal to `dir`.
pub fn orthogonal_unit(dir: &[f64]) -> Vec<f64> {
    let n = dir.len();
    let mut best = 0;
    for i in 0..n {
        if dir[i].abs() < dir[best].abs() {
            best = i;
        }
    }
    let mut e = vec![0.0; n];
    e[best] = 1.0;
    let d: f64 = e.iter().zip(dir).map(|(a, b)| a * b).sum();
    let mut v: Vec<f64> = e.iter().zip(dir).map(|(a, b)| a - d * b).collect();
    let l = norm(&v);
    v.iter_mut().for_each(|x| *x /= l);
    v
}

fn integrate_axis(
    f: &Integrand,
    origin: &[f64],
    dir: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let n = f.n;
    let dl = norm(dir);
    let dir: Vec<f64> = dir.iter().map(|x| x / dl).collect();
    let perp = orthogonal_unit(&dir);
    let area = sphere_area(n - 1);
    let nm2 = (n - 2) as i32;
    let point = |z: f64, rho: f64| -> Vec<f64> {
        (0..n)
            .map(|i| origin[i] + z * dir[i] + rho * perp[i])
            .collect()
    };
    let g = |x: &[f64]| area * x[1].powi(nm2) * (f.f)(&point(x[0], x[1]));
    let mut zf = Vec::new();
    let mut rf = Vec::new();
    for ft in f.reduced_features() {
        let d: Vec<f64> = ft.center.iter().zip(origin).map(|(a, b)| a - b).collect();
        let z: f64 = d.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let r = (norm(&d).powi(2) - z * z).max(0.0).sqrt();
        zf.push((z, ft.scale));
        rf.push((r, ft.scale));
    }
    let ez: Vec<f64> = f.breaks.iter().filter(|b| b.0 == 0).map(|b| b.1).collect();
    let er: Vec<f64> = f.breaks.iter().filter(|b| b.0 == 1).map(|b| b.1).collect();
    let make = |a: f64, b: f64| {
        let mut zb = clustered(&zf, -b, b);
        zb.extend(ez.iter().cloned());
        zb.extend([-a, a]);
        let zb = clean_breaks(zb, -b, b);
        let mut rb = clustered(&rf, 0.0, b);
        rb.extend(er.iter().cloned());
        rb.push(a);
        let rb = clean_breaks(rb, 0.0, b);
        tensor_cells(&[zb, rb])
            .into_iter()
            .filter(|c| a == 0.0 || !(c.lo[0] >= -a && c.hi[0] <= a && c.hi[1] <= a))
            .collect()
    };
    let probe = |r: f64| {
        let mut c: f64 = 0.0;
        for k in 0..9 {
            let ang = PI * k as f64 / 8.0;
            let v = (f.f)(&point(r * ang.cos(), r * ang.sin())).abs();
            c = c.max(v);
        }
        c * r.powf(n as f64 + f.decay)
    };
    let out = layered(&g, make, probe, extent(f, origin), n, f.decay, spec)?;
    Ok(QuadResult {
        value: out.value,
        error: out.error,
        evals: out.evals,
        regions: out.regions,
        budget_exhausted: out.exhausted,
    })
}

fn integrate_axial(f: &Integrand, spec: &QuadratureSpec) -> Result<QuadResult> {
    let n = f.n;
    if n < 3 {
        return Err(Error::Invalid("axial reduction needs N >= 3".into()));
    }
    let area = sphere_area(n - 2);
    let nm3 = (n - 3) as i32;
    let (phi_max, copies) = match f.wedge {
        Some(w) => (w.angle, w.copies),
        None => (2.0 * PI, 1.0),
    };
    let g = |x: &[f64]| {
        let (rr, phi, t) = (x[0], x[1], x[2]);
        let mut y = vec![0.0; n];
        y[0] = rr * phi.cos();
        y[1] = rr * phi.sin();
        y[2] = t;
        copies * area * rr * t.powi(nm3) * (f.f)(&y)
    };
    let mut rf = Vec::new();
    let mut pf = Vec::new();
    let mut tf = Vec::new();
    for ft in f.reduced_features() {
        let r = (ft.center[0].powi(2) + ft.center[1].powi(2)).sqrt();
        rf.push((r, ft.scale));
        tf.push((0.0, ft.scale));
        if r > 0.0 {
            let mut a = ft.center[1].atan2(ft.center[0]);
            if a < 0.0 {
                a += 2.0 * PI;
            }
            pf.push((a, (ft.scale / r).min(1.0)));
            // periodic image near the seam
            pf.push((a - 2.0 * PI, (ft.scale / r).min(1.0)));
        }
    }
    let phi_breaks = {
        let mut v = Vec::new();
        for &(c, h) in &pf {
            v.push(c);
            let mut d = 0.25 * h;
            while d < phi_max {
                v.push(c - d);
                v.push(c + d);
                d *= 2.0;
            }
        }
        for (ax, b) in &f.breaks {
            if *ax == 1 {
                v.push(*b);
            }
        }
        let m = (phi_max / (PI / 8.0)).ceil() as usize;
        for i in 0..=m {
            v.push(phi_max * i as f64 / m as f64);
        }
        clean_breaks(v, 0.0, phi_max)
    };
    let er: Vec<f64> = f.breaks.iter().filter(|b| b.0 == 0).map(|b| b.1).collect();
    let et: Vec<f64> = f.breaks.iter().filter(|b| b.0 == 2).map(|b| b.1).collect();
    let make = |a: f64, b: f64| {
        let mut rb = clustered(&rf, 0.0, b);
        rb.extend(er.iter().cloned());
        rb.push(a);
        let rb = clean_breaks(rb, 0.0, b);
        let mut tb = clustered(&tf, 0.0, b);
        tb.extend(et.iter().cloned());
        tb.push(a);
        let tb = clean_breaks(tb, 0.0, b);
        let cells = tensor_cells(&[rb, phi_breaks.clone(), tb]);
        if a == 0.0 {
            cells
        } else {
            cells
                .into_iter()
                .filter(|c| c.lo[0] >= a || c.lo[2] >= a)
                .collect()
        }
    };
    let probe = |r: f64| {
        let mut c: f64 = 0.0;
        for i in 0..=6 {
            let ang = 0.5 * PI * i as f64 / 6.0;
            for j in 0..=8 {
                let phi = phi_max * j as f64 / 8.0;
                let mut y = vec![0.0; n];
                y[0] = r * ang.cos() * phi.cos();
                y[1] = r * ang.cos() * phi.sin();
                y[2] = r * ang.sin();
                c = c.max((f.f)(&y).abs());
            }
        }
        c * r.powf(n as f64 + f.decay)
    };
    let origin = vec![0.0; n];
    let out = layered(&g, make, probe, extent(f, &origin), n, f.decay, spec)?;
    Ok(QuadResult {
        value: out.value,
        error: out.error,
        evals: out.evals,
        regions: out.regions,
        budget_exhausted: out.exhausted,
    })
}

/// Pull an x''-rotation invariant integrand back to (x1, x2, t) with the
/// |S^{N-3}| t^{N-3} weight, so that ∫_{R^N} f = ∫_{R²×R₊} g.
pub fn axial_reduce<'a, F>(f: F, n: usize) -> Result<impl Fn(&[f64]) -> f64 + 'a>
where
    F: Fn(&[f64]) -> f64 + 'a,
{
    if n < 3 {
        return Err(Error::Invalid("axial reduction needs N >= 3".into()));
    }
    let w = sphere_area(n - 2);
    Ok(move |x: &[f64]| {
        let mut y = vec![0.0; n];
        y[0] = x[0];
        y[1] = x[1];
        y[2] = x[2];
        w * x[2].powi(n as i32 - 3) * f(&y)
    })
}

/// |S^{N-3}|, the weight constant of the axial reduction.
pub fn axial_weight(n: usize) -> f64 {
    sphere_area(n - 2)
}
