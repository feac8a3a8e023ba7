//! Globally adaptive cubature on unions of boxes.
//!
//! Dimension 1 uses the 7/15-point Gauss–Kronrod pair, dimensions 2 and up the
//! Genz–Malik degree 7/5 embedded rule with fourth-difference axis selection.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub type Func<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Debug, Clone)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Cell { lo, hi }
    }

    fn split(&self, axis: usize) -> (Cell, Cell) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut a = self.clone();
        let mut b = self.clone();
        a.hi[axis] = mid;
        b.lo[axis] = mid;
        (a, b)
    }
}

/// Tensor-product cells from per-axis breakpoint lists.
pub fn tensor_cells(breaks: &[Vec<f64>]) -> Vec<Cell> {
    let mut cells = vec![Cell::new(vec![], vec![])];
    for axis in breaks {
        let mut next = Vec::with_capacity(cells.len() * axis.len());
        for c in &cells {
            for w in axis.windows(2) {
                if w[1] > w[0] {
                    let mut lo = c.lo.clone();
                    let mut hi = c.hi.clone();
                    lo.push(w[0]);
                    hi.push(w[1]);
                    next.push(Cell::new(lo, hi));
                }
            }
        }
        cells = next;
    }
    cells
}

#[derive(Debug, Clone)]
struct Estimate {
    value: f64,
    error: f64,
    axis: usize,
    evals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn check(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_nan() {
        Err(Error::NanIntegrand(x.to_vec()))
    } else {
        Ok(v)
    }
}

fn gk15(f: &Func, c: &Cell) -> Result<Estimate> {
    let a = c.lo[0];
    let b = c.hi[0];
    let mid = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = check(f(&[mid]), &[mid])?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x1 = mid - h * XGK[j];
        let x2 = mid + h * XGK[j];
        let s = check(f(&[x1]), &[x1])? + check(f(&[x2]), &[x2])?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok(Estimate {
        value: k * h,
        error: ((k - g) * h).abs(),
        axis: 0,
        evals: 15,
    })
}

fn genz_malik(f: &Func, c: &Cell) -> Result<Estimate> {
    let n = c.lo.len();
    let nf = n as f64;
    let l2 = (9.0f64 / 70.0).sqrt();
    let l3 = (9.0f64 / 10.0).sqrt();
    let l4 = l3;
    let l5 = (9.0f64 / 19.0).sqrt();
    let w1 = (12824.0 - 9120.0 * nf + 400.0 * nf * nf) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * nf) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / 2f64.powi(n as i32);
    let v1 = (729.0 - 950.0 * nf + 50.0 * nf * nf) / 729.0;
    let v2 = 245.0 / 486.0;
    let v3 = (265.0 - 100.0 * nf) / 1458.0;
    let v4 = 25.0 / 729.0;

    let center: Vec<f64> = (0..n).map(|i| 0.5 * (c.lo[i] + c.hi[i])).collect();
    let half: Vec<f64> = (0..n).map(|i| 0.5 * (c.hi[i] - c.lo[i])).collect();
    let vol: f64 = half.iter().map(|h| 2.0 * h).product();
    let mut x = center.clone();
    let mut evals = 0;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evals += 1;
        check(f(x), x)
    };
    let f0 = eval(&x)?;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let mut best_axis = 0;
    let mut best_diff = -1.0;
    for i in 0..n {
        x[i] = center[i] + l2 * half[i];
        let a = eval(&x)?;
        x[i] = center[i] - l2 * half[i];
        let b = eval(&x)?;
        x[i] = center[i] + l3 * half[i];
        let cc = eval(&x)?;
        x[i] = center[i] - l3 * half[i];
        let d = eval(&x)?;
        x[i] = center[i];
        s2 += a + b;
        s3 += cc + d;
        let diff = (a + b - 2.0 * f0 - (l2 / l3).powi(2) * (cc + d - 2.0 * f0)).abs();
        if diff > best_diff * (1.0 + 1e-12) {
            best_diff = diff;
            best_axis = i;
        }
    }
    let mut s4 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                x[i] = center[i] + si * l4 * half[i];
                x[j] = center[j] + sj * l4 * half[j];
                s4 += eval(&x)?;
            }
            x[i] = center[i];
            x[j] = center[j];
        }
    }
    let mut s5 = 0.0;
    for mask in 0..(1usize << n) {
        for i in 0..n {
            let sg = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            x[i] = center[i] + sg * l5 * half[i];
        }
        s5 += eval(&x)?;
    }
    let i7 = vol * (w1 * f0 + w2 * s2 + w3 * s3 + w4 * s4 + w5 * s5);
    let i5 = vol * (v1 * f0 + v2 * s2 + v3 * s3 + v4 * s4);
    Ok(Estimate {
        value: i7,
        error: (i7 - i5).abs(),
        axis: best_axis,
        evals,
    })
}

fn rule(f: &Func, c: &Cell) -> Result<Estimate> {
    if c.lo.len() == 1 {
        gk15(f, c)
    } else {
        genz_malik(f, c)
    }
}

struct Region {
    cell: Cell,
    est: Estimate,
    id: u64,
}

impl PartialEq for Region {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Region {}
impl PartialOrd for Region {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Region {
    fn cmp(&self, o: &Self) -> Ordering {
        self.est
            .error
            .total_cmp(&o.est.error)
            .then_with(|| o.id.cmp(&self.id))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub regions: usize,
    pub exhausted: bool,
}

/// Sum of per-region values in id order, so totals do not depend on scheduling.
fn ordered_total(regions: &[&Region]) -> (f64, f64) {
    let mut v: Vec<(u64, f64, f64)> = regions
        .iter()
        .map(|r| (r.id, r.est.value, r.est.error))
        .collect();
    v.sort_by_key(|t| t.0);
    let mut val = crate::special::KahanSum::default();
    let mut err = 0.0;
    for (_, a, e) in v {
        val.add(a);
        err += e;
    }
    (val.value(), err)
}

/// Adaptive integration of `f` over the union of `cells`.
///
/// `budget` bounds the number of integrand evaluations; on exhaustion the best
/// estimate is returned with `exhausted = true`.
pub fn adaptive(
    f: &Func,
    cells: Vec<Cell>,
    tol: Tolerance,
    budget: usize,
) -> Result<AdaptiveOutcome> {
    if cells.is_empty() {
        return Ok(AdaptiveOutcome {
            value: 0.0,
            error: 0.0,
            evals: 0,
            regions: 0,
            exhausted: false,
        });
    }
    let first: Vec<Result<Estimate>> = cells.par_iter().map(|c| rule(f, c)).collect();
    let mut heap = BinaryHeap::with_capacity(cells.len() * 2);
    let mut next_id = 0u64;
    let mut evals = 0;
    for (cell, est) in cells.into_iter().zip(first) {
        let est = est?;
        evals += est.evals;
        heap.push(Region {
            cell,
            est,
            id: next_id,
        });
        next_id += 1;
    }
    let mut total = 0.0;
    let mut err = 0.0;
    for r in heap.iter() {
        total += r.est.value;
        err += r.est.error;
    }
    let batch = 32;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target {
            break;
        }
        if evals >= budget {
            let all: Vec<&Region> = heap.iter().collect();
            let (v, e) = ordered_total(&all);
            return Ok(AdaptiveOutcome {
                value: v,
                error: e,
                evals,
                regions: heap.len(),
                exhausted: true,
            });
        }
        let mut popped = Vec::with_capacity(batch);
        while popped.len() < batch {
            match heap.pop() {
                Some(r) => {
                    // stop pulling once the remaining regions are negligible
                    let small = r.est.error < 1e-3 * err / batch as f64 && !popped.is_empty();
                    popped.push(r);
                    if small {
                        break;
                    }
                }
                None => break,
            }
        }
        let children: Vec<Result<[(Cell, Estimate); 2]>> = popped
            .par_iter()
            .map(|r| {
                let (a, b) = r.cell.split(r.est.axis);
                let ea = rule(f, &a)?;
                let eb = rule(f, &b)?;
                Ok([(a, ea), (b, eb)])
            })
            .collect();
        for (parent, kids) in popped.into_iter().zip(children) {
            let kids = kids?;
            total -= parent.est.value;
            err -= parent.est.error;
            for (cell, est) in kids {
                evals += est.evals;
                total += est.value;
                err += est.error;
                heap.push(Region {
                    cell,
                    est,
                    id: next_id,
                });
                next_id += 1;
            }
        }
        // guard drift of the running sums
        if next_id % 4096 < 64 {
            let all: Vec<&Region> = heap.iter().collect();
            let (v, e) = ordered_total(&all);
            total = v;
            err = e;
        }
    }
    let all: Vec<&Region> = heap.iter().collect();
    let (v, e) = ordered_total(&all);
    Ok(AdaptiveOutcome {
        value: v,
        error: e,
        evals,
        regions: heap.len(),
        exhausted: false,
    })
}

/// Fixed tensor Gauss–Legendre nodes and weights on [a, b] split at breakpoints.
pub fn gauss_legendre_panels(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(m + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genz_malik_exact_for_degree_seven() {
        let f = |x: &[f64]| x[0].powi(6) * x[1] + x[1].powi(4) * x[2].powi(2) + 1.0;
        let c = Cell::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0]);
        let e = genz_malik(&f, &c).unwrap();
        let exact = 2.0 / 7.0 + 32.0 / 5.0 / 3.0 + 2.0;
        assert!((e.value - exact).abs() < 1e-13);
    }

    #[test]
    fn adaptive_smooth_1d_and_2d() {
        let f = |x: &[f64]| (-x[0] * x[0]).exp();
        let cells = vec![Cell::new(vec![-6.0], vec![6.0])];
        let o = adaptive(
            &f,
            cells,
            Tolerance {
                rel: 1e-12,
                abs: 0.0,
            },
            100_000,
        )
        .unwrap();
        assert!((o.value - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        let g = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let cells = tensor_cells(&[vec![-7.0, 0.0, 7.0], vec![-7.0, 7.0]]);
        let o = adaptive(
            &g,
            cells,
            Tolerance {
                rel: 1e-9,
                abs: 0.0,
            },
            1_000_000,
        )
        .unwrap();
        assert!((o.value - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn nan_is_hard_error() {
        let f = |_: &[f64]| f64::NAN;
        let cells = vec![Cell::new(vec![0.0, 0.0], vec![1.0, 1.0])];
        assert!(adaptive(
            &f,
            cells,
            Tolerance {
                rel: 1e-6,
                abs: 0.0
            },
            1000
        )
        .is_err());
    }

    #[test]
    fn gauss_legendre_weights() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(18) * b).sum();
        assert!((i - 2.0 / 19.0).abs() < 1e-14);
    }
}
