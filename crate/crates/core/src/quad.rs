//! Scalar numerics shared by the replica engine: Gaussian tail functions,
//! Gauss-Hermite rules, adaptive Gauss-Kronrod integration and bracketing.

use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLaguerre, GaussLegendre};
use libm::erfc;
use roots::{find_root_brent, SimpleConvergency};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gaussian tail `P(Z > x)` for standard normal `Z`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal CDF.
pub fn ndtr(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// A fixed rule `∫ f ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FixedRule {
    /// Gauss-Legendre on `[a, b]`.
    pub fn legendre(order: usize, a: f64, b: f64) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order.max(2)).expect("nonzero"));
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (c + h * x, h * w))
            .unzip();
        Self { nodes, weights }
    }

    /// Gauss-Laguerre for `∫_0^∞ e^{−u} f(u) du`.
    pub fn laguerre(order: usize) -> Self {
        let rule = GaussLaguerre::new(NonZeroUsize::new(order.max(1)).expect("nonzero"), Default::default());
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Self { nodes, weights }
    }
}

/// Gauss-Hermite rule rescaled for expectations over a standard normal:
/// `E f(Z) ≈ Σ w_i f(z_i)` with `Σ w_i = 1`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("nonzero");
        if order.get() == 1 {
            return Self {
                nodes: vec![0.0],
                weights: vec![1.0],
            };
        }
        let rule = GaussHermite::new(order);
        let norm = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (SQRT_2 * x, w / norm))
            .unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
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

fn gk15<const D: usize, F: FnMut(f64) -> [f64; D]>(f: &mut F, a: f64, b: f64) -> ([f64; D], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; D];
    let mut g = [0.0; D];
    for d in 0..D {
        k[d] = WGK[7] * fc[d];
        g[d] = WG[3] * fc[d];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let (fl, fr) = (f(c - dx), f(c + dx));
        for d in 0..D {
            let s = fl[d] + fr[d];
            k[d] += WGK[i] * s;
            if i % 2 == 1 {
                g[d] += WG[i / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..D {
        err = err.max(((k[d] - g[d]) * h).abs());
        k[d] *= h;
    }
    (k, err)
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn with_rel(rel: f64) -> Self {
        Self {
            abs: rel * 1e-2,
            rel,
            ..Self::default()
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
            max_intervals: self.max_intervals * 2,
        }
    }
}

struct Piece<const D: usize> {
    a: f64,
    b: f64,
    val: [f64; D],
    err: f64,
}

impl<const D: usize> PartialEq for Piece<D> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<const D: usize> Eq for Piece<D> {}
impl<const D: usize> PartialOrd for Piece<D> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<const D: usize> Ord for Piece<D> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of a vector-valued
/// function on `[a, b]`. The interval with the largest error estimate (max
/// over components) is bisected until the summed estimate meets the
/// tolerance relative to the largest component. Jumps are handled by
/// refinement.
pub fn integrate_vec<const D: usize, F: FnMut(f64) -> [f64; D]>(mut f: F, a: f64, b: f64, tol: Tolerance) -> [f64; D] {
    if a == b {
        return [0.0; D];
    }
    let (val, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val, err });
    let mut total = val;
    let mut total_err = err;
    let size = |t: &[f64; D]| t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    while total_err > tol.abs.max(tol.rel * size(&total)) && heap.len() < tol.max_intervals {
        let p = heap.pop().expect("nonempty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            total_err -= p.err;
            heap.push(Piece { err: 0.0, ..p });
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        for d in 0..D {
            total[d] += v1[d] + v2[d] - p.val[d];
        }
        total_err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            val: v2,
            err: e2,
        });
    }
    // re-sum to shed rounding from the running updates
    let mut out = [0.0; D];
    for p in heap.iter() {
        for (o, v) in out.iter_mut().zip(p.val) {
            *o += v;
        }
    }
    out
}

/// Scalar form of [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> f64 {
    integrate_vec(|x| [f(x)], a, b, tol)[0]
}

/// Brent root of `f` on a sign-changing bracket `[a, b]`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, eps: f64) -> Result<f64> {
    let fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Bracket(format!("f({a:.6e})={fa:.3e}, f({b:.6e})={fb:.3e}")));
    }
    let mut conv = SimpleConvergency { eps, max_iter: 200 };
    find_root_brent(a, b, &mut f, &mut conv).map_err(|e| Error::Bracket(format!("{e:?}")))
}

/// Root of a monotone function on `(lo, ∞)` by geometric expansion of `hi`
/// followed by Brent.
pub fn root_expanding<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, eps: f64) -> Result<f64> {
    let flo = f(lo);
    let mut hi = hi;
    for _ in 0..200 {
        let fhi = f(hi);
        if fhi.signum() != flo.signum() || fhi == 0.0 {
            return brent(&mut f, lo, hi, eps);
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::Bracket(format!("no sign change above {lo}")))
}

/// Bisection on a monotone predicate-like function, robust to NaN-free
/// plateaus where Brent stalls. Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let fa = f(a);
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol * (1.0 + m.abs()) {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}


/// `ln Φ(x)` without underflow in the lower tail.
pub fn log_ndtr(x: f64) -> f64 {
    if x > -30.0 {
        return ndtr(x).ln();
    }
    // asymptotic series of the Mills ratio
    let z2 = 1.0 / (x * x);
    let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2.powi(4);
    -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// `ln(Φ(a) − Φ(b))` for `a > b`.
pub fn log_ndtr_diff(a: f64, b: f64) -> f64 {
    if a <= b {
        return f64::NEG_INFINITY;
    }
    if b > 0.0 {
        // both in the upper tail: Q(b) − Q(a)
        let (lb, la) = (log_ndtr(-b), log_ndtr(-a));
        lb + (-(la - lb).exp()).ln_1p()
    } else if a < 0.0 {
        let (la, lb) = (log_ndtr(a), log_ndtr(b));
        la + (-(lb - la).exp()).ln_1p()
    } else {
        (1.0 - ndtr(b) - q_func(a)).ln()
    }
}

#[cfg(test)]
mod tail_tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_ndtr_is_continuous_across_switch() {
        let a = log_ndtr(-30.0 + 1e-9);
        let b = log_ndtr(-30.0 - 1e-9);
        assert_relative_eq!(a, b, max_relative = 1e-9);
        assert_relative_eq!(log_ndtr(-40.0), -804.6084420137538, max_relative = 1e-12);
        assert_relative_eq!(
            log_ndtr_diff(1.0, -1.0).exp(),
            0.682_689_492_137_085_9,
            max_relative = 1e-14
        );
        assert_relative_eq!(log_ndtr_diff(41.0, 40.0), log_ndtr(-40.0), max_relative = 1e-12);
    }
}
