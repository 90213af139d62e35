//! Moments of the decoupled precoder output `x` for `s ~ CN(0, v)`:
//! `p = E|x|²`, `η = P(x ≠ 0)` and `corr = E Re{x* s}/v`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::penalties::{Decoupler, Scenario};
use crate::quad::{integrate_vec, q_func, NormalRule, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub power: f64,
    pub eta: f64,
    pub corr: f64,
}

/// How the generic RS path evaluates expectations over `CN(0, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenericQuadrature {
    /// Polar form `∫ e^{−u} avg_θ g(√(vu) e^{jθ}) du` with adaptive
    /// Gauss-Kronrod in `u` (and in `θ` for M-PSK).
    Adaptive { rel_tol: f64 },
    /// Tensor Gauss-Hermite with `order` nodes per real axis.
    GaussHermite { order: usize },
}

impl Default for GenericQuadrature {
    fn default() -> Self {
        GenericQuadrature::Adaptive { rel_tol: 1e-11 }
    }
}

impl GenericQuadrature {
    pub fn refined(self) -> Self {
        match self {
            GenericQuadrature::Adaptive { rel_tol } => GenericQuadrature::Adaptive {
                rel_tol: rel_tol * 1e-2,
            },
            GenericQuadrature::GaussHermite { order } => GenericQuadrature::GaussHermite { order: 2 * order },
        }
    }
}

/// Radial cutoff for `u = |s|²/v ~ Exp(1)`; `e^{−60}` is far below tolerance.
pub(crate) const U_MAX: f64 = 60.0;

#[inline]
fn tail_e(t: f64, v: f64) -> f64 {
    (-t * t / v).exp()
}

/// `Q(√(2/v) t)`.
#[inline]
fn tail_q(t: f64, v: f64) -> f64 {
    q_func((2.0 / v).sqrt() * t)
}

/// `E[r² 1{r > t}]` for Rayleigh `r` with `E r² = v`.
#[inline]
fn tail_r2(t: f64, v: f64) -> f64 {
    (v + t * t) * tail_e(t, v)
}

/// `E[r 1{r > t}]`.
#[inline]
fn tail_r1(t: f64, v: f64) -> f64 {
    t * tail_e(t, v) + (PI * v).sqrt() * tail_q(t, v)
}

/// Closed-form moments of the scenario maps.
pub fn closed_form(d: &Decoupler, v: f64) -> Moments {
    let c = d.c;
    match d.scenario {
        Scenario::L0 => {
            let t = d.tau0;
            let e = tail_e(t, v);
            let m2 = tail_r2(t, v);
            Moments {
                power: m2 / (c * c),
                eta: e,
                corr: m2 / (c * v),
            }
        }
        Scenario::L1 => {
            let t = d.tau1;
            let e = tail_e(t, v);
            let sq = (PI * v).sqrt() * tail_q(t, v);
            Moments {
                power: (v * e - 2.0 * t * sq) / (c * c),
                eta: e,
                corr: (e - t * sq / v) / c,
            }
        }
        Scenario::PaprL0 => {
            let lo = d.tau0.min(d.tau0_tilde);
            let (tt, th) = (d.tau0_tilde, d.tau0_hat);
            let lin = tail_r2(lo, v) - tail_r2(tt, v);
            let sp = d.sqrt_p;
            Moments {
                power: lin / (c * c) + sp * sp * tail_e(th, v),
                eta: tail_e(lo, v) - tail_e(tt, v) + tail_e(th, v),
                corr: (lin / c + sp * tail_r1(th, v)) / v,
            }
        }
        Scenario::PaprL1 => {
            let t1 = d.tau1;
            let t2 = d.sqrt_p * c + t1;
            let (e1, e2) = (tail_e(t1, v), tail_e(t2, v));
            let (q1, q2) = (tail_q(t1, v), tail_q(t2, v));
            let spv = (PI * v).sqrt();
            Moments {
                power: (v * (e1 - e2) - 2.0 * t1 * spv * (q1 - q2)) / (c * c),
                eta: e1,
                corr: (e1 - e2 - spv / v * (t1 * q1 - t2 * q2)) / c,
            }
        }
        Scenario::MPsk => {
            let m = d.order as f64;
            let r = integrate_vec(
                |th| psk_sector(th.cos(), c, d.sqrt_p, v),
                0.0,
                PI / m,
                Tolerance::default(),
            );
            let w = m / PI;
            let eta = w * r[0];
            Moments {
                power: d.sqrt_p * d.sqrt_p * eta,
                eta,
                corr: w * r[1] / v,
            }
        }
        Scenario::ConstantEnvelope => {
            let r = psk_sector(1.0, c, d.sqrt_p, v);
            Moments {
                power: d.sqrt_p * d.sqrt_p * r[0],
                eta: r[0],
                corr: r[1] / v,
            }
        }
    }
}

/// `[P(active), E Re{x* s}]` at angular offset with `Θ = cos θ` from the
/// nearest constellation phase: active iff `r > √P c/(2Θ)`.
fn psk_sector(big_theta: f64, c: f64, sqrt_p: f64, v: f64) -> [f64; 2] {
    if big_theta <= 0.0 {
        return [0.0, 0.0];
    }
    let t = (0.5 * sqrt_p * c / big_theta).max(0.0);
    [tail_e(t, v), sqrt_p * big_theta * tail_r1(t, v)]
}

/// `∫_0^U_MAX e^{−u} g(u) du` for a ray integrand `u ↦ (active, g(u))`.
/// Points where the activity flips are located by bisection and used as
/// breakpoints, since the threshold maps jump there.
pub(crate) fn ray_integral<const D: usize, F: FnMut(f64) -> (bool, [f64; D])>(mut g: F, tol: Tolerance) -> [f64; D] {
    const GRID: usize = 160;
    let node = |k: usize| U_MAX * (k as f64 / GRID as f64).powi(2);
    let mut breaks = vec![0.0];
    let mut prev = g(0.0).0;
    for k in 1..=GRID {
        let u = node(k);
        let cur = g(u).0;
        if cur != prev {
            let (mut lo, mut hi) = (node(k - 1), u);
            while hi - lo > 1e-15 * (1.0 + hi) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid).0 == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
            prev = cur;
        }
    }
    breaks.push(U_MAX);
    let mut acc = [0.0; D];
    for w in breaks.windows(2) {
        let r: [f64; D] = integrate_vec(
            |u| {
                let e = (-u).exp();
                let f = g(u).1;
                std::array::from_fn(|i| e * f[i])
            },
            w[0],
            w[1],
            tol,
        );
        for i in 0..D {
            acc[i] += r[i];
        }
    }
    acc
}

/// Symmetry of the decoupled map used to reduce the angular integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSymmetry {
    /// `x(e^{jφ}s) = e^{jφ}x(s)` for all `φ`.
    Equivariant,
    /// Rotations by `2π/M` and conjugation.
    Discrete(u32),
}

impl PhaseSymmetry {
    pub fn of(scenario: Scenario, order: u32) -> Self {
        match scenario {
            Scenario::MPsk => PhaseSymmetry::Discrete(order),
            _ => PhaseSymmetry::Equivariant,
        }
    }
}

/// Moments of an arbitrary decoupled map by numerical integration.
pub fn generic<F: Fn(Complex64) -> Complex64>(map: F, sym: PhaseSymmetry, v: f64, quad: GenericQuadrature) -> Moments {
    let sample = |s: Complex64| -> [f64; 3] {
        let x = map(s);
        [
            x.norm_sqr() / v,
            if x.re != 0.0 || x.im != 0.0 { 1.0 } else { 0.0 },
            (x.conj() * s).re / v,
        ]
    };
    let r = match quad {
        GenericQuadrature::Adaptive { rel_tol } => {
            let tol = Tolerance::with_rel(rel_tol);
            let radial = |theta: f64| {
                let rot = Complex64::from_polar(1.0, theta);
                ray_integral(
                    |u| {
                        let f = sample(rot * (v * u).sqrt());
                        (f[1] != 0.0, f)
                    },
                    tol,
                )
            };
            match sym {
                PhaseSymmetry::Equivariant => radial(0.0),
                PhaseSymmetry::Discrete(m) => {
                    let width = PI / m as f64;
                    let r = integrate_vec(radial, 0.0, width, tol);
                    [r[0] / width, r[1] / width, r[2] / width]
                }
            }
        }
        GenericQuadrature::GaussHermite { order } => {
            let rule = NormalRule::new(order);
            let sd = (0.5 * v).sqrt();
            let mut acc = [0.0; 3];
            for (&a, &wa) in rule.nodes.iter().zip(&rule.weights) {
                for (&b, &wb) in rule.nodes.iter().zip(&rule.weights) {
                    let f = sample(Complex64::new(sd * a, sd * b));
                    for k in 0..3 {
                        acc[k] += wa * wb * f[k];
                    }
                }
            }
            acc
        }
    };
    Moments {
        power: r[0] * v,
        eta: r[1],
        corr: r[2],
    }
}
