//! One-step replica symmetry breaking.
//!
//! With `s0, s1 ~ CN(0, 1)`, `χ̃ = χ + μc`, `ξ = 1/R(−χ)`,
//! `ς0² = ρR(−χ̃) + (p − ρχ̃)R'(−χ̃)` and `ς1² = [R(−χ) − R(−χ̃)]/μ`, the
//! decoupled input is `y = ξ(ς0 s0 + ς1 s1)` and `x` minimizes
//! `|v − y|² + ξu(v)`. The tilt `Λ = exp(−μE)` with
//! `E = (|x − y|² + ξu(x) − |y|²)/ξ` reweights `s1` given `s0`. The fixed
//! point at fixed `μ` is
//!
//! ```text
//! c + p      = E_Λ̃ |x|²
//! χ̃          = E_Λ̃ Re(x s0*)/ς0
//! χ̃ + μp     = E_Λ̃ Re(x s1*)/ς1
//! ```
//!
//! and `μ` solves `μ²pς1² + μc/ξ − ∫_χ^χ̃ R(−ω)dω = E_{s0} E_Λ̃ ln Λ̃`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::fixed::{iterate, FpConfig};
use super::moments::ray_integral;
use super::rs::{solve_rs_scenario, RsOptions};
use super::tune::{tune, TuneOptions};
use super::{Ensemble, RsSolution, RsbResiduals, RsbSolution, ScenarioSpec};
use crate::error::{Error, Result};
use crate::penalties::{effective_lambda, Decoupler, PenaltySpec, Scenario, SupportSpec};
use crate::quad::{brent, integrate_vec, log_ndtr, log_ndtr_diff, ndtr, q_func, FixedRule, NormalRule, Tolerance};

/// Form of the stationarity condition in `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuEquation {
    /// `μ²pς1² + μc/ξ − ∫R = E E_Λ̃ ln Λ̃` (mutual information plus divergence).
    Consistent,
    /// `μ²pς1 + μc/ξ − ∫R = E ln ∫Λ Ds1`.
    SaddleAsPrinted,
    /// `μ²pς1² + μc/ξ − ∫R = E ln ∫Λ Ds1`.
    Hybrid,
}

/// Sign of the `s1` component in the decoupled input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltSign {
    Additive,
    Subtractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RsbEngineKind {
    /// Real-axis engine for BPSK, sector engine for M-PSK with `M ≥ 3`,
    /// generic quadrature otherwise.
    Auto,
    /// BPSK only: analytic inner integral, adaptive outer integral.
    RealAxis,
    /// M-PSK with `M ≥ 3`: inner integral reduced to one dimension per
    /// decision sector (Gauss-Legendre of `inner_order` nodes), adaptive
    /// polar integral outside over one symmetry sector of the phase, to
    /// relative tolerance `rel_tol`.
    Sector { inner_order: usize, rel_tol: f64 },
    /// Any covered support: tensor Gauss-Hermite inner rule of `inner_order`
    /// nodes per axis and `outer_order` for the outer rule when `c > 0`.
    Quadrature { inner_order: usize, outer_order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsbOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub newton_after: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    pub mu_equation: MuEquation,
    pub tilt: TiltSign,
    pub engine: RsbEngineKind,
    /// Relative tolerance of the adaptive outer integral.
    pub outer_rel_tol: f64,
    /// Solve with `c = 0` held fixed (the RS structure inside the RSB engine).
    pub force_c_zero: bool,
    /// Solutions with `c` below this are reported as trivial.
    pub c_min: f64,
    pub allow_negative_quadratic: bool,
    /// End the `μ` scan once the frozen branch (`χ = 0`) has shown a
    /// negative, decreasing gap for four consecutive grid points.
    pub early_stop: bool,
}

impl Default for RsbOptions {
    fn default() -> Self {
        Self {
            damping: 0.3,
            tol: 1e-10,
            max_iter: 10_000,
            newton_after: 3,
            mu_min: 0.25,
            mu_max: 1e6,
            mu_factor: 2.0,
            mu_equation: MuEquation::Consistent,
            tilt: TiltSign::Additive,
            engine: RsbEngineKind::Auto,
            outer_rel_tol: 1e-11,
            force_c_zero: false,
            c_min: 1e-8,
            allow_negative_quadratic: false,
            early_stop: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct State {
    chi: f64,
    c: f64,
    p: f64,
}

/// Tilted expectations with `s0, s1 ~ CN(0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Tilted {
    /// `E E_Λ̃ |x|²`
    a: f64,
    /// `E E_Λ̃ Re(x s0*)`
    b0: f64,
    /// `E E_Λ̃ Re(x s1*)`
    b1: f64,
    /// `E E_Λ̃ ln Λ̃`
    kl: f64,
    /// `E ln ∫Λ Ds1`
    log_z: f64,
    eta: f64,
}

#[derive(Debug, Clone, Copy)]
struct Coupling {
    xi: f64,
    s0: f64,
    s1: f64,
    chi_t: f64,
}

fn coupling(ens: &Ensemble, rho: f64, st: &State, mu: f64) -> Option<Coupling> {
    let chi_t = st.chi + mu * st.c;
    if !ens.admissible(st.chi) || !ens.admissible(chi_t) {
        return None;
    }
    let s0sq = rho * ens.r(chi_t) + (st.p - rho * chi_t) * ens.rp(chi_t);
    let s1sq = if st.c == 0.0 {
        0.0
    } else {
        (ens.r(st.chi) - ens.r(chi_t)) / mu
    };
    if !(s0sq > 0.0 && s1sq >= 0.0) {
        return None;
    }
    Some(Coupling {
        xi: ens.xi(st.chi),
        s0: s0sq.sqrt(),
        s1: s1sq.sqrt(),
        chi_t,
    })
}

enum Engine {
    RealAxis,
    Sector { inner: FixedRule, tol: Tolerance },
    Quadrature { inner: NormalRule, outer: NormalRule },
}

fn sector_engine(inner_order: usize, rel_tol: f64) -> Engine {
    Engine::Sector {
        inner: FixedRule::legendre(inner_order, -1.0, 1.0),
        tol: Tolerance::with_rel(rel_tol),
    }
}

const SECTOR_INNER_ORDER: usize = 32;
const SECTOR_REL_TOL: f64 = 1e-9;
/// Radial cutoff for `|s0|`; `e^{−64}` is far below tolerance.
const R_MAX: f64 = 8.0;

struct Problem<'a> {
    spec: &'a ScenarioSpec,
    ens: Ensemble,
    engine: Engine,
    opts: &'a RsbOptions,
}

impl<'a> Problem<'a> {
    fn new(spec: &'a ScenarioSpec, opts: &'a RsbOptions) -> Result<Self> {
        spec.validate(opts.allow_negative_quadratic)?;
        spec.scenario()?;
        let bpsk = matches!(spec.support, SupportSpec::MPskZero { order: 2, .. });
        let psk = match spec.support {
            SupportSpec::MPskZero { order, .. } if order >= 3 => Some(order),
            _ => None,
        };
        let engine = match opts.engine {
            RsbEngineKind::Auto if bpsk => Engine::RealAxis,
            RsbEngineKind::RealAxis if bpsk => Engine::RealAxis,
            RsbEngineKind::RealAxis => {
                return Err(Error::Config("the real-axis RSB engine needs a BPSK support".into()))
            }
            RsbEngineKind::Auto if psk.is_some() => sector_engine(SECTOR_INNER_ORDER, SECTOR_REL_TOL),
            RsbEngineKind::Sector { inner_order, rel_tol } => match psk {
                Some(_) => sector_engine(inner_order, rel_tol),
                None => return Err(Error::Config("the sector RSB engine needs M-PSK with M >= 3".into())),
            },
            RsbEngineKind::Auto => Engine::Quadrature {
                inner: NormalRule::new(10),
                outer: NormalRule::new(32),
            },
            RsbEngineKind::Quadrature {
                inner_order,
                outer_order,
            } => Engine::Quadrature {
                inner: NormalRule::new(inner_order),
                outer: NormalRule::new(outer_order),
            },
        };
        Ok(Self {
            spec,
            ens: spec.ensemble(),
            engine,
            opts,
        })
    }

    fn tilted(&self, cp: &Coupling, mu: f64) -> Option<Tilted> {
        let mut t = match &self.engine {
            Engine::RealAxis => self.tilted_real(cp, mu),
            Engine::Sector { inner, tol } if cp.s1 > 0.0 => self.tilted_sector(cp, mu, inner, *tol),
            Engine::Sector { .. } => self.tilted_quad(cp, mu, &NormalRule::new(1), &NormalRule::new(1))?,
            Engine::Quadrature { inner, outer } => self.tilted_quad(cp, mu, inner, outer)?,
        };
        if self.opts.tilt == TiltSign::Subtractive {
            t.b1 = -t.b1;
        }
        Some(t)
    }

    fn tilted_real(&self, cp: &Coupling, mu: f64) -> Tilted {
        let pp = self.spec.support.peak_power().unwrap();
        let sp = pp.sqrt();
        let cl = 1.0 + cp.xi * effective_lambda(&self.spec.penalty, pp);
        let tau = 0.5 * sp * cl;
        let kap = 2.0 * sp * mu / cp.xi;
        let kap0 = mu * cl * pp / cp.xi;
        let sig = cp.xi * cp.s1 / std::f64::consts::SQRT_2;
        // u0 = Re s0 ~ N(0, 1/2); integrand is even in u0
        let f = |u0: f64| -> [f64; 6] {
            let w = 2.0 * (-u0 * u0).exp() / PI.sqrt();
            let m = cp.xi * cp.s0 * u0;
            let r = bpsk_inner(m, sig, tau, kap, kap0);
            let b1 = if cp.s1 > 0.0 { sp * r.y / (cp.xi * cp.s1) } else { 0.0 };
            [
                w * pp * r.act,
                w * sp * u0 * r.sgn,
                w * b1,
                w * r.kl,
                w * r.log_z,
                w * r.act,
            ]
        };
        let tol = Tolerance::with_rel(self.opts.outer_rel_tol);
        // split at the activity threshold of the untilted map
        let u_tau = if cp.s0 > 0.0 {
            tau / (cp.xi * cp.s0)
        } else {
            f64::INFINITY
        };
        let hi = 9.0;
        let v = if u_tau > 0.0 && u_tau < hi {
            let a = integrate_vec(f, 0.0, u_tau, tol);
            let b = integrate_vec(f, u_tau, hi, tol);
            std::array::from_fn(|i| a[i] + b[i])
        } else {
            integrate_vec(f, 0.0, hi, tol)
        };
        Tilted {
            a: v[0],
            b0: v[1],
            b1: v[2],
            kl: v[3],
            log_z: v[4],
            eta: v[5],
        }
    }

    fn tilted_sector(&self, cp: &Coupling, mu: f64, inner: &FixedRule, tol: Tolerance) -> Tilted {
        let SupportSpec::MPskZero { order, peak_power: pp } = self.spec.support else {
            unreachable!("sector engine on a non-PSK support")
        };
        let sp = pp.sqrt();
        let cl = 1.0 + cp.xi * effective_lambda(&self.spec.penalty, pp);
        let kap = 2.0 * sp * mu / cp.xi;
        let kap0 = mu * cl * pp / cp.xi;
        let sig = cp.xi * cp.s1 / std::f64::consts::SQRT_2;
        let geo = SectorGeometry::new(order, 0.5 * sp * cl, sig, kap, kap0);
        let width = PI / order as f64;
        // |s0| has density 2r e^{−r²}; the phase is uniform over one sector
        let ray = |th: f64| -> [f64; 6] {
            let e = Complex64::from_polar(1.0, th);
            integrate_vec(
                |r| {
                    let s0 = e * r;
                    let q = geo.inner(s0 * (cp.xi * cp.s0), inner);
                    let w = 2.0 * r * (-r * r).exp() / width;
                    [
                        w * pp * q.act,
                        w * sp * (q.xbar * s0.conj()).re,
                        w * sp * q.ya / (cp.xi * cp.s1),
                        w * q.kl,
                        w * q.log_z,
                        w * q.act,
                    ]
                },
                0.0,
                R_MAX,
                tol,
            )
        };
        let v = integrate_vec(ray, 0.0, width, tol);
        Tilted {
            a: v[0],
            b0: v[1],
            b1: v[2],
            kl: v[3],
            log_z: v[4],
            eta: v[5],
        }
    }

    fn tilted_quad(&self, cp: &Coupling, mu: f64, inner: &NormalRule, outer: &NormalRule) -> Option<Tilted> {
        let dec = Decoupler::new(cp.xi, &self.spec.penalty, &self.spec.support).ok()?;
        let pen = self.spec.penalty;
        let xi = cp.xi;
        // inner nodes for s1 ~ CN(0,1): real and imaginary parts N(0, 1/2)
        let nodes: Vec<(Complex64, f64)> = if cp.s1 == 0.0 {
            vec![(Complex64::new(0.0, 0.0), 1.0)]
        } else {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut v = Vec::with_capacity(inner.len() * inner.len());
            for (&a, &wa) in inner.nodes.iter().zip(&inner.weights) {
                for (&b, &wb) in inner.nodes.iter().zip(&inner.weights) {
                    v.push((Complex64::new(h * a, h * b), wa * wb));
                }
            }
            v
        };
        let mut xs = vec![Complex64::new(0.0, 0.0); nodes.len()];
        let mut logs = vec![0.0; nodes.len()];
        let mut at = |s0: Complex64| -> [f64; 6] {
            let mut lmax = f64::NEG_INFINITY;
            for (k, (s1, _)) in nodes.iter().enumerate() {
                let y = (s0 * cp.s0 + s1 * cp.s1) * xi;
                let x = dec.apply(y);
                let e = ((x - y).norm_sqr() + xi * pen.eval(x) - y.norm_sqr()) / xi;
                xs[k] = x;
                logs[k] = -mu * e;
                lmax = lmax.max(logs[k]);
            }
            let mut z = 0.0;
            let mut acc = [0.0; 5];
            for (k, (s1, w)) in nodes.iter().enumerate() {
                let wk = w * (logs[k] - lmax).exp();
                let x = xs[k];
                z += wk;
                acc[0] += wk * x.norm_sqr();
                acc[1] += wk * (x * s0.conj()).re;
                acc[2] += wk * (x * s1.conj()).re;
                acc[3] += wk * logs[k];
                acc[4] += wk * if x.re != 0.0 || x.im != 0.0 { 1.0 } else { 0.0 };
            }
            let ln_z = lmax + z.ln();
            [acc[0] / z, acc[1] / z, acc[2] / z, acc[3] / z - ln_z, ln_z, acc[4] / z]
        };
        let v: [f64; 6] = if cp.s1 == 0.0 {
            let tol = Tolerance::with_rel(self.opts.outer_rel_tol);
            let radial = |theta: f64, at: &mut dyn FnMut(Complex64) -> [f64; 6]| {
                let rot = Complex64::from_polar(1.0, theta);
                ray_integral(
                    |u| {
                        let f = at(rot * u.sqrt());
                        (f[5] != 0.0, f)
                    },
                    tol,
                )
            };
            match self.spec.support {
                SupportSpec::MPskZero { order, .. } => {
                    let width = PI / order as f64;
                    let r = integrate_vec(|th| radial(th, &mut at), 0.0, width, tol);
                    std::array::from_fn(|i| r[i] / width)
                }
                _ => radial(0.0, &mut at),
            }
        } else {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut acc = [0.0; 6];
            for (&a, &wa) in outer.nodes.iter().zip(&outer.weights) {
                for (&b, &wb) in outer.nodes.iter().zip(&outer.weights) {
                    let f = at(Complex64::new(h * a, h * b));
                    for i in 0..6 {
                        acc[i] += wa * wb * f[i];
                    }
                }
            }
            acc
        };
        Some(Tilted {
            a: v[0],
            b0: v[1],
            b1: v[2],
            kl: v[3],
            log_z: v[4],
            eta: v[5],
        })
    }

    /// Fixed-point map at fixed μ; with `c = 0` held, only `(χ, p)` move.
    fn map(&self, st: &State, mu: f64) -> Option<(State, Tilted, Coupling)> {
        let cp = coupling(&self.ens, self.spec.rho, st, mu)?;
        let t = self.tilted(&cp, mu)?;
        let chi_t = t.b0 / cp.s0;
        if self.opts.force_c_zero || st.c == 0.0 {
            return Some((
                State {
                    chi: chi_t,
                    c: 0.0,
                    p: t.a,
                },
                t,
                cp,
            ));
        }
        let p = (t.b1 / cp.s1 - chi_t) / mu;
        let c = t.a - p;
        Some((
            State {
                chi: chi_t - mu * c,
                c,
                p,
            },
            t,
            cp,
        ))
    }

    fn mu_gap(&self, st: &State, mu: f64, t: &Tilted, cp: &Coupling) -> f64 {
        let bind = self.ens.r_int(cp.chi_t) - self.ens.r_int(st.chi);
        let s1sq = cp.s1 * cp.s1;
        match self.opts.mu_equation {
            MuEquation::Consistent => mu * mu * st.p * s1sq + mu * st.c / cp.xi - bind - t.kl,
            MuEquation::SaddleAsPrinted => mu * mu * st.p * cp.s1 + mu * st.c / cp.xi - bind - t.log_z,
            MuEquation::Hybrid => mu * mu * st.p * s1sq + mu * st.c / cp.xi - bind - t.log_z,
        }
    }

    fn distortion(&self, st: &State, cp: &Coupling) -> f64 {
        let (rho, ens) = (self.spec.rho, &self.ens);
        let ct = cp.chi_t;
        if ens.is_unit() {
            return (rho + st.p) / ((1.0 + ct) * (1.0 + ct)) + st.c / ((1.0 + st.chi) * (1.0 + ct));
        }
        let d = (st.p - 2.0 * rho * ct) * ens.r(ct) - (st.p - rho * ct) * ct * ens.rp(ct);
        rho + (d + st.c / cp.xi - ct * cp.s1 * cp.s1) / ens.load
    }

    fn fixed_mu(&self, mu: f64, init: State) -> Option<Solved> {
        let cfg = FpConfig {
            damping: self.opts.damping,
            tol: self.opts.tol,
            max_iter: self.opts.max_iter,
            newton_after: self.opts.newton_after,
            lower: vec![0.0, if self.opts.force_c_zero { 0.0 } else { 1e-14 }, 0.0],
        };
        let out = iterate(
            |x| {
                let st = State {
                    chi: x[0],
                    c: x[1],
                    p: x[2],
                };
                self.map(&st, mu).map(|(n, _, _)| vec![n.chi, n.c, n.p])
            },
            &[init.chi, if self.opts.force_c_zero { 0.0 } else { init.c }, init.p],
            &cfg,
        );
        if !out.converged {
            return None;
        }
        let st = State {
            chi: out.x[0],
            c: out.x[1],
            p: out.x[2],
        };
        let (_, t, cp) = self.map(&st, mu)?;
        Some(Solved {
            st,
            mu,
            gap: self.mu_gap(&st, mu, &t, &cp),
            t,
            cp,
            res: out.residuals,
        })
    }

    fn to_solution(&self, s: &Solved, trivial: bool) -> RsbSolution {
        let xi2 = s.cp.xi * s.cp.xi;
        RsbSolution {
            chi: s.st.chi,
            p: s.st.p,
            c: s.st.c,
            mu: if trivial { 0.0 } else { s.mu },
            rho_rs: xi2 * s.cp.s0 * s.cp.s0,
            rho_rsb1: xi2 * s.cp.s1 * s.cp.s1,
            chi_tilde: s.st.chi + s.mu * s.st.c,
            xi: s.cp.xi,
            distortion: self.distortion(&s.st, &s.cp),
            eta: s.t.eta,
            residuals: RsbResiduals {
                chi: s.res.first().copied().unwrap_or(0.0),
                c: s.res.get(1).copied().unwrap_or(0.0),
                p: s.res.get(2).copied().unwrap_or(0.0),
                mu: if trivial { 0.0 } else { s.gap },
            },
            rho: self.spec.rho,
            lambda2: self.spec.penalty.lambda2,
            trivial,
        }
    }
}

#[derive(Debug, Clone)]
struct Solved {
    st: State,
    mu: f64,
    gap: f64,
    t: Tilted,
    cp: Coupling,
    res: Vec<f64>,
}

struct InnerBpsk {
    /// `E_Λ̃ 1{x ≠ 0}`
    act: f64,
    /// `E_Λ̃ sign(x)`
    sgn: f64,
    /// `E_Λ̃ [sign(x)·(y − m)]`
    y: f64,
    kl: f64,
    log_z: f64,
}

#[inline]
fn phi_over(log_cdf: f64, z: f64) -> f64 {
    // φ(z)/Φ-tail with the tail given in log form
    (-0.5 * z * z - 0.5 * (2.0 * PI).ln() - log_cdf).exp()
}

/// Inner integral over `y ~ N(m, σ²)` with `ln Λ = κ|y| − κ0` for `|y| > τ`.
fn bpsk_inner(m: f64, sig: f64, tau: f64, kap: f64, kap0: f64) -> InnerBpsk {
    if sig == 0.0 {
        let on = m.abs() > tau;
        let l = if on { kap * m.abs() - kap0 } else { 0.0 };
        return InnerBpsk {
            act: on as u8 as f64,
            sgn: if on { m.signum() } else { 0.0 },
            y: 0.0,
            kl: 0.0,
            log_z: l,
        };
    }
    let s2 = sig * sig;
    let log_t0 = log_ndtr_diff((tau - m) / sig, (-tau - m) / sig);
    // upper branch: shifted mean m + κσ²
    let mp = m + kap * s2;
    let ap = (tau - mp) / sig;
    let lq_p = log_ndtr(-ap);
    let log_tp = kap * m + 0.5 * kap * kap * s2 - kap0 + lq_p;
    // lower branch: shifted mean m − κσ²
    let mm = m - kap * s2;
    let am = (-tau - mm) / sig;
    let lq_m = log_ndtr(am);
    let log_tm = -kap * m + 0.5 * kap * kap * s2 - kap0 + lq_m;
    let lmax = log_t0.max(log_tp).max(log_tm);
    let (w0, wp, wm) = ((log_t0 - lmax).exp(), (log_tp - lmax).exp(), (log_tm - lmax).exp());
    let wsum = w0 + wp + wm;
    let log_z = lmax + wsum.ln();
    // conditional means of y on each active branch
    let ey_p = mp + sig * phi_over(lq_p, ap);
    let ey_m = mm - sig * phi_over(lq_m, am);
    let l_p = kap * ey_p - kap0;
    let l_m = -kap * ey_m - kap0;
    InnerBpsk {
        act: (wp + wm) / wsum,
        sgn: (wp - wm) / wsum,
        y: (wp * (ey_p - m) - wm * (ey_m - m)) / wsum,
        kl: (wp * l_p + wm * l_m) / wsum - log_z,
        log_z,
    }
}

struct InnerPsk {
    act: f64,
    /// `E_Λ̃ x/√P`
    xbar: Complex64,
    /// `E_Λ̃ Re(e^{−jφ}(y − m))` over the active sectors, `φ` the chosen phase
    ya: f64,
    kl: f64,
    log_z: f64,
}

/// Decision sectors of `{0} ∪ M-PSK`. In the frame rotated by `−φ_k`, with
/// `y e^{−jφ_k} = a + jb`, symbol `k` is chosen iff `a > τ` and
/// `|b| ≤ a tan(π/M)`, and then `ln Λ = κa − κ0`.
struct SectorGeometry {
    order: u32,
    tan: f64,
    tau: f64,
    sig: f64,
    kap: f64,
    kap0: f64,
}

impl SectorGeometry {
    fn new(order: u32, tau: f64, sig: f64, kap: f64, kap0: f64) -> Self {
        Self {
            order,
            tan: (PI / order as f64).tan(),
            tau,
            sig,
            kap,
            kap0,
        }
    }

    /// `(ln P(sector), E[a | sector])` for `a ~ N(ma, σ²)`, `b ~ N(mb, σ²)`.
    fn sector(&self, ma: f64, mb: f64, rule: &FixedRule) -> (f64, f64) {
        let sig = self.sig;
        let t0 = (self.tau - ma) / sig;
        let width = |t: f64| -> f64 {
            let a = ma + sig * t;
            if a <= 0.0 {
                return 0.0;
            }
            let (hi, lo) = ((a * self.tan - mb) / sig, (-a * self.tan - mb) / sig);
            if hi <= lo {
                0.0
            } else if lo > 0.0 {
                q_func(lo) - q_func(hi)
            } else {
                ndtr(hi) - ndtr(lo)
            }
        };
        let (mut s0, mut s1) = (0.0, 0.0);
        let log_mass;
        let et;
        if t0 > 0.0 {
            // t = t0 + u with the factor φ(t0) taken out
            let top = (40.0 / t0).min(9.0);
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let u = 0.5 * top * (x + 1.0);
                let f = 0.5 * top * w * (-t0 * u - 0.5 * u * u).exp() * width(t0 + u);
                s0 += f;
                s1 += f * u;
            }
            log_mass = -0.5 * t0 * t0 - 0.5 * (2.0 * PI).ln() + s0.ln();
            et = t0 + s1 / s0;
        } else {
            let lo = t0.max(-9.0);
            let half = 0.5 * (9.0 - lo);
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let t = lo + half * (x + 1.0);
                let f = half * w * (-0.5 * t * t).exp() / (2.0 * PI).sqrt() * width(t);
                s0 += f;
                s1 += f * t;
            }
            log_mass = s0.ln();
            et = s1 / s0;
        }
        if s0 > 0.0 {
            (log_mass, ma + sig * et)
        } else {
            (f64::NEG_INFINITY, ma)
        }
    }

    fn inner(&self, m: Complex64, rule: &FixedRule) -> InnerPsk {
        let m_order = self.order as usize;
        let s2 = self.sig * self.sig;
        let mut logw = Vec::with_capacity(m_order);
        let mut info = Vec::with_capacity(m_order);
        let mut untilted = 0.0;
        for k in 1..=m_order {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / self.order as f64);
            let w = m * rot.conj();
            let (lt, ea) = self.sector(w.re + self.kap * s2, w.im, rule);
            if self.order != 4 {
                untilted += self.sector(w.re, w.im, rule).0.exp();
            }
            logw.push(self.kap * w.re + 0.5 * self.kap * self.kap * s2 - self.kap0 + lt);
            info.push((rot, ea, w.re));
        }
        // the inactive region is a regular M-gon; for M = 4 a square
        let p0 = if self.order == 4 {
            let side = |c: f64| {
                let (hi, lo) = ((self.tau - c) / self.sig, (-self.tau - c) / self.sig);
                if lo > 0.0 {
                    q_func(lo) - q_func(hi)
                } else {
                    ndtr(hi) - ndtr(lo)
                }
            };
            side(m.re) * side(m.im)
        } else {
            (1.0 - untilted).max(0.0)
        };
        let log_w0 = p0.ln();
        let lmax = logw.iter().copied().fold(log_w0, f64::max);
        let w0 = (log_w0 - lmax).exp();
        let ws: Vec<f64> = logw.iter().map(|l| (l - lmax).exp()).collect();
        let z: f64 = w0 + ws.iter().sum::<f64>();
        let log_z = lmax + z.ln();
        let mut out = InnerPsk {
            act: 0.0,
            xbar: Complex64::new(0.0, 0.0),
            ya: 0.0,
            kl: -log_z,
            log_z,
        };
        for (w, (rot, ea, ma)) in ws.iter().zip(info) {
            let q = w / z;
            out.act += q;
            out.xbar += rot * q;
            out.ya += q * (ea - ma);
            out.kl += q * (self.kap * ea - self.kap0);
        }
        out
    }
}

fn default_split(rs: &RsSolution) -> State {
    State {
        chi: rs.chi,
        c: 0.3 * rs.p,
        p: 0.7 * rs.p,
    }
}

/// One-step RSB solution. Scans `μ` on a geometric grid (warm-started along
/// the branch), refines sign changes of the `μ`-equation with Brent, and
/// returns the minimum-distortion nontrivial root. Without such a root the
/// RS point is returned with `trivial = true`.
pub fn solve_rsb1(spec: &ScenarioSpec, opts: &RsbOptions) -> Result<RsbSolution> {
    solve_rsb1_hinted(spec, opts, None).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy)]
struct Hint {
    mu: f64,
    st: State,
}

fn solve_rsb1_hinted(
    spec: &ScenarioSpec,
    opts: &RsbOptions,
    hint: Option<Hint>,
) -> Result<(RsbSolution, Option<Hint>)> {
    let pb = Problem::new(spec, opts)?;
    let rs_opts = RsOptions {
        allow_negative_quadratic: opts.allow_negative_quadratic,
        ..RsOptions::default()
    };
    let rs = solve_rs_scenario(spec, &rs_opts)?;
    if opts.force_c_zero {
        // started away from the RS point so that agreement is a real check
        let s = pb
            .fixed_mu(
                1.0,
                State {
                    chi: 1.0,
                    c: 0.0,
                    p: spec.rho,
                },
            )
            .or_else(|| {
                pb.fixed_mu(
                    1.0,
                    State {
                        chi: rs.chi,
                        c: 0.0,
                        p: rs.p,
                    },
                )
            })
            .ok_or_else(|| Error::NoConvergence {
                iterations: opts.max_iter,
                residual: f64::NAN,
                detail: "RSB engine with c = 0".into(),
            })?;
        return Ok((pb.to_solution(&s, true), None));
    }

    let refine = |lo: &Solved, hi: &Solved| -> Option<Solved> {
        let start = lo.st;
        let f = |lm: f64| pb.fixed_mu(lm.exp(), start).map(|s| s.gap).unwrap_or(f64::NAN);
        let lm = brent(f, lo.mu.ln(), hi.mu.ln(), 1e-13).ok()?;
        let s = pb.fixed_mu(lm.exp(), start)?;
        let scale = 1.0 + s.t.kl.abs() + (s.mu * s.st.c / s.cp.xi).abs();
        (s.gap.abs() < 1e-7 * scale && s.st.c > opts.c_min).then_some(s)
    };

    let mut candidates: Vec<Solved> = Vec::new();
    if let Some(h) = hint {
        // local bracket around the previous root
        let mut f = 1.25;
        for _ in 0..6 {
            let (a, b) = (pb.fixed_mu(h.mu / f, h.st), pb.fixed_mu(h.mu * f, h.st));
            if let (Some(a), Some(b)) = (a, b) {
                if a.gap.signum() != b.gap.signum() {
                    if let Some(s) = refine(&a, &b) {
                        candidates.push(s);
                    }
                    break;
                }
            }
            f *= 1.6;
        }
    }
    if candidates.is_empty() {
        let mut inits = vec![default_split(&rs)];
        let a_tot = rs.p;
        inits.push(State {
            chi: 0.0,
            c: 0.5 * a_tot,
            p: 0.5 * a_tot,
        });
        for (k, init) in inits.into_iter().enumerate() {
            let mut prev: Option<Solved> = None;
            let mut warm = init;
            let mut mu = opts.mu_min;
            let mut frozen_run = 0;
            while mu <= opts.mu_max * (1.0 + 1e-12) {
                let cur = pb.fixed_mu(mu, warm).or_else(|| pb.fixed_mu(mu, init));
                if let Some(cur) = cur {
                    warm = cur.st;
                    let falling = prev.as_ref().is_some_and(|p| cur.gap <= p.gap);
                    if cur.st.chi < 1e-9 && cur.gap < 0.0 && falling {
                        frozen_run += 1;
                    } else {
                        frozen_run = 0;
                    }
                    if let Some(p) = &prev {
                        if p.gap.signum() != cur.gap.signum() && p.st.c > opts.c_min {
                            if let Some(s) = refine(p, &cur) {
                                candidates.push(s);
                            }
                        }
                    }
                    prev = Some(cur);
                } else {
                    prev = None;
                    frozen_run = 0;
                }
                if opts.early_stop && frozen_run >= 4 {
                    break;
                }
                mu *= opts.mu_factor;
            }
            if k == 0 && !candidates.is_empty() {
                break;
            }
        }
    }
    let best = candidates
        .into_iter()
        .map(|s| (pb.distortion(&s.st, &s.cp), s))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, s)) => {
            let hint = Hint { mu: s.mu, st: s.st };
            Ok((pb.to_solution(&s, false), Some(hint)))
        }
        None => Ok((trivial_from_rs(spec, &pb, &rs), None)),
    }
}

fn trivial_from_rs(spec: &ScenarioSpec, pb: &Problem, rs: &RsSolution) -> RsbSolution {
    let _ = pb;
    RsbSolution {
        chi: rs.chi,
        p: rs.p,
        c: 0.0,
        mu: 0.0,
        rho_rs: rs.rho_rs,
        rho_rsb1: 0.0,
        chi_tilde: rs.chi,
        xi: rs.xi,
        distortion: rs.distortion,
        eta: rs.eta,
        residuals: RsbResiduals {
            chi: rs.residuals.chi,
            c: 0.0,
            p: rs.residuals.p,
            mu: 0.0,
        },
        rho: spec.rho,
        lambda2: spec.penalty.lambda2,
        trivial: true,
    }
}

/// Solves with `c = 0` held fixed. The RSB engine then reduces to the RS
/// structure, which makes this an independent check of the RS solvers.
pub fn solve_rsb1_forced_c0(spec: &ScenarioSpec, opts: &RsbOptions) -> Result<RsbSolution> {
    let mut o = opts.clone();
    o.force_c_zero = true;
    solve_rsb1(spec, &o)
}

/// RSB solution on a constant-modulus support with the quadratic weight
/// retuned so that the RSB activity `E_Λ̃ 1{x ≠ 0}` equals `target_eta`.
/// Starts from `lambda_start`, or else from the RS-tuned weight, and follows
/// the selected branch.
pub fn solve_rsb1_tuned(
    base: &ScenarioSpec,
    target_eta: f64,
    lambda_start: Option<f64>,
    opts: &RsbOptions,
) -> Result<RsbSolution> {
    let pp = base
        .support
        .peak_power()
        .ok_or_else(|| Error::Config("RSB tuning needs a constant-modulus support".into()))?;
    let family = match base.support {
        SupportSpec::MPskZero { .. } => Scenario::MPsk,
        SupportSpec::ConstantEnvelopeZero { .. } => Scenario::ConstantEnvelope,
        _ => return Err(Error::Config("RSB tuning needs a constant-modulus support".into())),
    };
    let topts = TuneOptions {
        allow_negative_quadratic: opts.allow_negative_quadratic,
        ..TuneOptions::default()
    };
    // past the RS frontier (no finite χ) start from a small weight
    let lam0 = match lambda_start {
        Some(l) => l,
        None => match tune(base, family, target_eta * pp, target_eta, &topts) {
            Ok(rs) => rs.penalty.lambda2,
            Err(Error::Infeasible { .. }) => 1e-2 * base.rho,
            Err(e) => return Err(e),
        },
    };
    let at = |lam: f64, hint: Option<Hint>| solve_rsb1_hinted(&base.with_penalty(PenaltySpec::ridge(lam)), opts, hint);

    let (first, hint0) = at(lam0, None)?;
    if first.trivial {
        return Ok(first);
    }
    let hint = std::cell::Cell::new(hint0);
    let eval = |lam: f64| -> Option<RsbSolution> {
        let (s, h) = at(lam, hint.get()).ok()?;
        if s.trivial {
            return None;
        }
        hint.set(h);
        Some(s)
    };
    // activity decreases in λ; walk until the target is bracketed
    let f0 = first.eta - target_eta;
    // multiplicative steps keep a positive weight positive
    let dir: f64 = if f0 > 0.0 { 1.0 } else { -1.0 };
    let positive = lam0 > 0.0 && !opts.allow_negative_quadratic;
    let mut step: f64 = 0.05;
    let (mut a, mut fa) = (lam0, f0);
    let mut b = None;
    for _ in 0..40 {
        let lam = if positive {
            a * (dir * step).exp()
        } else {
            a + dir * step * (1.0 + a.abs())
        };
        if lam < 0.0 && !opts.allow_negative_quadratic {
            break;
        }
        let Some(s) = eval(lam) else { break };
        let fb = s.eta - target_eta;
        if fb.signum() != fa.signum() {
            b = Some((lam, fb));
            break;
        }
        a = lam;
        fa = fb;
        step *= 1.5;
    }
    let Some((mut bl, _)) = b else {
        return Err(Error::Bracket(format!(
            "RSB activity {} could not be moved to {target_eta} along the branch",
            first.eta
        )));
    };
    let mut al = a;
    let mut best: Option<RsbSolution> = None;
    for _ in 0..60 {
        let mid = 0.5 * (al + bl);
        let Some(s) = eval(mid) else { break };
        let fm = s.eta - target_eta;
        let done = fm.abs() < 1e-9 || (bl - al).abs() < 1e-12 * (1.0 + mid.abs());
        if fm.signum() == fa.signum() {
            al = mid;
        } else {
            bl = mid;
        }
        best = Some(s);
        if done {
            break;
        }
    }
    best.ok_or_else(|| Error::Bracket("RSB activity bisection lost the branch".into()))
}
