//! Separable penalties, precoding alphabets and the scalar decoupled precoders.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `u(v) = λ|v|² + λ0·1{v≠0} + λ1|v|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda2: f64,
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default)]
    pub lambda1: f64,
}

impl PenaltySpec {
    pub fn new(lambda2: f64, lambda0: f64, lambda1: f64) -> Self {
        Self {
            lambda2,
            lambda0,
            lambda1,
        }
    }

    pub fn ridge(lambda2: f64) -> Self {
        Self::new(lambda2, 0.0, 0.0)
    }

    pub fn l0(lambda2: f64, lambda0: f64) -> Self {
        Self::new(lambda2, lambda0, 0.0)
    }

    pub fn l1(lambda2: f64, lambda1: f64) -> Self {
        Self::new(lambda2, 0.0, lambda1)
    }

    pub fn eval(&self, v: Complex64) -> f64 {
        if v == ZERO {
            return 0.0;
        }
        let r = v.norm();
        self.lambda2 * r * r + self.lambda0 + self.lambda1 * r
    }

    /// Checks finiteness and signs. A negative quadratic weight is accepted
    /// only on request; the scalar problem stays well posed while `1 + ξλ > 0`.
    pub fn validate(&self, allow_negative_quadratic: bool) -> Result<()> {
        let w = [self.lambda2, self.lambda0, self.lambda1];
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("penalty weights must be finite: {self:?}")));
        }
        if self.lambda0 < 0.0 || self.lambda1 < 0.0 {
            return Err(Error::Config(format!("sparsity weights must be >= 0: {self:?}")));
        }
        if self.lambda2 < 0.0 && !allow_negative_quadratic {
            return Err(Error::Config(format!("quadratic weight must be >= 0: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportSpec {
    FullComplex,
    Disk {
        peak_power: f64,
    },
    MPskZero {
        order: u32,
        peak_power: f64,
    },
    /// The `M → ∞` limit of `MPskZero`: `{0} ∪ {√P e^{jφ}}`.
    ConstantEnvelopeZero {
        peak_power: f64,
    },
}

impl SupportSpec {
    pub fn peak_power(&self) -> Option<f64> {
        match *self {
            SupportSpec::FullComplex => None,
            SupportSpec::Disk { peak_power }
            | SupportSpec::MPskZero { peak_power, .. }
            | SupportSpec::ConstantEnvelopeZero { peak_power } => Some(peak_power),
        }
    }

    pub fn order(&self) -> Option<u32> {
        match *self {
            SupportSpec::MPskZero { order, .. } => Some(order),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SupportSpec::MPskZero { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.peak_power() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("peak power must be positive, got {p}")));
            }
        }
        if let SupportSpec::MPskZero { order, .. } = *self {
            if order < 2 {
                return Err(Error::Config(format!("M-PSK order must be >= 2, got {order}")));
            }
        }
        Ok(())
    }

    /// Nonzero points of a discrete alphabet, `√P e^{j2πk/M}` for `k = 1..=M`.
    pub fn constellation(&self) -> Vec<Complex64> {
        match *self {
            SupportSpec::MPskZero { order, peak_power } => (1..=order)
                .map(|k| Complex64::from_polar(peak_power.sqrt(), 2.0 * PI * k as f64 / order as f64))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn contains(&self, v: Complex64) -> bool {
        match *self {
            SupportSpec::FullComplex => v.re.is_finite() && v.im.is_finite(),
            SupportSpec::Disk { peak_power } => v.norm() <= peak_power.sqrt() * (1.0 + 1e-12) + 1e-15,
            SupportSpec::MPskZero { peak_power, .. } => {
                v == ZERO
                    || self
                        .constellation()
                        .iter()
                        .any(|c| (c - v).norm() <= 1e-12 * (1.0 + peak_power.sqrt()))
            }
            SupportSpec::ConstantEnvelopeZero { peak_power } => {
                v == ZERO || (v.norm() - peak_power.sqrt()).abs() <= 1e-12 * (1.0 + peak_power.sqrt())
            }
        }
    }
}

/// Realization of the decoupled input together with its penalty factor ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledInput {
    pub value: Complex64,
    pub xi: f64,
}

/// The covered `(penalty, support)` pairs with closed-form decoupled maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    L0,
    L1,
    PaprL0,
    PaprL1,
    MPsk,
    ConstantEnvelope,
}

impl Scenario {
    pub fn classify(penalty: &PenaltySpec, support: &SupportSpec) -> Result<Scenario> {
        support.validate()?;
        let both = penalty.lambda0 > 0.0 && penalty.lambda1 > 0.0;
        let s = match support {
            SupportSpec::FullComplex if !both => {
                if penalty.lambda1 > 0.0 {
                    Scenario::L1
                } else {
                    Scenario::L0
                }
            }
            SupportSpec::Disk { .. } if !both => {
                if penalty.lambda1 > 0.0 {
                    Scenario::PaprL1
                } else {
                    Scenario::PaprL0
                }
            }
            SupportSpec::MPskZero { .. } => Scenario::MPsk,
            SupportSpec::ConstantEnvelopeZero { .. } => Scenario::ConstantEnvelope,
            _ => {
                return Err(Error::Config(format!(
                    "no closed-form decoupled precoder for {penalty:?} on {support:?}; use decouple_grid"
                )))
            }
        };
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::L0 => "l0",
            Scenario::L1 => "l1",
            Scenario::PaprL0 => "papr_l0",
            Scenario::PaprL1 => "papr_l1",
            Scenario::MPsk => "mpsk",
            Scenario::ConstantEnvelope => "constant_envelope",
        }
    }
}

/// Quadratic weight after folding `λ0` and `λ1` into it, exact on supports
/// where every nonzero point has magnitude `√P`.
pub fn effective_lambda(penalty: &PenaltySpec, peak_power: f64) -> f64 {
    penalty.lambda2 + penalty.lambda0 / peak_power + penalty.lambda1 / peak_power.sqrt()
}

pub fn scalar_objective(
    v: Complex64,
    s: Complex64,
    xi: f64,
    penalty: &PenaltySpec,
    support: &SupportSpec,
) -> Result<f64> {
    if !support.contains(v) {
        return Err(Error::Domain(format!("{v} is outside {support:?}")));
    }
    Ok((v - s).norm_sqr() + xi * penalty.eval(v))
}

/// Nearest `M`-PSK phase index in `1..=M` and `Θ = cos(2πk/M − θ)`.
/// Ties between two phases go to the smaller index.
pub fn nearest_phase(theta: f64, order: u32) -> (u32, f64) {
    let m = order as f64;
    let t = (theta * m / (2.0 * PI)).rem_euclid(m);
    let j0 = t.floor();
    let frac = t - j0;
    let to_k = |j: f64| -> u32 {
        let j = (j as u32) % order;
        if j == 0 {
            order
        } else {
            j
        }
    };
    let (ka, kb) = (to_k(j0), to_k(j0 + 1.0));
    let k = if frac < 0.5 {
        ka
    } else if frac > 0.5 {
        kb
    } else {
        ka.min(kb)
    };
    (k, (2.0 * PI * k as f64 / m - theta).cos())
}

/// Precomputed thresholds of a decoupled precoder for fixed `(ξ, u, 𝕏)`.
#[derive(Debug, Clone, Copy)]
pub struct Decoupler {
    pub scenario: Scenario,
    /// `c = 1 + ξλ` (with the folded λ on constant-modulus supports).
    pub c: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub tau0_tilde: f64,
    pub tau0_hat: f64,
    pub sqrt_p: f64,
    pub order: u32,
}

impl Decoupler {
    pub fn new(xi: f64, penalty: &PenaltySpec, support: &SupportSpec) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Domain(format!("xi must be positive and finite, got {xi}")));
        }
        penalty.validate(true)?;
        let scenario = Scenario::classify(penalty, support)?;
        let sqrt_p = support.peak_power().map(f64::sqrt).unwrap_or(f64::INFINITY);
        let lam = match scenario {
            Scenario::MPsk | Scenario::ConstantEnvelope => effective_lambda(penalty, sqrt_p * sqrt_p),
            _ => penalty.lambda2,
        };
        let c = 1.0 + xi * lam;
        if !(c > 0.0) && !matches!(scenario, Scenario::MPsk | Scenario::ConstantEnvelope) {
            return Err(Error::Domain(format!("1 + xi*lambda = {c} must be positive")));
        }
        let tau0 = (xi * penalty.lambda0 * c).sqrt();
        let tau1 = 0.5 * xi * penalty.lambda1;
        let tau0_tilde = c * sqrt_p;
        let tau0_hat = tau0_tilde.max(0.5 * c * sqrt_p + 0.5 * xi * penalty.lambda0 / sqrt_p);
        Ok(Self {
            scenario,
            c,
            tau0,
            tau1,
            tau0_tilde,
            tau0_hat,
            sqrt_p,
            order: support.order().unwrap_or(0),
        })
    }

    pub fn apply(&self, s: Complex64) -> Complex64 {
        let r = s.norm();
        let unit = |r: f64| if r > 0.0 { s / r } else { ZERO };
        match self.scenario {
            Scenario::L0 => {
                if r > self.tau0 {
                    s / self.c
                } else {
                    ZERO
                }
            }
            Scenario::L1 => {
                if r > self.tau1 {
                    unit(r) * ((r - self.tau1) / self.c)
                } else {
                    ZERO
                }
            }
            Scenario::PaprL0 => {
                if r <= self.tau0_tilde {
                    if r > self.tau0 {
                        s / self.c
                    } else {
                        ZERO
                    }
                } else if r > self.tau0_hat {
                    unit(r) * self.sqrt_p
                } else {
                    ZERO
                }
            }
            Scenario::PaprL1 => {
                if r > self.tau1 {
                    unit(r) * ((r - self.tau1) / self.c).min(self.sqrt_p)
                } else {
                    ZERO
                }
            }
            Scenario::MPsk => {
                let (k, big_theta) = nearest_phase(s.arg(), self.order);
                // active iff P c − 2√P r Θ < 0
                if 2.0 * r * big_theta > self.sqrt_p * self.c {
                    Complex64::from_polar(self.sqrt_p, 2.0 * PI * k as f64 / self.order as f64)
                } else {
                    ZERO
                }
            }
            Scenario::ConstantEnvelope => ce_map(s, self.c, self.sqrt_p),
        }
    }

    /// Activity threshold on `|s|` for phase-free scenarios.
    pub fn activity_threshold(&self) -> f64 {
        match self.scenario {
            Scenario::L0 => self.tau0,
            Scenario::L1 | Scenario::PaprL1 => self.tau1,
            Scenario::PaprL0 => {
                if self.tau0 <= self.tau0_tilde {
                    self.tau0
                } else {
                    self.tau0_hat
                }
            }
            Scenario::ConstantEnvelope => 0.5 * self.sqrt_p * self.c,
            Scenario::MPsk => f64::NAN,
        }
    }
}

fn ce_map(s: Complex64, c: f64, sqrt_p: f64) -> Complex64 {
    let r = s.norm();
    if r > 0.0 && r >= 0.5 * sqrt_p * c {
        s * (sqrt_p / r)
    } else {
        ZERO
    }
}

/// Closed-form global minimizer of `|v − s|² + ξu(v)` over the support.
pub fn decouple(s: Complex64, xi: f64, penalty: &PenaltySpec, support: &SupportSpec) -> Result<Complex64> {
    Ok(Decoupler::new(xi, penalty, support)?.apply(s))
}

/// Constant-envelope decoupled precoder.
pub fn decouple_ce(s: Complex64, xi: f64, lambda2: f64, peak_power: f64) -> Result<Complex64> {
    if !(peak_power > 0.0) {
        return Err(Error::Domain(format!("peak power must be positive, got {peak_power}")));
    }
    Ok(ce_map(s, 1.0 + xi * lambda2, peak_power.sqrt()))
}

#[derive(Debug, Clone, Copy)]
pub struct GridResult {
    pub v: Complex64,
    pub objective: f64,
    /// Largest magnitude on the grid.
    pub radius: f64,
    pub radial_step: f64,
    pub angular_step: f64,
}

/// Brute-force minimizer over a polar grid of the support (exact set for
/// M-PSK). Ties go to the smaller magnitude, then the smaller phase.
pub fn decouple_grid_detail(
    s: Complex64,
    xi: f64,
    penalty: &PenaltySpec,
    support: &SupportSpec,
    resolution: usize,
) -> Result<GridResult> {
    if resolution < 64 {
        return Err(Error::Config(format!(
            "grid resolution must be >= 64, got {resolution}"
        )));
    }
    support.validate()?;
    let obj = |v: Complex64| (v - s).norm_sqr() + xi * penalty.eval(v);
    let mut best = ZERO;
    let mut best_val = obj(ZERO);
    let mut consider = |v: Complex64| {
        let f = obj(v);
        if f < best_val {
            best = v;
            best_val = f;
        }
    };
    let (radius, radial_step, angular_step) = match *support {
        SupportSpec::MPskZero { .. } => {
            for v in support.constellation() {
                consider(v);
            }
            (support.peak_power().unwrap().sqrt(), 0.0, 0.0)
        }
        _ => {
            let radius = match *support {
                SupportSpec::FullComplex => {
                    4.0 * s.norm() + 4.0 * (xi * penalty.lambda0 + xi * penalty.lambda1 + 1.0).sqrt()
                }
                _ => support.peak_power().unwrap().sqrt(),
            };
            let radii: Vec<f64> = match support {
                SupportSpec::ConstantEnvelopeZero { .. } => vec![radius],
                _ => (1..=resolution)
                    .map(|i| radius * i as f64 / resolution as f64)
                    .collect(),
            };
            let dphi = 2.0 * PI / resolution as f64;
            for &r in &radii {
                for j in 0..resolution {
                    consider(Complex64::from_polar(r, j as f64 * dphi));
                }
            }
            let dr = if radii.len() > 1 {
                radius / resolution as f64
            } else {
                0.0
            };
            (radius, dr, dphi)
        }
    };
    Ok(GridResult {
        v: best,
        objective: best_val,
        radius,
        radial_step,
        angular_step,
    })
}

pub fn decouple_grid(
    s: Complex64,
    xi: f64,
    penalty: &PenaltySpec,
    support: &SupportSpec,
    resolution: usize,
) -> Result<Complex64> {
    Ok(decouple_grid_detail(s, xi, penalty, support, resolution)?.v)
}

/// `argmin_v ½|v − w|² + t(λ|v|² + λ1|v|)` over a convex support.
pub fn prox(penalty: &PenaltySpec, support: &SupportSpec, w: Complex64, step: f64) -> Result<Complex64> {
    if penalty.lambda0 != 0.0 {
        return Err(Error::Config(
            "prox needs lambda0 = 0 (the l0 penalty is not convex)".into(),
        ));
    }
    if penalty.lambda2 < 0.0 || penalty.lambda1 < 0.0 {
        return Err(Error::Config(format!("prox needs nonnegative weights: {penalty:?}")));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("prox step must be positive, got {step}")));
    }
    let cap = match *support {
        SupportSpec::FullComplex => f64::INFINITY,
        SupportSpec::Disk { peak_power } => peak_power.sqrt(),
        _ => return Err(Error::Config(format!("prox needs a convex support, got {support:?}"))),
    };
    Ok(prox_unchecked(
        w,
        step * penalty.lambda1,
        1.0 + 2.0 * step * penalty.lambda2,
        cap,
    ))
}

#[inline]
pub(crate) fn prox_unchecked(w: Complex64, shrink: f64, scale: f64, cap: f64) -> Complex64 {
    let r = w.norm();
    if r <= shrink {
        return ZERO;
    }
    let m = ((r - shrink) / scale).min(cap);
    w * (m / r)
}
