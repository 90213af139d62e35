//! Penalty tuning by inversion in target space: for a given decoupled-input
//! variance the targets `(p, η)` pin down the thresholds and `c = 1 + ξλ`,
//! after which `χ` follows from `χR(−χ) = corr` and the weights from `ξ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::moments::{closed_form, Moments};
use super::rs::{solve_rs_from, RsOptions};
use super::{Ensemble, RsSolution, ScenarioSpec};
use crate::error::{Error, Result};
use crate::penalties::{Decoupler, PenaltySpec, Scenario, SupportSpec};
use crate::quad::{bisect, q_func};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneOptions {
    /// Accept `λ < 0` (i.e. `0 < c < 1`) when the targets demand it.
    pub allow_negative_quadratic: bool,
    /// Relative tolerance of the right-inverse check.
    pub check_tol: f64,
    pub rs: RsOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            allow_negative_quadratic: false,
            check_tol: 1e-6,
            rs: RsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub penalty: PenaltySpec,
    pub solution: RsSolution,
}

/// Thresholds and `c` reached for a fixed input variance.
struct Inverse {
    dec: Decoupler,
    m: Moments,
}

fn base_decoupler(family: Scenario, support: &SupportSpec, c: f64) -> Decoupler {
    let sqrt_p = support.peak_power().map(f64::sqrt).unwrap_or(f64::INFINITY);
    Decoupler {
        scenario: family,
        c,
        tau0: 0.0,
        tau1: 0.0,
        tau0_tilde: c * sqrt_p,
        tau0_hat: c * sqrt_p,
        sqrt_p,
        order: support.order().unwrap_or(0),
    }
}

/// Finds `c > 0` with `f(c) = 0`, `f` decreasing. Searches on `log c`.
fn solve_c<F: FnMut(f64) -> f64>(mut f: F, what: &str) -> Result<f64> {
    let (lo, hi) = (-30.0f64, 30.0f64);
    let (flo, fhi) = (f(lo.exp()), f(hi.exp()));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::Infeasible {
            reason: format!("{what}: no c in (e^-30, e^30) attains the target"),
            frontier: None,
        });
    }
    Ok(bisect(|t| f(t.exp()), lo, hi, 1e-15).exp())
}

fn invert(family: Scenario, support: &SupportSpec, v: f64, p: f64, eta: f64) -> Result<Inverse> {
    let t_eta = (-v * eta.ln()).max(0.0).sqrt();
    let spv = (PI * v).sqrt();
    let dec = match family {
        Scenario::L0 => {
            let c = ((v + t_eta * t_eta) * eta / p).sqrt();
            Decoupler {
                tau0: t_eta,
                ..base_decoupler(family, support, c)
            }
        }
        Scenario::L1 => {
            let num = v * eta - 2.0 * t_eta * spv * q_func((2.0 / v).sqrt() * t_eta);
            let c = (num / p).sqrt();
            Decoupler {
                tau1: t_eta,
                ..base_decoupler(family, support, c)
            }
        }
        Scenario::PaprL0 => {
            let pp = support.peak_power().unwrap_or(f64::INFINITY);
            if p >= eta * pp {
                return Err(Error::Infeasible {
                    reason: format!("power {p} needs more than eta*P = {}", eta * pp),
                    frontier: Some((eta * pp, eta)),
                });
            }
            let at = |c: f64| {
                let mut d = base_decoupler(family, support, c);
                let sp = d.sqrt_p;
                if t_eta <= c * sp {
                    d.tau0 = t_eta;
                } else {
                    d.tau0 = (2.0 * c * sp * t_eta - c * c * sp * sp).sqrt();
                    d.tau0_hat = t_eta;
                }
                d
            };
            let c = solve_c(|c| closed_form(&at(c), v).power - p, "PAPR-l0 power")?;
            at(c)
        }
        Scenario::PaprL1 => {
            let pp = support.peak_power().unwrap_or(f64::INFINITY);
            if p >= eta * pp {
                return Err(Error::Infeasible {
                    reason: format!("power {p} needs more than eta*P = {}", eta * pp),
                    frontier: Some((eta * pp, eta)),
                });
            }
            let at = |c: f64| Decoupler {
                tau1: t_eta,
                ..base_decoupler(family, support, c)
            };
            let c = solve_c(|c| closed_form(&at(c), v).power - p, "PAPR-l1 power")?;
            at(c)
        }
        Scenario::MPsk | Scenario::ConstantEnvelope => {
            let pp = support.peak_power().unwrap_or(f64::NAN);
            if (p - eta * pp).abs() > 1e-9 * p {
                return Err(Error::Infeasible {
                    reason: format!("constant-modulus support fixes p = eta*P = {}, target {p}", eta * pp),
                    frontier: Some((eta * pp, eta)),
                });
            }
            if family == Scenario::ConstantEnvelope {
                let c = (-4.0 * v * eta.ln() / pp).max(0.0).sqrt();
                base_decoupler(family, support, c)
            } else if eta >= 1.0 {
                base_decoupler(family, support, 0.0)
            } else {
                let at = |c: f64| base_decoupler(family, support, c);
                let c = solve_c(|c| closed_form(&at(c), v).eta - eta, "M-PSK activity")?;
                at(c)
            }
        }
    };
    if !(dec.c.is_finite() && dec.c > 0.0) {
        return Err(Error::Infeasible {
            reason: format!("targets (p={p}, eta={eta}) need c = {} at input variance {v}", dec.c),
            frontier: None,
        });
    }
    let m = closed_form(&dec, v);
    Ok(Inverse { dec, m })
}

fn family_fits(family: Scenario, support: &SupportSpec) -> bool {
    matches!(
        (family, support),
        (Scenario::L0 | Scenario::L1, SupportSpec::FullComplex)
            | (Scenario::PaprL0 | Scenario::PaprL1, SupportSpec::Disk { .. })
            | (Scenario::MPsk, SupportSpec::MPskZero { .. })
            | (Scenario::ConstantEnvelope, SupportSpec::ConstantEnvelopeZero { .. })
    )
}

/// Tunes the weights of `family` so that the RS solution has power
/// `target_power` and activity `target_eta`. The penalty in `base` is ignored.
pub fn tune(
    base: &ScenarioSpec,
    family: Scenario,
    target_power: f64,
    target_eta: f64,
    opts: &TuneOptions,
) -> Result<Tuned> {
    if !(target_power > 0.0 && target_power.is_finite()) {
        return Err(Error::Config(format!(
            "target power must be positive, got {target_power}"
        )));
    }
    if !(target_eta > 0.0 && target_eta <= 1.0) {
        return Err(Error::Config(format!("target eta must be in (0, 1], got {target_eta}")));
    }
    if !family_fits(family, &base.support) {
        return Err(Error::Config(format!(
            "{family:?} cannot be tuned on {:?}",
            base.support
        )));
    }
    base.with_penalty(PenaltySpec::default()).validate(false)?;
    let ens: Ensemble = base.ensemble();
    let (p, eta) = (target_power, target_eta);

    let frontier = |inv: &Inverse| Some((inv.m.power, inv.m.eta));
    let (chi, inv) = if ens.is_unit() {
        let v = (base.rho + p) / base.load;
        let inv = invert(family, &base.support, v, p, eta)?;
        let chi = ens.chi_from_corr(inv.m.corr).ok_or_else(|| Error::Infeasible {
            reason: format!(
                "targets imply E Re(x*s)/rho_rs = {} >= load {}; no finite chi",
                inv.m.corr, base.load
            ),
            frontier: frontier(&inv),
        })?;
        (chi, inv)
    } else {
        let gap = |chi: f64| -> f64 {
            let v = ens.rho_rs(base.rho, chi, p);
            match invert(family, &base.support, v, p, eta) {
                Ok(inv) => chi * ens.r(chi) - inv.m.corr,
                Err(_) => f64::NAN,
            }
        };
        let mut hi = 1.0;
        while gap(hi) < 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
        if !(gap(0.0) < 0.0 && gap(hi) >= 0.0) {
            return Err(Error::Infeasible {
                reason: "no chi balances the correlation equation".into(),
                frontier: None,
            });
        }
        let chi = bisect(gap, 0.0, hi, 1e-15);
        let v = ens.rho_rs(base.rho, chi, p);
        (chi, invert(family, &base.support, v, p, eta)?)
    };
    if chi <= 0.0 {
        return Err(Error::Infeasible {
            reason: format!("targets imply chi = {chi} <= 0"),
            frontier: frontier(&inv),
        });
    }
    let xi = ens.xi(chi);
    let c = inv.dec.c;
    let lambda2 = (c - 1.0) / xi;
    if lambda2 < 0.0 && !opts.allow_negative_quadratic {
        return Err(Error::Infeasible {
            reason: format!("targets need a negative quadratic weight (lambda = {lambda2:.6}, c = {c:.6})"),
            frontier: frontier(&inv),
        });
    }
    let penalty = match family {
        Scenario::L0 | Scenario::PaprL0 => PenaltySpec::l0(lambda2, inv.dec.tau0 * inv.dec.tau0 / (xi * c)),
        Scenario::L1 | Scenario::PaprL1 => PenaltySpec::l1(lambda2, 2.0 * inv.dec.tau1 / xi),
        Scenario::MPsk | Scenario::ConstantEnvelope => PenaltySpec::ridge(lambda2),
    };
    let spec = base.with_penalty(penalty);
    let mut rs = opts.rs.clone();
    rs.allow_negative_quadratic = opts.allow_negative_quadratic;
    let solution = solve_rs_from(&spec, &rs, chi, p)?;
    let (ep, ee) = ((solution.p - p).abs() / p, (solution.eta - eta).abs() / eta);
    if ep > opts.check_tol || ee > opts.check_tol {
        return Err(Error::NoConvergence {
            iterations: solution.iterations,
            residual: ep.max(ee),
            detail: format!(
                "tuned weights {penalty:?} reproduce p={}, eta={}",
                solution.p, solution.eta
            ),
        });
    }
    Ok(Tuned { penalty, solution })
}
