//! Replica-symmetric fixed point on `(χ, p)`:
//! `p = E|x|²`, `χR(−χ) = E Re{x* s}/ρ^rs`, with `x` the decoupled precoder
//! output at input variance `ρ^rs(χ, p)`.

use serde::{Deserialize, Serialize};

use super::fixed::{iterate, FpConfig};
use super::moments::{self, GenericQuadrature, Moments, PhaseSymmetry};
use super::{Ensemble, Residuals, RsSolution, ScenarioSpec};
use crate::error::{Error, Result};
use crate::penalties::Decoupler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub chi_inits: Vec<f64>,
    /// Initial powers as multiples of ρ.
    pub p_inits: Vec<f64>,
    pub quadrature: GenericQuadrature,
    pub allow_negative_quadratic: bool,
    /// Damped steps before Newton acceleration kicks in.
    pub newton_after: usize,
}

impl Default for RsOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            chi_inits: vec![0.1, 1.0, 10.0],
            p_inits: vec![0.1, 1.0, 10.0],
            quadrature: GenericQuadrature::default(),
            allow_negative_quadratic: false,
            newton_after: 20,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum MomentSource {
    Closed,
    Generic(GenericQuadrature),
}

pub(crate) fn moments_at(spec: &ScenarioSpec, src: MomentSource, xi: f64, v: f64) -> Option<Moments> {
    let d = Decoupler::new(xi, &spec.penalty, &spec.support).ok()?;
    Some(match src {
        MomentSource::Closed => moments::closed_form(&d, v),
        MomentSource::Generic(q) => moments::generic(|s| d.apply(s), PhaseSymmetry::of(d.scenario, d.order), v, q),
    })
}

/// One application of the RS map; returns the new `(χ, p)` and the moments.
pub(crate) fn rs_map(
    spec: &ScenarioSpec,
    ens: &Ensemble,
    src: MomentSource,
    chi: f64,
    p: f64,
) -> Option<([f64; 2], Moments)> {
    if !ens.admissible(chi) || p < 0.0 {
        return None;
    }
    let xi = ens.xi(chi);
    let v = ens.rho_rs(spec.rho, chi, p);
    if !(v > 1e-300 && xi > 0.0) {
        return None;
    }
    let m = moments_at(spec, src, xi, v)?;
    Some(([xi * m.corr, m.power], m))
}

fn finish(
    spec: &ScenarioSpec,
    ens: &Ensemble,
    src: MomentSource,
    chi: f64,
    p: f64,
    iterations: usize,
) -> Option<RsSolution> {
    let (next, m) = rs_map(spec, ens, src, chi, p)?;
    Some(RsSolution {
        chi,
        p,
        rho_rs: ens.rho_rs(spec.rho, chi, p),
        xi: ens.xi(chi),
        distortion: ens.distortion(spec.rho, chi, p),
        eta: m.eta,
        residuals: Residuals {
            chi: (next[0] - chi) / (1.0 + chi.abs()),
            p: (next[1] - p) / (1.0 + p.abs()),
        },
        rho: spec.rho,
        iterations,
    })
}

fn check(spec: &ScenarioSpec, opts: &RsOptions) -> Result<()> {
    spec.validate(opts.allow_negative_quadratic)?;
    spec.scenario()?;
    let ens = spec.ensemble();
    if ens.rho_rs(spec.rho, 0.0, 0.0) < 1e-300 {
        return Err(Error::Degenerate(format!(
            "decoupled-input variance vanishes (rho = {}, load = {})",
            spec.rho, spec.load
        )));
    }
    Ok(())
}

pub(crate) fn solve_with(
    spec: &ScenarioSpec,
    opts: &RsOptions,
    src: MomentSource,
    inits: &[(f64, f64)],
) -> Result<RsSolution> {
    check(spec, opts)?;
    let ens = spec.ensemble();
    let cfg = FpConfig {
        damping: opts.damping,
        tol: opts.tol,
        max_iter: opts.max_iter,
        newton_after: opts.newton_after,
        lower: vec![0.0, 0.0],
    };
    let mut best: Option<RsSolution> = None;
    let mut worst_residual = (f64::INFINITY, 0usize);
    for &(chi0, p0) in inits {
        let out = iterate(
            |x| rs_map(spec, &ens, src, x[0], x[1]).map(|(n, _)| n.to_vec()),
            &[chi0, p0],
            &cfg,
        );
        if !out.converged {
            if out.max_residual() < worst_residual.0 {
                worst_residual = (out.max_residual(), out.iterations);
            }
            continue;
        }
        if let Some(sol) = finish(spec, &ens, src, out.x[0], out.x[1], out.iterations) {
            if best.as_ref().is_none_or(|b| sol.distortion < b.distortion) {
                best = Some(sol);
            }
        }
    }
    best.ok_or_else(|| Error::NoConvergence {
        iterations: worst_residual.1,
        residual: worst_residual.0,
        detail: format!("RS fixed point for {:?} at load {}", spec.scenario().ok(), spec.load),
    })
}

fn sweep_inits(spec: &ScenarioSpec, opts: &RsOptions) -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for &c in &opts.chi_inits {
        for &p in &opts.p_inits {
            v.push((c, p * spec.rho));
        }
    }
    v
}

/// RS solution by numerical integration of the decoupled map.
pub fn solve_rs_generic(spec: &ScenarioSpec, opts: &RsOptions) -> Result<RsSolution> {
    solve_with(
        spec,
        opts,
        MomentSource::Generic(opts.quadrature),
        &sweep_inits(spec, opts),
    )
}

/// RS solution from the scenario's closed-form moment expressions.
pub fn solve_rs_scenario(spec: &ScenarioSpec, opts: &RsOptions) -> Result<RsSolution> {
    solve_with(spec, opts, MomentSource::Closed, &sweep_inits(spec, opts))
}

/// Closed-form RS iteration from a single starting point.
pub fn solve_rs_from(spec: &ScenarioSpec, opts: &RsOptions, chi0: f64, p0: f64) -> Result<RsSolution> {
    solve_with(spec, opts, MomentSource::Closed, &[(chi0, p0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalties::{PenaltySpec, SupportSpec};
    use approx::assert_abs_diff_eq;

    /// Unit-atom RZF: p = (ρ+p)/(α c²)·..., solved by hand from the
    /// closed forms with τ0 = 0: χ = ξ/c, p = v/c², c = 1 + ξλ.
    fn rzf_oracle(load: f64, lam: f64, rho: f64) -> (f64, f64) {
        // χ = (1+χ)/(α + (1+χ)λ) → αχ + λχ(1+χ) = 1+χ
        let a = lam;
        let b = load + lam - 1.0;
        let chi = (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a);
        let c = 1.0 + (1.0 + chi) / load * lam;
        // p = (ρ+p)/(α c²)
        let p = rho / (load * c * c - 1.0);
        (chi, p)
    }

    #[test]
    fn rzf_matches_hand_solution() {
        let spec = ScenarioSpec::new(PenaltySpec::ridge(1.0), SupportSpec::FullComplex, 0.5, 1.0);
        let a = solve_rs_scenario(&spec, &RsOptions::default()).unwrap();
        let g = solve_rs_generic(&spec, &RsOptions::default()).unwrap();
        let (chi, p) = rzf_oracle(0.5, 1.0, 1.0);
        assert_abs_diff_eq!(a.chi, chi, epsilon = 1e-9);
        assert_abs_diff_eq!(a.p, p, epsilon = 1e-9);
        assert_abs_diff_eq!(g.chi, a.chi, epsilon = 1e-8);
        assert_abs_diff_eq!(g.p, a.p, epsilon = 1e-8);
        assert_abs_diff_eq!(g.distortion, a.distortion, epsilon = 1e-8);
        assert_abs_diff_eq!(a.eta, 1.0);
        assert_abs_diff_eq!(a.rho_rs, (1.0 + a.p) / 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(a.xi, (1.0 + a.chi) / 0.5, epsilon = 1e-14);
    }

    #[test]
    fn vanishing_signal() {
        let spec = ScenarioSpec::new(PenaltySpec::ridge(1.0), SupportSpec::FullComplex, 0.5, 1e-9);
        let s = solve_rs_scenario(&spec, &RsOptions::default()).unwrap();
        assert!(s.p < 1e-8 && s.distortion < 1e-8);
    }
}
