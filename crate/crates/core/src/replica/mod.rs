//! Large-system predictions: replica-symmetric and one-step RSB fixed points,
//! penalty tuning, bounds and random-TAS baselines.

pub mod baselines;
pub mod bounds;
mod fixed;
pub mod moments;
pub mod rs;
pub mod rsb;
pub mod tune;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalties::{PenaltySpec, Scenario, SupportSpec};
use crate::rmt::PathLoss;

pub use baselines::{random_tas_asymptote, random_tas_papr_asymptote, rzf_asymptote};
pub use bounds::{heuristic_rate, lemma2_bound, lemma2_ratio, rate_lower_bound};
pub use moments::{GenericQuadrature, Moments};
pub use rs::{solve_rs_from, solve_rs_generic, solve_rs_scenario, RsOptions};
pub use rsb::{solve_rsb1, solve_rsb1_forced_c0, solve_rsb1_tuned, MuEquation, RsbEngineKind, RsbOptions, TiltSign};
pub use tune::{tune, TuneOptions, Tuned};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub penalty: PenaltySpec,
    pub support: SupportSpec,
    pub load: f64,
    pub rho: f64,
    #[serde(default)]
    pub pathloss_atoms: PathLoss,
}

impl ScenarioSpec {
    pub fn new(penalty: PenaltySpec, support: SupportSpec, load: f64, rho: f64) -> Self {
        Self {
            penalty,
            support,
            load,
            rho,
            pathloss_atoms: PathLoss::unit(),
        }
    }

    pub fn with_penalty(&self, penalty: PenaltySpec) -> Self {
        Self {
            penalty,
            ..self.clone()
        }
    }

    pub fn validate(&self, allow_negative_quadratic: bool) -> Result<()> {
        if !(self.load > 0.0 && self.load.is_finite()) {
            return Err(Error::Config(format!("load must be positive, got {}", self.load)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        self.penalty.validate(allow_negative_quadratic)?;
        self.support.validate()?;
        self.pathloss_atoms.validate()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::classify(&self.penalty, &self.support)
    }

    pub(crate) fn ensemble(&self) -> Ensemble {
        Ensemble {
            load: self.load,
            atoms: self.pathloss_atoms.0.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub chi: f64,
    pub p: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.chi.abs().max(self.p.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsSolution {
    pub chi: f64,
    pub p: f64,
    pub rho_rs: f64,
    pub xi: f64,
    pub distortion: f64,
    pub eta: f64,
    pub residuals: Residuals,
    pub rho: f64,
    pub iterations: usize,
}

impl RsSolution {
    pub fn distortion_db(&self) -> f64 {
        db(self.distortion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsbResiduals {
    pub chi: f64,
    pub c: f64,
    pub p: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsbSolution {
    pub chi: f64,
    pub p: f64,
    pub c: f64,
    /// Zero when no nontrivial μ-root exists and the RS point is returned.
    pub mu: f64,
    pub rho_rs: f64,
    pub rho_rsb1: f64,
    pub chi_tilde: f64,
    pub xi: f64,
    pub distortion: f64,
    pub eta: f64,
    pub residuals: RsbResiduals,
    pub rho: f64,
    /// The quadratic weight the solution was computed with.
    pub lambda2: f64,
    pub trivial: bool,
}

impl RsbSolution {
    pub fn distortion_db(&self) -> f64 {
        db(self.distortion)
    }
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `R(−χ)` and friends for a discrete path-loss law. Poles cannot occur for
/// `χ > −1/max a`, which the solvers maintain.
#[derive(Debug, Clone)]
pub(crate) struct Ensemble {
    pub load: f64,
    pub atoms: Vec<(f64, f64)>,
}

impl Ensemble {
    pub fn is_unit(&self) -> bool {
        self.atoms.iter().all(|&(a, p)| a == 1.0 || p == 0.0)
    }

    /// `R(−x)`.
    pub fn r(&self, x: f64) -> f64 {
        self.load * self.atoms.iter().map(|&(a, p)| p * a / (1.0 + a * x)).sum::<f64>()
    }

    /// `R'(−x)`.
    pub fn rp(&self, x: f64) -> f64 {
        self.load
            * self
                .atoms
                .iter()
                .map(|&(a, p)| {
                    let d = 1.0 + a * x;
                    p * a * a / (d * d)
                })
                .sum::<f64>()
    }

    /// `∫₀ˣ R(−t) dt`.
    pub fn r_int(&self, x: f64) -> f64 {
        crate::rmt::r_transform_integral(self.load, &PathLoss(self.atoms.clone()), x)
    }

    pub fn admissible(&self, x: f64) -> bool {
        self.atoms.iter().all(|&(a, p)| p == 0.0 || 1.0 + a * x > 0.0)
    }

    pub fn xi(&self, chi: f64) -> f64 {
        1.0 / self.r(chi)
    }

    /// Decoupled-input variance `ξ²[ρR(−χ) − (ρχ − p)R'(−χ)]`.
    pub fn rho_rs(&self, rho: f64, chi: f64, p: f64) -> f64 {
        if self.is_unit() {
            return (rho + p) / self.load;
        }
        let xi = self.xi(chi);
        xi * xi * (rho * self.r(chi) - (rho * chi - p) * self.rp(chi))
    }

    /// `ρ + α⁻¹ ∂χ[(p − ρχ)χR(−χ)]`.
    pub fn distortion(&self, rho: f64, chi: f64, p: f64) -> f64 {
        if self.is_unit() {
            return (rho + p) / ((1.0 + chi) * (1.0 + chi));
        }
        rho + ((p - 2.0 * rho * chi) * self.r(chi) - (p - rho * chi) * chi * self.rp(chi)) / self.load
    }

    /// Solves `χR(−χ) = g` for `χ ≥ 0`; `None` when `g` is outside the range
    /// `[0, α·E[1{a>0}])` of the left side.
    pub fn chi_from_corr(&self, g: f64) -> Option<f64> {
        if g < 0.0 {
            return None;
        }
        if self.is_unit() {
            return if g < self.load { Some(g / (self.load - g)) } else { None };
        }
        let sup = self.load * self.atoms.iter().filter(|a| a.0 > 0.0).map(|a| a.1).sum::<f64>();
        if g >= sup {
            return None;
        }
        crate::quad::root_expanding(|x| x * self.r(x) - g, 0.0, 1.0, 1e-15).ok()
    }
}
