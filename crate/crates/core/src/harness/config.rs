use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::penalties::{PenaltySpec, Scenario, SupportSpec};
use crate::replica::{RsbOptions, ScenarioSpec};
use crate::rmt::PathLoss;

pub const SPEC_VERSION: &str = "1";

/// Precoder family swept by a config. The GLSE families are tuned to the
/// grid targets; the baselines are RZF with or without random antenna
/// selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    L0,
    L1,
    PaprL0,
    PaprL1,
    Mpsk,
    ConstantEnvelope,
    Rzf,
    RandomTas,
    RandomTasPapr,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::L0 => "l0",
            Family::L1 => "l1",
            Family::PaprL0 => "papr_l0",
            Family::PaprL1 => "papr_l1",
            Family::Mpsk => "mpsk",
            Family::ConstantEnvelope => "constant_envelope",
            Family::Rzf => "rzf",
            Family::RandomTas => "random_tas",
            Family::RandomTasPapr => "random_tas_papr",
        }
    }

    pub fn scenario(&self) -> Option<Scenario> {
        Some(match self {
            Family::L0 => Scenario::L0,
            Family::L1 => Scenario::L1,
            Family::PaprL0 => Scenario::PaprL0,
            Family::PaprL1 => Scenario::PaprL1,
            Family::Mpsk => Scenario::MPsk,
            Family::ConstantEnvelope => Scenario::ConstantEnvelope,
            _ => return None,
        })
    }

    pub fn needs_papr(&self) -> bool {
        matches!(self, Family::PaprL0 | Family::PaprL1 | Family::RandomTasPapr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub family: Family,
    /// Constellation order for `mpsk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default)]
    pub pathloss_atoms: PathLoss,
    /// Fixed weights. When present the tuning step is skipped and the grid
    /// targets only set the support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PenaltySpec>,
    #[serde(default)]
    pub allow_negative_quadratic: bool,
}

impl ScenarioTemplate {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            order: None,
            pathloss_atoms: PathLoss::unit(),
            weights: None,
            allow_negative_quadratic: false,
        }
    }

    /// Peak per-antenna power implied by a grid point, if the support has one.
    pub fn peak_power(&self, pt: &GridPoint) -> Option<f64> {
        match self.family {
            Family::Mpsk | Family::ConstantEnvelope => Some(pt.power / pt.eta),
            f if f.needs_papr() => pt.papr_db.map(|d| pt.power * 10f64.powf(d / 10.0)),
            _ => None,
        }
    }

    pub fn support(&self, pt: &GridPoint) -> Result<SupportSpec> {
        let peak = || {
            self.peak_power(pt)
                .ok_or_else(|| Error::Config(format!("{} needs papr_db at every grid point", self.family.name())))
        };
        Ok(match self.family {
            Family::L0 | Family::L1 | Family::Rzf | Family::RandomTas => SupportSpec::FullComplex,
            Family::PaprL0 | Family::PaprL1 | Family::RandomTasPapr => SupportSpec::Disk { peak_power: peak()? },
            Family::Mpsk => SupportSpec::MPskZero {
                order: self
                    .order
                    .ok_or_else(|| Error::Config("mpsk needs scenario.order".into()))?,
                peak_power: peak()?,
            },
            Family::ConstantEnvelope => SupportSpec::ConstantEnvelopeZero { peak_power: peak()? },
        })
    }

    /// Replica scenario at a given load, with zero weights.
    pub fn spec(&self, pt: &GridPoint, load: f64) -> Result<ScenarioSpec> {
        let mut s = ScenarioSpec::new(PenaltySpec::default(), self.support(pt)?, load, pt.rho);
        s.pathloss_atoms = self.pathloss_atoms.clone();
        Ok(s)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub alpha_inv: f64,
    #[serde(default = "one")]
    pub eta: f64,
    /// Target average power per antenna.
    pub power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub papr_db: Option<f64>,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default = "one")]
    pub noise_power: f64,
}

impl GridPoint {
    pub fn new(alpha_inv: f64, eta: f64, power: f64) -> Self {
        Self {
            alpha_inv,
            eta,
            power,
            papr_db: None,
            rho: 1.0,
            noise_power: 1.0,
        }
    }
}

/// What to do when `N/α⁻¹` is not an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRounding {
    /// Reject the config.
    #[default]
    Exact,
    /// Round `K` to the nearest integer and evaluate the replica at the
    /// realized load `K/N`.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_channels: usize,
    pub n_tx: usize,
    pub seed: u64,
    #[serde(default)]
    pub users: UserRounding,
}

impl McConfig {
    pub fn enabled(&self) -> bool {
        self.n_channels > 0
    }

    pub fn n_users(&self, alpha_inv: f64) -> Result<usize> {
        let k = self.n_tx as f64 / alpha_inv;
        let r = k.round();
        if r < 1.0 {
            return Err(Error::Config(format!(
                "N = {} at alpha_inv = {alpha_inv} leaves no users",
                self.n_tx
            )));
        }
        if self.users == UserRounding::Exact && (k - r).abs() > 1e-9 * k {
            return Err(Error::Config(format!(
                "K = N/alpha_inv = {k} is not an integer (N = {}, alpha_inv = {alpha_inv}); set mc.users = \"nearest\" to round",
                self.n_tx
            )));
        }
        Ok(r as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicaConfig {
    /// Solve the one-step RSB system for `mpsk` points.
    pub rsb: bool,
    pub rsb_options: RsbOptions,
}

impl Default for ReplicaConfig {
    fn default() -> Self {
        Self {
            rsb: true,
            rsb_options: RsbOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub spec_version: String,
    pub scenario: ScenarioTemplate,
    pub grid: Vec<GridPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub replica: ReplicaConfig,
    #[serde(default)]
    pub outputs: Outputs,
    /// Worker threads for Monte Carlo trials; the rayon default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn new(scenario: ScenarioTemplate, grid: Vec<GridPoint>) -> Self {
        Self {
            spec_version: SPEC_VERSION.into(),
            scenario,
            grid,
            mc: None,
            replica: ReplicaConfig::default(),
            outputs: Outputs::default(),
            threads: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: SweepConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    pub fn mc_enabled(&self) -> bool {
        self.mc.as_ref().is_some_and(McConfig::enabled)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!(
                "spec_version {:?} is not supported (expected {SPEC_VERSION:?})",
                self.spec_version
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        self.scenario.pathloss_atoms.validate()?;
        if self.scenario.family == Family::Mpsk && self.scenario.order.is_none_or(|m| m < 2) {
            return Err(Error::Config("mpsk needs scenario.order >= 2".into()));
        }
        if let Some(w) = &self.scenario.weights {
            w.validate(self.scenario.allow_negative_quadratic)?;
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        for (i, pt) in self.grid.iter().enumerate() {
            let bad = |what: &str| Error::Config(format!("grid point {i}: {what}"));
            if !(pt.alpha_inv > 0.0 && pt.alpha_inv.is_finite()) {
                return Err(bad("alpha_inv must be positive"));
            }
            if !(pt.eta > 0.0 && pt.eta <= 1.0) {
                return Err(bad("eta must be in (0, 1]"));
            }
            if !(pt.power > 0.0 && pt.power.is_finite()) {
                return Err(bad("power must be positive"));
            }
            if !(pt.rho > 0.0 && pt.rho.is_finite()) {
                return Err(bad("rho must be positive"));
            }
            if !(pt.noise_power >= 0.0 && pt.noise_power.is_finite()) {
                return Err(bad("noise_power must be >= 0"));
            }
            if pt.papr_db.is_some_and(|d| !d.is_finite()) {
                return Err(bad("papr_db must be finite"));
            }
            if self.scenario.family.needs_papr() && pt.papr_db.is_none() {
                return Err(bad("papr_db is required for this family"));
            }
            if let Some(mc) = self.mc.as_ref().filter(|m| m.enabled()) {
                mc.n_users(pt.alpha_inv).map_err(|e| bad(&e.to_string()))?;
            }
        }
        if let Some(mc) = self.mc.as_ref().filter(|m| m.enabled()) {
            if mc.n_tx == 0 {
                return Err(Error::Config("mc.n_tx must be positive".into()));
            }
        }
        Ok(())
    }
}
