//! Random transmit-antenna selection followed by RZF (or a peak-limited LSE)
//! on the active subset.
//!
//! Keeping `L = ηN` random columns of `H` (entry variance `1/N`) leaves a
//! `K×L` channel with entry variance `η/L`. Absorbing `√η` into the transmit
//! vector gives a unit-gain system at load `α/η` whose per-antenna power is
//! the original average power over all `N` antennas, and whose peak is `ηP`.

use super::tune::{tune, TuneOptions};
use super::{RsSolution, ScenarioSpec};
use crate::error::Result;
use crate::penalties::{PenaltySpec, Scenario, SupportSpec};

/// RZF at `load` with λ tuned for `target_power`. Returns `(λ, solution)`.
pub fn rzf_asymptote(load: f64, target_power: f64, rho: f64) -> Result<(f64, RsSolution)> {
    let base = ScenarioSpec::new(PenaltySpec::default(), SupportSpec::FullComplex, load, rho);
    let t = tune(&base, Scenario::L0, target_power, 1.0, &TuneOptions::default())?;
    Ok((t.penalty.lambda2, t.solution))
}

/// Random TAS keeping a fraction `eta` of the antennas, RZF on the rest.
/// `target_power` is the average power over all `N` antennas.
pub fn random_tas_asymptote(load: f64, eta: f64, target_power: f64, rho: f64) -> Result<RsSolution> {
    let (_, mut sol) = rzf_asymptote(load / eta, target_power, rho)?;
    sol.eta = eta;
    Ok(sol)
}

/// Random TAS followed by a disk-constrained LSE with only a quadratic weight
/// on the active subset. `peak_power` is the per-antenna peak.
pub fn random_tas_papr_asymptote(
    load: f64,
    eta: f64,
    target_power: f64,
    rho: f64,
    peak_power: f64,
) -> Result<RsSolution> {
    let base = ScenarioSpec::new(
        PenaltySpec::default(),
        SupportSpec::Disk {
            peak_power: eta * peak_power,
        },
        load / eta,
        rho,
    );
    // activity 1 on a disk: the PAPR-l0 family with tau0 = 0
    let t = tune(&base, Scenario::PaprL0, target_power, 1.0, &TuneOptions::default())?;
    let mut sol = t.solution;
    sol.eta = eta;
    Ok(sol)
}
