//! Tunes ℓ0 and ℓ1 GLSE precoders for a power and activity target and
//! compares them with random antenna selection.
//!
//! cargo run --release --example tune_rs

use glse::penalties::{PenaltySpec, Scenario, SupportSpec};
use glse::replica::{db, random_tas_asymptote, rzf_asymptote, tune, ScenarioSpec, TuneOptions};

fn main() -> glse::Result<()> {
    let (power, eta) = (0.5, 0.7);
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "N/K", "RZF", "l0", "l1", "TAS");
    // past N/K = 3 zero forcing needs more than p = 0.5, so nothing is tunable
    for inv in [1.25, 1.5, 2.0, 2.5, 2.75] {
        let load = 1.0 / inv;
        let base = ScenarioSpec::new(PenaltySpec::default(), SupportSpec::FullComplex, load, 1.0);
        let (_, rzf) = rzf_asymptote(load, power, 1.0)?;
        let l0 = tune(&base, Scenario::L0, power, eta, &TuneOptions::default())?;
        let l1 = tune(&base, Scenario::L1, power, eta, &TuneOptions::default())?;
        let tas = random_tas_asymptote(load, eta, power, 1.0)?;
        println!(
            "{inv:5.2} {:9.2} {:9.2} {:9.2} {:9.2}",
            rzf.distortion_db(),
            l0.solution.distortion_db(),
            l1.solution.distortion_db(),
            db(tas.distortion)
        );
    }

    let base = ScenarioSpec::new(PenaltySpec::default(), SupportSpec::FullComplex, 0.5, 1.0);
    let t = tune(&base, Scenario::L0, power, eta, &TuneOptions::default())?;
    println!("\nl0 at N/K = 2: {:?}", t.penalty);
    println!(
        "chi = {:.4}, xi = {:.4}, rho_rs = {:.4}",
        t.solution.chi, t.solution.xi, t.solution.rho_rs
    );
    Ok(())
}
