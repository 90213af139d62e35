//! BPSK with zero: RS and one-step RSB predictions against the distortion
//! lower bound as the number of antennas per user grows.
//!
//! cargo run --release --example bpsk_rsb

use glse::penalties::{PenaltySpec, Scenario, SupportSpec};
use glse::replica::{db, lemma2_bound, solve_rsb1_tuned, tune, RsbOptions, ScenarioSpec, TuneOptions};

fn main() -> glse::Result<()> {
    let (eta, peak) = (0.4, 2.5);
    let support = SupportSpec::MPskZero {
        order: 2,
        peak_power: peak,
    };
    println!("{:>5} {:>9} {:>9} {:>9} {:>8}", "N/K", "RS", "RSB", "bound", "mu");
    let mut lambda = None;
    for inv in [1.0, 2.0, 3.0, 4.0, 5.0] {
        let load = 1.0 / inv;
        let base = ScenarioSpec::new(PenaltySpec::default(), support, load, 1.0);
        let rs = tune(&base, Scenario::MPsk, eta * peak, eta, &TuneOptions::default())?;
        let start = lambda.or(Some(rs.penalty.lambda2));
        let rsb = solve_rsb1_tuned(&base, eta, start, &RsbOptions::default())?;
        lambda = Some(rsb.lambda2);
        let bound = lemma2_bound(load, 1.0, eta, peak, 2)?;
        println!(
            "{inv:5.1} {:9.2} {:9.2} {:9.2} {:8.2}",
            rs.solution.distortion_db(),
            rsb.distortion_db(),
            db(bound),
            rsb.mu
        );
    }
    Ok(())
}
