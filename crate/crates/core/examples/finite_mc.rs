//! Finite-size precoding on sampled channels compared with the replica
//! prediction for the same weights.
//!
//! cargo run --release --example finite_mc

use glse::finite::{glse_convex, glse_exhaustive_discrete, rzf, rzf_on_subset, tas_random, ConvexOptions};
use glse::harness::draw_trial;
use glse::penalties::{PenaltySpec, Scenario, SupportSpec};
use glse::replica::{db, lemma2_bound, tune, ScenarioSpec, TuneOptions};
use glse::rmt::PathLoss;

fn main() -> glse::Result<()> {
    let (n, k, trials) = (128, 64, 20);
    let base = ScenarioSpec::new(
        PenaltySpec::default(),
        SupportSpec::FullComplex,
        k as f64 / n as f64,
        1.0,
    );
    let t = tune(&base, Scenario::L1, 0.5, 0.7, &TuneOptions::default())?;
    println!("tuned l1 weights {:?}", t.penalty);

    let (mut d, mut p, mut a, mut d_rzf, mut d_tas) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for seed in 0..trials {
        let (h, s) = draw_trial(n, k, &PathLoss::unit(), seed)?;
        let out = glse_convex(
            &h,
            &s,
            1.0,
            &t.penalty,
            &SupportSpec::FullComplex,
            &ConvexOptions::default(),
        )?;
        d += out.distortion;
        p += out.power;
        a += out.activity;
        d_rzf += rzf(&h, &s, 1.0, t.penalty.lambda2)?.distortion;
        let idx = tas_random(n, (0.7 * n as f64) as usize, seed)?;
        d_tas += rzf_on_subset(&h, &s, 1.0, 0.1, &idx)?.distortion;
    }
    let m = trials as f64;
    println!(
        "l1 GLSE: D = {:.2} dB (replica {:.2} dB)",
        db(d / m),
        t.solution.distortion_db()
    );
    println!("         power {:.3}, activity {:.3} (targets 0.5, 0.7)", p / m, a / m);
    println!("RZF at the same quadratic weight: D = {:.2} dB", db(d_rzf / m));
    println!("RZF on 70% random antennas: D = {:.2} dB", db(d_tas / m));

    // BPSK with zero on a tiny system, solved exactly
    let (n, k) = (10, 10);
    let sup = SupportSpec::MPskZero {
        order: 2,
        peak_power: 2.5,
    };
    let bound = lemma2_bound(1.0, 1.0, 0.4, 2.5, 2)?;
    let mut above = 0;
    for seed in 0..20 {
        let (h, s) = draw_trial(n, k, &PathLoss::unit(), 100 + seed)?;
        let out = glse_exhaustive_discrete(&h, &s, 1.0, 0.0, &sup, Some(4))?;
        above += (out.distortion >= bound) as usize;
    }
    println!(
        "\nBPSK N = K = 10, 4 active: {above}/20 trials above the bound {:.2} dB",
        db(bound)
    );
    Ok(())
}
