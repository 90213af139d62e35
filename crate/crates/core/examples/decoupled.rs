//! Scalar decoupled precoders for each covered penalty/support pair, with the
//! grid search as a cross-check.
//!
//! cargo run --release --example decoupled

use num_complex::Complex64;

use glse::penalties::{decouple, decouple_grid, Decoupler, PenaltySpec, SupportSpec};

fn main() -> glse::Result<()> {
    let xi = 1.5;
    let cases = [
        ("l0", PenaltySpec::l0(0.2, 0.3), SupportSpec::FullComplex),
        ("l1", PenaltySpec::l1(0.2, 0.6), SupportSpec::FullComplex),
        (
            "papr_l0",
            PenaltySpec::l0(0.2, 0.3),
            SupportSpec::Disk { peak_power: 1.0 },
        ),
        (
            "papr_l1",
            PenaltySpec::l1(0.2, 0.6),
            SupportSpec::Disk { peak_power: 1.0 },
        ),
        (
            "qpsk",
            PenaltySpec::ridge(0.2),
            SupportSpec::MPskZero {
                order: 4,
                peak_power: 1.0,
            },
        ),
        (
            "const_env",
            PenaltySpec::ridge(0.2),
            SupportSpec::ConstantEnvelopeZero { peak_power: 1.0 },
        ),
    ];
    for (name, pen, sup) in cases {
        let d = Decoupler::new(xi, &pen, &sup)?;
        println!(
            "{name}: c = {:.3}, activity threshold {:.3}",
            d.c,
            d.activity_threshold()
        );
        for r in [0.2, 0.6, 1.0, 2.0, 3.0] {
            let s = Complex64::from_polar(r, 0.3);
            let v = decouple(s, xi, &pen, &sup)?;
            let g = decouple_grid(s, xi, &pen, &sup, 512)?;
            println!("  |s| = {r:.1}: x = {v:.4}, grid {g:.4}");
        }
    }
    Ok(())
}
