//! Builds a sweep in code, writes it as CSV and fits the random-TAS activity
//! that best matches the ℓ0 curve.
//!
//! cargo run --release --example sweep_fit [out.csv]

use glse::harness::{
    emit_csv, fit_records, run_sweep, Baseline, Family, FitOptions, GridPoint, McConfig, ScenarioTemplate, SweepConfig,
    UserRounding,
};

fn main() -> glse::Result<()> {
    // ℓ0 Monte Carlo is an exhaustive search, so N stays small and each N/K must give a whole K
    let grid: Vec<GridPoint> = [1.0, 1.2, 1.5, 2.0, 2.4, 3.0]
        .iter()
        .map(|&inv| GridPoint::new(inv, 0.3, 0.5))
        .collect();
    let mut config = SweepConfig::new(ScenarioTemplate::new(Family::L0), grid);
    config.mc = Some(McConfig {
        n_channels: 20,
        n_tx: 12,
        seed: 1,
        users: UserRounding::Exact,
    });

    let records = run_sweep(&config)?;
    for r in &records {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2} dB"));
        println!(
            "N/K = {:.2}: replica {}, Monte Carlo {}, {}",
            r.point.alpha_inv,
            show(r.rs.as_ref().map(|s| s.distortion_db())),
            show(r.mc.as_ref().map(|m| glse::replica::db(m.d_mean))),
            r.status
        );
    }
    let fit = fit_records(&records, Baseline::RandomTas, &FitOptions::default())?;
    println!(
        "equivalent random selection keeps {:.1}% of the antennas",
        100.0 * fit.eta
    );

    if let Some(path) = std::env::args().nth(1) {
        emit_csv(&records, path.as_ref())?;
    }
    Ok(())
}
