//! Samples a channel and compares its Gram spectrum and Stieltjes transform
//! with the large-system limits.
//!
//! cargo run --release --example spectrum

use num_complex::Complex64;

use glse::rmt::{
    empirical_stieltjes, gram_eigenvalues, mp_cdf, mp_edges, sample_channel, stieltjes_limit, ChannelSpec, PathLoss,
};

fn main() -> glse::Result<()> {
    let (n, k) = (400, 200);
    let load = k as f64 / n as f64;
    let sample = sample_channel(&ChannelSpec::new(n, k, 11))?;
    let ev = gram_eigenvalues(&sample.matrix);

    let (lo, hi) = mp_edges(load);
    println!("N = {n}, K = {k}, bulk edges [{lo:.3}, {hi:.3}]");
    println!("{:>6} {:>10} {:>10}", "x", "empirical", "limit");
    for i in 0..=8 {
        let x = lo + (hi - lo) * i as f64 / 8.0;
        let emp = ev.iter().filter(|&&e| e <= x).count() as f64 / ev.len() as f64;
        println!("{x:6.3} {emp:10.4} {:10.4}", mp_cdf(load, x));
    }

    // two user groups, one 6 dB stronger
    let pl = PathLoss(vec![(2.0, 0.5), (0.5, 0.5)]);
    let sample = sample_channel(&ChannelSpec::new(n, k, 12).with_pathloss(pl.clone()))?;
    println!("\ntwo-atom path loss {:?}", pl.0);
    for s in [Complex64::new(-1.0, 0.01), Complex64::new(5.0, 0.01)] {
        let e = empirical_stieltjes(&sample, s)?;
        let l = stieltjes_limit(load, &pl, s)?;
        println!("G({s}) sampled {e:.4}, limit {l:.4}");
    }
    Ok(())
}
