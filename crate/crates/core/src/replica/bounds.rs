//! Rate bounds and the distortion lower bound for M-PSK alphabets with zero.

use crate::error::{Error, Result};
use crate::quad::bisect;

/// `log(ρ/(σ² + D))` in nats.
pub fn rate_lower_bound(rho: f64, distortion: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(Error::Domain(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    Ok((rho / (noise_power + distortion)).ln())
}

/// `log(1 + ρ/(p + D))` in nats.
pub fn heuristic_rate(rho: f64, p: f64, distortion: f64) -> Result<f64> {
    if !(p >= 0.0 && distortion >= 0.0 && rho >= 0.0) {
        return Err(Error::Domain("heuristic rate needs nonnegative arguments".into()));
    }
    if p + distortion <= 0.0 {
        return Err(Error::Domain("heuristic rate diverges for p + D = 0".into()));
    }
    Ok((rho / (p + distortion)).ln_1p())
}

/// Root `r* ∈ (0, 1]` of `r − log r = 1 + log(1+M)/α`.
pub fn lemma2_ratio(load: f64, order: u32) -> f64 {
    let rhs = 1.0 + ((1 + order) as f64).ln() / load;
    if rhs <= 1.0 {
        return 1.0;
    }
    // r − log r decreases on (0, 1]; bracket from below by exp(−rhs)
    bisect(|r| r - r.ln() - rhs, (-rhs).exp() * 0.5, 1.0, 1e-15)
}

/// `D_ℓ = r*·(ρ + ηP)`.
pub fn lemma2_bound(load: f64, rho: f64, eta: f64, peak_power: f64, order: u32) -> Result<f64> {
    if !(load > 0.0 && rho > 0.0 && peak_power > 0.0) {
        return Err(Error::Domain(
            "lemma2_bound needs positive load, rho and peak power".into(),
        ));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("eta must be in (0, 1], got {eta}")));
    }
    if order < 1 {
        return Err(Error::Domain("constellation order must be >= 1".into()));
    }
    Ok(lemma2_ratio(load, order) * (rho + eta * peak_power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rates() {
        assert_abs_diff_eq!(rate_lower_bound(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(rate_lower_bound(1.0, 0.9, 0.1).unwrap(), 0.0, epsilon = 1e-15);
        assert!(rate_lower_bound(1.0, 0.0, 0.0).is_err());
        assert_abs_diff_eq!(heuristic_rate(1.0, 1.0, 1.0).unwrap(), 1.5f64.ln());
        assert!(heuristic_rate(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lemma2_root() {
        let r = lemma2_ratio(1.0, 2);
        assert_abs_diff_eq!(r - r.ln(), 1.0 + 3f64.ln(), epsilon = 1e-12);
        assert!(r > 0.0 && r < 1.0);
        assert_abs_diff_eq!(lemma2_bound(1.0, 1.0, 0.5, 2.0, 2).unwrap(), 2.0 * r, epsilon = 1e-14);
        assert_abs_diff_eq!(lemma2_ratio(1e12, 2), 1.0, epsilon = 1e-5);
        let mut last = 1.0;
        for m in 1..20 {
            let r = lemma2_ratio(0.7, m);
            assert!(r < last);
            last = r;
        }
    }
}
