use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, Family};
use crate::error::{Error, Result};
use crate::replica::{db, random_tas_asymptote, random_tas_papr_asymptote};

/// One point of a distortion curve to be matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha_inv: f64,
    /// Linear distortion.
    pub distortion: f64,
    pub power: f64,
    pub rho: f64,
    /// Per-antenna peak, used by the peak-limited baseline.
    pub peak_power: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Random antenna selection followed by RZF.
    RandomTas,
    /// Random antenna selection followed by an LSE on the peak-limited disk.
    RandomTasPapr,
}

impl Baseline {
    fn distortion(&self, pt: &CurvePoint, eta: f64) -> Result<f64> {
        let load = 1.0 / pt.alpha_inv;
        let s = match self {
            Baseline::RandomTas => random_tas_asymptote(load, eta, pt.power, pt.rho)?,
            Baseline::RandomTasPapr => {
                let peak = pt
                    .peak_power
                    .ok_or_else(|| Error::Config("the peak-limited baseline needs peak_power".into()))?;
                random_tas_papr_asymptote(load, eta, pt.power, pt.rho, peak)?
            }
        };
        Ok(s.distortion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub eta_min: f64,
    pub eta_max: f64,
    /// Points of the initial scan over `[eta_min, eta_max]`.
    pub coarse_points: usize,
    pub xtol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eta_min: 0.05,
            eta_max: 1.0,
            coarse_points: 96,
            xtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub eta: f64,
    /// Mean squared dB gap at the fitted η.
    pub residual: f64,
    /// Curve points where the baseline exists at the fitted η.
    pub points_used: usize,
}

/// Mean squared dB gap and the number of points it averages. Points where
/// the baseline has no solution are left out.
fn gap(target: &[CurvePoint], baseline: Baseline, eta: f64) -> (f64, usize) {
    let mut acc = 0.0;
    let mut n = 0;
    for pt in target {
        if let Ok(d) = baseline.distortion(pt, eta) {
            acc += (db(d) - db(pt.distortion)).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        (f64::INFINITY, 0)
    } else {
        (acc / n as f64, n)
    }
}

/// The activity `η` at which the baseline family best matches `target` in
/// mean squared dB gap: a uniform scan followed by golden-section refinement
/// around the best scan point.
pub fn fit_equivalent_eta(target: &[CurvePoint], baseline: Baseline, opts: &FitOptions) -> Result<EtaFit> {
    if target.is_empty() {
        return Err(Error::Config("target curve is empty".into()));
    }
    if !(0.0 < opts.eta_min && opts.eta_min < opts.eta_max && opts.eta_max <= 1.0) || opts.coarse_points < 2 {
        return Err(Error::Config(format!("bad fit range {opts:?}")));
    }
    let step = (opts.eta_max - opts.eta_min) / (opts.coarse_points - 1) as f64;
    let (mut best, mut best_val) = (f64::NAN, f64::INFINITY);
    for i in 0..opts.coarse_points {
        let eta = opts.eta_min + step * i as f64;
        let (v, _) = gap(target, baseline, eta);
        if v < best_val {
            (best, best_val) = (eta, v);
        }
    }
    if !best_val.is_finite() {
        return Err(Error::Infeasible {
            reason: "the baseline has no solution on the target grid for any eta".into(),
            frontier: None,
        });
    }
    let (mut a, mut b) = ((best - step).max(opts.eta_min), (best + step).min(opts.eta_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |e: f64| gap(target, baseline, e).0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > opts.xtol {
        if fc < fd {
            (b, d, fd) = (d, c, fc);
            c = b - g * (b - a);
            fc = f(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let (eta, residual) = [(mid, f(mid)), (best, best_val)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("two candidates");
    Ok(EtaFit {
        eta,
        residual,
        points_used: gap(target, baseline, eta).1,
    })
}

/// Target curve from sweep records, using the RS distortion.
pub fn curve_from_records(records: &[ExperimentRecord]) -> Vec<CurvePoint> {
    records
        .iter()
        .filter_map(|r| {
            let rs = r.rs.as_ref()?;
            Some(CurvePoint {
                alpha_inv: r.point.alpha_inv,
                distortion: rs.distortion,
                power: r.point.power,
                rho: r.point.rho,
                peak_power: match r.scenario {
                    Family::PaprL0 | Family::PaprL1 | Family::RandomTasPapr => r.peak_power,
                    _ => None,
                },
            })
        })
        .collect()
}

pub fn fit_records(records: &[ExperimentRecord], baseline: Baseline, opts: &FitOptions) -> Result<EtaFit> {
    fit_equivalent_eta(&curve_from_records(records), baseline, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tas_curve(eta: f64) -> Vec<CurvePoint> {
        [1.0, 1.5, 2.0, 3.0]
            .iter()
            .map(|&inv| CurvePoint {
                alpha_inv: inv,
                distortion: random_tas_asymptote(1.0 / inv, eta, 0.5, 1.0).unwrap().distortion,
                power: 0.5,
                rho: 1.0,
                peak_power: None,
            })
            .collect()
    }

    #[test]
    fn self_fit_recovers_eta() {
        let fit = fit_equivalent_eta(&tas_curve(0.613), Baseline::RandomTas, &FitOptions::default()).unwrap();
        assert!((fit.eta - 0.613).abs() < 1e-5, "{fit:?}");
        assert!(fit.residual < 1e-9);
        assert_eq!(fit.points_used, 4);
    }

    #[test]
    fn empty_curve_rejected() {
        assert!(fit_equivalent_eta(&[], Baseline::RandomTas, &FitOptions::default()).is_err());
    }
}
