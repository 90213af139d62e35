//! Experiment orchestration: grid sweeps comparing replica predictions with
//! Monte Carlo averages, CSV output and equivalent-η fits.

mod config;
mod fit;
mod records;

pub use config::{
    Family, GridPoint, McConfig, Outputs, ReplicaConfig, ScenarioTemplate, SweepConfig, UserRounding, SPEC_VERSION,
};
pub use fit::{curve_from_records, fit_equivalent_eta, fit_records, Baseline, CurvePoint, EtaFit, FitOptions};
pub use records::{emit_csv, read_csv, write_csv, CsvRow, CSV_COLUMNS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::finite::{self, CVector, ConvexOptions, PrecodeOutput, MAX_DISCRETE_CANDIDATES, MAX_L0_ANTENNAS};
use crate::penalties::{PenaltySpec, SupportSpec};
use crate::replica::{
    self, heuristic_rate, lemma2_bound, rate_lower_bound, solve_rs_scenario, solve_rsb1, tune, RsOptions, RsSolution,
    RsbSolution, TuneOptions,
};
use crate::rmt::{complex_normals, sample_channel, CMatrix, ChannelSpec};

/// Salt separating the antenna-subset stream from the channel stream of a trial.
const SUBSET_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub d_mean: f64,
    pub d_stderr: f64,
    pub power: f64,
    pub eta: f64,
    /// Trials that produced an output.
    pub n_trials: usize,
    pub n_failed: usize,
    /// Trials whose iterative solver hit its iteration cap.
    pub n_unconverged: usize,
    pub n_tx: usize,
    pub n_users: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub point: GridPoint,
    pub scenario: Family,
    pub order: Option<u32>,
    pub peak_power: Option<f64>,
    /// Load the replica was evaluated at (`K/N` when users were rounded).
    pub load: f64,
    /// Weights of the precoder actually run. For random TAS this is the
    /// quadratic weight on the `N`-antenna scale.
    pub penalty: Option<PenaltySpec>,
    pub rs: Option<RsSolution>,
    pub rsb: Option<RsbSolution>,
    pub rate_lb: Option<f64>,
    pub heuristic_rate: Option<f64>,
    pub d_lemma2: Option<f64>,
    pub mc: Option<McSummary>,
    /// `ok`, or the failures met at this point separated by `; `.
    pub status: String,
    pub replica_seconds: f64,
    pub mc_seconds: f64,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Runs every grid point in order. Per-point failures land in the record's
/// status and do not stop the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| sweep(config))
        }
        None => sweep(config),
    }
}

fn sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    config.grid.iter().map(|pt| run_point(config, pt)).collect()
}

/// Runs the sweep and writes the configured outputs.
pub fn run_and_write(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    let records = run_sweep(config)?;
    if let Some(path) = &config.outputs.csv {
        emit_csv(&records, path)?;
    }
    if let Some(path) = &config.outputs.json {
        let text = serde_json::to_string_pretty(&records)?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(records)
}

/// The replica half of one grid point.
struct Prediction {
    penalty: PenaltySpec,
    rs: RsSolution,
    /// Quadratic weight of the random-TAS baselines on the selected subset.
    subset_lambda: Option<f64>,
}

fn predict(tpl: &ScenarioTemplate, pt: &GridPoint, load: f64) -> Result<Prediction> {
    let opts = TuneOptions {
        allow_negative_quadratic: tpl.allow_negative_quadratic,
        ..TuneOptions::default()
    };
    let base = tpl.spec(pt, load)?;
    match tpl.family {
        Family::Rzf => {
            let (lambda, rs) = replica::rzf_asymptote(load, pt.power, pt.rho)?;
            Ok(Prediction {
                penalty: PenaltySpec::ridge(lambda),
                rs,
                subset_lambda: None,
            })
        }
        Family::RandomTas | Family::RandomTasPapr => {
            // the baseline is a unit-gain system at load α/η, see replica::baselines
            let (lambda, rs) = match tpl.family {
                Family::RandomTas => replica::rzf_asymptote(load / pt.eta, pt.power, pt.rho)?,
                _ => {
                    let peak = tpl.peak_power(pt).expect("validated");
                    let b = replica::ScenarioSpec::new(
                        PenaltySpec::default(),
                        SupportSpec::Disk {
                            peak_power: pt.eta * peak,
                        },
                        load / pt.eta,
                        pt.rho,
                    );
                    let t = tune(&b, crate::penalties::Scenario::PaprL0, pt.power, 1.0, &opts)?;
                    (t.penalty.lambda2, t.solution)
                }
            };
            let rs = RsSolution { eta: pt.eta, ..rs };
            Ok(Prediction {
                penalty: PenaltySpec::ridge(pt.eta * lambda),
                rs,
                subset_lambda: Some(pt.eta * lambda),
            })
        }
        _ => {
            let family = tpl.family.scenario().expect("GLSE family");
            if let Some(w) = tpl.weights {
                let spec = base.with_penalty(w);
                let rs_opts = RsOptions {
                    allow_negative_quadratic: tpl.allow_negative_quadratic,
                    ..RsOptions::default()
                };
                let rs = solve_rs_scenario(&spec, &rs_opts)?;
                return Ok(Prediction {
                    penalty: w,
                    rs,
                    subset_lambda: None,
                });
            }
            let t = tune(&base, family, pt.power, pt.eta, &opts)?;
            Ok(Prediction {
                penalty: t.penalty,
                rs: t.solution,
                subset_lambda: None,
            })
        }
    }
}

fn run_point(config: &SweepConfig, pt: &GridPoint) -> Result<ExperimentRecord> {
    let tpl = &config.scenario;
    let mut status: Vec<String> = Vec::new();
    let mc_cfg = config.mc.as_ref().filter(|m| m.enabled());
    let n_users = mc_cfg.map(|m| m.n_users(pt.alpha_inv)).transpose()?;
    let load = match (mc_cfg, n_users) {
        (Some(m), Some(k)) if m.users == UserRounding::Nearest => k as f64 / m.n_tx as f64,
        _ => 1.0 / pt.alpha_inv,
    };
    let support = tpl.support(pt)?;
    let mut rec = ExperimentRecord {
        point: pt.clone(),
        scenario: tpl.family,
        order: support.order(),
        peak_power: tpl.peak_power(pt),
        load,
        penalty: None,
        rs: None,
        rsb: None,
        rate_lb: None,
        heuristic_rate: None,
        d_lemma2: None,
        mc: None,
        status: String::new(),
        replica_seconds: 0.0,
        mc_seconds: 0.0,
    };

    let t0 = Instant::now();
    let pred = match predict(tpl, pt, load) {
        Ok(p) => Some(p),
        Err(e) => {
            status.push(format!("replica: {e}"));
            None
        }
    };
    if let Some(p) = &pred {
        rec.penalty = Some(p.penalty);
        rec.rs = Some(p.rs.clone());
        rec.rate_lb = rate_lower_bound(pt.rho, p.rs.distortion, pt.noise_power).ok();
        rec.heuristic_rate = heuristic_rate(pt.rho, p.rs.p, p.rs.distortion).ok();
        if let SupportSpec::MPskZero { order, peak_power } = support {
            rec.d_lemma2 = lemma2_bound(load, pt.rho, pt.eta, peak_power, order).ok();
            if config.replica.rsb {
                let spec = tpl.spec(pt, load)?.with_penalty(p.penalty);
                match solve_rsb1(&spec, &config.replica.rsb_options) {
                    Ok(s) => rec.rsb = Some(s),
                    Err(e) => status.push(format!("rsb: {e}")),
                }
            }
        }
    }
    rec.replica_seconds = t0.elapsed().as_secs_f64();

    if let (Some(mc), Some(k), Some(p)) = (mc_cfg, n_users, &pred) {
        let t1 = Instant::now();
        match monte_carlo(tpl, pt, &support, p, mc, k) {
            Ok(s) => {
                if s.n_failed > 0 {
                    status.push(format!("mc: {} of {} trials failed", s.n_failed, mc.n_channels));
                }
                if s.n_unconverged > 0 {
                    status.push(format!("mc: {} trials hit the iteration cap", s.n_unconverged));
                }
                rec.mc = Some(s);
            }
            Err(e) => status.push(format!("mc: {e}")),
        }
        rec.mc_seconds = t1.elapsed().as_secs_f64();
    }
    rec.status = if status.is_empty() {
        "ok".into()
    } else {
        status.join("; ")
    };
    Ok(rec)
}

/// One channel and data draw. The channel uses `seed` directly; the data
/// symbols come from stream 1 of the same key.
pub fn draw_trial(
    n_tx: usize,
    n_users: usize,
    pathloss: &crate::rmt::PathLoss,
    seed: u64,
) -> Result<(CMatrix, CVector)> {
    let h = sample_channel(&ChannelSpec::new(n_tx, n_users, seed).with_pathloss(pathloss.clone()))?.matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let s = CVector::from_vec(complex_normals(&mut rng, n_users, 1.0));
    Ok((h, s))
}

fn precode(
    tpl: &ScenarioTemplate,
    pt: &GridPoint,
    support: &SupportSpec,
    pred: &Prediction,
    h: &CMatrix,
    s: &CVector,
    seed: u64,
) -> Result<PrecodeOutput> {
    let n = h.ncols();
    let w = &pred.penalty;
    match tpl.family {
        Family::Rzf => finite::rzf(h, s, pt.rho, w.lambda2),
        Family::RandomTas | Family::RandomTasPapr => {
            let l = ((pt.eta * n as f64).round() as usize).clamp(1, n);
            let idx = finite::tas_random(n, l, seed ^ SUBSET_SALT)?;
            let lambda = pred.subset_lambda.expect("baseline weight");
            if tpl.family == Family::RandomTas {
                return finite::rzf_on_subset(h, s, pt.rho, lambda, &idx);
            }
            let peak = tpl.peak_power(pt).expect("validated");
            let sub = finite::select_columns(h, &idx);
            let out = finite::glse_convex(
                &sub,
                s,
                pt.rho,
                &PenaltySpec::ridge(lambda),
                &SupportSpec::Disk { peak_power: peak },
                &ConvexOptions::default(),
            )?;
            let x = finite::embed(&out.x, &idx, n);
            let (objective, distortion, power, activity) =
                finite::evaluate(h, s, pt.rho, &PenaltySpec::ridge(lambda), &x);
            Ok(PrecodeOutput {
                x: x.iter().copied().collect(),
                objective,
                distortion,
                power,
                activity,
                iterations: out.iterations,
                converged: out.converged,
            })
        }
        Family::Mpsk => {
            let count = (support.order().unwrap_or(0) as f64 + 1.0).powi(n as i32);
            if count > MAX_DISCRETE_CANDIDATES {
                return Err(Error::Guard(format!(
                    "no finite M-PSK solver for N = {n} beyond exhaustive search"
                )));
            }
            finite::glse_exhaustive_discrete(h, s, pt.rho, w.lambda2, support, None)
        }
        Family::ConstantEnvelope => Err(Error::Config("no finite-size constant-envelope solver".into())),
        _ if w.lambda0 > 0.0 => {
            if *support != SupportSpec::FullComplex || n > MAX_L0_ANTENNAS {
                return Err(Error::Guard(format!(
                    "l0 weights need exhaustive search, available on the full plane for N <= {MAX_L0_ANTENNAS}"
                )));
            }
            finite::glse_exhaustive_l0(h, s, pt.rho, w)
        }
        _ if w.lambda2 < 0.0 => Err(Error::Domain(format!(
            "quadratic weight {} < 0 leaves the finite-size objective unbounded below",
            w.lambda2
        ))),
        _ => finite::glse_convex(h, s, pt.rho, w, support, &ConvexOptions::default()),
    }
}

fn monte_carlo(
    tpl: &ScenarioTemplate,
    pt: &GridPoint,
    support: &SupportSpec,
    pred: &Prediction,
    mc: &McConfig,
    n_users: usize,
) -> Result<McSummary> {
    // Fail fast on unsupported combinations rather than once per trial.
    let (h, s) = draw_trial(mc.n_tx, n_users, &tpl.pathloss_atoms, mc.seed)?;
    precode(tpl, pt, support, pred, &h, &s, mc.seed)?;

    let outcomes: Vec<Option<PrecodeOutput>> = (0..mc.n_channels as u64)
        .into_par_iter()
        .map(|i| {
            let seed = mc.seed.wrapping_add(i);
            let (h, s) = draw_trial(mc.n_tx, n_users, &tpl.pathloss_atoms, seed).ok()?;
            precode(tpl, pt, support, pred, &h, &s, seed).ok()
        })
        .collect();
    // sequential reduction in trial order keeps the sums independent of threading
    let ok: Vec<&PrecodeOutput> = outcomes.iter().flatten().collect();
    let n = ok.len();
    if n == 0 {
        return Err(Error::Degenerate("every Monte Carlo trial failed".into()));
    }
    let mean = |f: &dyn Fn(&PrecodeOutput) -> f64| ok.iter().map(|o| f(o)).sum::<f64>() / n as f64;
    let d_mean = mean(&|o| o.distortion);
    let var = if n > 1 {
        ok.iter().map(|o| (o.distortion - d_mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(McSummary {
        d_mean,
        d_stderr: (var / n as f64).sqrt(),
        power: mean(&|o| o.power),
        eta: mean(&|o| o.activity),
        n_trials: n,
        n_failed: mc.n_channels - n,
        n_unconverged: ok.iter().filter(|o| !o.converged).count(),
        n_tx: mc.n_tx,
        n_users,
        seed: mc.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1_config() -> SweepConfig {
        let mut c = SweepConfig::new(ScenarioTemplate::new(Family::L1), vec![GridPoint::new(2.0, 0.7, 0.5)]);
        c.mc = Some(McConfig {
            n_channels: 6,
            n_tx: 16,
            seed: 7,
            users: UserRounding::Exact,
        });
        c
    }

    #[test]
    fn replica_only_without_mc() {
        let mut c = l1_config();
        c.mc = None;
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].mc.is_none() && r[0].rs.is_some() && r[0].is_ok());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut c = l1_config();
        c.threads = Some(1);
        let a = run_sweep(&c).unwrap();
        c.threads = Some(3);
        let b = run_sweep(&c).unwrap();
        assert_eq!(a[0].mc, b[0].mc);
    }

    #[test]
    fn failures_stay_in_the_row() {
        let mut c = SweepConfig::new(ScenarioTemplate::new(Family::L0), vec![GridPoint::new(2.0, 0.7, 0.5)]);
        c.mc = Some(McConfig {
            n_channels: 2,
            n_tx: 32,
            seed: 1,
            users: UserRounding::Exact,
        });
        let r = run_sweep(&c).unwrap();
        assert!(r[0].rs.is_some());
        assert!(r[0].mc.is_none());
        assert!(r[0].status.starts_with("mc: "), "{}", r[0].status);
    }

    #[test]
    fn non_integral_users_rejected_unless_rounding() {
        let mut c = l1_config();
        c.grid[0].alpha_inv = 3.0;
        assert!(matches!(run_sweep(&c), Err(Error::Config(_))));
        c.mc.as_mut().unwrap().users = UserRounding::Nearest;
        c.mc.as_mut().unwrap().n_channels = 1;
        let r = run_sweep(&c).unwrap();
        assert_eq!(r[0].mc.as_ref().unwrap().n_users, 5);
        assert!((r[0].load - 5.0 / 16.0).abs() < 1e-15);
    }
}
