use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

use glse::harness::{
    run_sweep, write_csv, ExperimentRecord, Family, GridPoint, McConfig, ScenarioTemplate, SweepConfig, UserRounding,
};
use glse::penalties::PenaltySpec;
use glse::replica::{lemma2_bound, lemma2_ratio, rate_lower_bound};
use glse::{Error, Result};

#[derive(Parser)]
#[command(
    name = "glse",
    version,
    about = "GLSE precoding: replica predictions and Monte Carlo checks"
)]
struct Cli {
    /// Exit with status 3 when a solver does not converge or a grid point fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the RS (and for mpsk the one-step RSB) system at one point.
    Replica(PointArgs),
    /// Tune the weights for the power and activity targets.
    Tune(PointArgs),
    /// Run one Monte Carlo batch at one point.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 64)]
        n_tx: usize,
        #[arg(long, default_value_t = 100)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Round K = N/alpha_inv to the nearest integer.
        #[arg(long)]
        round_users: bool,
    },
    /// Run a TOML sweep config and write CSV.
    Sweep {
        config: PathBuf,
        /// CSV destination; overrides outputs.csv, `-` for stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Lower bound on the M-PSK distortion, and the rate bound for a given distortion.
    Bound {
        #[arg(long)]
        alpha_inv: f64,
        #[arg(long)]
        eta: f64,
        /// Peak power of the constellation.
        #[arg(long)]
        peak_power: f64,
        #[arg(long, default_value_t = 2)]
        order: u32,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_power: f64,
        /// Distortion to turn into a rate lower bound.
        #[arg(long)]
        distortion: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct PointArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    alpha_inv: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Average power per antenna.
    #[arg(long)]
    power: f64,
    #[arg(long)]
    papr_db: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_power: f64,
    /// Constellation order for mpsk.
    #[arg(long)]
    order: Option<u32>,
    /// Fixed quadratic weight; together with --lambda0/--lambda1 skips tuning.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    allow_negative_quadratic: bool,
    /// Skip the one-step RSB solve for mpsk.
    #[arg(long)]
    no_rsb: bool,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown family {s:?}"))
}

impl PointArgs {
    fn config(&self) -> SweepConfig {
        let mut tpl = ScenarioTemplate::new(self.family);
        tpl.order = self.order;
        tpl.allow_negative_quadratic = self.allow_negative_quadratic;
        if self.lambda.is_some() || self.lambda0.is_some() || self.lambda1.is_some() {
            tpl.weights = Some(PenaltySpec::new(
                self.lambda.unwrap_or(0.0),
                self.lambda0.unwrap_or(0.0),
                self.lambda1.unwrap_or(0.0),
            ));
        }
        let pt = GridPoint {
            papr_db: self.papr_db,
            rho: self.rho,
            noise_power: self.noise_power,
            ..GridPoint::new(self.alpha_inv, self.eta, self.power)
        };
        let mut c = SweepConfig::new(tpl, vec![pt]);
        c.replica.rsb = !self.no_rsb;
        c
    }
}

#[derive(Serialize)]
struct TuneOut<'a> {
    penalty: &'a Option<PenaltySpec>,
    solution: &'a Option<glse::replica::RsSolution>,
    status: &'a str,
}

#[derive(Serialize)]
struct BoundOut {
    lemma2_ratio: f64,
    d_lemma2: f64,
    d_lemma2_db: f64,
    rate_lb: Option<f64>,
}

fn one(c: &SweepConfig) -> Result<ExperimentRecord> {
    Ok(run_sweep(c)?.remove(0))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

/// `Ok(false)` when a point failed.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Replica(p) => {
            let r = one(&p.config())?;
            print_json(&r)?;
            Ok(r.is_ok())
        }
        Cmd::Tune(p) => {
            let mut c = p.config();
            c.scenario.weights = None;
            c.replica.rsb = false;
            let r = one(&c)?;
            print_json(&TuneOut {
                penalty: &r.penalty,
                solution: &r.rs,
                status: &r.status,
            })?;
            Ok(r.is_ok())
        }
        Cmd::Simulate {
            point,
            n_tx,
            channels,
            seed,
            round_users,
        } => {
            let mut c = point.config();
            c.replica.rsb = false;
            c.mc = Some(McConfig {
                n_channels: *channels,
                n_tx: *n_tx,
                seed: *seed,
                users: if *round_users {
                    UserRounding::Nearest
                } else {
                    UserRounding::Exact
                },
            });
            let r = one(&c)?;
            print_json(&r)?;
            Ok(r.is_ok())
        }
        Cmd::Sweep { config, csv, threads } => {
            let mut c = SweepConfig::load(config)?;
            if threads.is_some() {
                c.threads = *threads;
            }
            let records = run_sweep(&c)?;
            let dest = csv.clone().or(c.outputs.csv.clone());
            match dest {
                Some(p) if p.as_os_str() != "-" => glse::harness::emit_csv(&records, &p)?,
                _ => write_csv(&records, std::io::stdout().lock())?,
            }
            if let Some(p) = &c.outputs.json {
                std::fs::write(p, serde_json::to_string_pretty(&records)?).map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })?;
            }
            Ok(records.iter().all(ExperimentRecord::is_ok))
        }
        Cmd::Bound {
            alpha_inv,
            eta,
            peak_power,
            order,
            rho,
            noise_power,
            distortion,
        } => {
            let load = 1.0 / alpha_inv;
            let d = lemma2_bound(load, *rho, *eta, *peak_power, *order)?;
            let rate_lb = distortion
                .map(|x| rate_lower_bound(*rho, x, *noise_power))
                .transpose()?;
            print_json(&BoundOut {
                lemma2_ratio: lemma2_ratio(load, *order),
                d_lemma2: d,
                d_lemma2_db: 10.0 * d.log10(),
                rate_lb,
            })?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.strict => ExitCode::from(3),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glse: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_convergence() && cli.strict {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
