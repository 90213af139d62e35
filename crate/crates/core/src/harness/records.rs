use serde::{Deserialize, Serialize};
use std::path::Path;

use super::ExperimentRecord;
use crate::error::{Error, Result};
use crate::replica::db;

pub const CSV_COLUMNS: [&str; 25] = [
    "alpha_inv",
    "eta_target",
    "power_target",
    "rho",
    "scenario",
    "lambda",
    "lambda0",
    "lambda1",
    "P",
    "M",
    "chi",
    "p",
    "D_rs",
    "D_rs_dB",
    "D_rsb",
    "eta_replica",
    "rate_lb",
    "D_lemma2",
    "mc_D_mean",
    "mc_D_stderr",
    "mc_power",
    "mc_eta",
    "n_trials",
    "seed",
    "status",
];

/// One CSV line. Missing values are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub alpha_inv: f64,
    pub eta_target: f64,
    pub power_target: f64,
    pub rho: f64,
    pub scenario: String,
    pub lambda: Option<f64>,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    #[serde(rename = "P")]
    pub peak_power: Option<f64>,
    #[serde(rename = "M")]
    pub order: Option<u32>,
    pub chi: Option<f64>,
    pub p: Option<f64>,
    #[serde(rename = "D_rs")]
    pub d_rs: Option<f64>,
    #[serde(rename = "D_rs_dB")]
    pub d_rs_db: Option<f64>,
    #[serde(rename = "D_rsb")]
    pub d_rsb: Option<f64>,
    pub eta_replica: Option<f64>,
    pub rate_lb: Option<f64>,
    #[serde(rename = "D_lemma2")]
    pub d_lemma2: Option<f64>,
    #[serde(rename = "mc_D_mean")]
    pub mc_d_mean: Option<f64>,
    #[serde(rename = "mc_D_stderr")]
    pub mc_d_stderr: Option<f64>,
    pub mc_power: Option<f64>,
    pub mc_eta: Option<f64>,
    pub n_trials: Option<usize>,
    pub seed: Option<u64>,
    pub status: String,
}

impl From<&ExperimentRecord> for CsvRow {
    fn from(r: &ExperimentRecord) -> Self {
        let rs = r.rs.as_ref();
        let mc = r.mc.as_ref();
        CsvRow {
            alpha_inv: r.point.alpha_inv,
            eta_target: r.point.eta,
            power_target: r.point.power,
            rho: r.point.rho,
            scenario: r.scenario.name().into(),
            lambda: r.penalty.map(|w| w.lambda2),
            lambda0: r.penalty.map(|w| w.lambda0),
            lambda1: r.penalty.map(|w| w.lambda1),
            peak_power: r.peak_power,
            order: r.order,
            chi: rs.map(|s| s.chi),
            p: rs.map(|s| s.p),
            d_rs: rs.map(|s| s.distortion),
            d_rs_db: rs.map(|s| db(s.distortion)),
            d_rsb: r.rsb.as_ref().map(|s| s.distortion),
            eta_replica: rs.map(|s| s.eta),
            rate_lb: r.rate_lb,
            d_lemma2: r.d_lemma2,
            mc_d_mean: mc.map(|m| m.d_mean),
            mc_d_stderr: mc.map(|m| m.d_stderr),
            mc_power: mc.map(|m| m.power),
            mc_eta: mc.map(|m| m.eta),
            n_trials: mc.map(|m| m.n_trials),
            seed: mc.map(|m| m.seed),
            status: r.status.clone(),
        }
    }
}

/// Writes records as CSV to any sink. An empty slice gives the header only.
pub fn write_csv<W: std::io::Write>(records: &[ExperimentRecord], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Config(format!(
            "{}: unexpected CSV header {header:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_sweep, Family, GridPoint, McConfig, ScenarioTemplate, SweepConfig, UserRounding};

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, CSV_COLUMNS.join(",") + "\n");
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_db_column() {
        let mut c = SweepConfig::new(
            ScenarioTemplate::new(Family::L1),
            vec![GridPoint::new(2.0, 0.7, 0.5), GridPoint::new(1.0, 0.9, 0.5)],
        );
        c.mc = Some(McConfig {
            n_channels: 3,
            n_tx: 8,
            seed: 11,
            users: UserRounding::Exact,
        });
        let recs = run_sweep(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv(&recs, &path).unwrap();
        let rows = read_csv(&path).unwrap();
        let expect: Vec<CsvRow> = recs.iter().map(CsvRow::from).collect();
        assert_eq!(rows, expect);
        for r in &rows {
            let (d, d_db) = (r.d_rs.expect(&r.status), r.d_rs_db.unwrap());
            assert!((d_db - 10.0 * d.log10()).abs() < 1e-12);
            assert!(r.d_rsb.is_none() && r.order.is_none());
        }
    }

    #[test]
    fn io_error_names_the_path() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
