//! Curve records and CSV output.

use std::path::Path;

use serde::Serialize;

use crate::precoder::{MaskMode, Method};
use crate::units::lin_to_db;
use crate::Result;

/// One row of an experiment curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRecord {
    pub experiment: String,
    pub sweep_key: String,
    pub sweep_value: f64,
    pub metric: String,
    pub linear: f64,
    pub db: f64,
    pub stderr: Option<f64>,
    pub method: String,
    pub dl_mask: String,
    pub gamma_req_db: Option<f64>,
    pub seed: u64,
}

/// Shared metadata of the records of one curve.
#[derive(Debug, Clone)]
pub struct CurveMeta {
    pub experiment: String,
    pub sweep_key: String,
    pub method: Option<Method>,
    pub mode: Option<MaskMode>,
    pub gamma_req_db: Option<f64>,
    pub seed: u64,
}

impl CurveMeta {
    pub fn record(
        &self,
        sweep_value: f64,
        metric: &str,
        linear: f64,
        stderr: Option<f64>,
    ) -> CurveRecord {
        CurveRecord {
            experiment: self.experiment.clone(),
            sweep_key: self.sweep_key.clone(),
            sweep_value,
            metric: metric.to_string(),
            linear,
            db: lin_to_db(linear),
            stderr,
            method: self.method.map_or("", |m| m.name()).to_string(),
            dl_mask: match self.mode {
                Some(MaskMode::DlMasked) => "on",
                Some(MaskMode::NonDlMasked) => "off",
                None => "",
            }
            .to_string(),
            gamma_req_db: self.gamma_req_db,
            seed: self.seed,
        }
    }
}

/// Writes records with the fixed header
/// `experiment,sweep_key,sweep_value,metric,linear,db,stderr,method,dl_mask,gamma_req_db,seed`.
pub fn write_csv(path: &Path, records: &[CurveRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if records.is_empty() {
        w.write_record([
            "experiment",
            "sweep_key",
            "sweep_value",
            "metric",
            "linear",
            "db",
            "stderr",
            "method",
            "dl_mask",
            "gamma_req_db",
            "seed",
        ])
        .map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::Error::Solver(format!("CSV output failed: {other:?}")),
    }
}
