//! Report files: per-image CSV, JSON aggregate sidecar and the operating
//! characteristic as `D,P` pairs.

use std::io::Write;

use edgewalk_core::eval::{BenchmarkReport, OperatingCharacteristic};
use serde::Serialize;

/// Aggregates of a report without its per-image records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary<'a, C: Serialize> {
    pub attack: &'a str,
    pub multi_epsilon: bool,
    pub seed: u64,
    pub n: usize,
    pub n_suc: usize,
    pub p_suc: f64,
    pub d_bar: Option<f64>,
    pub d_upp: f64,
    pub p_upp: f64,
    pub mean_grads: f64,
    pub config: &'a C,
}

impl<'a, C: Serialize> ReportSummary<'a, C> {
    pub fn new(report: &'a BenchmarkReport, config: &'a C) -> Self {
        let grads: usize = report.records.iter().map(|r| r.grads_used).sum();
        ReportSummary {
            attack: &report.attack,
            multi_epsilon: report.multi_epsilon,
            seed: report.seed,
            n: report.n,
            n_suc: report.n_suc,
            p_suc: report.p_suc,
            d_bar: report.d_bar,
            d_upp: report.d_upp,
            p_upp: report.p_upp,
            mean_grads: grads as f64 / report.n as f64,
            config,
        }
    }
}

/// `image_id,true_label,attack,grads_used,success,distortion_l2,distortion_linf`;
/// distortions are empty for failures.
pub fn write_records_csv<W: Write>(report: &BenchmarkReport, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for record in &report.records {
        out.serialize(record)?;
    }
    if report.records.is_empty() {
        out.write_record([
            "image_id",
            "true_label",
            "attack",
            "grads_used",
            "success",
            "distortion_l2",
            "distortion_linf",
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_oc_csv<W: Write>(oc: &OperatingCharacteristic, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["D", "P"])?;
    for (d, p) in &oc.points {
        out.serialize((d, p))?;
    }
    out.flush()?;
    Ok(())
}
