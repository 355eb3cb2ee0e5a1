//! Iteration records and run summaries.

use std::io::Write;

use anyhow::Result;
use ialm_core::rates::{classify, RateClass};
use ialm_core::{IterationRecord, SolveReport};
use serde::{Deserialize, Serialize};

use crate::config::Format;

/// Vectors are logged when `n + m` is at most this.
pub const VECTOR_LOG_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub k: usize,
    pub mu: f64,
    pub eps: f64,
    #[serde(rename = "V")]
    pub infeasibility: f64,
    #[serde(rename = "Theta")]
    pub residual: f64,
    pub f: f64,
    pub g: f64,
    pub inner_iters: usize,
    pub inner_exit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hat: Option<Vec<f64>>,
}

impl RecordRow {
    pub fn new(rec: &IterationRecord, vectors: bool) -> Self {
        let v = |d: &nalgebra::DVector<f64>| vectors.then(|| d.as_slice().to_vec());
        Self {
            k: rec.k,
            mu: rec.mu,
            eps: rec.eps,
            infeasibility: rec.infeasibility,
            residual: rec.residual,
            f: rec.f_value,
            g: rec.g_value,
            inner_iters: rec.inner_iters,
            inner_exit: format!("{:?}", rec.inner_exit).to_lowercase(),
            x: v(&rec.x),
            z: v(&rec.z),
            y: v(&rec.y),
            y_hat: v(&rec.y_hat),
        }
    }
}

/// Streams records, flushing after each one.
pub struct RecordWriter<W: Write> {
    out: W,
    format: Format,
    header_written: bool,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W, format: Format) -> Self {
        Self {
            out,
            format,
            header_written: false,
        }
    }

    pub fn write(&mut self, row: &RecordRow) -> Result<()> {
        match self.format {
            Format::Jsonl => {
                serde_json::to_writer(&mut self.out, row)?;
                writeln!(self.out)?;
            }
            Format::Csv => {
                if !self.header_written {
                    writeln!(self.out, "k,mu,eps,V,Theta,f,g,inner_iters,inner_exit,x,z,y,y_hat")?;
                    self.header_written = true;
                }
                let join = |v: &Option<Vec<f64>>| {
                    v.as_ref()
                        .map(|v| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "))
                        .unwrap_or_default()
                };
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut self.out);
                w.write_record([
                    row.k.to_string(),
                    row.mu.to_string(),
                    row.eps.to_string(),
                    row.infeasibility.to_string(),
                    row.residual.to_string(),
                    row.f.to_string(),
                    row.g.to_string(),
                    row.inner_iters.to_string(),
                    row.inner_exit.clone(),
                    join(&row.x),
                    join(&row.z),
                    join(&row.y),
                    join(&row.y_hat),
                ])?;
                w.flush()?;
            }
        }
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub outer_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub q_factors: Vec<f64>,
    pub classification: Option<String>,
    pub final_theta: Option<f64>,
    pub final_v: Option<f64>,
    pub domain_dist: f64,
}

pub fn classification(residuals: &[f64]) -> Option<RateClass> {
    classify(residuals).ok().map(|e| e.class)
}

impl Summary {
    pub fn new(report: &SolveReport, vectors: bool) -> Self {
        let last = report.records.last();
        Self {
            status: report.status.as_str().to_string(),
            outer_iterations: report.records.len(),
            x: vectors.then(|| report.x.as_slice().to_vec()),
            y: vectors.then(|| report.y.as_slice().to_vec()),
            q_factors: report.q_factors.clone(),
            classification: classification(&report.residuals()).map(|c| c.to_string()),
            final_theta: last.map(|r| r.residual),
            final_v: last.map(|r| r.infeasibility),
            domain_dist: report.domain_dist,
        }
    }
}
