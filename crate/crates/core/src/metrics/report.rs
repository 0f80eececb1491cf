use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores of one trial under one model/vocoder combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: String,
    pub model: String,
    pub pc: f64,
    pub mcd_db: f64,
    pub stoi: f64,
    /// Missing when the reference has no voiced frame.
    pub hnr_db: Option<f64>,
}

/// Trial-averaged scores of one model row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub pc: f64,
    pub mcd_db: f64,
    /// Raw mean score; the table reports it clamped to `[0, 1]`.
    pub stoi: f64,
    pub hnr_db: f64,
    pub trials: Vec<TrialMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl MetricReport {
    pub fn from_trials(model: impl Into<String>, trials: Vec<TrialMetrics>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("a report needs at least one trial"));
        }
        Ok(Self {
            model: model.into(),
            pc: mean(trials.iter().map(|t| t.pc)),
            mcd_db: mean(trials.iter().map(|t| t.mcd_db)),
            stoi: mean(trials.iter().map(|t| t.stoi)),
            hnr_db: mean(trials.iter().filter_map(|t| t.hnr_db)),
            trials,
        })
    }

    pub fn stoi_reported(&self) -> f64 {
        self.stoi.clamp(0.0, 1.0)
    }
}

#[derive(Serialize)]
struct TableRow<'a> {
    model: &'a str,
    pc: f64,
    mcd: f64,
    stoi: f64,
    hnr: f64,
}

/// Writes the summary table with columns `model, pc, mcd, stoi, hnr`.
pub fn write_table_csv<W: Write>(reports: &[MetricReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(TableRow { model: &r.model, pc: r.pc, mcd: r.mcd_db, stoi: r.stoi_reported(), hnr: r.hnr_db })
            .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(())
}

/// Writes one JSON object per trial and model.
pub fn write_trials_jsonl<W: Write>(reports: &[MetricReport], mut out: W) -> Result<()> {
    for t in reports.iter().flat_map(|r| &r.trials) {
        let line = serde_json::to_string(t).map_err(|e| Error::invalid(format!("json: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::invalid(format!("write: {e}")))?;
    }
    Ok(())
}
