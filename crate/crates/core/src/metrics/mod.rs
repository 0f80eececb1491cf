//! Objective scores comparing predicted and reference spectrograms and
//! waveforms, and the summary table writers.

mod cepstrum;
mod correlation;
mod hnr;
mod report;

pub use cepstrum::{mcd, mel_cepstrum, MCD_COEFFICIENTS};
pub use correlation::{pearson, pearson_per_bin, stoi_simple};
pub use hnr::{hnr, hnr_frames, HNR_CAP_DB};
pub use report::{write_table_csv, write_trials_jsonl, MetricReport, TrialMetrics};
