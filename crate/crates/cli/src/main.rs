use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neurovox_core::pipeline::{Pipeline, PipelineConfig};
use neurovox_core::Error;

#[derive(Parser, Debug)]
#[command(name = "neurovox", version, about = "Speech reconstruction from multi-channel neural recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the root seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic trials.
    SynthData(Common),
    /// Filter and z-score the neural data; report alignment and voice activity.
    Preprocess(Common),
    /// Extract feature matrices and reference mel spectrograms.
    Features(Common),
    /// Cross-validated training of the autoencoder, predictor and linear baseline.
    Train(Common),
    /// Predict mel spectrograms of every trial with its held-out fold's models.
    Predict(Common),
    /// Vocode predictions with Griffin-Lim and IHPR.
    Vocode(Common),
    /// Score every model and vocoder and write the results table.
    Evaluate(Common),
    /// Run every stage in order.
    Run(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SynthData(c)
            | Command::Preprocess(c)
            | Command::Features(c)
            | Command::Train(c)
            | Command::Predict(c)
            | Command::Vocode(c)
            | Command::Evaluate(c)
            | Command::Run(c) => c,
        }
    }
}

fn load(common: &Common) -> Result<Pipeline, Error> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Pipeline::new(cfg)
}

fn print_reports(reports: &[neurovox_core::MetricReport]) {
    println!("{:<24} {:>8} {:>8} {:>8} {:>8}", "model", "pc", "mcd", "stoi", "hnr");
    for r in reports {
        println!("{:<24} {:>8.4} {:>8.3} {:>8.4} {:>8.2}", r.model, r.pc, r.mcd_db, r.stoi_reported(), r.hnr_db);
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    let pipeline = load(command.common())?;
    let out = pipeline.config.out_dir.display().to_string();
    match command {
        Command::SynthData(_) => {
            let m = pipeline.synth_data()?;
            let clipped: usize = m.clipped_samples.iter().sum();
            println!("wrote {} trials to {out}/data ({clipped} clipped audio samples)", m.trials);
        }
        Command::Preprocess(_) => {
            let reports = pipeline.preprocess()?;
            println!("preprocessed {} trials into {out}/preprocessed", reports.len());
        }
        Command::Features(_) => {
            let frames = pipeline.features()?;
            println!("extracted {} frames over {} trials into {out}/features", frames.iter().sum::<usize>(), frames.len());
        }
        Command::Train(_) => {
            for f in pipeline.train()? {
                println!(
                    "fold {:>2}: held out {:?}, predictor loss {:.4} -> {:.4}",
                    f.fold, f.held_out_trials, f.predictor_first_loss, f.predictor_last_loss
                );
            }
        }
        Command::Predict(_) => {
            pipeline.predict()?;
            println!("wrote predictions to {out}/predictions");
        }
        Command::Vocode(_) => {
            let summaries = pipeline.vocode()?;
            let clipped: usize = summaries.iter().map(|s| s.clipped_griffin_lim + s.clipped_ihpr).sum();
            println!("vocoded {} predictions into {out}/audio ({clipped} clipped samples)", summaries.len());
        }
        Command::Evaluate(_) => print_reports(&pipeline.evaluate()?),
        Command::Run(_) => print_reports(&pipeline.run()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
