//! `prevalence` — surrogate-based prevalence measurement for experiments.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 data error
//! (unreadable or malformed input files).

mod commands;
mod manifest;
mod parse;
mod report_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prevalence_core::calibration::DEFAULT_LOW_CONFIDENCE_FLOOR;
use prevalence_core::sampling::SampleWeightScheme;

use commands::SimulateMode;

const EXIT_VALIDATION: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser)]
#[command(
    name = "prevalence",
    version,
    about = "Measure category prevalence in experiment arms from impression logs,\n\
             one labeled calibration sample, and nothing else."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world with exact ground-truth oracles.
    Synth {
        /// World configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Directory for logs/scores/labels/oracle files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build a calibration table from one labeled PPSWOR sample.
    Calibrate {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Category to calibrate; defaults to the sole category present.
        #[arg(long)]
        category: Option<String>,
        /// Bucketization: equal-width:<B>, quantile:<B>, or explicit:<b0,b1,...>.
        #[arg(long)]
        buckets: String,
        /// Sampling weight scheme.
        #[arg(long, value_parser = parse_scheme, default_value = "impressions")]
        scheme: SampleWeightScheme,
        /// Label budget (sample capacity).
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Buckets with fewer labeled items are flagged low-confidence.
        #[arg(long, default_value_t = DEFAULT_LOW_CONFIDENCE_FLOOR)]
        low_confidence_floor: usize,
        /// Calibration table output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the drawn sample (consumable by `hh`).
        #[arg(long)]
        sample_out: Option<PathBuf>,
    },
    /// Deterministic surrogate estimates per day and arm, with deltas.
    Estimate {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Calibration table written by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
        /// Arm mapping: control=<arm>,treatment=<arm>.
        #[arg(long)]
        arms: String,
        /// Inclusive day window: from..to.
        #[arg(long)]
        days: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo daily deltas via calibrated bucket-prevalence draws.
    Simulate {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        /// Arm mapping: control=<arm>,treatment=<arm>.
        #[arg(long)]
        arms: String,
        /// Inclusive day window: from..to.
        #[arg(long)]
        days: String,
        #[arg(long)]
        seed: u64,
        /// Independent replications.
        #[arg(long, default_value_t = 1)]
        repeats: u64,
        /// exact: per-impression loop; binomial: fast path; fixed: no
        /// bucket-level noise.
        #[arg(long, value_enum, default_value_t = SimulateMode::Binomial)]
        mode: SimulateMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sign test + empirical interval over an `estimate` report's deltas.
    DeltaTest {
        /// Report file produced by `estimate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference Hansen–Hurwitz estimate from a labeled sample file.
    Hh {
        #[arg(long)]
        logs: PathBuf,
        /// Sample file written by `calibrate --sample-out`.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Category to estimate; defaults to the sole category present.
        #[arg(long)]
        category: Option<String>,
        /// `all`, or arm=<arm>[,from=<day>][,to=<day>].
        #[arg(long, default_value = "all")]
        segment: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_scheme(value: &str) -> Result<SampleWeightScheme, String> {
    value.parse().map_err(|e: prevalence_core::Error| e.to_string())
}

fn run(cli: Cli) -> prevalence_core::Result<()> {
    match cli.command {
        Command::Synth { config, out_dir } => commands::cmd_synth(&config, &out_dir),
        Command::Calibrate {
            logs,
            scores,
            labels,
            category,
            buckets,
            scheme,
            n,
            seed,
            low_confidence_floor,
            out,
            sample_out,
        } => {
            let spec = parse::parse_buckets(&buckets)?;
            commands::cmd_calibrate(&commands::CalibrateArgs {
                logs: &logs,
                scores: &scores,
                labels: &labels,
                category: category.as_deref(),
                buckets: spec,
                buckets_raw: buckets,
                scheme,
                n,
                seed,
                low_confidence_floor,
                out: &out,
                sample_out: sample_out.as_deref(),
            })
        }
        Command::Estimate {
            logs,
            scores,
            calibration,
            arms,
            days,
            out,
        } => commands::cmd_estimate(&commands::EstimateArgs {
            logs: &logs,
            scores: &scores,
            calibration: &calibration,
            arms: parse::parse_arms(&arms)?,
            arms_raw: arms,
            days: parse::parse_days(&days)?,
            days_raw: days,
            out: &out,
        }),
        Command::Simulate {
            logs,
            scores,
            calibration,
            arms,
            days,
            seed,
            repeats,
            mode,
            out,
        } => commands::cmd_simulate(&commands::SimulateArgs {
            logs: &logs,
            scores: &scores,
            calibration: &calibration,
            arms: parse::parse_arms(&arms)?,
            arms_raw: arms,
            days: parse::parse_days(&days)?,
            days_raw: days,
            seed,
            repeats,
            mode,
            out: &out,
        }),
        Command::DeltaTest { input, alpha, out } => commands::cmd_delta_test(&input, alpha, &out),
        Command::Hh {
            logs,
            sample,
            labels,
            category,
            segment,
            out,
        } => commands::cmd_hh(&commands::HhArgs {
            logs: &logs,
            sample: &sample,
            labels: &labels,
            category: category.as_deref(),
            segment: parse::parse_segment(&segment)?,
            segment_raw: segment,
            out: &out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(EXIT_DATA)
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
    }
}
