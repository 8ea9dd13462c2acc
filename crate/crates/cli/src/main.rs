//! Command-line front end: simulate responses and intensity records, recover
//! interferometric matrices, form images, verify medium statistics, and run
//! packaged experiment presets.

mod commands;
mod presets;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "holoarray",
    version,
    about = "Array imaging of point scatterers with intensity-only data recovery"
)]
struct Cli {
    /// Worker threads for parallel kernels (0 = all cores).
    #[arg(long, global = true, env = "HOLOARRAY_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the array response and intensity measurement records.
    Simulate {
        /// Experiment configuration document (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's [run] out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the [run] seed.
        #[arg(long, env = "HOLOARRAY_SEED")]
        seed: Option<u64>,
        /// Receiver whose intensity records are written (1-based; default:
        /// the center element).
        #[arg(long)]
        receiver: Option<usize>,
        /// Write records for every receiver (needed for full-matrix
        /// recovery).
        #[arg(long)]
        all_receivers: bool,
        /// Additive measurement noise on the fields, in dB SNR; off when
        /// absent.
        #[arg(long)]
        snr_db: Option<f64>,
        /// Also dump the sampled fluctuation field (random-phase media).
        #[arg(long)]
        dump_field: bool,
    },
    /// Rebuild interferometric matrices from recorded intensities.
    Recover {
        /// Intensity records CSV produced by `simulate`.
        #[arg(long)]
        records: PathBuf,
        /// Configuration document that produced the records.
        #[arg(long)]
        config: PathBuf,
        /// Also assemble the full matrix from all receivers.
        #[arg(long)]
        full_m: bool,
        /// Ground-truth response for a recovery error report.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Form an image from a response or a recovered matrix.
    Image {
        #[arg(long)]
        config: PathBuf,
        /// Functional: km, interf, srint, cint, music or signal.
        #[arg(long)]
        functional: String,
        /// Response file (km, cint, music, signal; interf/srint via a
        /// receiver row).
        #[arg(long)]
        response: Option<PathBuf>,
        /// Recovered matrix file (interf, srint).
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Coherence length threshold, e.g. "125 lambda0" (srint, cint).
        #[arg(long)]
        xd: Option<String>,
        /// Coherence frequency threshold, e.g. "0.024 omega0" or "14.4 THz"
        /// (srint, cint).
        #[arg(long)]
        omegad: Option<String>,
        /// Receiver for single-receiver functionals (1-based; default: the
        /// center element).
        #[arg(long)]
        receiver: Option<usize>,
        /// Signal-space rank for music/signal.
        #[arg(long)]
        m_est: Option<usize>,
        /// Subspace pairing: transpose (default) or conjugate.
        #[arg(long, default_value = "transpose")]
        pairing: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo verification of the random-medium moment formulas.
    Moments {
        /// Realization count (at least 100).
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, env = "HOLOARRAY_SEED", default_value_t = 7)]
        seed: u64,
        /// Fluctuation strength in units of the characteristic strength.
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a packaged experiment preset.
    Experiment {
        /// Preset name; `list` prints the catalog.
        preset: String,
        /// Paper-scale geometry instead of the desk-scale fast variant.
        #[arg(long)]
        full: bool,
        #[arg(long, env = "HOLOARRAY_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn exit_code_for(err: &holoarray::Error) -> u8 {
    use holoarray::Error::*;
    match err {
        Config(_) | Validation(_) | Index(_) | Dimension(_) | Format(_)
        | MissingMeasurements(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        // Ignore failure: the pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let result = match cli.command {
        Command::Simulate { config, out, seed, receiver, all_receivers, snr_db, dump_field } => {
            commands::simulate::run(
                &config,
                out.as_deref(),
                seed,
                receiver,
                all_receivers,
                snr_db,
                dump_field,
            )
        }
        Command::Recover { records, config, full_m, truth, out } => {
            commands::recover::run(&records, &config, full_m, truth.as_deref(), out.as_deref())
        }
        Command::Image {
            config,
            functional,
            response,
            matrix,
            xd,
            omegad,
            receiver,
            m_est,
            pairing,
            out,
        } => commands::image::run(commands::image::Args {
            config,
            functional,
            response,
            matrix,
            xd,
            omegad,
            receiver,
            m_est,
            pairing,
            out,
        }),
        Command::Moments { n, seed, epsilon, out } => {
            commands::moments::run(n, seed, epsilon, &out)
        }
        Command::Experiment { preset, full, seed, out } => {
            commands::experiment::run(&preset, full, seed, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&e))
        }
    }
}
