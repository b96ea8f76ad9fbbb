//! `otfwi`: full-waveform inversion with optimal-transport misfits.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 numerical
//! failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "otfwi",
    version,
    about = "Acoustic full-waveform inversion with optimal-transport misfits"
)]
struct Cli {
    /// Worker threads for shot/trace loops (default: available cores;
    /// OTFWI_THREADS is the environment fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed recorded in run summaries for provenance.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Verbose logging.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Ricker wavelet to a trace CSV.
    Wavelet {
        #[arg(long)]
        peak_freq: f64,
        /// Defaults to 1.2 / peak frequency.
        #[arg(long)]
        delay: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map a trace to a unit-mass density.
    Normalize {
        /// linear, separate-positive, separate-negative, absolute, square,
        /// exponential, or mixed.
        #[arg(long)]
        kind: String,
        /// Scale parameter (shift / rate); data-driven default when absent.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
        #[arg(long, value_name = "trace.csv")]
        r#in: PathBuf,
        #[arg(long, value_name = "density.csv")]
        out: PathBuf,
    },
    /// Evaluate a misfit between two gather directories.
    Misfit {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-trace adjoint sources as gather CSVs.
        #[arg(long)]
        adjoint_dir: Option<PathBuf>,
    },
    /// Forward-model every shot of a configuration.
    Forward {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an inversion.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Misfit landscape over signal shifts.
    Sensitivity {
        /// l2, w2-linear, w2-square, w2-exp, w2-mixed, or w2-separate.
        #[arg(long)]
        misfit: String,
        /// "two-ricker" or a trace CSV path.
        #[arg(long, default_value = "two-ricker")]
        base: String,
        #[arg(long, default_value_t = -0.6)]
        shift_min: f64,
        #[arg(long, default_value_t = 0.6)]
        shift_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Demonstrate the signed-W1 self-cancellation pathology.
    DemoW1 {
        #[arg(long)]
        out: PathBuf,
    },
    /// Disk-anomaly benchmark comparing misfit configurations.
    Camembert {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated misfit names.
        #[arg(long, default_value = "w2-linear,w2-square")]
        misfits: String,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        /// Grid cells per side (10 m spacing), at most 120.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 8)]
        sources: usize,
        #[arg(long, default_value_t = 96)]
        receivers: usize,
    },
}

fn init_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("OTFWI_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_default_env()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .init();
    init_threads(cli.threads);

    let result = match cli.command {
        Command::Wavelet {
            peak_freq,
            delay,
            amplitude,
            nt,
            dt,
            ref out,
        } => commands::wavelet(peak_freq, delay, amplitude, nt, dt, out),
        Command::Normalize {
            ref kind,
            c,
            epsilon,
            ref r#in,
            ref out,
        } => commands::normalize(kind, c, epsilon, r#in, out),
        Command::Misfit {
            ref kind,
            ref syn,
            ref obs,
            ref out,
            ref adjoint_dir,
        } => commands::misfit(kind, syn, obs, out, adjoint_dir.as_deref()),
        Command::Forward {
            ref model,
            ref config,
            ref out,
        } => commands::forward(model, config, out),
        Command::Invert {
            ref config,
            ref obs,
            ref out,
        } => commands::invert(config, obs, out, cli.seed),
        Command::Sensitivity {
            ref misfit,
            ref base,
            shift_min,
            shift_max,
            steps,
            ref out,
        } => commands::sensitivity(misfit, base, shift_min, shift_max, steps, out, cli.seed),
        Command::DemoW1 { ref out } => commands::demo_w1(out),
        Command::Camembert {
            ref out,
            ref misfits,
            iterations,
            grid,
            sources,
            receivers,
        } => commands::camembert(out, misfits, iterations, grid, sources, receivers, cli.seed),
    };

    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
