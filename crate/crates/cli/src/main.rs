// `!(x > 0.0)` rejects NaN in config checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pekar_core::optimizer::{radial_mass_beyond, solve_free, well_center};

use crate::config::{Experiment, ExperimentConfig, Resolved};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pekar",
    version,
    about = "Batch solver for the Pekar functional with external potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent solves (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 3 if any solve fails to converge.
        #[arg(long)]
        strict: bool,
        /// RNG seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without solving and print derived quantities.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: invalid config: {e}");
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, ExitCode> {
    cfg.validate().map_err(|violations| {
        for v in violations {
            eprintln!("error: {v}");
        }
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn validate(path: &Path) -> ExitCode {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let res = match resolve(&cfg) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let n = res.grid.n();
    println!("ok");
    println!("experiment: {}", cfg.experiment.name());
    println!("config_hash: {}", cfg.hash());
    println!("dx: {}", res.grid.dx());
    println!("radial_h: {}", res.radial.h());
    println!("dk: {}", res.kgrid.dk());
    // ψ, Hψ, V, trial and spectral buffers dominate: about ten reals per cell
    println!("memory_estimate_mb: {:.1}", (n * n * n * 10 * 8) as f64 / 1e6);
    let radii: Vec<f64> = match (&cfg.experiment, cfg.potential.annular_radius()) {
        (Experiment::SweepR { radii }, _) => radii.clone(),
        (_, Some(r)) => vec![r],
        _ => Vec::new(),
    };
    let half = 0.5 * res.grid.length();
    if let Ok(q) = solve_free(&res.radial, &res.solve) {
        println!(
            "free_mass_outside_quarter_box: {:.3e}",
            radial_mass_beyond(&q.psi, 0.5 * half)
        );
        for r in radii {
            let room = half - well_center(r)[0];
            println!(
                "R={r}: potential_margin={:.3} seed_room={room:.3} seed_leak={:.3e}",
                half - (r + 1.0),
                radial_mass_beyond(&q.psi, room)
            );
        }
    }
    ExitCode::SUCCESS
}

fn run(path: &Path, out: Option<PathBuf>, workers: Option<usize>, strict: bool, seed: Option<u64>) -> ExitCode {
    let started = Instant::now();
    let mut cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(o) = out {
        cfg.output = o;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let res = match resolve(&cfg) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let outcome = match run::execute(&cfg, &res, &cfg.output) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = run::write_manifest(&cfg, &cfg.output, &outcome, started) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    if !outcome.converged {
        eprintln!("warning: at least one solve did not converge");
        if strict {
            return ExitCode::from(EXIT_NOT_CONVERGED);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            workers,
            strict,
            seed,
        } => run(&config, out, workers, strict, seed),
        Command::Validate { config } => validate(&config),
    }
}
