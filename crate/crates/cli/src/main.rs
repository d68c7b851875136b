use clap::{Parser, Subcommand};
use dirpart_cli::config::OneOrMany;
use dirpart_cli::presets::{describe, load_preset, PRESETS};
use dirpart_cli::{run_manifest, Mode, RunManifest, RunOptions, RunReport};
use std::path::PathBuf;
use std::process::ExitCode;

/// Dirichlet k-partitions by diffusion, thresholding, and projection.
#[derive(Debug, Parser)]
#[command(name = "dirpart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunFlags {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 0 even if some run hit its iteration cap.
    #[arg(long)]
    allow_nonconverged: bool,
    /// Worker threads for independent seeds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// First random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds; the lowest final energy is reported.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a manifest file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// First Dirichlet eigenvalue of one shape.
    Eigen {
        #[arg(long)]
        shape: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled experiment manifests.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    /// List preset names with a one-line description.
    List,
    /// Print a preset manifest.
    Show { name: String },
    /// Run a preset; outputs go to `runs/<name>` unless `--out` is given.
    Run {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
}

fn execute(manifest: &RunManifest, flags: RunFlags, default_out: bool) -> dirpart_cli::Result<(RunReport, bool)> {
    let out = flags
        .out
        .or_else(|| default_out.then(|| PathBuf::from("runs").join(&manifest.name)));
    let opts = RunOptions {
        seed: flags.seed,
        seeds: flags.seeds,
        out,
        jobs: flags.jobs,
    };
    Ok((run_manifest(manifest, &opts)?, flags.allow_nonconverged))
}

fn report(result: dirpart_cli::Result<(RunReport, bool)>) -> ExitCode {
    match result {
        Ok((report, allow)) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report.summary).expect("summary serializes")
            );
            if let Some(dir) = &report.out_dir {
                eprintln!("outputs written to {}", dir.display());
            }
            if report.converged || allow {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: at least one run did not converge (use --allow-nonconverged)");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Solve { config, flags } => {
            report(RunManifest::load(&config).and_then(|m| execute(&m, flags, true)))
        }
        Command::Eigen {
            shape,
            n,
            tol,
            tau0,
            dim,
            out,
        } => {
            let mut m = RunManifest::new(format!("eigen_{shape}_{n}"), n);
            m.mode = Mode::Eigen;
            m.dim = dim;
            m.shape = shape;
            m.tol = Some(OneOrMany::One(tol));
            m.tau0 = tau0;
            let flags = RunFlags {
                out,
                allow_nonconverged: false,
                jobs: 1,
                seed: None,
                seeds: None,
            };
            report(execute(&m, flags, false))
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, text) in PRESETS {
                    println!("{name:<28} {}", describe(text));
                }
                ExitCode::SUCCESS
            }
            PresetAction::Show { name } => match dirpart_cli::presets::preset_text(&name) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            },
            PresetAction::Run { name, flags } => {
                report(load_preset(&name).and_then(|m| execute(&m, flags, true)))
            }
        },
    }
}
