//! `rv` — rough-signal experiments from the command line.
//!
//! Subcommands: `simulate`, `check-invariance`, `convergence`,
//! `compare`, `lil`. Exit codes: 0 success (condition holds where one is
//! checked), 1 condition failure or runtime error, 2 usage/config error.
//! `RV_SEED` overrides the seed flag; an optional JSON config file
//! mirrors the flags with explicit flags winning.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rough_viability::cli::{
    self, CheckInvarianceConfig, CompareConfig, ConvergenceConfig, FileConfig, LilConfig,
    SimulateConfig,
};

#[derive(Parser)]
#[command(
    name = "rv",
    version,
    about = "rough-signal solvers and viability checks"
)]
struct Cli {
    /// RNG seed (RV_SEED overrides; default 1, never wall clock).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensembles (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default `rv-output/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file mirroring the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve trajectory ensembles for a preset and write one CSV per path.
    Simulate {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        /// Logistic rates (comma separated); fixes the dimension.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        /// Initial state (comma separated); sampled in the body otherwise.
        #[arg(long, value_delimiter = ',')]
        y0: Option<Vec<f64>>,
        /// Record the distance to the preset body along the way.
        #[arg(long)]
        monitor: Option<bool>,
    },
    /// Decide the invariance condition on a sampled boundary.
    CheckInvariance {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        /// JSON body descriptor file overriding the preset body.
        #[arg(long)]
        body: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Self-refinement convergence study.
    Convergence {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        /// Driver: `smooth` or `fbm`.
        #[arg(long)]
        driver: Option<String>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Finest grid size; coarsenings are dyadic.
        #[arg(long)]
        steps: Option<usize>,
        /// Number of dyadic coarsening levels.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        y0: Option<Vec<f64>>,
    },
    /// Comparison condition and shared-signal ordering ensemble for
    /// logistic pairs.
    Compare {
        #[arg(long, value_delimiter = ',')]
        m1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        m2: Option<Vec<f64>>,
        /// Diffusion scale of the second system (1 = identical).
        #[arg(long)]
        sigma_scale2: Option<f64>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        /// Sampled pairs for the condition check.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Small-time scaling statistic of sampled paths, per direction.
    Lil {
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        /// Scaling exponent (defaults to the Hurst index).
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        directions: Option<usize>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
    },
}

/// Anything wrong with flags, config files, or descriptors is a usage
/// error (exit 2); failures during the run exit 1.
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, Failure> {
    if let Ok(text) = std::env::var("RV_SEED") {
        return text
            .trim()
            .parse::<u64>()
            .map_err(|_| Failure::Usage(format!("RV_SEED is not a valid seed: `{text}`")));
    }
    Ok(flag.or(file.seed).unwrap_or(1))
}

fn out_dir(flag: Option<PathBuf>, file: &FileConfig, command: &str) -> PathBuf {
    flag.or_else(|| file.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("rv-output").join(command))
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let file = cli::load_file_config(cli.config.as_deref()).map_err(usage)?;
    let seed = resolve_seed(cli.seed, &file)?;
    let threads = cli.threads.or(file.threads);

    match cli.command {
        Command::Simulate {
            preset,
            dim,
            m,
            hurst,
            alpha,
            horizon,
            steps,
            paths,
            y0,
            monitor,
        } => {
            let preset = preset
                .or_else(|| file.preset.clone())
                .ok_or_else(|| Failure::Usage("missing --preset".into()))?;
            let cfg = SimulateConfig {
                preset,
                dim: dim.or(file.dim).unwrap_or(2),
                m: m.or_else(|| file.m.clone()),
                hurst: hurst.or(file.hurst).unwrap_or(0.5),
                alpha: alpha.or(file.alpha),
                horizon: horizon.or(file.horizon).unwrap_or(1.0),
                steps: steps.or(file.steps).unwrap_or(1024),
                paths: paths.or(file.paths).unwrap_or(1),
                y0: y0.or_else(|| file.y0.clone()),
                monitor: monitor.or(file.monitor).unwrap_or(true),
                seed,
            };
            let out = out_dir(cli.out, &file, "simulate");
            cli::cmd_simulate(&cfg, &out, threads).map_err(runtime)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckInvariance {
            preset,
            dim,
            m,
            body,
            samples,
            tol,
        } => {
            let preset = preset
                .or_else(|| file.preset.clone())
                .ok_or_else(|| Failure::Usage("missing --preset".into()))?;
            let body = match body.or_else(|| file.body.as_ref().map(PathBuf::from)) {
                Some(path) => Some(cli::load_body(&path).map_err(usage)?),
                None => None,
            };
            let cfg = CheckInvarianceConfig {
                preset,
                dim: dim.or(file.dim).unwrap_or(2),
                m: m.or_else(|| file.m.clone()),
                body,
                samples: samples.or(file.samples).unwrap_or(10_000),
                tol: tol.or(file.tol).unwrap_or(1e-9),
                seed,
            };
            let out = out_dir(cli.out, &file, "check-invariance");
            let pass = cli::cmd_check_invariance(&cfg, &out).map_err(runtime)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Convergence {
            preset,
            dim,
            m,
            driver,
            hurst,
            alpha,
            gamma,
            horizon,
            steps,
            levels,
            y0,
        } => {
            let cfg = ConvergenceConfig {
                preset: preset
                    .or_else(|| file.preset.clone())
                    .ok_or_else(|| Failure::Usage("missing --preset".into()))?,
                dim: dim.or(file.dim).unwrap_or(1),
                m: m.or_else(|| file.m.clone()),
                driver: driver
                    .or_else(|| file.driver.clone())
                    .unwrap_or_else(|| "smooth".into()),
                hurst: hurst.or(file.hurst).unwrap_or(0.75),
                alpha: alpha.or(file.alpha),
                gamma: gamma.or(file.gamma),
                horizon: horizon.or(file.horizon).unwrap_or(1.0),
                steps: steps.or(file.steps).unwrap_or(4096),
                levels: levels.or(file.levels).unwrap_or(5),
                y0: y0.or_else(|| file.y0.clone()),
                seed,
            };
            let out = out_dir(cli.out, &file, "convergence");
            cli::cmd_convergence(&cfg, &out).map_err(runtime)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            m1,
            m2,
            sigma_scale2,
            hurst,
            alpha,
            horizon,
            steps,
            paths,
            samples,
            tol,
        } => {
            let cfg = CompareConfig {
                m1: m1
                    .or_else(|| file.m1.clone())
                    .unwrap_or_else(|| vec![1.0, 1.0]),
                m2: m2
                    .or_else(|| file.m2.clone())
                    .unwrap_or_else(|| vec![2.0, 2.0]),
                sigma_scale2: sigma_scale2.or(file.sigma_scale2).unwrap_or(1.0),
                hurst: hurst.or(file.hurst).unwrap_or(0.5),
                alpha: alpha.or(file.alpha),
                horizon: horizon.or(file.horizon).unwrap_or(1.0),
                steps: steps.or(file.steps).unwrap_or(1024),
                paths: paths.or(file.paths).unwrap_or(50),
                samples: samples.or(file.samples).unwrap_or(1000),
                tol: tol.or(file.tol).unwrap_or(1e-6),
                seed,
            };
            let out = out_dir(cli.out, &file, "compare");
            let pass = cli::cmd_compare(&cfg, &out, threads).map_err(runtime)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Lil {
            hurst,
            dim,
            horizon,
            steps,
            paths,
            beta,
            directions,
            t_min,
            t_max,
        } => {
            let cfg = LilConfig {
                hurst: hurst.or(file.hurst).unwrap_or(0.5),
                dim: dim.or(file.dim).unwrap_or(2),
                horizon: horizon.or(file.horizon).unwrap_or(1.0),
                steps: steps.or(file.steps).unwrap_or(1 << 16),
                paths: paths.or(file.paths).unwrap_or(200),
                beta: beta.or(file.beta),
                directions: directions.or(file.directions).unwrap_or(16),
                t_min: t_min.or(file.t_min),
                t_max: t_max.or(file.t_max),
                seed,
            };
            let out = out_dir(cli.out, &file, "lil");
            cli::cmd_lil(&cfg, &out, threads).map_err(runtime)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("rv: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("rv: {msg}");
            ExitCode::from(1)
        }
    }
}
