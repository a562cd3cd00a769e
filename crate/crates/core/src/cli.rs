//! Command implementations behind the `rv` binary: orchestration of
//! presets, experiment runs, and report emission.
//!
//! Every command writes a `manifest.json` with the resolved config
//! (seed included) and the library version next to its numerical
//! outputs; rerunning with the same manifest reproduces the outputs
//! byte for byte, whatever the thread count. Nothing is written outside
//! the chosen output directory.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convex_geometry::ConvexBody;
use crate::error::{Error, Result};
use crate::fmt_float;
use crate::invariance::{
    check_invariance, comparison_condition, comparison_ensemble, direction_sweep,
    signal_roughness_audit, BoundarySampler, PairSampler, SignalPlan,
};
use crate::parallel::{map_indexed, Threads};
use crate::rde_solver::{convergence_study, theta_exponent, Dissection, SolveOptions};
use crate::signals::{
    self, lift, sample_fbm, smooth_signal, stream_rng, time_augment, FbmKernel, FbmSpec, LilWindow,
};
use crate::vector_fields::presets;

const SIM_INIT_DOMAIN: u64 = 0x51;
const PAIR_DOMAIN: u64 = 0xcb;

fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn write_manifest<C: Serialize>(out: &Path, command: &str, config: &C) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a, C> {
        command: &'a str,
        version: String,
        config: &'a C,
    }
    let manifest = Manifest {
        command,
        version: version_string(),
        config,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Flat JSON config file mirroring the CLI flags; explicit flags win.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub preset: Option<String>,
    pub dim: Option<usize>,
    pub m: Option<Vec<f64>>,
    pub hurst: Option<f64>,
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub y0: Option<Vec<f64>>,
    pub monitor: Option<bool>,
    pub body: Option<String>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub driver: Option<String>,
    pub levels: Option<usize>,
    pub gamma: Option<f64>,
    pub m1: Option<Vec<f64>>,
    pub m2: Option<Vec<f64>>,
    pub sigma_scale2: Option<f64>,
    pub beta: Option<f64>,
    pub directions: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

/// Parse a body descriptor JSON file and validate it.
pub fn load_body(path: &Path) -> Result<ConvexBody> {
    let text = fs::read_to_string(path)?;
    let body: ConvexBody = serde_json::from_str(&text)?;
    body.validate()?;
    Ok(body)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub preset: String,
    pub dim: usize,
    pub m: Option<Vec<f64>>,
    pub hurst: f64,
    pub alpha: Option<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub y0: Option<Vec<f64>>,
    pub monitor: bool,
    pub seed: u64,
}

/// One trajectory CSV per path plus the manifest.
pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path, threads: Threads) -> Result<()> {
    let (vf, body) = presets::by_name(&cfg.preset, cfg.dim, cfg.m.as_deref())?;
    let spec = FbmSpec::new(cfg.hurst, vf.noise_dim(), cfg.horizon, cfg.steps, cfg.seed)?;
    let alpha = cfg
        .alpha
        .unwrap_or_else(|| signals::default_alpha(cfg.hurst));
    if let Some(y0) = &cfg.y0 {
        if y0.len() != vf.state_dim() {
            return Err(Error::DimensionMismatch {
                left: y0.len(),
                right: vf.state_dim(),
            });
        }
    }
    ensure_dir(out)?;
    let kernel = FbmKernel::new(&spec)?;
    let rows: Vec<Result<Vec<u8>>> = map_indexed(cfg.paths, threads, |i| {
        let y0 = match &cfg.y0 {
            Some(y0) => y0.clone(),
            None => {
                let mut rng = stream_rng(cfg.seed, SIM_INIT_DOMAIN, i as u64);
                body.sample_point(&mut rng)?
            }
        };
        let w = kernel.sample(i as u64);
        let drive = lift(&time_augment(&w)?, alpha)?;
        let dissection = Dissection::new(drive.times().to_vec())?;
        let opts = SolveOptions {
            monitor: if cfg.monitor { Some(&body) } else { None },
            ..Default::default()
        };
        let traj = crate::rde_solver::solve(&vf, &y0, &drive, &dissection, &opts)?;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        Ok(buf)
    });
    for (i, row) in rows.into_iter().enumerate() {
        fs::write(out.join(format!("path_{i:04}.csv")), row?)?;
    }
    write_manifest(out, "simulate", cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckInvarianceConfig {
    pub preset: String,
    pub dim: usize,
    pub m: Option<Vec<f64>>,
    /// Body override; the preset's default body otherwise.
    pub body: Option<ConvexBody>,
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

/// JSON report; returns whether the condition held.
pub fn cmd_check_invariance(cfg: &CheckInvarianceConfig, out: &Path) -> Result<bool> {
    let (vf, default_body) = presets::by_name(&cfg.preset, cfg.dim, cfg.m.as_deref())?;
    let body = cfg.body.clone().unwrap_or(default_body);
    if body.dim() != vf.state_dim() {
        return Err(Error::DimensionMismatch {
            left: body.dim(),
            right: vf.state_dim(),
        });
    }
    ensure_dir(out)?;
    let sampler = BoundarySampler::with_total(cfg.samples, cfg.seed);
    let report = check_invariance(&body, &vf, &sampler, cfg.tol)?;
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(out.join("report.json"), text + "\n")?;
    write_manifest(out, "check-invariance", cfg)?;
    Ok(report.pass)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConfig {
    pub preset: String,
    pub dim: usize,
    pub m: Option<Vec<f64>>,
    /// `smooth` or `fbm`.
    pub driver: String,
    pub hurst: f64,
    pub alpha: Option<f64>,
    /// Regularity hint for the guaranteed exponent, optional.
    pub gamma: Option<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub levels: usize,
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
}

/// Self-refinement study CSV `(mesh, sup_error, exploded, fitted_slope)`.
pub fn cmd_convergence(cfg: &ConvergenceConfig, out: &Path) -> Result<()> {
    let (vf, body) = presets::by_name(&cfg.preset, cfg.dim, cfg.m.as_deref())?;
    let (w, alpha) = match cfg.driver.as_str() {
        "smooth" => (
            smooth_signal(vf.noise_dim(), cfg.horizon, cfg.steps),
            cfg.alpha.unwrap_or(0.9),
        ),
        "fbm" => {
            let spec = FbmSpec::new(cfg.hurst, vf.noise_dim(), cfg.horizon, cfg.steps, cfg.seed)?;
            (
                sample_fbm(&spec)?,
                cfg.alpha
                    .unwrap_or_else(|| signals::default_alpha(cfg.hurst)),
            )
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "driver must be `smooth` or `fbm`, got `{other}`"
            )))
        }
    };
    let drive = lift(&time_augment(&w)?, alpha)?;
    let y0 = match &cfg.y0 {
        Some(y0) => y0.clone(),
        None => {
            let mut rng = stream_rng(cfg.seed, SIM_INIT_DOMAIN, 0);
            body.sample_point(&mut rng)?
        }
    };
    let coarsenings: Vec<usize> = (1..=cfg.levels).collect();
    let study = convergence_study(&vf, &y0, &drive, &coarsenings, &SolveOptions::default())?;
    ensure_dir(out)?;
    let mut buf = Vec::new();
    study.write_csv(&mut buf)?;
    fs::write(out.join("convergence.csv"), buf)?;
    let theta = theta_exponent(alpha, cfg.gamma);
    #[derive(Serialize)]
    struct Summary {
        theta: f64,
        guaranteed_order: f64,
        fitted_slope: Option<f64>,
        tainted: bool,
    }
    let summary = Summary {
        theta,
        guaranteed_order: theta - 1.0,
        fitted_slope: study.slope,
        tainted: study.tainted,
    };
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_manifest(out, "convergence", cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareConfig {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// Scale applied to the second system's diffusion; 1 keeps the
    /// diffusions identical (the comparison hypothesis).
    pub sigma_scale2: f64,
    pub hurst: f64,
    pub alpha: Option<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Condition check plus shared-signal ensemble; returns overall pass.
pub fn cmd_compare(cfg: &CompareConfig, out: &Path, threads: Threads) -> Result<bool> {
    if cfg.m1.len() != cfg.m2.len() || cfg.m1.is_empty() {
        return Err(Error::InvalidParameter(
            "m1 and m2 must be nonempty, same length".into(),
        ));
    }
    let d = cfg.m1.len();
    let vf1 = presets::logistic(&cfg.m1);
    let vf2 = if cfg.sigma_scale2 == 1.0 {
        presets::logistic(&cfg.m2)
    } else {
        presets::logistic_scaled_sigma(&cfg.m2, cfg.sigma_scale2)
    };
    let coords: Vec<usize> = (0..d).collect();
    let sampler = PairSampler {
        lower: vec![0.0; d],
        upper: vec![1.0; d],
        count: cfg.samples,
        seed: cfg.seed,
    };
    let condition = comparison_condition(&vf1, &vf2, &coords, &sampler, cfg.tol)?;

    let mut rng = stream_rng(cfg.seed, PAIR_DOMAIN, 0);
    use rand::Rng;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.paths)
        .map(|_| {
            let hi: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..0.95)).collect();
            let lo: Vec<f64> = hi.iter().map(|u| u - rng.gen_range(0.0..0.15)).collect();
            (lo, hi)
        })
        .collect();
    let plan = SignalPlan {
        fbm: FbmSpec::new(cfg.hurst, d, cfg.horizon, cfg.steps, cfg.seed)?,
        alpha: cfg.alpha,
    };
    let ensemble = comparison_ensemble(&vf1, &vf2, &coords, &pairs, &plan, threads)?;

    ensure_dir(out)?;
    #[derive(Serialize)]
    struct Report<'a> {
        condition: &'a crate::invariance::ComparisonVerdict,
        worst_violation: f64,
        ordered_fraction: f64,
        explosions: usize,
        pass: bool,
    }
    let pass = condition.pass && ensemble.worst_violation <= cfg.tol.max(1e-6);
    let report = Report {
        condition: &condition,
        worst_violation: ensemble.worst_violation,
        ordered_fraction: ensemble.ordered_fraction,
        explosions: ensemble.explosions,
        pass,
    };
    fs::write(
        out.join("compare.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let mut csv = Vec::new();
    writeln!(&mut csv, "path,max_ordering_violation")?;
    for (i, v) in ensemble.per_path.iter().enumerate() {
        writeln!(&mut csv, "{},{}", i, fmt_float(*v))?;
    }
    fs::write(out.join("compare.csv"), csv)?;
    write_manifest(out, "compare", cfg)?;
    Ok(pass)
}

#[derive(Debug, Clone, Serialize)]
pub struct LilConfig {
    pub hurst: f64,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    /// Scaling exponent; defaults to the Hurst index.
    pub beta: Option<f64>,
    pub directions: usize,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: u64,
}

/// Per-path, per-direction proxies of the small-time scaling statistic.
pub fn cmd_lil(cfg: &LilConfig, out: &Path, threads: Threads) -> Result<()> {
    let spec = FbmSpec::new(cfg.hurst, cfg.dim, cfg.horizon, cfg.steps, cfg.seed)?;
    let beta = cfg.beta.unwrap_or(cfg.hurst);
    let mut window = LilWindow::default_for(cfg.horizon);
    if let Some(t_min) = cfg.t_min {
        window.t_min = t_min;
    }
    if let Some(t_max) = cfg.t_max {
        window.t_max = t_max;
    }
    let dirs = direction_sweep(cfg.dim, cfg.directions);
    let kernel = FbmKernel::new(&spec)?;
    let audits: Vec<Result<crate::invariance::RoughnessAudit>> =
        map_indexed(cfg.paths, threads, |i| {
            let w = kernel.sample(i as u64);
            signal_roughness_audit(&w, beta, &dirs, &window)
        });
    ensure_dir(out)?;
    let mut csv = Vec::new();
    write!(&mut csv, "path,direction")?;
    for k in 1..=cfg.dim {
        write!(&mut csv, ",d{k}")?;
    }
    writeln!(&mut csv, ",proxy,sup_bound,consistent")?;
    for (i, audit) in audits.into_iter().enumerate() {
        let audit = audit?;
        for (j, dir) in audit.directions.iter().enumerate() {
            write!(&mut csv, "{i},{j}")?;
            for x in dir {
                write!(&mut csv, ",{}", fmt_float(*x))?;
            }
            writeln!(
                &mut csv,
                ",{},{},{}",
                fmt_float(audit.proxies[j]),
                fmt_float(audit.sup_bound),
                audit.consistent
            )?;
        }
    }
    fs::write(out.join("lil.csv"), csv)?;
    write_manifest(out, "lil", cfg)
}
