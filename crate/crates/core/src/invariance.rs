//! Invariance conditions, viability monitoring, and the comparison
//! theorem, made operational.
//!
//! The pointwise condition asks, at the projection `p` of a sampled point
//! onto the body, that the drift lie in the tangent cone and that every
//! diffusion column lie in it with both signs — for the shipped convex
//! bodies that is `<s, b(p)> <= tol` and `|<s, sigma_k(p)>| <= tol` for
//! every normal generator `s`. Interior points pass vacuously. Boundary
//! quantifiers are sampled, never proved: every verdict carries its
//! sample count. Necessity runs the other way round only as
//! falsification ensembles: a violated condition should produce escaping
//! trajectories, and an ordering violation should show up pathwise.

use serde::Serialize;

use crate::convex_geometry::ConvexBody;
use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel::{map_indexed, Threads};
use crate::rde_solver::{solve_partial, Dissection, SolveOptions};
use crate::signals::{
    self, lift, lil_statistic, stream_rng, time_augment, FbmKernel, FbmSpec, LilWindow,
    SampledSignal,
};
use crate::vector_fields::VectorFieldPair;

const INIT_DOMAIN: u64 = 0x1d;
const BOUNDARY_DOMAIN: u64 = 0xb0;

/// Verdict of the pointwise condition at one sampled point.
#[derive(Debug, Clone, Serialize)]
pub struct PointVerdict {
    pub point: Vec<f64>,
    pub projection: Vec<f64>,
    /// `max_s <s, b(p)>` over normal generators (negative is good).
    pub drift_margin: f64,
    /// `max_{s,k} |<s, sigma_k(p)>|`.
    pub noise_margin: f64,
    pub drift_ok: bool,
    pub noise_ok: bool,
    /// Diffusion column of the worst violation, when one exists.
    pub worst_column: Option<usize>,
}

impl PointVerdict {
    pub fn pass(&self) -> bool {
        self.drift_ok && self.noise_ok
    }
}

/// Evaluate the condition at `x` via tangent-cone queries at its
/// projection. Points whose projection sees no active normals (interior)
/// pass vacuously.
pub fn point_condition(
    body: &ConvexBody,
    vf: &VectorFieldPair,
    x: &[f64],
    tol: f64,
) -> Result<PointVerdict> {
    let p = body.project(x)?;
    let normals = body.active_normals(&p, tol.max(crate::convex_geometry::ACTIVITY_TOL))?;
    let b = vf.drift(&p);
    let mut drift_margin = f64::NEG_INFINITY;
    let mut noise_margin = 0.0f64;
    let mut worst_column = None;
    for s in &normals {
        drift_margin = drift_margin.max(linalg::dot(s, &b));
        for k in 0..vf.noise_dim() {
            let col = vf.sigma_col(&p, k);
            let v = linalg::dot(s, &col).abs();
            if v > noise_margin {
                noise_margin = v;
                worst_column = Some(k);
            }
        }
    }
    if normals.is_empty() {
        drift_margin = 0.0;
    }
    Ok(PointVerdict {
        point: x.to_vec(),
        projection: p,
        drift_margin,
        noise_margin,
        drift_ok: drift_margin <= tol,
        noise_ok: noise_margin <= tol,
        worst_column: if noise_margin <= tol {
            None
        } else {
            worst_column
        },
    })
}

/// How boundary points are drawn for a condition check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundarySampler {
    /// Budget for deterministic face grids / sphere lattices.
    pub deterministic: usize,
    /// Number of random boundary samples on top.
    pub random: usize,
    pub seed: u64,
}

impl BoundarySampler {
    pub fn with_total(total: usize, seed: u64) -> Self {
        Self {
            deterministic: total / 2,
            random: total - total / 2,
            seed,
        }
    }

    fn points(&self, body: &ConvexBody) -> Result<Vec<Vec<f64>>> {
        let mut pts = body.deterministic_boundary_points(self.deterministic);
        let mut rng = stream_rng(self.seed, BOUNDARY_DOMAIN, 0);
        for _ in 0..self.random {
            pts.push(body.sample_boundary(&mut rng)?);
        }
        Ok(pts)
    }
}

/// Aggregated condition verdict over a boundary sample.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub body: String,
    pub samples: usize,
    pub tol: f64,
    pub drift_ok: bool,
    pub noise_ok: bool,
    pub pass: bool,
    pub worst_drift_margin: f64,
    pub worst_noise_margin: f64,
    /// Projection/polar-cone self-test on exterior probes; a failure here
    /// means the body's projection is broken, not the field.
    pub polar_ok: bool,
    /// Point of the worst violation whenever the verdict is negative.
    pub witness: Option<PointVerdict>,
}

/// Decide the invariance condition on a sampled boundary. The verdict is
/// the conjunction over all samples; the worst violator is kept as a
/// witness.
pub fn check_invariance(
    body: &ConvexBody,
    vf: &VectorFieldPair,
    sampler: &BoundarySampler,
    tol: f64,
) -> Result<InvarianceReport> {
    let points = sampler.points(body)?;
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "boundary sampler produced no points".into(),
        ));
    }
    // Sanity-check the geometry underneath the verdict: the projection
    // residual at exterior probes must be polar to the tangent cone.
    let mut polar_rng = stream_rng(sampler.seed, BOUNDARY_DOMAIN, 1);
    let mut polar_ok = true;
    let act_tol = tol.max(crate::convex_geometry::ACTIVITY_TOL);
    for p in points.iter().take(16) {
        for s in body.active_normals(&body.project(p)?, act_tol)? {
            let probe: Vec<f64> = p.iter().zip(&s).map(|(a, b)| a + 0.5 * b).collect();
            polar_ok &= body.projection_polar_check(&probe, 8, &mut polar_rng, 1e-8)?;
        }
    }
    let mut report = InvarianceReport {
        body: body.kind().to_string(),
        samples: points.len(),
        tol,
        drift_ok: true,
        noise_ok: true,
        pass: true,
        worst_drift_margin: f64::NEG_INFINITY,
        worst_noise_margin: 0.0,
        polar_ok,
        witness: None,
    };
    let mut worst_violation = 0.0f64;
    for p in &points {
        let v = point_condition(body, vf, p, tol)?;
        report.worst_drift_margin = report.worst_drift_margin.max(v.drift_margin);
        report.worst_noise_margin = report.worst_noise_margin.max(v.noise_margin);
        if !v.pass() {
            let violation = v.drift_margin.max(v.noise_margin);
            if violation > worst_violation || report.witness.is_none() {
                worst_violation = violation;
                report.witness = Some(v.clone());
            }
        }
        report.drift_ok &= v.drift_ok;
        report.noise_ok &= v.noise_ok;
    }
    report.pass = report.drift_ok && report.noise_ok;
    Ok(report)
}

/// Decide the stronger, global form of the condition — every point of
/// `R^d` must satisfy it, not just the boundary — by sweeping a
/// box-bounded grid plus random points of the enclosing box; each point
/// is judged at its projection, so exterior points matter here.
/// Interior points of the body still pass vacuously.
pub fn check_global_condition(
    body: &ConvexBody,
    vf: &VectorFieldPair,
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<InvarianceReport> {
    let d = body.dim();
    if lower.len() != d || upper.len() != d {
        return Err(Error::DimensionMismatch {
            left: lower.len(),
            right: d,
        });
    }
    let enclosing = ConvexBody::make_box(lower.to_vec(), upper.to_vec())?;
    let mut points = Vec::with_capacity(samples);
    // Deterministic lattice over the enclosing box, then random fill.
    let per_axis = (((samples / 2) as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let mut counters = vec![0usize; d];
    'lattice: loop {
        let p: Vec<f64> = (0..d)
            .map(|j| lower[j] + counters[j] as f64 / (per_axis - 1) as f64 * (upper[j] - lower[j]))
            .collect();
        points.push(p);
        let mut k = 0;
        loop {
            if k == d {
                break 'lattice;
            }
            counters[k] += 1;
            if counters[k] < per_axis {
                break;
            }
            counters[k] = 0;
            k += 1;
        }
    }
    let mut rng = stream_rng(seed, BOUNDARY_DOMAIN, 2);
    while points.len() < samples {
        points.push(enclosing.sample_point(&mut rng)?);
    }

    let mut report = InvarianceReport {
        body: body.kind().to_string(),
        samples: points.len(),
        tol,
        drift_ok: true,
        noise_ok: true,
        pass: true,
        worst_drift_margin: f64::NEG_INFINITY,
        worst_noise_margin: 0.0,
        polar_ok: true,
        witness: None,
    };
    let mut worst_violation = 0.0f64;
    for p in &points {
        let v = point_condition(body, vf, p, tol)?;
        report.worst_drift_margin = report.worst_drift_margin.max(v.drift_margin);
        report.worst_noise_margin = report.worst_noise_margin.max(v.noise_margin);
        if !v.pass() {
            let violation = v.drift_margin.max(v.noise_margin);
            if violation > worst_violation || report.witness.is_none() {
                worst_violation = violation;
                report.witness = Some(v.clone());
            }
        }
        report.drift_ok &= v.drift_ok;
        report.noise_ok &= v.noise_ok;
    }
    report.pass = report.drift_ok && report.noise_ok;
    Ok(report)
}

/// Signal plan for trajectory ensembles.
#[derive(Debug, Clone, Serialize)]
pub struct SignalPlan {
    pub fbm: FbmSpec,
    /// Lifting exponent; defaults to `default_alpha(hurst)`.
    pub alpha: Option<f64>,
}

impl SignalPlan {
    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| signals::default_alpha(self.fbm.hurst))
    }
}

/// Per-path viability record.
#[derive(Debug, Clone, Serialize)]
pub struct PathViability {
    pub max_distance: f64,
    pub first_exit: Option<f64>,
    pub exploded: bool,
}

/// Ensemble viability summary: max distance to the body per path with
/// no clamping applied to the dynamics.
#[derive(Debug, Clone, Serialize)]
pub struct ViabilityReport {
    pub paths: usize,
    pub ensemble_max_distance: f64,
    pub exits: usize,
    pub explosions: usize,
    pub per_path: Vec<PathViability>,
}

/// Solve `n_paths` trajectories started at random points of the body and
/// record the distance to the body along each. `exit_tol` defines when a
/// path counts as having left.
pub fn viability_ensemble(
    body: &ConvexBody,
    vf: &VectorFieldPair,
    plan: &SignalPlan,
    n_paths: usize,
    exit_tol: f64,
    threads: Threads,
) -> Result<ViabilityReport> {
    if plan.fbm.dim != vf.noise_dim() {
        return Err(Error::DimensionMismatch {
            left: plan.fbm.dim,
            right: vf.noise_dim(),
        });
    }
    let kernel = FbmKernel::new(&plan.fbm)?;
    let alpha = plan.alpha();
    let results: Vec<Result<PathViability>> = map_indexed(n_paths, threads, |i| {
        let mut rng = stream_rng(plan.fbm.seed, INIT_DOMAIN, i as u64);
        let y0 = body.sample_point(&mut rng)?;
        let w = kernel.sample(i as u64);
        let drive = lift(&time_augment(&w)?, alpha)?;
        let dissection = Dissection::new(drive.times().to_vec())?;
        let opts = SolveOptions {
            monitor: Some(body),
            ..Default::default()
        };
        let (traj, failure) = solve_partial(vf, &y0, &drive, &dissection, &opts)?;
        let max_distance = traj.max_monitor_distance().unwrap_or(0.0);
        Ok(PathViability {
            max_distance,
            first_exit: traj.first_exit(exit_tol),
            exploded: failure.is_some(),
        })
    });
    let per_path = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ViabilityReport {
        paths: n_paths,
        ensemble_max_distance: per_path.iter().map(|p| p.max_distance).fold(0.0, f64::max),
        exits: per_path.iter().filter(|p| p.first_exit.is_some()).count(),
        explosions: per_path.iter().filter(|p| p.exploded).count(),
        per_path,
    })
}

/// Witness of a comparison-condition violation.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonWitness {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub coordinate: usize,
    /// `b_1^{(i)}(x_1) - b_2^{(i)}(x_2)` (positive violates).
    pub drift_gap: f64,
    /// `max_k |sigma^1_{i,k}(x_1) - sigma^2_{i,k}(x_2)|`.
    pub sigma_gap: f64,
}

/// Verdict of the pathwise-ordering condition: on sampled ordered pairs
/// that agree in coordinate `i`, the drifts must be ordered and the
/// `i`-th diffusion rows must agree.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub pass: bool,
    pub samples: usize,
    pub worst_drift_gap: f64,
    pub worst_sigma_gap: f64,
    pub witness: Option<ComparisonWitness>,
}

/// Sampling region for the comparison condition: ordered pairs are drawn
/// from this box.
#[derive(Debug, Clone, Serialize)]
pub struct PairSampler {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

/// Check the comparison condition for two fields over sampled pairs
/// `x1 <= x2` on the ordered coordinates with equality forced at one of
/// them in turn.
pub fn comparison_condition(
    vf1: &VectorFieldPair,
    vf2: &VectorFieldPair,
    ordered_coords: &[usize],
    sampler: &PairSampler,
    tol: f64,
) -> Result<ComparisonVerdict> {
    let d = vf1.state_dim();
    let e = vf1.noise_dim();
    if vf2.state_dim() != d || vf2.noise_dim() != e {
        return Err(Error::DimensionMismatch {
            left: vf2.state_dim(),
            right: d,
        });
    }
    if ordered_coords.is_empty() || ordered_coords.iter().any(|&i| i >= d) {
        return Err(Error::InvalidParameter(
            "ordered coordinate set invalid".into(),
        ));
    }
    let mut rng = stream_rng(sampler.seed, 0xc0, 0);
    let mut verdict = ComparisonVerdict {
        pass: true,
        samples: sampler.count,
        worst_drift_gap: f64::NEG_INFINITY,
        worst_sigma_gap: 0.0,
        witness: None,
    };
    use rand::Rng;
    for n in 0..sampler.count {
        let i = ordered_coords[n % ordered_coords.len()];
        let x2: Vec<f64> = sampler
            .lower
            .iter()
            .zip(&sampler.upper)
            .map(|(l, u)| rng.gen_range(*l..=*u))
            .collect();
        let mut x1 = vec![0.0; d];
        for j in 0..d {
            if j == i {
                x1[j] = x2[j];
            } else if ordered_coords.contains(&j) {
                x1[j] = sampler.lower[j] + rng.gen_range(0.0..=1.0) * (x2[j] - sampler.lower[j]);
            } else {
                x1[j] = rng.gen_range(sampler.lower[j]..=sampler.upper[j]);
            }
        }
        let drift_gap = vf1.drift(&x1)[i] - vf2.drift(&x2)[i];
        let s1 = vf1.sigma(&x1);
        let s2 = vf2.sigma(&x2);
        let sigma_gap = (0..e)
            .map(|k| (s1[i * e + k] - s2[i * e + k]).abs())
            .fold(0.0f64, f64::max);
        verdict.worst_drift_gap = verdict.worst_drift_gap.max(drift_gap);
        verdict.worst_sigma_gap = verdict.worst_sigma_gap.max(sigma_gap);
        if drift_gap > tol || sigma_gap > tol {
            verdict.pass = false;
            if verdict.witness.is_none() {
                verdict.witness = Some(ComparisonWitness {
                    x1,
                    x2,
                    coordinate: i,
                    drift_gap,
                    sigma_gap,
                });
            }
        }
    }
    Ok(verdict)
}

/// Ensemble test of the pathwise ordering: both systems are driven by the
/// same lifted signal; reported is the worst positive part of
/// `y^1_i - y^2_i` over time and ordered coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub paths: usize,
    pub worst_violation: f64,
    /// Fraction of paths whose violation stays at numerical zero.
    pub ordered_fraction: f64,
    pub explosions: usize,
    pub per_path: Vec<f64>,
}

pub fn comparison_ensemble(
    vf1: &VectorFieldPair,
    vf2: &VectorFieldPair,
    ordered_coords: &[usize],
    initial_pairs: &[(Vec<f64>, Vec<f64>)],
    plan: &SignalPlan,
    threads: Threads,
) -> Result<ComparisonReport> {
    for (a, b) in initial_pairs {
        for &i in ordered_coords {
            if a[i] > b[i] {
                return Err(Error::InvalidParameter(
                    "initial pairs must be ordered on the compared coordinates".into(),
                ));
            }
        }
    }
    let kernel = FbmKernel::new(&plan.fbm)?;
    let alpha = plan.alpha();
    let results: Vec<Result<(f64, bool)>> = map_indexed(initial_pairs.len(), threads, |i| {
        let w = kernel.sample(i as u64);
        let drive = lift(&time_augment(&w)?, alpha)?;
        let dissection = Dissection::new(drive.times().to_vec())?;
        let opts = SolveOptions::default();
        let (y0a, y0b) = &initial_pairs[i];
        let (ta, fa) = solve_partial(vf1, y0a, &drive, &dissection, &opts)?;
        let (tb, fb) = solve_partial(vf2, y0b, &drive, &dissection, &opts)?;
        let exploded = fa.is_some() || fb.is_some();
        let steps = ta.states.len().min(tb.states.len());
        let mut worst = 0.0f64;
        for j in 0..steps {
            for &c in ordered_coords {
                worst = worst.max(ta.states[j][c] - tb.states[j][c]);
            }
        }
        Ok((worst, exploded))
    });
    let per: Vec<(f64, bool)> = results.into_iter().collect::<Result<Vec<_>>>()?;
    let per_path: Vec<f64> = per.iter().map(|(w, _)| w.max(0.0)).collect();
    let ordered = per_path.iter().filter(|w| **w <= 1e-12).count();
    Ok(ComparisonReport {
        paths: per_path.len(),
        worst_violation: per_path.iter().copied().fold(0.0, f64::max),
        ordered_fraction: ordered as f64 / per_path.len().max(1) as f64,
        explosions: per.iter().filter(|(_, e)| *e).count(),
        per_path,
    })
}

/// Direction sweep of the small-time scaling statistic plus the
/// boundedness diagnostic `M = max_k sup_t |w^{(k)}_t| / (t^beta l(t))`
/// over the window. Consistency requires every direction proxy to be
/// strictly negative with `M` finite.
#[derive(Debug, Clone, Serialize)]
pub struct RoughnessAudit {
    pub beta: f64,
    pub window: LilWindow,
    pub directions: Vec<Vec<f64>>,
    pub proxies: Vec<f64>,
    pub min_proxy: f64,
    pub max_proxy: f64,
    pub sup_bound: f64,
    pub consistent: bool,
}

pub fn signal_roughness_audit(
    w: &SampledSignal,
    beta: f64,
    directions: &[Vec<f64>],
    window: &LilWindow,
) -> Result<RoughnessAudit> {
    let proxies = lil_statistic(w, beta, directions, window)?;
    let dims = w.dims();
    let mut coord_dirs = Vec::with_capacity(2 * dims);
    for k in 0..dims {
        let mut e = vec![0.0; dims];
        e[k] = 1.0;
        coord_dirs.push(e.clone());
        e[k] = -1.0;
        coord_dirs.push(e);
    }
    // sup |w^{(k)}| / (t^b l) = -min over both signed coordinate proxies.
    let coord_stats = lil_statistic(w, beta, &coord_dirs, window)?;
    let sup_bound = coord_stats.iter().map(|v| -v).fold(0.0f64, f64::max);
    let min_proxy = proxies.iter().copied().fold(f64::INFINITY, f64::min);
    let max_proxy = proxies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let consistent = proxies.iter().all(|p| *p < 0.0) && sup_bound.is_finite();
    Ok(RoughnessAudit {
        beta,
        window: *window,
        directions: directions.to_vec(),
        proxies,
        min_proxy,
        max_proxy,
        sup_bound,
        consistent,
    })
}

/// Unit directions for an audit sweep: the `2 dims` signed coordinate
/// axes when `count` is small, otherwise an equiangular fan for planar
/// signals.
pub fn direction_sweep(dims: usize, count: usize) -> Vec<Vec<f64>> {
    if dims == 2 && count > 4 {
        (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        let mut dirs = Vec::new();
        for k in 0..dims {
            let mut e = vec![0.0; dims];
            e[k] = 1.0;
            dirs.push(e.clone());
            e[k] = -1.0;
            dirs.push(e);
        }
        dirs
    }
}
