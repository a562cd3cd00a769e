//! Step-N Euler scheme along a dissection.
//!
//! One step from state `x` with driver increment `g` adds
//! `sum_{k=1}^{N} sum_{i_1..i_k} f_{i_1}...f_{i_k} I(x) g^{(k),i_1..i_k}`
//! over the columns of the time-augmented field; at level 1 this is the
//! familiar `b(x) dt + sigma(x) dw`. Convergence is measured by
//! self-refinement: the finest-grid solution serves as reference and a
//! least-squares slope of log error against log mesh is reported.

use std::io::Write;

use serde::Serialize;

use crate::convex_geometry::ConvexBody;
use crate::error::{Error, Result};
use crate::fmt_float;
use crate::linalg;
use crate::rough_path::{RoughPath, TruncatedTensor};
use crate::vector_fields::VectorFieldPair;

/// Strictly increasing solve times; must be a subset of the drive grid.
#[derive(Debug, Clone)]
pub struct Dissection {
    times: Vec<f64>,
}

impl Dissection {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter(
                "dissection needs at least two times".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneGrid);
        }
        Ok(Self { times })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(
                "need a positive horizon and step count".into(),
            ));
        }
        Self::new(
            (0..=steps)
                .map(|j| j as f64 * horizon / steps as f64)
                .collect(),
        )
    }

    /// Every `stride`-th time of a drive grid (endpoints kept).
    pub fn strided(drive: &RoughPath, stride: usize) -> Result<Self> {
        let n = drive.len();
        if stride == 0 || n % stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "stride {stride} does not divide {n} drive steps"
            )));
        }
        Self::new(drive.times().iter().copied().step_by(stride).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Largest adjacent gap.
    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Per-step record: the Euler increment norm, the distance of the new
/// state to the monitored body (when one is attached), and whether the
/// step was rejected (explosion or non-finite values abort the solve).
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub increment_norm: f64,
    pub dist_to_monitor: Option<f64>,
    pub rejected: bool,
}

/// Discrete solution path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<StepDiagnostics>,
    /// Distance to the monitored body per state (same length as
    /// `states`), present when a monitor was attached.
    pub monitor_distances: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn max_monitor_distance(&self) -> Option<f64> {
        self.monitor_distances
            .as_ref()
            .map(|d| d.iter().copied().fold(0.0, f64::max))
    }

    /// First time the monitored distance exceeds `tol`.
    pub fn first_exit(&self, tol: f64) -> Option<f64> {
        let dists = self.monitor_distances.as_ref()?;
        dists
            .iter()
            .zip(&self.times)
            .find(|(d, _)| **d > tol)
            .map(|(_, t)| *t)
    }

    /// CSV with header `t,y1,...,yd` plus a `dist_K` column when a
    /// monitor was attached.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let d = self.states[0].len();
        write!(out, "t")?;
        for k in 1..=d {
            write!(out, ",y{k}")?;
        }
        if self.monitor_distances.is_some() {
            write!(out, ",dist_K")?;
        }
        writeln!(out)?;
        for (j, (t, row)) in self.times.iter().zip(&self.states).enumerate() {
            write!(out, "{}", fmt_float(*t))?;
            for x in row {
                write!(out, ",{}", fmt_float(*x))?;
            }
            if let Some(dists) = &self.monitor_distances {
                write!(out, ",{}", fmt_float(dists[j]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Solver knobs. The explosion bound aborts runaway trajectories that
/// globally Lipschitz fields would rule out in theory but user fields
/// can produce.
#[derive(Clone)]
pub struct SolveOptions<'a> {
    pub explosion_bound: f64,
    /// Euler level override; defaults to the drive's own level.
    pub level: Option<usize>,
    pub monitor: Option<&'a ConvexBody>,
}

impl Default for SolveOptions<'_> {
    fn default() -> Self {
        Self {
            explosion_bound: 1e8,
            level: None,
            monitor: None,
        }
    }
}

/// The one-step Euler sum for a driver increment `g` over `R^{e+1}`.
/// The identity increment yields zero; at level 1 with a time-augmented
/// increment `(dt, dw)` this reduces to `b(x) dt + sigma(x) dw`.
pub fn euler_increment(vf: &VectorFieldPair, x: &[f64], g: &TruncatedTensor) -> Result<Vec<f64>> {
    let d = vf.state_dim();
    let m = vf.noise_dim() + 1;
    if g.dim() != m {
        return Err(Error::DimensionMismatch {
            left: g.dim(),
            right: m,
        });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: d,
        });
    }
    let level = g.level();
    let cols: Vec<Vec<f64>> = (0..m).map(|l| vf.augmented_col(x, l)).collect();
    let mut acc = vec![0.0; d];

    let g1 = g.level_data(1);
    for (i, col) in cols.iter().enumerate() {
        linalg::axpy(&mut acc, g1[i], col);
    }
    if level == 1 {
        return finite(acc);
    }

    let jacs: Vec<Vec<f64>> = (0..m)
        .map(|l| vf.col_jacobian(x, l))
        .collect::<Result<Vec<_>>>()?;
    // jv[i1][i2] = Df_{i2}(x) f_{i1}(x), reused by level 3.
    let jv: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i1| {
            (0..m)
                .map(|i2| linalg::mat_vec(&jacs[i2], &cols[i1], d, d))
                .collect()
        })
        .collect();
    let g2 = g.level_data(2);
    for i1 in 0..m {
        for i2 in 0..m {
            let c = g2[i1 * m + i2];
            if c != 0.0 {
                linalg::axpy(&mut acc, c, &jv[i1][i2]);
            }
        }
    }
    if level == 2 {
        return finite(acc);
    }

    let hess: Vec<Vec<f64>> = (0..m)
        .map(|l| vf.col_hessian(x, l))
        .collect::<Result<Vec<_>>>()?;
    let g3 = g.level_data(3);
    for i1 in 0..m {
        for i2 in 0..m {
            for i3 in 0..m {
                let c = g3[(i1 * m + i2) * m + i3];
                if c == 0.0 {
                    continue;
                }
                // f_{i1} f_{i2} f_{i3} I = D^2 f_{i3}[f_{i2}, f_{i1}]
                //                        + Df_{i3} Df_{i2} f_{i1}.
                let h = &hess[i3];
                for i in 0..d {
                    let mut v = 0.0;
                    for j in 0..d {
                        for k in 0..d {
                            v += h[(i * d + j) * d + k] * cols[i2][j] * cols[i1][k];
                        }
                    }
                    acc[i] += c * v;
                }
                linalg::mat_vec_acc(&mut acc, c, &jacs[i3], &jv[i1][i2], d, d);
            }
        }
    }
    finite(acc)
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteField);
    }
    Ok(v)
}

/// `x + euler_increment(vf, x, g)`.
pub fn euler_step(vf: &VectorFieldPair, x: &[f64], g: &TruncatedTensor) -> Result<Vec<f64>> {
    let inc = euler_increment(vf, x, g)?;
    Ok(x.iter().zip(&inc).map(|(a, b)| a + b).collect())
}

/// Iterate the Euler step along the dissection, whose times must all lie
/// on the drive grid; coarser dissections pick up Chen-composed
/// increments. Identical inputs produce bit-identical trajectories.
pub fn solve(
    vf: &VectorFieldPair,
    y0: &[f64],
    drive: &RoughPath,
    dissection: &Dissection,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let (traj, failure) = solve_partial(vf, y0, drive, dissection, opts)?;
    match failure {
        Some(err) => Err(err),
        None => Ok(traj),
    }
}

/// Like `solve`, but explosion and non-finite aborts come back alongside
/// the trajectory computed so far (ensembles record them per path).
pub(crate) fn solve_partial(
    vf: &VectorFieldPair,
    y0: &[f64],
    drive: &RoughPath,
    dissection: &Dissection,
    opts: &SolveOptions,
) -> Result<(Trajectory, Option<Error>)> {
    if y0.len() != vf.state_dim() {
        return Err(Error::DimensionMismatch {
            left: y0.len(),
            right: vf.state_dim(),
        });
    }
    let level = match opts.level {
        Some(l) => {
            if l == 0 || l > drive.level() {
                return Err(Error::LevelMismatch {
                    left: l,
                    right: drive.level(),
                });
            }
            l
        }
        None => drive.level(),
    };
    let grid = grid_indices(drive, dissection)?;
    if grid[0] != 0 || *grid.last().unwrap() != drive.len() {
        return Err(Error::InvalidParameter(
            "dissection must span the drive from start to horizon".into(),
        ));
    }

    let mut times = vec![dissection.times()[0]];
    let mut states = vec![y0.to_vec()];
    let mut steps = Vec::new();
    let mut dists = opts
        .monitor
        .map(|body| body.distance(y0).map(|d| vec![d]))
        .transpose()?;
    let mut failure = None;

    for (step_idx, pair) in grid.windows(2).enumerate() {
        let t = dissection.times()[step_idx + 1];
        let mut g = drive.increment(pair[0], pair[1])?;
        if level < drive.level() {
            g = g.truncated(level)?;
        }
        let x = states.last().unwrap();
        let inc = match euler_increment(vf, x, &g) {
            Ok(inc) => inc,
            Err(Error::NonFiniteField) => {
                steps.push(StepDiagnostics {
                    increment_norm: f64::NAN,
                    dist_to_monitor: None,
                    rejected: true,
                });
                failure = Some(Error::NonFiniteState {
                    step: step_idx + 1,
                    time: t,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let next: Vec<f64> = x.iter().zip(&inc).map(|(a, b)| a + b).collect();
        let n = linalg::norm(&next);
        if !n.is_finite() || n > opts.explosion_bound {
            steps.push(StepDiagnostics {
                increment_norm: linalg::norm(&inc),
                dist_to_monitor: None,
                rejected: true,
            });
            failure = Some(if n.is_finite() {
                Error::Explosion {
                    step: step_idx + 1,
                    time: t,
                    norm: n,
                }
            } else {
                Error::NonFiniteState {
                    step: step_idx + 1,
                    time: t,
                }
            });
            break;
        }
        let dist = match (&opts.monitor, &mut dists) {
            (Some(body), Some(dists)) => {
                let d = body.distance(&next)?;
                dists.push(d);
                Some(d)
            }
            _ => None,
        };
        steps.push(StepDiagnostics {
            increment_norm: linalg::norm(&inc),
            dist_to_monitor: dist,
            rejected: false,
        });
        times.push(t);
        states.push(next);
    }

    Ok((
        Trajectory {
            times,
            states,
            steps,
            monitor_distances: dists,
        },
        failure,
    ))
}

/// Map dissection times onto drive grid indices, or fail with the first
/// time that is not on the grid.
fn grid_indices(drive: &RoughPath, dissection: &Dissection) -> Result<Vec<usize>> {
    let dt = drive.times();
    let mut out = Vec::with_capacity(dissection.times().len());
    let mut lo = 0usize;
    for &t in dissection.times() {
        let tol = 1e-9 * (1.0 + t.abs());
        let mut found = None;
        for (off, &s) in dt[lo..].iter().enumerate() {
            if (s - t).abs() <= tol {
                found = Some(lo + off);
                break;
            }
            if s > t + tol {
                break;
            }
        }
        match found {
            Some(idx) => {
                lo = idx;
                out.push(idx);
            }
            None => return Err(Error::GridMismatch { time: t }),
        }
    }
    Ok(out)
}

/// One row of a self-refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub mesh: f64,
    pub sup_error: Option<f64>,
    pub exploded: bool,
}

/// Mesh-refinement study against the finest-grid solution.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log mesh over the
    /// non-exploded rows.
    pub slope: Option<f64>,
    /// Whether any coarsening level exploded (reported, never dropped).
    pub tainted: bool,
}

impl ConvergenceStudy {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "mesh,sup_error,exploded,fitted_slope")?;
        let slope = self.slope.map(fmt_float).unwrap_or_default();
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_float(row.mesh),
                row.sup_error.map(fmt_float).unwrap_or_default(),
                row.exploded,
                slope
            )?;
        }
        Ok(())
    }
}

/// Solve on dyadic coarsenings `stride = 2^level` of the drive grid and
/// measure sup error against the finest-grid solution. Needs at least
/// four coarsening levels for a meaningful slope.
pub fn convergence_study(
    vf: &VectorFieldPair,
    y0: &[f64],
    drive: &RoughPath,
    coarsenings: &[usize],
    opts: &SolveOptions,
) -> Result<ConvergenceStudy> {
    if coarsenings.len() < 4 {
        return Err(Error::InvalidParameter(
            "need at least four coarsening levels".into(),
        ));
    }
    let full = Dissection::strided(drive, 1)?;
    let reference = solve(vf, y0, drive, &full, opts)?;
    let mut rows = Vec::new();
    let mut tainted = false;
    for &lvl in coarsenings {
        let stride = 1usize << lvl;
        let dissection = Dissection::strided(drive, stride)?;
        let mesh = dissection.mesh();
        match solve(vf, y0, drive, &dissection, opts) {
            Ok(traj) => {
                let err = traj
                    .states
                    .iter()
                    .enumerate()
                    .map(|(j, y)| linalg::dist(y, &reference.states[j * stride]))
                    .fold(0.0, f64::max);
                rows.push(ConvergenceRow {
                    mesh,
                    sup_error: Some(err),
                    exploded: false,
                });
            }
            Err(Error::Explosion { .. }) | Err(Error::NonFiniteState { .. }) => {
                tainted = true;
                rows.push(ConvergenceRow {
                    mesh,
                    sup_error: None,
                    exploded: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.sup_error
                .filter(|e| *e > 0.0)
                .map(|e| (r.mesh.ln(), e.ln()))
        })
        .collect();
    let slope = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        Some(linalg::ls_slope(&xs, &ys))
    } else {
        None
    };
    Ok(ConvergenceStudy {
        rows,
        slope,
        tainted,
    })
}

/// The guaranteed convergence exponent `theta = (floor*(gamma) + 1) alpha`,
/// where `floor*` is the largest integer strictly below `gamma`. Without
/// an explicit regularity hint, `gamma` is taken at the top of its
/// admissible bracket `(1/alpha, floor(1/alpha) + 1)`, which gives
/// `theta = (floor(1/alpha) + 1) alpha`. Errors are guaranteed to decay
/// at least like `mesh^(theta - 1)`.
pub fn theta_exponent(alpha: f64, gamma_hint: Option<f64>) -> f64 {
    let strict_floor = |g: f64| -> f64 {
        if g.fract() == 0.0 {
            g - 1.0
        } else {
            g.floor()
        }
    };
    match gamma_hint {
        Some(g) => (strict_floor(g) + 1.0) * alpha,
        None => ((1.0 / alpha).floor() + 1.0) * alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals;
    use crate::vector_fields::presets;
    use rand::Rng;
    use std::sync::Arc;

    fn scalar_vf(
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> VectorFieldPair {
        VectorFieldPair::new(
            1,
            1,
            Arc::new(move |x: &[f64]| vec![b(x[0])]),
            Arc::new(move |x: &[f64]| vec![s(x[0])]),
        )
    }

    /// Drive from an explicit augmented polyline.
    fn drive_from_points(times: Vec<f64>, points: Vec<Vec<f64>>, alpha: f64) -> RoughPath {
        let level = crate::rough_path::level_for_alpha(alpha).unwrap();
        let incs = points
            .windows(2)
            .map(|w| {
                let v: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
                TruncatedTensor::segment_signature(&v, level).unwrap()
            })
            .collect();
        RoughPath::new(times, incs, alpha).unwrap()
    }

    #[test]
    fn identity_increment_is_zero() {
        let vf = scalar_vf(|x| x, |x| x);
        let g = TruncatedTensor::identity(2, 2).unwrap();
        let inc = euler_increment(&vf, &[0.7], &g).unwrap();
        assert_eq!(inc, vec![0.0]);
        assert_eq!(euler_step(&vf, &[0.7], &g).unwrap(), vec![0.7]);
    }

    #[test]
    fn level_one_reduces_to_drift_plus_noise() {
        let vf = scalar_vf(|x| 2.0 * x, |x| 0.5 + x);
        let (h, z) = (0.01, 0.3);
        let g = TruncatedTensor::from_levels(2, vec![vec![h, z]]).unwrap();
        let x = 0.4;
        let inc = euler_increment(&vf, &[x], &g).unwrap();
        assert!((inc[0] - (2.0 * x * h + (0.5 + x) * z)).abs() < 1e-15);
    }

    #[test]
    fn level_two_multiplicative_hand_expansion() {
        // b = 0, sigma(x) = x, g1 = (0, z), g2 ww-entry z^2/2:
        // increment = x z + x z^2 / 2.
        let vf = scalar_vf(|_| 0.0, |x| x);
        let z = 0.25;
        let mut g2 = vec![0.0; 4];
        g2[3] = z * z / 2.0;
        let g = TruncatedTensor::from_levels(2, vec![vec![0.0, z], g2]).unwrap();
        let x = 0.8;
        let inc = euler_increment(&vf, &[x], &g).unwrap();
        assert!((inc[0] - (x * z + x * z * z / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn increment_matches_iterated_apply_sum() {
        // The cached fast path and the generic composition agree.
        let vf = presets::logistic(&[1.3, 0.7]);
        let m = 3;
        let mut rng = crate::test_util::rng(8);
        let pts: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect())
            .collect();
        let g = TruncatedTensor::signature_piecewise_linear(&pts, 3).unwrap();
        let x = vec![0.4, 0.6];
        let fast = euler_increment(&vf, &x, &g).unwrap();
        let mut slow = vec![0.0; 2];
        for k in 1..=3 {
            let data = g.level_data(k);
            let mut idx = vec![0usize; k];
            for (flat, c) in data.iter().enumerate() {
                let mut rem = flat;
                for pos in (0..k).rev() {
                    idx[pos] = rem % m;
                    rem /= m;
                }
                if *c != 0.0 {
                    let v = vf.iterated_apply(&x, &idx).unwrap();
                    linalg::axpy(&mut slow, *c, &v);
                }
            }
        }
        for i in 0..2 {
            assert!((fast[i] - slow[i]).abs() < 1e-12, "{fast:?} vs {slow:?}");
        }
    }

    #[test]
    fn logistic_face_coordinate_is_noise_free() {
        // On a face x_i in {0, 1} the logistic diffusion column vanishes,
        // so the step leaves that coordinate where the drift (also zero)
        // puts it.
        let vf = presets::logistic(&[1.0, 1.0]);
        let pts = vec![vec![0.0, 0.0, 0.0], vec![0.02, 0.3, -0.2]];
        let g = TruncatedTensor::signature_piecewise_linear(&pts, 2).unwrap();
        for x in [[0.0, 0.4], [1.0, 0.7]] {
            let next = euler_step(&vf, &x, &g).unwrap();
            assert_eq!(next[0], x[0]);
        }
    }

    #[test]
    fn composition_over_two_steps_is_the_composed_scheme() {
        let vf = scalar_vf(|x| 0.3 * x, |x| 1.0 + 0.1 * x);
        let times = vec![0.0, 0.4, 1.0];
        let pts = vec![vec![0.0, 0.0], vec![0.4, 0.3], vec![1.0, -0.1]];
        let drive = drive_from_points(times.clone(), pts, 0.45);
        let diss = Dissection::new(times).unwrap();
        let traj = solve(&vf, &[1.0], &drive, &diss, &SolveOptions::default()).unwrap();
        let y1 = euler_step(&vf, &[1.0], drive.step(0)).unwrap();
        let y2 = euler_step(&vf, &y1, drive.step(1)).unwrap();
        assert_eq!(traj.states[2], y2);
    }

    #[test]
    fn pure_ode_matches_explicit_euler_closed_form() {
        // sigma = 0, b(x) = lambda x on a uniform mesh: (1 + lambda h)^n.
        let lambda = -0.8;
        let vf = scalar_vf(move |x| lambda * x, |_| 0.0);
        let n = 64;
        let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let pts: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, 0.0]).collect();
        let drive = drive_from_points(times.clone(), pts, 1.0);
        let diss = Dissection::new(times).unwrap();
        let traj = solve(&vf, &[1.0], &drive, &diss, &SolveOptions::default()).unwrap();
        let h = 1.0 / n as f64;
        for (k, y) in traj.states.iter().enumerate() {
            let want = (1.0 + lambda * h).powi(k as i32);
            assert!((y[0] - want).abs() < 1e-12, "step {k}");
        }
    }

    #[test]
    fn additive_noise_is_exact_at_any_level_and_dissection() {
        // b = 0, sigma constant: y_t = y_0 + sigma (w_t - w_0) exactly.
        let vf = scalar_vf(|_| 0.0, |_| 1.7);
        let spec = signals::FbmSpec::new(0.5, 1, 1.0, 64, 13).unwrap();
        let w = signals::sample_fbm(&spec).unwrap();
        let aug = signals::time_augment(&w).unwrap();
        for alpha in [0.45, 0.3] {
            let drive = signals::lift(&aug, alpha).unwrap();
            for stride in [1usize, 4, 16] {
                let diss = Dissection::strided(&drive, stride).unwrap();
                let traj = solve(&vf, &[2.0], &drive, &diss, &SolveOptions::default()).unwrap();
                for (j, y) in traj.states.iter().enumerate() {
                    let want = 2.0 + 1.7 * w.values[j * stride][0];
                    assert!((y[0] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smooth_multiplicative_ode_converges_to_exponential() {
        // dy = y dw with w_t = t converges to e^t as the mesh shrinks.
        let vf = scalar_vf(|_| 0.0, |x| x);
        let sol = |n: usize| -> f64 {
            let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
            let pts: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, *t]).collect();
            let drive = drive_from_points(times.clone(), pts, 1.0);
            let diss = Dissection::new(times).unwrap();
            let traj = solve(&vf, &[1.0], &drive, &diss, &SolveOptions::default()).unwrap();
            traj.states.last().unwrap()[0]
        };
        let e = std::f64::consts::E;
        let err_coarse = (sol(2048) - e).abs();
        let err_fine = (sol(4096) - e).abs();
        assert!(err_fine < 1e-3);
        assert!(err_fine < 0.6 * err_coarse, "{err_coarse} -> {err_fine}");
    }

    #[test]
    fn level_two_step_matches_exact_flow_to_third_order() {
        // Two-segment driver with nonzero area, fields f_0 = 1 and
        // f_1(x) = x (noncommuting): one level-2 Euler step over the
        // composed increment must match the exact flow up to O(eps^3).
        // This pins the pairing between signature entries and iterated
        // compositions; a transposed pairing only reaches O(eps^2).
        let vf = scalar_vf(|_| 1.0, |x| x);
        let segs = [(0.7, 0.2), (-0.3, 0.9)];
        // Exact flow of dy = u ds + v y ds along one segment.
        let flow_segment = |y: f64, u: f64, v: f64| -> f64 {
            if v.abs() < 1e-14 {
                y + u
            } else {
                (y + u / v) * v.exp() - u / v
            }
        };
        let err_at = |eps: f64| -> f64 {
            let mut exact = 0.4;
            for (u, v) in segs {
                exact = flow_segment(exact, eps * u, eps * v);
            }
            let mut g = TruncatedTensor::identity(2, 2).unwrap();
            for (u, v) in segs {
                let seg = TruncatedTensor::segment_signature(&[eps * u, eps * v], 2).unwrap();
                g = g.tensor_product(&seg).unwrap();
            }
            let stepped = euler_step(&vf, &[0.4], &g).unwrap();
            (stepped[0] - exact).abs()
        };
        let (e1, e2) = (err_at(0.1), err_at(0.05));
        assert!(e1 < 1e-3, "error at eps = 0.1 too large: {e1}");
        let order = (e1 / e2).log2();
        assert!(
            order > 2.5,
            "observed order {order} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    #[test]
    fn determinism_bitwise() {
        let vf = presets::logistic(&[1.0, 2.0]);
        let spec = signals::FbmSpec::new(0.5, 2, 1.0, 128, 7).unwrap();
        let aug = signals::time_augment(&signals::sample_fbm(&spec).unwrap()).unwrap();
        let drive = signals::lift(&aug, 0.45).unwrap();
        let diss = Dissection::strided(&drive, 1).unwrap();
        let a = solve(&vf, &[0.5, 0.5], &drive, &diss, &SolveOptions::default()).unwrap();
        let b = solve(&vf, &[0.5, 0.5], &drive, &diss, &SolveOptions::default()).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn explosion_aborts_with_error() {
        let vf = scalar_vf(|x| x * x, |_| 0.0);
        let n = 32;
        let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let pts: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, 0.0]).collect();
        let drive = drive_from_points(times.clone(), pts, 1.0);
        let diss = Dissection::new(times).unwrap();
        let opts = SolveOptions {
            explosion_bound: 1e3,
            ..Default::default()
        };
        let res = solve(&vf, &[60.0], &drive, &diss, &opts);
        assert!(matches!(res, Err(Error::Explosion { .. })), "{res:?}");
    }

    #[test]
    fn off_grid_dissection_is_rejected() {
        let vf = scalar_vf(|_| 0.0, |_| 1.0);
        let times = vec![0.0, 0.5, 1.0];
        let pts = vec![vec![0.0, 0.0], vec![0.5, 0.1], vec![1.0, 0.4]];
        let drive = drive_from_points(times, pts, 1.0);
        let diss = Dissection::new(vec![0.0, 0.3, 1.0]).unwrap();
        assert!(matches!(
            solve(&vf, &[0.0], &drive, &diss, &SolveOptions::default()),
            Err(Error::GridMismatch { .. })
        ));
        // On-grid but not spanning the horizon is rejected too.
        let partial = Dissection::new(vec![0.0, 0.5]).unwrap();
        assert!(matches!(
            solve(&vf, &[0.0], &drive, &partial, &SolveOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn chen_composed_coarsening_equals_direct_composite_drive() {
        // Solving on a strided dissection uses Chen products of the fine
        // increments; rebuilding a coarse drive from those products and
        // solving on its full grid must agree exactly.
        let vf = presets::logistic(&[1.0, 1.0]);
        let spec = signals::FbmSpec::new(0.5, 2, 1.0, 64, 3).unwrap();
        let aug = signals::time_augment(&signals::sample_fbm(&spec).unwrap()).unwrap();
        let drive = signals::lift(&aug, 0.45).unwrap();
        let stride = 8;
        let coarse_diss = Dissection::strided(&drive, stride).unwrap();
        let a = solve(
            &vf,
            &[0.5, 0.5],
            &drive,
            &coarse_diss,
            &SolveOptions::default(),
        )
        .unwrap();

        let coarse_times: Vec<f64> = coarse_diss.times().to_vec();
        let coarse_incs: Vec<TruncatedTensor> = (0..drive.len() / stride)
            .map(|j| drive.increment(j * stride, (j + 1) * stride).unwrap())
            .collect();
        let coarse_drive = RoughPath::new(coarse_times.clone(), coarse_incs, 0.45).unwrap();
        let diss2 = Dissection::new(coarse_times).unwrap();
        let b = solve(
            &vf,
            &[0.5, 0.5],
            &coarse_drive,
            &diss2,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn convergence_slope_linear_field_smooth_driver() {
        // theta - 1 = 1 at alpha = 1; the fitted slope has to clear 0.8.
        let vf = scalar_vf(|x| -0.5 * x, |x| 0.2 + 0.3 * x);
        let w = signals::smooth_signal(1, 1.0, 1 << 10);
        let aug = signals::time_augment(&w).unwrap();
        let drive = signals::lift(&aug, 1.0).unwrap();
        let study = convergence_study(
            &vf,
            &[1.0],
            &drive,
            &[1, 2, 3, 4, 5],
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!study.tainted);
        let slope = study.slope.unwrap();
        assert!(slope >= 0.8, "slope {slope}");
        assert!((theta_exponent(1.0, None) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_slope_pure_ode() {
        let vf = scalar_vf(|x| (1.0 - x * x) * 0.7, |_| 0.0);
        let w = signals::smooth_signal(1, 1.0, 1 << 10);
        let aug = signals::time_augment(&w).unwrap();
        let drive = signals::lift(&aug, 1.0).unwrap();
        let study = convergence_study(
            &vf,
            &[0.3],
            &drive,
            &[1, 2, 3, 4, 5],
            &SolveOptions::default(),
        )
        .unwrap();
        let slope = study.slope.unwrap();
        assert!(slope >= 0.8, "slope {slope}");
    }

    #[test]
    fn exploding_level_taints_the_study() {
        // Stiff linear drift: explicit Euler diverges once lambda h > 2,
        // so the coarse levels blow up while the reference survives; the
        // study must report the taint instead of dropping those rows.
        let vf = scalar_vf(|x| -100.0 * x, |_| 0.0);
        let w = signals::smooth_signal(1, 1.0, 1 << 8);
        let aug = signals::time_augment(&w).unwrap();
        let drive = signals::lift(&aug, 1.0).unwrap();
        let opts = SolveOptions {
            explosion_bound: 1e6,
            ..Default::default()
        };
        let study = convergence_study(&vf, &[1.0], &drive, &[1, 2, 3, 4, 5, 6], &opts).unwrap();
        assert!(study.tainted);
        assert!(study.rows.iter().any(|r| r.exploded));
        assert!(study.rows.iter().any(|r| !r.exploded));
    }

    #[test]
    fn theta_exponent_brackets() {
        assert!((theta_exponent(0.9, None) - 1.8).abs() < 1e-12);
        assert!((theta_exponent(0.7, None) - 1.4).abs() < 1e-12);
        assert!((theta_exponent(0.4, None) - 1.2).abs() < 1e-12);
        // Explicit hints: strict floor of an integer drops by one.
        assert!((theta_exponent(0.9, Some(2.0)) - 1.8).abs() < 1e-12);
        assert!((theta_exponent(0.9, Some(2.5)) - 2.7).abs() < 1e-12);
    }
}
