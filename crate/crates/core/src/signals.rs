//! Fractional Brownian motion sampling, time augmentation, and lifting of
//! sampled signals to group-valued paths via piecewise-linear signatures.
//!
//! Sampling uses the exact covariance `cov(B_s, B_t) = (s^{2H} + t^{2H}
//! - |t-s|^{2H}) / 2` per coordinate: a Cholesky factor of the grid
//! covariance for general `H` (grids up to 8192 steps), and the exact
//! independent-increment recursion in the Brownian case `H = 1/2`, where
//! the increment covariance is diagonal and grids can be much longer.
//! Every path is reproducible from `(seed, path index)` alone.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fmt_float;
use crate::linalg;
use crate::parallel::{map_indexed, Threads};
use crate::rough_path::{level_for_alpha, RoughPath, TruncatedTensor};

/// Cholesky sampling is quadratic in memory; this caps the grid for
/// general Hurst indices. The Brownian fast path has no such cap.
pub const MAX_CHOLESKY_STEPS: usize = 8192;

/// Sampling plan for a fractional Brownian motion path.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
}

impl FbmSpec {
    /// `hurst` must lie in (1/4, 1) so that sampled paths admit a lift of
    /// level at most 3.
    pub fn new(hurst: f64, dim: usize, horizon: f64, steps: usize, seed: u64) -> Result<Self> {
        if !(hurst > 0.25 && hurst < 1.0) {
            return Err(Error::InvalidHurst(hurst));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "signal dimension must be positive".into(),
            ));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if steps < 2 {
            return Err(Error::InvalidParameter("need at least two steps".into()));
        }
        Ok(Self {
            hurst,
            dim,
            horizon,
            steps,
            seed,
        })
    }

    /// Uniform grid `0, T/n, ..., T`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|j| j as f64 * self.horizon / self.steps as f64)
            .collect()
    }
}

/// A signal sampled on a strictly increasing grid. `values[j]` is the
/// point at `times[j]`; fBm samples start at the origin.
#[derive(Debug, Clone)]
pub struct SampledSignal {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub augmented: bool,
    /// Hurst index when the signal came from `sample_fbm`; used to check
    /// the `alpha < H` lifting precondition.
    pub hurst: Option<f64>,
}

impl SampledSignal {
    pub fn dims(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Keep every `stride`-th grid point. The grid must end on a kept
    /// point so the horizon is preserved.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let n = self.times.len() - 1;
        if stride == 0 || n % stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "stride {stride} does not divide {n} intervals"
            )));
        }
        Ok(Self {
            times: self.times.iter().copied().step_by(stride).collect(),
            values: self.values.iter().cloned().step_by(stride).collect(),
            augmented: self.augmented,
            hurst: self.hurst,
        })
    }

    /// CSV with header `t,w1,...,wD` and 17-significant-digit floats.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let d = self.dims();
        write!(out, "t")?;
        for k in 1..=d {
            write!(out, ",w{k}")?;
        }
        writeln!(out)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            write!(out, "{}", fmt_float(*t))?;
            for x in row {
                write!(out, ",{}", fmt_float(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Exact fBm covariance `(|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2` of one
/// coordinate; coordinates are independent.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidHurst(hurst));
    }
    if s < 0.0 || t < 0.0 {
        return Err(Error::InvalidParameter("times must be nonnegative".into()));
    }
    Ok(fbm_cov_raw(s, t, hurst))
}

#[inline]
fn fbm_cov_raw(s: f64, t: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

/// Mix `(seed, domain, index)` into an independent stream seed
/// (splitmix64 finalization, applied twice).
pub(crate) fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut x = seed ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = x.wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    for _ in 0..2 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

pub(crate) fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, domain, index))
}

const FBM_DOMAIN: u64 = 0xfb;

/// Precomputed sampling kernel, shared across an ensemble.
#[derive(Clone)]
pub struct FbmKernel {
    spec: FbmSpec,
    inner: KernelInner,
}

#[derive(Clone)]
enum KernelInner {
    /// `H = 1/2`: independent increments with standard deviation
    /// `sqrt(dt)`.
    Brownian { sqrt_dt: f64 },
    /// General `H`: lower Cholesky factor of the grid covariance
    /// (times `t_1..t_n`), row-major `n x n`.
    Cholesky { factor: Arc<Vec<f64>>, n: usize },
}

impl FbmKernel {
    pub fn new(spec: &FbmSpec) -> Result<Self> {
        let n = spec.steps;
        let dt = spec.horizon / n as f64;
        if spec.hurst == 0.5 {
            return Ok(Self {
                spec: spec.clone(),
                inner: KernelInner::Brownian { sqrt_dt: dt.sqrt() },
            });
        }
        if n > MAX_CHOLESKY_STEPS {
            return Err(Error::InvalidParameter(format!(
                "{n} steps exceeds the Cholesky bound {MAX_CHOLESKY_STEPS} for H != 1/2"
            )));
        }
        let times: Vec<f64> = (1..=n).map(|j| j as f64 * dt).collect();
        let build = |jitter: f64| -> Vec<f64> {
            let mut a = vec![0.0; n * n];
            let mut max_diag = 0.0f64;
            for i in 0..n {
                for j in 0..=i {
                    let c = fbm_cov_raw(times[i], times[j], spec.hurst);
                    a[i * n + j] = c;
                    a[j * n + i] = c;
                }
                max_diag = max_diag.max(a[i * n + i]);
            }
            if jitter > 0.0 {
                for i in 0..n {
                    a[i * n + i] += jitter * max_diag;
                }
            }
            a
        };
        let mut a = build(0.0);
        if linalg::cholesky_in_place(&mut a, n).is_err() {
            // Round-off can push near-singular grids (H near 1) slightly
            // indefinite; retry once with a diagonal jitter.
            a = build(1e-12);
            if let Err(pivot) = linalg::cholesky_in_place(&mut a, n) {
                return Err(Error::NotPositiveDefinite { pivot });
            }
        }
        Ok(Self {
            spec: spec.clone(),
            inner: KernelInner::Cholesky {
                factor: Arc::new(a),
                n,
            },
        })
    }

    /// Draw the path for ensemble member `index`.
    pub fn sample(&self, index: u64) -> SampledSignal {
        let mut rng = stream_rng(self.spec.seed, FBM_DOMAIN, index);
        let n = self.spec.steps;
        let d = self.spec.dim;
        let mut values = vec![vec![0.0; d]; n + 1];
        match &self.inner {
            KernelInner::Brownian { sqrt_dt } => {
                for k in 0..d {
                    let mut acc = 0.0;
                    for j in 1..=n {
                        let z: f64 = rng.sample(StandardNormal);
                        acc += sqrt_dt * z;
                        values[j][k] = acc;
                    }
                }
            }
            KernelInner::Cholesky { factor, n: fn_ } => {
                for k in 0..d {
                    let z: Vec<f64> = (0..*fn_).map(|_| rng.sample(StandardNormal)).collect();
                    let path = linalg::lower_tri_vec(factor, &z, *fn_);
                    for j in 1..=n {
                        values[j][k] = path[j - 1];
                    }
                }
            }
        }
        SampledSignal {
            times: self.spec.grid(),
            values,
            augmented: false,
            hurst: Some(self.spec.hurst),
        }
    }
}

/// Sample the path with ensemble index 0. Deterministic per spec.
pub fn sample_fbm(spec: &FbmSpec) -> Result<SampledSignal> {
    Ok(FbmKernel::new(spec)?.sample(0))
}

/// Sample `n_paths` independent paths; the covariance factor is built
/// once, and path `i` depends only on `(spec.seed, i)`.
pub fn sample_fbm_ensemble(
    spec: &FbmSpec,
    n_paths: usize,
    threads: Threads,
) -> Result<Vec<SampledSignal>> {
    let kernel = FbmKernel::new(spec)?;
    Ok(map_indexed(n_paths, threads, |i| kernel.sample(i as u64)))
}

/// Deterministic smooth driver for convergence experiments:
/// `w^{(k)}_t = (sin(2 pi t + pi k / 2) - sin(pi k / 2)) / (2 pi)`,
/// sampled on a uniform grid. 1-Hoelder, starts at the origin.
pub fn smooth_signal(dim: usize, horizon: f64, steps: usize) -> SampledSignal {
    let times: Vec<f64> = (0..=steps)
        .map(|j| j as f64 * horizon / steps as f64)
        .collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let values = times
        .iter()
        .map(|t| {
            (0..dim)
                .map(|k| {
                    let phase = std::f64::consts::FRAC_PI_2 * k as f64;
                    ((two_pi * t + phase).sin() - phase.sin()) / two_pi
                })
                .collect()
        })
        .collect();
    SampledSignal {
        times,
        values,
        augmented: false,
        hurst: None,
    }
}

/// Prepend the running time as coordinate 1: `W_t = (t, w_t)`.
pub fn time_augment(w: &SampledSignal) -> Result<SampledSignal> {
    if w.augmented {
        return Err(Error::AlreadyAugmented);
    }
    let values = w
        .times
        .iter()
        .zip(&w.values)
        .map(|(t, row)| {
            let mut v = Vec::with_capacity(row.len() + 1);
            v.push(*t);
            v.extend_from_slice(row);
            v
        })
        .collect();
    Ok(SampledSignal {
        times: w.times.clone(),
        values,
        augmented: true,
        hurst: w.hurst,
    })
}

/// Drop the time coordinate added by `time_augment`.
pub fn drop_time(w: &SampledSignal) -> Result<SampledSignal> {
    if !w.augmented {
        return Err(Error::NotAugmented);
    }
    Ok(SampledSignal {
        times: w.times.clone(),
        values: w.values.iter().map(|row| row[1..].to_vec()).collect(),
        augmented: false,
        hurst: w.hurst,
    })
}

/// Lift a sampled signal to a group-valued path at level `floor(1/alpha)`
/// by taking segment signatures of the piecewise-linear interpolation.
/// Chen consistency holds by construction.
pub fn lift(w: &SampledSignal, alpha: f64) -> Result<RoughPath> {
    let level = level_for_alpha(alpha)?;
    if let Some(h) = w.hurst {
        if alpha >= h {
            return Err(Error::InvalidAlpha(alpha));
        }
    }
    let increments = w
        .values
        .windows(2)
        .map(|pair| {
            let v: Vec<f64> = pair[1].iter().zip(&pair[0]).map(|(b, a)| b - a).collect();
            TruncatedTensor::segment_signature(&v, level)
        })
        .collect::<Result<Vec<_>>>()?;
    RoughPath::new(w.times.clone(), increments, alpha)
}

/// Default lifting exponent for a Hurst index: `H - 0.05`, pulled back
/// into `(1/4, H)` when that would leave the admissible bracket.
pub fn default_alpha(hurst: f64) -> f64 {
    let a = hurst - 0.05;
    if a > 0.25 {
        a
    } else {
        (hurst + 0.25) / 2.0
    }
}

/// Iterated-logarithm scale `l(t) = sqrt(2 log log (1/t))`, finite and
/// positive for `t` strictly inside `(0, 1/e)`.
pub fn lil_scale(t: f64) -> f64 {
    (2.0 * (1.0 / t).ln().ln()).sqrt()
}

/// Time window over which the small-time scaling statistic is read off.
///
/// The scale `l` vanishes at `t = 1/e ~ 0.368`, so the raw ratio
/// degenerates near that endpoint; the default window therefore stops at
/// `t = 0.3`, where `l` still exceeds 0.6, and starts at `horizon /
/// 2^14`. Results are window-dependent and the window is part of every
/// report.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LilWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl LilWindow {
    pub fn default_for(horizon: f64) -> Self {
        Self {
            t_min: horizon * (2.0f64).powi(-14),
            t_max: 0.3,
        }
    }
}

/// Finite-resolution proxy for the small-time liminf of
/// `<delta, w_t> / (t^beta l(t))`: the minimum of that ratio over grid
/// times inside the window, one value per direction.
pub fn lil_statistic(
    w: &SampledSignal,
    beta: f64,
    directions: &[Vec<f64>],
    window: &LilWindow,
) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} outside (0,1)"
        )));
    }
    let e_inv = (-1.0f64).exp();
    if window.t_min >= e_inv {
        return Err(Error::InvalidParameter(
            "window start must lie below 1/e where the scale is defined".into(),
        ));
    }
    let d = w.dims();
    for dir in directions {
        if dir.len() != d {
            return Err(Error::DimensionMismatch {
                left: dir.len(),
                right: d,
            });
        }
    }
    let t_hi = window.t_max.min(e_inv);
    let admissible: Vec<(usize, f64)> = w
        .times
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &t)| t >= window.t_min && t <= t_hi)
        .map(|(j, &t)| {
            let l = lil_scale(t);
            (j, t.powf(beta) * l)
        })
        .filter(|(_, denom)| denom.is_finite() && *denom > 0.0)
        .collect();
    if admissible.is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok(directions
        .iter()
        .map(|dir| {
            admissible
                .iter()
                .map(|(j, denom)| linalg::dot(dir, &w.values[*j]) / denom)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}
