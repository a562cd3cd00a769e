//! Group-valued paths: time grids carrying truncated-signature increments
//! that satisfy Chen's relation, with homogeneous and Hoelder norms.

mod tensor;

pub use tensor::{TruncatedTensor, MAX_LEVEL};

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;

/// Truncation level for a Hoelder exponent: `floor(1/alpha)`, capped at 3.
/// Exponents at or below 1/4 (level 4+) are rejected.
pub fn level_for_alpha(alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let level = (1.0 / alpha).floor() as usize;
    if level > MAX_LEVEL {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(level.max(1))
}

/// A discrete group-valued path: strictly increasing times `t_0 < ... < t_n`
/// and one signature increment per interval `(t_{j-1}, t_j]`.
#[derive(Debug, Clone)]
pub struct RoughPath {
    times: Vec<f64>,
    increments: Vec<TruncatedTensor>,
    alpha: f64,
    level: usize,
}

impl RoughPath {
    pub fn new(times: Vec<f64>, increments: Vec<TruncatedTensor>, alpha: f64) -> Result<Self> {
        let level = level_for_alpha(alpha)?;
        if times.len() < 2 || increments.len() + 1 != times.len() {
            return Err(Error::InvalidParameter(
                "need n+1 times for n increments, n >= 1".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneGrid);
        }
        let dim = increments[0].dim();
        for g in &increments {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: g.dim(),
                    right: dim,
                });
            }
            if g.level() != level {
                return Err(Error::LevelMismatch {
                    left: g.level(),
                    right: level,
                });
            }
        }
        Ok(Self {
            times,
            increments,
            alpha,
            level,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.increments[0].dim()
    }

    /// Number of increments (one less than the number of grid times).
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Stored increment over the single interval `(t_{j}, t_{j+1}]`.
    pub fn step(&self, j: usize) -> &TruncatedTensor {
        &self.increments[j]
    }

    /// Group increment over `(t_a, t_b]`: the Chen product of the stored
    /// per-interval increments. `a == b` yields the identity.
    pub fn increment(&self, a: usize, b: usize) -> Result<TruncatedTensor> {
        let n = self.increments.len();
        if a > b || b > n {
            return Err(Error::IndexOutOfRange {
                index: a.max(b),
                len: n,
            });
        }
        let mut acc = TruncatedTensor::identity(self.dim(), self.level)?;
        for g in &self.increments[a..b] {
            acc = acc.tensor_product(g)?;
        }
        Ok(acc)
    }

    /// Hoelder seminorm over grid pairs:
    /// `max_{s<t} |||g_{s,t}||| / (t-s)^alpha`.
    ///
    /// All `O(n^2)` pairs are scanned up to 4096 grid points; beyond that,
    /// 10^6 pairs are subsampled with a fixed internal seed, so the value
    /// stays deterministic.
    pub fn holder_seminorm(&self) -> f64 {
        let n = self.increments.len();
        // Prefix signatures from 0 and their inverses make any pair an
        // O(1) product instead of an O(n) fold.
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(TruncatedTensor::identity(self.dim(), self.level).expect("valid"));
        for g in &self.increments {
            let last = prefix.last().unwrap();
            prefix.push(last.tensor_product(g).expect("consistent shapes"));
        }
        let pair_norm = |a: usize, b: usize| -> f64 {
            let g = prefix[a]
                .inverse()
                .tensor_product(&prefix[b])
                .expect("consistent");
            g.homogeneous_norm() / (self.times[b] - self.times[a]).powf(self.alpha)
        };
        let mut worst = 0.0f64;
        if n + 1 <= 4096 {
            for a in 0..n {
                for b in a + 1..=n {
                    worst = worst.max(pair_norm(a, b));
                }
            }
        } else {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x5eed_9a17);
            for _ in 0..1_000_000 {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(a + 1..=n);
                worst = worst.max(pair_norm(a, b));
            }
        }
        worst
    }

    /// Largest Chen-consistency residual over a sample of split triples
    /// `(a, m, b)`: `|g_{a,m} (x) g_{m,b} - g_{a,b}|_max`. Diagnostic used
    /// by tests; exact lifts keep this at rounding level.
    pub fn chen_residual(&self) -> f64 {
        let n = self.increments.len();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a + 1..=n {
                let m = (a + b) / 2;
                let left = self
                    .increment(a, m)
                    .and_then(|l| l.tensor_product(&self.increment(m, b).unwrap()))
                    .unwrap();
                let direct = self.increment(a, b).unwrap();
                worst = worst.max(left.max_abs_diff(&direct).unwrap());
            }
        }
        worst
    }
}
