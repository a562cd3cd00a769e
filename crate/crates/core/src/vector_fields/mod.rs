//! Drift/diffusion pairs `(b, sigma)` with derivative oracles, the
//! time-augmented field assembling both into one `d x (e+1)` matrix
//! (column 0 carries the drift), iterated vector-field compositions for
//! the step-N Euler scheme, and the Ito drift correction.
//!
//! Derivatives come from user-supplied closed forms where available and
//! central finite differences otherwise (steps `1e-5 (1+|x|)` for first
//! order, `1e-4 (1+|x|)` for second order). Regularity is a declared
//! hint, not something the library verifies.

pub mod presets;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;

pub type VecField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(x, k) -> d x d` Jacobian of diffusion column `k`, row-major.
pub type ColJacField = Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>;
/// `(x, k) -> d^3` Hessian of diffusion column `k`: entry `[i][j][l]`
/// is `d_j d_l sigma_{i,k}`.
pub type ColHessField = Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>;

const JAC_STEP_REL: f64 = 1e-5;
const HESS_STEP_REL: f64 = 1e-4;

/// Which noise-column products enter the Ito drift correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionConvention {
    /// Sum over all pairs `(i, j)` of noise columns.
    FullDoubleSum,
    /// Sum over the diagonal `i = j` only.
    Diagonal,
}

/// Drift `b : R^d -> R^d` and diffusion `sigma : R^d -> d x e`, plus
/// optional closed-form derivative oracles. Immutable and shareable;
/// field evaluation must be pure.
#[derive(Clone)]
pub struct VectorFieldPair {
    dim_state: usize,
    dim_noise: usize,
    drift: VecField,
    sigma: MatField,
    drift_jac: Option<MatField>,
    drift_hess: Option<MatField>,
    sigma_col_jac: Option<ColJacField>,
    sigma_col_hess: Option<ColHessField>,
    fd_fallback: bool,
    lipschitz_hint: Option<f64>,
}

impl std::fmt::Debug for VectorFieldPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldPair")
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field(
                "has_jacobians",
                &(self.drift_jac.is_some() && self.sigma_col_jac.is_some()),
            )
            .field(
                "has_hessians",
                &(self.drift_hess.is_some() && self.sigma_col_hess.is_some()),
            )
            .field("fd_fallback", &self.fd_fallback)
            .finish()
    }
}

impl VectorFieldPair {
    pub fn new(dim_state: usize, dim_noise: usize, drift: VecField, sigma: MatField) -> Self {
        Self {
            dim_state,
            dim_noise,
            drift,
            sigma,
            drift_jac: None,
            drift_hess: None,
            sigma_col_jac: None,
            sigma_col_hess: None,
            fd_fallback: true,
            lipschitz_hint: None,
        }
    }

    pub fn with_drift_jacobian(mut self, jac: MatField) -> Self {
        self.drift_jac = Some(jac);
        self
    }

    pub fn with_drift_hessian(mut self, hess: MatField) -> Self {
        self.drift_hess = Some(hess);
        self
    }

    pub fn with_sigma_column_jacobian(mut self, jac: ColJacField) -> Self {
        self.sigma_col_jac = Some(jac);
        self
    }

    pub fn with_sigma_column_hessian(mut self, hess: ColHessField) -> Self {
        self.sigma_col_hess = Some(hess);
        self
    }

    /// Disable or re-enable finite-difference fallbacks for missing
    /// derivative oracles.
    pub fn with_fd_fallback(mut self, enabled: bool) -> Self {
        self.fd_fallback = enabled;
        self
    }

    /// Declared regularity tag (gamma); informational.
    pub fn with_lipschitz_hint(mut self, gamma: f64) -> Self {
        self.lipschitz_hint = Some(gamma);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.dim_state
    }

    pub fn noise_dim(&self) -> usize {
        self.dim_noise
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    /// Diffusion matrix, row-major `d x e`.
    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        (self.sigma)(x)
    }

    pub fn sigma_col(&self, x: &[f64], k: usize) -> Vec<f64> {
        let s = self.sigma(x);
        let e = self.dim_noise;
        (0..self.dim_state).map(|i| s[i * e + k]).collect()
    }

    /// The time-augmented field `f(x)`, row-major `d x (e+1)`:
    /// column 0 is `b(x)`, columns `1..=e` are the diffusion columns.
    pub fn augmented_matrix(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim_state;
        let e = self.dim_noise;
        let b = self.drift(x);
        let s = self.sigma(x);
        let mut f = vec![0.0; d * (e + 1)];
        for i in 0..d {
            f[i * (e + 1)] = b[i];
            for k in 0..e {
                f[i * (e + 1) + 1 + k] = s[i * e + k];
            }
        }
        f
    }

    /// Column `l` of the augmented field (0 = drift).
    pub fn augmented_col(&self, x: &[f64], l: usize) -> Vec<f64> {
        if l == 0 {
            self.drift(x)
        } else {
            self.sigma_col(x, l - 1)
        }
    }

    fn fd_col_jacobian(&self, x: &[f64], l: usize) -> Vec<f64> {
        let d = self.dim_state;
        let h = JAC_STEP_REL * (1.0 + linalg::norm(x));
        let mut jac = vec![0.0; d * d];
        let mut xp = x.to_vec();
        for j in 0..d {
            xp[j] = x[j] + h;
            let fp = self.augmented_col(&xp, l);
            xp[j] = x[j] - h;
            let fm = self.augmented_col(&xp, l);
            xp[j] = x[j];
            for i in 0..d {
                jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    /// Jacobian of augmented column `l` at `x`, row-major `d x d`:
    /// closed form when supplied, central differences otherwise.
    pub fn col_jacobian(&self, x: &[f64], l: usize) -> Result<Vec<f64>> {
        let oracle = if l == 0 {
            self.drift_jac.as_ref().map(|j| j(x))
        } else {
            self.sigma_col_jac.as_ref().map(|j| j(x, l - 1))
        };
        match oracle {
            Some(j) => Ok(j),
            None if self.fd_fallback => Ok(self.fd_col_jacobian(x, l)),
            None => Err(Error::MissingDerivativeOracle { order: 1 }),
        }
    }

    /// Hessian of augmented column `l` at `x` (`d^3`, `[i][j][k]` is
    /// `d_j d_k f_{i,l}`): closed form when supplied, otherwise central
    /// differences of the Jacobian.
    pub fn col_hessian(&self, x: &[f64], l: usize) -> Result<Vec<f64>> {
        let oracle = if l == 0 {
            self.drift_hess.as_ref().map(|h| h(x))
        } else {
            self.sigma_col_hess.as_ref().map(|h| h(x, l - 1))
        };
        if let Some(h) = oracle {
            return Ok(h);
        }
        if !self.fd_fallback {
            return Err(Error::MissingDerivativeOracle { order: 2 });
        }
        self.fd_col_hessian(x, l)
    }

    /// Iterated vector-field composition `f_{i_1} ... f_{i_k} I (x)` for
    /// augmented column indices (0-based, 0 = drift), `k <= 3`:
    ///
    /// - `k = 1`: column `i_1`;
    /// - `k = 2`: `Df_{i_2}(x) f_{i_1}(x)`;
    /// - `k = 3`: `D^2 f_{i_3}(x)[f_{i_2}(x), f_{i_1}(x)]
    ///            + Df_{i_3}(x) Df_{i_2}(x) f_{i_1}(x)`.
    pub fn iterated_apply(&self, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        let m = self.dim_noise + 1;
        if indices.is_empty() || indices.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "composition order {} outside 1..=3",
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        let d = self.dim_state;
        match *indices {
            [i1] => Ok(self.augmented_col(x, i1)),
            [i1, i2] => {
                let u = self.augmented_col(x, i1);
                let jac = self.col_jacobian(x, i2)?;
                Ok(linalg::mat_vec(&jac, &u, d, d))
            }
            [i1, i2, i3] => {
                let u = self.augmented_col(x, i1);
                let v = self.augmented_col(x, i2);
                let j2 = self.col_jacobian(x, i2)?;
                let j3 = self.col_jacobian(x, i3)?;
                let h3 = self.col_hessian(x, i3)?;
                let ju = linalg::mat_vec(&j2, &u, d, d);
                let mut out = linalg::mat_vec(&j3, &ju, d, d);
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        for k in 0..d {
                            acc += h3[(i * d + j) * d + k] * v[j] * u[k];
                        }
                    }
                    out[i] += acc;
                }
                Ok(out)
            }
            _ => unreachable!(),
        }
    }

    /// Drift-corrected pair turning a Stratonovich-type formulation into
    /// the Ito one: the new drift is
    /// `b(x) - 1/2 sum_{(i,j)} sum_k sigma_{k,i}(x) d_k sigma_{.,j}(x)`,
    /// with the `(i, j)` range picked by `convention`. The diffusion and
    /// its oracles are carried over; the corrected drift falls back to
    /// finite differences for its own derivatives.
    pub fn ito_correction(&self, convention: CorrectionConvention) -> VectorFieldPair {
        let inner = self.clone();
        let d = self.dim_state;
        let e = self.dim_noise;
        let drift: VecField = Arc::new(move |x: &[f64]| {
            let mut b = inner.drift(x);
            for i in 0..e {
                for j in 0..e {
                    if convention == CorrectionConvention::Diagonal && i != j {
                        continue;
                    }
                    let si = inner.sigma_col(x, i);
                    let jj = inner
                        .col_jacobian(x, j + 1)
                        .expect("diffusion jacobian unavailable for the correction");
                    linalg::mat_vec_acc(&mut b, -0.5, &jj, &si, d, d);
                }
            }
            b
        });
        let mut out = VectorFieldPair::new(d, e, drift, self.sigma.clone());
        out.sigma_col_jac = self.sigma_col_jac.clone();
        out.sigma_col_hess = self.sigma_col_hess.clone();
        out.fd_fallback = true;
        out.lipschitz_hint = self.lipschitz_hint;
        out
    }

    /// Compare supplied Jacobian/Hessian oracles against central finite
    /// differences at random probe points in `[-2, 2]^d`; returns the
    /// worst relative deviation.
    pub fn check_oracles(&self, probes: usize, rng: &mut impl rand::Rng) -> Result<f64> {
        let d = self.dim_state;
        let mut worst = 0.0f64;
        let mut compare = |a: &[f64], b: &[f64]| {
            let scale = 1.0 + b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs() / scale);
            }
        };
        for _ in 0..probes {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for l in 0..=self.dim_noise {
                let supplied = if l == 0 {
                    self.drift_jac.as_ref().map(|j| j(&x))
                } else {
                    self.sigma_col_jac.as_ref().map(|j| j(&x, l - 1))
                };
                if let Some(j) = supplied {
                    compare(&j, &self.fd_col_jacobian(&x, l));
                }
                let supplied_hess = if l == 0 {
                    self.drift_hess.as_ref().map(|h| h(&x))
                } else {
                    self.sigma_col_hess.as_ref().map(|h| h(&x, l - 1))
                };
                if let Some(h) = supplied_hess {
                    compare(&h, &self.fd_col_hessian(&x, l)?);
                }
            }
        }
        Ok(worst)
    }

    /// Central differences of the column Jacobian (used by the oracle
    /// check even when a closed-form Hessian is supplied).
    fn fd_col_hessian(&self, x: &[f64], l: usize) -> Result<Vec<f64>> {
        let d = self.dim_state;
        let h = HESS_STEP_REL * (1.0 + linalg::norm(x));
        let mut hess = vec![0.0; d * d * d];
        let mut xp = x.to_vec();
        for k in 0..d {
            xp[k] = x[k] + h;
            let jp = self.col_jacobian(&xp, l)?;
            xp[k] = x[k] - h;
            let jm = self.col_jacobian(&xp, l)?;
            xp[k] = x[k];
            for i in 0..d {
                for j in 0..d {
                    hess[(i * d + j) * d + k] = (jp[i * d + j] - jm[i * d + j]) / (2.0 * h);
                }
            }
        }
        Ok(hess)
    }
}
