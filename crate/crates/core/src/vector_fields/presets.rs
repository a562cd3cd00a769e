//! Built-in field presets, selectable from the CLI by name. Each ships
//! closed-form Jacobian and Hessian oracles and a default body to check
//! invariance against. User fields enter through the library API.

use std::sync::Arc;

use crate::convex_geometry::ConvexBody;
use crate::error::{Error, Result};
use crate::vector_fields::VectorFieldPair;

/// Multidimensional logistic field: drift `b_i = m_i x_i (1 - x_i)` and
/// diagonal diffusion `sigma_{ii} = x_i (1 - x_i)`; both vanish on the
/// faces of the unit box, which is what keeps trajectories inside.
pub fn logistic(m: &[f64]) -> VectorFieldPair {
    let d = m.len();
    let rates = m.to_vec();
    let drift = {
        let rates = rates.clone();
        Arc::new(move |x: &[f64]| {
            rates
                .iter()
                .zip(x)
                .map(|(mi, xi)| mi * xi * (1.0 - xi))
                .collect::<Vec<f64>>()
        })
    };
    let sigma = Arc::new(move |x: &[f64]| {
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            s[i * d + i] = x[i] * (1.0 - x[i]);
        }
        s
    });
    let drift_jac = {
        let rates = rates.clone();
        Arc::new(move |x: &[f64]| {
            let d = rates.len();
            let mut j = vec![0.0; d * d];
            for i in 0..d {
                j[i * d + i] = rates[i] * (1.0 - 2.0 * x[i]);
            }
            j
        })
    };
    let drift_hess = {
        let rates = rates.clone();
        Arc::new(move |_x: &[f64]| {
            let d = rates.len();
            let mut h = vec![0.0; d * d * d];
            for i in 0..d {
                h[(i * d + i) * d + i] = -2.0 * rates[i];
            }
            h
        })
    };
    let sigma_jac = Arc::new(move |x: &[f64], k: usize| {
        let mut j = vec![0.0; d * d];
        j[k * d + k] = 1.0 - 2.0 * x[k];
        j
    });
    let sigma_hess = Arc::new(move |_x: &[f64], k: usize| {
        let mut h = vec![0.0; d * d * d];
        h[(k * d + k) * d + k] = -2.0;
        h
    });
    VectorFieldPair::new(d, d, drift, sigma)
        .with_drift_jacobian(drift_jac)
        .with_drift_hessian(drift_hess)
        .with_sigma_column_jacobian(sigma_jac)
        .with_sigma_column_hessian(sigma_hess)
}

/// Unit box, the natural home of the logistic field.
pub fn unit_box(d: usize) -> ConvexBody {
    ConvexBody::make_box(vec![0.0; d], vec![1.0; d]).expect("valid unit box")
}

/// Logistic drift with the diagonal diffusion scaled by `scale`; used to
/// build deliberately mismatched comparison pairs.
pub fn logistic_scaled_sigma(m: &[f64], scale: f64) -> VectorFieldPair {
    let d = m.len();
    let sigma = Arc::new(move |x: &[f64]| {
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            s[i * d + i] = scale * x[i] * (1.0 - x[i]);
        }
        s
    });
    let sigma_jac = Arc::new(move |x: &[f64], k: usize| {
        let mut j = vec![0.0; d * d];
        j[k * d + k] = scale * (1.0 - 2.0 * x[k]);
        j
    });
    let sigma_hess = Arc::new(move |_x: &[f64], k: usize| {
        let mut h = vec![0.0; d * d * d];
        h[(k * d + k) * d + k] = -2.0 * scale;
        h
    });
    let drift = Arc::new({
        let m = m.to_vec();
        move |x: &[f64]| {
            m.iter()
                .zip(x)
                .map(|(mi, xi)| mi * xi * (1.0 - xi))
                .collect::<Vec<f64>>()
        }
    });
    let drift_jac = Arc::new({
        let m = m.to_vec();
        move |x: &[f64]| {
            let d = m.len();
            let mut j = vec![0.0; d * d];
            for i in 0..d {
                j[i * d + i] = m[i] * (1.0 - 2.0 * x[i]);
            }
            j
        }
    });
    let drift_hess = Arc::new({
        let m = m.to_vec();
        move |_x: &[f64]| {
            let d = m.len();
            let mut h = vec![0.0; d * d * d];
            for i in 0..d {
                h[(i * d + i) * d + i] = -2.0 * m[i];
            }
            h
        }
    });
    VectorFieldPair::new(d, d, drift, sigma)
        .with_drift_jacobian(drift_jac)
        .with_drift_hessian(drift_hess)
        .with_sigma_column_jacobian(sigma_jac)
        .with_sigma_column_hessian(sigma_hess)
}

/// Linear field `b = rate x` with constant diagonal diffusion `vol`.
pub fn linear(d: usize, e: usize, rate: f64, vol: f64) -> VectorFieldPair {
    let drift = Arc::new(move |x: &[f64]| x.iter().map(|xi| rate * xi).collect::<Vec<f64>>());
    let sigma = Arc::new(move |_x: &[f64]| {
        let mut s = vec![0.0; d * e];
        for i in 0..d.min(e) {
            s[i * e + i] = vol;
        }
        s
    });
    let drift_jac = Arc::new(move |_x: &[f64]| {
        let mut j = vec![0.0; d * d];
        for i in 0..d {
            j[i * d + i] = rate;
        }
        j
    });
    let zero_jac = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d]);
    let zero_hess = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d * d]);
    let zero_drift_hess = Arc::new(move |_x: &[f64]| vec![0.0; d * d * d]);
    VectorFieldPair::new(d, e, drift, sigma)
        .with_drift_jacobian(drift_jac)
        .with_drift_hessian(zero_drift_hess)
        .with_sigma_column_jacobian(zero_jac)
        .with_sigma_column_hessian(zero_hess)
}

/// Planar rotation noise `sigma(x) = (-x_2, x_1)` with zero drift: the
/// noise column is tangent to every sphere around the origin, so the unit
/// ball (indeed every sphere) is preserved.
pub fn rotation_ball() -> (VectorFieldPair, ConvexBody) {
    let drift = Arc::new(|_x: &[f64]| vec![0.0, 0.0]);
    let sigma = Arc::new(|x: &[f64]| vec![-x[1], x[0]]);
    let drift_jac = Arc::new(|_x: &[f64]| vec![0.0; 4]);
    let sigma_jac = Arc::new(|_x: &[f64], _k: usize| vec![0.0, -1.0, 1.0, 0.0]);
    let zero_hess = Arc::new(|_x: &[f64], _k: usize| vec![0.0; 8]);
    let zero_drift_hess = Arc::new(|_x: &[f64]| vec![0.0; 8]);
    let vf = VectorFieldPair::new(2, 1, drift, sigma)
        .with_drift_jacobian(drift_jac)
        .with_drift_hessian(zero_drift_hess)
        .with_sigma_column_jacobian(sigma_jac)
        .with_sigma_column_hessian(zero_hess);
    (
        vf,
        ConvexBody::make_ball(vec![0.0, 0.0], 1.0).expect("valid ball"),
    )
}

/// Constant outward drift `b = +e_1`, no noise: violates the invariance
/// condition on the face `x_1 = 1` of the unit box. Falsification preset.
pub fn outward_box(d: usize) -> (VectorFieldPair, ConvexBody) {
    let drift = Arc::new(move |_x: &[f64]| {
        let mut b = vec![0.0; d];
        b[0] = 1.0;
        b
    });
    let sigma = Arc::new(move |_x: &[f64]| vec![0.0; d]);
    let zero_jac = Arc::new(move |_x: &[f64]| vec![0.0; d * d]);
    let zero_col_jac = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d]);
    let zero_hess = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d * d]);
    let zero_drift_hess = Arc::new(move |_x: &[f64]| vec![0.0; d * d * d]);
    let vf = VectorFieldPair::new(d, 1, drift, sigma)
        .with_drift_jacobian(zero_jac)
        .with_drift_hessian(zero_drift_hess)
        .with_sigma_column_jacobian(zero_col_jac)
        .with_sigma_column_hessian(zero_hess);
    (vf, unit_box(d))
}

/// Identity diffusion on the unit ball: every noise column has a radial
/// component on the sphere, so the invariance condition fails there.
/// Falsification preset.
pub fn identity_ball(d: usize) -> (VectorFieldPair, ConvexBody) {
    let drift = Arc::new(move |_x: &[f64]| vec![0.0; d]);
    let sigma = Arc::new(move |_x: &[f64]| {
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            s[i * d + i] = 1.0;
        }
        s
    });
    let zero_jac = Arc::new(move |_x: &[f64]| vec![0.0; d * d]);
    let zero_col_jac = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d]);
    let zero_hess = Arc::new(move |_x: &[f64], _k: usize| vec![0.0; d * d * d]);
    let zero_drift_hess = Arc::new(move |_x: &[f64]| vec![0.0; d * d * d]);
    let vf = VectorFieldPair::new(d, d, drift, sigma)
        .with_drift_jacobian(zero_jac)
        .with_drift_hessian(zero_drift_hess)
        .with_sigma_column_jacobian(zero_col_jac)
        .with_sigma_column_hessian(zero_hess);
    (
        vf,
        ConvexBody::make_ball(vec![0.0; d], 1.0).expect("valid ball"),
    )
}

/// Preset registry keyed by name. `m` feeds the logistic rates (its
/// length fixes the dimension there); `dim` sizes the other presets.
pub fn by_name(name: &str, dim: usize, m: Option<&[f64]>) -> Result<(VectorFieldPair, ConvexBody)> {
    match name {
        "logistic" => {
            let rates: Vec<f64> = match m {
                Some(m) if !m.is_empty() => m.to_vec(),
                _ => vec![1.0; dim],
            };
            let d = rates.len();
            Ok((logistic(&rates), unit_box(d)))
        }
        "linear" => Ok((
            linear(dim, dim, -0.5, 0.3),
            ConvexBody::make_ball(vec![0.0; dim], 1.0).expect("valid ball"),
        )),
        "rotation-ball" => Ok(rotation_ball()),
        "outward-box" => Ok(outward_box(dim)),
        "identity-ball" => Ok(identity_ball(dim)),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_presets() {
        for name in [
            "logistic",
            "linear",
            "rotation-ball",
            "outward-box",
            "identity-ball",
        ] {
            assert!(by_name(name, 2, None).is_ok(), "{name}");
        }
        assert!(matches!(
            by_name("nope", 2, None),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn logistic_vanishes_on_faces() {
        let vf = logistic(&[1.5, 2.0]);
        for x in [[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.9, 1.0]] {
            let b = vf.drift(&x);
            let s = vf.sigma(&x);
            for i in 0..2 {
                if x[i] == 0.0 || x[i] == 1.0 {
                    assert_eq!(b[i], 0.0);
                    assert_eq!(s[i * 2 + i], 0.0);
                }
            }
        }
    }
}
