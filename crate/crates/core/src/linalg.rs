//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything operates on plain `&[f64]` slices; matrices are row-major.
//! Dimensions here are desk-scale (states up to ~8, covariance grids up
//! to a few thousand), so there is no blocking or SIMD trickery.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `acc += c * v`.
pub(crate) fn axpy(acc: &mut [f64], c: f64, v: &[f64]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, x) in acc.iter_mut().zip(v) {
        *a += c * x;
    }
}

/// Row-major `rows x cols` matrix times vector.
pub(crate) fn mat_vec(m: &[f64], v: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    (0..rows)
        .map(|i| dot(&m[i * cols..(i + 1) * cols], v))
        .collect()
}

/// `acc += c * M v` without allocating.
pub(crate) fn mat_vec_acc(acc: &mut [f64], c: f64, m: &[f64], v: &[f64], rows: usize, cols: usize) {
    for i in 0..rows {
        acc[i] += c * dot(&m[i * cols..(i + 1) * cols], v);
    }
}

/// In-place lower Cholesky factorization of a symmetric matrix stored
/// row-major in `a` (`n x n`). On success the lower triangle holds `L`
/// with `L L^T = A`; the strict upper triangle is zeroed. Returns the
/// failing pivot index if the matrix is not numerically positive definite.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    for i in 0..n {
        for j in 0..=i {
            // Rows i and j are both contiguous prefixes: cache-friendly dot.
            let s = dot(&a[i * n..i * n + j], &a[j * n..j * n + j]);
            if i == j {
                let d = a[i * n + i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return Err(i);
                }
                a[i * n + i] = d.sqrt();
            } else {
                a[i * n + j] = (a[i * n + j] - s) / a[j * n + j];
            }
        }
        for j in i + 1..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Lower-triangular matrix times vector (`L` from `cholesky_in_place`).
pub(crate) fn lower_tri_vec(l: &[f64], z: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| dot(&l[i * n..i * n + i + 1], &z[..i + 1]))
        .collect()
}

/// Gram-Schmidt orthonormalization; vectors with residual norm below
/// `tol` are dropped.
pub(crate) fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut u = v.clone();
        for b in &basis {
            let c = dot(&u, b);
            axpy(&mut u, -c, b);
        }
        // One re-orthogonalization pass keeps the basis orthonormal to
        // machine precision even for nearly dependent inputs.
        for b in &basis {
            let c = dot(&u, b);
            axpy(&mut u, -c, b);
        }
        let n = norm(&u);
        if n > tol {
            u.iter_mut().for_each(|x| *x /= n);
            basis.push(u);
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `basis` in `R^dim`.
pub(crate) fn orthonormal_complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        all.push(e);
    }
    let full = orthonormalize(&all, 1e-10);
    full.into_iter().skip(basis.len()).collect()
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_recovers_simple_factor() {
        // A = L L^T with L = [[2,0],[1,3]].
        let mut a = vec![4.0, 2.0, 2.0, 10.0];
        cholesky_in_place(&mut a, 2).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-14);
        assert!((a[2] - 1.0).abs() < 1e-14);
        assert!((a[3] - 3.0).abs() < 1e-14);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert_eq!(cholesky_in_place(&mut a, 2), Err(1));
    }

    #[test]
    fn complement_spans_the_rest() {
        let basis = vec![vec![1.0, 0.0, 0.0]];
        let comp = orthonormal_complement(&basis, 3);
        assert_eq!(comp.len(), 2);
        for c in &comp {
            assert!(dot(c, &basis[0]).abs() < 1e-12);
            assert!((norm(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((ls_slope(&x, &y) - 2.5).abs() < 1e-12);
    }
}
