//! Truncated tensor algebra over `R^m` up to level 3.
//!
//! An element stores dense arrays `T_k` of shape `m^k` for `k = 1..=N`;
//! the scalar level 0 is implicitly 1. Signatures of paths live in the
//! group of such elements: concatenating two paths multiplies their
//! signatures (Chen's identity), reversing a path inverts its signature,
//! and for a straight segment with increment `v` the levels are
//! `v, v^{(x)2}/2!, v^{(x)3}/3!`.

use crate::error::{Error, Result};

/// Levels are capped here; drivers rougher than that are out of scope.
pub const MAX_LEVEL: usize = 3;

#[inline]
fn idx2(dim: usize, i: usize, j: usize) -> usize {
    i * dim + j
}

#[inline]
fn idx3(dim: usize, i: usize, j: usize, k: usize) -> usize {
    (i * dim + j) * dim + k
}

/// Element of the truncated tensor algebra over `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    /// `levels[k-1]` is the dense order-`k` tensor, length `dim^k`.
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    fn check_level(level: usize) -> Result<()> {
        if level == 0 || level > MAX_LEVEL {
            return Err(Error::UnsupportedLevel(level));
        }
        Ok(())
    }

    /// The identity element (all tensor levels zero).
    pub fn identity(dim: usize, level: usize) -> Result<Self> {
        Self::check_level(level)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let levels = (1..=level).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        Ok(Self { dim, levels })
    }

    /// Build from explicit level data; shapes must match `dim^k`.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_level(levels.len())?;
        for (k, t) in levels.iter().enumerate() {
            let want = dim.pow(k as u32 + 1);
            if t.len() != want {
                return Err(Error::DimensionMismatch {
                    left: t.len(),
                    right: want,
                });
            }
        }
        Ok(Self { dim, levels })
    }

    /// Signature of a straight segment with increment `v`:
    /// level `k` is `v^{(x)k} / k!`.
    pub fn segment_signature(v: &[f64], level: usize) -> Result<Self> {
        Self::check_level(level)?;
        let d = v.len();
        let mut out = Self::identity(d, level)?;
        out.levels[0].copy_from_slice(v);
        if level >= 2 {
            for i in 0..d {
                for j in 0..d {
                    out.levels[1][idx2(d, i, j)] = v[i] * v[j] / 2.0;
                }
            }
        }
        if level >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        out.levels[2][idx3(d, i, j, k)] = v[i] * v[j] * v[k] / 6.0;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Signature of the piecewise-linear path through `points`, computed
    /// as the Chen product of segment signatures in order.
    pub fn signature_piecewise_linear(points: &[Vec<f64>], level: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("need at least two vertices".into()));
        }
        let d = points[0].len();
        let mut sig = Self::identity(d, level)?;
        for w in points.windows(2) {
            if w[1].len() != d {
                return Err(Error::DimensionMismatch {
                    left: w[1].len(),
                    right: d,
                });
            }
            let v: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
            sig = sig.tensor_product(&Self::segment_signature(&v, level)?)?;
        }
        Ok(sig)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.levels.len()
    }

    /// Dense data of level `k` (1-based, `k <= level`).
    pub fn level_data(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn entry2(&self, i: usize, j: usize) -> f64 {
        self.levels[1][idx2(self.dim, i, j)]
    }

    pub fn entry3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.levels[2][idx3(self.dim, i, j, k)]
    }

    /// Degree-truncated product: `(a (x) b)_k = sum_{i+j=k} a_i (x) b_j`
    /// with `a_0 = b_0 = 1`.
    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.level() != other.level() {
            return Err(Error::LevelMismatch {
                left: self.level(),
                right: other.level(),
            });
        }
        let d = self.dim;
        let n = self.level();
        let a = &self.levels;
        let b = &other.levels;
        let mut out = Self::identity(d, n)?;

        for i in 0..d {
            out.levels[0][i] = a[0][i] + b[0][i];
        }
        if n >= 2 {
            for i in 0..d {
                for j in 0..d {
                    let ij = idx2(d, i, j);
                    out.levels[1][ij] = a[1][ij] + b[1][ij] + a[0][i] * b[0][j];
                }
            }
        }
        if n >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let ijk = idx3(d, i, j, k);
                        out.levels[2][ijk] = a[2][ijk]
                            + b[2][ijk]
                            + a[0][i] * b[1][idx2(d, j, k)]
                            + a[1][idx2(d, i, j)] * b[0][k];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Group inverse: the Neumann series `1 - a + a^2 - a^3` truncated,
    /// where `a` is the augmentation part (levels 1..N).
    pub fn inverse(&self) -> Self {
        let d = self.dim;
        let n = self.level();
        let g = &self.levels;
        let mut out = Self::identity(d, n).expect("valid shape");
        for i in 0..d {
            out.levels[0][i] = -g[0][i];
        }
        if n >= 2 {
            for i in 0..d {
                for j in 0..d {
                    out.levels[1][idx2(d, i, j)] = -g[1][idx2(d, i, j)] + g[0][i] * g[0][j];
                }
            }
        }
        if n >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        out.levels[2][idx3(d, i, j, k)] = -g[2][idx3(d, i, j, k)]
                            + g[0][i] * g[1][idx2(d, j, k)]
                            + g[1][idx2(d, i, j)] * g[0][k]
                            - g[0][i] * g[0][j] * g[0][k];
                    }
                }
            }
        }
        out
    }

    /// Dilation `g_k -> lambda^k g_k`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        let mut c = 1.0;
        for lvl in &mut out.levels {
            c *= lambda;
            lvl.iter_mut().for_each(|x| *x *= c);
        }
        out
    }

    /// Truncate to a lower level (no-op when `level == self.level()`).
    pub fn truncated(&self, level: usize) -> Result<Self> {
        Self::check_level(level)?;
        if level > self.level() {
            return Err(Error::LevelMismatch {
                left: level,
                right: self.level(),
            });
        }
        Ok(Self {
            dim: self.dim,
            levels: self.levels[..level].to_vec(),
        })
    }

    /// Homogeneous norm `max_k ||g_k||_F^{1/k}`: zero exactly on the
    /// identity and linear under dilation.
    pub fn homogeneous_norm(&self) -> f64 {
        self.levels
            .iter()
            .enumerate()
            .map(|(k0, t)| {
                let f: f64 = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                f.powf(1.0 / (k0 as f64 + 1.0))
            })
            .fold(0.0, f64::max)
    }

    /// Largest absolute componentwise difference across all levels.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.level() != other.level() {
            return Err(Error::LevelMismatch {
                left: self.level(),
                right: other.level(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.levels.iter().zip(&other.levels) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// Whether the level-2 symmetric part equals `1/2 T_1 (x) T_1` within
    /// `tol` — the group-element (shuffle) consequence at level 2.
    pub fn is_group_element(&self, tol: f64) -> bool {
        if self.level() < 2 {
            return true;
        }
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let sym = 0.5 * (self.levels[1][idx2(d, i, j)] + self.levels[1][idx2(d, j, i)]);
                if (sym - 0.5 * self.levels[0][i] * self.levels[0][j]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent brute-force truncated product: enumerates every
    /// multi-index and sums over all splits.
    fn brute_force_product(a: &TruncatedTensor, b: &TruncatedTensor) -> TruncatedTensor {
        let d = a.dim();
        let n = a.level();
        let get = |t: &TruncatedTensor, word: &[usize]| -> f64 {
            if word.is_empty() {
                return 1.0;
            }
            let mut flat = 0;
            for &w in word {
                flat = flat * d + w;
            }
            t.level_data(word.len())[flat]
        };
        let mut levels = Vec::new();
        for k in 1..=n {
            let mut data = vec![0.0; d.pow(k as u32)];
            // Enumerate words in [0,d)^k by counting.
            let mut word = vec![0usize; k];
            loop {
                let mut flat = 0;
                for &w in &word {
                    flat = flat * d + w;
                }
                let mut sum = 0.0;
                for split in 0..=k {
                    sum += get(a, &word[..split]) * get(b, &word[split..]);
                }
                data[flat] = sum;
                // Increment the word.
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    word[pos] += 1;
                    if word[pos] < d {
                        break;
                    }
                    word[pos] = 0;
                }
                if word.iter().all(|&w| w == 0) {
                    break;
                }
            }
            levels.push(data);
        }
        TruncatedTensor::from_levels(d, levels).unwrap()
    }

    fn random_tensor(dim: usize, level: usize, rng: &mut impl rand::Rng) -> TruncatedTensor {
        let levels = (1..=level)
            .map(|k| {
                (0..dim.pow(k as u32))
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        TruncatedTensor::from_levels(dim, levels).unwrap()
    }

    /// Iterated integrals of a piecewise-linear path by quadrature:
    /// level 1 exactly, level 2 by the trapezoid rule (exact on linear
    /// pieces), level 3 by composite Simpson over the level-2 partials.
    fn quadrature_signature(points: &[Vec<f64>], subdiv: usize) -> TruncatedTensor {
        let d = points[0].len();
        // Refine the polyline so each vertex interval is split `subdiv`
        // times; Simpson needs the midpoints.
        let mut xs: Vec<Vec<f64>> = vec![points[0].clone()];
        for w in points.windows(2) {
            for s in 1..=subdiv {
                let u = s as f64 / subdiv as f64;
                xs.push(
                    w[0].iter()
                        .zip(&w[1])
                        .map(|(a, b)| a + u * (b - a))
                        .collect(),
                );
            }
        }
        let m = xs.len();
        // Level-1 partials S1(t) and level-2 partials via trapezoid.
        let mut s1 = vec![vec![0.0; d]; m];
        for t in 1..m {
            for i in 0..d {
                s1[t][i] = xs[t][i] - xs[0][i];
            }
        }
        let mut s2 = vec![vec![0.0; d * d]; m];
        for t in 1..m {
            for i in 0..d {
                for j in 0..d {
                    let dxj = xs[t][j] - xs[t - 1][j];
                    s2[t][i * d + j] = s2[t - 1][i * d + j] + 0.5 * (s1[t - 1][i] + s1[t][i]) * dxj;
                }
            }
        }
        // Level 3 by composite Simpson on pairs of intervals; `m-1` must
        // be even, which holds for even `subdiv`.
        assert!(subdiv % 2 == 0);
        let mut s3 = vec![0.0; d * d * d];
        let mut t = 0;
        while t + 2 < m {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let f0 = s2[t][i * d + j] * (xs[t + 1][k] - xs[t][k]);
                        let f1 = s2[t + 1][i * d + j] * (xs[t + 1][k] - xs[t][k]);
                        let f2 = s2[t + 2][i * d + j] * (xs[t + 2][k] - xs[t + 1][k]);
                        // Simpson weights on the two sub-intervals: the
                        // integrand S2 is quadratic in u on each linear
                        // piece, so this is exact up to rounding.
                        s3[(i * d + j) * d + k] += (f0 + 4.0 * f1 + f2) / 3.0;
                    }
                }
            }
            t += 2;
        }
        TruncatedTensor::from_levels(d, vec![s1[m - 1].clone(), s2[m - 1].clone(), s3]).unwrap()
    }

    #[test]
    fn product_of_two_segments_matches_definition() {
        let a = TruncatedTensor::segment_signature(&[1.0, 0.5], 2).unwrap();
        let b = TruncatedTensor::segment_signature(&[-0.25, 2.0], 2).unwrap();
        let p = a.tensor_product(&b).unwrap();
        // Level 1 adds; level 2 is a2 + b2 + a1 (x) b1.
        assert!((p.level_data(1)[0] - 0.75).abs() < 1e-15);
        assert!((p.level_data(1)[1] - 2.5).abs() < 1e-15);
        let v = [1.0, 0.5];
        let w = [-0.25, 2.0];
        for i in 0..2 {
            for j in 0..2 {
                let want = v[i] * v[j] / 2.0 + w[i] * w[j] / 2.0 + v[i] * w[j];
                assert!((p.entry2(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = crate::test_util::rng(11);
        let b = random_tensor(3, 3, &mut rng);
        let id = TruncatedTensor::identity(3, 3).unwrap();
        let p = id.tensor_product(&b).unwrap();
        assert_eq!(p.max_abs_diff(&b).unwrap(), 0.0);
        let q = b.tensor_product(&id).unwrap();
        assert_eq!(q.max_abs_diff(&b).unwrap(), 0.0);
    }

    #[test]
    fn product_matches_brute_force_convolution() {
        let mut rng = crate::test_util::rng(7);
        for _ in 0..20 {
            let a = random_tensor(2, 3, &mut rng);
            let b = random_tensor(2, 3, &mut rng);
            let fast = a.tensor_product(&b).unwrap();
            let slow = brute_force_product(&a, &b);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-14);
        }
    }

    #[test]
    fn product_rejects_mismatched_shapes() {
        let a = TruncatedTensor::identity(2, 2).unwrap();
        let b = TruncatedTensor::identity(3, 2).unwrap();
        assert!(matches!(
            a.tensor_product(&b),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = TruncatedTensor::identity(2, 3).unwrap();
        assert!(matches!(
            a.tensor_product(&c),
            Err(Error::LevelMismatch { .. })
        ));
    }

    #[test]
    fn segment_level2_is_half_outer_square() {
        let s = TruncatedTensor::segment_signature(&[1.0, 0.0], 2).unwrap();
        assert_eq!(s.entry2(0, 0), 0.5);
        assert_eq!(s.entry2(0, 1), 0.0);
        assert_eq!(s.entry2(1, 0), 0.0);
        assert_eq!(s.entry2(1, 1), 0.0);
    }

    #[test]
    fn zero_segment_is_identity() {
        let s = TruncatedTensor::segment_signature(&[0.0, 0.0, 0.0], 3).unwrap();
        let id = TruncatedTensor::identity(3, 3).unwrap();
        assert_eq!(s.max_abs_diff(&id).unwrap(), 0.0);
    }

    #[test]
    fn segment_level3_matches_quadrature() {
        let v = vec![1.0, 2.0];
        let s = TruncatedTensor::segment_signature(&v, 3).unwrap();
        let q = quadrature_signature(&[vec![0.0, 0.0], v.clone()], 400);
        assert!(s.max_abs_diff(&q).unwrap() < 1e-10);
        // And the closed form v_i v_j v_k / 6.
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((s.entry3(i, j, k) - v[i] * v[j] * v[k] / 6.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn polyline_signature_matches_quadrature() {
        let points = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.3],
            vec![0.4, 1.1],
            vec![-0.2, 0.6],
        ];
        let sig = TruncatedTensor::signature_piecewise_linear(&points, 3).unwrap();
        let q = quadrature_signature(&points, 400);
        assert!(sig.max_abs_diff(&q).unwrap() < 1e-10);
    }

    #[test]
    fn single_segment_polyline_equals_segment_signature() {
        let points = vec![vec![0.2, -0.4], vec![1.0, 0.6]];
        let sig = TruncatedTensor::signature_piecewise_linear(&points, 3).unwrap();
        let seg = TruncatedTensor::segment_signature(&[0.8, 1.0], 3).unwrap();
        assert!(sig.max_abs_diff(&seg).unwrap() < 1e-15);
    }

    #[test]
    fn out_and_back_path_is_trivial() {
        let points = vec![vec![0.0, 0.0], vec![0.7, -0.3], vec![0.0, 0.0]];
        let sig = TruncatedTensor::signature_piecewise_linear(&points, 2).unwrap();
        for x in sig.level_data(1) {
            assert!(x.abs() < 1e-15);
        }
        // Tree-like path: the antisymmetric level-2 part vanishes.
        for i in 0..2 {
            for j in 0..2 {
                assert!((sig.entry2(i, j) - sig.entry2(j, i)).abs() < 1e-15);
            }
        }
    }

    /// Shoelace signed area of a closed polygon.
    fn shoelace(points: &[Vec<f64>]) -> f64 {
        let mut area = 0.0;
        for w in points.windows(2) {
            area += 0.5 * (w[0][0] * w[1][1] - w[1][0] * w[0][1]);
        }
        area
    }

    #[test]
    fn unit_square_loop_levy_area_is_one() {
        let square = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ];
        let sig = TruncatedTensor::signature_piecewise_linear(&square, 2).unwrap();
        let levy = 0.5 * (sig.entry2(0, 1) - sig.entry2(1, 0));
        let oracle = shoelace(&square);
        assert!((oracle - 1.0).abs() < 1e-15);
        assert!((levy - oracle).abs() < 1e-14);
    }

    #[test]
    fn reversed_polyline_is_group_inverse() {
        let mut rng = crate::test_util::rng(23);
        for _ in 0..20 {
            let points: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut reversed = points.clone();
            reversed.reverse();
            let sig = TruncatedTensor::signature_piecewise_linear(&points, 3).unwrap();
            let rev = TruncatedTensor::signature_piecewise_linear(&reversed, 3).unwrap();
            let prod = sig.tensor_product(&rev).unwrap();
            let id = TruncatedTensor::identity(3, 3).unwrap();
            assert!(prod.max_abs_diff(&id).unwrap() < 1e-12);
            // The explicit inverse agrees with the reversal.
            assert!(sig.inverse().max_abs_diff(&rev).unwrap() < 1e-12);
        }
    }

    #[test]
    fn signatures_satisfy_group_symmetry() {
        let mut rng = crate::test_util::rng(31);
        for _ in 0..50 {
            let points: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let sig = TruncatedTensor::signature_piecewise_linear(&points, 2).unwrap();
            assert!(sig.is_group_element(1e-12));
        }
    }

    #[test]
    fn homogeneous_norm_basics() {
        let id = TruncatedTensor::identity(2, 3).unwrap();
        assert_eq!(id.homogeneous_norm(), 0.0);
        let pure =
            TruncatedTensor::from_levels(2, vec![vec![3.0, 4.0], vec![0.0; 4], vec![0.0; 8]])
                .unwrap();
        assert!((pure.homogeneous_norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_norm_scales_under_dilation() {
        let mut rng = crate::test_util::rng(5);
        for _ in 0..20 {
            let g = random_tensor(3, 3, &mut rng);
            let n = g.homogeneous_norm();
            let n2 = g.dilate(2.0).homogeneous_norm();
            assert!((n2 - 2.0 * n).abs() < 1e-12 * (1.0 + n));
        }
    }
}
