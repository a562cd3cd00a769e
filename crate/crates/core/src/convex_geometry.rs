//! Convex bodies with projections, distances, and tangent/normal-cone
//! queries.
//!
//! Four body types cover the experiments: boxes, balls, linear subspaces,
//! and polyhedra given as intersections of halfspaces
//! `{x : <s_i, x - a_i> <= 0}`. Box/ball/subspace projections are closed
//! form; polyhedra use Dykstra's alternating projections. The normal cone
//! at a boundary point is represented by a finite generator list: outward
//! face normals for boxes, the radial direction for balls, both signs of
//! an orthonormal complement basis for subspaces (so that "<= tol against
//! every generator" encodes equality), and the active `s_i` for
//! polyhedra. For a convex body, a direction is tangent exactly when it
//! makes nonpositive inner product with every normal generator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, dot, norm, orthonormal_complement, orthonormalize, sub};
use rand::Rng;
use rand_distr::StandardNormal;

/// Default face-activity and membership tolerance.
pub const ACTIVITY_TOL: f64 = 1e-9;

const DYKSTRA_MAX_SWEEPS: usize = 10_000;
const DYKSTRA_RESIDUAL: f64 = 1e-10;

/// One halfspace `{x : <s, x - a> <= 0}`; `s` is stored unit-normalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub s: Vec<f64>,
}

/// A nonempty closed convex body.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexBody {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Linear subspace spanned by orthonormal `basis` rows.
    Subspace {
        basis: Vec<Vec<f64>>,
    },
    /// Intersection of halfspaces, certified nonempty by `feasible`.
    Polyhedron {
        halfspaces: Vec<Halfspace>,
        feasible: Vec<f64>,
    },
}

impl ConvexBody {
    pub fn make_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let body = ConvexBody::Box { lower, upper };
        body.validate()?;
        Ok(body)
    }

    pub fn make_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let body = ConvexBody::Ball { center, radius };
        body.validate()?;
        Ok(body)
    }

    /// Subspace from an already orthonormal basis.
    pub fn make_subspace(basis: Vec<Vec<f64>>) -> Result<Self> {
        let body = ConvexBody::Subspace { basis };
        body.validate()?;
        Ok(body)
    }

    /// Subspace spanned by arbitrary vectors (orthonormalized here).
    pub fn subspace_span(vectors: &[Vec<f64>]) -> Result<Self> {
        let basis = orthonormalize(vectors, 1e-10);
        if basis.is_empty() {
            return Err(Error::InvalidBody("span is trivial".into()));
        }
        Ok(ConvexBody::Subspace { basis })
    }

    /// Polyhedron from halfspaces; normals are unit-normalized and the
    /// feasible point is checked.
    pub fn make_polyhedron(halfspaces: Vec<Halfspace>, feasible: Vec<f64>) -> Result<Self> {
        let mut hs = halfspaces;
        for h in &mut hs {
            let n = norm(&h.s);
            if n < 1e-12 {
                return Err(Error::InvalidBody(
                    "halfspace normal must be nonzero".into(),
                ));
            }
            h.s.iter_mut().for_each(|x| *x /= n);
        }
        let body = ConvexBody::Polyhedron {
            halfspaces: hs,
            feasible,
        };
        body.validate()?;
        Ok(body)
    }

    /// Structural validation; deserialized bodies must pass through here
    /// (the polyhedron case additionally normalizes nothing, so prefer
    /// `make_polyhedron` for raw input).
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::InvalidBody(
                        "box bounds must match and be nonempty".into(),
                    ));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::InvalidBody("box needs lower <= upper".into()));
                }
            }
            ConvexBody::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidBody("ball center must be nonempty".into()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidBody("ball radius must be positive".into()));
                }
            }
            ConvexBody::Subspace { basis } => {
                if basis.is_empty() {
                    return Err(Error::InvalidBody(
                        "subspace needs at least one basis vector".into(),
                    ));
                }
                let d = basis[0].len();
                if basis.len() > d {
                    return Err(Error::InvalidBody(
                        "more basis vectors than dimensions".into(),
                    ));
                }
                for (i, u) in basis.iter().enumerate() {
                    if u.len() != d {
                        return Err(Error::InvalidBody("ragged basis".into()));
                    }
                    for (j, v) in basis.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (dot(u, v) - want).abs() > 1e-10 {
                            return Err(Error::InvalidBody("basis is not orthonormal".into()));
                        }
                    }
                }
            }
            ConvexBody::Polyhedron {
                halfspaces,
                feasible,
            } => {
                if halfspaces.is_empty() {
                    return Err(Error::InvalidBody(
                        "polyhedron needs at least one halfspace".into(),
                    ));
                }
                let d = feasible.len();
                for h in halfspaces {
                    if h.a.len() != d || h.s.len() != d {
                        return Err(Error::InvalidBody("halfspace dimensions disagree".into()));
                    }
                    if (norm(&h.s) - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidBody("halfspace normals must be unit".into()));
                    }
                    let gap = dot(&h.s, &sub(feasible, &h.a));
                    if gap > ACTIVITY_TOL {
                        return Err(Error::InvalidBody(format!(
                            "stored feasible point violates a halfspace by {gap:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Box { lower, .. } => lower.len(),
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Subspace { basis } => basis[0].len(),
            ConvexBody::Polyhedron { feasible, .. } => feasible.len(),
        }
    }

    /// Short tag used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            ConvexBody::Box { .. } => "box",
            ConvexBody::Ball { .. } => "ball",
            ConvexBody::Subspace { .. } => "subspace",
            ConvexBody::Polyhedron { .. } => "polyhedron",
        }
    }

    /// Euclidean projection onto the body: idempotent and nonexpansive.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self {
            ConvexBody::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect()),
            ConvexBody::Ball { center, radius } => {
                let rel = sub(x, center);
                let n = norm(&rel);
                if n <= *radius {
                    Ok(x.to_vec())
                } else {
                    Ok(center
                        .iter()
                        .zip(&rel)
                        .map(|(c, r)| c + r * *radius / n)
                        .collect())
                }
            }
            ConvexBody::Subspace { basis } => {
                let mut p = vec![0.0; x.len()];
                for b in basis {
                    axpy(&mut p, dot(b, x), b);
                }
                Ok(p)
            }
            ConvexBody::Polyhedron { halfspaces, .. } => dykstra(halfspaces, x),
        }
    }

    /// `d_K(x) = |x - p_K(x)|`; zero exactly on the body.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(dist(x, &self.project(x)?))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// Unit generators of the normal cone at a point within `tol` of the
    /// body. Interior points yield an empty list.
    pub fn active_normals(&self, x: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
        let d = self.distance(x)?;
        if d > tol {
            return Err(Error::PointNotOnBody { distance: d });
        }
        let dim = self.dim();
        let mut normals = Vec::new();
        match self {
            ConvexBody::Box { lower, upper } => {
                for i in 0..dim {
                    if (x[i] - upper[i]).abs() <= tol {
                        let mut n = vec![0.0; dim];
                        n[i] = 1.0;
                        normals.push(n);
                    }
                    if (x[i] - lower[i]).abs() <= tol {
                        let mut n = vec![0.0; dim];
                        n[i] = -1.0;
                        normals.push(n);
                    }
                }
            }
            ConvexBody::Ball { center, radius } => {
                let rel = sub(x, center);
                let n = norm(&rel);
                if (n - radius).abs() <= tol {
                    normals.push(rel.iter().map(|r| r / n).collect());
                }
            }
            ConvexBody::Subspace { basis } => {
                // The normal cone is the whole orthogonal complement;
                // emitting both signs makes the tangent test an equality.
                for c in orthonormal_complement(basis, dim) {
                    normals.push(c.iter().map(|v| -v).collect());
                    normals.push(c);
                }
            }
            ConvexBody::Polyhedron { halfspaces, .. } => {
                for h in halfspaces {
                    if dot(&h.s, &sub(x, &h.a)).abs() <= tol {
                        normals.push(h.s.clone());
                    }
                }
            }
        }
        Ok(normals)
    }

    /// Whether `v` lies in the tangent cone at a boundary point: for a
    /// convex body this is `<s, v> <= tol` for every normal generator.
    pub fn in_tangent_cone(&self, x: &[f64], v: &[f64], tol: f64) -> Result<bool> {
        let normals = self.active_normals(x, tol.max(ACTIVITY_TOL))?;
        Ok(normals.iter().all(|s| dot(s, v) <= tol))
    }

    /// Self-test of the projection/polar relation: the residual
    /// `y - p_K(y)` must make nonpositive inner product with every
    /// tangent direction at the projection. Tangent directions are
    /// sampled as `(k - p)` for random `k` in the body plus random unit
    /// directions filtered through the tangent test.
    pub fn projection_polar_check(
        &self,
        y: &[f64],
        samples: usize,
        rng: &mut impl Rng,
        tol: f64,
    ) -> Result<bool> {
        let p = self.project(y)?;
        let r = dist(y, &p);
        if r <= tol {
            return Ok(true);
        }
        let residual = sub(y, &p);
        // The absolute floor absorbs the projection's own numerical
        // error (Dykstra stops at a 1e-10 residual), which otherwise
        // dominates when y sits just outside the body.
        let check = |v: &[f64]| -> bool {
            let nv = norm(v);
            nv < 1e-14 || dot(&residual, v) <= tol * r * nv + 1e-9 * (nv + r)
        };
        for _ in 0..samples {
            let k = self.sample_point(rng)?;
            if !check(&sub(&k, &p)) {
                return Ok(false);
            }
            let dir = random_unit(rng, y.len());
            if self.in_tangent_cone(&p, &dir, ACTIVITY_TOL)? && !check(&dir) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Random point of the body: uniform for boxes and balls, Gaussian
    /// coefficients for subspaces, projected Gaussians for polyhedra.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            ConvexBody::Box { lower, upper } => Ok(lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..*u) })
                .collect()),
            ConvexBody::Ball { center, radius } => {
                let dim = center.len();
                let dir = random_unit(rng, dim);
                let r = *radius * rng.gen_range(0.0..1.0f64).powf(1.0 / dim as f64);
                Ok(center.iter().zip(&dir).map(|(c, u)| c + r * u).collect())
            }
            ConvexBody::Subspace { basis } => {
                let mut p = vec![0.0; basis[0].len()];
                for b in basis {
                    let c: f64 = rng.sample(StandardNormal);
                    axpy(&mut p, c, b);
                }
                Ok(p)
            }
            ConvexBody::Polyhedron { feasible, .. } => {
                let jitter: Vec<f64> = feasible
                    .iter()
                    .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                self.project(&jitter)
            }
        }
    }

    /// Random boundary point. For a subspace every point carries the full
    /// normal complement, so this reuses `sample_point`.
    pub fn sample_boundary(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            ConvexBody::Box { lower, upper } => {
                let dim = lower.len();
                // Area-weighted face choice so the law is uniform on the
                // whole boundary; falls back to a uniform face when the
                // box is degenerate.
                let face_area = |i: usize| -> f64 {
                    (0..dim)
                        .filter(|j| *j != i)
                        .map(|j| upper[j] - lower[j])
                        .product()
                };
                let total: f64 = (0..dim).map(face_area).sum::<f64>() * 2.0;
                let face = if total > 0.0 {
                    let mut pick = rng.gen_range(0.0..total);
                    let mut chosen = 0;
                    'outer: for i in 0..dim {
                        for _side in 0..2 {
                            pick -= face_area(i);
                            if pick <= 0.0 {
                                chosen = i * 2 + _side;
                                break 'outer;
                            }
                        }
                    }
                    chosen
                } else {
                    rng.gen_range(0..2 * dim)
                };
                let (i, side) = (face / 2, face % 2);
                let mut p = self.sample_point(rng)?;
                p[i] = if side == 0 { upper[i] } else { lower[i] };
                Ok(p)
            }
            ConvexBody::Ball { center, radius } => {
                let dir = random_unit(rng, center.len());
                Ok(center
                    .iter()
                    .zip(&dir)
                    .map(|(c, u)| c + radius * u)
                    .collect())
            }
            ConvexBody::Subspace { .. } => self.sample_point(rng),
            ConvexBody::Polyhedron { halfspaces, .. } => {
                let q = self.sample_point(rng)?;
                let i = rng.gen_range(0..halfspaces.len());
                let h = &halfspaces[i];
                // Foot of q on hyperplane i; if it stays feasible it lies
                // on face i, otherwise its projection is on the boundary.
                let gap = dot(&h.s, &sub(&q, &h.a));
                let foot: Vec<f64> = q.iter().zip(&h.s).map(|(v, s)| v - gap * s).collect();
                let feasible = halfspaces
                    .iter()
                    .all(|g| dot(&g.s, &sub(&foot, &g.a)) <= ACTIVITY_TOL);
                if feasible {
                    Ok(foot)
                } else {
                    self.project(&foot)
                }
            }
        }
    }

    /// Deterministic boundary points (face grids for boxes, equiangular
    /// or Fibonacci points for low-dimensional spheres, hyperplane feet
    /// for polyhedra). May return fewer than `budget` points; random
    /// sampling fills the rest of a sampling plan.
    pub fn deterministic_boundary_points(&self, budget: usize) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut pts = Vec::new();
        match self {
            ConvexBody::Box { lower, upper } => {
                if dim == 1 {
                    pts.push(vec![lower[0]]);
                    pts.push(vec![upper[0]]);
                    return pts;
                }
                let per_face = (budget / (2 * dim)).max(1);
                let per_axis =
                    ((per_face as f64).powf(1.0 / (dim - 1) as f64).ceil() as usize).max(2);
                for i in 0..dim {
                    for side in 0..2 {
                        let fixed = if side == 0 { lower[i] } else { upper[i] };
                        // Grid over the free coordinates, corners included.
                        let mut counters = vec![0usize; dim - 1];
                        loop {
                            let mut p = vec![0.0; dim];
                            p[i] = fixed;
                            let mut c = 0;
                            for j in 0..dim {
                                if j == i {
                                    continue;
                                }
                                let u = counters[c] as f64 / (per_axis - 1) as f64;
                                p[j] = lower[j] + u * (upper[j] - lower[j]);
                                c += 1;
                            }
                            pts.push(p);
                            let mut k = 0;
                            loop {
                                if k == dim - 1 {
                                    break;
                                }
                                counters[k] += 1;
                                if counters[k] < per_axis {
                                    break;
                                }
                                counters[k] = 0;
                                k += 1;
                            }
                            if counters.iter().all(|&c| c == 0) {
                                break;
                            }
                        }
                    }
                }
            }
            ConvexBody::Ball { center, radius } => match dim {
                1 => {
                    pts.push(vec![center[0] - radius]);
                    pts.push(vec![center[0] + radius]);
                }
                2 => {
                    let n = budget.max(4);
                    for k in 0..n {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        pts.push(vec![
                            center[0] + radius * th.cos(),
                            center[1] + radius * th.sin(),
                        ]);
                    }
                }
                3 => {
                    // Fibonacci sphere.
                    let n = budget.max(8);
                    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                    for k in 0..n {
                        let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * k as f64;
                        pts.push(vec![
                            center[0] + radius * r * th.cos(),
                            center[1] + radius * r * th.sin(),
                            center[2] + radius * z,
                        ]);
                    }
                }
                _ => {}
            },
            ConvexBody::Subspace { basis } => {
                for b in basis {
                    for c in [-1.0, -0.5, 0.5, 1.0] {
                        pts.push(b.iter().map(|v| c * v).collect());
                    }
                }
                pts.push(vec![0.0; dim]);
            }
            ConvexBody::Polyhedron {
                halfspaces,
                feasible,
            } => {
                for h in halfspaces {
                    let gap = dot(&h.s, &sub(feasible, &h.a));
                    let foot: Vec<f64> = feasible
                        .iter()
                        .zip(&h.s)
                        .map(|(v, s)| v - gap * s)
                        .collect();
                    let ok = halfspaces
                        .iter()
                        .all(|g| dot(&g.s, &sub(&foot, &g.a)) <= ACTIVITY_TOL);
                    if ok {
                        pts.push(foot);
                    }
                }
            }
        }
        pts
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: self.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Dykstra's alternating projections onto the halfspace intersection.
/// Plain alternating projection drifts for intersections of halfspaces;
/// the per-set correction vectors restore convergence to the true
/// projection (not just some feasible point).
fn dykstra(halfspaces: &[Halfspace], x0: &[f64]) -> Result<Vec<f64>> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut corrections = vec![vec![0.0; d]; halfspaces.len()];
    let mut residual = f64::INFINITY;
    for _sweep in 0..DYKSTRA_MAX_SWEEPS {
        let x_prev = x.clone();
        for (h, p) in halfspaces.iter().zip(&mut corrections) {
            let y: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let gap = dot(&h.s, &y) - dot(&h.s, &h.a);
            let xn: Vec<f64> = if gap > 0.0 {
                y.iter().zip(&h.s).map(|(v, s)| v - gap * s).collect()
            } else {
                y.clone()
            };
            for i in 0..d {
                p[i] = y[i] - xn[i];
            }
            x = xn;
        }
        let worst_violation = halfspaces
            .iter()
            .map(|h| dot(&h.s, &sub(&x, &h.a)))
            .fold(0.0f64, f64::max);
        let moved = x
            .iter()
            .zip(&x_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        residual = moved.max(worst_violation);
        if residual < DYKSTRA_RESIDUAL {
            return Ok(x);
        }
    }
    Err(Error::ProjectionStalled {
        sweeps: DYKSTRA_MAX_SWEEPS,
        residual,
    })
}
