//! Compact convex feasible regions with projection and sampling machinery.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::vecops::{all_finite, dot, norm_l2, sub};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Relative feasibility tolerance: membership tests allow a violation of
/// `FEAS_REL_TOL * diameter`.
pub const FEAS_REL_TOL: f64 = 1e-9;

/// Dykstra stopping threshold on the iterate increment. Tighter than the
/// feasibility tolerance so that projection error never eats into the
/// 1e-9 margins of the Fenchel-coupling inequalities.
const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_CYCLES: usize = 100_000;

/// Axis-aligned box bounds, also used as the mandatory bounding box of an
/// H-polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidRegion("box must have dimension >= 1".into()));
        }
        if !all_finite(&lower) || !all_finite(&upper) {
            return Err(Error::InvalidRegion("box bounds must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l >= u) {
            return Err(Error::InvalidRegion(
                "box requires lower < upper componentwise".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.max(*l).min(*u))
            .collect()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    fn diameter(&self) -> f64 {
        norm_l2(&sub(&self.upper, &self.lower))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RegionKind {
    /// `{ x : lower <= x <= upper }` componentwise.
    Box(BoxBounds),
    /// The unit simplex `{ x >= 0, sum x_i = 1 }` in `R^dim`.
    Simplex { dim: usize },
    /// Euclidean ball `{ x : ||x - center||_2 <= radius }`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ x : A x <= b }` intersected with an explicit bounding box.
    HPolytope {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        bounding_box: BoxBounds,
        witness: Vec<f64>,
    },
}

/// A compact convex feasible set. Construction validates non-emptiness and
/// stores a feasibility witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibleRegion {
    kind: RegionKind,
    dim: usize,
    witness: Vec<f64>,
}

impl FeasibleRegion {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let bounds = BoxBounds::new(lower, upper)?;
        let witness = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let dim = bounds.lower.len();
        Ok(Self {
            kind: RegionKind::Box(bounds),
            dim,
            witness,
        })
    }

    pub fn new_simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegion("simplex needs dim >= 1".into()));
        }
        Ok(Self {
            kind: RegionKind::Simplex { dim },
            dim,
            witness: vec![1.0 / dim as f64; dim],
        })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidRegion("ball needs dim >= 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() || !all_finite(&center) {
            return Err(Error::InvalidRegion(
                "ball requires finite center and radius > 0".into(),
            ));
        }
        let dim = center.len();
        Ok(Self {
            kind: RegionKind::Ball {
                center: center.clone(),
                radius,
            },
            dim,
            witness: center,
        })
    }

    /// H-polytope `Ax <= b` with an explicit bounding box and a feasibility
    /// witness supplied by the caller (verified here).
    pub fn new_hpolytope(
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        bounding_box: BoxBounds,
        witness: Vec<f64>,
    ) -> Result<Self> {
        let dim = bounding_box.lower.len();
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        for row in &a {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if !all_finite(row) {
                return Err(Error::InvalidRegion("polytope rows must be finite".into()));
            }
            if norm_l2(row) == 0.0 {
                return Err(Error::InvalidRegion("zero constraint row".into()));
            }
        }
        if witness.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: witness.len(),
            });
        }
        let tol = FEAS_REL_TOL * bounding_box.diameter();
        let violated = a
            .iter()
            .zip(&b)
            .any(|(row, bi)| dot(row, &witness) > bi + tol)
            || !bounding_box.contains(&witness, tol);
        if violated {
            return Err(Error::InvalidRegion(
                "witness does not satisfy Ax <= b within the bounding box".into(),
            ));
        }
        Ok(Self {
            kind: RegionKind::HPolytope {
                a,
                b,
                bounding_box,
                witness: witness.clone(),
            },
            dim,
            witness,
        })
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The feasibility witness stored at construction.
    pub fn witness(&self) -> PrimalPoint {
        PrimalPoint::new_unchecked(self.witness.clone())
    }

    /// Absolute membership tolerance: relative tolerance times the diameter.
    pub fn feasibility_tol(&self) -> f64 {
        FEAS_REL_TOL * self.diameter()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        let tol = self.feasibility_tol();
        match &self.kind {
            RegionKind::Box(b) => b.contains(x, tol),
            RegionKind::Simplex { .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            RegionKind::Ball { center, radius } => norm_l2(&sub(x, center)) <= radius + tol,
            RegionKind::HPolytope {
                a, b, bounding_box, ..
            } => {
                bounding_box.contains(x, tol)
                    && a.iter().zip(b).all(|(row, bi)| dot(row, x) <= bi + tol)
            }
        }
    }

    /// Validate coordinates as a feasible primal point.
    pub fn check_point(&self, coords: Vec<f64>) -> Result<PrimalPoint> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        if !self.contains(&coords) {
            return Err(Error::Infeasible {
                detail: format!("{coords:?}"),
            });
        }
        Ok(PrimalPoint::new_unchecked(coords))
    }

    /// Diameter of the region (exact for box/simplex/ball, bounding-box
    /// over-estimate for H-polytopes).
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            RegionKind::Box(b) => b.diameter(),
            RegionKind::Simplex { .. } => std::f64::consts::SQRT_2,
            RegionKind::Ball { radius, .. } => 2.0 * radius,
            RegionKind::HPolytope { bounding_box, .. } => bounding_box.diameter(),
        }
    }

    /// `R = sup ||x||_2` over the region. Exact for box, simplex and ball;
    /// bounding-box estimate for H-polytopes (only enters upper bounds).
    pub fn radius_bound(&self) -> f64 {
        match &self.kind {
            RegionKind::Box(b) => b
                .lower
                .iter()
                .zip(&b.upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            RegionKind::Simplex { .. } => 1.0,
            RegionKind::Ball { center, radius } => norm_l2(center) + radius,
            RegionKind::HPolytope { bounding_box, .. } => bounding_box
                .lower
                .iter()
                .zip(&bounding_box.upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Closest-point (Euclidean) projection onto the region.
    pub fn project(&self, y: &[f64]) -> Result<PrimalPoint> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        let coords = match &self.kind {
            RegionKind::Box(b) => b.clamp(y),
            RegionKind::Simplex { .. } => project_simplex(y),
            RegionKind::Ball { center, radius } => {
                let delta = sub(y, center);
                let norm = norm_l2(&delta);
                if norm <= *radius {
                    y.to_vec()
                } else {
                    let s = radius / norm;
                    center.iter().zip(&delta).map(|(c, d)| c + s * d).collect()
                }
            }
            RegionKind::HPolytope {
                a, b, bounding_box, ..
            } => dykstra_project(y, a, b, bounding_box)?,
        };
        Ok(PrimalPoint::new_unchecked(coords))
    }

    /// Draw a uniform sample from the region.
    ///
    /// Box: componentwise uniform. Simplex: Dirichlet(1,..,1). Ball: Gaussian
    /// direction with radius `r * U^(1/d)`. H-polytope: rejection from the
    /// bounding box with an attempt cap.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PrimalPoint> {
        match &self.kind {
            RegionKind::Box(b) => {
                let coords = b
                    .lower
                    .iter()
                    .zip(&b.upper)
                    .map(|(l, u)| rng.random_range(*l..*u))
                    .collect();
                Ok(PrimalPoint::new_unchecked(coords))
            }
            RegionKind::Simplex { dim } => {
                // Dirichlet(1,...,1) via normalized exponentials.
                let mut coords: Vec<f64> = (0..*dim)
                    .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0_f64).ln())
                    .collect();
                let total: f64 = coords.iter().sum();
                for c in coords.iter_mut() {
                    *c /= total;
                }
                Ok(PrimalPoint::new_unchecked(coords))
            }
            RegionKind::Ball { center, radius } => {
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                let mut dir: Vec<f64> = (0..self.dim).map(|_| normal.sample(rng)).collect();
                let norm = norm_l2(&dir);
                if norm == 0.0 {
                    return Ok(PrimalPoint::new_unchecked(center.clone()));
                }
                let u: f64 = rng.random_range(0.0..1.0_f64);
                let r = radius * u.powf(1.0 / self.dim as f64) / norm;
                for (d, c) in dir.iter_mut().zip(center) {
                    *d = c + *d * r;
                }
                Ok(PrimalPoint::new_unchecked(dir))
            }
            RegionKind::HPolytope {
                a, b, bounding_box, ..
            } => {
                const MAX_ATTEMPTS: usize = 10_000;
                for _ in 0..MAX_ATTEMPTS {
                    let candidate: Vec<f64> = bounding_box
                        .lower
                        .iter()
                        .zip(&bounding_box.upper)
                        .map(|(l, u)| rng.random_range(*l..*u))
                        .collect();
                    if a.iter().zip(b).all(|(row, bi)| dot(row, &candidate) <= *bi) {
                        return Ok(PrimalPoint::new_unchecked(candidate));
                    }
                }
                Err(Error::SamplerExhausted(format!(
                    "no accepted point in {MAX_ATTEMPTS} bounding-box draws"
                )))
            }
        }
    }

    /// Vertex enumeration for polyhedral regions with few vertices.
    /// Boxes are capped at dimension 16 (2^16 corners); balls have none.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            RegionKind::Box(b) => {
                let d = b.lower.len();
                if d > 16 {
                    return Err(Error::OutOfRange(format!(
                        "vertex enumeration capped at dim 16, got {d}"
                    )));
                }
                let mut out = Vec::with_capacity(1 << d);
                for mask in 0u32..(1 << d) {
                    out.push(
                        (0..d)
                            .map(|i| {
                                if mask >> i & 1 == 1 {
                                    b.upper[i]
                                } else {
                                    b.lower[i]
                                }
                            })
                            .collect(),
                    );
                }
                Ok(out)
            }
            RegionKind::Simplex { dim } => Ok((0..*dim)
                .map(|i| {
                    let mut v = vec![0.0; *dim];
                    v[i] = 1.0;
                    v
                })
                .collect()),
            RegionKind::Ball { .. } => Err(Error::OutOfRange("a ball has no vertices".into())),
            RegionKind::HPolytope { .. } => Err(Error::OutOfRange(
                "vertex enumeration is not implemented for H-polytopes".into(),
            )),
        }
    }

    /// Uniform sample from `B(center, radius) ∩ region` by rejection.
    ///
    /// Full-dimensional regions reject ball draws against the region; the
    /// simplex is measure-zero in the ambient space, so there the rejection
    /// runs the other way around (simplex draws against the ball).
    pub fn sample_ball_intersection<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        radius: f64,
        rng: &mut R,
    ) -> Result<PrimalPoint> {
        const MAX_ATTEMPTS: usize = 100_000;
        if matches!(self.kind, RegionKind::Simplex { .. }) {
            for _ in 0..MAX_ATTEMPTS {
                let x = self.sample_uniform(rng)?;
                if norm_l2(&sub(x.coords(), center)) < radius {
                    return Ok(x);
                }
            }
            return Err(Error::SamplerExhausted(format!(
                "no simplex point within {radius} of the candidate in {MAX_ATTEMPTS} draws"
            )));
        }
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for _ in 0..MAX_ATTEMPTS {
            let mut dir: Vec<f64> = (0..self.dim).map(|_| normal.sample(rng)).collect();
            let norm = norm_l2(&dir);
            if norm == 0.0 {
                continue;
            }
            let u: f64 = rng.random_range(0.0..1.0_f64);
            let r = radius * u.powf(1.0 / self.dim as f64) / norm;
            for (d, c) in dir.iter_mut().zip(center) {
                *d = c + *d * r;
            }
            if self.contains(&dir) {
                return Ok(PrimalPoint::new_unchecked(dir));
            }
        }
        Err(Error::SamplerExhausted(format!(
            "no point of B(candidate, {radius}) accepted by the region in {MAX_ATTEMPTS} draws"
        )))
    }
}

/// Mirror-map output on duals: argmax over the region of `<y, x> - h(x)` for
/// the Euclidean regularizer reduces to this closest-point projection.
pub(crate) fn euclidean_argmax(region: &FeasibleRegion, y: &DualVector) -> Result<PrimalPoint> {
    region.project(y.coords())
}

/// Euclidean projection onto the unit simplex via sort-and-threshold,
/// O(d log d).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - 1.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Dykstra's alternating projection over the halfspaces `a_i^T x <= b_i`
/// and the bounding box. Converges for intersections of convex sets; the
/// result is snapped feasible at the end.
fn dykstra_project(
    y: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    bounding_box: &BoxBounds,
) -> Result<Vec<f64>> {
    let d = y.len();
    let m = a.len();
    let row_sq: Vec<f64> = a.iter().map(|row| dot(row, row)).collect();
    // Dykstra computes the projection of the starting point, so start from
    // `y` itself; the bounding box participates as one of the constraint
    // sets below.
    let mut x = y.to_vec();
    // One correction vector per constraint set (m halfspaces + the box).
    let mut corrections = vec![vec![0.0; d]; m + 1];
    for _cycle in 0..DYKSTRA_MAX_CYCLES {
        let x_prev = x.clone();
        for i in 0..=m {
            let mut z: Vec<f64> = x.iter().zip(&corrections[i]).map(|(xi, c)| xi + c).collect();
            let projected = if i < m {
                let viol = dot(&a[i], &z) - b[i];
                if viol > 0.0 {
                    let s = viol / row_sq[i];
                    for (zj, aj) in z.iter_mut().zip(&a[i]) {
                        *zj -= s * aj;
                    }
                }
                z
            } else {
                bounding_box.clamp(&z)
            };
            for j in 0..d {
                corrections[i][j] = x[j] + corrections[i][j] - projected[j];
            }
            x = projected;
        }
        let delta = x
            .iter()
            .zip(&x_prev)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0_f64, f64::max);
        // The cycle-end iterate can stall for several cycles while the
        // correction vectors still move, so a small step alone does not
        // mean convergence: require near-feasibility as well.
        let residual = a
            .iter()
            .zip(b)
            .map(|(row, bi)| (dot(row, &x) - bi).max(0.0))
            .fold(0.0_f64, f64::max);
        if delta <= DYKSTRA_TOL && residual <= DYKSTRA_TOL {
            // Snap residual violations so callers always get a feasible point.
            for (i, row) in a.iter().enumerate() {
                let viol = dot(row, &x) - b[i];
                if viol > 0.0 {
                    let s = viol / row_sq[i];
                    for (xj, aj) in x.iter_mut().zip(row) {
                        *xj -= s * aj;
                    }
                }
            }
            return Ok(bounding_box.clamp(&x));
        }
    }
    Err(Error::Numeric(format!(
        "Dykstra projection did not converge within {DYKSTRA_MAX_CYCLES} cycles"
    )))
}
