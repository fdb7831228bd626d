//! Certification of variational coherence (global and local), cone geometry
//! at candidate minimizers, sharpness checks, and trace diagnostics.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::problems::StochasticProblem;
use crate::region::{FeasibleRegion, RegionKind};
use crate::regularizer::{fenchel_to_set, Norm, Regularizer};
use crate::vecops::{dot, norm_l2, sub};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Cone membership tolerance.
pub const TAU_CONE: f64 = 1e-12;
/// Sharpness threshold on the minimal tangent inner product.
pub const TAU_SHARP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityViolation {
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub inner: f64,
    pub dist_to_minimizers: f64,
}

/// Outcome of a sampled coherence certification. A `pass` means no violation
/// was found at the tested resolution; it is one-sided, not a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub verdict: Verdict,
    pub samples_tested: usize,
    pub min_inner_product: f64,
    pub witness: Option<Witness>,
    pub equality_violations: Vec<EqualityViolation>,
    pub note: Option<String>,
}

impl CoherenceReport {
    fn inconclusive(note: String) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            samples_tested: 0,
            min_inner_product: f64::NAN,
            witness: None,
            equality_violations: Vec::new(),
            note: Some(note),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Euclidean distance from `x` to the convex hull of the generator points,
/// by projected gradient descent on the hull weights. Coherent problems have
/// convex minimizer sets, so the hull — not the nearest generator — is the
/// right membership test for the equality clause.
pub fn dist_to_hull(generators: &[Vec<f64>], x: &[f64]) -> f64 {
    let k = generators.len();
    if k == 1 {
        return norm_l2(&sub(x, &generators[0]));
    }
    let mut weights = vec![1.0 / k as f64; k];
    let combo = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (wi, g) in w.iter().zip(generators) {
            for (o, gi) in out.iter_mut().zip(g) {
                *o += wi * gi;
            }
        }
        out
    };
    // Lipschitz bound for the weight gradient: sum of generator norms squared.
    let lip: f64 = generators.iter().map(|g| dot(g, g)).sum::<f64>().max(1e-12);
    let step = 1.0 / lip;
    for _ in 0..200 {
        let residual = sub(&combo(&weights), x);
        let grad: Vec<f64> = generators.iter().map(|g| dot(g, &residual)).collect();
        let moved: Vec<f64> = weights
            .iter()
            .zip(&grad)
            .map(|(w, g)| w - step * g)
            .collect();
        weights = crate::region::project_simplex(&moved);
    }
    norm_l2(&sub(&combo(&weights), x))
}

/// Shared core of the global and local certifications: test
/// `<grad g(x), x - x*> >= 0` over sampled points against each generator,
/// flagging strict violations and zero inner products away from the
/// minimizer set.
fn certify_with_sampler<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    generators: &[Vec<f64>],
    n_samples: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Result<PrimalPoint>,
) -> CoherenceReport {
    let mut samples = Vec::with_capacity(n_samples);
    let mut grads = Vec::with_capacity(n_samples);
    let mut grad_scale: f64 = 0.0;
    for _ in 0..n_samples {
        match draw(rng) {
            Ok(x) => {
                let g = problem.mean_gradient(x.coords());
                grad_scale = grad_scale.max(norm_l2(g.coords()));
                samples.push(x);
                grads.push(g);
            }
            Err(e) => return CoherenceReport::inconclusive(format!("sampler failed: {e}")),
        }
    }

    let tau_vc = 1e-8 * (1.0 + grad_scale);
    let eps_gen = 1e-6 * problem.region().diameter();
    let mut min_inner = f64::INFINITY;
    let mut witness: Option<Witness> = None;
    let mut equality_violations = Vec::new();

    for (x, g) in samples.iter().zip(&grads) {
        let grad_norm = norm_l2(g.coords());
        let mut hull_dist = f64::NAN;
        for x_star in generators {
            let inner = dot(g.coords(), &sub(x.coords(), x_star));
            if inner < min_inner {
                min_inner = inner;
                if inner < -tau_vc {
                    witness = Some(Witness {
                        x: x.coords().to_vec(),
                        x_star: x_star.clone(),
                        value: inner,
                    });
                }
            }
            // The "equality iff minimizer" clause. A vanishing inner product
            // away from the minimizer set only evidences a violation when it
            // cannot be explained by proximity to the set (convex, so the
            // hull of the generators): either the gradient is sizeable yet
            // orthogonal (transversal zero), or the point is stationary away
            // from the set. Near a minimizer both |inner| and the product
            // ||grad|| dist vanish together, which is legitimate.
            if inner.abs() <= tau_vc {
                if hull_dist.is_nan() {
                    hull_dist = dist_to_hull(generators, x.coords());
                }
                if hull_dist > 10.0 * eps_gen
                    && (grad_norm * hull_dist > 1e3 * tau_vc || grad_norm <= tau_vc)
                {
                    equality_violations.push(EqualityViolation {
                        x: x.coords().to_vec(),
                        x_star: x_star.clone(),
                        inner,
                        dist_to_minimizers: hull_dist,
                    });
                }
            }
        }
    }

    let verdict = if witness.is_some() || !equality_violations.is_empty() {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    CoherenceReport {
        verdict,
        samples_tested: samples.len(),
        min_inner_product: min_inner,
        witness,
        equality_violations,
        note: None,
    }
}

/// Sampled certification of global variational coherence against the
/// problem's stored minimizer generators.
pub fn certify_vc<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    n_samples: usize,
    rng: &mut R,
) -> CoherenceReport {
    let region = problem.region().clone();
    certify_with_sampler(
        problem,
        problem.minimizers(),
        n_samples,
        rng,
        move |rng| region.sample_uniform(rng),
    )
}

/// Sampled certification of local variational coherence on
/// `B(candidate, radius) ∩ X`, with the candidate playing the role of the
/// minimizer set.
pub fn certify_lvc<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    candidate: &PrimalPoint,
    radius: f64,
    n_samples: usize,
    rng: &mut R,
) -> CoherenceReport {
    if !problem.region().contains(candidate.coords()) {
        return CoherenceReport::inconclusive("candidate is infeasible".into());
    }
    if !(radius > 0.0) {
        return CoherenceReport::inconclusive("radius must be positive".into());
    }
    let region = problem.region().clone();
    let center = candidate.coords().to_vec();
    let generators = vec![center.clone()];
    certify_with_sampler(problem, &generators, n_samples, rng, move |rng| {
        region.sample_ball_intersection(&center, radius, rng)
    })
}

/// A cone membership query at a feasible base point.
pub struct ConeQuery<'a> {
    pub region: &'a FeasibleRegion,
    pub vertex: &'a PrimalPoint,
    pub direction: &'a [f64],
}

impl ConeQuery<'_> {
    fn check(&self) -> Result<()> {
        if self.direction.len() != self.region.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.region.dim(),
                got: self.direction.len(),
            });
        }
        if norm_l2(self.direction) == 0.0 {
            return Err(Error::OutOfRange("direction must be nonzero".into()));
        }
        if !self.region.contains(self.vertex.coords()) {
            return Err(Error::Infeasible {
                detail: format!("{:?}", self.vertex.coords()),
            });
        }
        Ok(())
    }
}

/// Does the ray `vertex + t * direction` enter the region for some `t > 0`?
/// Exact active-constraint test for polyhedral regions; analytic test for
/// balls.
pub fn tangent_cone_contains(q: &ConeQuery) -> Result<bool> {
    q.check()?;
    let v = q.vertex.coords();
    let z = q.direction;
    let scale = TAU_CONE * norm_l2(z).max(1.0);
    let act_tol = q.region.feasibility_tol();
    Ok(match q.region.kind() {
        RegionKind::Box(b) => v.iter().zip(z).zip(b.lower.iter().zip(&b.upper)).all(
            |((vi, zi), (l, u))| {
                ((vi - l).abs() > act_tol || *zi >= -scale)
                    && ((u - vi).abs() > act_tol || *zi <= scale)
            },
        ),
        RegionKind::Simplex { .. } => {
            z.iter().sum::<f64>().abs() <= scale
                && v.iter()
                    .zip(z)
                    .all(|(vi, zi)| *vi > act_tol || *zi >= -scale)
        }
        RegionKind::Ball { center, radius } => {
            let gap = radius - norm_l2(&sub(v, center));
            gap > act_tol || dot(&sub(v, center), z) <= scale * radius
        }
        RegionKind::HPolytope {
            a, b, bounding_box, ..
        } => {
            let rows_ok = a.iter().zip(b).all(|(row, bi)| {
                let slack = bi - dot(row, v);
                slack > act_tol || dot(row, z) <= scale * norm_l2(row)
            });
            let box_ok = v
                .iter()
                .zip(z)
                .zip(bounding_box.lower.iter().zip(&bounding_box.upper))
                .all(|((vi, zi), (l, u))| {
                    ((vi - l).abs() > act_tol || *zi >= -scale)
                        && ((u - vi).abs() > act_tol || *zi <= scale)
                });
            rows_ok && box_ok
        }
    })
}

/// Generator (V-)representation of the tangent cone at a point of a
/// polyhedral region. For H-polytopes only simple vertices (exactly `d`
/// independent active constraints) are supported; balls have no vertex
/// structure away from the interior.
pub fn tangent_generators(region: &FeasibleRegion, vertex: &PrimalPoint) -> Result<Vec<Vec<f64>>> {
    if !region.contains(vertex.coords()) {
        return Err(Error::Infeasible {
            detail: format!("{:?}", vertex.coords()),
        });
    }
    let v = vertex.coords();
    let d = region.dim();
    let act_tol = region.feasibility_tol();
    match region.kind() {
        RegionKind::Box(b) => {
            let mut gens = Vec::new();
            for i in 0..d {
                let mut e = vec![0.0; d];
                if (v[i] - b.lower[i]).abs() <= act_tol {
                    e[i] = 1.0;
                    gens.push(e);
                } else if (b.upper[i] - v[i]).abs() <= act_tol {
                    e[i] = -1.0;
                    gens.push(e);
                } else {
                    e[i] = 1.0;
                    gens.push(e.clone());
                    e[i] = -1.0;
                    gens.push(e);
                }
            }
            Ok(gens)
        }
        RegionKind::Simplex { .. } => {
            let support: Vec<usize> = (0..d).filter(|&i| v[i] > act_tol).collect();
            let mut gens = Vec::new();
            for &j in &support {
                for i in 0..d {
                    if i != j {
                        let mut g = vec![0.0; d];
                        g[i] = 1.0;
                        g[j] = -1.0;
                        gens.push(g);
                    }
                }
            }
            Ok(gens)
        }
        RegionKind::Ball { center, radius } => {
            let gap = radius - norm_l2(&sub(v, center));
            if gap > act_tol {
                // Interior: the tangent cone is the whole space.
                let mut gens = Vec::new();
                for i in 0..d {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    gens.push(e.clone());
                    e[i] = -1.0;
                    gens.push(e);
                }
                Ok(gens)
            } else {
                Err(Error::UnsupportedCone(
                    "no generator representation at smooth ball boundary points".into(),
                ))
            }
        }
        RegionKind::HPolytope {
            a, b, bounding_box, ..
        } => {
            // Collect active outward normals from Ax <= b and the box.
            let mut normals: Vec<Vec<f64>> = Vec::new();
            for (row, bi) in a.iter().zip(b) {
                if (bi - dot(row, v)).abs() <= act_tol * norm_l2(row).max(1.0) {
                    normals.push(row.clone());
                }
            }
            for i in 0..d {
                if (v[i] - bounding_box.lower[i]).abs() <= act_tol {
                    let mut e = vec![0.0; d];
                    e[i] = -1.0;
                    normals.push(e);
                }
                if (bounding_box.upper[i] - v[i]).abs() <= act_tol {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    normals.push(e);
                }
            }
            if normals.is_empty() {
                let mut gens = Vec::new();
                for i in 0..d {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    gens.push(e.clone());
                    e[i] = -1.0;
                    gens.push(e);
                }
                return Ok(gens);
            }
            if normals.len() != d {
                return Err(Error::UnsupportedCone(format!(
                    "{} active constraints at a point of dimension {d}; only simple \
                     vertices are supported",
                    normals.len()
                )));
            }
            // TC = { z : M z <= 0 } with invertible M: generated by the
            // columns of -M^{-1}.
            let mut gens = Vec::with_capacity(d);
            for k in 0..d {
                let mut rhs = vec![0.0; d];
                rhs[k] = -1.0;
                let col = gauss_solve(&normals, &rhs).ok_or_else(|| {
                    Error::UnsupportedCone("active constraint normals are singular".into())
                })?;
                gens.push(col);
            }
            Ok(gens)
        }
    }
}

/// Is `direction` in the polar cone `PC(vertex) = { y : <y, z> <= 0 for all
/// z in TC(vertex) }`? Exact via the tangent generator representation.
pub fn polar_cone_contains(q: &ConeQuery) -> Result<bool> {
    q.check()?;
    let gens = tangent_generators(q.region, q.vertex)?;
    let scale = TAU_CONE * norm_l2(q.direction).max(1.0);
    Ok(gens
        .iter()
        .all(|z| dot(q.direction, z) <= scale * norm_l2(z).max(1.0)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub is_sharp: bool,
    /// Minimal `<grad g(x*), z>` over unit tangent directions.
    pub gamma_hat: f64,
    pub n_directions: usize,
}

/// Estimate the sharpness modulus at a candidate minimizer: the minimum of
/// `<grad g(x*), z>` over unit tangent directions `z` (edge generators for
/// polyhedral regions plus random cone samples).
pub fn check_sharpness<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    candidate: &PrimalPoint,
    n_dirs: usize,
    rng: &mut R,
) -> Result<SharpnessReport> {
    let region = problem.region();
    if !region.contains(candidate.coords()) {
        return Err(Error::Infeasible {
            detail: format!("{:?}", candidate.coords()),
        });
    }
    let grad = problem.mean_gradient(candidate.coords());
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    match tangent_generators(region, candidate) {
        Ok(gens) => {
            for g in gens {
                let n = norm_l2(&g);
                if n > 0.0 {
                    dirs.push(g.iter().map(|v| v / n).collect());
                }
            }
        }
        Err(Error::UnsupportedCone(_)) => {}
        Err(e) => return Err(e),
    }
    // Random tangent samples refine polyhedral cones and cover smooth
    // boundaries where no generator representation exists.
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut attempts = 0;
    let mut accepted = 0;
    while accepted < n_dirs && attempts < 50 * n_dirs.max(1) {
        attempts += 1;
        let z: Vec<f64> = (0..region.dim()).map(|_| normal.sample(rng)).collect();
        let n = norm_l2(&z);
        if n == 0.0 {
            continue;
        }
        let q = ConeQuery {
            region,
            vertex: candidate,
            direction: &z,
        };
        if tangent_cone_contains(&q)? {
            dirs.push(z.iter().map(|v| v / n).collect());
            accepted += 1;
        }
    }
    if dirs.is_empty() {
        return Err(Error::Numeric(
            "no tangent directions found at the candidate".into(),
        ));
    }
    let gamma_hat = dirs
        .iter()
        .map(|z| dot(grad.coords(), z))
        .fold(f64::INFINITY, f64::min);
    Ok(SharpnessReport {
        is_sharp: gamma_hat > TAU_SHARP,
        gamma_hat,
        n_directions: dirs.len(),
    })
}

/// Indices `n` with `dist(X*, X_n) < eps`, streamed over `(n, x)` pairs.
pub fn hitting_times<'a, I>(stream: I, generators: &[Vec<f64>], eps: f64, norm: Norm) -> Vec<u64>
where
    I: IntoIterator<Item = (u64, &'a [f64])>,
{
    stream
        .into_iter()
        .filter(|(_, x)| {
            generators
                .iter()
                .any(|g| norm.primal(&sub(x, g)) < eps)
        })
        .map(|(n, _)| n)
        .collect()
}

/// Indices `n` whose dual state lies in the coupling zone:
/// `F(X*, Y_n) < delta`, streamed over `(n, y)` pairs.
pub fn fenchel_zone_hits<'a, I>(
    stream: I,
    h: Regularizer,
    region: &FeasibleRegion,
    generators: &[Vec<f64>],
    delta: f64,
) -> Result<Vec<u64>>
where
    I: IntoIterator<Item = (u64, &'a [f64])>,
{
    if !(delta > 0.0) {
        return Err(Error::OutOfRange("delta must be positive".into()));
    }
    let mut hits = Vec::new();
    for (n, y) in stream {
        let f = fenchel_to_set(h, region, generators, &DualVector::new(y.to_vec()))?;
        if f < delta {
            hits.push(n);
        }
    }
    Ok(hits)
}

/// Streaming detector for finite-step convergence: tracks the start of the
/// maximal suffix on which the iterate equals `vertex` bitwise.
#[derive(Debug, Clone)]
pub struct FiniteHitDetector {
    vertex: Vec<f64>,
    suffix_start: Option<u64>,
    last_n: Option<u64>,
}

impl FiniteHitDetector {
    pub fn new(vertex: Vec<f64>) -> Self {
        Self {
            vertex,
            suffix_start: None,
            last_n: None,
        }
    }

    pub fn observe(&mut self, n: u64, x: &[f64]) {
        let equal = x.len() == self.vertex.len()
            && x.iter()
                .zip(&self.vertex)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if equal {
            self.suffix_start.get_or_insert(n);
        } else {
            self.suffix_start = None;
        }
        self.last_n = Some(n);
    }

    /// The first index from which every observed iterate equals the vertex,
    /// provided the all-equal suffix spans at least `tail_window` steps.
    pub fn finish(&self, tail_window: u64) -> Option<u64> {
        let (start, last) = (self.suffix_start?, self.last_n?);
        (last - start + 1 >= tail_window).then_some(start)
    }
}

/// One-shot form of [`FiniteHitDetector`] over an `(n, x)` stream.
pub fn detect_finite_hit<'a, I>(stream: I, vertex: &PrimalPoint, tail_window: u64) -> Option<u64>
where
    I: IntoIterator<Item = (u64, &'a [f64])>,
{
    let mut det = FiniteHitDetector::new(vertex.coords().to_vec());
    for (n, x) in stream {
        det.observe(n, x);
    }
    det.finish(tail_window)
}

/// Partial-pivot Gaussian elimination for the small dense systems arising in
/// cone computations. Returns `None` for singular matrices.
fn gauss_solve(matrix: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = matrix.iter().map(|r| r.clone()).collect();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
