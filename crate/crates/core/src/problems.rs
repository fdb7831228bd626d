//! Stochastic test problems: objectives, exact mean gradients, noisy
//! gradient oracles and known minimizer sets.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::region::{FeasibleRegion, RegionKind};
use crate::regularizer::Norm;
use crate::vecops::{dot, norm_l2, sub};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Additive zero-mean gradient noise. The oracle returns
/// `mean_gradient(x) + zeta` with `zeta` drawn from this model; the RNG is
/// owned by the caller, so sampling is deterministic given its state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    GaussianAdditive { sigma: f64 },
    UniformAdditive { halfwidth: f64 },
}

impl NoiseModel {
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        match self {
            NoiseModel::None => vec![0.0; dim],
            NoiseModel::GaussianAdditive { sigma } => {
                let dist = Normal::new(0.0, *sigma).expect("sigma must be finite");
                (0..dim).map(|_| dist.sample(rng)).collect()
            }
            NoiseModel::UniformAdditive { halfwidth } => (0..dim)
                .map(|_| rng.random_range(-halfwidth..*halfwidth))
                .collect(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }
}

type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An objective `g = E[G(.; xi)]` over a compact region, together with its
/// exact mean gradient, a finite generator set of the minimizer set, and the
/// gradient noise model. Immutable and cheap to clone.
#[derive(Clone)]
pub struct StochasticProblem {
    name: String,
    region: FeasibleRegion,
    objective: ObjectiveFn,
    mean_gradient: GradientFn,
    minimizers: Vec<Vec<f64>>,
    noise: NoiseModel,
    coherent: bool,
}

impl std::fmt::Debug for StochasticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticProblem")
            .field("name", &self.name)
            .field("dim", &self.region.dim())
            .field("minimizers", &self.minimizers)
            .field("noise", &self.noise)
            .field("coherent", &self.coherent)
            .finish()
    }
}

impl StochasticProblem {
    pub fn new(
        name: impl Into<String>,
        region: FeasibleRegion,
        objective: ObjectiveFn,
        mean_gradient: GradientFn,
        minimizers: Vec<Vec<f64>>,
        coherent: bool,
    ) -> Result<Self> {
        if minimizers.is_empty() {
            return Err(Error::OutOfRange("minimizer set must be nonempty".into()));
        }
        for m in &minimizers {
            if !region.contains(m) {
                return Err(Error::Infeasible {
                    detail: format!("stored minimizer {m:?}"),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            region,
            objective,
            mean_gradient,
            minimizers,
            noise: NoiseModel::None,
            coherent,
        })
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn region(&self) -> &FeasibleRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Whether the shipped problem is variationally coherent (used to select
    /// positive/negative controls in tests and reports).
    pub fn is_coherent(&self) -> bool {
        self.coherent
    }

    pub fn minimizers(&self) -> &[Vec<f64>] {
        &self.minimizers
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn mean_gradient(&self, x: &[f64]) -> DualVector {
        DualVector::new((self.mean_gradient)(x))
    }

    /// Noisy gradient oracle: `grad g(x) + zeta`.
    pub fn sample_gradient<R: Rng + ?Sized>(&self, x: &PrimalPoint, rng: &mut R) -> DualVector {
        let mut g = (self.mean_gradient)(x.coords());
        if !self.noise.is_none() {
            let zeta = self.noise.sample(g.len(), rng);
            for (gi, zi) in g.iter_mut().zip(&zeta) {
                *gi += zi;
            }
        }
        DualVector::new(g)
    }

    /// Distance from `x` to the minimizer set in the given norm.
    pub fn minimizer_distance(&self, x: &[f64], norm: Norm) -> f64 {
        self.minimizers
            .iter()
            .map(|m| norm.primal(&sub(x, m)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `g(x) = 2 sum sqrt(1 + x_i)` on `[0,1]^d`: coherent but not quasi-convex
/// for `d >= 2`. Unique minimizer at the origin.
pub fn make_sqrt_example(d: usize) -> Result<StochasticProblem> {
    if d == 0 {
        return Err(Error::OutOfRange("dimension must be >= 1".into()));
    }
    let region = FeasibleRegion::new_box(vec![0.0; d], vec![1.0; d])?;
    StochasticProblem::new(
        format!("sqrt-d{d}"),
        region,
        Arc::new(|x: &[f64]| 2.0 * x.iter().map(|v| (1.0 + v).sqrt()).sum::<f64>()),
        Arc::new(|x: &[f64]| x.iter().map(|v| 1.0 / (1.0 + v).sqrt()).collect()),
        vec![vec![0.0; d]],
        true,
    )
}

/// `g(r, theta) = (3 + sin 5theta + cos 3theta) r^2 (5/3 - r)` over the unit
/// ball of `R^2`. The radial derivative is positive off the origin, so the
/// problem is coherent with unique minimizer `(0, 0)`.
pub fn make_polar_example() -> Result<StochasticProblem> {
    let region = FeasibleRegion::new_ball(vec![0.0, 0.0], 1.0)?;
    let objective = |x: &[f64]| -> f64 {
        let r = norm_l2(x);
        let theta = x[1].atan2(x[0]);
        let a = 3.0 + (5.0 * theta).sin() + (3.0 * theta).cos();
        a * r * r * (5.0 / 3.0 - r)
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        let r = norm_l2(x);
        if r == 0.0 {
            // g ~ r^2 near the origin: removable singularity.
            return vec![0.0, 0.0];
        }
        let theta = x[1].atan2(x[0]);
        let a = 3.0 + (5.0 * theta).sin() + (3.0 * theta).cos();
        let a_prime = 5.0 * (5.0 * theta).cos() - 3.0 * (3.0 * theta).sin();
        // dg/dr and (1/r) dg/dtheta are both finite as r -> 0.
        let dr = a * r * (10.0 / 3.0 - 3.0 * r);
        let dtheta_over_r = a_prime * r * (5.0 / 3.0 - r);
        let (cos_t, sin_t) = (theta.cos(), theta.sin());
        vec![
            dr * cos_t - dtheta_over_r * sin_t,
            dr * sin_t + dtheta_over_r * cos_t,
        ]
    };
    StochasticProblem::new(
        "polar",
        region,
        Arc::new(objective),
        Arc::new(gradient),
        vec![vec![0.0, 0.0]],
        true,
    )
}

/// Rosenbrock `(1 - x1)^2 + 100 (x2 - x1^2)^2` on `[-2,2]^2`: not globally
/// coherent, but its minimizer `(1,1)` is locally coherent.
pub fn make_rosenbrock() -> Result<StochasticProblem> {
    let region = FeasibleRegion::new_box(vec![-2.0, -2.0], vec![2.0, 2.0])?;
    StochasticProblem::new(
        "rosenbrock",
        region,
        Arc::new(|x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        }),
        Arc::new(|x: &[f64]| {
            let b = x[1] - x[0] * x[0];
            vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b]
        }),
        vec![vec![1.0, 1.0]],
        false,
    )
}

/// `g(x) = cos x` on `[0, 4 pi]`: the minimizer set `{pi, 3 pi}` is not
/// convex, so the problem cannot be coherent. Negative control for the
/// coherence certifier.
pub fn make_cosine_example() -> Result<StochasticProblem> {
    let region = FeasibleRegion::new_box(vec![0.0], vec![4.0 * PI])?;
    StochasticProblem::new(
        "cosine",
        region,
        Arc::new(|x: &[f64]| x[0].cos()),
        Arc::new(|x: &[f64]| vec![-x[0].sin()]),
        vec![vec![PI], vec![3.0 * PI]],
        false,
    )
}

/// `g(x) = ||x - x0||^2 / 2` on `[0,1]^d` with an interior minimizer (a
/// linear ramp from 0.3 to 0.7 across coordinates).
pub fn make_quadratic(d: usize) -> Result<StochasticProblem> {
    if d == 0 {
        return Err(Error::OutOfRange("dimension must be >= 1".into()));
    }
    let region = FeasibleRegion::new_box(vec![0.0; d], vec![1.0; d])?;
    let x0: Vec<f64> = (0..d)
        .map(|i| {
            if d == 1 {
                0.5
            } else {
                0.3 + 0.4 * i as f64 / (d - 1) as f64
            }
        })
        .collect();
    let x0_obj = x0.clone();
    let x0_grad = x0.clone();
    StochasticProblem::new(
        format!("quadratic-{d}"),
        region,
        Arc::new(move |x: &[f64]| {
            0.5 * x
                .iter()
                .zip(&x0_obj)
                .map(|(v, c)| (v - c) * (v - c))
                .sum::<f64>()
        }),
        Arc::new(move |x: &[f64]| x.iter().zip(&x0_grad).map(|(v, c)| v - c).collect()),
        vec![x0],
        true,
    )
}

/// Affine objective `<c, x>` over a polytope, constant only on vertices.
/// The optimal vertex is found by enumeration (box/simplex) and must be
/// unique, otherwise the program is not generic.
pub fn make_generic_lp(c: Vec<f64>, region: FeasibleRegion) -> Result<StochasticProblem> {
    if c.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: c.len(),
        });
    }
    match region.kind() {
        RegionKind::Box(_) | RegionKind::Simplex { .. } => {}
        _ => {
            return Err(Error::OutOfRange(
                "make_generic_lp enumerates vertices; use make_generic_lp_with_minimizer \
                 for H-polytopes"
                    .into(),
            ))
        }
    }
    let vertices = region.vertices()?;
    let values: Vec<f64> = vertices.iter().map(|v| dot(&c, v)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let near: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] <= best + tol)
        .collect();
    if near.len() != 1 {
        return Err(Error::Genericity(
            "objective ties on two or more vertices".into(),
        ));
    }
    let minimizer = vertices[near[0]].clone();
    lp_problem(c, region, minimizer)
}

/// Generic-LP constructor for H-polytopes: vertex enumeration is not
/// available, so the caller asserts genericity and supplies the unique
/// optimal vertex (verified feasible).
pub fn make_generic_lp_with_minimizer(
    c: Vec<f64>,
    region: FeasibleRegion,
    minimizer: Vec<f64>,
) -> Result<StochasticProblem> {
    if c.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: c.len(),
        });
    }
    lp_problem(c, region, minimizer)
}

fn lp_problem(
    c: Vec<f64>,
    region: FeasibleRegion,
    minimizer: Vec<f64>,
) -> Result<StochasticProblem> {
    let name = match region.kind() {
        RegionKind::Box(_) => "lp-box",
        RegionKind::Simplex { .. } => "lp-simplex",
        _ => "lp-polytope",
    };
    let c_obj = c.clone();
    let c_grad = c.clone();
    StochasticProblem::new(
        name,
        region,
        Arc::new(move |x: &[f64]| dot(&c_obj, x)),
        Arc::new(move |_x: &[f64]| c_grad.clone()),
        vec![minimizer],
        true,
    )
}

/// Central finite-difference check of the stored mean gradient at random
/// interior-ish points. Returns the maximum relative error observed.
pub fn check_gradient_consistency<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    n_points: usize,
    rng: &mut R,
) -> Result<f64> {
    let region = problem.region();
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let x = region.sample_uniform(rng)?;
        let grad = problem.mean_gradient(x.coords());
        let step = 1e-6 * (1.0 + norm_l2(x.coords()));
        let mut fd = vec![0.0; x.dim()];
        for i in 0..x.dim() {
            let mut plus = x.coords().to_vec();
            let mut minus = x.coords().to_vec();
            plus[i] += step;
            minus[i] -= step;
            fd[i] = (problem.objective(&plus) - problem.objective(&minus)) / (2.0 * step);
        }
        let err = norm_l2(&sub(&fd, grad.coords())) / (1.0 + norm_l2(grad.coords()));
        worst = worst.max(err);
    }
    Ok(worst)
}

/// First-order optimality of the stored minimizers over sampled feasible
/// directions: returns the most negative `<grad g(x*), x - x*>` observed.
pub fn check_minimizer_optimality<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    n_points: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for m in problem.minimizers() {
        let grad = problem.mean_gradient(m);
        for _ in 0..n_points {
            let x = problem.region().sample_uniform(rng)?;
            worst = worst.min(dot(grad.coords(), &sub(x.coords(), m)));
        }
    }
    Ok(worst)
}

/// Problem registry addressable by name from the CLI.
pub mod registry {
    use super::*;

    /// Registry name patterns with short descriptions.
    pub fn names() -> Vec<(&'static str, &'static str)> {
        vec![
            (
                "sqrt-d<d>",
                "2*sum sqrt(1+x_i) on [0,1]^d; coherent, not quasi-convex (e.g. sqrt-d2)",
            ),
            (
                "polar",
                "(3+sin 5t+cos 3t) r^2 (5/3-r) on the unit ball; coherent",
            ),
            (
                "rosenbrock",
                "(1-x1)^2+100(x2-x1^2)^2 on [-2,2]^2; locally coherent at (1,1)",
            ),
            ("lp-simplex", "<(1,2), x> on the unit simplex; sharp vertex (1,0)"),
            (
                "lp-box",
                "<(-1,3,0.5), x> on [0,1]^3; sharp vertex (1,0,0)",
            ),
            ("cosine", "cos x on [0,4pi]; NOT coherent (negative control)"),
            (
                "quadratic-<d>",
                "||x-x0||^2/2 on [0,1]^d, interior minimizer (alias: quadratic)",
            ),
        ]
    }

    /// Look a problem up by registry name.
    pub fn lookup(name: &str) -> Result<StochasticProblem> {
        if let Some(rest) = name.strip_prefix("sqrt-d") {
            let d: usize = rest
                .parse()
                .map_err(|_| Error::UnknownProblem(name.into()))?;
            return make_sqrt_example(d);
        }
        if name == "quadratic" {
            return make_quadratic(2);
        }
        if let Some(rest) = name.strip_prefix("quadratic-") {
            let d: usize = rest
                .parse()
                .map_err(|_| Error::UnknownProblem(name.into()))?;
            return make_quadratic(d);
        }
        match name {
            "polar" => make_polar_example(),
            "rosenbrock" => make_rosenbrock(),
            "cosine" => make_cosine_example(),
            "lp-simplex" => make_generic_lp(vec![1.0, 2.0], FeasibleRegion::new_simplex(2)?),
            "lp-box" => make_generic_lp(
                vec![-1.0, 3.0, 0.5],
                FeasibleRegion::new_box(vec![0.0; 3], vec![1.0; 3])?,
            ),
            _ => Err(Error::UnknownProblem(name.into())),
        }
    }
}
