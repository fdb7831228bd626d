//! The stochastic mirror descent iteration, step-size schedules with the
//! square-summable-but-not-summable contract, and confidence-scaled schedule
//! construction.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::problems::StochasticProblem;
use crate::regularizer::{fenchel_to_set, mirror_map, Regularizer};
use crate::vecops::all_finite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Step sizes `alpha_n = base_alpha / (n + offset)^beta` for `n >= 1`.
/// `beta` in `(1/2, 1]` enforces square-summability with divergent sum
/// structurally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub base_alpha: f64,
    pub exponent_beta: f64,
    pub offset: u32,
}

impl StepSchedule {
    pub fn new(base_alpha: f64, exponent_beta: f64, offset: u32) -> Result<Self> {
        let s = Self {
            base_alpha,
            exponent_beta,
            offset,
        };
        let report = s.validate();
        if report.valid {
            Ok(s)
        } else {
            Err(Error::InvalidSchedule(report.reasons.join("; ")))
        }
    }

    /// `alpha_n` for `n >= 1`. The SMD step applied at iterate `n` uses
    /// `alpha_{n+1}`, so the very first applied step is `alpha_1`.
    pub fn alpha(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        self.base_alpha / ((n + self.offset as u64) as f64).powf(self.exponent_beta)
    }

    /// Scale the base step by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            base_alpha: self.base_alpha * s,
            ..*self
        }
    }

    /// `sum_{n>=1} alpha_n^2`, evaluated as a partial sum plus a midpoint
    /// integral tail; relative error well below 1e-6 for beta in (1/2, 1].
    pub fn sum_alpha_sq(&self) -> f64 {
        let two_beta = 2.0 * self.exponent_beta;
        let off = self.offset as f64;
        let n_partial: u64 = 100_000;
        let mut partial = 0.0;
        for n in 1..=n_partial {
            partial += (n as f64 + off).powf(-two_beta);
        }
        // Integral of t^(-2 beta) from n_partial + 1/2 to infinity.
        let tail = (n_partial as f64 + off + 0.5).powf(1.0 - two_beta) / (two_beta - 1.0);
        self.base_alpha * self.base_alpha * (partial + tail)
    }

    /// Check the step-size contract and report partial sums at n = 10^6 for
    /// documentation.
    pub fn validate(&self) -> ScheduleReport {
        let mut reasons = Vec::new();
        if !(self.base_alpha > 0.0) || !self.base_alpha.is_finite() {
            reasons.push("base_alpha must be positive and finite".to_string());
        }
        if !(self.exponent_beta > 0.5 && self.exponent_beta <= 1.0) {
            reasons.push(format!(
                "beta = {} outside (1/2, 1]: beta <= 1/2 breaks square-summability, \
                 beta > 1 makes the step sum converge",
                self.exponent_beta
            ));
        }
        let valid = reasons.is_empty();
        let (sum_to_1e6, sum_sq_to_1e6) = if valid {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for n in 1..=1_000_000u64 {
                let a = self.alpha(n);
                s += a;
                s2 += a * a;
            }
            (s, s2)
        } else {
            (f64::NAN, f64::NAN)
        };
        ScheduleReport {
            valid,
            reasons,
            partial_sum_1e6: sum_to_1e6,
            partial_sum_sq_1e6: sum_sq_to_1e6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub valid: bool,
    pub reasons: Vec<String>,
    pub partial_sum_1e6: f64,
    pub partial_sum_sq_1e6: f64,
}

/// Shrink `base` so that `sum alpha_n^2 <= min{ delta eps_bar^2 / (2 R^2 V*^2),
/// K delta eps_bar / B^2 }`, the step budget under which the iterate stays in
/// the coupling zone of the target with probability at least `1 - delta`.
/// The base step is never scaled up.
pub fn confidence_schedule(
    base: StepSchedule,
    delta: f64,
    eps_bar: f64,
    radius: f64,
    v_star: f64,
    strong_convexity: f64,
    grad_bound: f64,
) -> Result<StepSchedule> {
    for (name, v) in [
        ("delta", delta),
        ("eps_bar", eps_bar),
        ("radius", radius),
        ("v_star", v_star),
        ("strong_convexity", strong_convexity),
        ("grad_bound", grad_bound),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::OutOfRange(format!("{name} must be positive")));
        }
    }
    if delta >= 1.0 {
        return Err(Error::OutOfRange("delta must lie in (0, 1)".into()));
    }
    let bound = (delta * eps_bar * eps_bar / (2.0 * radius * radius * v_star * v_star))
        .min(strong_convexity * delta * eps_bar / (grad_bound * grad_bound));
    let current = base.sum_alpha_sq();
    let scale = (bound / current).sqrt().min(1.0);
    Ok(base.scaled(scale))
}

/// Per-step event handed to streaming observers: the iterate index `n`, the
/// primal iterate `X_n` and the dual score `Y_n`.
pub struct StepEvent<'a> {
    pub n: u64,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// One SMD step: `Y_next = Y - alpha_{n+1} grad`, `X_next = Q(Y_next)`.
pub fn smd_step(
    h: Regularizer,
    region: &crate::region::FeasibleRegion,
    schedule: &StepSchedule,
    n: u64,
    y: &DualVector,
    grad_sample: &DualVector,
) -> Result<(DualVector, PrimalPoint)> {
    let alpha = schedule.alpha(n + 1);
    let y_next = DualVector::new(
        y.coords()
            .iter()
            .zip(grad_sample.coords())
            .map(|(yi, gi)| yi - alpha * gi)
            .collect(),
    );
    let x_next = mirror_map(h, region, &y_next)?;
    Ok((y_next, x_next))
}

/// Execution settings for a run. `record_every` thins the stored trace;
/// streaming observers still see every step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSettings {
    pub n_iters: u64,
    pub seed: u64,
    pub record_every: u64,
    /// Initial score variable; defaults to the zero dual vector.
    pub y0: Option<Vec<f64>>,
}

impl RunSettings {
    pub fn new(n_iters: u64, seed: u64, record_every: u64) -> Self {
        Self {
            n_iters,
            seed,
            record_every: record_every.max(1),
            y0: None,
        }
    }

    pub fn with_y0(mut self, y0: Vec<f64>) -> Self {
        self.y0 = Some(y0);
        self
    }
}

/// Time-indexed record of a run: thinned iterates and dual scores, with the
/// distance to the minimizer set and the Fenchel coupling at each recorded
/// step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub problem: String,
    pub regularizer: Regularizer,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub record_every: u64,
    pub steps: Vec<u64>,
    pub iterates: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
    pub dist: Vec<f64>,
    pub fenchel: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_dist(&self) -> f64 {
        *self.dist.last().expect("trace is never empty")
    }

    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trace is never empty")
    }

    /// Internal-consistency check: equal lengths, nonnegative entries, and
    /// the coupling lower bound `F >= K/2 dist^2` on every recorded pair.
    pub fn validate(&self) -> Result<()> {
        let n = self.steps.len();
        if self.iterates.len() != n
            || self.duals.len() != n
            || self.dist.len() != n
            || self.fenchel.len() != n
        {
            return Err(Error::Numeric("trace arrays have inconsistent lengths".into()));
        }
        let k = self.regularizer.strong_convexity();
        for i in 0..n {
            if self.dist[i] < 0.0 || self.fenchel[i] < -1e-12 {
                return Err(Error::Numeric(format!(
                    "negative diagnostic at record {i}: dist={}, F={}",
                    self.dist[i], self.fenchel[i]
                )));
            }
            if self.fenchel[i] < 0.5 * k * self.dist[i] * self.dist[i] - 1e-9 {
                return Err(Error::Numeric(format!(
                    "coupling lower bound violated at record {i}: F={} < K/2 d^2={}",
                    self.fenchel[i],
                    0.5 * k * self.dist[i] * self.dist[i]
                )));
            }
        }
        Ok(())
    }
}

/// Run SMD, forwarding every step to `observe`. The trace records
/// `X_n`, `Y_n`, `dist(X*, X_n)` and `F(X*, Y_n)` at step 0, every
/// `record_every`-th step, and the final step.
pub fn run_observed<F>(
    problem: &StochasticProblem,
    h: Regularizer,
    schedule: &StepSchedule,
    settings: &RunSettings,
    mut observe: F,
) -> Result<RunTrace>
where
    F: FnMut(StepEvent<'_>),
{
    let start = Instant::now();
    let region = problem.region();
    let dim = region.dim();
    let norm = h.paired_norm();
    let gens = problem.minimizers();

    let mut y = match &settings.y0 {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            DualVector::new(v.clone())
        }
        None => DualVector::zeros(dim),
    };
    let mut x = mirror_map(h, region, &y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let capacity = (settings.n_iters / settings.record_every + 2) as usize;
    let mut trace = RunTrace {
        problem: problem.name().to_string(),
        regularizer: h,
        schedule: *schedule,
        seed: settings.seed,
        record_every: settings.record_every,
        steps: Vec::with_capacity(capacity),
        iterates: Vec::with_capacity(capacity),
        duals: Vec::with_capacity(capacity),
        dist: Vec::with_capacity(capacity),
        fenchel: Vec::with_capacity(capacity),
        wall_time: Duration::ZERO,
    };

    let record =
        |trace: &mut RunTrace, n: u64, x: &PrimalPoint, y: &DualVector| -> Result<()> {
            trace.steps.push(n);
            trace.iterates.push(x.coords().to_vec());
            trace.duals.push(y.coords().to_vec());
            trace.dist.push(problem.minimizer_distance(x.coords(), norm));
            trace
                .fenchel
                .push(fenchel_to_set(h, region, gens, y)?.max(0.0));
            Ok(())
        };

    observe(StepEvent {
        n: 0,
        x: x.coords(),
        y: y.coords(),
    });
    record(&mut trace, 0, &x, &y)?;

    for n in 0..settings.n_iters {
        let grad = problem.sample_gradient(&x, &mut rng);
        let (y_next, x_next) = smd_step(h, region, schedule, n, &y, &grad)?;
        if !all_finite(y_next.coords()) {
            return Err(Error::Numeric(format!(
                "dual state became non-finite at step {}",
                n + 1
            )));
        }
        y = y_next;
        x = x_next;
        let step = n + 1;
        observe(StepEvent {
            n: step,
            x: x.coords(),
            y: y.coords(),
        });
        if step % settings.record_every == 0 || step == settings.n_iters {
            record(&mut trace, step, &x, &y)?;
        }
    }

    trace.wall_time = start.elapsed();
    Ok(trace)
}

/// Run SMD without an observer.
pub fn run(
    problem: &StochasticProblem,
    h: Regularizer,
    schedule: &StepSchedule,
    settings: &RunSettings,
) -> Result<RunTrace> {
    run_observed(problem, h, schedule, settings, |_| {})
}

/// Stochastic gradient descent: SMD specialized to the Euclidean
/// regularizer, whose mirror map is the closest-point projection.
pub fn sgd_run(
    problem: &StochasticProblem,
    schedule: &StepSchedule,
    settings: &RunSettings,
) -> Result<RunTrace> {
    run(problem, Regularizer::Euclidean, schedule, settings)
}

/// Independent runs for each seed, in parallel. Each run owns its RNG
/// stream, so the result does not depend on the worker count.
pub fn sweep(
    problem: &StochasticProblem,
    h: Regularizer,
    schedule: &StepSchedule,
    base: &RunSettings,
    seeds: &[u64],
) -> Result<Vec<RunTrace>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let settings = RunSettings {
                seed,
                ..base.clone()
            };
            run(problem, h, schedule, &settings)
        })
        .collect()
}
