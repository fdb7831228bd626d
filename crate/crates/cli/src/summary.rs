//! Aggregated experiment statistics and empirical constant estimation.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use smd_core::vecops::dot;
use smd_core::{Norm, StochasticProblem};

/// Empirical estimates of the problem constants entering the step-size
/// bounds: the region radius, the gradient bound `B`, and the noise
/// second-moment root combined into `V*`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantEstimates {
    pub radius: f64,
    pub b_hat: f64,
    pub noise_rms: f64,
    pub vstar_hat: f64,
}

/// Sample-based estimation: `B` as the max dual gradient norm over uniform
/// points, the noise root-mean-square from the oracle, and
/// `V* = max(2B, noise_rms)`.
pub fn estimate_constants(
    problem: &StochasticProblem,
    norm: Norm,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> smd_core::Result<ConstantEstimates> {
    let region = problem.region();
    let mut b_hat: f64 = 0.0;
    for _ in 0..n_samples {
        let x = region.sample_uniform(rng)?;
        b_hat = b_hat.max(norm.dual(problem.mean_gradient(x.coords()).coords()));
    }
    let mut second = 0.0;
    let n_noise = n_samples.max(1);
    for _ in 0..n_noise {
        let z = problem.noise().sample(region.dim(), rng);
        let d = norm.dual(&z);
        second += d * d;
    }
    let noise_rms = (second / n_noise as f64).sqrt();
    Ok(ConstantEstimates {
        radius: region.radius_bound(),
        b_hat,
        noise_rms,
        vstar_hat: (2.0 * b_hat).max(noise_rms),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerSeedStats {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hitting_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fenchel_zone_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_hit_n0: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite stats"));
        let at = |q: f64| -> f64 {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let w = pos - lo as f64;
            v[lo] * (1.0 - w) + v[hi] * w
        };
        Some(Self {
            q10: at(0.10),
            q25: at(0.25),
            q50: at(0.50),
            q75: at(0.75),
            q90: at(0.90),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub schema_version: u32,
    pub problem: String,
    pub regularizer: String,
    pub schedule: crate::config::ScheduleConfig,
    pub n_iters: u64,
    pub record_every: u64,
    pub seeds: Vec<u64>,
    pub jobs: Vec<crate::config::JobKind>,
    pub constants: ConstantEstimates,
    pub per_seed: Vec<PerSeedStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dist_quantiles: Option<Quantiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_hit_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub is_sharp: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vc_verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lvc_verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apt_t_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apt_median_deviation: Option<Vec<f64>>,
}

/// Dual-norm estimate of the noise second moment, reported for reference.
pub fn noise_second_moment(problem: &StochasticProblem, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let d = problem.dim();
    let mut acc = 0.0;
    for _ in 0..n {
        let z = problem.noise().sample(d, rng);
        acc += dot(&z, &z);
    }
    acc / n as f64
}
