//! Job execution: independent (job, seed) pairs on the worker pool, one
//! artifact file per job and seed, plus the aggregated summary.

use crate::config::{ExperimentConfig, JobKind};
use crate::summary::{estimate_constants, PerSeedStats, Quantiles, SummaryStats};
use anyhow::{Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smd_core::vecops::sub;
use smd_core::{
    apt_deviation, certify_lvc, certify_vc, check_sharpness, integrate_flow, run_observed,
    DualVector, FiniteHitDetector, InterpolatedProcess, Regularizer, RunSettings,
    StochasticProblem,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Which of the configured jobs a subcommand executes.
#[derive(Debug, Clone, Copy)]
pub enum JobFilter {
    All,
    CertificationOnly,
    FlowOnly,
}

impl JobFilter {
    fn select(self, jobs: &[JobKind]) -> Vec<JobKind> {
        match self {
            JobFilter::All => jobs.to_vec(),
            JobFilter::CertificationOnly => {
                let picked: Vec<JobKind> =
                    jobs.iter().copied().filter(|j| j.is_certification()).collect();
                if picked.is_empty() {
                    vec![JobKind::CertifyVc]
                } else {
                    picked
                }
            }
            JobFilter::FlowOnly => {
                let picked: Vec<JobKind> = jobs.iter().copied().filter(|j| j.is_flow()).collect();
                if picked.is_empty() {
                    vec![JobKind::Flow]
                } else {
                    picked
                }
            }
        }
    }
}

/// Stable RNG stream per job kind, independent of the run streams.
fn job_rng(kind: JobKind, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = match kind {
        JobKind::Run => 1,
        JobKind::CertifyVc => 2,
        JobKind::CertifyLvc => 3,
        JobKind::Sharpness => 4,
        JobKind::Flow => 5,
        JobKind::Apt => 6,
        JobKind::FiniteHit => 7,
    };
    rng.set_stream(stream);
    rng
}

struct RunOutput {
    seed: u64,
    final_dist: f64,
    hitting_count: u64,
    fenchel_zone_count: Option<u64>,
    csv: Vec<u8>,
}

pub fn run_experiment(config: &ExperimentConfig, filter: JobFilter) -> Result<SummaryStats> {
    let jobs = filter.select(&config.jobs);
    let problem = config.resolve_problem()?;
    let h = config.resolve_regularizer()?;
    let schedule = config.resolve_schedule();
    let out_dir = PathBuf::from(&config.out_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let mut per_seed: Vec<PerSeedStats> = config
        .seeds
        .iter()
        .map(|&seed| PerSeedStats {
            seed,
            final_dist: None,
            hitting_count: None,
            fenchel_zone_count: None,
            finite_hit_n0: None,
        })
        .collect();

    let mut summary = SummaryStats {
        schema_version: 1,
        problem: config.problem.clone(),
        regularizer: h.name().to_string(),
        schedule: config.schedule.clone(),
        n_iters: config.n_iters,
        record_every: config.record_every,
        seeds: config.seeds.clone(),
        jobs: jobs.clone(),
        constants: estimate_constants(
            &problem,
            h.paired_norm(),
            2_000,
            &mut job_rng(JobKind::Run, 0xC0FFEE),
        )?,
        per_seed: Vec::new(),
        final_dist_quantiles: None,
        finite_hit_fraction: None,
        gamma_hat: None,
        is_sharp: None,
        vc_verdict: None,
        lvc_verdict: None,
        apt_t_list: None,
        apt_median_deviation: None,
    };

    for job in &jobs {
        match job {
            JobKind::Run => {
                let outputs: Vec<RunOutput> = config
                    .seeds
                    .par_iter()
                    .map(|&seed| execute_run(config, &problem, h, &schedule, seed))
                    .collect::<Result<_>>()?;
                let mut dists = Vec::with_capacity(outputs.len());
                for out in outputs {
                    let path = out_dir.join(format!("trace-seed{}.csv", out.seed));
                    fs::write(&path, &out.csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    let slot = per_seed
                        .iter_mut()
                        .find(|s| s.seed == out.seed)
                        .expect("seed slot");
                    slot.final_dist = Some(out.final_dist);
                    slot.hitting_count = Some(out.hitting_count);
                    slot.fenchel_zone_count = out.fenchel_zone_count;
                    dists.push(out.final_dist);
                }
                summary.final_dist_quantiles = Quantiles::from_samples(&dists);
            }
            JobKind::FiniteHit => {
                let vertex = problem.minimizers()[0].clone();
                let tail = config.diagnostics.tail_window;
                let hits: Vec<(u64, Option<u64>)> = config
                    .seeds
                    .par_iter()
                    .map(|&seed| {
                        let mut detector = FiniteHitDetector::new(vertex.clone());
                        let mut settings = RunSettings::new(config.n_iters, seed, config.n_iters);
                        if let Some(y0) = &config.y0 {
                            settings = settings.with_y0(y0.clone());
                        }
                        run_observed(&problem, h, &schedule, &settings, |ev| {
                            detector.observe(ev.n, ev.x)
                        })
                        .map(|_| (seed, detector.finish(tail)))
                        .map_err(anyhow::Error::from)
                    })
                    .collect::<Result<_>>()?;
                let mut found = 0usize;
                for (seed, n0) in hits {
                    let slot = per_seed
                        .iter_mut()
                        .find(|s| s.seed == seed)
                        .expect("seed slot");
                    slot.finite_hit_n0 = n0;
                    found += usize::from(n0.is_some());
                }
                summary.finite_hit_fraction = Some(found as f64 / config.seeds.len() as f64);
            }
            JobKind::CertifyVc => {
                let samples = config.certify.samples;
                let report = certify_vc(
                    &problem,
                    samples,
                    &mut job_rng(JobKind::CertifyVc, config.seeds[0]),
                );
                summary.vc_verdict = Some(format!("{:?}", report.verdict).to_lowercase());
                write_json(&out_dir.join("certify-vc.json"), &report)?;
            }
            JobKind::CertifyLvc => {
                let lvc = config.lvc.as_ref().expect("validated");
                let candidate = problem
                    .region()
                    .check_point(lvc.candidate.clone())
                    .map_err(anyhow::Error::from)?;
                let report = certify_lvc(
                    &problem,
                    &candidate,
                    lvc.radius,
                    lvc.samples,
                    &mut job_rng(JobKind::CertifyLvc, config.seeds[0]),
                );
                summary.lvc_verdict = Some(format!("{:?}", report.verdict).to_lowercase());
                write_json(&out_dir.join("certify-lvc.json"), &report)?;
            }
            JobKind::Sharpness => {
                let candidate_coords = config
                    .sharpness
                    .candidate
                    .clone()
                    .unwrap_or_else(|| problem.minimizers()[0].clone());
                let candidate = problem
                    .region()
                    .check_point(candidate_coords)
                    .map_err(anyhow::Error::from)?;
                let report = check_sharpness(
                    &problem,
                    &candidate,
                    config.sharpness.directions,
                    &mut job_rng(JobKind::Sharpness, config.seeds[0]),
                )?;
                summary.gamma_hat = Some(report.gamma_hat);
                summary.is_sharp = Some(report.is_sharp);
                write_json(&out_dir.join("sharpness.json"), &report)?;
            }
            JobKind::Flow => {
                let flow = config.flow.as_ref().expect("validated");
                let y0 = DualVector::new(
                    flow.y0.clone().unwrap_or_else(|| vec![0.0; problem.dim()]),
                );
                let traj = integrate_flow(&problem, h, &y0, flow.t_max, flow.dt)?;
                let path = out_dir.join("flow.csv");
                let mut buf = Vec::new();
                traj.write_csv(h, problem.region(), problem.minimizers(), &mut buf)?;
                fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
            JobKind::Apt => {
                let apt = config.apt.as_ref().expect("validated");
                let per_seed_devs: Vec<(u64, Vec<f64>)> = config
                    .seeds
                    .par_iter()
                    .map(|&seed| -> Result<(u64, Vec<f64>)> {
                        let mut anchors = Vec::with_capacity(config.n_iters as usize + 1);
                        let mut settings =
                            RunSettings::new(config.n_iters, seed, config.n_iters);
                        if let Some(y0) = &config.y0 {
                            settings = settings.with_y0(y0.clone());
                        }
                        run_observed(&problem, h, &schedule, &settings, |ev| {
                            anchors.push(DualVector::new(ev.y.to_vec()))
                        })?;
                        let process = InterpolatedProcess::from_schedule(&schedule, anchors)?;
                        let devs = apt_deviation(
                            &process, &problem, h, &apt.t_list, apt.horizon, apt.dt,
                        )?;
                        Ok((seed, devs))
                    })
                    .collect::<Result<_>>()?;
                for (seed, devs) in &per_seed_devs {
                    let path = out_dir.join(format!("apt-seed{seed}.csv"));
                    let mut buf = String::from("# schema: smd-apt-v1\nt,deviation\n");
                    for (t, d) in apt.t_list.iter().zip(devs) {
                        buf.push_str(&format!("{t},{d}\n"));
                    }
                    fs::write(&path, buf)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                let medians: Vec<f64> = (0..apt.t_list.len())
                    .map(|i| {
                        let mut column: Vec<f64> =
                            per_seed_devs.iter().map(|(_, d)| d[i]).collect();
                        column.sort_by(|a, b| a.partial_cmp(b).expect("finite deviations"));
                        let n = column.len();
                        if n % 2 == 1 {
                            column[n / 2]
                        } else {
                            0.5 * (column[n / 2 - 1] + column[n / 2])
                        }
                    })
                    .collect();
                summary.apt_t_list = Some(apt.t_list.clone());
                summary.apt_median_deviation = Some(medians);
            }
        }
    }

    summary.per_seed = per_seed;
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn execute_run(
    config: &ExperimentConfig,
    problem: &StochasticProblem,
    h: Regularizer,
    schedule: &smd_core::StepSchedule,
    seed: u64,
) -> Result<RunOutput> {
    let norm = h.paired_norm();
    let gens = problem.minimizers();
    let eps = config.diagnostics.eps;
    let delta = config.diagnostics.delta;
    let region = problem.region();

    let mut settings = RunSettings::new(config.n_iters, seed, config.record_every);
    if let Some(y0) = &config.y0 {
        settings = settings.with_y0(y0.clone());
    }

    let mut hitting_count = 0u64;
    let mut zone_count = 0u64;
    let mut zone_err: Option<smd_core::Error> = None;
    let trace = run_observed(problem, h, schedule, &settings, |ev| {
        let dist = gens
            .iter()
            .map(|g| norm.primal(&sub(ev.x, g)))
            .fold(f64::INFINITY, f64::min);
        if dist < eps {
            hitting_count += 1;
        }
        if let Some(delta) = delta {
            if zone_err.is_none() {
                match smd_core::fenchel_to_set(h, region, gens, &DualVector::new(ev.y.to_vec())) {
                    Ok(f) if f < delta => zone_count += 1,
                    Ok(_) => {}
                    Err(e) => zone_err = Some(e),
                }
            }
        }
    })?;
    if let Some(e) = zone_err {
        return Err(e.into());
    }

    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv)?;
    Ok(RunOutput {
        seed,
        final_dist: trace.final_dist(),
        hitting_count,
        fenchel_zone_count: delta.map(|_| zone_count),
        csv,
    })
}

/// Trace CSV: `n, x_1..x_d, dist, fenchel` under a versioned schema header.
pub fn write_trace_csv<W: Write>(trace: &smd_core::RunTrace, mut w: W) -> Result<()> {
    let d = trace.iterates.first().map_or(0, |x| x.len());
    let mut header = String::from("n");
    for i in 1..=d {
        header.push_str(&format!(",x_{i}"));
    }
    header.push_str(",dist,fenchel");
    writeln!(w, "# schema: smd-trace-v1")?;
    writeln!(w, "{header}")?;
    for i in 0..trace.len() {
        let mut line = format!("{}", trace.steps[i]);
        for v in &trace.iterates[i] {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(",{},{}", trace.dist[i], trace.fenchel[i]));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
