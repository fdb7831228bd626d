//! Mean-dynamics integration `dy/dt = -grad g(Q(y))`, the Fenchel coupling
//! as a Lyapunov function along the flow, and deviation of interpolated SMD
//! paths from the semiflow.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::problems::StochasticProblem;
use crate::region::FeasibleRegion;
use crate::regularizer::{fenchel_to_set, mirror_map, Regularizer};
use crate::smd::StepSchedule;
use crate::vecops::{all_finite, sub};
use std::io::Write;

/// Default integrator step.
pub const DEFAULT_DT: f64 = 1e-2;

/// A sampled solution of the mean dynamics: dual states every `dt`, with the
/// mirrored primal states alongside.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub dual_states: Vec<DualVector>,
    pub primal_states: Vec<PrimalPoint>,
    pub dt: f64,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_dual(&self) -> &DualVector {
        self.dual_states.last().expect("trajectory is never empty")
    }

    pub fn final_primal(&self) -> &PrimalPoint {
        self.primal_states
            .last()
            .expect("trajectory is never empty")
    }

    /// CSV export: `t, y_1..y_d, x_1..x_d, F` with the setwise coupling
    /// against the given generators in the last column.
    pub fn write_csv<W: Write>(
        &self,
        h: Regularizer,
        region: &FeasibleRegion,
        generators: &[Vec<f64>],
        mut w: W,
    ) -> Result<()> {
        let d = region.dim();
        let mut header = String::from("t");
        for i in 1..=d {
            header.push_str(&format!(",y_{i}"));
        }
        for i in 1..=d {
            header.push_str(&format!(",x_{i}"));
        }
        header.push_str(",fenchel");
        writeln!(w, "# schema: smd-flow-v1").map_err(io_err)?;
        writeln!(w, "{header}").map_err(io_err)?;
        for i in 0..self.len() {
            let f = fenchel_to_set(h, region, generators, &self.dual_states[i])?.max(0.0);
            let mut line = format!("{}", self.times[i]);
            for v in self.dual_states[i].coords() {
                line.push_str(&format!(",{v}"));
            }
            for v in self.primal_states[i].coords() {
                line.push_str(&format!(",{v}"));
            }
            line.push_str(&format!(",{f}"));
            writeln!(w, "{line}").map_err(io_err)?;
        }
        Ok(())
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Numeric(format!("write failed: {e}"))
}

/// Classical RK4 on the dual variable with right-hand side
/// `-grad g(Q(y))`, sampled every `dt` up to time `T`.
pub fn integrate_flow(
    problem: &StochasticProblem,
    h: Regularizer,
    y0: &DualVector,
    t_final: f64,
    dt: f64,
) -> Result<FlowTrajectory> {
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::OutOfRange("T and dt must be positive".into()));
    }
    let region = problem.region();
    let field = |y: &[f64]| -> Result<Vec<f64>> {
        let x = mirror_map(h, region, &DualVector::new(y.to_vec()))?;
        Ok(problem
            .mean_gradient(x.coords())
            .coords()
            .iter()
            .map(|g| -g)
            .collect())
    };

    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let mut y = y0.coords().to_vec();
    let mut traj = FlowTrajectory {
        times: Vec::with_capacity(n_steps + 1),
        dual_states: Vec::with_capacity(n_steps + 1),
        primal_states: Vec::with_capacity(n_steps + 1),
        dt,
    };
    let push = |traj: &mut FlowTrajectory, t: f64, y: &[f64]| -> Result<()> {
        let x = mirror_map(h, region, &DualVector::new(y.to_vec()))?;
        traj.times.push(t);
        traj.dual_states.push(DualVector::new(y.to_vec()));
        traj.primal_states.push(x);
        Ok(())
    };
    push(&mut traj, 0.0, &y)?;

    for step in 1..=n_steps {
        let k1 = field(&y)?;
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k2 = field(&y2)?;
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k3 = field(&y3)?;
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
        let k4 = field(&y4)?;
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * dt;
        if !all_finite(&y) {
            return Err(Error::IntegratorBlowUp { t });
        }
        push(&mut traj, t, &y)?;
    }
    Ok(traj)
}

/// The coupling `F(X*, y(t))` along a trajectory together with its discrete
/// time derivative.
#[derive(Debug, Clone)]
pub struct FenchelCurve {
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl FenchelCurve {
    /// Largest one-step increase (positive means the Lyapunov property was
    /// violated by that much at some step).
    pub fn max_increase(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluate `F(X*, y(t_i))` along the flow samples; the companion array
/// holds the forward difference quotients.
pub fn fenchel_along_flow(
    traj: &FlowTrajectory,
    h: Regularizer,
    region: &FeasibleRegion,
    xstar_generators: &[Vec<f64>],
) -> Result<FenchelCurve> {
    let mut values = Vec::with_capacity(traj.len());
    for y in &traj.dual_states {
        values.push(fenchel_to_set(h, region, xstar_generators, y)?);
    }
    let derivatives = values
        .windows(2)
        .map(|w| (w[1] - w[0]) / traj.dt)
        .collect();
    Ok(FenchelCurve {
        values,
        derivatives,
    })
}

/// The continuous, piecewise-affine curve through the SMD dual iterates:
/// anchor `Y_n` sits at time `tau_n = sum_{k<=n} alpha_k` (with `tau_0 = 0`).
#[derive(Debug, Clone)]
pub struct InterpolatedProcess {
    breakpoints: Vec<f64>,
    anchors: Vec<DualVector>,
}

impl InterpolatedProcess {
    /// Build from explicit breakpoints (strictly increasing, starting at 0).
    pub fn from_anchors(breakpoints: Vec<f64>, anchors: Vec<DualVector>) -> Result<Self> {
        if breakpoints.len() != anchors.len() || breakpoints.len() < 2 {
            return Err(Error::OutOfRange(
                "need matching breakpoints/anchors with at least two entries".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::OutOfRange("breakpoints must start at 0".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::OutOfRange(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            anchors,
        })
    }

    /// Build from a schedule: anchor `n` at `tau_n = sum_{k=1..n} alpha_k`.
    pub fn from_schedule(schedule: &StepSchedule, anchors: Vec<DualVector>) -> Result<Self> {
        let mut breakpoints = Vec::with_capacity(anchors.len());
        let mut tau = 0.0;
        breakpoints.push(0.0);
        for n in 1..anchors.len() as u64 {
            tau += schedule.alpha(n);
            breakpoints.push(tau);
        }
        Self::from_anchors(breakpoints, anchors)
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty by construction")
    }

    /// Exact piecewise-affine evaluation:
    /// `Y(t) = Y_{n-1} + (t - tau_{n-1}) (Y_n - Y_{n-1}) / alpha_n` on
    /// `[tau_{n-1}, tau_n]`.
    pub fn interpolate(&self, t: f64) -> Result<DualVector> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [0, {}]",
                self.horizon()
            )));
        }
        // Segment index by binary search: largest n with tau_n <= t.
        let idx = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).expect("finite breakpoints"))
        {
            Ok(i) => return Ok(self.anchors[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.breakpoints[idx], self.breakpoints[idx + 1]);
        let w = (t - t0) / (t1 - t0);
        let a = self.anchors[idx].coords();
        let b = self.anchors[idx + 1].coords();
        Ok(DualVector::new(
            a.iter().zip(b).map(|(u, v)| u + w * (v - u)).collect(),
        ))
    }
}

/// For each start time `t`, the deviation
/// `D(t) = max_{h in [0, T] grid} || Y(t+h) - Phi_h(Y(t)) ||_*`
/// between the interpolated process and the flow launched from `Y(t)`.
/// The sup over `h` is evaluated on the integrator's `dt` grid.
pub fn apt_deviation(
    process: &InterpolatedProcess,
    problem: &StochasticProblem,
    h: Regularizer,
    t_list: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let norm = h.paired_norm();
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if t < 0.0 || t + horizon > process.horizon() {
            return Err(Error::OutOfRange(format!(
                "window [{t}, {}] exceeds the process horizon {}",
                t + horizon,
                process.horizon()
            )));
        }
        let y_t = process.interpolate(t)?;
        let flow = integrate_flow(problem, h, &y_t, horizon, dt)?;
        let mut worst: f64 = 0.0;
        for (i, &s) in flow.times.iter().enumerate() {
            let y_path = process.interpolate(t + s)?;
            let gap = norm.dual(&sub(y_path.coords(), flow.dual_states[i].coords()));
            worst = worst.max(gap);
        }
        out.push(worst);
    }
    Ok(out)
}
