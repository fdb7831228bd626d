//! Geometry and algorithms for stochastic mirror descent on compact convex
//! regions: regularizers and mirror maps, the Fenchel coupling, a zoo of
//! stochastic test problems, the SMD/SGD iteration, coherence certification,
//! and mean-dynamics diagnostics.

pub mod coherence;
pub mod dynamics;
pub mod error;
pub mod point;
pub mod problems;
pub mod region;
pub mod regularizer;
pub mod smd;
pub mod vecops;

pub use coherence::{
    dist_to_hull,
    certify_lvc, certify_vc, check_sharpness, detect_finite_hit, fenchel_zone_hits, hitting_times,
    polar_cone_contains, tangent_cone_contains, tangent_generators, CoherenceReport, ConeQuery,
    EqualityViolation, FiniteHitDetector, SharpnessReport, Verdict, Witness,
};
pub use dynamics::{apt_deviation, fenchel_along_flow, integrate_flow, FenchelCurve, FlowTrajectory, InterpolatedProcess};
pub use error::{Error, Result};
pub use point::{DualVector, PrimalPoint};
pub use region::{BoxBounds, FeasibleRegion, RegionKind};
pub use problems::{registry, NoiseModel, StochasticProblem};
pub use regularizer::{
    conjugate_value, dual_norm, fenchel_coupling, fenchel_to_set, mirror_map, regularizer_value,
    Norm, Regularizer,
};
pub use smd::{confidence_schedule, run, run_observed, sgd_run, smd_step, sweep, RunSettings, RunTrace, ScheduleReport, StepEvent, StepSchedule};
