//! Experiment driver: repeated synthetic trials over a swept parameter,
//! aggregated into per-increment error statistics suitable for re-plotting.

use rayon::prelude::*;

use crate::eval::{pose_errors, PoseErrors};
use crate::iterdriver::{run, IterConfig, SolverKind};
use crate::synth::{generate, OrientationMode, SynthConfig};

/// Which generator parameter the sweep varies over its 10 increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Rotational velocity 0..max deg/frame; translation stays at base.
    RotVelocity,
    /// Translational velocity 0..max of the distance/frame; rotation at base.
    TransVelocity,
    /// Division-model coefficient 0..max (normalized units); motion at base.
    Lambda,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RotVelocity => "rot_velocity",
            SweepAxis::TransVelocity => "trans_velocity",
            SweepAxis::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub steps: usize,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    /// Maximum of the swept parameter (degrees/frame, fraction of distance
    /// per frame, or normalized lambda).
    pub axis_max: f64,
    /// Fixed rotational velocity when the axis does not sweep it.
    pub base_rot_deg: f64,
    /// Fixed translational velocity when the axis does not sweep it.
    pub base_trans: f64,
    /// Fixed distortion when the axis does not sweep it.
    pub base_lambda: f64,
    pub noise_px: f64,
    pub orientation_mode: OrientationMode,
    pub seed: u64,
    pub k_max: usize,
    pub eps_err: f64,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis) -> Self {
        let axis_max = match axis {
            SweepAxis::RotVelocity => 30.0,
            SweepAxis::TransVelocity => 0.1,
            SweepAxis::Lambda => -0.5,
        };
        Self {
            axis,
            steps: 10,
            trials: 1000,
            solvers: vec![SolverKind::R7Pf, SolverKind::R7Pfr],
            axis_max,
            base_rot_deg: 0.0,
            base_trans: 0.0,
            base_lambda: 0.0,
            noise_px: std::f64::consts::FRAC_1_SQRT_2,
            orientation_mode: OrientationMode::Identity,
            seed: 0,
            k_max: 5,
            eps_err: 1e-10,
        }
    }

    /// Mid-motion defaults for the distortion sweep: rotation and
    /// translation pinned to half the usual maxima.
    pub fn lambda_sweep() -> Self {
        Self {
            base_rot_deg: 15.0,
            base_trans: 0.05,
            ..Self::new(SweepAxis::Lambda)
        }
    }

    pub fn increment_value(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.axis_max;
        }
        self.axis_max * step as f64 / (self.steps - 1) as f64
    }
}

/// Aggregated statistics of one (increment, solver) cell.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub axis_value: f64,
    pub solver: SolverKind,
    pub trials: usize,
    pub failures: usize,
    pub converged: usize,
    pub rot_mean: f64,
    pub rot_median: f64,
    pub center_mean: f64,
    pub center_median: f64,
    pub focal_mean: f64,
    pub focal_median: f64,
    pub lambda_mean: f64,
    pub lambda_median: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
}

fn solver_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::R7Pf => "r7pf",
        SolverKind::R7Pfr => "r7pfr",
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite stats"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn trial_config(spec: &SweepSpec, step: usize, trial: usize) -> SynthConfig {
    let value = spec.increment_value(step);
    let (rot, trans, lambda) = match spec.axis {
        SweepAxis::RotVelocity => (value, spec.base_trans, spec.base_lambda),
        SweepAxis::TransVelocity => (spec.base_rot_deg, value, spec.base_lambda),
        SweepAxis::Lambda => (spec.base_rot_deg, spec.base_trans, value),
    };
    // The swept and fixed parameters all use exact magnitudes so each
    // increment really measures that motion level.
    SynthConfig {
        rot_velocity_deg: (rot, rot),
        trans_velocity: (trans, trans),
        lambda_true: lambda,
        noise_px: spec.noise_px,
        orientation_mode: spec.orientation_mode,
        seed: spec
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((step as u64) << 32)
            .wrapping_add(trial as u64),
        ..SynthConfig::default()
    }
}

/// One trial: per-solver pose errors and convergence flags.
fn run_trial(
    spec: &SweepSpec,
    step: usize,
    trial: usize,
) -> Vec<(SolverKind, Option<(PoseErrors<f64>, bool)>)> {
    let cfg = trial_config(spec, step, trial);
    let ds = generate(&cfg);
    let corrs = ds.normalized_correspondences();
    spec.solvers
        .iter()
        .map(|&solver| {
            let mut icfg = IterConfig::<f64>::new(solver);
            icfg.k_max = spec.k_max;
            icfg.eps_err = spec.eps_err;
            let out = run(&corrs, &icfg)
                .ok()
                .map(|res| (pose_errors(&res, &ds), res.converged));
            (solver, out)
        })
        .collect()
}

/// Caps the global worker pool used for sweep trials. Only the first call
/// in a process takes effect.
pub fn set_parallelism(threads: usize) {
    if threads >= 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Runs the sweep, parallelizing over trials. Output ordering is by
/// increment then solver regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> SweepTable {
    let mut cells = Vec::new();
    for step in 0..spec.steps {
        let trials: Vec<_> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| run_trial(spec, step, trial))
            .collect();
        for &solver in &spec.solvers {
            let mut rot = Vec::new();
            let mut center = Vec::new();
            let mut focal = Vec::new();
            let mut lambda = Vec::new();
            let mut converged = 0usize;
            let mut failures = 0usize;
            for t in &trials {
                let entry = t
                    .iter()
                    .find(|(s, _)| *s == solver)
                    .and_then(|(_, o)| o.as_ref());
                match entry {
                    Some((err, conv)) => {
                        rot.push(err.rot_err_deg);
                        center.push(err.center_err);
                        focal.push(err.focal_rel_err);
                        lambda.push(err.lambda_abs_err);
                        if *conv {
                            converged += 1;
                        }
                    }
                    None => failures += 1,
                }
            }
            cells.push(SweepCell {
                axis_value: spec.increment_value(step),
                solver,
                trials: spec.trials,
                failures,
                converged,
                rot_mean: mean(&rot),
                rot_median: median(&mut rot.clone()),
                center_mean: mean(&center),
                center_median: median(&mut center.clone()),
                focal_mean: mean(&focal),
                focal_median: median(&mut focal.clone()),
                lambda_mean: mean(&lambda),
                lambda_median: median(&mut lambda.clone()),
            });
        }
    }
    SweepTable { axis: spec.axis, cells }
}

impl SweepTable {
    /// CSV with one row per (increment, solver) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,axis_value,solver,trials,failures,converged,rot_mean_deg,rot_median_deg,\
             center_mean,center_median,focal_rel_mean,focal_rel_median,lambda_abs_mean,\
             lambda_abs_median\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{:.6},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                self.axis.name(),
                c.axis_value,
                solver_name(c.solver),
                c.trials,
                c.failures,
                c.converged,
                c.rot_mean,
                c.rot_median,
                c.center_mean,
                c.center_median,
                c.focal_mean,
                c.focal_median,
                c.lambda_mean,
                c.lambda_median,
            ));
        }
        out
    }

    pub fn cell(&self, step: usize, solver: SolverKind) -> Option<&SweepCell> {
        self.cells
            .iter()
            .filter(|c| c.solver == solver)
            .nth(step)
    }
}
