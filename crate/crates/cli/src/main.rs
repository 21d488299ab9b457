//! Command-line toolkit: synthetic data generation, minimal solves, robust
//! estimation, parameter sweeps and image rectification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rspose_core::error::Error;
use rspose_core::eval::rectify_image;
use rspose_core::io::{
    read_dataset, read_pgm, read_result, write_dataset, write_pgm, write_result, DatasetFile,
    ResultFile,
};
use rspose_core::iterdriver::{self, IterConfig, PreRotation, SolverKind};
use rspose_core::r7pf::GepVariant;
use rspose_core::r7pfr::solver_template;
use rspose_core::robust::{ransac, ransac_with_lo, RansacConfig};
use rspose_core::sweep::{run_sweep, SweepAxis, SweepSpec};
use rspose_core::synth::{generate, MeasurementModel, OrientationMode, SynthConfig};

const ARTIFACT_VERSION: &str = concat!("rspose ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "rspose", version, about = "Rolling-shutter absolute pose toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Synth(SynthArgs),
    /// Run the iterative minimal solver on a 7-point sample.
    Solve(SolveArgs),
    /// Robust estimation over all correspondences.
    Ransac(RansacArgs),
    /// Error statistics over swept synthetic parameters, written as CSV.
    Sweep(SweepArgs),
    /// Remove radial and rotational rolling-shutter distortion from an image.
    Rectify(RectifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    R7pf,
    R7pfr,
}

impl From<SolverArg> for SolverKind {
    fn from(v: SolverArg) -> Self {
        match v {
            SolverArg::R7pf => SolverKind::R7Pf,
            SolverArg::R7pfr => SolverKind::R7Pfr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Identity,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    /// Exact exponential per-row rotation (default).
    Exact,
    /// Relaxed linear model with v = 0 (oracle data).
    Relaxed,
    /// Camera purely rotating about its center.
    PureRotation,
}

#[derive(Clone, Copy, ValueEnum)]
enum GepArg {
    Full6,
    Reduced4,
}

#[derive(Clone, Copy, ValueEnum)]
enum PreRotArg {
    Dlt,
    Identity,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    n_points: usize,
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    /// Rotational velocity range, degrees per frame.
    #[arg(long, default_value_t = 0.0)]
    rot_vel_min: f64,
    #[arg(long, default_value_t = 0.0)]
    rot_vel_max: f64,
    /// Translational velocity range, fraction of camera distance per frame.
    #[arg(long, default_value_t = 0.0)]
    trans_vel_min: f64,
    #[arg(long, default_value_t = 0.0)]
    trans_vel_max: f64,
    /// Division-model coefficient, normalized units.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = OrientationArg::Identity)]
    orientation: OrientationArg,
    #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
    model: ModelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    width: u32,
    #[arg(long, default_value_t = 2000)]
    height: u32,
    #[arg(long, default_value_t = 60.0)]
    fov_deg: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Input dataset path.
    #[arg(long)]
    dataset: PathBuf,
    /// Output result path (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverArg,
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    eps_err: f64,
    #[arg(long, value_enum, default_value_t = GepArg::Full6)]
    gep: GepArg,
    #[arg(long, value_enum, default_value_t = PreRotArg::Dlt)]
    prerotation: PreRotArg,
    /// Comma-separated record indices of the 7-point sample; defaults to
    /// the first seven records.
    #[arg(long, value_delimiter = ',')]
    indices: Option<Vec<usize>>,
}

#[derive(Args)]
struct RansacArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverArg,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 2.0)]
    threshold_px: f64,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 50)]
    min_iterations: usize,
    #[arg(long, default_value_t = 0.999)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    eps_err: f64,
    /// Polish the result with local optimization over the inliers.
    #[arg(long)]
    lo: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    RotVelocity,
    TransVelocity,
    Lambda,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepSolverArg {
    R7pf,
    R7pfr,
    Both,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = SweepSolverArg::Both)]
    solver: SweepSolverArg,
    /// Maximum of the swept parameter; defaults per axis (30 deg/frame,
    /// 0.1 distance/frame, -0.5 normalized lambda).
    #[arg(long, allow_negative_numbers = true)]
    axis_max: Option<f64>,
    #[arg(long)]
    base_rot: Option<f64>,
    #[arg(long)]
    base_trans: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    base_lambda: Option<f64>,
    /// Per-coordinate Gaussian noise; default makes the 2D noise magnitude
    /// one pixel.
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    noise_px: f64,
    #[arg(long, value_enum, default_value_t = OrientationArg::Identity)]
    orientation: OrientationArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RectifyArgs {
    /// Input PGM (P5) image.
    #[arg(long)]
    image: PathBuf,
    /// Result file with the estimated model.
    #[arg(long)]
    result: PathBuf,
    /// Output PGM path.
    #[arg(long)]
    out: PathBuf,
}

fn orientation_mode(v: OrientationArg) -> OrientationMode {
    match v {
        OrientationArg::Identity => OrientationMode::Identity,
        OrientationArg::Random => OrientationMode::Random,
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let cfg = SynthConfig {
        n_points: args.n_points,
        fov_deg: args.fov_deg,
        rot_velocity_deg: (args.rot_vel_min, args.rot_vel_max),
        trans_velocity: (args.trans_vel_min, args.trans_vel_max),
        lambda_true: args.lambda,
        noise_px: args.noise_px,
        outlier_fraction: args.outliers,
        orientation_mode: orientation_mode(args.orientation),
        measurement_model: match args.model {
            ModelArg::Exact => MeasurementModel::ExactRs,
            ModelArg::Relaxed => MeasurementModel::RelaxedV0,
            ModelArg::PureRotation => MeasurementModel::PureRotation,
        },
        seed: args.seed,
        image_width: args.width,
        image_height: args.height,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg);
    write_dataset(&args.out, &DatasetFile::from_synth(&ds))?;
    eprintln!("wrote {} ({} records, seed {})", args.out.display(), args.n_points, args.seed);
    Ok(())
}

fn result_from_iter(
    dataset: &DatasetFile,
    res: &iterdriver::IterResult<f64>,
    solver: SolverArg,
    config_echo: serde_json::Value,
    seed: Option<u64>,
) -> ResultFile {
    let ctx = dataset.norm_context();
    let m = &res.model;
    let r = res.r_gs.matrix();
    ResultFile {
        artifact_version: ARTIFACT_VERSION.into(),
        solver: match solver {
            SolverArg::R7pf => "r7pf".into(),
            SolverArg::R7pfr => "r7pfr".into(),
        },
        image_width: dataset.width,
        image_height: dataset.height,
        norm_scale: ctx.scale,
        v: [m.v.x, m.v.y, m.v.z],
        w: [m.w.x, m.w.y, m.w.z],
        c0: [m.c0.x, m.c0.y, m.c0.z],
        t: [m.t.x, m.t.y, m.t.z],
        f_px: m.f * ctx.scale,
        lambda_norm: m.lambda,
        r0_px: m.r0 * ctx.scale,
        r_gs: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        residual: res.final_residual,
        iterations: res.iterations,
        converged: res.converged,
        inlier_mask: None,
        inlier_count: None,
        inlier_count_pre_lo: None,
        seed,
        template_dims: match solver {
            SolverArg::R7pfr => Some(solver_template().dims()),
            SolverArg::R7pf => None,
        },
        config_echo,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Error> {
    let dataset = read_dataset(&args.dataset)?;
    let corrs = dataset.to_correspondences();
    let sample: Vec<_> = match &args.indices {
        Some(idx) => {
            if idx.len() != 7 {
                return Err(Error::InsufficientData { needed: 7, got: idx.len() });
            }
            let mut out = Vec::with_capacity(7);
            for &i in idx {
                let c = corrs
                    .get(i)
                    .ok_or_else(|| Error::Parse(format!("record index {i} out of range")))?;
                out.push(*c);
            }
            out
        }
        None => {
            if corrs.len() < 7 {
                return Err(Error::InsufficientData { needed: 7, got: corrs.len() });
            }
            corrs[..7].to_vec()
        }
    };
    let mut cfg = IterConfig::<f64>::new(args.solver.into());
    cfg.k_max = args.k_max;
    cfg.eps_err = args.eps_err;
    cfg.gep_variant = match args.gep {
        GepArg::Full6 => GepVariant::Full6,
        GepArg::Reduced4 => GepVariant::Reduced4,
    };
    cfg.prerotation = match args.prerotation {
        PreRotArg::Dlt => PreRotation::Dlt,
        PreRotArg::Identity => PreRotation::Identity,
    };
    let res = iterdriver::run(&sample, &cfg)?;
    let echo = json!({
        "command": "solve",
        "solver": match args.solver { SolverArg::R7pf => "r7pf", SolverArg::R7pfr => "r7pfr" },
        "k_max": args.k_max,
        "eps_err": args.eps_err,
        "dataset": args.dataset.display().to_string(),
    });
    let out = result_from_iter(&dataset, &res, args.solver, echo, None);
    write_result(&args.out, &out)?;
    eprintln!(
        "solve: residual {:.3e}, {} iteration(s), converged = {}",
        res.final_residual, res.iterations, res.converged
    );
    Ok(())
}

fn cmd_ransac(args: &RansacArgs) -> Result<(), Error> {
    let dataset = read_dataset(&args.dataset)?;
    let corrs = dataset.to_correspondences();
    let ctx = dataset.norm_context();
    let mut icfg = IterConfig::<f64>::new(args.solver.into());
    icfg.k_max = args.k_max;
    icfg.eps_err = args.eps_err;
    let mut cfg = RansacConfig::new(icfg, args.threshold_px / ctx.scale, args.seed);
    cfg.max_iterations = args.max_iterations;
    cfg.min_iterations = args.min_iterations;
    cfg.confidence = args.confidence;

    let base = ransac(&corrs, &cfg)?;
    let pre_lo_count = base.inlier_count;
    let final_res = if args.lo {
        ransac_with_lo(&corrs, &cfg)?
    } else {
        base
    };

    let echo = json!({
        "command": "ransac",
        "solver": match args.solver { SolverArg::R7pf => "r7pf", SolverArg::R7pfr => "r7pfr" },
        "threshold_px": args.threshold_px,
        "max_iterations": args.max_iterations,
        "min_iterations": args.min_iterations,
        "confidence": args.confidence,
        "lo": args.lo,
        "dataset": args.dataset.display().to_string(),
    });
    let iter_like = iterdriver::IterResult {
        model: final_res.model,
        r_gs: final_res.r_gs,
        iterations: final_res.iterations_run,
        final_residual: 0.0,
        converged: true,
    };
    let mut out = result_from_iter(&dataset, &iter_like, args.solver, echo, Some(args.seed));
    out.inlier_mask = Some(final_res.inlier_mask.clone());
    out.inlier_count = Some(final_res.inlier_count);
    out.inlier_count_pre_lo = Some(pre_lo_count);
    write_result(&args.out, &out)?;
    eprintln!(
        "ransac: {} inliers of {} ({} pre-LO), {} hypotheses",
        final_res.inlier_count,
        corrs.len(),
        pre_lo_count,
        final_res.iterations_run
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let axis = match args.axis {
        AxisArg::RotVelocity => SweepAxis::RotVelocity,
        AxisArg::TransVelocity => SweepAxis::TransVelocity,
        AxisArg::Lambda => SweepAxis::Lambda,
    };
    let mut spec = if matches!(axis, SweepAxis::Lambda) {
        SweepSpec::lambda_sweep()
    } else {
        SweepSpec::new(axis)
    };
    spec.trials = args.trials;
    spec.steps = args.steps;
    spec.noise_px = args.noise_px;
    spec.orientation_mode = orientation_mode(args.orientation);
    spec.seed = args.seed;
    if let Some(v) = args.axis_max {
        spec.axis_max = v;
    }
    if let Some(v) = args.base_rot {
        spec.base_rot_deg = v;
    }
    if let Some(v) = args.base_trans {
        spec.base_trans = v;
    }
    if let Some(v) = args.base_lambda {
        spec.base_lambda = v;
    }
    spec.solvers = match args.solver {
        SweepSolverArg::R7pf => vec![SolverKind::R7Pf],
        SweepSolverArg::R7pfr => vec![SolverKind::R7Pfr],
        SweepSolverArg::Both => vec![SolverKind::R7Pf, SolverKind::R7Pfr],
    };
    let table = run_sweep(&spec);
    std::fs::write(&args.out, table.to_csv())?;
    eprintln!(
        "sweep {}: {} increments x {} trials written to {}",
        axis.name(),
        spec.steps,
        spec.trials,
        args.out.display()
    );
    Ok(())
}

fn cmd_rectify(args: &RectifyArgs) -> Result<(), Error> {
    let img = read_pgm(&args.image)?;
    let result = read_result(&args.result)?;
    let model = result.model_px();
    let out = rectify_image(&img, &model);
    write_pgm(&args.out, &out)?;
    eprintln!("rectified {} -> {}", args.image.display(), args.out.display());
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("RSPOSE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            rspose_core::sweep::set_parallelism(n);
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit with code 1; --help/--version print and
            // exit cleanly.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Solve(a) => cmd_solve(a).map_err(|e| report_solver_error(&a.out, e)),
        Command::Ransac(a) => cmd_ransac(a).map_err(|e| report_solver_error(&a.out, e)),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Rectify(a) => cmd_rectify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(0, 255) as u8)
        }
    }
}

/// Writes a machine-readable error file next to the outcome so callers can
/// distinguish failure kinds without parsing stderr.
fn report_solver_error(out: &PathBuf, e: Error) -> Error {
    let payload = json!({
        "artifact_version": ARTIFACT_VERSION,
        "error": { "kind": e.kind(), "message": e.to_string() },
    });
    if let Ok(text) = serde_json::to_string_pretty(&payload) {
        let _ = std::fs::write(out, text);
    }
    e
}
