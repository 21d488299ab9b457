//! Outer iterative loop around the inner minimal solvers: pre-rotate the
//! scene with a perspective initializer, then alternate between solving the
//! relaxed system at a fixed `v_hat` and updating `v_hat` with the new
//! orientation estimate, selecting among candidates by the residual of the
//! double-linearized model.

use nalgebra::Vector3;

use crate::dlt::{dlt_pose, prerotate};
use crate::error::{Error, Result};
use crate::geom::{Correspondence, RotationMatrix, RsCameraModel};
use crate::r7pf::{solve_inner_r7pf, CandidateSolution, GepVariant};
use crate::r7pfr::solve_inner_r7pfr;
use crate::scalar::{real, Real};

/// Which minimal problem the driver solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Unknown focal length, distortion assumed zero.
    R7Pf,
    /// Unknown focal length and radial distortion.
    R7Pfr,
}

/// How the scene is pre-rotated before iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreRotation {
    /// 6-point DLT pose on the sample (the default).
    #[default]
    Dlt,
    /// No pre-rotation; valid when the data is known to have near-identity
    /// orientation (synthetic oracle runs).
    Identity,
}

#[derive(Debug, Clone)]
pub struct IterConfig<T> {
    pub k_max: usize,
    pub eps_err: T,
    pub solver: SolverKind,
    pub gep_variant: GepVariant,
    pub prerotation: PreRotation,
}

impl<T: Real> IterConfig<T> {
    pub fn new(solver: SolverKind) -> Self {
        Self {
            k_max: 5,
            eps_err: real(1e-10),
            solver,
            gep_variant: GepVariant::default(),
            prerotation: PreRotation::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterResult<T: Real> {
    /// Estimated model in the pre-rotated frame; compose the polar factor of
    /// `I + [v]x` with `r_gs` for the full orientation.
    pub model: RsCameraModel<T>,
    pub r_gs: RotationMatrix<T>,
    pub iterations: usize,
    pub final_residual: T,
    pub converged: bool,
}

impl<T: Real> IterResult<T> {
    /// Full reference-row orientation in the original world frame.
    pub fn full_rotation(&self) -> RotationMatrix<T> {
        crate::geom::orientation_from_v(&self.model.v).compose(&self.r_gs)
    }
}

fn solve_once<T: Real>(
    corrs: &[Correspondence<T>],
    v_hat: &Vector3<T>,
    cfg: &IterConfig<T>,
) -> Result<Vec<CandidateSolution<T>>> {
    match cfg.solver {
        SolverKind::R7Pf => solve_inner_r7pf(corrs, v_hat, cfg.gep_variant),
        SolverKind::R7Pfr => solve_inner_r7pfr(corrs, v_hat),
    }
}

/// Runs the iterative solver on a minimal 7-point sample.
pub fn run<T: Real>(corrs: &[Correspondence<T>], cfg: &IterConfig<T>) -> Result<IterResult<T>> {
    if corrs.len() != 7 {
        return Err(Error::InsufficientData { needed: 7, got: corrs.len() });
    }
    assert!(cfg.k_max >= 1, "k_max must be at least 1");

    let r_gs = match cfg.prerotation {
        PreRotation::Dlt => dlt_pose(corrs)?.r_gs,
        PreRotation::Identity => RotationMatrix::identity(),
    };
    let rotated = prerotate(corrs, &r_gs);

    let mut v_hat = Vector3::zeros();
    let mut previous: Option<(CandidateSolution<T>, usize)> = None;
    let mut prev_err = real::<T>(f64::INFINITY);

    for k in 1..=cfg.k_max {
        let best = match solve_once(&rotated, &v_hat, cfg) {
            Ok(cands) => cands.into_iter().next().expect("non-empty candidate list"),
            Err(e) => {
                // Fall back to the previous iterate when a later iteration
                // degenerates; only a first-iteration failure is fatal.
                return match previous {
                    Some((cand, iters)) => Ok(finish(cand, r_gs, iters, false)),
                    None => Err(e),
                };
            }
        };
        let err = best.residual;
        let stop = err < cfg.eps_err || (k > 1 && (err - prev_err).abs() < cfg.eps_err);
        v_hat = best.v;
        prev_err = err;
        previous = Some((best, k));
        if stop {
            let (cand, iters) = previous.expect("just set");
            return Ok(finish(cand, r_gs, iters, true));
        }
    }
    let (cand, iters) = previous.expect("k_max >= 1 ran at least one iteration");
    Ok(finish(cand, r_gs, iters, false))
}

fn finish<T: Real>(
    cand: CandidateSolution<T>,
    r_gs: RotationMatrix<T>,
    iterations: usize,
    converged: bool,
) -> IterResult<T> {
    IterResult {
        final_residual: cand.residual,
        model: cand.model(),
        r_gs,
        iterations,
        converged,
    }
}
