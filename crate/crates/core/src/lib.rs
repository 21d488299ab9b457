//! Minimal absolute-pose solvers for rolling-shutter cameras with unknown
//! focal length (R7Pf) and unknown focal length plus radial distortion
//! (R7Pfr), together with the iterative driver, robust estimation, synthetic
//! data generation, rectification and evaluation tooling.

pub mod dlt;
pub mod error;
pub mod eval;
pub mod iterdriver;
pub mod geom;
pub mod io;
pub mod numlin;
pub mod r7pf;
pub mod r7pfr;
pub mod robust;
pub mod scalar;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};

/// Concrete `f64` aliases for the common types.
pub type ImagePointF64 = geom::ImagePoint<f64>;
pub type ScenePointF64 = geom::ScenePoint<f64>;
pub type CorrespondenceF64 = geom::Correspondence<f64>;
pub type RsCameraModelF64 = geom::RsCameraModel<f64>;
pub type RotationMatrixF64 = geom::RotationMatrix<f64>;
