//! Evaluation metrics and removal of radial plus rotational rolling-shutter
//! distortion from points and images.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{
    distort_division, orientation_from_v, rotation_exp, undistort_division, ImagePoint,
    RotationMatrix, RsCameraModel,
};
use crate::iterdriver::IterResult;
use crate::robust::RansacResult;
use crate::scalar::{real, Real};
use crate::synth::SynthDataset;

/// Errors of one estimate against ground truth.
#[derive(Debug, Clone, Copy)]
pub struct PoseErrors<T> {
    pub rot_err_deg: T,
    pub center_err: T,
    pub focal_rel_err: T,
    pub lambda_abs_err: T,
    /// Inlier count of the producing robust run; zero for minimal solves.
    pub inlier_count: usize,
}

/// Compares an estimate (in normalized units) against the ground truth of a
/// synthetic dataset. The estimated orientation is the polar factor of
/// `I + [v]x` composed with the pre-rotation.
pub fn pose_errors<T: Real>(est: &IterResult<T>, gt: &SynthDataset) -> PoseErrors<T> {
    let gt_model = gt.gt_normalized();
    let gt_rot = RotationMatrix::new_unchecked(gt.gt_r0.matrix().map(|x| real::<T>(x)));
    let est_rot = est.full_rotation();
    let rot_err_deg = est_rot.angle_to(&gt_rot) * real(180.0) / T::pi();
    let gt_c0 = gt_model.c0.map(|x| real::<T>(x));
    let center_err = (est.model.c0 - gt_c0).norm();
    let gt_f = real::<T>(gt_model.f);
    let focal_rel_err = (est.model.f - gt_f).abs() / gt_f;
    let lambda_abs_err = (est.model.lambda - real(gt_model.lambda)).abs();
    PoseErrors { rot_err_deg, center_err, focal_rel_err, lambda_abs_err, inlier_count: 0 }
}

/// Root-mean-square distance of the estimated camera centers from their
/// mean; the spread measure for a purely rotating camera.
pub fn center_stddev<T: Real>(results: &[RansacResult<T>]) -> T {
    assert!(results.len() >= 2, "need at least two results");
    let centers: Vec<Vector3<T>> = results
        .iter()
        .map(|r| {
            let full = orientation_from_v(&r.model.v).compose(&r.r_gs);
            -(full.inverse().rotate(&r.model.c0))
        })
        .collect();
    let mut mean = Vector3::zeros();
    for c in &centers {
        mean += c;
    }
    mean /= real::<T>(centers.len() as f64);
    let mut ss = T::zero();
    for c in &centers {
        ss += (c - mean).norm_squared();
    }
    (ss / real(centers.len() as f64)).sqrt()
}

/// Maps one measured distorted point to its global-shutter equivalent at
/// the reference row: division-model undistortion followed by the per-row
/// rotation compensation homography `K R(r)^-1 K^-1`.
///
/// `model` is interpreted in the same units as the points (`f`, `lambda`,
/// `r0` and the rows of `w` consistent). Only the rotational part of the
/// rolling shutter is compensated.
pub fn rectify_point<T: Real>(p: &ImagePoint<T>, model: &RsCameraModel<T>) -> Result<ImagePoint<T>> {
    let u = undistort_division(p, model.lambda)?;
    let rel = rotation_exp(&(model.w * (p.r - model.r0)));
    // K R^-1 K^-1 with K = diag(f, f, 1).
    let f = model.f;
    let r_inv = rel.inverse();
    let m = r_inv.matrix();
    let h = Matrix3::new(
        m[(0, 0)], m[(0, 1)], m[(0, 2)] * f,
        m[(1, 0)], m[(1, 1)], m[(1, 2)] * f,
        m[(2, 0)] / f, m[(2, 1)] / f, m[(2, 2)],
    );
    let g = h * u;
    if g.z.abs() < real(1e-300) {
        return Err(Error::DegenerateDistortion);
    }
    Ok(ImagePoint::new(g.x / g.z, g.y / g.z))
}

/// Batch version of [`rectify_point`].
pub fn rectify_points<T: Real>(
    points: &[ImagePoint<T>],
    model: &RsCameraModel<T>,
) -> Result<Vec<ImagePoint<T>>> {
    points.iter().map(|p| rectify_point(p, model)).collect()
}

const RECTIFY_INV_ITERS: usize = 10;
const RECTIFY_INV_TOL: f64 = 1e-10;

/// Inverse of [`rectify_point`]: the distorted rolling-shutter position
/// observing a given global-shutter point, found by a secant iteration on
/// the row self-consistency equation (a plain fixed point contracts too
/// slowly at strong per-row rotation to honor the round-trip accuracy).
pub fn unrectify_point<T: Real>(
    gs: &ImagePoint<T>,
    model: &RsCameraModel<T>,
) -> Result<ImagePoint<T>> {
    let f = model.f;
    let gs_h = Vector3::new(gs.r, gs.c, T::one());
    let distorted_at = |row: T| -> Result<ImagePoint<T>> {
        let rel = rotation_exp(&(model.w * (row - model.r0)));
        let m = rel.matrix();
        let h = Matrix3::new(
            m[(0, 0)], m[(0, 1)], m[(0, 2)] * f,
            m[(1, 0)], m[(1, 1)], m[(1, 2)] * f,
            m[(2, 0)] / f, m[(2, 1)] / f, m[(2, 2)],
        );
        let g = h * gs_h;
        if g.z.abs() < real(1e-300) {
            return Err(Error::DegenerateDistortion);
        }
        let pinhole = ImagePoint::new(g.x / g.z, g.y / g.z);
        distort_division(&pinhole, model.lambda)
    };

    // Secant on  g(row) = distorted_row(row) - row.
    let mut r_prev = gs.r;
    let mut out = distorted_at(r_prev)?;
    let mut g_prev = out.r - r_prev;
    let mut r_cur = out.r;
    for _ in 0..RECTIFY_INV_ITERS {
        out = distorted_at(r_cur)?;
        let g_cur = out.r - r_cur;
        if g_cur.abs() < real(RECTIFY_INV_TOL) {
            break;
        }
        let denom = g_cur - g_prev;
        let next = if denom.abs() > real(1e-300) {
            r_cur - g_cur * (r_cur - r_prev) / denom
        } else {
            out.r
        };
        r_prev = r_cur;
        g_prev = g_cur;
        r_cur = next;
    }
    Ok(out)
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, samples: vec![0; (width * height) as usize] }
    }

    pub fn get(&self, row: u32, col: u32) -> u8 {
        self.samples[(row * self.width + col) as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: u8) {
        self.samples[(row * self.width + col) as usize] = value;
    }

    /// Bilinear sample at a continuous position in raw pixel coordinates;
    /// `None` outside the image.
    pub fn sample_bilinear(&self, row: f64, col: f64) -> Option<f64> {
        if !(row >= 0.0 && col >= 0.0) {
            return None;
        }
        let r0 = row.floor();
        let c0 = col.floor();
        let (r1, c1) = (r0 + 1.0, c0 + 1.0);
        if r1 >= self.height as f64 || c1 >= self.width as f64 {
            // Clamp exact bottom/right edges, reject everything beyond.
            if row <= (self.height - 1) as f64 && col <= (self.width - 1) as f64 {
                return Some(self.get(row.round() as u32, col.round() as u32) as f64);
            }
            return None;
        }
        let fr = row - r0;
        let fc = col - c0;
        let (r0u, c0u) = (r0 as u32, c0 as u32);
        let v00 = self.get(r0u, c0u) as f64;
        let v01 = self.get(r0u, c0u + 1) as f64;
        let v10 = self.get(r0u + 1, c0u) as f64;
        let v11 = self.get(r0u + 1, c0u + 1) as f64;
        Some(v00 * (1.0 - fr) * (1.0 - fc) + v01 * (1.0 - fr) * fc + v10 * fr * (1.0 - fc) + v11 * fr * fc)
    }
}

/// Removes radial and rotational rolling-shutter distortion from an image
/// by inverse warping: every output pixel is mapped through
/// [`unrectify_point`] and sampled bilinearly; unmapped pixels stay black.
///
/// `model` must be in centered pixel units matching the image dimensions.
pub fn rectify_image(img: &GrayImage, model: &RsCameraModel<f64>) -> GrayImage {
    let mut out = GrayImage::new(img.width, img.height);
    let cy = img.height as f64 * 0.5;
    let cx = img.width as f64 * 0.5;
    for row in 0..img.height {
        for col in 0..img.width {
            let gs = ImagePoint::new(row as f64 + 0.5 - cy, col as f64 + 0.5 - cx);
            let Ok(src) = unrectify_point(&gs, model) else { continue };
            let (sr, sc) = (src.r + cy - 0.5, src.c + cx - 0.5);
            if let Some(v) = img.sample_bilinear(sr, sc) {
                out.set(row, col, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}
