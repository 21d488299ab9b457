//! Camera models, rotation utilities and projection/residual functions.
//!
//! Image coordinates are centered: the principal point is the origin, `r` is
//! the row coordinate (first camera axis) and `c` the column coordinate
//! (second camera axis). A 3D point `X` maps to camera coordinates as
//! `Xc = R * X + C`, and projects to `r = f * Xc.x / Xc.z`,
//! `c = f * Xc.y / Xc.z` before radial distortion.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Measured (distorted) image point in centered coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint<T> {
    /// Row coordinate, pixels or normalized units, principal point at origin.
    pub r: T,
    /// Column coordinate.
    pub c: T,
}

/// 3D point in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// One 2D-to-3D point correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<T> {
    pub image: ImagePoint<T>,
    pub scene: ScenePoint<T>,
}

impl<T: Real> ImagePoint<T> {
    pub fn new(r: T, c: T) -> Self {
        Self { r, c }
    }

    pub fn radius_sq(&self) -> T {
        self.r * self.r + self.c * self.c
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.c.is_finite()
    }
}

impl<T: Real> ScenePoint<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn coords(&self) -> Vector3<T> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_coords(v: &Vector3<T>) -> Self {
        Self { x: v.x, y: v.y, z: v.z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Rolling-shutter camera model: the estimated scalars of one frame.
///
/// `v` linearizes the orientation at the reference row (`I + [v]x`), `w` is
/// the angular velocity per row, `c0` the translation at the reference row,
/// `t` the translational velocity per row, `f` the focal length, `lambda`
/// the one-parameter division-model distortion coefficient and `r0` the
/// reference row in centered coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsCameraModel<T> {
    pub v: Vector3<T>,
    pub w: Vector3<T>,
    pub c0: Vector3<T>,
    pub t: Vector3<T>,
    pub f: T,
    pub lambda: T,
    pub r0: T,
}

impl<T: Real> RsCameraModel<T> {
    /// Static pinhole camera at the origin with focal length `f`.
    pub fn static_identity(f: T) -> Self {
        Self {
            v: Vector3::zeros(),
            w: Vector3::zeros(),
            c0: Vector3::zeros(),
            t: Vector3::zeros(),
            f,
            lambda: T::zero(),
            r0: T::zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
            && self.w.iter().all(|x| x.is_finite())
            && self.c0.iter().all(|x| x.is_finite())
            && self.t.iter().all(|x| x.is_finite())
            && self.f.is_finite()
            && self.lambda.is_finite()
            && self.r0.is_finite()
    }
}

/// 3x3 orthonormal matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix<T>(Matrix3<T>);

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and determinant before wrapping.
    pub fn try_new(m: Matrix3<T>) -> Result<Self> {
        let tol = real::<T>(1e-12).max(T::default_epsilon() * real(100.0));
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if ortho > tol || (det - T::one()).abs() > tol {
            return Err(Error::Parse(format!(
                "not a rotation matrix: |R'R - I| = {:.3e}, det = {:?}",
                ortho.to_subset().unwrap_or(f64::NAN),
                det
            )));
        }
        Ok(Self(m))
    }

    /// Wraps without validation; caller guarantees orthonormality.
    pub fn new_unchecked(m: Matrix3<T>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `self * other` as a composition of rotations.
    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.0 * v
    }

    /// Rotation angle in radians, in `[0, pi]`. Uses atan2 of the skew and
    /// trace parts, which, unlike the plain acos form, resolves angles near
    /// zero to machine precision.
    pub fn angle(&self) -> T {
        let r = &self.0;
        let s = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm()
            * real(0.5);
        let c = (r.trace() - T::one()) * real(0.5);
        s.atan2(c)
    }

    /// Angle of `self * other^-1`, the geodesic distance between rotations.
    pub fn angle_to(&self, other: &Self) -> T {
        self.compose(&other.inverse()).angle()
    }
}

/// Skew-symmetric matrix `[a]x` with `[a]x b = a x b`.
pub fn skew<T: Real>(a: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(), -a.z, a.y,
        a.z, T::zero(), -a.x,
        -a.y, a.x, T::zero(),
    )
}

/// Rodrigues formula: `exp([a]x)`.
pub fn rotation_exp<T: Real>(a: &Vector3<T>) -> RotationMatrix<T> {
    let theta2 = a.norm_squared();
    let theta = theta2.sqrt();
    // Series switch point keeps both branches accurate to machine precision.
    let (s, k) = if theta < real(1e-5) {
        // sin(t)/t and (1-cos(t))/t^2 by series
        (
            T::one() - theta2 * real(1.0 / 6.0),
            real::<T>(0.5) - theta2 * real(1.0 / 24.0),
        )
    } else {
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    let sk = skew(a);
    RotationMatrix(Matrix3::identity() + sk * s + sk * sk * k)
}

/// Inverse of [`rotation_exp`] for angles below pi.
pub fn rotation_log<T: Real>(rot: &RotationMatrix<T>) -> Vector3<T> {
    let r = rot.matrix();
    let theta = rot.angle();
    let axis_raw = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < real(1e-6) {
        // log(R) ~ (R - R')/2 vectorized
        return axis_raw * real::<T>(0.5);
    }
    if theta > T::pi() - real(1e-4) {
        // Near pi the skew part degenerates; use the symmetric part.
        // R + I = 2 (cos^2(t/2) I + ... ) has columns parallel to the axis.
        let b = r + Matrix3::identity();
        let mut best = Vector3::zeros();
        let mut best_norm = T::zero();
        for j in 0..3 {
            let col = b.column(j).into_owned();
            if col.norm() > best_norm {
                best_norm = col.norm();
                best = col;
            }
        }
        let mut axis = best / best_norm;
        // Fix the sign with the (possibly tiny) skew part.
        if axis.dot(&axis_raw) < T::zero() {
            axis = -axis;
        }
        return axis * theta;
    }
    axis_raw * (theta / (real::<T>(2.0) * theta.sin()))
}

/// Nearest rotation to an arbitrary 3x3 matrix (orthogonal polar factor).
pub fn nearest_rotation<T: Real>(m: &Matrix3<T>) -> RotationMatrix<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let d = (u * v_t).determinant();
    let mut s = Matrix3::identity();
    if d < T::zero() {
        s[(2, 2)] = -T::one();
    }
    RotationMatrix(u * s * v_t)
}

/// Orthogonal polar factor of `I + [v]x`: the rotation about `v / |v|` by
/// `atan(|v|)`. This is exact, no decomposition needed.
pub fn orientation_from_v<T: Real>(v: &Vector3<T>) -> RotationMatrix<T> {
    let n = v.norm();
    if n < real(1e-300) {
        return RotationMatrix::identity();
    }
    let angle = n.atan();
    rotation_exp(&(v * (angle / n)))
}

/// Inverse of [`orientation_from_v`]: `v = tan(theta) * axis`. `None` when
/// the rotation angle reaches pi/2 and the linearization cannot represent it.
pub fn v_from_orientation<T: Real>(rot: &RotationMatrix<T>) -> Option<Vector3<T>> {
    let theta = rot.angle();
    if theta >= T::frac_pi_2() * real(0.999) {
        return None;
    }
    let a = rotation_log(rot);
    if theta < real(1e-12) {
        return Some(a);
    }
    Some(a * (theta.tan() / theta))
}

/// Division-model undistortion: `[r, c, 1 + lambda (r^2 + c^2)]`.
pub fn undistort_division<T: Real>(p: &ImagePoint<T>, lambda: T) -> Result<Vector3<T>> {
    let d = T::one() + lambda * p.radius_sq();
    if d.abs() < real(1e-12) {
        return Err(Error::DegenerateDistortion);
    }
    Ok(Vector3::new(p.r, p.c, d))
}

/// Forward division-model distortion: maps an ideal pinhole point to the
/// distorted point on the same radial ray, taking the quadratic root that is
/// continuous with `lambda -> 0`.
pub fn distort_division<T: Real>(pinhole: &ImagePoint<T>, lambda: T) -> Result<ImagePoint<T>> {
    let ru2 = pinhole.radius_sq();
    if ru2 < real(1e-300) || lambda == T::zero() {
        return Ok(*pinhole);
    }
    let disc = T::one() - real::<T>(4.0) * lambda * ru2;
    if disc < T::zero() {
        // The ray radius is beyond the representable range of this lambda.
        return Err(Error::DegenerateDistortion);
    }
    // rho_d = 2 rho_u / (1 + sqrt(1 - 4 lambda rho_u^2)), rationalized form
    // of the root of lambda rho_u rho_d^2 - rho_d + rho_u = 0.
    let scale = real::<T>(2.0) / (T::one() + disc.sqrt());
    Ok(ImagePoint::new(pinhole.r * scale, pinhole.c * scale))
}

/// Global-shutter perspective projection with division-model distortion.
pub fn project_gs<T: Real>(
    x: &ScenePoint<T>,
    rot: &RotationMatrix<T>,
    c: &Vector3<T>,
    f: T,
    lambda: T,
) -> Result<ImagePoint<T>> {
    let xc = rot.rotate(&x.coords()) + c;
    if xc.z <= T::zero() {
        return Err(Error::BehindCamera);
    }
    let pinhole = ImagePoint::new(f * xc.x / xc.z, f * xc.y / xc.z);
    distort_division(&pinhole, lambda)
}

const RS_FIXED_POINT_TOL: f64 = 1e-10;
const RS_FIXED_POINT_MAX_ITER: usize = 100;

fn project_rs_fixed_point<T: Real>(
    x: &ScenePoint<T>,
    cam: &RsCameraModel<T>,
    pose_at_row: impl Fn(T) -> (Matrix3<T>, Vector3<T>),
) -> Result<ImagePoint<T>> {
    let xw = x.coords();
    let tol = real::<T>(RS_FIXED_POINT_TOL);
    let mut row = cam.r0;
    for _ in 0..RS_FIXED_POINT_MAX_ITER {
        let (r_mat, c_vec) = pose_at_row(row);
        let xc = r_mat * xw + c_vec;
        if xc.z <= T::zero() {
            return Err(Error::BehindCamera);
        }
        let pinhole = ImagePoint::new(cam.f * xc.x / xc.z, cam.f * xc.y / xc.z);
        let distorted = distort_division(&pinhole, cam.lambda)?;
        let delta = (distorted.r - row).abs();
        row = distorted.r;
        if delta < tol {
            return Ok(distorted);
        }
    }
    Err(Error::NoConvergence)
}

/// Exact rolling-shutter projection: the row used for the per-row pose
/// equals the distorted row of the resulting projection, solved by fixed
/// point iteration started at the reference row.
///
/// The per-row pose uses the exact rotation `exp((r - r0)[w]x) * R0` and the
/// constant-velocity translation `C0 + (r - r0) t`. `cam.v` is ignored;
/// `r0_rot` is the full reference-row orientation.
pub fn project_rs_exact<T: Real>(
    x: &ScenePoint<T>,
    cam: &RsCameraModel<T>,
    r0_rot: &RotationMatrix<T>,
) -> Result<ImagePoint<T>> {
    project_rs_fixed_point(x, cam, |row| {
        let dr = row - cam.r0;
        let rel = rotation_exp(&(cam.w * dr));
        let r_mat = rel.matrix() * r0_rot.matrix();
        let c_vec = cam.c0 + cam.t * dr;
        (r_mat, c_vec)
    })
}

/// Rolling-shutter projection of a camera purely rotating about its own
/// center: the center `O = -R0' C0` stays fixed and the translation follows
/// the rotation, `C(r) = -R(r) O`. `cam.t` is ignored.
pub fn project_rs_pure_rotation<T: Real>(
    x: &ScenePoint<T>,
    cam: &RsCameraModel<T>,
    r0_rot: &RotationMatrix<T>,
) -> Result<ImagePoint<T>> {
    let center = -(r0_rot.inverse().rotate(&cam.c0));
    project_rs_fixed_point(x, cam, |row| {
        let dr = row - cam.r0;
        let rel = rotation_exp(&(cam.w * dr));
        let r_mat = rel.matrix() * r0_rot.matrix();
        let c_vec = -(r_mat * center);
        (r_mat, c_vec)
    })
}

/// Normalized residual of the double-linearized rolling-shutter model.
///
/// Eliminates the projective scale by crossing the undistorted image point
/// with the model-side vector and normalizes by the model-side norm, so the
/// value is invariant to the scale of the model-side vector.
pub fn residual_double_lin<T: Real>(
    corr: &Correspondence<T>,
    cam: &RsCameraModel<T>,
) -> Result<T> {
    let u = undistort_division(&corr.image, cam.lambda)?;
    let dr = corr.image.r - cam.r0;
    let a = (Matrix3::identity() + skew(&cam.w) * dr) * (Matrix3::identity() + skew(&cam.v));
    let xc = a * corr.scene.coords() + cam.c0 + cam.t * dr;
    let g = Vector3::new(cam.f * xc.x, cam.f * xc.y, xc.z);
    let gn = g.norm();
    if gn < real(1e-300) {
        return Ok(real(f64::INFINITY));
    }
    Ok(u.cross(&g).norm() / gn)
}

/// Pixel reprojection distance between the measurement and the exact
/// rolling-shutter projection of the model.
///
/// The linearized orientation `I + [v]x` is first projected to its nearest
/// rotation and composed with `r_gs`. Non-convergent or behind-camera
/// projections score as infinity so robust estimation treats the point as an
/// outlier rather than aborting.
pub fn residual_reprojection_px<T: Real>(
    corr: &Correspondence<T>,
    cam: &RsCameraModel<T>,
    r_gs: &RotationMatrix<T>,
) -> T {
    let r_full = orientation_from_v(&cam.v).compose(r_gs);
    match project_rs_exact(&corr.scene, cam, &r_full) {
        Ok(p) => Vector2::new(p.r - corr.image.r, p.c - corr.image.c).norm(),
        Err(_) => real(f64::INFINITY),
    }
}
