//! Global-shutter initializer: a 6-point DLT absolute-pose estimate whose
//! rotation is used to pre-rotate the scene before the rolling-shutter
//! solvers run, so the residual orientation stays close to identity.

use nalgebra::{DMatrix, Matrix3x4, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geom::{Correspondence, RotationMatrix, ScenePoint};
use crate::numlin::{nullspace, rq_decompose};
use crate::scalar::{real, Real};

/// Coarse perspective initialization: rotation, camera center, focal length
/// and a distortion estimate (always zero here; distortion is left to the
/// rolling-shutter solver).
#[derive(Debug, Clone)]
pub struct GsInitialization<T: Real> {
    pub r_gs: RotationMatrix<T>,
    pub c_gs: Vector3<T>,
    pub f_gs: T,
    pub lambda_gs: T,
}

/// Direct linear transform for an uncalibrated perspective camera from at
/// least six correspondences; the projection matrix is decomposed into
/// `K [R | -R C]` and the focal length taken as the mean of the two focal
/// entries of `K`. Skew and principal-point entries are discarded.
pub fn dlt_pose<T: Real>(corrs: &[Correspondence<T>]) -> Result<GsInitialization<T>> {
    let n = corrs.len();
    if n < 6 {
        return Err(Error::InsufficientData { needed: 6, got: n });
    }

    // Scene normalization: centroid to origin, mean distance sqrt(3).
    let mut centroid = Vector3::zeros();
    for c in corrs {
        centroid += c.scene.coords();
    }
    centroid /= real::<T>(n as f64);
    let mut mean_dist = T::zero();
    for c in corrs {
        mean_dist += (c.scene.coords() - centroid).norm();
    }
    mean_dist /= real(n as f64);
    if mean_dist == T::zero() {
        return Err(Error::RankDegenerate { gap_ratio: 0.0 });
    }
    let s3 = real::<T>(3.0).sqrt() / mean_dist;

    // Image scale only; the principal point is already at the origin.
    let mut mean_img = T::zero();
    for c in corrs {
        mean_img += (c.image.r * c.image.r + c.image.c * c.image.c).sqrt();
    }
    mean_img /= real(n as f64);
    let si = if mean_img > T::zero() { T::one() / mean_img } else { T::one() };

    let mut a = DMatrix::<T>::zeros(2 * n, 12);
    for (i, corr) in corrs.iter().enumerate() {
        let xw = (corr.scene.coords() - centroid) * s3;
        let xh = Vector4::new(xw.x, xw.y, xw.z, T::one());
        let r = corr.image.r * si;
        let c = corr.image.c * si;
        for j in 0..4 {
            // r-row: P2 . X - c * P3 . X = 0  (from u x (P X) = 0, first row)
            a[(2 * i, 4 + j)] = -xh[j];
            a[(2 * i, 8 + j)] = c * xh[j];
            // c-row: P1 . X - r * P3 . X = 0
            a[(2 * i + 1, j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -(r * xh[j]);
        }
    }

    let ns = nullspace(&a, 1)?;
    // Inverse iteration on the normal matrix polishes the null vector well
    // below the plain SVD accuracy on ill-conditioned point sets.
    let mut p = ns.basis[0].clone();
    let ata = a.transpose() * &a;
    let eps = (T::default_epsilon() * a.norm()).powi(2);
    let mut shifted = ata;
    for i in 0..12 {
        shifted[(i, i)] += eps;
    }
    let lu = shifted.lu();
    for _ in 0..2 {
        if let Some(y) = lu.solve(&p) {
            let nrm = y.norm();
            if nrm.is_finite() && nrm > T::zero() {
                p = y / nrm;
            }
        }
    }
    let p = &p;
    let mut pm = Matrix3x4::zeros();
    for i in 0..3 {
        for j in 0..4 {
            pm[(i, j)] = p[4 * i + j];
        }
    }

    // Undo both normalizations: P_raw ~ S_img^-1 P_norm T_scene.
    let mut t_scene = Matrix4::identity();
    for i in 0..3 {
        t_scene[(i, i)] = s3;
        t_scene[(i, 3)] = -(s3 * centroid[i]);
    }
    let mut pm = pm * t_scene;
    for j in 0..4 {
        pm[(0, j)] /= si;
        pm[(1, j)] /= si;
    }

    let (k, r_gs, c_gs) = rq_decompose(&pm)?;
    let f_gs = (k[(0, 0)] + k[(1, 1)]) * real(0.5);
    Ok(GsInitialization { r_gs, c_gs, f_gs, lambda_gs: T::zero() })
}

/// Rotates every scene point by `r_gs`, leaving image points unchanged.
pub fn prerotate<T: Real>(
    corrs: &[Correspondence<T>],
    r_gs: &RotationMatrix<T>,
) -> Vec<Correspondence<T>> {
    corrs
        .iter()
        .map(|c| Correspondence {
            image: c.image,
            scene: ScenePoint::from_coords(&r_gs.rotate(&c.scene.coords())),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{project_gs, rotation_exp};
    use approx::assert_relative_eq;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    fn synthesize_gs(
        seed: u64,
        n: usize,
        f: f64,
    ) -> (Vec<Correspondence<f64>>, RotationMatrix<f64>, Vector3<f64>) {
        let mut s = seed;
        let rot = rotation_exp(&Vector3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s)));
        let center = Vector3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s)) * 0.5;
        // Translation places the scene in front of the camera.
        let trans = Vector3::new(0.0, 0.0, 3.0) - rot.rotate(&center);
        let mut corrs = Vec::new();
        while corrs.len() < n {
            let x = ScenePoint::new(lcg(&mut s), lcg(&mut s), lcg(&mut s));
            if let Ok(p) = project_gs(&x, &rot, &trans, f, 0.0) {
                corrs.push(Correspondence { image: p, scene: x });
            }
        }
        (corrs, rot, trans)
    }

    #[test]
    fn dlt_recovers_pose_and_focal() {
        for seed in 0..50u64 {
            let f = 800.0;
            let (corrs, rot, trans) = synthesize_gs(seed * 7 + 1, 7, f);
            let init = dlt_pose(&corrs).unwrap();
            assert!(init.r_gs.angle_to(&rot) < 1e-8, "seed {seed}");
            assert_relative_eq!(init.f_gs, f, max_relative = 1e-8);
            let center = -(rot.inverse().rotate(&trans));
            assert_relative_eq!(init.c_gs, center, epsilon = 1e-6);
            // Reprojection residual of the recovered camera.
            let c_back = -(init.r_gs.rotate(&init.c_gs));
            for corr in &corrs {
                let p = project_gs(&corr.scene, &init.r_gs, &c_back, init.f_gs, 0.0).unwrap();
                assert!((p.r - corr.image.r).hypot(p.c - corr.image.c) < 1e-8);
            }
        }
    }

    #[test]
    fn dlt_equivariant_under_prerotation() {
        let (corrs, rot, _) = synthesize_gs(99, 8, 1.5);
        let extra = rotation_exp(&Vector3::new(0.4, -0.1, 0.2));
        // Rotating the scene by extra^-1 makes the effective rotation rot * extra.
        let rotated = prerotate(&corrs, &extra.inverse());
        let init = dlt_pose(&rotated).unwrap();
        assert!(init.r_gs.angle_to(&rot.compose(&extra)) < 1e-7);
    }

    #[test]
    fn dlt_coplanar_degenerate() {
        let mut s = 5u64;
        let rot = RotationMatrix::identity();
        let trans = Vector3::new(0.0, 0.0, 3.0);
        let mut corrs = Vec::new();
        for _ in 0..8 {
            let x = ScenePoint::new(lcg(&mut s), lcg(&mut s), 0.25); // all on z = 0.25
            let p = project_gs(&x, &rot, &trans, 1.4, 0.0).unwrap();
            corrs.push(Correspondence { image: p, scene: x });
        }
        assert!(matches!(dlt_pose(&corrs), Err(Error::RankDegenerate { .. })));
    }

    #[test]
    fn dlt_needs_six_points() {
        let (corrs, _, _) = synthesize_gs(3, 5, 1.0);
        assert!(matches!(
            dlt_pose(&corrs),
            Err(Error::InsufficientData { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn prerotate_roundtrip() {
        let (corrs, _, _) = synthesize_gs(17, 7, 1.0);
        let rot = rotation_exp(&Vector3::new(0.3, 0.2, -0.4));
        let back = prerotate(&prerotate(&corrs, &rot), &rot.inverse());
        for (a, b) in corrs.iter().zip(back.iter()) {
            assert!((a.scene.coords() - b.scene.coords()).norm() < 1e-14);
            assert_eq!(a.image, b.image);
        }
    }

    #[test]
    fn prerotate_identity_is_noop() {
        let (corrs, _, _) = synthesize_gs(23, 7, 1.0);
        let out = prerotate(&corrs, &RotationMatrix::identity());
        for (a, b) in corrs.iter().zip(out.iter()) {
            assert_eq!(a.scene, b.scene);
        }
    }
}
