use rspose_core::geom::residual_reprojection_px;
use rspose_core::iterdriver::{IterConfig, SolverKind};
use rspose_core::robust::{ransac_with_lo, RansacConfig};
use rspose_core::synth::{generate, OrientationMode, SynthConfig};

#[test]
fn dist() {
    let mut pass_label = 0usize;
    let mut pass_model = 0usize;
    for seed in 0..20u64 {
        let ds = generate(&SynthConfig {
            n_points: 200,
            rot_velocity_deg: (15.0, 15.0),
            trans_velocity: (0.05, 0.05),
            lambda_true: -0.2,
            noise_px: std::f64::consts::FRAC_1_SQRT_2,
            outlier_fraction: 0.5,
            orientation_mode: OrientationMode::Identity,
            seed: 40_000 + seed,
            ..SynthConfig::default()
        });
        let corrs = ds.normalized_correspondences();
        let thr = 2.0 / ds.norm_scale;
        let cfg = RansacConfig::new(IterConfig::new(SolverKind::R7Pfr), thr, seed);
        let res = match ransac_with_lo(&corrs, &cfg) {
            Ok(r) => r, Err(e) => { println!("seed {seed}: ERR {e}"); continue; }
        };
        let gt = ds.gt_normalized();
        let (mut tp_m, mut fp_m, mut gt_m) = (0usize, 0usize, 0usize);
        let (mut tp_l, mut fp_l, mut gt_l) = (0usize, 0usize, 0usize);
        for (i, corr) in corrs.iter().enumerate() {
            let is_gt_m = residual_reprojection_px(corr, &gt, &ds.gt_r0) <= thr;
            let is_gt_l = ds.inlier_labels[i];
            if is_gt_m { gt_m += 1; }
            if is_gt_l { gt_l += 1; }
            if res.inlier_mask[i] {
                if is_gt_m { tp_m += 1; } else { fp_m += 1; }
                if is_gt_l { tp_l += 1; } else { fp_l += 1; }
            }
        }
        let pm = tp_m as f64 / (tp_m + fp_m).max(1) as f64;
        let rm = tp_m as f64 / gt_m.max(1) as f64;
        let pl = tp_l as f64 / (tp_l + fp_l).max(1) as f64;
        let rl = tp_l as f64 / gt_l.max(1) as f64;
        if pm >= 0.95 && rm >= 0.95 { pass_model += 1; }
        if pl >= 0.95 && rl >= 0.95 { pass_label += 1; }
        println!("seed {seed}: model P={pm:.3} R={rm:.3} | label P={pl:.3} R={rl:.3}");
    }
    println!("passes: model-def {pass_model}/20, label-def {pass_label}/20");
}
