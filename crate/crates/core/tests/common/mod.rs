//! Shared oracle implementations for the integration and acceptance tests.
//! Everything here is deliberately independent of the library's solution
//! paths: polynomial roots come from Durand-Kerner iteration, polynomial
//! systems from dense multi-start Newton, and line straightness from plain
//! least-squares fits.

#![allow(dead_code)]

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex;
use rayon::prelude::*;

use rspose_core::eval::GrayImage;
use rspose_core::geom::{ImagePoint, RsCameraModel};

/// All complex roots of a dense polynomial `c[0] + c[1] x + ... + c[n] x^n`
/// by Durand-Kerner iteration. Independent of the eigen-based paths in the
/// library.
pub fn durand_kerner(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && coeffs.last().copied() == Some(0.0) {
        coeffs.pop();
    }
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = *coeffs.last().expect("non-empty");
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |x: Complex<f64>| -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * x + Complex::new(c, 0.0);
        }
        acc
    };
    // Radius bound on the roots of the monic polynomial.
    let radius = 1.0
        + monic[..n]
            .iter()
            .map(|c| c.abs())
            .fold(0.0f64, f64::max);
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex::from_polar(radius.min(4.0) * 0.7, angle)
        })
        .collect();
    for _ in 0..400 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    roots
}

/// Coefficients of `det(a0 - x a1)` (degree <= n) by evaluation at n+1
/// nodes and a Vandermonde solve.
pub fn det_poly_coeffs(a0: &DMatrix<f64>, a1: &DMatrix<f64>) -> Vec<f64> {
    let n = a0.nrows();
    let m = n + 1;
    // Spread nodes at the scale of the eigenvalues to keep the Vandermonde
    // solve well conditioned.
    let scale = (a0.amax() / a1.amax().max(1e-300)).max(1e-6);
    let nodes: Vec<f64> = (0..m)
        .map(|k| {
            let t = (2 * k + 1) as f64 / (2 * m) as f64 * std::f64::consts::PI;
            2.0 * scale * t.cos()
        })
        .collect();
    let mut vand = DMatrix::zeros(m, m);
    let mut rhs = DMatrix::zeros(m, 1);
    for (r, &x) in nodes.iter().enumerate() {
        let mut p = 1.0;
        for c in 0..m {
            vand[(r, c)] = p;
            p *= x;
        }
        rhs[(r, 0)] = (a0 - a1 * x).determinant();
    }
    let sol = vand.lu().solve(&rhs).expect("vandermonde solvable");
    (0..m).map(|i| sol[(i, 0)]).collect()
}

/// Region scanned by the brute-force polynomial-system oracle.
pub const ORACLE_BOX_BETA: (f64, f64) = (-10.0, 10.0);
pub const ORACLE_BOX_Q: (f64, f64) = (0.0, 10.0);
pub const ORACLE_BOX_LAMBDA: (f64, f64) = (-2.0, 0.5);

pub fn inside_oracle_box(x: &[f64; 5]) -> bool {
    let eps = 1e-6;
    x[0].abs() <= ORACLE_BOX_BETA.1 + eps
        && x[1].abs() <= ORACLE_BOX_BETA.1 + eps
        && x[2].abs() <= ORACLE_BOX_BETA.1 + eps
        && x[3] > ORACLE_BOX_Q.0 + eps
        && x[3] <= ORACLE_BOX_Q.1 + eps
        && x[4] >= ORACLE_BOX_LAMBDA.0 - eps
        && x[4] <= ORACLE_BOX_LAMBDA.1 + eps
}

fn eval_system(coeffs: &SMatrix<f64, 5, 12>, x: &SVector<f64, 5>) -> SVector<f64, 5> {
    let (b1, b2, b3, q, l) = (x[0], x[1], x[2], x[3], x[4]);
    let vals = [
        b1 * q, b1 * l, b1, b2 * q, b2 * l, b2, b3 * q, b3 * l, b3, q, l, 1.0,
    ];
    let mut out = SVector::zeros();
    for k in 0..5 {
        let mut s = 0.0;
        for (j, v) in vals.iter().enumerate() {
            s += coeffs[(k, j)] * v;
        }
        out[k] = s;
    }
    out
}

fn jacobian(coeffs: &SMatrix<f64, 5, 12>, x: &SVector<f64, 5>) -> SMatrix<f64, 5, 5> {
    let (b1, b2, b3, q, l) = (x[0], x[1], x[2], x[3], x[4]);
    let mut jac = SMatrix::zeros();
    for k in 0..5 {
        jac[(k, 0)] = coeffs[(k, 0)] * q + coeffs[(k, 1)] * l + coeffs[(k, 2)];
        jac[(k, 1)] = coeffs[(k, 3)] * q + coeffs[(k, 4)] * l + coeffs[(k, 5)];
        jac[(k, 2)] = coeffs[(k, 6)] * q + coeffs[(k, 7)] * l + coeffs[(k, 8)];
        jac[(k, 3)] = coeffs[(k, 0)] * b1 + coeffs[(k, 3)] * b2 + coeffs[(k, 6)] * b3 + coeffs[(k, 9)];
        jac[(k, 4)] = coeffs[(k, 1)] * b1 + coeffs[(k, 4)] * b2 + coeffs[(k, 7)] * b3 + coeffs[(k, 10)];
    }
    jac
}

/// Brute-force root finder for the five-quadric family: damped Newton from
/// a 12^5 grid over the documented box, deduplicated. Returns real roots
/// inside the box only.
pub fn brute_force_roots(coeffs: &SMatrix<f64, 5, 12>) -> Vec<[f64; 5]> {
    const GRID: usize = 12;
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64 + 0.5) / GRID as f64;
    let row_norms: Vec<f64> = (0..5).map(|k| coeffs.row(k).norm()).collect();

    let starts: Vec<usize> = (0..GRID.pow(5)).collect();
    let mut found: Vec<[f64; 5]> = starts
        .par_iter()
        .filter_map(|&idx| {
            let mut rem = idx;
            let mut grid_i = [0usize; 5];
            for g in grid_i.iter_mut() {
                *g = rem % GRID;
                rem /= GRID;
            }
            let mut x = SVector::<f64, 5>::from_column_slice(&[
                lin(ORACLE_BOX_BETA.0, ORACLE_BOX_BETA.1, grid_i[0]),
                lin(ORACLE_BOX_BETA.0, ORACLE_BOX_BETA.1, grid_i[1]),
                lin(ORACLE_BOX_BETA.0, ORACLE_BOX_BETA.1, grid_i[2]),
                lin(ORACLE_BOX_Q.0, ORACLE_BOX_Q.1, grid_i[3]),
                lin(ORACLE_BOX_LAMBDA.0, ORACLE_BOX_LAMBDA.1, grid_i[4]),
            ]);
            let mut fx = eval_system(coeffs, &x);
            let mut fnorm = fx.norm();
            for _ in 0..60 {
                if fnorm < 1e-13 {
                    break;
                }
                let jac = jacobian(coeffs, &x);
                let Some(step) = jac.lu().solve(&(-fx)) else { return None };
                // Damped update: halve until the residual decreases.
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..25 {
                    let cand = x + step * t;
                    let fc = eval_system(coeffs, &cand);
                    if fc.norm() < fnorm {
                        x = cand;
                        fx = fc;
                        fnorm = fx.norm();
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    return None;
                }
                if x.amax() > 1e6 {
                    return None;
                }
            }
            // Relative residual per equation.
            let mut ok = fnorm.is_finite();
            for k in 0..5 {
                if fx[k].abs() > 1e-10 * row_norms[k].max(1e-300) {
                    ok = false;
                }
            }
            let arr = [x[0], x[1], x[2], x[3], x[4]];
            if ok && inside_oracle_box(&arr) {
                Some(arr)
            } else {
                None
            }
        })
        .collect();

    // Deduplicate.
    let mut unique: Vec<[f64; 5]> = Vec::new();
    found.sort_by(|a, b| a[3].partial_cmp(&b[3]).expect("finite"));
    for root in found {
        let mag = root.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-6 * (1.0 + mag);
        if !unique.iter().any(|u| {
            (0..5).all(|i| (u[i] - root[i]).abs() < tol)
        }) {
            unique.push(root);
        }
    }
    unique
}

/// Spearman rank correlation of two equal-length samples.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("finite"));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let ra = rank(a);
    let rb = rank(b);
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        let xa = ra[i] - mean;
        let xb = rb[i] - mean;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    num / (da.sqrt() * db.sqrt()).max(1e-300)
}

/// Renders the rolling-shutter + distorted view of an axis-aligned
/// checkerboard lying in the rectified (global-shutter) frame: each output
/// pixel takes the checker color at its rectified position.
pub fn render_warped_checkerboard(
    width: u32,
    height: u32,
    square_px: f64,
    model: &RsCameraModel<f64>,
) -> GrayImage {
    let mut img = GrayImage::new(width, height);
    let cy = height as f64 * 0.5;
    let cx = width as f64 * 0.5;
    for row in 0..height {
        for col in 0..width {
            let p = ImagePoint::new(row as f64 + 0.5 - cy, col as f64 + 0.5 - cx);
            let Ok(gs) = rspose_core::eval::rectify_point(&p, model) else { continue };
            let a = (gs.r / square_px).floor() as i64;
            let b = (gs.c / square_px).floor() as i64;
            let white = (a + b).rem_euclid(2) == 0;
            img.set(row, col, if white { 255 } else { 0 });
        }
    }
    img
}

/// Maximum deviation from straightness of vertical checker edges: for each
/// crossing row, the subpixel column where the intensity crosses 128 is
/// collected, a line is fitted per edge, and the worst |residual| returned.
pub fn edge_straightness_px(img: &GrayImage, square_px: f64) -> f64 {
    let h = img.height as usize;
    let w = img.width as usize;
    // Track crossings per approximate edge bucket.
    let mut buckets: std::collections::HashMap<i64, Vec<(f64, f64)>> = Default::default();
    for row in (h / 8)..(7 * h / 8) {
        for col in (w / 8)..(7 * w / 8 - 1) {
            let a = img.get(row as u32, col as u32) as f64;
            let b = img.get(row as u32, col as u32 + 1) as f64;
            if (a < 128.0) != (b < 128.0) {
                let frac = (128.0 - a) / (b - a);
                let x = col as f64 + frac;
                let bucket = (x / square_px).round() as i64;
                buckets.entry(bucket).or_default().push((row as f64, x));
            }
        }
    }
    let mut worst = 0.0f64;
    for (_, pts) in buckets {
        if pts.len() < 20 {
            continue;
        }
        // Least-squares line x = a + b*row.
        let n = pts.len() as f64;
        let (mut sr, mut sx, mut srr, mut srx) = (0.0, 0.0, 0.0, 0.0);
        for &(r, x) in &pts {
            sr += r;
            sx += x;
            srr += r * r;
            srx += r * x;
        }
        let denom = n * srr - sr * sr;
        if denom.abs() < 1e-9 {
            continue;
        }
        let slope = (n * srx - sr * sx) / denom;
        let intercept = (sx - slope * sr) / n;
        for &(r, x) in &pts {
            worst = worst.max((x - (intercept + slope * r)).abs());
        }
    }
    worst
}
