//! Inner solve of the R7Pfr minimal problem: rolling-shutter absolute pose
//! with unknown focal length and unknown radial distortion from seven
//! correspondences and a fixed preliminary orientation `v_hat`.
//!
//! The third-row equations are unchanged from R7Pf (independent of both
//! focal length and distortion), so the same null-space parametrization
//! applies. Substituting it into the first-row equations of all seven
//! points yields seven quadratics over the monomials
//! `[b1 q, b1 l, b1, b2 q, b2 l, b2, b3 q, b3 l, b3, C0z q, tz q, q, l, 1]`
//! with `l` the division-model coefficient. Gauss-Jordan elimination of
//! `C0z q` and `tz q` leaves five quadrics in five unknowns with ten
//! solutions, solved by a fixed offline elimination template ending in a
//! 10x10 action-matrix eigendecomposition.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};
use num_complex::Complex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::{residual_double_lin, Correspondence};
use crate::numlin::{eig, gauss_jordan_eliminate};
use crate::r7pf::{build_row3_system, row1_support, row3_nullspace, CandidateSolution, NullSpaceParam};
use crate::scalar::{real, Real};

/// Monomial order of the full seven-equation system.
///
/// `[b1 q, b1 l, b1, b2 q, b2 l, b2, b3 q, b3 l, b3, C0z q, tz q, q, l, 1]`
pub const FULL_MONOMIALS: usize = 14;

/// Monomial order of the reduced five-equation system.
///
/// `[b1 q, b1 l, b1, b2 q, b2 l, b2, b3 q, b3 l, b3, q, l, 1]`
pub const REDUCED_MONOMIALS: usize = 12;

/// Coefficients of the seven first-row quadratics over [`FULL_MONOMIALS`].
#[derive(Debug, Clone)]
pub struct QuadraticSystem<T: Real> {
    pub coeffs: SMatrix<T, 7, 14>,
}

/// Five quadrics over [`REDUCED_MONOMIALS`] plus the two elimination rows
/// that recover `C0z q` and `tz q` by back-substitution.
#[derive(Debug, Clone)]
pub struct ReducedSystem5<T: Real> {
    pub coeffs: SMatrix<T, 5, 12>,
    /// Rows of the reduced full system with unit pivots at `C0z q` (first)
    /// and `tz q` (second), over [`FULL_MONOMIALS`].
    pub backsub: [SVector<T, 14>; 2],
}

/// First-row quadratic system of Eq.-style projection constraints for all
/// seven correspondences, with the null-space parametrization substituted.
pub fn build_row1_system_r<T: Real>(
    corrs: &[Correspondence<T>],
    ns: &NullSpaceParam<T>,
    v_hat: &Vector3<T>,
) -> Result<QuadraticSystem<T>> {
    if corrs.len() != 7 {
        return Err(Error::InsufficientData { needed: 7, got: corrs.len() });
    }
    let mut coeffs = SMatrix::<T, 7, 14>::zeros();
    for (i, corr) in corrs.iter().enumerate() {
        let (a, b) = row1_support(corr, ns, v_hat);
        let r = corr.image.r;
        let c = corr.image.c;
        let rho2 = corr.image.radius_sq();
        for j in 0..3 {
            coeffs[(i, 3 * j)] = c * b[j]; // b_j q
            coeffs[(i, 3 * j + 1)] = -(rho2 * a[j]); // b_j l
            coeffs[(i, 3 * j + 2)] = -a[j]; // b_j
        }
        coeffs[(i, 9)] = c; // C0z q
        coeffs[(i, 10)] = c * r; // tz q
        coeffs[(i, 11)] = c * b[3]; // q
        coeffs[(i, 12)] = -(rho2 * a[3]); // l
        coeffs[(i, 13)] = -a[3]; // 1
    }
    Ok(QuadraticSystem { coeffs })
}

/// Eliminates the monomials `C0z q` and `tz q` by Gauss-Jordan, leaving
/// five equations free of them plus the two elimination rows.
pub fn reduce_system<T: Real>(sys: &QuadraticSystem<T>) -> Result<ReducedSystem5<T>> {
    let full = DMatrix::from_fn(7, 14, |i, j| sys.coeffs[(i, j)]);
    let gj = gauss_jordan_eliminate(&full, &[9, 10])?;
    let mut coeffs = SMatrix::<T, 5, 12>::zeros();
    let mut k = 0;
    for i in 0..7 {
        if gj.pivot_rows.contains(&i) {
            continue;
        }
        let mut col = 0;
        for j in 0..14 {
            if j == 9 || j == 10 {
                continue;
            }
            coeffs[(k, col)] = gj.reduced[(i, j)];
            col += 1;
        }
        k += 1;
    }
    let mut backsub = [SVector::<T, 14>::zeros(); 2];
    for (slot, &row) in gj.pivot_rows.iter().enumerate() {
        for j in 0..14 {
            backsub[slot][j] = gj.reduced[(row, j)];
        }
    }
    Ok(ReducedSystem5 { coeffs, backsub })
}

#[derive(Deserialize)]
struct TemplateSpec {
    version: u32,
    action: Vec<u8>,
    monomials: Vec<Vec<u8>>,
    n_nonbasis: usize,
    basis: Vec<Vec<u8>>,
    rows: Vec<TemplateRow>,
    structure_monomials: Vec<Vec<u8>>,
}

#[derive(Deserialize)]
struct TemplateRow {
    poly: usize,
    mult: Vec<u8>,
}

/// Where the action product of a basis monomial lands.
enum ActionTarget {
    Basis(usize),
    Column(usize),
}

/// The offline elimination template: row structure, column (monomial)
/// order, quotient basis and extraction bookkeeping.
pub struct SolverTemplate {
    version: u32,
    n_rows: usize,
    n_cols: usize,
    n_nonbasis: usize,
    /// Per template row: source polynomial index and the 12 column targets
    /// of its structure monomials under the row's multiplier.
    row_targets: Vec<(usize, [usize; 12])>,
    /// Pivot columns that the action-matrix construction relies on.
    needed: Vec<usize>,
    action_targets: Vec<ActionTarget>,
    /// Basis positions of b1, b2, b3, q, l.
    var_pos: [usize; 5],
    one_pos: usize,
}

impl SolverTemplate {
    /// (rows, columns) of the elimination matrix.
    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    fn from_spec(spec: &TemplateSpec) -> Self {
        let exp = |v: &Vec<u8>| -> [u8; 5] { [v[0], v[1], v[2], v[3], v[4]] };
        let mul = |a: [u8; 5], b: [u8; 5]| -> [u8; 5] {
            [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3], a[4] + b[4]]
        };
        let cols: Vec<[u8; 5]> = spec.monomials.iter().map(exp).collect();
        let col_of = |m: [u8; 5]| -> usize {
            cols.iter().position(|&c| c == m).expect("template column present")
        };
        let basis: Vec<[u8; 5]> = spec.basis.iter().map(exp).collect();
        for (i, b) in basis.iter().enumerate() {
            assert_eq!(cols[spec.n_nonbasis + i], *b, "basis columns must trail");
        }
        let structure: Vec<[u8; 5]> = spec.structure_monomials.iter().map(exp).collect();
        let row_targets = spec
            .rows
            .iter()
            .map(|r| {
                let mu = exp(&r.mult);
                let mut t = [0usize; 12];
                for (j, s) in structure.iter().enumerate() {
                    t[j] = col_of(mul(mu, *s));
                }
                (r.poly, t)
            })
            .collect();
        let action = exp(&spec.action);
        let mut needed = Vec::new();
        let action_targets = basis
            .iter()
            .map(|&m| {
                let t = mul(m, action);
                match basis.iter().position(|&b| b == t) {
                    Some(p) => ActionTarget::Basis(p),
                    None => {
                        let c = col_of(t);
                        needed.push(c);
                        ActionTarget::Column(c)
                    }
                }
            })
            .collect();
        let pos_of = |m: [u8; 5]| -> usize {
            basis.iter().position(|&b| b == m).expect("variable monomial in basis")
        };
        SolverTemplate {
            version: spec.version,
            n_rows: spec.rows.len(),
            n_cols: cols.len(),
            n_nonbasis: spec.n_nonbasis,
            row_targets,
            needed,
            action_targets,
            var_pos: [
                pos_of([1, 0, 0, 0, 0]),
                pos_of([0, 1, 0, 0, 0]),
                pos_of([0, 0, 1, 0, 0]),
                pos_of([0, 0, 0, 1, 0]),
                pos_of([0, 0, 0, 0, 1]),
            ],
            one_pos: pos_of([0, 0, 0, 0, 0]),
        }
    }
}

/// The embedded template, parsed once.
pub fn solver_template() -> &'static SolverTemplate {
    static TEMPLATE: OnceLock<SolverTemplate> = OnceLock::new();
    TEMPLATE.get_or_init(|| {
        let spec: TemplateSpec =
            serde_json::from_str(include_str!("r7pfr_template.json")).expect("valid template");
        SolverTemplate::from_spec(&spec)
    })
}

fn eval_reduced<T: Real>(
    coeffs: &SMatrix<T, 5, 12>,
    x: &[Complex<T>; 5],
) -> [Complex<T>; 5] {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let [b1, b2, b3, q, l] = *x;
    let vals = [
        b1 * q, b1 * l, b1, b2 * q, b2 * l, b2, b3 * q, b3 * l, b3, q, l, one,
    ];
    let mut out = [zero; 5];
    for (k, o) in out.iter_mut().enumerate() {
        for (j, v) in vals.iter().enumerate() {
            *o += *v * Complex::new(coeffs[(k, j)], T::zero());
        }
    }
    out
}

/// A few complex Newton steps on the square five-quadric system; the
/// eigenvector extraction alone is good to roughly 1e-6 and the polish
/// takes roots to machine precision.
fn polish_root<T: Real>(coeffs: &SMatrix<T, 5, 12>, x: &mut [Complex<T>; 5]) {
    let cplx = |v: T| Complex::new(v, T::zero());
    for _ in 0..4 {
        let f = eval_reduced(coeffs, x);
        let [b1, b2, b3, q, l] = *x;
        let mut jac = SMatrix::<Complex<T>, 5, 5>::zeros();
        for k in 0..5 {
            jac[(k, 0)] = cplx(coeffs[(k, 0)]) * q + cplx(coeffs[(k, 1)]) * l + cplx(coeffs[(k, 2)]);
            jac[(k, 1)] = cplx(coeffs[(k, 3)]) * q + cplx(coeffs[(k, 4)]) * l + cplx(coeffs[(k, 5)]);
            jac[(k, 2)] = cplx(coeffs[(k, 6)]) * q + cplx(coeffs[(k, 7)]) * l + cplx(coeffs[(k, 8)]);
            jac[(k, 3)] = cplx(coeffs[(k, 0)]) * b1
                + cplx(coeffs[(k, 3)]) * b2
                + cplx(coeffs[(k, 6)]) * b3
                + cplx(coeffs[(k, 9)]);
            jac[(k, 4)] = cplx(coeffs[(k, 1)]) * b1
                + cplx(coeffs[(k, 4)]) * b2
                + cplx(coeffs[(k, 7)]) * b3
                + cplx(coeffs[(k, 10)]);
        }
        let rhs = SVector::<Complex<T>, 5>::from_row_slice(&f);
        match jac.lu().solve(&(-rhs)) {
            Some(step) => {
                for i in 0..5 {
                    x[i] += step[i];
                }
                if step.norm() < real::<T>(1e-15) {
                    break;
                }
            }
            None => break,
        }
    }
}

/// Relative residual of the worst equation at a root.
pub fn reduced_residual<T: Real>(coeffs: &SMatrix<T, 5, 12>, x: &[Complex<T>; 5]) -> T {
    let f = eval_reduced(coeffs, x);
    let mut worst = T::zero();
    for k in 0..5 {
        let rn = coeffs.row(k).norm();
        if rn > T::zero() {
            worst = worst.max(f[k].norm_sqr().sqrt() / rn);
        }
    }
    worst
}

/// Acceptance bound on the per-equation relative residual of returned roots.
pub const ROOT_RESIDUAL_MAX: f64 = 1e-6;

/// All isolated complex solutions (at most ten) of the reduced system, via
/// the offline elimination template and a 10x10 action-matrix
/// eigendecomposition, Newton-polished.
pub fn solve_5quadrics<T: Real>(sys: &ReducedSystem5<T>) -> Result<Vec<[Complex<T>; 5]>> {
    let tpl = solver_template();

    // Equilibrate the five equations; scaling each to unit norm preserves
    // the solution set and keeps the pivoting threshold meaningful when the
    // incoming rows differ by orders of magnitude.
    let mut eqs = sys.coeffs;
    for k in 0..5 {
        let n = eqs.row(k).norm();
        if n == T::zero() {
            return Err(Error::TemplateSingular);
        }
        for j in 0..12 {
            eqs[(k, j)] /= n;
        }
    }

    let mut m = DMatrix::<T>::zeros(tpl.n_rows, tpl.n_cols);
    for (i, (poly, targets)) in tpl.row_targets.iter().enumerate() {
        for (j, &col) in targets.iter().enumerate() {
            m[(i, col)] += eqs[(*poly, j)];
        }
    }

    // Column-ordered Gauss-Jordan over the non-basis columns.
    let scale = m.amax();
    if scale == T::zero() {
        return Err(Error::TemplateSingular);
    }
    let piv_tol = real::<T>(1e-10) * scale;
    let mut used = vec![false; tpl.n_rows];
    let mut pivot_of = vec![usize::MAX; tpl.n_cols];
    for c in 0..tpl.n_nonbasis {
        let mut best = T::zero();
        let mut best_row = usize::MAX;
        for r in 0..tpl.n_rows {
            if !used[r] {
                let v = m[(r, c)].abs();
                if v > best {
                    best = v;
                    best_row = r;
                }
            }
        }
        if best < piv_tol {
            if tpl.needed.contains(&c) {
                return Err(Error::TemplateSingular);
            }
            continue;
        }
        let r = best_row;
        used[r] = true;
        pivot_of[c] = r;
        let inv = T::one() / m[(r, c)];
        for j in c..tpl.n_cols {
            m[(r, j)] *= inv;
        }
        m[(r, c)] = T::one();
        for rr in 0..tpl.n_rows {
            if rr != r {
                let factor = m[(rr, c)];
                if factor != T::zero() {
                    for j in c..tpl.n_cols {
                        let sub = factor * m[(r, j)];
                        m[(rr, j)] -= sub;
                    }
                    m[(rr, c)] = T::zero();
                }
            }
        }
    }

    // Reduced rows for the needed columns must express them over the basis:
    // any residue at an uneliminated non-basis column means the instance
    // left the generic stratum the template was built for.
    let tail_tol = real::<T>(1e-6);
    for &c in &tpl.needed {
        let r = pivot_of[c];
        let mut row_scale = T::one();
        for p in 0..10 {
            row_scale = row_scale.max(m[(r, tpl.n_cols - 10 + p)].abs());
        }
        let mut bad = T::zero();
        for j in 0..tpl.n_nonbasis {
            if j != c && pivot_of[j] == usize::MAX {
                bad = bad.max(m[(r, j)].abs());
            }
        }
        if bad > tail_tol * row_scale {
            return Err(Error::TemplateSingular);
        }
    }

    // Action matrix for multiplication by l on the quotient basis.
    let mut act = DMatrix::<T>::zeros(10, 10);
    for (j, target) in tpl.action_targets.iter().enumerate() {
        match target {
            ActionTarget::Basis(p) => act[(j, *p)] = T::one(),
            ActionTarget::Column(c) => {
                let r = pivot_of[*c];
                for p in 0..10 {
                    act[(j, p)] = -m[(r, tpl.n_cols - 10 + p)];
                }
            }
        }
    }

    let pairs = eig(&act)?;
    let mut roots: Vec<[Complex<T>; 5]> = Vec::new();
    for pair in pairs {
        let x = &pair.vector;
        let one = x[tpl.one_pos];
        if one.norm_sqr() < real::<T>(1e-24) * x.norm_squared() {
            continue; // solution at infinity
        }
        let mut root = [Complex::new(T::zero(), T::zero()); 5];
        for (i, &p) in tpl.var_pos.iter().enumerate() {
            root[i] = x[p] / one;
        }
        polish_root(&sys.coeffs, &mut root);
        if !(reduced_residual(&sys.coeffs, &root) < real(ROOT_RESIDUAL_MAX)) {
            continue;
        }
        // Deduplicate: the polish can converge two eigenvectors of a tight
        // cluster onto the same root.
        let mut mag = T::zero();
        for r in root.iter() {
            mag = mag.max(r.norm_sqr().sqrt());
        }
        let dedup_tol = real::<T>(1e-8) * (T::one() + mag);
        let dup = roots.iter().any(|other| {
            let mut d = T::zero();
            for i in 0..5 {
                d = d.max((root[i] - other[i]).norm_sqr().sqrt());
            }
            d < dedup_tol
        });
        if !dup {
            roots.push(root);
        }
    }
    if roots.len() > 10 {
        return Err(Error::TemplateSingular);
    }
    Ok(roots)
}

/// One inner R7Pfr solve: all feasible candidates, sorted by residual.
pub fn solve_inner_r7pfr<T: Real>(
    corrs: &[Correspondence<T>],
    v_hat: &Vector3<T>,
) -> Result<Vec<CandidateSolution<T>>> {
    let m = build_row3_system(corrs, v_hat)?;
    let ns = row3_nullspace(&m)?;
    let sys = build_row1_system_r(corrs, &ns, v_hat)?;
    let reduced = reduce_system(&sys)?;
    let roots = solve_5quadrics(&reduced)?;

    let rho2_max = corrs
        .iter()
        .map(|c| c.image.radius_sq())
        .fold(T::zero(), |a, b| a.max(b));

    let imag_tol = real::<T>(1e-8);
    let mut candidates = Vec::new();
    for root in roots {
        if root
            .iter()
            .any(|z| z.im.abs() > imag_tol * (T::one() + z.re.abs()))
        {
            continue;
        }
        let beta = Vector3::new(root[0].re, root[1].re, root[2].re);
        let q = root[3].re;
        let lambda = root[4].re;
        if !(q > T::zero()) || !q.is_finite() {
            continue;
        }
        if T::one() + lambda * rho2_max <= T::zero() {
            continue;
        }
        // Back-substitute C0z q and tz q from the elimination rows.
        let mono = |row: &SVector<T, 14>, skip: usize| -> T {
            let vals = [
                beta.x * q,
                beta.x * lambda,
                beta.x,
                beta.y * q,
                beta.y * lambda,
                beta.y,
                beta.z * q,
                beta.z * lambda,
                beta.z,
                T::zero(),
                T::zero(),
                q,
                lambda,
                T::one(),
            ];
            let mut s = T::zero();
            for j in 0..14 {
                if j != skip {
                    s += row[j] * vals[j];
                }
            }
            -s
        };
        let c0z = mono(&reduced.backsub[0], 9) / q;
        let tz = mono(&reduced.backsub[1], 10) / q;

        let y = ns.combine(&beta);
        let cand = CandidateSolution {
            v: Vector3::new(y[0], y[1], y[2]),
            w: Vector3::new(y[3], y[4], y[5]),
            c0: Vector3::new(y[6], y[7], c0z),
            t: Vector3::new(y[8], y[9], tz),
            q,
            f: T::one() / q,
            lambda,
            residual: T::zero(),
            dropped_constraint_error: T::zero(),
        };
        if !cand.model().is_finite() {
            continue;
        }
        let model = cand.model();
        let mut residual = T::zero();
        let mut valid = true;
        for corr in corrs {
            match residual_double_lin(corr, &model) {
                Ok(r) => residual += r,
                Err(_) => {
                    valid = false;
                    break;
                }
            }
        }
        if !valid || !residual.is_finite() {
            continue;
        }
        candidates.push(CandidateSolution { residual, ..cand });
    }
    if candidates.is_empty() {
        return Err(Error::NoFeasibleSolution);
    }
    candidates.sort_by(|a, b| a.residual.partial_cmp(&b.residual).expect("finite residuals"));
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{ImagePoint, ScenePoint};
    use crate::r7pf::{solve_inner_r7pf, GepVariant};
    use crate::synth::{generate, MeasurementModel, SynthConfig};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn relaxed_cfg(seed: u64, lambda: f64) -> SynthConfig {
        SynthConfig {
            rot_velocity_deg: (5.0, 15.0),
            trans_velocity: (0.02, 0.08),
            lambda_true: lambda,
            measurement_model: MeasurementModel::RelaxedV0,
            seed,
            ..SynthConfig::default()
        }
    }

    fn random_reduced(seed: u64) -> ReducedSystem5<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let coeffs = SMatrix::<f64, 5, 12>::from_fn(|_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        ReducedSystem5 { coeffs, backsub: [SVector::zeros(), SVector::zeros()] }
    }

    #[test]
    fn template_loads_and_reports_size() {
        let tpl = solver_template();
        assert_eq!(tpl.version(), 1);
        let (rows, cols) = tpl.dims();
        assert!(rows >= 36 && cols >= 46, "template {rows}x{cols}");
    }

    #[test]
    fn lambda_columns_vanish_at_distortion_center() {
        // Generic scene, but the first image point sits exactly at the
        // distortion center.
        let ds = generate(&relaxed_cfg(444, 0.0));
        let corrs = ds.normalized_correspondences();
        // The null space comes from the unmodified sample (a measured point
        // exactly at the center would degenerate its third-row equation).
        let m = build_row3_system(&corrs, &Vector3::zeros()).unwrap();
        let ns = row3_nullspace(&m).unwrap();
        let mut centered = corrs.clone();
        centered[0].image = ImagePoint::new(0.0, 0.0);
        let sys = build_row1_system_r(&centered, &ns, &Vector3::zeros()).unwrap();
        // All lambda monomials of that equation drop.
        for col in [1usize, 4, 7, 12] {
            assert_eq!(sys.coeffs[(0, col)], 0.0);
        }
    }

    #[test]
    fn full_system_vanishes_at_truth() {
        for seed in 0..10 {
            let ds = generate(&relaxed_cfg(500 + seed, -0.2));
            let corrs = ds.normalized_correspondences();
            let gt = ds.gt_normalized();
            let m = build_row3_system(&corrs, &Vector3::zeros()).unwrap();
            let ns = row3_nullspace(&m).unwrap();
            let sys = build_row1_system_r(&corrs, &ns, &Vector3::zeros()).unwrap();

            // Solve the span coordinates of the true y directly.
            let y_true = SVector::<f64, 11>::from_iterator(
                [0.0, 0.0, 0.0, gt.w.x, gt.w.y, gt.w.z, gt.c0.x, gt.c0.y, gt.t.x, gt.t.y, 1.0]
                    .into_iter(),
            );
            let d = y_true - ns.affine;
            let beta = Vector3::new(
                ns.span[0].dot(&d),
                ns.span[1].dot(&d),
                ns.span[2].dot(&d),
            );
            let q = 1.0 / gt.f;
            let l = gt.lambda;
            let vals = [
                beta.x * q, beta.x * l, beta.x,
                beta.y * q, beta.y * l, beta.y,
                beta.z * q, beta.z * l, beta.z,
                gt.c0.z * q, gt.t.z * q, q, l, 1.0,
            ];
            for i in 0..7 {
                let mut s = 0.0;
                for j in 0..14 {
                    s += sys.coeffs[(i, j)] * vals[j];
                }
                let rn: f64 = sys.coeffs.row(i).norm();
                assert!(s.abs() / rn < 1e-10, "seed {seed} row {i}: {s:.2e}");
            }
        }
    }

    #[test]
    fn reduction_clears_target_columns() {
        let ds = generate(&relaxed_cfg(600, -0.15));
        let corrs = ds.normalized_correspondences();
        let m = build_row3_system(&corrs, &Vector3::zeros()).unwrap();
        let ns = row3_nullspace(&m).unwrap();
        let sys = build_row1_system_r(&corrs, &ns, &Vector3::zeros()).unwrap();
        let red = reduce_system(&sys).unwrap();
        // Back-substitution rows have unit pivots.
        assert_relative_eq!(red.backsub[0][9], 1.0, epsilon = 1e-12);
        assert_relative_eq!(red.backsub[0][10], 0.0, epsilon = 1e-12);
        assert_relative_eq!(red.backsub[1][10], 1.0, epsilon = 1e-12);
        assert_relative_eq!(red.backsub[1][9], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_5quadrics_random_instances() {
        for seed in 0..20 {
            let sys = random_reduced(seed);
            let roots = solve_5quadrics(&sys).unwrap();
            assert!(roots.len() <= 10);
            assert!(roots.len() >= 8, "seed {seed}: only {} roots", roots.len());
            for r in &roots {
                assert!(reduced_residual(&sys.coeffs, r) < 1e-8);
            }
        }
    }

    #[test]
    fn complex_roots_come_in_conjugate_pairs() {
        for seed in 20..30 {
            let sys = random_reduced(seed);
            let roots = solve_5quadrics(&sys).unwrap();
            let complex: Vec<_> = roots
                .iter()
                .filter(|r| r.iter().any(|z| z.im.abs() > 1e-8 * (1.0 + z.re.abs())))
                .collect();
            for r in &complex {
                let found = complex.iter().any(|other| {
                    (0..5).all(|i| {
                        (r[i].re - other[i].re).abs() < 1e-7 * (1.0 + r[i].re.abs())
                            && (r[i].im + other[i].im).abs() < 1e-7 * (1.0 + r[i].im.abs())
                    })
                });
                assert!(found, "unpaired complex root in seed {seed}");
            }
        }
    }

    #[test]
    fn recovers_focal_and_distortion_exactly() {
        for seed in 0..20 {
            let ds = generate(&relaxed_cfg(700 + seed, -0.2));
            let corrs = ds.normalized_correspondences();
            let gt = ds.gt_normalized();
            let cands = solve_inner_r7pfr(&corrs, &Vector3::zeros()).unwrap();
            let best = &cands[0];
            assert_relative_eq!(best.f, gt.f, max_relative = 1e-8);
            assert!((best.lambda - gt.lambda).abs() < 1e-8, "seed {seed}");
            assert!((best.w - gt.w).norm() < 1e-8);
            assert!((best.c0 - gt.c0).norm() < 1e-8);
            assert!((best.t - gt.t).norm() < 1e-8);
            assert!(best.residual < 1e-9);
        }
    }

    #[test]
    fn zero_distortion_data_yields_zero_lambda() {
        for seed in 0..10 {
            let ds = generate(&relaxed_cfg(800 + seed, 0.0));
            let corrs = ds.normalized_correspondences();
            let cands = solve_inner_r7pfr(&corrs, &Vector3::zeros()).unwrap();
            let best = &cands[0];
            assert!(best.lambda.abs() < 1e-8, "seed {seed}: lambda {}", best.lambda);
        }
    }

    #[test]
    fn agrees_with_r7pf_on_undistorted_data() {
        for seed in 0..10 {
            let ds = generate(&relaxed_cfg(900 + seed, 0.0));
            let corrs = ds.normalized_correspondences();
            let pf = solve_inner_r7pf(&corrs, &Vector3::zeros(), GepVariant::Full6).unwrap();
            let pfr = solve_inner_r7pfr(&corrs, &Vector3::zeros()).unwrap();
            let a = &pf[0];
            let b = &pfr[0];
            assert!((a.f - b.f).abs() / a.f < 1e-6, "seed {seed}");
            assert!((a.v - b.v).norm() < 1e-6);
            assert!((a.w - b.w).norm() < 1e-6);
            assert!((a.c0 - b.c0).norm() < 1e-6);
            assert!((a.t - b.t).norm() < 1e-6);
        }
    }

    #[test]
    fn static_camera_unit_focal_zero_lambda() {
        let mut s = 77u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let corrs: Vec<Correspondence<f64>> = (0..7)
            .map(|_| {
                let x = ScenePoint::new(rnd(), rnd(), 2.5 + rnd());
                Correspondence {
                    image: ImagePoint::new(x.x / x.z, x.y / x.z),
                    scene: x,
                }
            })
            .collect();
        let cands = solve_inner_r7pfr(&corrs, &Vector3::zeros()).unwrap();
        let best = &cands[0];
        assert_relative_eq!(best.q, 1.0, epsilon = 1e-7);
        assert!(best.lambda.abs() < 1e-7);
    }

    #[test]
    fn feasibility_filter_holds() {
        for seed in 0..10 {
            let ds = generate(&relaxed_cfg(950 + seed, -0.3));
            let corrs = ds.normalized_correspondences();
            let rho2_max = corrs
                .iter()
                .map(|c| c.image.radius_sq())
                .fold(0.0f64, f64::max);
            let cands = solve_inner_r7pfr(&corrs, &Vector3::zeros()).unwrap();
            for c in &cands {
                assert!(c.q > 0.0);
                assert!(1.0 + c.lambda * rho2_max > 0.0);
            }
        }
    }
}
