//! Inner solve of the R7Pf minimal problem: rolling-shutter absolute pose
//! with unknown focal length from 7 correspondences and a fixed preliminary
//! orientation estimate `v_hat`.
//!
//! With the projective scale eliminated and the equations multiplied by
//! `q = 1/f`, the third-row equations of all seven points are linear in the
//! monomial vector `y = [v1, v2, v3, w1, w2, w3, C0x, C0y, tx, ty, 1]` and
//! independent of `q`. Their 7x11 coefficient matrix has a 4-dimensional
//! null space; writing `y` as a combination of the null-space basis and
//! substituting into the first-row equations of six points yields six
//! equations over the monomials
//! `[b1 q, b1, b2 q, b2, b3 q, b3, C0z q, tz q, q, 1]`, which split into a
//! 6x6 generalized eigenvalue problem in `q`. The seventh first-row
//! equation is kept aside and scores candidates.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geom::{residual_double_lin, skew, Correspondence, RsCameraModel};
use crate::numlin::{gauss_jordan_eliminate, nullspace, solve_gep};
use crate::scalar::{real, Real};

/// Rows of the third-row system: monomials
/// `[v1, v2, v3, w1, w2, w3, C0x, C0y, tx, ty, 1]`.
pub type Row3Matrix<T> = SMatrix<T, 7, 11>;

/// Null-space parametrization of the third-row system.
///
/// `basis` holds the four orthonormal null vectors `y1..y4`. `span` and
/// `affine` are an equivalent basis rotated so the last element of the
/// three span vectors is zero and the affine vector ends in exactly one;
/// `y = b1 span[0] + b2 span[1] + b3 span[2] + affine` then satisfies the
/// trailing-one constraint for any `b`.
#[derive(Debug, Clone)]
pub struct NullSpaceParam<T: Real> {
    pub basis: [SVector<T, 11>; 4],
    pub span: [SVector<T, 11>; 3],
    pub affine: SVector<T, 11>,
}

impl<T: Real> NullSpaceParam<T> {
    /// Rotates an orthonormal null basis so the trailing-element constraint
    /// can be eliminated. Fails when no null vector has a usable trailing
    /// element (the data cannot satisfy the inhomogeneous equation).
    pub fn from_basis(vectors: [SVector<T, 11>; 4]) -> Result<Self> {
        let alpha = Vector4::new(vectors[0][10], vectors[1][10], vectors[2][10], vectors[3][10]);
        let n = alpha.norm();
        if n < real(1e-10) {
            return Err(Error::RankDegenerate { gap_ratio: 0.0 });
        }
        // Householder mapping alpha to (0, 0, 0, +-n).
        let mut target = Vector4::zeros();
        target[3] = if alpha[3] >= T::zero() { n } else { -n };
        let u = alpha + target;
        let uu = u.norm_squared();
        let mut h = nalgebra::Matrix4::identity();
        if uu > T::zero() {
            h -= (u * u.transpose()) * (real::<T>(2.0) / uu);
        }
        // h * alpha = -target, so the rotated fourth vector has trailing
        // element -target[3]; dividing by it yields the affine vector.
        let mut rotated = [SVector::<T, 11>::zeros(); 4];
        for (j, out) in rotated.iter_mut().enumerate() {
            for (k, vec) in vectors.iter().enumerate() {
                *out += vec * h[(j, k)];
            }
        }
        let last = rotated[3][10];
        if last.abs() < real(1e-10) {
            return Err(Error::RankDegenerate { gap_ratio: 0.0 });
        }
        let affine = rotated[3] / last;
        let mut span = [rotated[0], rotated[1], rotated[2]];
        for s in span.iter_mut() {
            s[10] = T::zero(); // exact zero instead of rounding residue
        }
        Ok(Self { basis: vectors, span, affine })
    }

    /// `y = b1 span0 + b2 span1 + b3 span2 + affine`.
    pub fn combine(&self, beta: &Vector3<T>) -> SVector<T, 11> {
        self.span[0] * beta.x + self.span[1] * beta.y + self.span[2] * beta.z + self.affine
    }
}

/// One candidate parameter set from an inner solve.
#[derive(Debug, Clone)]
pub struct CandidateSolution<T: Real> {
    pub v: Vector3<T>,
    pub w: Vector3<T>,
    pub c0: Vector3<T>,
    pub t: Vector3<T>,
    pub q: T,
    pub f: T,
    pub lambda: T,
    /// Summed normalized double-linearized residual over the sample.
    pub residual: T,
    /// Normalized value of the dropped seventh first-row constraint.
    pub dropped_constraint_error: T,
}

impl<T: Real> CandidateSolution<T> {
    pub fn model(&self) -> RsCameraModel<T> {
        RsCameraModel {
            v: self.v,
            w: self.w,
            c0: self.c0,
            t: self.t,
            f: self.f,
            lambda: self.lambda,
            r0: T::zero(),
        }
    }
}

/// Which eigenvalue formulation the R7Pf inner solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GepVariant {
    /// 6x6 pencil over `[b1, b2, b3, C0z, tz, 1]`.
    #[default]
    Full6,
    /// Eliminate `C0z q` and `tz q` first, then solve a 4x4 pencil over
    /// `[b1, b2, b3, 1]`.
    Reduced4,
}

/// Per-correspondence coefficient rows of the projection equation after
/// scale elimination. `p1`/`p2`/`p3` are the three rows of
/// `[u]x diag(1,1,q) [A | C0 + r t] X` over `y` (with `C0z`, `tz` handled
/// separately for the third camera row, which is the only one they enter).
struct EqRows<T: Real> {
    p1: SVector<T, 11>,
    p2: SVector<T, 11>,
    /// y-part of the third camera row; its `C0z` coefficient is 1 and its
    /// `tz` coefficient is `r`.
    p3: SVector<T, 11>,
    r: T,
    c: T,
}

fn eq_rows<T: Real>(corr: &Correspondence<T>, v_hat: &Vector3<T>) -> EqRows<T> {
    let xt = corr.scene.coords();
    let g = xt + v_hat.cross(&xt);
    let r = corr.image.r;
    let c = corr.image.c;
    let mv = -skew(&xt); // coefficients of v in v x X
    let mw = -(skew(&g) * r); // coefficients of w in r (w x G)

    let mut p1 = SVector::<T, 11>::zeros();
    let mut p2 = SVector::<T, 11>::zeros();
    let mut p3 = SVector::<T, 11>::zeros();
    for j in 0..3 {
        p1[j] = mv[(0, j)];
        p2[j] = mv[(1, j)];
        p3[j] = mv[(2, j)];
        p1[3 + j] = mw[(0, j)];
        p2[3 + j] = mw[(1, j)];
        p3[3 + j] = mw[(2, j)];
    }
    p1[6] = T::one(); // C0x
    p2[7] = T::one(); // C0y
    p1[8] = r; // tx
    p2[9] = r; // ty
    p1[10] = xt.x;
    p2[10] = xt.y;
    p3[10] = xt.z;
    EqRows { p1, p2, p3, r, c }
}

/// 7x11 coefficient matrix of the third-row equations; contains no `q`.
pub fn build_row3_system<T: Real>(
    corrs: &[Correspondence<T>],
    v_hat: &Vector3<T>,
) -> Result<Row3Matrix<T>> {
    if corrs.len() != 7 {
        return Err(Error::InsufficientData { needed: 7, got: corrs.len() });
    }
    let mut m = Row3Matrix::zeros();
    for (i, corr) in corrs.iter().enumerate() {
        let rows = eq_rows(corr, v_hat);
        let row = rows.p2 * rows.r - rows.p1 * rows.c;
        m.set_row(i, &row.transpose());
    }
    Ok(m)
}

/// Null space of the third-row system, with the trailing-one constraint
/// already eliminated.
pub fn row3_nullspace<T: Real>(m: &Row3Matrix<T>) -> Result<NullSpaceParam<T>> {
    let dm = DMatrix::from_fn(7, 11, |i, j| m[(i, j)]);
    let ns = nullspace(&dm, 4)?;
    let mut basis = [SVector::<T, 11>::zeros(); 4];
    for (k, v) in ns.basis.iter().enumerate() {
        for i in 0..11 {
            basis[k][i] = v[i];
        }
    }
    NullSpaceParam::from_basis(basis)
}

/// Null-substituted linear forms feeding the first-row equation of one
/// correspondence: coefficients of `[b1, b2, b3, 1]` in the second camera
/// row (`a`) and in the y-part of the third camera row (`b`).
pub fn row1_support<T: Real>(
    corr: &Correspondence<T>,
    ns: &NullSpaceParam<T>,
    v_hat: &Vector3<T>,
) -> (Vector4<T>, Vector4<T>) {
    let rows = eq_rows(corr, v_hat);
    let a = Vector4::new(
        rows.p2.dot(&ns.span[0]),
        rows.p2.dot(&ns.span[1]),
        rows.p2.dot(&ns.span[2]),
        rows.p2.dot(&ns.affine),
    );
    let b = Vector4::new(
        rows.p3.dot(&ns.span[0]),
        rows.p3.dot(&ns.span[1]),
        rows.p3.dot(&ns.span[2]),
        rows.p3.dot(&ns.affine),
    );
    (a, b)
}

/// Coefficients of one first-row equation over the monomials
/// `[b1 q, b1, b2 q, b2, b3 q, b3, C0z q, tz q, q, 1]`.
pub fn row1_coeffs<T: Real>(
    corr: &Correspondence<T>,
    ns: &NullSpaceParam<T>,
    v_hat: &Vector3<T>,
) -> SVector<T, 10> {
    let (a, b) = row1_support(corr, ns, v_hat);
    let rows = eq_rows(corr, v_hat);
    let c = rows.c;
    let mut m = SVector::<T, 10>::zeros();
    m[0] = c * b[0]; // b1 q
    m[1] = -a[0]; // b1
    m[2] = c * b[1]; // b2 q
    m[3] = -a[1]; // b2
    m[4] = c * b[2]; // b3 q
    m[5] = -a[2]; // b3
    m[6] = c; // C0z q
    m[7] = c * rows.r; // tz q
    m[8] = c * b[3]; // q
    m[9] = -a[3]; // 1
    m
}

/// Evaluates a first-row coefficient vector at a candidate, normalized by
/// the coefficient norm.
fn eval_row1<T: Real>(m: &SVector<T, 10>, beta: &Vector3<T>, c0z: T, tz: T, q: T) -> T {
    let value = m[0] * beta.x * q
        + m[1] * beta.x
        + m[2] * beta.y * q
        + m[3] * beta.y
        + m[4] * beta.z * q
        + m[5] * beta.z
        + m[6] * c0z * q
        + m[7] * tz * q
        + m[8] * q
        + m[9];
    let norm = m.norm();
    if norm > T::zero() {
        value.abs() / norm
    } else {
        value.abs()
    }
}

/// Builds the 6x6 pencil `q A1 x = A0 x` over `x = [b1, b2, b3, C0z, tz, 1]`
/// from the first six correspondences.
pub fn build_gep<T: Real>(
    corrs: &[Correspondence<T>],
    ns: &NullSpaceParam<T>,
    v_hat: &Vector3<T>,
) -> (SMatrix<T, 6, 6>, SMatrix<T, 6, 6>) {
    let mut a0 = SMatrix::<T, 6, 6>::zeros();
    let mut a1 = SMatrix::<T, 6, 6>::zeros();
    for i in 0..6 {
        let m = row1_coeffs(&corrs[i], ns, v_hat);
        a1[(i, 0)] = m[0];
        a1[(i, 1)] = m[2];
        a1[(i, 2)] = m[4];
        a1[(i, 3)] = m[6];
        a1[(i, 4)] = m[7];
        a1[(i, 5)] = m[8];
        a0[(i, 0)] = -m[1];
        a0[(i, 1)] = -m[3];
        a0[(i, 2)] = -m[5];
        a0[(i, 5)] = -m[9];
    }
    (a0, a1)
}

/// Newton polish of `(beta, C0z, tz, q)` on the six first-row equations;
/// tightens the eigenvector extraction to machine precision.
fn refine_candidate<T: Real>(
    a0: &SMatrix<T, 6, 6>,
    a1: &SMatrix<T, 6, 6>,
    beta: &mut Vector3<T>,
    c0z: &mut T,
    tz: &mut T,
    q: &mut T,
) {
    for _ in 0..3 {
        let x = SVector::<T, 6>::from_column_slice(&[beta.x, beta.y, beta.z, *c0z, *tz, T::one()]);
        let f = a1 * x * *q - a0 * x;
        let mut jac = SMatrix::<T, 6, 6>::zeros();
        for col in 0..5 {
            for row in 0..6 {
                jac[(row, col)] = a1[(row, col)] * *q - a0[(row, col)];
            }
        }
        let dq = a1 * x;
        for row in 0..6 {
            jac[(row, 5)] = dq[row];
        }
        match jac.lu().solve(&(-f)) {
            Some(step) => {
                beta.x += step[0];
                beta.y += step[1];
                beta.z += step[2];
                *c0z += step[3];
                *tz += step[4];
                *q += step[5];
                if step.norm() < real::<T>(1e-15) * (T::one() + x.norm()) {
                    break;
                }
            }
            None => break,
        }
    }
}

/// Raw solutions of the six first-row equations: `(beta, C0z, tz, q)`.
fn gep_solutions<T: Real>(
    corrs: &[Correspondence<T>],
    ns: &NullSpaceParam<T>,
    v_hat: &Vector3<T>,
    variant: GepVariant,
) -> Result<Vec<(Vector3<T>, T, T, T)>> {
    let imag_tol = real::<T>(1e-8);
    let (a0f, a1f) = build_gep(corrs, ns, v_hat);
    let mut out = Vec::new();
    match variant {
        GepVariant::Full6 => {
            let d0 = DMatrix::from_fn(6, 6, |i, j| a0f[(i, j)]);
            let d1 = DMatrix::from_fn(6, 6, |i, j| a1f[(i, j)]);
            let pairs = solve_gep(&d0, &d1)?;
            for pair in pairs {
                if pair.value.im.abs() > imag_tol * pair.value.re.abs() {
                    continue;
                }
                let mut q = pair.value.re;
                let x = &pair.vector;
                let scale = x[5];
                if scale.norm_sqr() < real::<T>(1e-24) * x.norm_squared() {
                    continue;
                }
                let get = |i: usize| -> T { (x[i] / scale).re };
                let mut beta = Vector3::new(get(0), get(1), get(2));
                let (mut c0z, mut tz) = (get(3), get(4));
                refine_candidate(&a0f, &a1f, &mut beta, &mut c0z, &mut tz, &mut q);
                out.push((beta, c0z, tz, q));
            }
        }
        GepVariant::Reduced4 => {
            let mut rows = DMatrix::<T>::zeros(6, 10);
            for i in 0..6 {
                let m = row1_coeffs(&corrs[i], ns, v_hat);
                for j in 0..10 {
                    rows[(i, j)] = m[j];
                }
            }
            let gj = gauss_jordan_eliminate(&rows, &[6, 7])?;
            let mut a0 = DMatrix::<T>::zeros(4, 4);
            let mut a1 = DMatrix::<T>::zeros(4, 4);
            let mut k = 0;
            let mut free_rows = Vec::new();
            for i in 0..6 {
                if gj.pivot_rows.contains(&i) {
                    continue;
                }
                free_rows.push(i);
                let m = gj.reduced.row(i);
                a1[(k, 0)] = m[0];
                a1[(k, 1)] = m[2];
                a1[(k, 2)] = m[4];
                a1[(k, 3)] = m[8];
                a0[(k, 0)] = -m[1];
                a0[(k, 1)] = -m[3];
                a0[(k, 2)] = -m[5];
                a0[(k, 3)] = -m[9];
                k += 1;
            }
            let pairs = solve_gep(&a0, &a1)?;
            // Monomial evaluation order for back-substitution rows.
            let backsub = |row: nalgebra::RowDVector<T>, beta: &Vector3<T>, q: T, piv: usize| {
                // row . monomials = 0 with unit coefficient at `piv`.
                let mono = [
                    beta.x * q,
                    beta.x,
                    beta.y * q,
                    beta.y,
                    beta.z * q,
                    beta.z,
                    T::zero(),
                    T::zero(),
                    q,
                    T::one(),
                ];
                let mut s = T::zero();
                for j in 0..10 {
                    if j != piv {
                        s += row[j] * mono[j];
                    }
                }
                -s
            };
            for pair in pairs {
                if pair.value.im.abs() > imag_tol * pair.value.re.abs() {
                    continue;
                }
                let q = pair.value.re;
                if q == T::zero() {
                    continue;
                }
                let x = &pair.vector;
                let scale = x[3];
                if scale.norm_sqr() < real::<T>(1e-24) * x.norm_squared() {
                    continue;
                }
                let get = |i: usize| -> T { (x[i] / scale).re };
                let mut beta = Vector3::new(get(0), get(1), get(2));
                let c0zq = backsub(gj.reduced.row(gj.pivot_rows[0]).into_owned(), &beta, q, 6);
                let tzq = backsub(gj.reduced.row(gj.pivot_rows[1]).into_owned(), &beta, q, 7);
                let (mut c0z, mut tz, mut q) = (c0zq / q, tzq / q, q);
                refine_candidate(&a0f, &a1f, &mut beta, &mut c0z, &mut tz, &mut q);
                out.push((beta, c0z, tz, q));
            }
        }
    }
    Ok(out)
}

/// One inner R7Pf solve: all feasible candidates, sorted by residual.
pub fn solve_inner_r7pf<T: Real>(
    corrs: &[Correspondence<T>],
    v_hat: &Vector3<T>,
    variant: GepVariant,
) -> Result<Vec<CandidateSolution<T>>> {
    let m = build_row3_system(corrs, v_hat)?;
    let ns = row3_nullspace(&m)?;
    let raw = gep_solutions(corrs, &ns, v_hat, variant)?;
    let dropped_coeffs = row1_coeffs(&corrs[6], &ns, v_hat);

    let mut candidates = Vec::new();
    for (beta, c0z, tz, q) in raw {
        if !(q > T::zero()) || !q.is_finite() {
            continue;
        }
        let y = ns.combine(&beta);
        let cand = CandidateSolution {
            v: Vector3::new(y[0], y[1], y[2]),
            w: Vector3::new(y[3], y[4], y[5]),
            c0: Vector3::new(y[6], y[7], c0z),
            t: Vector3::new(y[8], y[9], tz),
            q,
            f: T::one() / q,
            lambda: T::zero(),
            residual: T::zero(),
            dropped_constraint_error: eval_row1(&dropped_coeffs, &beta, c0z, tz, q),
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
