//! Dense numerical linear algebra used by the solvers: null spaces,
//! Gauss-Jordan elimination, standard and generalized eigenproblems, and RQ
//! decomposition of projection matrices.
//!
//! Everything here targets small systems (at most 12x12 eigenproblems); the
//! routines favor robustness and determinism over asymptotic speed.

use nalgebra::{ComplexField, DMatrix, DVector, Matrix3, Matrix3x4, Vector3};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geom::RotationMatrix;
use crate::scalar::{real, Real};

/// Row-major dense matrix of scalars.
pub type DenseMatrix<T> = DMatrix<T>;

/// One eigenvalue/eigenvector pair, possibly complex.
#[derive(Debug, Clone)]
pub struct EigenPair<T: Real> {
    pub value: Complex<T>,
    pub vector: DVector<Complex<T>>,
}

/// Set of eigenpairs, sorted by (re, im) of the eigenvalue.
pub type EigenPairSet<T> = Vec<EigenPair<T>>;

/// Orthonormal basis of a numerical null space plus the singular-value gap
/// diagnostic that separates the kept null directions from the row space.
#[derive(Debug, Clone)]
pub struct Nullspace<T> {
    pub basis: Vec<DVector<T>>,
    pub gap_ratio: T,
}

/// Threshold on the singular-value gap ratio below which a configuration is
/// reported as degenerate.
pub const NULLSPACE_GAP_MIN: f64 = 10.0;

/// Orthonormal basis of the numerical null space of `m`, taken as the
/// `expected_dim` right-singular directions of smallest singular value.
///
/// The gap ratio is `s[k - d] / s[k - d + 1]` (1-based, `k` = column count,
/// singular values extended by zeros and sorted descending); a small ratio
/// means the matrix does not cleanly have an `expected_dim`-dimensional null
/// space and the configuration is degenerate for the caller.
pub fn nullspace<T: Real>(m: &DenseMatrix<T>, expected_dim: usize) -> Result<Nullspace<T>> {
    let (rows, cols) = m.shape();
    assert!(expected_dim >= 1 && expected_dim <= cols, "bad expected_dim");

    let scale = m.amax();
    if scale == T::zero() {
        // All-zero input: any orthonormal set spans the null space.
        let basis = (0..expected_dim)
            .map(|i| DVector::from_fn(cols, |j, _| if j == cols - 1 - i { T::one() } else { T::zero() }))
            .collect();
        return Ok(Nullspace { basis, gap_ratio: real(f64::INFINITY) });
    }

    // Pad wide matrices with zero rows: the SVD of the square matrix yields
    // the full set of right-singular vectors, which a thin SVD would not.
    let work = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };

    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
    });

    // Full singular spectrum over all `cols` directions, descending.
    let sv = |i: usize| -> T {
        if i < order.len() { svd.singular_values[order[i]] } else { T::zero() }
    };
    let split = cols - expected_dim;
    let floor = T::default_epsilon() * scale * real(rows.max(cols) as f64);
    let gap_ratio = if split == 0 {
        real(f64::INFINITY)
    } else {
        sv(split - 1) / sv(split).max(floor)
    };
    if gap_ratio < real(NULLSPACE_GAP_MIN) {
        return Err(Error::RankDegenerate {
            gap_ratio: gap_ratio.to_subset().unwrap_or(f64::NAN),
        });
    }

    let basis = order[split..]
        .iter()
        .map(|&i| v_t.row(i).transpose())
        .collect();
    Ok(Nullspace { basis, gap_ratio })
}

/// Result of [`gauss_jordan_eliminate`]: the reduced matrix and, for each
/// requested pivot column, the row that now holds its unit entry.
#[derive(Debug, Clone)]
pub struct GaussJordan<T> {
    pub reduced: DenseMatrix<T>,
    pub pivot_rows: Vec<usize>,
}

/// Gauss-Jordan elimination on the given pivot columns with partial
/// pivoting: in the reduced matrix those columns form an identity block and
/// every other row has zeros there.
pub fn gauss_jordan_eliminate<T: Real>(
    a: &DenseMatrix<T>,
    pivot_cols: &[usize],
) -> Result<GaussJordan<T>> {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    assert!(pivot_cols.iter().all(|&c| c < cols), "pivot column out of range");
    assert!(pivot_cols.len() <= rows, "more pivots than rows");

    let mut used = vec![false; rows];
    let mut pivot_rows = Vec::with_capacity(pivot_cols.len());
    for &col in pivot_cols {
        let mut best_row = None;
        let mut best_val = T::zero();
        for r in 0..rows {
            if used[r] {
                continue;
            }
            let v = m[(r, col)].abs();
            if v > best_val {
                best_val = v;
                best_row = Some(r);
            }
        }
        let r = best_row.ok_or(Error::PivotSingular)?;
        let row_norm = m.row(r).norm();
        if best_val < real::<T>(1e-12) * row_norm || row_norm == T::zero() {
            return Err(Error::PivotSingular);
        }
        used[r] = true;
        pivot_rows.push(r);
        let inv = T::one() / m[(r, col)];
        for c in 0..cols {
            m[(r, c)] *= inv;
        }
        for rr in 0..rows {
            if rr == r {
                continue;
            }
            let factor = m[(rr, col)];
            if factor != T::zero() {
                for c in 0..cols {
                    let sub = factor * m[(r, c)];
                    m[(rr, c)] -= sub;
                }
                m[(rr, col)] = T::zero();
            }
        }
    }
    Ok(GaussJordan { reduced: m, pivot_rows })
}

fn to_complex<T: Real>(a: &DMatrix<T>) -> DMatrix<Complex<T>> {
    a.map(|x| Complex::new(x, T::zero()))
}

/// Deterministic dense unit vector used to seed inverse iteration.
fn seed_vector<T: Real>(n: usize) -> DVector<Complex<T>> {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut v = DVector::from_element(n, Complex::new(T::zero(), T::zero()));
    for i in 0..n {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let re = ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let im = ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        v[i] = Complex::new(real(re), real(im));
    }
    let norm = v.norm();
    v / Complex::new(norm, T::zero())
}

/// Eigenvector for a known approximate eigenvalue by shifted inverse
/// iteration with a Rayleigh-quotient update. Returns the refined pair and
/// its defining-equation residual relative to `scale`.
fn inverse_iteration<T: Real>(
    a: &DMatrix<Complex<T>>,
    value: Complex<T>,
    scale: T,
) -> Option<(Complex<T>, DVector<Complex<T>>, T)> {
    let n = a.nrows();
    let mut lambda = value;
    let mut x = seed_vector::<T>(n);
    let mut best: Option<(Complex<T>, DVector<Complex<T>>, T)> = None;
    let mut delta = scale * real::<T>(1e-12) + real(1e-300);
    for _attempt in 0..4 {
        let shift = lambda + Complex::new(delta, delta);
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let lu = m.lu();
        let mut improved = false;
        for _ in 0..3 {
            if let Some(y) = lu.solve(&x) {
                let nrm = y.norm();
                if !nrm.is_finite() || nrm == T::zero() {
                    break;
                }
                x = y / Complex::new(nrm, T::zero());
                // Rayleigh quotient for a unit vector.
                let ax = a * &x;
                let rq = x.dotc(&ax);
                let residual = (&ax - &x * rq).norm() / (scale + rq.modulus());
                if best.as_ref().map_or(true, |(_, _, r)| residual < *r) {
                    best = Some((rq, x.clone(), residual));
                    improved = true;
                }
                lambda = rq;
            } else {
                break;
            }
        }
        if let Some((_, _, r)) = &best {
            if *r < T::default_epsilon() * real(100.0) {
                break;
            }
        }
        if !improved {
            delta *= real(1000.0);
        }
    }
    best
}

/// Eigenvalues of a real quasi-triangular (Schur) matrix, read off its 1x1
/// and 2x2 diagonal blocks. Computing them here avoids NaNs that the
/// upstream eigenvalue extraction produces on (nearly) repeated real pairs.
fn quasi_triangular_eigenvalues<T: Real>(t: &DMatrix<T>) -> Vec<Complex<T>> {
    let n = t.nrows();
    let scale = t.amax();
    let tol = T::default_epsilon() * scale * real(16.0);
    let mut values = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let coupled = i + 1 < n && t[(i + 1, i)].abs() > tol;
        if !coupled {
            values.push(Complex::new(t[(i, i)], T::zero()));
            i += 1;
            continue;
        }
        let (a, b) = (t[(i, i)], t[(i, i + 1)]);
        let (c, d) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half_tr = (a + d) * real(0.5);
        let disc = (a - d) * (a - d) * real(0.25) + b * c;
        if disc >= T::zero() {
            let s = disc.sqrt();
            values.push(Complex::new(half_tr + s, T::zero()));
            values.push(Complex::new(half_tr - s, T::zero()));
        } else {
            let s = (-disc).sqrt();
            values.push(Complex::new(half_tr, s));
            values.push(Complex::new(half_tr, -s));
        }
        i += 2;
    }
    values
}

/// Relative residual bound accepted for eigenpairs.
const EIG_RESIDUAL_REL: f64 = 1e-8;

/// Standard eigendecomposition of a small real matrix, complex pairs
/// included. Eigenvalues come from the real Schur form; eigenvectors from
/// shifted inverse iteration.
pub fn eig<T: Real>(a: &DenseMatrix<T>) -> Result<EigenPairSet<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eig needs a square matrix");
    let scale = a.amax();
    if scale == T::zero() {
        return Ok((0..n)
            .map(|i| EigenPair {
                value: Complex::new(T::zero(), T::zero()),
                vector: DVector::from_fn(n, |j, _| {
                    Complex::new(if i == j { T::one() } else { T::zero() }, T::zero())
                }),
            })
            .collect());
    }

    let schur = nalgebra::linalg::Schur::try_new(a.clone(), T::default_epsilon(), 10_000)
        .ok_or(Error::EigenFailure)?;
    let (_, t) = schur.unpack();
    let values = quasi_triangular_eigenvalues(&t);

    let ac = to_complex(a);
    let mut pairs = Vec::with_capacity(n);
    for &value in values.iter() {
        let (v, x, res) = inverse_iteration(&ac, value, scale).ok_or(Error::EigenFailure)?;
        if res > real(EIG_RESIDUAL_REL) {
            return Err(Error::EigenFailure);
        }
        pairs.push(EigenPair { value: v, vector: x });
    }
    sort_pairs(&mut pairs);
    Ok(pairs)
}

fn sort_pairs<T: Real>(pairs: &mut [EigenPair<T>]) {
    pairs.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .expect("finite eigenvalues")
    });
}

/// Shifts tried when reducing the pencil `A0 - sigma A1` to an invertible
/// matrix; scaled by the norm ratio of the two matrices.
const GEP_SHIFTS: [f64; 9] = [0.0, 1.0, -1.0, 0.5, -0.5, 2.0, -2.0, 0.318309886, 3.14159265];

/// All finite generalized eigenvalues `q` and eigenvectors `x` with
/// `A0 x = q A1 x`, via shift-and-invert reduction to a standard
/// eigenproblem. Infinite eigenvalues (null directions of `A1`) are
/// discarded.
pub fn solve_gep<T: Real>(
    a0: &DenseMatrix<T>,
    a1: &DenseMatrix<T>,
) -> Result<EigenPairSet<T>> {
    let n = a0.nrows();
    assert_eq!(a0.shape(), a1.shape(), "pencil matrices must match");
    assert_eq!(n, a0.ncols(), "pencil matrices must be square");
    let s0 = a0.amax();
    let s1 = a1.amax();
    if s1 == T::zero() {
        return Err(Error::EigenFailure);
    }
    let rho = (s0 / s1).max(T::default_epsilon());

    // Find a shift making A0 - sigma A1 comfortably invertible.
    let mut reduced = None;
    for &base in GEP_SHIFTS.iter() {
        let sigma = real::<T>(base) * rho;
        let shifted = a0 - a1 * sigma;
        let lu = shifted.lu();
        let u = lu.u();
        let mut dmin = T::max_value().unwrap();
        let mut dmax = T::zero();
        for i in 0..n {
            let d = u[(i, i)].abs();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if dmax > T::zero() && dmin > real::<T>(1e-10) * dmax {
            if let Some(b) = lu.solve(a1) {
                reduced = Some((sigma, b));
                break;
            }
        }
    }
    let (sigma, b) = reduced.ok_or(Error::EigenFailure)?;

    let theta_pairs = eig(&b)?;
    let a0c = to_complex(a0);
    let a1c = to_complex(a1);
    let inf_tol = real::<T>(1e-12) * (T::one() + b.amax());
    let mut out = Vec::new();
    for pair in theta_pairs {
        if pair.value.modulus() <= inf_tol {
            continue; // q -> infinity
        }
        let q = Complex::new(sigma, T::zero()) + pair.value.inv();
        let mut x = pair.vector;
        let mut qv = q;
        // One generalized inverse-iteration step plus a Rayleigh update
        // tightens the pair on the pencil itself.
        for _ in 0..2 {
            let mut m = &a0c - &a1c * qv;
            let delta = (s0 + qv.modulus() * s1) * real::<T>(1e-14) + real(1e-300);
            for i in 0..n {
                m[(i, i)] += Complex::new(delta, delta);
            }
            if let Some(y) = m.lu().solve(&(&a1c * &x)) {
                let nrm = y.norm();
                if nrm.is_finite() && nrm > T::zero() {
                    x = y / Complex::new(nrm, T::zero());
                }
            }
            let num = x.dotc(&(&a0c * &x));
            let den = x.dotc(&(&a1c * &x));
            if den.modulus() > real::<T>(1e-300) {
                qv = num / den;
            }
        }
        let residual = (&a0c * &x - (&a1c * &x) * qv).norm() / x.norm();
        let bound = real::<T>(EIG_RESIDUAL_REL) * (s0 + qv.modulus() * s1);
        if residual < bound {
            out.push(EigenPair { value: qv, vector: x });
        }
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// RQ decomposition of a 3x4 projection matrix into `K [R | -R C]` with an
/// upper-triangular `K` (positive diagonal, `K[2,2] = 1`), a rotation `R`
/// and the camera center `C`. The overall sign is fixed so points with
/// positive depth project with a positive third homogeneous coordinate.
pub fn rq_decompose<T: Real>(
    p: &Matrix3x4<T>,
) -> Result<(Matrix3<T>, RotationMatrix<T>, Vector3<T>)> {
    let mut p = *p;
    let m = p.fixed_view::<3, 3>(0, 0).into_owned();
    let norm = m.norm();
    if norm == T::zero() || m.determinant().abs() < real::<T>(1e-12) * norm.powi(3) {
        return Err(Error::SingularCalibration);
    }
    if m.determinant() < T::zero() {
        p = -p;
    }
    let mut k = p.fixed_view::<3, 3>(0, 0).into_owned();
    let mut r = Matrix3::identity();

    // Right-multiply by Givens rotations to zero the subdiagonal of K.
    // (row, col zeroed, col kept)
    for &(row, ct, ck) in &[(2usize, 1usize, 2usize), (2, 0, 2), (1, 0, 1)] {
        let a = k[(row, ck)];
        let b = k[(row, ct)];
        let h = (a * a + b * b).sqrt();
        if h == T::zero() {
            return Err(Error::SingularCalibration);
        }
        // (K G)[row, ct] = s a + c b = 0 with c = a/h, s = -b/h.
        let (c, s) = (a / h, -(b / h));
        let mut g = Matrix3::identity();
        g[(ck, ck)] = c;
        g[(ct, ct)] = c;
        g[(ck, ct)] = s;
        g[(ct, ck)] = -s;
        k *= g;
        k[(row, ct)] = T::zero(); // exact zero instead of rounding residue
        r = g.transpose() * r;
    }

    // Make the diagonal of K positive. det(K) > 0 guarantees an even number
    // of sign flips, so R stays a proper rotation.
    let mut d = Matrix3::identity();
    for i in 0..3 {
        if k[(i, i)] < T::zero() {
            d[(i, i)] = -T::one();
        } else if k[(i, i)] == T::zero() {
            return Err(Error::SingularCalibration);
        }
    }
    k *= d;
    r = d * r;

    let k_inv = k.try_inverse().ok_or(Error::SingularCalibration)?;
    let trans = k_inv * p.column(3).into_owned();
    let center = -(r.transpose() * trans);
    let k22 = k[(2, 2)];
    if k22 <= T::zero() {
        return Err(Error::SingularCalibration);
    }
    Ok((k / k22, RotationMatrix::new_unchecked(r), center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation_exp;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn dmat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn nullspace_zero_matrix_bypasses_gap() {
        let m = DMatrix::<f64>::zeros(7, 11);
        let ns = nullspace(&m, 4).unwrap();
        assert_eq!(ns.basis.len(), 4);
        assert!(ns.gap_ratio.is_infinite());
        for (i, a) in ns.basis.iter().enumerate() {
            for (j, b) in ns.basis.iter().enumerate() {
                let dot = a.dot(b);
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_basis_annihilates_matrix() {
        // Random-ish full-rank 7x11: exact 4-dim kernel.
        let mut data = Vec::with_capacity(77);
        let mut s = 1u64;
        for _ in 0..77 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.push(((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5);
        }
        let m = dmat(7, 11, &data);
        let ns = nullspace(&m, 4).unwrap();
        assert_eq!(ns.basis.len(), 4);
        let scale = m.amax();
        for v in &ns.basis {
            assert!((&m * v).norm() < 1e-10 * scale);
        }
        for (i, a) in ns.basis.iter().enumerate() {
            for (j, b) in ns.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(a.dot(b), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_duplicate_rows_degenerate() {
        let mut data = Vec::with_capacity(77);
        let mut s = 3u64;
        for _ in 0..77 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.push(((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5);
        }
        let mut m = dmat(7, 11, &data);
        let dup = m.row(0).into_owned();
        m.set_row(6, &dup);
        assert!(matches!(nullspace(&m, 4), Err(Error::RankDegenerate { .. })));
    }

    #[test]
    fn gauss_jordan_identity_passthrough() {
        let id = DMatrix::<f64>::identity(5, 5);
        let gj = gauss_jordan_eliminate(&id, &[0, 1, 2, 3, 4]).unwrap();
        assert_relative_eq!(gj.reduced, id, epsilon = 1e-15);
    }

    #[test]
    fn gauss_jordan_dependent_pivots_singular() {
        // Two identical pivot columns cannot both be eliminated.
        let m = dmat(3, 4, &[
            1.0, 1.0, 2.0, 3.0,
            2.0, 2.0, 5.0, 7.0,
            3.0, 3.0, 1.0, 2.0,
        ]);
        assert!(matches!(
            gauss_jordan_eliminate(&m, &[0, 1]),
            Err(Error::PivotSingular)
        ));
    }

    #[test]
    fn gauss_jordan_builds_identity_block() {
        let m = dmat(3, 5, &[
            2.0, 1.0, 0.5, 1.0, -1.0,
            1.0, 3.0, 2.0, 0.0, 4.0,
            0.5, -1.0, 1.5, 2.0, 1.0,
        ]);
        let gj = gauss_jordan_eliminate(&m, &[0, 1]).unwrap();
        for (i, &col) in [0usize, 1].iter().enumerate() {
            let pr = gj.pivot_rows[i];
            assert_relative_eq!(gj.reduced[(pr, col)], 1.0, epsilon = 1e-14);
            for r in 0..3 {
                if r != pr {
                    assert_relative_eq!(gj.reduced[(r, col)], 0.0, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn eig_identity() {
        let pairs = eig(&DMatrix::<f64>::identity(4, 4)).unwrap();
        assert_eq!(pairs.len(), 4);
        for p in &pairs {
            assert_relative_eq!(p.value.re, 1.0, epsilon = 1e-10);
            assert_relative_eq!(p.value.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eig_companion_roots() {
        // Companion of (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6.
        let m = dmat(3, 3, &[
            6.0, -11.0, 6.0,
            1.0, 0.0, 0.0,
            0.0, 1.0, 0.0,
        ]);
        let pairs = eig(&m).unwrap();
        let mut roots: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(roots[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(roots[1], 2.0, epsilon = 1e-8);
        assert_relative_eq!(roots[2], 3.0, epsilon = 1e-8);
        for p in &pairs {
            assert!(p.value.im.abs() < 1e-8);
        }
    }

    #[test]
    fn eig_symmetric_real_spectrum() {
        let mut s = 17u64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let a = DMatrix::<f64>::from_fn(5, 5, |_, _| rnd());
            let sym = (&a + a.transpose()) * 0.5;
            let pairs = eig(&sym).unwrap();
            for p in &pairs {
                assert!(p.value.im.abs() < 1e-10, "imag {}", p.value.im);
            }
        }
    }

    #[test]
    fn gep_identity_reduces_to_eig() {
        let a0 = dmat(3, 3, &[2.0, 1.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0, 5.0]);
        let a1 = DMatrix::<f64>::identity(3, 3);
        let pairs = solve_gep(&a0, &a1).unwrap();
        let mut vals: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(vals[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(vals[1], 3.0, epsilon = 1e-9);
        assert_relative_eq!(vals[2], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn gep_diagonal_ratios() {
        let a0 = DMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![2.0, 6.0, -3.0]));
        let a1 = DMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let pairs = solve_gep(&a0, &a1).unwrap();
        let mut vals: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-9);
        assert_relative_eq!(vals[2], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn gep_discards_infinite_eigenvalues() {
        // A1 singular: one eigenvalue escapes to infinity.
        let a0 = dmat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let a1 = dmat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let pairs = solve_gep(&a0, &a1).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_relative_eq!(pairs[0].value.re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rq_identity_projection() {
        let p = Matrix3x4::<f64>::from_row_slice(&[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        ]);
        let (k, r, c) = rq_decompose(&p).unwrap();
        assert_relative_eq!(k, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(c, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn rq_compose_decompose_roundtrip() {
        let k_true = Matrix3::new(
            1.4, 0.0, 0.0,
            0.0, 1.4, 0.0,
            0.0, 0.0, 1.0,
        );
        let r_true = rotation_exp(&Vector3::new(0.3, -0.5, 0.8));
        let c_true = Vector3::new(0.4, -1.2, 2.0);
        let mut p = Matrix3x4::zeros();
        let krc = k_true * r_true.matrix();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&krc);
        let t = -(k_true * r_true.matrix() * c_true);
        p.set_column(3, &t);
        // Scale the whole matrix; decomposition must undo it.
        let p = p * -2.5;
        let (k, r, c) = rq_decompose(&p).unwrap();
        assert_relative_eq!(k, k_true, epsilon = 1e-10);
        assert_relative_eq!(*r.matrix(), *r_true.matrix(), epsilon = 1e-10);
        assert_relative_eq!(c, c_true, epsilon = 1e-10);
    }

    #[test]
    fn rq_zero_block_singular() {
        let mut p = Matrix3x4::<f64>::zeros();
        p[(0, 3)] = 1.0;
        assert!(matches!(rq_decompose(&p), Err(Error::SingularCalibration)));
    }
}
