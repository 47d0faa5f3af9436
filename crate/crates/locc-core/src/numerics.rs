//! Dense complex linear algebra primitives with an explicit tolerance policy.
//!
//! Matrix storage and decompositions are delegated to `nalgebra`; this module
//! owns the conventions the rest of the crate depends on:
//!
//! - tensor products place party 0 outermost (most significant index);
//! - matrices vectorize row-major;
//! - rank decisions are relative to the largest singular value, so they are
//!   invariant under the uniform subtree rescalings performed while pruning;
//! - dependency search among Hermitian matrices runs over a *real*
//!   parameterization, so the returned coefficients are real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, the universal numeric carrier.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = DVector<Complex64>;

/// Tolerance policy shared by every operation in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank decisions.
    pub tol_rank: f64,
    /// Eigenvalue floor below which a Hermitian matrix is rejected as non-PSD.
    pub tol_psd: f64,
    /// Entrywise / Frobenius equality tolerance.
    pub tol_eq: f64,
    /// Weight floor below which a rescaled subtree is dropped entirely.
    pub tol_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_rank: 1e-9,
            tol_psd: 1e-10,
            tol_eq: 1e-8,
            tol_zero: 1e-12,
        }
    }
}

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Complex number from real part.
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// n x n identity.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance between two matrices of equal shape.
pub fn frob_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Hilbert-Schmidt inner product Tr(a^H b).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Max entrywise deviation from Hermiticity, max |M - M^H|.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// (M + M^H) / 2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Row-major vectorization: vec(M)[r * cols + c] = M[r, c].
pub fn vec_row_major(m: &CMatrix) -> CVector {
    let (rows, cols) = m.shape();
    CVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

/// Inverse of [`vec_row_major`].
pub fn unvec_row_major(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols, "unvec size mismatch");
    CMatrix::from_fn(rows, cols, |r, c| v[r * cols + c])
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
///
/// The input is hermitized first; each eigenvector's phase is fixed so its
/// largest-magnitude entry is real and positive.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    let herm = hermitize(m);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let mut values = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        vectors.push(canonical_phase(&eig.eigenvectors.column(k).into_owned()));
    }
    (values, vectors)
}

/// Rotate a vector's global phase so its largest-magnitude entry is real positive.
pub fn canonical_phase(v: &CVector) -> CVector {
    let mut best = 0usize;
    let mut best_norm = 0.0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best_norm {
            best_norm = z.norm();
            best = k;
        }
    }
    if best_norm == 0.0 {
        return v.clone();
    }
    let phase = v[best] / re(v[best].norm());
    v.map(|z| z * phase.conj())
}

/// Singular values of `m` (unordered).
fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Number of singular values exceeding `tol_rank` relative to the largest.
///
/// The zero matrix has rank 0.
pub fn numerical_rank(m: &CMatrix, tol: &Tolerances) -> usize {
    assert!(m.nrows() > 0 && m.ncols() > 0, "rank of empty matrix");
    let sv = singular_values(m);
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.tol_rank * s_max).count()
}

/// Real parameterization of a Hermitian n x n matrix as an n^2 real vector.
///
/// Diagonal entries map to their real parts; each off-diagonal pair (i < j)
/// maps to sqrt(2) Re M_ij and sqrt(2) Im M_ij. The map is an isometry for the
/// Hilbert-Schmidt inner product, so rank and kernel computations transfer.
fn hermitian_real_params(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(sqrt2 * m[(i, j)].re);
            out.push(sqrt2 * m[(i, j)].im);
        }
    }
    out
}

/// Basis of vanishing linear combinations of the given matrices.
///
/// The inputs are interpreted as vectors; the result is a basis (possibly
/// empty) of `{a : sum_s a_s M_s = 0}`. When every input is Hermitian within
/// `tol_eq` the dependency search runs over the real parameterization and the
/// returned coefficients are exactly real; otherwise the complex entries are
/// used and the coefficients may be complex. Vectors are unit-norm with the
/// largest-magnitude entry made real positive.
pub fn kernel_basis(mats: &[CMatrix], tol: &Tolerances) -> Result<Vec<CVector>> {
    if mats.is_empty() {
        return Ok(Vec::new());
    }
    let shape = mats[0].shape();
    if mats.iter().any(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch(
            "kernel_basis inputs must share a shape".into(),
        ));
    }
    let all_hermitian = shape.0 == shape.1
        && mats.iter().all(|m| hermitian_deviation(m) <= tol.tol_eq);
    if all_hermitian {
        let rows: Vec<Vec<f64>> = mats.iter().map(hermitian_real_params).collect();
        Ok(real_row_kernel(&rows, tol)
            .into_iter()
            .map(|v| canonical_phase(&v.map(re)))
            .collect())
    } else {
        let rows: Vec<CVector> = mats.iter().map(vec_row_major).collect();
        Ok(complex_row_kernel(&rows, tol))
    }
}

/// Kernel of the row-stacked real matrix: vectors a with sum_s a_s rows[s] = 0.
fn real_row_kernel(rows: &[Vec<f64>], tol: &Tolerances) -> Vec<DVector<f64>> {
    let k = rows.len();
    let m = rows[0].len().max(k); // pad columns so the left basis is complete
    let stacked = DMatrix::<f64>::from_fn(k, m, |r, c| {
        if c < rows[r].len() {
            rows[r][c]
        } else {
            0.0
        }
    });
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    let mut kernel = Vec::new();
    for i in 0..sv.len() {
        if sv[i] <= tol.tol_rank * s_max {
            kernel.push(u.column(i).into_owned());
        }
    }
    kernel
}

/// Complex analogue of [`real_row_kernel`]; kernel vectors are conjugated left
/// singular vectors of the stacked matrix.
fn complex_row_kernel(rows: &[CVector], tol: &Tolerances) -> Vec<CVector> {
    let k = rows.len();
    let m = rows[0].len().max(k);
    let stacked = CMatrix::from_fn(k, m, |r, c| if c < rows[r].len() { rows[r][c] } else { ZERO });
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    let mut kernel = Vec::new();
    for i in 0..sv.len() {
        if sv[i] <= tol.tol_rank * s_max {
            kernel.push(canonical_phase(&u.column(i).map(|z| z.conj())));
        }
    }
    kernel
}

/// Whether `m` is Hermitian within `tol_eq` with eigenvalues >= -tol_psd.
pub fn is_psd(m: &CMatrix, tol: &Tolerances) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if hermitian_deviation(m) > tol.tol_eq {
        return Ok(false);
    }
    Ok(min_eigenvalue(m) >= -tol.tol_psd)
}

/// Smallest eigenvalue of the hermitized input.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Kronecker product; the left factor is the outer (most significant) index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list, party 0 outermost.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut it = factors.iter();
    let first = it.next().expect("kron_all of empty list").clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Mixed-radix index decomposition/recomposition for a fixed dimension list,
/// party 0 outermost.
struct PartyIndex {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl PartyIndex {
    fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Self {
            dims: dims.to_vec(),
            strides,
        }
    }

    fn digit(&self, global: usize, party: usize) -> usize {
        (global / self.strides[party]) % self.dims[party]
    }

    /// Collapse all parties except `party` into one index, preserving order.
    fn rest_index(&self, global: usize, party: usize) -> usize {
        let mut idx = 0;
        for k in 0..self.dims.len() {
            if k != party {
                idx = idx * self.dims[k] + self.digit(global, k);
            }
        }
        idx
    }
}

/// Try to split `e` as (local on `party`) tensor (rest on all other parties).
///
/// The operator is realigned across the cut into a d^2 x (D/d)^2 matrix whose
/// rank is 1 exactly when `e` is a product across that cut. On success the
/// factors are normalized so that trace(rest) = 1, the local factor absorbing
/// the scale. Returns `None` when the cut rank differs from 1 or the rest
/// factor is traceless (the normalization convention is then unrealizable).
pub fn factor_across_cut(
    e: &CMatrix,
    party: usize,
    dims: &[usize],
    tol: &Tolerances,
) -> Result<Option<(CMatrix, CMatrix)>> {
    let total: usize = dims.iter().product();
    if e.nrows() != total || e.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but dims {:?} give D = {}",
            e.nrows(),
            e.ncols(),
            dims,
            total
        )));
    }
    if party >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "party {} out of range for {} parties",
            party,
            dims.len()
        )));
    }
    let d = dims[party];
    let d_rest = total / d;
    let index = PartyIndex::new(dims);
    let mut realigned = CMatrix::zeros(d * d, d_rest * d_rest);
    for r in 0..total {
        let (ra, rr) = (index.digit(r, party), index.rest_index(r, party));
        for c in 0..total {
            let (ca, cr) = (index.digit(c, party), index.rest_index(c, party));
            realigned[(ra * d + ca, rr * d_rest + cr)] = e[(r, c)];
        }
    }
    let sv = realigned.clone().svd(false, false).singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));
    let s0 = sv[order[0]];
    if s0 == 0.0 {
        return Ok(None); // zero operator: cut rank 0
    }
    if order.len() > 1 && sv[order[1]] > tol.tol_rank * s0 {
        return Ok(None); // cut rank >= 2
    }
    // Rank one: read the factors off the realignment directly. The dominant
    // column is the local vector up to scale; projecting every column onto it
    // recovers the rest vector with consistent phases.
    let mut best_col = 0;
    let mut best_norm = 0.0;
    for q in 0..realigned.ncols() {
        let n = realigned.column(q).norm();
        if n > best_norm {
            best_norm = n;
            best_col = q;
        }
    }
    let w = realigned.column(best_col).into_owned();
    let w_sq = re(w.norm_squared());
    let z = CVector::from_fn(realigned.ncols(), |q, _| {
        w.dotc(&realigned.column(q).into_owned()) / w_sq
    });
    let local_raw = unvec_row_major(&w, d, d);
    let rest_raw = unvec_row_major(&z, d_rest, d_rest);
    let t = rest_raw.diagonal().sum();
    if t.norm() <= tol.tol_rank * frobenius(&rest_raw) * (d_rest as f64).sqrt() {
        return Ok(None);
    }
    Ok(Some((local_raw * t, rest_raw / t)))
}

/// Reassemble a full-space operator from a local factor on `party` and a rest
/// factor on the remaining parties in their original order.
pub fn embed_cut_factors(
    local: &CMatrix,
    rest: &CMatrix,
    party: usize,
    dims: &[usize],
) -> CMatrix {
    let total: usize = dims.iter().product();
    let index = PartyIndex::new(dims);
    CMatrix::from_fn(total, total, |r, c| {
        let (ra, rr) = (index.digit(r, party), index.rest_index(r, party));
        let (ca, cr) = (index.digit(c, party), index.rest_index(c, party));
        local[(ra, ca)] * rest[(rr, cr)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rand_cmatrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn rand_cvector(rng: &mut ChaCha12Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    /// Row-reduction rank oracle: Gaussian elimination with partial pivoting.
    fn row_reduction_rank(m: &CMatrix, tol: f64) -> usize {
        let mut a = m.clone();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let (rows, cols) = a.shape();
        let mut rank = 0;
        let mut col = 0;
        while rank < rows && col < cols {
            let pivot = (rank..rows).max_by(|&i, &j| {
                a[(i, col)].norm().partial_cmp(&a[(j, col)].norm()).unwrap()
            });
            let pivot = pivot.unwrap();
            if a[(pivot, col)].norm() <= tol * scale {
                col += 1;
                continue;
            }
            a.swap_rows(rank, pivot);
            for i in (rank + 1)..rows {
                let f = a[(i, col)] / a[(rank, col)];
                for j in col..cols {
                    let sub = f * a[(rank, j)];
                    a[(i, j)] -= sub;
                }
            }
            rank += 1;
            col += 1;
        }
        rank
    }

    #[test]
    fn rank_of_identity_is_full() {
        let tol = Tolerances::default();
        assert_eq!(numerical_rank(&identity(2), &tol), 2);
    }

    #[test]
    fn rank_of_outer_product_is_one() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let v = rand_cvector(&mut rng, 4);
        let outer = &v * v.adjoint();
        assert_eq!(numerical_rank(&outer, &tol), 1);
    }

    #[test]
    fn rank_matches_row_reduction_oracle_on_dependent_rows() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let r = rand_cvector(&mut rng, 3);
        let m = CMatrix::from_fn(3, 3, |i, j| match i {
            0 => r[j],
            1 => r[j] * re(2.0),
            _ => r[j] * re(3.0), // r + 2r
        });
        let oracle = row_reduction_rank(&m, 1e-10);
        assert_eq!(oracle, 1);
        assert_eq!(numerical_rank(&m, &tol), oracle);
    }

    #[test]
    fn kernel_of_duplicate_inputs() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let g = rand_cmatrix(&mut rng, 3, 3);
        let c = hermitize(&(&g * g.adjoint()));
        let kernel = kernel_basis(&[c.clone(), c.clone()], &tol).unwrap();
        assert_eq!(kernel.len(), 1);
        let a = &kernel[0];
        // proportional to (1, -1)
        assert!((a[0] + a[1]).norm() < 1e-12);
        assert!(a.iter().all(|z| z.im == 0.0), "Hermitian path gives real coefficients");
    }

    #[test]
    fn kernel_of_orthogonal_supports_is_empty() {
        let tol = Tolerances::default();
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, ONE]));
        assert!(kernel_basis(&[a, b], &tol).unwrap().is_empty());
    }

    #[test]
    fn kernel_detects_midpoint_combination() {
        // Oracle: explicit substitution of the expected coefficients.
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let c1 = {
            let g = rand_cmatrix(&mut rng, 3, 3);
            hermitize(&(&g * g.adjoint()))
        };
        let c2 = {
            let g = rand_cmatrix(&mut rng, 3, 3);
            hermitize(&(&g * g.adjoint()))
        };
        let mid = (&c1 + &c2).scale(0.5);
        let expected = [0.5, 0.5, -1.0];
        let combo = &c1.scale(expected[0]) + &c2.scale(expected[1]) + mid.scale(expected[2]);
        assert!(frobenius(&combo) < 1e-12, "substitution oracle");

        let kernel = kernel_basis(&[c1.clone(), c2.clone(), mid], &tol).unwrap();
        assert_eq!(kernel.len(), 1);
        let a = &kernel[0];
        // proportional to (1/2, 1/2, -1)
        let scale = a[0].re / expected[0];
        for (k, &e) in expected.iter().enumerate() {
            assert!((a[k].re - e * scale).abs() < 1e-10, "component {k}");
        }
    }

    #[test]
    fn kernel_rejects_mismatched_shapes() {
        let tol = Tolerances::default();
        let err = kernel_basis(&[identity(2), identity(3)], &tol);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn psd_checks() {
        let tol = Tolerances::default();
        assert!(is_psd(&identity(3), &tol).unwrap());
        let indefinite = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, re(-1.0)]));
        assert!(!is_psd(&indefinite, &tol).unwrap());
        let nonsquare = CMatrix::zeros(2, 3);
        assert!(is_psd(&nonsquare, &tol).is_err());
    }

    #[test]
    fn kron_basics() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let p0 = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
        let p1 = CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, ONE]));
        let expected =
            CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, ONE, ZERO, ZERO]));
        assert_eq!(kron(&p0, &p1), expected);
    }

    #[test]
    fn kron_mixed_product_property() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let (a, b, c, d) = (
            rand_cmatrix(&mut rng, 2, 2),
            rand_cmatrix(&mut rng, 2, 2),
            rand_cmatrix(&mut rng, 2, 2),
            rand_cmatrix(&mut rng, 2, 2),
        );
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!(frob_distance(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn factor_recovers_exact_product() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let a = rand_cmatrix(&mut rng, 2, 2);
        let mut b = rand_cmatrix(&mut rng, 3, 3);
        let tr = b.diagonal().sum();
        b /= tr; // trace 1
        let e = kron(&a, &b);
        let (local, rest) = factor_across_cut(&e, 0, &[2, 3], &tol)
            .unwrap()
            .expect("product input factors");
        assert!(frob_distance(&rest, &b) < 1e-10);
        assert!(frob_distance(&local, &a) < 1e-10);
    }

    #[test]
    fn factor_rejects_entangled_operator() {
        let tol = Tolerances::default();
        // (1/2) sum_ij |ii><jj| on two qubits: cut rank 4.
        let mut bell = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                bell[(i * 2 + i, j * 2 + j)] = re(0.5);
            }
        }
        assert!(factor_across_cut(&bell, 0, &[2, 2], &tol).unwrap().is_none());
    }

    #[test]
    fn factor_absorbs_scale_into_local() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let a = rand_cmatrix(&mut rng, 2, 2);
        let mut b = rand_cmatrix(&mut rng, 2, 2);
        let tr = b.diagonal().sum();
        b = b / tr * re(3.0); // trace 3
        let e = kron(&a, &b);
        let (local, rest) = factor_across_cut(&e, 0, &[2, 2], &tol)
            .unwrap()
            .expect("product input factors");
        assert!((rest.diagonal().sum() - ONE).norm() < 1e-12);
        assert!(frob_distance(&local, &(a * re(3.0))) < 1e-10);
        // reassembly oracle
        let back = embed_cut_factors(&local, &rest, 0, &[2, 2]);
        assert!(frob_distance(&back, &e) <= tol.tol_eq * frobenius(&e));
    }

    #[test]
    fn factor_handles_middle_party() {
        let tol = Tolerances::default();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let a = rand_cmatrix(&mut rng, 2, 2);
        let l = rand_cmatrix(&mut rng, 3, 3);
        let mut c = rand_cmatrix(&mut rng, 2, 2);
        let tr_ac = (a.diagonal().sum() * c.diagonal().sum()).norm();
        assert!(tr_ac > 1e-6);
        c /= c.diagonal().sum();
        let mut a_n = a.clone();
        a_n /= a_n.diagonal().sum();
        let e = kron_all(&[a_n.clone(), l.clone(), c.clone()]);
        let (local, rest) = factor_across_cut(&e, 1, &[2, 3, 2], &tol)
            .unwrap()
            .expect("middle party factors");
        // rest = a_n (x) c with trace 1; local = l
        assert!(frob_distance(&rest, &kron(&a_n, &c)) < 1e-10);
        assert!(frob_distance(&local, &l) < 1e-10);
        let back = embed_cut_factors(&local, &rest, 1, &[2, 3, 2]);
        assert!(frob_distance(&back, &e) < 1e-10);
    }

    #[test]
    fn factor_rejects_bad_dims() {
        let tol = Tolerances::default();
        let e = identity(4);
        assert!(factor_across_cut(&e, 0, &[2, 3], &tol).is_err());
        assert!(factor_across_cut(&e, 2, &[2, 2], &tol).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_rank_bounded_by_min_dim(seed in 0u64..1000, rows in 1usize..5, cols in 1usize..5) {
            let tol = Tolerances::default();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = rand_cmatrix(&mut rng, rows, cols);
            prop_assert!(numerical_rank(&m, &tol) <= rows.min(cols));
        }

        #[test]
        fn prop_outer_products_are_psd(seed in 0u64..1000, n in 1usize..6) {
            let tol = Tolerances::default();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let v = rand_cvector(&mut rng, n);
            let outer = &v * v.adjoint();
            prop_assert!(is_psd(&outer, &tol).unwrap());
        }

        #[test]
        fn prop_kernel_vectors_annihilate(seed in 0u64..1000, n in 2usize..4, k in 2usize..6) {
            let tol = Tolerances::default();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            // Random Hermitian inputs plus one forced dependency.
            let mut mats: Vec<CMatrix> = (0..k)
                .map(|_| {
                    let g = rand_cmatrix(&mut rng, n, n);
                    hermitize(&(&g * g.adjoint()))
                })
                .collect();
            let forced = (&mats[0] + &mats[k - 1]).scale(0.5);
            mats.push(forced);
            let max_norm = mats.iter().map(frobenius).fold(0.0, f64::max);
            for a in kernel_basis(&mats, &tol).unwrap() {
                let mut combo = CMatrix::zeros(n, n);
                for (s, m) in mats.iter().enumerate() {
                    combo += m * a[s];
                }
                prop_assert!(frobenius(&combo) <= 10.0 * tol.tol_eq * max_norm);
            }
        }

        #[test]
        fn prop_factor_reassembles(seed in 0u64..1000) {
            let tol = Tolerances::default();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = rand_cmatrix(&mut rng, 2, 2);
            let b = rand_cmatrix(&mut rng, 3, 3);
            let e = kron(&a, &b);
            if let Some((local, rest)) = factor_across_cut(&e, 1, &[2, 3], &tol).unwrap() {
                let back = embed_cut_factors(&local, &rest, 1, &[2, 3]);
                prop_assert!(frob_distance(&back, &e) <= tol.tol_eq * frobenius(&e).max(1.0));
            }
        }
    }
}
