//! Dense complex linear algebra used by the estimators.
//!
//! Decompositions are delegated to `faer` through its low-level entry points
//! so that the degree of parallelism is always explicit: the same inputs give
//! bit-identical outputs regardless of how many threads the caller runs.
//! Contracts are stated as residual bounds (see [`TOLERANCES`]), never as a
//! particular algorithm.

use std::cell::Cell;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::householder;
use faer::linalg::matmul::matmul;
use faer::linalg::qr::no_pivoting::factor as qr_factor;
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::traits::{ComplexField, Conjugate};
use faer::{Accum, Col, ColRef, Conj, Mat, MatRef, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{EqptError, Result};

pub use faer::c64;

/// Dense `d x d` (or `d x k`) complex matrix.
pub type ComplexMatrix = Mat<c64>;

/// Numerical thresholds shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative residual bound for eigen/SVD reconstructions.
    pub reconstruction: f64,
    /// Frobenius bound on `A^H A - I` (scaled by `sqrt(d)`) for unitary outputs.
    pub unitarity: f64,
    /// Relative bound on `||A - A^H||_F` accepted as Hermitian.
    pub hermitian_asymmetry: f64,
    /// `sigma_min / sigma_max` below which a matrix is reported rank deficient.
    pub rank_ratio: f64,
    /// Relative column norm below which a basis is considered rank deficient.
    pub basis_rank: f64,
    /// Smallest magnitude accepted as a divisor (traces, norms, ket components).
    pub tiny: f64,
    /// Gram defect above which a degenerate eigenvector block is re-orthonormalized.
    pub block_gram: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    reconstruction: 1e-10,
    unitarity: 1e-12,
    hermitian_asymmetry: 1e-12,
    rank_ratio: 1e-14,
    basis_rank: 1e-12,
    tiny: 1e-12,
    block_gram: 1e-8,
};

thread_local! {
    static PARALLELISM: Cell<Option<Par>> = const { Cell::new(None) };
}

/// Runs `f` with every decomposition on this thread using `par`.
///
/// Outside of such a scope the process-wide `faer` setting is used.
pub fn with_parallelism<R>(par: Par, f: impl FnOnce() -> R) -> R {
    let previous = PARALLELISM.with(|p| p.replace(Some(par)));
    let out = f();
    PARALLELISM.with(|p| p.set(previous));
    out
}

pub(crate) fn current_par() -> Par {
    PARALLELISM
        .with(|p| p.get())
        .unwrap_or_else(faer::get_global_parallelism)
}

/// `a * b` using the parallelism of the current scope.
pub fn product<L, R>(a: MatRef<'_, L>, b: MatRef<'_, R>) -> ComplexMatrix
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    assert_eq!(a.ncols(), b.nrows(), "product: inner dimensions differ");
    let mut out = Mat::<c64>::zeros(a.nrows(), b.ncols());
    matmul(
        out.as_mut(),
        Accum::Replace,
        a,
        b,
        c64::new(1.0, 0.0),
        current_par(),
    );
    out
}

/// Eigenvalues and matching unit-norm eigenvectors (column `k` pairs with `values[k]`).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Thin singular value decomposition `A = left * diag(sigma) * right^H`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left: ComplexMatrix,
    /// Nonnegative, nonincreasing.
    pub sigma: Vec<f64>,
    pub right: ComplexMatrix,
}

/// How [`random_unitary_with`] draws the matrix it orthonormalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnitaryEnsemble {
    /// Q factor of a real matrix with i.i.d. entries uniform on `[0, 1]`.
    /// The result is real orthogonal.
    #[default]
    RealUniformQr,
    /// Q factor of a complex Ginibre matrix, with the `R` diagonal phases
    /// folded back in so that the result is Haar distributed.
    ComplexGinibre,
}

pub fn frobenius_norm(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

fn all_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols())
        .all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

fn ensure_finite(a: MatRef<'_, c64>, what: &str) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(EqptError::numerical(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn ensure_square(a: MatRef<'_, c64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(EqptError::dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// `||A - A^H||_F / ||A||_F` (zero for the zero matrix).
pub fn hermitian_defect(a: MatRef<'_, c64>) -> f64 {
    let norm = a.norm_l2();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm_l2() / norm
}

/// `||A^H A - I||_F`.
pub fn unitarity_defect(a: MatRef<'_, c64>) -> f64 {
    let gram = product(a.adjoint(), a);
    (gram - Mat::<c64>::identity(a.ncols(), a.ncols())).norm_l2()
}

fn condition_summary(a: MatRef<'_, c64>) -> String {
    let mut max_abs = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            max_abs = max_abs.max(a[(i, j)].norm());
        }
    }
    format!(
        "{}x{}, ||A||_F = {:.3e}, max |a_ij| = {:.3e}, finite = {}",
        a.nrows(),
        a.ncols(),
        a.norm_l2(),
        max_abs,
        all_finite(a)
    )
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalue order is unspecified.
pub fn hermitian_eig(a: MatRef<'_, c64>) -> Result<EigenPair> {
    ensure_square(a, "hermitian_eig input")?;
    ensure_finite(a, "hermitian_eig input")?;
    let asym = hermitian_defect(a);
    if asym > TOLERANCES.hermitian_asymmetry {
        return Err(EqptError::argument(format!(
            "matrix is not Hermitian (relative asymmetry {asym:.3e}); preprocess it first"
        )));
    }

    let n = a.nrows();
    let par = current_par();
    let mut s = Diag::<c64>::zeros(n);
    let mut u = Mat::<c64>::zeros(n, n);
    let req =
        evd::self_adjoint_evd_scratch::<c64>(n, ComputeEigenvectors::Yes, par, Default::default());
    let mut buf = MemBuffer::new(req);
    evd::self_adjoint_evd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| {
        EqptError::numerical(format!(
            "Hermitian eigensolver did not converge ({e:?}); {}",
            condition_summary(a)
        ))
    })?;

    let values: Vec<f64> = s.column_vector().iter().map(|z| z.re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EqptError::numerical(format!(
            "Hermitian eigensolver produced non-finite eigenvalues; {}",
            condition_summary(a)
        )));
    }
    ensure_finite(u.as_ref(), "eigenvector matrix")?;
    Ok(EigenPair { values, vectors: u })
}

/// Thin SVD of an arbitrary finite matrix.
pub fn svd(a: MatRef<'_, c64>) -> Result<SvdFactors> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(EqptError::dimension("svd input must be non-empty"));
    }
    ensure_finite(a, "svd input")?;
    let (m, n) = a.shape();
    let k = m.min(n);
    let par = current_par();
    let mut s = Diag::<c64>::zeros(k);
    let mut u = Mat::<c64>::zeros(m, k);
    let mut v = Mat::<c64>::zeros(n, k);
    let req = faer_svd::svd_scratch::<c64>(
        m,
        n,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        Default::default(),
    );
    let mut buf = MemBuffer::new(req);
    faer_svd::svd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| {
        EqptError::numerical(format!(
            "SVD did not converge ({e:?}); {}",
            condition_summary(a)
        ))
    })?;

    let sigma: Vec<f64> = s.column_vector().iter().map(|z| z.re.max(0.0)).collect();
    Ok(SvdFactors {
        left: u,
        sigma,
        right: v,
    })
}

/// Closest unitary matrix in Frobenius norm: `V W^H` from `A = V S W^H`.
///
/// A rank-deficient input is accepted with a logged warning; the result is
/// still unitary but no longer unique.
pub fn nearest_unitary(a: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    ensure_square(a, "nearest_unitary input")?;
    let f = svd(a)?;
    let smax = f.sigma.first().copied().unwrap_or(0.0);
    let smin = f.sigma.last().copied().unwrap_or(0.0);
    if smin <= TOLERANCES.rank_ratio * smax {
        log::warn!(
            "nearest_unitary: input is rank deficient (sigma_min = {smin:.3e}, sigma_max = {smax:.3e})"
        );
    }
    Ok(product(f.left.as_ref(), f.right.adjoint()))
}

/// Householder QR of `a` (`m >= n`), returning the thin `Q` and the diagonal of `R`.
fn thin_qr<T: ComplexField>(a: MatRef<'_, T>) -> (Mat<T>, Vec<T>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let par = current_par();
    let mut qr = a.to_owned();
    let block = qr_factor::recommended_block_size::<T>(m, n);
    let mut coeff = Mat::<T>::zeros(block, n);
    {
        let req = qr_factor::qr_in_place_scratch::<T>(m, n, block, par, Default::default());
        let mut buf = MemBuffer::new(req);
        qr_factor::qr_in_place(
            qr.as_mut(),
            coeff.as_mut(),
            par,
            MemStack::new(&mut buf),
            Default::default(),
        );
    }
    let r_diag: Vec<T> = (0..n).map(|j| qr[(j, j)].clone()).collect();
    // Keep only the Householder essentials below the unit diagonal.
    for j in 0..n {
        for i in 0..j {
            qr[(i, j)] = T::zero_impl();
        }
        qr[(j, j)] = T::one_impl();
    }
    let mut q = Mat::<T>::identity(m, n);
    let req = householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<T>(
        m, block, n,
    );
    let mut buf = MemBuffer::new(req);
    householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
        qr.as_ref(),
        coeff.as_ref(),
        Conj::No,
        q.as_mut(),
        par,
        MemStack::new(&mut buf),
    );
    (q, r_diag)
}

/// Deterministic random unitary following the default ensemble.
pub fn random_unitary(d: usize, seed: u64) -> ComplexMatrix {
    random_unitary_with(d, seed, UnitaryEnsemble::RealUniformQr)
}

/// Deterministic random unitary. Entries are drawn row-major from a
/// ChaCha8 stream seeded with `seed`.
pub fn random_unitary_with(d: usize, seed: u64, ensemble: UnitaryEnsemble) -> ComplexMatrix {
    assert!(d >= 1, "random_unitary needs d >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match ensemble {
        UnitaryEnsemble::RealUniformQr => {
            let mut raw = Mat::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    raw[(i, j)] = rng.random::<f64>();
                }
            }
            let (q, _) = thin_qr(raw.as_ref());
            Mat::from_fn(d, d, |i, j| c64::new(q[(i, j)], 0.0))
        }
        UnitaryEnsemble::ComplexGinibre => {
            let mut raw = Mat::<c64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    raw[(i, j)] = c64::new(re, im);
                }
            }
            let (mut q, r_diag) = thin_qr(raw.as_ref());
            for (j, r) in r_diag.iter().enumerate() {
                let modulus = r.norm();
                if modulus > 0.0 {
                    let phase = r / modulus;
                    for i in 0..d {
                        q[(i, j)] *= phase;
                    }
                }
            }
            q
        }
    }
}

/// Orthonormal basis of the column span of `b` (thin QR).
///
/// Fails when a column is numerically dependent on the previous ones.
pub fn orthonormal_basis(b: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    let (m, k) = b.shape();
    if k == 0 {
        return Err(EqptError::argument("basis has no columns"));
    }
    if k > m {
        return Err(EqptError::dimension(format!(
            "basis has {k} columns in dimension {m}; columns cannot be independent"
        )));
    }
    ensure_finite(b, "basis")?;
    let (q, r_diag) = thin_qr(b);
    let rmax = r_diag.iter().map(|r| r.norm()).fold(0.0, f64::max);
    if rmax == 0.0
        || r_diag
            .iter()
            .any(|r| r.norm() <= TOLERANCES.basis_rank * rmax)
    {
        return Err(EqptError::numerical(format!(
            "basis of {k} columns is rank deficient after orthonormalization"
        )));
    }
    Ok(q)
}

/// Leading `count` canonical directions between two subspaces given by
/// orthonormal bases, expressed on the side of `q1`.
///
/// Directions are ordered by decreasing canonical correlation (cosine of the
/// principal angle). All `min(k1, k2)` correlations are returned alongside.
pub(crate) fn canonical_directions_orthonormal(
    q1: MatRef<'_, c64>,
    q2: MatRef<'_, c64>,
    count: usize,
) -> Result<(ComplexMatrix, Vec<f64>)> {
    if q1.nrows() != q2.nrows() {
        return Err(EqptError::dimension(format!(
            "bases live in different spaces ({} vs {})",
            q1.nrows(),
            q2.nrows()
        )));
    }
    let available = q1.ncols().min(q2.ncols());
    if count == 0 || count > available {
        return Err(EqptError::argument(format!(
            "requested {count} canonical directions, {available} available"
        )));
    }
    let overlap = product(q1.adjoint(), q2);
    let f = svd(overlap.as_ref())?;
    let directions = product(q1, f.left.get(.., ..count));
    Ok((directions, f.sigma))
}

/// Leading `count` canonical directions between `span(b1)` and `span(b2)`.
pub fn canonical_directions(
    b1: MatRef<'_, c64>,
    b2: MatRef<'_, c64>,
    count: usize,
) -> Result<ComplexMatrix> {
    let q1 = orthonormal_basis(b1)?;
    let q2 = orthonormal_basis(b2)?;
    canonical_directions_orthonormal(q1.as_ref(), q2.as_ref(), count).map(|(dirs, _)| dirs)
}

/// Unit vector of `span(b1)` maximally correlated with `span(b2)`; for
/// subspaces meeting in a line this is that line.
///
/// The free phase is fixed by making the first non-negligible component
/// real and positive.
pub fn cca_principal_direction(b1: MatRef<'_, c64>, b2: MatRef<'_, c64>) -> Result<Col<c64>> {
    if b1.ncols() == 0 || b2.ncols() == 0 {
        return Err(EqptError::argument(
            "CCA needs at least one column on each side",
        ));
    }
    let dirs = canonical_directions(b1, b2, 1)?;
    let mut out = dirs.col(0).to_owned();
    normalize_in_place(&mut out)?;
    fix_phase(&mut out);
    Ok(out)
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize_in_place(v: &mut Col<c64>) -> Result<()> {
    let norm = v.norm_l2();
    if !(norm > TOLERANCES.tiny) {
        return Err(EqptError::numerical(format!(
            "cannot normalize vector of norm {norm:.3e}"
        )));
    }
    let inv = 1.0 / norm;
    for z in v.iter_mut() {
        *z *= inv;
    }
    Ok(())
}

/// Scales every column of `a` to unit Euclidean norm.
pub fn normalize_columns(a: &mut ComplexMatrix) -> Result<()> {
    for j in 0..a.ncols() {
        let norm = a.col(j).norm_l2();
        if !(norm > TOLERANCES.tiny) {
            return Err(EqptError::numerical(format!(
                "column {j} has norm {norm:.3e}"
            )));
        }
        let inv = 1.0 / norm;
        for z in a.col_mut(j).iter_mut() {
            *z *= inv;
        }
    }
    Ok(())
}

/// Multiplies `v` by the unit-modulus factor that makes its first
/// non-negligible component real and positive.
pub fn fix_phase(v: &mut Col<c64>) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    let pivot = v.iter().copied().find(|z| z.norm() > 1e-8 * scale);
    if let Some(pivot) = pivot {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// `|<a, b>|` for two vectors.
pub fn overlap_modulus(a: ColRef<'_, c64>, b: ColRef<'_, c64>) -> f64 {
    (a.adjoint() * b).norm()
}

/// Builds a square diagonal matrix.
pub fn diagonal_matrix(entries: &[c64]) -> ComplexMatrix {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            entries[i]
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

/// Scales column `j` of `a` by `factors[j]` (right multiplication by a diagonal).
pub fn scale_columns(a: MatRef<'_, c64>, factors: &[c64]) -> ComplexMatrix {
    assert_eq!(a.ncols(), factors.len());
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * factors[j])
}
