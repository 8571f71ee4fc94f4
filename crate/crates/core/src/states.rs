//! Input states for the estimators and their propagation through a process.
//!
//! Indices in the documentation below are 1-based (`r_1` is the largest
//! eigenvalue); the code itself is 0-based.

use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{EqptError, Result};
use crate::linalg::{self, c64, ComplexMatrix, TOLERANCES};

/// Which structured input a density matrix was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageLayout {
    /// `diag(r_1, ..., r_d)` with all values distinct.
    SingleStage,
    /// `diag(r) ⊗ I_m1`.
    TwoStageFirst,
    /// `I_m1 ⊗ diag(r)`.
    TwoStageSecond,
    /// `I_{2^level} ⊗ diag(γ1, γ2) ⊗ I_{b_s}` of the dichotomic recursion.
    MultiStage { level: usize },
    /// Anything else: propagated states, user-supplied inputs.
    External,
}

/// Hermitian, unit-trace matrix tagged with the stage it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    layout: StageLayout,
}

impl DensityMatrix {
    /// Validates that `matrix` is square, Hermitian and of unit trace.
    pub fn new(matrix: ComplexMatrix, layout: StageLayout) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(EqptError::dimension(format!(
                "density matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = linalg::hermitian_defect(matrix.as_ref());
        if !(asym <= TOLERANCES.hermitian_asymmetry) {
            return Err(EqptError::argument(format!(
                "density matrix is not Hermitian (relative asymmetry {asym:.3e})"
            )));
        }
        let tr = trace(matrix.as_ref());
        if !((tr.re - 1.0).abs() <= TOLERANCES.tiny && tr.im.abs() <= TOLERANCES.tiny) {
            return Err(EqptError::argument(format!(
                "density matrix trace is {:.15} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        Ok(DensityMatrix { matrix, layout })
    }

    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, layout: StageLayout) -> Self {
        DensityMatrix { matrix, layout }
    }

    fn diagonal(values: &[f64], layout: StageLayout) -> Self {
        let entries: Vec<c64> = values.iter().map(|&v| c64::new(v, 0.0)).collect();
        DensityMatrix::from_parts_unchecked(linalg::diagonal_matrix(&entries), layout)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn layout(&self) -> StageLayout {
        self.layout
    }

    /// Retags the matrix, e.g. after preprocessing a noisy estimate of a known stage.
    pub fn with_layout(mut self, layout: StageLayout) -> Self {
        self.layout = layout;
        self
    }

    /// Real parts of the diagonal.
    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.matrix[(k, k)].re).collect()
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.matrix[(i, j)] == c64::new(0.0, 0.0)))
    }
}

/// State vector; unit norm once normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(Col<c64>);

impl Ket {
    pub fn new(amplitudes: Col<c64>) -> Self {
        Ket(amplitudes)
    }

    pub fn from_slice(amplitudes: &[c64]) -> Self {
        Ket(Col::from_fn(amplitudes.len(), |i| amplitudes[i]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn amplitudes(&self) -> ColRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> Col<c64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm_l2()
    }
}

pub(crate) fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|k| a[(k, k)]).sum()
}

/// `r_k = 2(n - k + 1) / (scale (n + 1))`, k = 1..n.
fn linear_profile(n: usize, scale: f64) -> Vec<f64> {
    (1..=n)
        .map(|k| 2.0 * (n - k + 1) as f64 / (scale * (n + 1) as f64))
        .collect()
}

/// Eigenvalues `r_k = 2(d - k + 1) / (d (d + 1))` of the single-stage input.
pub fn single_stage_eigenvalues(d: usize) -> Vec<f64> {
    linear_profile(d, d as f64)
}

/// `diag(r_1, ..., r_d)`: strictly decreasing, unit trace.
pub fn single_stage_density(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(EqptError::argument(format!(
            "single-stage input needs d >= 2, got {d}"
        )));
    }
    Ok(DensityMatrix::diagonal(
        &single_stage_eigenvalues(d),
        StageLayout::SingleStage,
    ))
}

/// The pair `diag(r) ⊗ I_m1` and `I_m1 ⊗ diag(r)` with
/// `r_k = 2(n2 - k + 1) / (d (n2 + 1))` and `d = m1 n2`.
///
/// `m1 > n2` is accepted with a warning: the two-stage estimator rejects it,
/// but the layouts themselves are well defined.
pub fn two_stage_densities(m1: usize, n2: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    if m1 < 1 || n2 < 2 {
        return Err(EqptError::argument(format!(
            "two-stage inputs need m1 >= 1 and n2 >= 2, got m1 = {m1}, n2 = {n2}"
        )));
    }
    if m1 > n2 {
        log::warn!("two-stage layout with m1 = {m1} > n2 = {n2}: subsets cannot all intersect in one column");
    }
    let d = m1 * n2;
    let r = linear_profile(n2, d as f64);
    let first: Vec<f64> = (0..d).map(|c| r[c / m1]).collect();
    let second: Vec<f64> = (0..d).map(|c| r[c % n2]).collect();
    Ok((
        DensityMatrix::diagonal(&first, StageLayout::TwoStageFirst),
        DensityMatrix::diagonal(&second, StageLayout::TwoStageSecond),
    ))
}

/// `log2(d / 2)`, the deepest level of the dichotomic recursion, when `d` is
/// a power of two with `d >= 8`.
pub fn dichotomic_depth(d: usize) -> Result<usize> {
    if d < 8 || !d.is_power_of_two() {
        return Err(EqptError::argument(format!(
            "dichotomic layouts need d a power of two with d >= 8, got {d}"
        )));
    }
    Ok((d / 2).trailing_zeros() as usize)
}

/// `I_{2^level} ⊗ diag(γ1, γ2) ⊗ I_{b_s}` with `γ1 = 4/(3d)`, `γ2 = 2/(3d)`
/// and `b_s = d / 2^(level + 1)`.
///
/// Column `c` (0-based) carries `γ1` exactly when bit `depth - level` of `c`
/// is zero.
pub fn multi_stage_density(d: usize, level: usize) -> Result<DensityMatrix> {
    let depth = dichotomic_depth(d)?;
    if level > depth {
        return Err(EqptError::argument(format!(
            "level {level} out of range 0..={depth} for d = {d}"
        )));
    }
    let gamma = linear_profile(2, d as f64);
    let bit = depth - level;
    let values: Vec<f64> = (0..d).map(|c| gamma[(c >> bit) & 1]).collect();
    Ok(DensityMatrix::diagonal(
        &values,
        StageLayout::MultiStage { level },
    ))
}

/// One density per level `0..=log2(d/2)`.
pub fn multi_stage_densities(d: usize) -> Result<Vec<DensityMatrix>> {
    let depth = dichotomic_depth(d)?;
    (0..=depth)
        .map(|level| multi_stage_density(d, level))
        .collect()
}

/// Pure state with every amplitude equal to `1/sqrt(d)`.
pub fn probe_ket(d: usize) -> Result<Ket> {
    if d == 0 {
        return Err(EqptError::argument("probe ket needs d >= 1"));
    }
    let a = c64::new(1.0 / (d as f64).sqrt(), 0.0);
    Ok(Ket(Col::from_fn(d, |_| a)))
}

/// `U rho U^H`, tagged [`StageLayout::External`].
///
/// `U` is assumed unitary; it is not checked here because the check costs as
/// much as the product.
pub fn apply_process_density(u: MatRef<'_, c64>, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(EqptError::argument(format!(
            "process is {}x{} but the state has dimension {d}",
            u.nrows(),
            u.ncols()
        )));
    }
    let left = if rho.is_diagonal() {
        let diag: Vec<c64> = (0..d).map(|k| rho.matrix[(k, k)]).collect();
        linalg::scale_columns(u, &diag)
    } else {
        linalg::product(u, rho.matrix())
    };
    let out = linalg::product(left.as_ref(), u.adjoint());
    // The product is Hermitian up to rounding; restore it exactly.
    let out = Mat::from_fn(d, d, |i, j| (out[(i, j)] + out[(j, i)].conj()) * 0.5);
    Ok(DensityMatrix::from_parts_unchecked(
        out,
        StageLayout::External,
    ))
}

/// `U psi`.
pub fn apply_process_ket(u: MatRef<'_, c64>, psi: &Ket) -> Result<Ket> {
    if u.nrows() != psi.dim() || u.ncols() != psi.dim() {
        return Err(EqptError::argument(format!(
            "process is {}x{} but the ket has dimension {}",
            u.nrows(),
            u.ncols(),
            psi.dim()
        )));
    }
    Ok(Ket(linalg::product(u, psi.amplitudes().as_mat())
        .col(0)
        .to_owned()))
}
