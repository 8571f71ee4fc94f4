use faer::Mat;

use super::{check_dim, check_layout, finish, Diagnostics, Method, ProcessEstimate, StageClock};
use crate::error::{EqptError, Result};
use crate::estimators::phase::{resolve_phases_mixed, resolve_phases_pure};
use crate::estimators::sorted::sorted_eigendecomposition;
use crate::linalg::{self, c64};
use crate::states::{probe_ket, DensityMatrix, Ket, StageLayout};

/// Minimal relative gap accepted between eigenvalues of a known input state.
const DISTINCT_EIGENVALUES: f64 = 1e-10;

/// Single-stage estimator: sorted eigenvectors of the propagated diagonal
/// input, phases fixed with the propagated uniform probe ket.
pub fn eqpt1(rho2_pre: &DensityMatrix, phi2_hat: &Ket, d: usize) -> Result<ProcessEstimate> {
    check_dim(rho2_pre.dim(), d, "output density")?;
    check_dim(phi2_hat.dim(), d, "output ket")?;
    check_layout(rho2_pre, StageLayout::SingleStage, "output density")?;

    let mut clock = StageClock::new();
    let sorted = clock.time("eigendecomposition", || sorted_eigendecomposition(rho2_pre))?;
    let psi1 = probe_ket(d)?;
    let u3 = clock.time("phase", || {
        resolve_phases_pure(sorted.vectors.as_ref(), &psi1, phi2_hat)
    })?;

    let diagnostics = Diagnostics {
        min_eigen_gaps: vec![sorted.min_gap()],
        reorthonormalized_blocks: sorted.reorthonormalized_blocks,
        ..Diagnostics::default()
    };
    finish(u3, Method::Eqpt1, diagnostics, clock)
}

/// Single-stage estimator for a known input state that need not be diagonal.
///
/// The eigenvectors `U_I1` of `rho1_known` are divided out at the end:
/// `U2 diag(Ψ3 ⊘ Ψ4) U_I1^H` with `Ψ4 = U_I1^H ψ1`.
pub fn eqpt1_general_input(
    rho1_known: &DensityMatrix,
    rho2_pre: &DensityMatrix,
    phi2_hat: &Ket,
) -> Result<ProcessEstimate> {
    let d = rho1_known.dim();
    check_dim(rho2_pre.dim(), d, "output density")?;
    check_dim(phi2_hat.dim(), d, "output ket")?;

    let mut clock = StageClock::new();
    let input = clock.time("input eigendecomposition", || {
        sorted_eigendecomposition(rho1_known)
    })?;
    let scale = input.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let input_gap = input.min_gap();
    if d > 1 && !(input_gap > DISTINCT_EIGENVALUES * scale) {
        return Err(EqptError::argument(format!(
            "input state has repeated eigenvalues (smallest gap {input_gap:.3e})"
        )));
    }
    let output = clock.time("eigendecomposition", || sorted_eigendecomposition(rho2_pre))?;

    let psi1 = probe_ket(d)?;
    let psi4 = Ket::new(
        linalg::product(input.vectors.adjoint(), psi1.amplitudes().as_mat())
            .col(0)
            .to_owned(),
    );
    let u3 = clock.time("phase", || -> Result<_> {
        let scaled = resolve_phases_pure(output.vectors.as_ref(), &psi4, phi2_hat)?;
        Ok(linalg::product(scaled.as_ref(), input.vectors.adjoint()))
    })?;

    let diagnostics = Diagnostics {
        min_eigen_gaps: vec![input_gap, output.min_gap()],
        reorthonormalized_blocks: output.reorthonormalized_blocks,
        ..Diagnostics::default()
    };
    finish(u3, Method::VariantG, diagnostics, clock)
}

/// `0.5 J/d + 0.5 I/d`: a valid mixed reference whose first row has no zero.
pub fn mixed_phase_reference(d: usize) -> Result<DensityMatrix> {
    if d == 0 {
        return Err(EqptError::argument("reference state needs d >= 1"));
    }
    let off = 0.5 / d as f64;
    let m = Mat::from_fn(d, d, |i, j| {
        c64::new(if i == j { 2.0 * off } else { off }, 0.0)
    });
    Ok(DensityMatrix::from_parts_unchecked(
        m,
        StageLayout::External,
    ))
}

/// Single-stage estimator whose phases come from a known mixed reference
/// state `rho5` and its propagated, preprocessed estimate `rho8_pre`.
pub fn eqpt1_mixed_probe(
    rho2_pre: &DensityMatrix,
    rho5_known: &DensityMatrix,
    rho8_pre: &DensityMatrix,
) -> Result<ProcessEstimate> {
    let d = rho2_pre.dim();
    check_dim(rho5_known.dim(), d, "reference state")?;
    check_dim(rho8_pre.dim(), d, "propagated reference state")?;
    check_layout(rho2_pre, StageLayout::SingleStage, "output density")?;

    let mut clock = StageClock::new();
    let sorted = clock.time("eigendecomposition", || sorted_eigendecomposition(rho2_pre))?;
    let u3 = clock.time("phase", || {
        resolve_phases_mixed(sorted.vectors.as_ref(), rho5_known, rho8_pre)
    })?;

    let diagnostics = Diagnostics {
        min_eigen_gaps: vec![sorted.min_gap()],
        reorthonormalized_blocks: sorted.reorthonormalized_blocks,
        ..Diagnostics::default()
    };
    finish(u3, Method::VariantH, diagnostics, clock)
}
