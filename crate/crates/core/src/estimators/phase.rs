//! Removal of the per-column phase freedom left by eigendecomposition.

use faer::MatRef;

use crate::error::{EqptError, Result};
use crate::linalg::{self, c64, ComplexMatrix, TOLERANCES};
use crate::states::{DensityMatrix, Ket};

fn probe_ratios(u2: MatRef<'_, c64>, psi1: &Ket, phi2_hat: &Ket) -> Result<Vec<c64>> {
    let d = u2.nrows();
    if u2.ncols() != d || psi1.dim() != d || phi2_hat.dim() != d {
        return Err(EqptError::dimension(format!(
            "phase step needs matching dimensions: U is {}x{}, input ket {}, output ket {}",
            u2.nrows(),
            u2.ncols(),
            psi1.dim(),
            phi2_hat.dim()
        )));
    }
    let psi1 = psi1.amplitudes();
    if let Some(k) = (0..d).find(|&k| !(psi1[k].norm() >= TOLERANCES.tiny)) {
        return Err(EqptError::argument(format!(
            "input ket component {k} is {:.3e}; every component must be nonzero",
            psi1[k].norm()
        )));
    }
    let psi3 = linalg::product(u2.adjoint(), phi2_hat.amplitudes().as_mat());
    Ok((0..d).map(|k| psi3[(k, 0)] / psi1[k]).collect())
}

/// `U2 diag(Ψ3 ⊘ ψ1)` with `Ψ3 = U2^H φ2`.
pub fn resolve_phases_pure(
    u2: MatRef<'_, c64>,
    psi1: &Ket,
    phi2_hat: &Ket,
) -> Result<ComplexMatrix> {
    let ratios = probe_ratios(u2, psi1, phi2_hat)?;
    Ok(linalg::scale_columns(u2, &ratios))
}

/// As [`resolve_phases_pure`] with each ratio reduced to its phase, so that a
/// unitary `U2` stays exactly unitary.
pub fn resolve_phases_unit_modulus(
    u2: MatRef<'_, c64>,
    psi1: &Ket,
    phi2_hat: &Ket,
) -> Result<ComplexMatrix> {
    let mut ratios = probe_ratios(u2, psi1, phi2_hat)?;
    for (k, r) in ratios.iter_mut().enumerate() {
        let m = r.norm();
        if !(m > TOLERANCES.tiny) {
            return Err(EqptError::numerical(format!(
                "output ket has no component along estimated column {k}"
            )));
        }
        *r /= m;
    }
    Ok(linalg::scale_columns(u2, &ratios))
}

/// Phase step from a mixed reference state:
/// `U2 diag(conj(row_1(U2^H ρ8 U2) ⊘ row_1(ρ5)))`.
///
/// `rho5` must have no zero in its first row; a diagonal `rho5` carries no
/// phase information and is rejected.
pub fn resolve_phases_mixed(
    u2: MatRef<'_, c64>,
    rho5: &DensityMatrix,
    rho8_pre: &DensityMatrix,
) -> Result<ComplexMatrix> {
    let d = u2.nrows();
    if u2.ncols() != d || rho5.dim() != d || rho8_pre.dim() != d {
        return Err(EqptError::dimension(format!(
            "mixed phase step needs matching dimensions: U is {}x{}, reference {}, output {}",
            u2.nrows(),
            u2.ncols(),
            rho5.dim(),
            rho8_pre.dim()
        )));
    }
    let row5 = rho5.matrix().row(0);
    if let Some(k) = (0..d).find(|&k| !(row5[k].norm() >= TOLERANCES.tiny)) {
        return Err(EqptError::argument(format!(
            "reference state has a zero entry at (1, {}); all first-row entries must be nonzero",
            k + 1
        )));
    }
    // Only the first row of U2^H ρ8 U2 is needed.
    let head = linalg::product(u2.col(0).adjoint().as_mat(), rho8_pre.matrix());
    let row9 = linalg::product(head.as_ref(), u2);
    let factors: Vec<c64> = (0..d).map(|k| (row9[(0, k)] / row5[k]).conj()).collect();
    Ok(linalg::scale_columns(u2, &factors))
}
