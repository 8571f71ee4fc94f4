//! Two-stage estimator: each process column is the intersection of one
//! eigensubspace from each of two degenerate input layouts.

use faer::Mat;

use super::{
    check_dim, check_layout, finish, Diagnostics, Method, ProcessEstimate, StageClock,
    Unitarization,
};
use crate::error::{EqptError, Result};
use crate::estimators::phase::{resolve_phases_pure, resolve_phases_unit_modulus};
use crate::estimators::sorted::{sorted_eigendecomposition, SortedEig};
use crate::linalg::{self, c64, ComplexMatrix};
use crate::states::{probe_ket, DensityMatrix, Ket, StageLayout};

/// The single process column (0-based) shared by subset `i` of the
/// `diag(r) ⊗ I_m1` stage and subset `j` of the `I_m1 ⊗ diag(r)` stage, if any.
///
/// Subset `i` of the first stage holds columns `i m1 .. i m1 + m1`; subset `j`
/// of the second holds columns `j, j + n2, ..., j + (m1 - 1) n2`. With
/// `m1 = n2` every pair meets, in column `i m1 + j`.
pub fn two_stage_shared_column(i: usize, j: usize, m1: usize, n2: usize) -> Option<usize> {
    if i >= n2 || j >= n2 || m1 == 0 {
        return None;
    }
    let offset = (j + n2 - (i * m1) % n2) % n2;
    (offset < m1).then_some(i * m1 + offset)
}

fn subset_bases(sorted: &SortedEig, m1: usize, n2: usize) -> Result<Vec<ComplexMatrix>> {
    (0..n2)
        .map(|s| linalg::orthonormal_basis(sorted.vectors.get(.., s * m1..(s + 1) * m1)))
        .collect()
}

/// Two-stage estimator. `mode` selects the plain estimator, projection onto
/// the unitary group before the phase step (with unit-modulus corrections),
/// or projection after it.
pub fn eqpt_two_stage(
    rho2_pre: &DensityMatrix,
    rho6_pre: &DensityMatrix,
    phi2_hat: &Ket,
    m1: usize,
    n2: usize,
    mode: Unitarization,
) -> Result<ProcessEstimate> {
    if m1 < 1 || n2 < 2 {
        return Err(EqptError::argument(format!(
            "two-stage estimation needs m1 >= 1 and n2 >= 2, got m1 = {m1}, n2 = {n2}"
        )));
    }
    if m1 > n2 {
        return Err(EqptError::argument(format!(
            "two-stage estimation needs m1 <= n2, got m1 = {m1}, n2 = {n2}"
        )));
    }
    let d = m1 * n2;
    check_dim(rho2_pre.dim(), d, "first-stage output density")?;
    check_dim(rho6_pre.dim(), d, "second-stage output density")?;
    check_dim(phi2_hat.dim(), d, "output ket")?;
    check_layout(
        rho2_pre,
        StageLayout::TwoStageFirst,
        "first-stage output density",
    )?;
    check_layout(
        rho6_pre,
        StageLayout::TwoStageSecond,
        "second-stage output density",
    )?;

    let mut clock = StageClock::new();
    let first = clock.time("first-stage eigendecomposition", || {
        sorted_eigendecomposition(rho2_pre)
    })?;
    let second = clock.time("second-stage eigendecomposition", || {
        sorted_eigendecomposition(rho6_pre)
    })?;

    let (u4, margin) = clock.time("intersection", || -> Result<_> {
        let b1 = subset_bases(&first, m1, n2)?;
        let b2 = subset_bases(&second, m1, n2)?;
        let mut u4 = Mat::<c64>::zeros(d, d);
        let mut margin = f64::INFINITY;
        for c in 0..d {
            let (i, j) = (c / m1, c % n2);
            debug_assert_eq!(two_stage_shared_column(i, j, m1, n2), Some(c));
            let (dirs, sigma) =
                linalg::canonical_directions_orthonormal(b1[i].as_ref(), b2[j].as_ref(), 1)?;
            margin = margin.min(sigma[0] - sigma.get(1).copied().unwrap_or(0.0));
            let mut col = dirs.col(0).to_owned();
            linalg::normalize_in_place(&mut col)?;
            linalg::fix_phase(&mut col);
            u4.col_mut(c).copy_from(&col);
        }
        Ok((u4, margin))
    })?;

    let psi1 = probe_ket(d)?;
    let u3 = clock.time("phase", || -> Result<_> {
        match mode {
            Unitarization::None => resolve_phases_pure(u4.as_ref(), &psi1, phi2_hat),
            Unitarization::BeforePhase => {
                let projected = linalg::nearest_unitary(u4.as_ref())?;
                resolve_phases_unit_modulus(projected.as_ref(), &psi1, phi2_hat)
            }
            Unitarization::AfterPhase => {
                let phased = resolve_phases_pure(u4.as_ref(), &psi1, phi2_hat)?;
                linalg::nearest_unitary(phased.as_ref())
            }
        }
    })?;

    let method = match mode {
        Unitarization::None => Method::Eqpt2,
        Unitarization::BeforePhase => Method::Eqpt3,
        Unitarization::AfterPhase => Method::Eqpt4,
    };
    let diagnostics = Diagnostics {
        min_eigen_gaps: vec![
            first.gap_at((1..n2).map(|s| s * m1)),
            second.gap_at((1..n2).map(|s| s * m1)),
        ],
        reorthonormalized_blocks: first.reorthonormalized_blocks + second.reorthonormalized_blocks,
        min_cca_margin: Some(margin),
        ..Diagnostics::default()
    };
    finish(u3, method, diagnostics, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{overlap_modulus, random_unitary};
    use crate::qst::{hermitian_unit_trace, noisy_density, noisy_ket, normalize_ket, NoiseSpec};
    use crate::states::{apply_process_density, apply_process_ket, two_stage_densities};
    use faer::MatRef;
    use std::collections::BTreeSet;

    fn phase_aligned_error(u: MatRef<'_, c64>, v: MatRef<'_, c64>) -> f64 {
        let mut inner = c64::new(0.0, 0.0);
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                inner += u[(i, j)].conj() * v[(i, j)];
            }
        }
        let phase = inner.conj() / inner.norm();
        let mut err = 0.0;
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                err += (u[(i, j)] - v[(i, j)] * phase).norm_sqr();
            }
        }
        (err / (2.0 * u.nrows() as f64)).sqrt()
    }

    fn inputs(
        u: MatRef<'_, c64>,
        m1: usize,
        n2: usize,
        w: f64,
        seed: u64,
    ) -> (DensityMatrix, DensityMatrix, Ket) {
        let (a, b) = two_stage_densities(m1, n2).unwrap();
        let d = m1 * n2;
        let pre = |rho: &DensityMatrix, s: u64, layout| {
            let out = apply_process_density(u, rho).unwrap();
            hermitian_unit_trace(noisy_density(&out, NoiseSpec::new(w, s).unwrap()).as_ref())
                .unwrap()
                .with_layout(layout)
        };
        let phi = apply_process_ket(u, &probe_ket(d).unwrap()).unwrap();
        let phi = normalize_ket(&noisy_ket(&phi, NoiseSpec::new(w, seed + 2).unwrap())).unwrap();
        (
            pre(&a, seed, StageLayout::TwoStageFirst),
            pre(&b, seed + 1, StageLayout::TwoStageSecond),
            phi,
        )
    }

    #[test]
    fn shared_column_enumeration() {
        for (m1, n2) in [(2usize, 2usize), (4, 4), (2, 3), (3, 5), (1, 4)] {
            let d = m1 * n2;
            let mut seen = BTreeSet::new();
            for i in 0..n2 {
                let first: BTreeSet<usize> = (i * m1..(i + 1) * m1).collect();
                for j in 0..n2 {
                    let second: BTreeSet<usize> = (0..m1).map(|b| j + b * n2).collect();
                    let meet: Vec<usize> = first.intersection(&second).copied().collect();
                    let got = two_stage_shared_column(i, j, m1, n2);
                    assert_eq!(got, meet.first().copied(), "m1={m1} n2={n2} i={i} j={j}");
                    assert!(meet.len() <= 1);
                    seen.extend(got);
                }
            }
            assert_eq!(seen, (0..d).collect());
        }
    }

    #[test]
    fn noiseless_recovery_all_modes() {
        for mode in [
            Unitarization::None,
            Unitarization::BeforePhase,
            Unitarization::AfterPhase,
        ] {
            for (m1, n2) in [(2usize, 2usize), (4, 4), (2, 3), (3, 4)] {
                for seed in 0..20 {
                    let u = random_unitary(m1 * n2, 50 + seed);
                    let (a, b, phi) = inputs(u.as_ref(), m1, n2, 0.0, seed);
                    let est = eqpt_two_stage(&a, &b, &phi, m1, n2, mode).unwrap();
                    let err = phase_aligned_error(u.as_ref(), est.matrix.as_ref());
                    assert!(
                        err < 1e-9,
                        "mode={mode:?} m1={m1} n2={n2} seed={seed} err={err}"
                    );
                    for c in 0..m1 * n2 {
                        let col = est.matrix.col(c);
                        assert!(overlap_modulus(col, u.col(c)) / col.norm_l2() >= 1.0 - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_process() {
        let id = Mat::<c64>::identity(4, 4);
        let (a, b, phi) = inputs(id.as_ref(), 2, 2, 0.0, 0);
        let est = eqpt_two_stage(&a, &b, &phi, 2, 2, Unitarization::None).unwrap();
        assert!(phase_aligned_error(id.as_ref(), est.matrix.as_ref()) < 1e-14);
    }

    #[test]
    fn unitarized_modes_are_unitary_under_noise() {
        let u = random_unitary(16, 3);
        let (a, b, phi) = inputs(u.as_ref(), 4, 4, 1e-2, 9);
        for mode in [Unitarization::BeforePhase, Unitarization::AfterPhase] {
            let est = eqpt_two_stage(&a, &b, &phi, 4, 4, mode).unwrap();
            assert!(est.diagnostics.unitarity_defect <= 1e-10 * 4.0, "{mode:?}");
        }
        let plain = eqpt_two_stage(&a, &b, &phi, 4, 4, Unitarization::None).unwrap();
        assert!(plain.diagnostics.unitarity_defect > 1e-6);
    }

    #[test]
    fn rejects_bad_shapes() {
        let u = random_unitary(6, 1);
        let (a, b, phi) = inputs(u.as_ref(), 2, 3, 0.0, 0);
        assert!(matches!(
            eqpt_two_stage(&a, &b, &phi, 3, 2, Unitarization::None),
            Err(EqptError::Argument(_))
        ));
        assert!(matches!(
            eqpt_two_stage(&b, &a, &phi, 2, 3, Unitarization::None),
            Err(EqptError::Argument(_))
        ));
    }
}
