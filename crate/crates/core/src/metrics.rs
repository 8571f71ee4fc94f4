//! Phase-blind distance between process matrices.

use faer::MatRef;

use crate::error::{EqptError, Result};
use crate::linalg::c64;

/// `min_θ ||U - e^{iθ} Û||_F² / (2d)`, which equals
/// `(||U||² + ||Û||² - 2 |Tr(U^H Û)|) / (2d)`.
///
/// The minimizing phase is `arg Tr(U^H Û)`; the residual is then summed
/// entry by entry rather than through the closed form, whose cancellation
/// would leave an error of order machine epsilon (and hence `1e-8` after a
/// square root) on near-perfect estimates.
pub fn nmse(u: MatRef<'_, c64>, u_hat: MatRef<'_, c64>) -> Result<f64> {
    if u.shape() != u_hat.shape() || u.nrows() == 0 {
        return Err(EqptError::argument(format!(
            "cannot compare a {}x{} matrix with a {}x{} matrix",
            u.nrows(),
            u.ncols(),
            u_hat.nrows(),
            u_hat.ncols()
        )));
    }
    let mut inner = c64::new(0.0, 0.0);
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            inner += u[(i, j)].conj() * u_hat[(i, j)];
        }
    }
    let modulus = inner.norm();
    let phase = if modulus > 0.0 {
        inner.conj() / modulus
    } else {
        c64::new(1.0, 0.0)
    };
    let mut residual = 0.0;
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            residual += (u[(i, j)] - phase * u_hat[(i, j)]).norm_sqr();
        }
    }
    Ok(residual / (2.0 * u.nrows() as f64))
}

/// `sqrt(nmse)`.
pub fn nrmse(u: MatRef<'_, c64>, u_hat: MatRef<'_, c64>) -> Result<f64> {
    nmse(u, u_hat).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unitary, random_unitary_with, UnitaryEnsemble};
    use faer::Mat;
    use proptest::prelude::*;

    fn closed_form(u: MatRef<'_, c64>, v: MatRef<'_, c64>) -> f64 {
        let mut t = c64::new(0.0, 0.0);
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                t += u[(i, j)].conj() * v[(i, j)];
            }
        }
        (u.norm_l2().powi(2) + v.norm_l2().powi(2) - 2.0 * t.norm()) / (2.0 * u.nrows() as f64)
    }

    fn scaled(u: &Mat<c64>, z: c64) -> Mat<c64> {
        Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * z)
    }

    #[test]
    fn examples() {
        let u = random_unitary(4, 1);
        assert_eq!(nmse(u.as_ref(), u.as_ref()).unwrap(), 0.0);
        assert!(nmse(u.as_ref(), scaled(&u, c64::cis(1.3)).as_ref()).unwrap() < 1e-15);
        assert_eq!(nrmse(u.as_ref(), u.as_ref()).unwrap(), 0.0);

        let id = Mat::<c64>::identity(2, 2);
        let swap = Mat::from_fn(2, 2, |i, j| c64::new(if i != j { 1.0 } else { 0.0 }, 0.0));
        assert!((nmse(id.as_ref(), swap.as_ref()).unwrap() - 1.0).abs() < 1e-15);

        let small = Mat::<c64>::identity(3, 3);
        assert!(matches!(
            nmse(id.as_ref(), small.as_ref()),
            Err(EqptError::Argument(_))
        ));
    }

    #[test]
    fn nrmse_is_root() {
        // diag(1, 1) against diag(1, 1 - x) with real x: nmse = x²/4
        let id = Mat::<c64>::identity(2, 2);
        let mut v = id.clone();
        v[(1, 1)] = c64::new(1.0 - 0.4, 0.0);
        let e = nmse(id.as_ref(), v.as_ref()).unwrap();
        assert!((e - 0.04).abs() < 1e-15);
        assert!((nrmse(id.as_ref(), v.as_ref()).unwrap() - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_closed_form(seed in any::<u64>(), d in 1usize..9) {
            let u = random_unitary_with(d, seed, UnitaryEnsemble::ComplexGinibre);
            let v = random_unitary_with(d, seed ^ 0x5555, UnitaryEnsemble::ComplexGinibre);
            let a = nmse(u.as_ref(), v.as_ref()).unwrap();
            prop_assert!((a - closed_form(u.as_ref(), v.as_ref())).abs() < 1e-12);
            prop_assert!(a <= 1.0 + 1e-9);
        }

        #[test]
        fn phase_blind_in_both_arguments(seed in any::<u64>(), a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let u = random_unitary_with(4, seed, UnitaryEnsemble::ComplexGinibre);
            let v = random_unitary_with(4, seed.wrapping_add(1), UnitaryEnsemble::ComplexGinibre);
            let base = nmse(u.as_ref(), v.as_ref()).unwrap();
            let moved = nmse(scaled(&u, c64::cis(a)).as_ref(), scaled(&v, c64::cis(b)).as_ref()).unwrap();
            prop_assert!((base - moved).abs() < 1e-12);
        }
    }
}
