//! Simulated state-tomography error and the preprocessing that undoes its
//! structural damage.
//!
//! Fluctuations come from ChaCha8 seeded with [`NoiseSpec::seed`]. A ket uses
//! stream 0; row `k` of a density matrix uses stream `k`, so every entry's
//! draws depend only on `(seed, k, l)` and never on evaluation order.

use faer::{Col, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EqptError, Result};
use crate::linalg::{c64, ComplexMatrix, TOLERANCES};
use crate::states::{trace, DensityMatrix, Ket, StageLayout};

/// Uniform fluctuations on `[-w/2, w/2]` (variance `w^2 / 12`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub width: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(width: f64, seed: u64) -> Result<Self> {
        if !(width >= 0.0) || !width.is_finite() {
            return Err(EqptError::argument(format!(
                "noise width must be finite and >= 0, got {width}"
            )));
        }
        Ok(NoiseSpec { width, seed })
    }

    fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.width * (rng.random::<f64>() - 0.5)
    }
}

/// Adds an independent complex fluctuation to every amplitude. The result is
/// not renormalized.
pub fn noisy_ket(psi: &Ket, noise: NoiseSpec) -> Ket {
    if noise.width == 0.0 {
        return psi.clone();
    }
    let mut rng = noise.stream(0);
    let amps = psi.amplitudes();
    let out = Col::from_fn(psi.dim(), |k| {
        let re = noise.draw(&mut rng);
        let im = noise.draw(&mut rng);
        amps[k] + c64::new(re, im)
    });
    Ket::new(out)
}

/// Entry-wise model
/// `ρ̂_kl = ρ_kl + 2 sqrt|ρ_kl| εR + εR² + i (2 sqrt|ρ_kl| εI + εI²)`,
/// with `(k, l)` and `(l, k)` perturbed independently. The output is in
/// general neither Hermitian nor of unit trace.
pub fn noisy_density(rho: &DensityMatrix, noise: NoiseSpec) -> ComplexMatrix {
    let m = rho.matrix();
    if noise.width == 0.0 {
        return m.to_owned();
    }
    let d = rho.dim();
    let mut out = Mat::<c64>::zeros(d, d);
    for k in 0..d {
        let mut rng = noise.stream(k as u64);
        for l in 0..d {
            let er = noise.draw(&mut rng);
            let ei = noise.draw(&mut rng);
            let root = m[(k, l)].norm().sqrt();
            out[(k, l)] =
                m[(k, l)] + c64::new(2.0 * root * er + er * er, 2.0 * root * ei + ei * ei);
        }
    }
    out
}

/// Hermitian part scaled to unit trace: `H / tr(H)` with `H = (ρ̂ + ρ̂^H) / 2`.
pub fn hermitian_unit_trace(rho_hat: MatRef<'_, c64>) -> Result<DensityMatrix> {
    let d = rho_hat.nrows();
    if d == 0 || rho_hat.ncols() != d {
        return Err(EqptError::dimension(format!(
            "state estimate must be square and non-empty, got {}x{}",
            d,
            rho_hat.ncols()
        )));
    }
    let tr = trace(rho_hat).re;
    if !(tr.abs() > TOLERANCES.tiny) {
        return Err(EqptError::numerical(format!(
            "trace of the Hermitian part is {tr:.3e}; the estimate is unusable"
        )));
    }
    let scale = 0.5 / tr;
    let out = Mat::from_fn(d, d, |i, j| {
        if i == j {
            c64::new(rho_hat[(i, i)].re / tr, 0.0)
        } else {
            (rho_hat[(i, j)] + rho_hat[(j, i)].conj()) * scale
        }
    });
    Ok(DensityMatrix::from_parts_unchecked(
        out,
        StageLayout::External,
    ))
}

/// `psi / ||psi||`.
pub fn normalize_ket(psi_hat: &Ket) -> Result<Ket> {
    let norm = psi_hat.norm();
    if !(norm > TOLERANCES.tiny) {
        return Err(EqptError::numerical(format!(
            "cannot normalize a ket of norm {norm:.3e}"
        )));
    }
    let inv = 1.0 / norm;
    let amps = psi_hat.amplitudes();
    Ok(Ket::new(Col::from_fn(psi_hat.dim(), |k| amps[k] * inv)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unitary;
    use crate::states::{apply_process_density, probe_ket, single_stage_density};
    use proptest::prelude::*;

    #[test]
    fn zero_width_is_identity() {
        let psi = probe_ket(8).unwrap();
        assert_eq!(noisy_ket(&psi, NoiseSpec::new(0.0, 3).unwrap()), psi);
        let rho = single_stage_density(8).unwrap();
        assert_eq!(
            noisy_density(&rho, NoiseSpec::new(0.0, 3).unwrap()),
            rho.matrix().to_owned()
        );
    }

    #[test]
    fn ket_noise_support() {
        let psi = probe_ket(4).unwrap();
        let out = noisy_ket(&psi, NoiseSpec::new(0.2, 11).unwrap());
        for k in 0..4 {
            let delta = out.amplitudes()[k] - psi.amplitudes()[k];
            assert!(delta.re.abs() <= 0.1 && delta.im.abs() <= 0.1);
        }
        assert_ne!(out, psi);
    }

    #[test]
    fn ket_noise_variance() {
        let w = 0.12;
        let d = 100_000;
        let zero = Ket::new(Col::zeros(d));
        let out = noisy_ket(&zero, NoiseSpec::new(w, 2024).unwrap());
        let xs: Vec<f64> = out.amplitudes().iter().map(|z| z.re).collect();
        let mean = xs.iter().sum::<f64>() / d as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d - 1) as f64;
        let target = w * w / 12.0;
        assert!((var - target).abs() < 0.05 * target, "{var} vs {target}");
    }

    #[test]
    fn density_noise_bounds() {
        let rho = single_stage_density(2).unwrap();
        let w = 0.1;
        let out = noisy_density(&rho, NoiseSpec::new(w, 5).unwrap());
        for k in 0..2 {
            for l in 0..2 {
                let r = rho.matrix()[(k, l)];
                let bound = 2.0 * r.norm().sqrt() * (w / 2.0) + (w / 2.0).powi(2);
                let delta = out[(k, l)] - r;
                assert!(delta.re.abs() <= bound + 1e-15 && delta.im.abs() <= bound + 1e-15);
                if r.norm() == 0.0 {
                    assert!(delta.re >= 0.0 && delta.im >= 0.0 && delta.re <= w * w / 4.0);
                }
            }
        }
        // no Hermitian coupling
        assert_ne!(out[(0, 1)], out[(1, 0)].conj());
    }

    #[test]
    fn density_noise_bias() {
        // zero entries see only εR² + iεI², of mean w²/12 per part
        let d = 317;
        let w = 0.05;
        let zero = DensityMatrix::from_parts_unchecked(Mat::zeros(d, d), StageLayout::External);
        let out = noisy_density(&zero, NoiseSpec::new(w, 8).unwrap());
        let n = (d * d) as f64;
        let mean_re = out
            .col_iter()
            .flat_map(|c| c.iter().map(|z| z.re).collect::<Vec<_>>())
            .sum::<f64>()
            / n;
        let mean_im = out
            .col_iter()
            .flat_map(|c| c.iter().map(|z| z.im).collect::<Vec<_>>())
            .sum::<f64>()
            / n;
        let target = w * w / 12.0;
        assert!((mean_re - target).abs() < 0.1 * target);
        assert!((mean_im - target).abs() < 0.1 * target);
    }

    #[test]
    fn hermitian_unit_trace_examples() {
        let rho = single_stage_density(4).unwrap();
        let same = hermitian_unit_trace(rho.matrix()).unwrap();
        assert!((same.matrix() - rho.matrix()).norm_l2() < 1e-15);

        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c64::new(1.0, 0.0),
            (0, 1) => c64::new(0.0, 1.0),
            _ => c64::new(0.0, 0.0),
        });
        let h = hermitian_unit_trace(a.as_ref()).unwrap();
        let want = [
            [c64::new(0.5, 0.0), c64::new(0.0, 0.25)],
            [c64::new(0.0, -0.25), c64::new(0.5, 0.0)],
        ];
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((h.matrix()[(i, j)] - w).norm() < 1e-15);
            }
        }

        let zero = Mat::<c64>::zeros(3, 3);
        assert!(matches!(
            hermitian_unit_trace(zero.as_ref()),
            Err(EqptError::Numerical(_))
        ));
    }

    #[test]
    fn preprocessing_tracks_true_state() {
        let u = random_unitary(8, 21);
        let rho2 = apply_process_density(u.as_ref(), &single_stage_density(8).unwrap()).unwrap();
        let noisy = noisy_density(&rho2, NoiseSpec::new(1e-3, 4).unwrap());
        let pre = hermitian_unit_trace(noisy.as_ref()).unwrap();
        assert!((pre.matrix() - rho2.matrix()).norm_l2() < 3e-3);
        DensityMatrix::new(pre.into_matrix(), StageLayout::External).unwrap();
    }

    #[test]
    fn normalize_ket_examples() {
        let k = normalize_ket(&Ket::from_slice(&[c64::new(2.0, 0.0), c64::new(0.0, 0.0)])).unwrap();
        assert_eq!(
            k,
            Ket::from_slice(&[c64::new(1.0, 0.0), c64::new(0.0, 0.0)])
        );
        let p = probe_ket(4).unwrap();
        assert!((normalize_ket(&p).unwrap().amplitudes() - p.amplitudes()).norm_l2() < 1e-16);
        let noisy = noisy_ket(&probe_ket(16).unwrap(), NoiseSpec::new(1e-2, 1).unwrap());
        assert!((normalize_ket(&noisy).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(normalize_ket(&Ket::new(Col::zeros(3))).is_err());
    }

    #[test]
    fn rejects_bad_width() {
        assert!(NoiseSpec::new(-1.0, 0).is_err());
        assert!(NoiseSpec::new(f64::NAN, 0).is_err());
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(seed in any::<u64>(), w in 0.0f64..0.05) {
            let rho = single_stage_density(5).unwrap();
            let noisy = noisy_density(&rho, NoiseSpec::new(w, seed).unwrap());
            let once = hermitian_unit_trace(noisy.as_ref()).unwrap();
            let twice = hermitian_unit_trace(once.matrix()).unwrap();
            prop_assert!((once.matrix() - twice.matrix()).norm_l2() < 1e-15);
            prop_assert!(crate::linalg::hermitian_defect(once.matrix()) < 1e-15);
        }

        #[test]
        fn noise_is_reproducible(seed in any::<u64>(), w in 0.0f64..1.0) {
            let rho = single_stage_density(4).unwrap();
            let spec = NoiseSpec::new(w, seed).unwrap();
            prop_assert_eq!(noisy_density(&rho, spec), noisy_density(&rho, spec));
            let psi = probe_ket(4).unwrap();
            prop_assert_eq!(noisy_ket(&psi, spec), noisy_ket(&psi, spec));
        }
    }
}
