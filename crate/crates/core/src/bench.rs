//! Simulated trials and parameter sweeps.
//!
//! A trial draws a process, builds every input its method needs, propagates
//! the inputs, perturbs the outputs with the tomography noise model,
//! preprocesses them and runs the estimator. All randomness derives from the
//! trial seed; seeds do not depend on the method, so different methods in
//! the same cell see the same process and the same noise draws.

use std::time::Instant;

use faer::Par;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EqptError, Result};
use crate::estimators::{
    eqpt1, eqpt1_general_input, eqpt1_mixed_probe, eqpt5, eqpt_two_stage, mixed_phase_reference,
    Diagnostics, Method, ProcessEstimate,
};
use crate::linalg::{
    self, c64, random_unitary, random_unitary_with, ComplexMatrix, UnitaryEnsemble,
};
use crate::metrics::nrmse;
use crate::qst::{hermitian_unit_trace, noisy_density, noisy_ket, normalize_ket, NoiseSpec};
use crate::states::{
    apply_process_density, apply_process_ket, multi_stage_densities, probe_ket,
    single_stage_density, single_stage_eigenvalues, two_stage_densities, DensityMatrix, Ket,
    StageLayout,
};

/// Largest qubit count accepted by [`run_trial`].
pub const MAX_QUBITS: u32 = 14;

/// Default cap on EQPT5 qubit counts in sweeps.
pub const DEFAULT_EQPT5_MAX_QUBITS: u32 = 10;

/// Noise widths used when none are given.
pub const DEFAULT_WIDTHS: [f64; 3] = [1e-4, 1e-3, 1e-2];

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn combine(seed: u64, value: u64) -> u64 {
    mix64(seed ^ mix64(value))
}

/// Seed of trial `trial` in the cell `(qubits, width_index)`.
pub fn trial_seed(base: u64, qubits: u32, width_index: usize, trial: usize) -> u64 {
    [qubits as u64, width_index as u64, trial as u64]
        .into_iter()
        .fold(mix64(base), combine)
}

// Sub-seed purposes within a trial.
const PURPOSE_UNITARY: u64 = 0;
const PURPOSE_KET: u64 = 1;
const PURPOSE_DENSITY: u64 = 2;
const PURPOSE_KNOWN_INPUT: u64 = 1000;

fn sub_seed(seed: u64, purpose: u64) -> u64 {
    combine(seed, purpose)
}

/// Checks that `method` can run at `qubits`.
pub fn check_compatibility(method: Method, qubits: u32) -> Result<()> {
    let fail = |why: &str| {
        Err(EqptError::argument(format!(
            "{method} cannot run at {qubits} qubits: {why}"
        )))
    };
    if qubits == 0 || qubits > MAX_QUBITS {
        return fail(&format!("qubit count must be in 1..={MAX_QUBITS}"));
    }
    match method {
        Method::Eqpt2 | Method::Eqpt3 | Method::Eqpt4 if !qubits.is_multiple_of(2) => {
            fail("two-stage methods need d = m^2, i.e. an even qubit count")
        }
        Method::Eqpt5 if qubits < 3 => fail("the dichotomic method needs at least 3 qubits"),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub qubits: u32,
    pub dimension: usize,
    pub width: f64,
    pub seed: u64,
    pub nrmse: f64,
    /// Estimator wall time, data generation excluded.
    pub wall_time_s: f64,
    /// Wall time of the whole trial.
    pub total_time_s: f64,
    pub diagnostics: Diagnostics,
}

/// A trial's process, estimate and record.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub unitary: ComplexMatrix,
    pub estimate: ProcessEstimate,
    pub record: TrialRecord,
}

struct Simulator {
    unitary: ComplexMatrix,
    width: f64,
    seed: u64,
    densities: u64,
}

impl Simulator {
    fn noise(&self, purpose: u64) -> Result<NoiseSpec> {
        NoiseSpec::new(self.width, sub_seed(self.seed, purpose))
    }

    /// Propagated, noisy, preprocessed output for the next density input.
    fn density(&mut self, input: &DensityMatrix, layout: StageLayout) -> Result<DensityMatrix> {
        let noise = self.noise(PURPOSE_DENSITY + self.densities)?;
        self.densities += 1;
        let out = apply_process_density(self.unitary.as_ref(), input)?;
        Ok(hermitian_unit_trace(noisy_density(&out, noise).as_ref())?.with_layout(layout))
    }

    fn probe(&self) -> Result<Ket> {
        let d = self.unitary.nrows();
        let out = apply_process_ket(self.unitary.as_ref(), &probe_ket(d)?)?;
        normalize_ket(&noisy_ket(&out, self.noise(PURPOSE_KET)?))
    }
}

/// A known, non-diagonal input state with the single-stage spectrum.
fn known_input(d: usize, seed: u64) -> Result<DensityMatrix> {
    let v = random_unitary_with(
        d,
        sub_seed(seed, PURPOSE_KNOWN_INPUT),
        UnitaryEnsemble::ComplexGinibre,
    );
    let spectrum: Vec<c64> = single_stage_eigenvalues(d)
        .into_iter()
        .map(|x| c64::new(x, 0.0))
        .collect();
    let rho = linalg::product(
        linalg::scale_columns(v.as_ref(), &spectrum).as_ref(),
        v.adjoint(),
    );
    let rho = faer::Mat::from_fn(d, d, |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
    DensityMatrix::new(rho, StageLayout::External)
}

/// Runs one simulated estimation of `random_unitary(2^qubits, ..)` and keeps
/// the matrices.
pub fn run_trial_detailed(
    method: Method,
    qubits: u32,
    width: f64,
    seed: u64,
) -> Result<TrialOutcome> {
    check_compatibility(method, qubits)?;
    let start = Instant::now();
    let unitary = random_unitary(1usize << qubits, sub_seed(seed, PURPOSE_UNITARY));
    simulate_from(method, unitary, width, seed, start)
}

/// Runs one simulated estimation of a given process. Its dimension must be a
/// power of two; `seed` drives the noise (and any auxiliary input).
pub fn simulate(
    method: Method,
    unitary: ComplexMatrix,
    width: f64,
    seed: u64,
) -> Result<TrialOutcome> {
    let d = unitary.nrows();
    if unitary.ncols() != d || d < 2 || !d.is_power_of_two() {
        return Err(EqptError::argument(format!(
            "process must be square with a power-of-two dimension, got {}x{}",
            unitary.nrows(),
            unitary.ncols()
        )));
    }
    check_compatibility(method, d.trailing_zeros())?;
    let defect = linalg::unitarity_defect(unitary.as_ref());
    if !(defect <= 1e-10 * (d as f64).sqrt()) {
        return Err(EqptError::argument(format!(
            "process is not unitary (||U^H U - I||_F = {defect:.3e})"
        )));
    }
    simulate_from(method, unitary, width, seed, Instant::now())
}

fn simulate_from(
    method: Method,
    unitary: ComplexMatrix,
    width: f64,
    seed: u64,
    total: Instant,
) -> Result<TrialOutcome> {
    NoiseSpec::new(width, 0)?;
    let d = unitary.nrows();
    let qubits = d.trailing_zeros();
    let mut sim = Simulator {
        unitary,
        width,
        seed,
        densities: 0,
    };

    let (estimate, wall) = match method {
        Method::Eqpt1 => {
            let rho2 = sim.density(&single_stage_density(d)?, StageLayout::SingleStage)?;
            let phi2 = sim.probe()?;
            timed(|| eqpt1(&rho2, &phi2, d))?
        }
        Method::Eqpt2 | Method::Eqpt3 | Method::Eqpt4 => {
            let m = 1usize << (qubits / 2);
            let (first, second) = two_stage_densities(m, m)?;
            let rho2 = sim.density(&first, StageLayout::TwoStageFirst)?;
            let rho6 = sim.density(&second, StageLayout::TwoStageSecond)?;
            let phi2 = sim.probe()?;
            timed(|| eqpt_two_stage(&rho2, &rho6, &phi2, m, m, method.unitarization()))?
        }
        Method::Eqpt5 => {
            let stages = multi_stage_densities(d)?
                .iter()
                .enumerate()
                .map(|(level, rho)| sim.density(rho, StageLayout::MultiStage { level }))
                .collect::<Result<Vec<_>>>()?;
            let phi2 = sim.probe()?;
            timed(|| eqpt5(&stages, &phi2, d))?
        }
        Method::VariantG => {
            let rho1 = known_input(d, seed)?;
            let rho2 = sim.density(&rho1, StageLayout::External)?;
            let phi2 = sim.probe()?;
            timed(|| eqpt1_general_input(&rho1, &rho2, &phi2))?
        }
        Method::VariantH => {
            let rho2 = sim.density(&single_stage_density(d)?, StageLayout::SingleStage)?;
            let rho5 = mixed_phase_reference(d)?;
            let rho8 = sim.density(&rho5, StageLayout::External)?;
            timed(|| eqpt1_mixed_probe(&rho2, &rho5, &rho8))?
        }
    };

    let error = nrmse(sim.unitary.as_ref(), estimate.matrix.as_ref())?;
    let total_time_s = total.elapsed().as_secs_f64();
    log::debug!("{method} q={qubits} w={width:e}: nrmse {error:.3e}, estimator {wall:.3}s, total {total_time_s:.3}s");
    let record = TrialRecord {
        method,
        qubits,
        dimension: d,
        width,
        seed,
        nrmse: error,
        wall_time_s: wall,
        total_time_s,
        diagnostics: estimate.diagnostics.clone(),
    };
    Ok(TrialOutcome {
        unitary: sim.unitary,
        estimate,
        record,
    })
}

/// Runs one simulated estimation and returns its record.
pub fn run_trial(method: Method, qubits: u32, width: f64, seed: u64) -> Result<TrialRecord> {
    run_trial_detailed(method, qubits, width, seed).map(|o| o.record)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub qubits: Vec<u32>,
    pub widths: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; results do not depend on it.
    pub parallelism: usize,
    /// Whether timings are reported in the table. Timings are the only
    /// run-dependent values, so a table without them is reproducible byte
    /// for byte.
    pub record_timing: bool,
    /// EQPT5 cells above this qubit count are skipped.
    pub eqpt5_max_qubits: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            methods: vec![Method::Eqpt1, Method::Eqpt2],
            qubits: vec![2, 4, 6],
            widths: DEFAULT_WIDTHS.to_vec(),
            trials: 20,
            base_seed: 1,
            parallelism: 1,
            record_timing: true,
            eqpt5_max_qubits: DEFAULT_EQPT5_MAX_QUBITS,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(EqptError::argument("trials per cell must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(EqptError::argument("parallelism must be at least 1"));
        }
        if self.methods.is_empty() || self.qubits.is_empty() || self.widths.is_empty() {
            return Err(EqptError::argument(
                "methods, qubits and widths must all be non-empty",
            ));
        }
        for &w in &self.widths {
            NoiseSpec::new(w, 0)?;
        }
        Ok(())
    }
}

/// Aggregate of one `(method, qubits, width)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub qubits: u32,
    pub dimension: usize,
    pub width: f64,
    pub trials: usize,
    pub mean_nrmse: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std_nrmse: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub p90_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedCell {
    pub method: Method,
    pub qubits: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
    pub skipped: Vec<SkippedCell>,
    pub total_time_s: f64,
}

struct CellPlan {
    method: Method,
    qubits: u32,
    width_index: usize,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Aggregates the records of one cell; the result does not depend on their order.
pub fn summarize(records: &[TrialRecord]) -> Result<CellSummary> {
    let first = records
        .first()
        .ok_or_else(|| EqptError::argument("cannot summarize an empty cell"))?;
    let n = records.len();
    // Sorting first makes the floating-point sums independent of record order.
    let mut errors: Vec<f64> = records.iter().map(|r| r.nrmse).collect();
    errors.sort_by(f64::total_cmp);
    let mean = errors.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut times: Vec<f64> = records.iter().map(|r| r.wall_time_s).collect();
    times.sort_by(f64::total_cmp);
    Ok(CellSummary {
        method: first.method,
        qubits: first.qubits,
        dimension: first.dimension,
        width: first.width,
        trials: n,
        mean_nrmse: mean,
        std_nrmse: std,
        mean_time_s: times.iter().sum::<f64>() / n as f64,
        median_time_s: percentile(&times, 0.5),
        p90_time_s: percentile(&times, 0.9),
    })
}

/// Runs every compatible `(method, qubits, width)` cell of `config`.
///
/// Each trial runs single-threaded; trials are spread over
/// `config.parallelism` workers and gathered by index, so the report (apart
/// from timings) is the same for any degree of parallelism.
pub fn sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let start = Instant::now();

    let mut plans = Vec::new();
    let mut skipped = Vec::new();
    for &method in &config.methods {
        for &qubits in &config.qubits {
            let verdict = check_compatibility(method, qubits).and_then(|()| {
                if method == Method::Eqpt5 && qubits > config.eqpt5_max_qubits {
                    Err(EqptError::argument(format!(
                        "{method} sweeps are capped at {} qubits",
                        config.eqpt5_max_qubits
                    )))
                } else {
                    Ok(())
                }
            });
            if let Err(e) = verdict {
                log::warn!("skipping {method} at {qubits} qubits: {e}");
                skipped.push(SkippedCell {
                    method,
                    qubits,
                    reason: e.to_string(),
                });
                continue;
            }
            for width_index in 0..config.widths.len() {
                plans.push(CellPlan {
                    method,
                    qubits,
                    width_index,
                });
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|cell| (0..config.trials).map(move |trial| (cell, trial)))
        .collect();
    let run = |&(cell, trial): &(usize, usize)| {
        let plan = &plans[cell];
        let seed = trial_seed(config.base_seed, plan.qubits, plan.width_index, trial);
        linalg::with_parallelism(Par::Seq, || {
            run_trial(
                plan.method,
                plan.qubits,
                config.widths[plan.width_index],
                seed,
            )
        })
    };
    let results: Vec<Result<TrialRecord>> = if config.parallelism == 1 {
        jobs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| {
                EqptError::argument(format!("cannot start {} workers: {e}", config.parallelism))
            })?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let cells = records
        .chunks(config.trials)
        .map(summarize)
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        cells,
        records,
        skipped,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_trials_are_exact() {
        for method in Method::ALL {
            let q = match method {
                Method::Eqpt5 => 3,
                _ => 2,
            };
            let r = run_trial(method, q, 0.0, 77).unwrap();
            assert!(r.nrmse < 1e-10, "{method}: {}", r.nrmse);
            assert_eq!(r.dimension, 1 << q);
            assert!(r.wall_time_s >= 0.0 && r.total_time_s >= r.wall_time_s);
        }
    }

    #[test]
    fn compatibility_rules() {
        assert!(matches!(
            run_trial(Method::Eqpt2, 3, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
        assert!(matches!(
            run_trial(Method::Eqpt5, 2, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
        assert!(matches!(
            run_trial(Method::Eqpt1, 0, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
        assert!(matches!(
            run_trial(Method::Eqpt1, 2, -1.0, 1),
            Err(EqptError::Argument(_))
        ));
    }

    #[test]
    fn trials_are_reproducible() {
        let a = run_trial(Method::Eqpt2, 4, 1e-3, 9).unwrap();
        let b = run_trial(Method::Eqpt2, 4, 1e-3, 9).unwrap();
        assert_eq!(a.nrmse.to_bits(), b.nrmse.to_bits());
    }

    #[test]
    fn methods_share_the_process() {
        let a = run_trial_detailed(Method::Eqpt1, 4, 1e-3, 5).unwrap();
        let b = run_trial_detailed(Method::Eqpt2, 4, 1e-3, 5).unwrap();
        assert_eq!(a.unitary, b.unitary);
    }

    #[test]
    fn simulate_checks_its_process() {
        let u = random_unitary(8, 4);
        let out = simulate(Method::Eqpt5, u.clone(), 0.0, 1).unwrap();
        assert!(out.record.nrmse < 1e-10);
        assert_eq!(out.record.qubits, 3);
        assert!(matches!(
            simulate(Method::Eqpt2, u, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
        let not_unitary = linalg::diagonal_matrix(&[c64::new(2.0, 0.0); 4]);
        assert!(matches!(
            simulate(Method::Eqpt1, not_unitary, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
        let odd = faer::Mat::<c64>::identity(3, 3);
        assert!(matches!(
            simulate(Method::Eqpt1, odd, 0.0, 1),
            Err(EqptError::Argument(_))
        ));
    }

    #[test]
    fn seeds_differ_across_cells() {
        let mut seen = std::collections::BTreeSet::new();
        for q in 1..6 {
            for w in 0..3 {
                for t in 0..50 {
                    assert!(seen.insert(trial_seed(3, q, w, t)));
                }
            }
        }
        assert_ne!(trial_seed(3, 2, 0, 0), trial_seed(4, 2, 0, 0));
    }

    #[test]
    fn single_cell_sweep_is_a_trial() {
        let config = SweepConfig {
            methods: vec![Method::Eqpt1],
            qubits: vec![3],
            widths: vec![1e-3],
            trials: 1,
            base_seed: 12,
            ..SweepConfig::default()
        };
        let report = sweep(&config).unwrap();
        assert_eq!(report.cells.len(), 1);
        let direct = run_trial(Method::Eqpt1, 3, 1e-3, trial_seed(12, 3, 0, 0)).unwrap();
        assert_eq!(report.cells[0].mean_nrmse, direct.nrmse);
        assert_eq!(report.cells[0].std_nrmse, 0.0);
    }

    #[test]
    fn summary_ignores_record_order() {
        let config = SweepConfig {
            methods: vec![Method::Eqpt1],
            qubits: vec![2],
            widths: vec![1e-2],
            trials: 100,
            ..SweepConfig::default()
        };
        let mut records = sweep(&config).unwrap().records;
        let a = summarize(&records).unwrap();
        records.reverse();
        records.swap(3, 70);
        let b = summarize(&records).unwrap();
        assert_eq!(a.mean_nrmse.to_bits(), b.mean_nrmse.to_bits());
        assert_eq!(a.std_nrmse.to_bits(), b.std_nrmse.to_bits());
    }

    #[test]
    fn sweep_skips_incompatible_cells() {
        let config = SweepConfig {
            methods: vec![Method::Eqpt1, Method::Eqpt2, Method::Eqpt5],
            qubits: vec![2, 3],
            widths: vec![0.0],
            trials: 2,
            eqpt5_max_qubits: 2,
            ..SweepConfig::default()
        };
        let report = sweep(&config).unwrap();
        let cells: Vec<(Method, u32)> = report.cells.iter().map(|c| (c.method, c.qubits)).collect();
        assert_eq!(
            cells,
            vec![(Method::Eqpt1, 2), (Method::Eqpt1, 3), (Method::Eqpt2, 2)]
        );
        assert_eq!(report.skipped.len(), 3);
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let config = SweepConfig {
            methods: vec![Method::Eqpt1, Method::Eqpt3, Method::Eqpt5],
            qubits: vec![3, 4],
            widths: vec![1e-3, 1e-2],
            trials: 3,
            ..SweepConfig::default()
        };
        let seq = sweep(&config).unwrap();
        let par = sweep(&SweepConfig {
            parallelism: 4,
            ..config
        })
        .unwrap();
        let key = |r: &SweepReport| {
            r.cells
                .iter()
                .map(|c| (c.mean_nrmse.to_bits(), c.std_nrmse.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&seq), key(&par));
    }

    #[test]
    fn rejects_empty_config() {
        assert!(sweep(&SweepConfig {
            trials: 0,
            ..SweepConfig::default()
        })
        .is_err());
        assert!(sweep(&SweepConfig {
            methods: vec![],
            ..SweepConfig::default()
        })
        .is_err());
    }
}
