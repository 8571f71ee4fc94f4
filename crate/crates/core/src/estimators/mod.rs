//! Process estimators.
//!
//! Every estimator consumes preprocessed state estimates (Hermitian, unit
//! trace; normalized kets) and returns the process matrix up to one global
//! phase.

mod multi_stage;
mod phase;
mod single_stage;
mod sorted;
mod two_stage;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{EqptError, Result};
use crate::linalg::{self, c64, ComplexMatrix};
use crate::states::{DensityMatrix, StageLayout};

pub use multi_stage::{dichotomic_leaf_table, dichotomic_stage_subsets, eqpt5, LeafRow};
pub use phase::{resolve_phases_mixed, resolve_phases_pure, resolve_phases_unit_modulus};
pub use single_stage::{eqpt1, eqpt1_general_input, eqpt1_mixed_probe, mixed_phase_reference};
pub use sorted::{sorted_eigendecomposition, SortedEig};
pub use two_stage::{eqpt_two_stage, two_stage_shared_column};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Eqpt1,
    Eqpt2,
    Eqpt3,
    Eqpt4,
    Eqpt5,
    VariantG,
    VariantH,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Eqpt1,
        Method::Eqpt2,
        Method::Eqpt3,
        Method::Eqpt4,
        Method::Eqpt5,
        Method::VariantG,
        Method::VariantH,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Eqpt1 => "eqpt1",
            Method::Eqpt2 => "eqpt2",
            Method::Eqpt3 => "eqpt3",
            Method::Eqpt4 => "eqpt4",
            Method::Eqpt5 => "eqpt5",
            Method::VariantG => "variant-g",
            Method::VariantH => "variant-h",
        }
    }

    /// Unitarization applied by the two-stage methods; `None` for the others.
    pub fn unitarization(self) -> Unitarization {
        match self {
            Method::Eqpt3 => Unitarization::BeforePhase,
            Method::Eqpt4 => Unitarization::AfterPhase,
            _ => Unitarization::None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = EqptError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.id() == key || (key.len() == 1 && m.id().ends_with(&key)))
            .ok_or_else(|| {
                EqptError::argument(format!(
                    "unknown method '{s}' (expected one of {})",
                    Method::ALL.map(Method::id).join(", ")
                ))
            })
    }
}

/// Where the two-stage estimator projects onto the unitary group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unitarization {
    None,
    /// Project the column estimate, then apply unit-modulus phase corrections.
    BeforePhase,
    /// Apply the phase corrections, then project the result.
    AfterPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Per eigendecomposition, the smallest eigenvalue gap across the
    /// boundaries that split its spectrum into subsets.
    pub min_eigen_gaps: Vec<f64>,
    /// `||U^H U - I||_F` of the returned matrix.
    pub unitarity_defect: f64,
    pub stage_times: Vec<StageTime>,
    /// Degenerate eigenvector blocks that had to be re-orthonormalized.
    pub reorthonormalized_blocks: usize,
    /// Smallest gap between the first and second canonical correlations over
    /// all subspace intersections (1 for exact data).
    pub min_cca_margin: Option<f64>,
    /// Leaf columns of the dichotomic recursion, in emission order.
    pub leaf_columns: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ProcessEstimate {
    pub matrix: ComplexMatrix,
    pub method: Method,
    pub unitarization: Unitarization,
    pub diagnostics: Diagnostics,
}

/// Collects stage timings for one estimate.
struct StageClock {
    times: Vec<StageTime>,
}

impl StageClock {
    fn new() -> Self {
        StageClock { times: Vec::new() }
    }

    fn time<R>(&mut self, label: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.times.push(StageTime {
            label: label.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn check_layout(rho: &DensityMatrix, expected: StageLayout, what: &str) -> Result<()> {
    match rho.layout() {
        StageLayout::External => Ok(()),
        l if l == expected => Ok(()),
        l => Err(EqptError::argument(format!(
            "{what} has layout {l:?}, expected {expected:?}"
        ))),
    }
}

fn check_dim(actual: usize, d: usize, what: &str) -> Result<()> {
    if actual != d {
        return Err(EqptError::dimension(format!(
            "{what} has dimension {actual}, expected {d}"
        )));
    }
    Ok(())
}

fn finish(
    matrix: ComplexMatrix,
    method: Method,
    mut diagnostics: Diagnostics,
    clock: StageClock,
) -> Result<ProcessEstimate> {
    if !finite(matrix.as_ref()) {
        return Err(EqptError::numerical(format!(
            "{method} produced non-finite entries"
        )));
    }
    diagnostics.unitarity_defect = linalg::unitarity_defect(matrix.as_ref());
    diagnostics.stage_times = clock.times;
    Ok(ProcessEstimate {
        matrix,
        method,
        unitarization: method.unitarization(),
        diagnostics,
    })
}

fn finite(a: MatRef<'_, c64>) -> bool {
    a.col_iter()
        .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}
