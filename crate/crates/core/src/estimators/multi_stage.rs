//! Dichotomic multi-stage estimator.
//!
//! Level `ℓ` of the input layout splits the columns by bit `depth - ℓ` of
//! their 0-based index (`depth = log2(d/2)`): the larger eigenvalue sits on
//! columns where that bit is clear. Walking down one half per level narrows
//! the candidate subspace by a factor two until a single column remains,
//! whose index is the sequence of chosen halves read as a binary number.

use std::collections::BTreeSet;

use faer::{Col, Mat, MatRef, Par};

use super::{check_dim, finish, Diagnostics, Method, ProcessEstimate, StageClock};
use crate::error::{EqptError, Result};
use crate::estimators::phase::resolve_phases_pure;
use crate::estimators::sorted::sorted_eigendecomposition;
use crate::linalg::{self, c64, ComplexMatrix};
use crate::states::{dichotomic_depth, probe_ket, DensityMatrix, Ket, StageLayout};

/// 1-based column subsets of each level: `[larger eigenvalue, smaller eigenvalue]`.
pub fn dichotomic_stage_subsets(d: usize) -> Result<Vec<[Vec<usize>; 2]>> {
    let depth = dichotomic_depth(d)?;
    Ok((0..=depth)
        .map(|level| {
            let bit = depth - level;
            let (clear, set): (Vec<usize>, Vec<usize>) = (0..d).partition(|c| (c >> bit) & 1 == 0);
            [clear, set].map(|v| v.into_iter().map(|c| c + 1).collect())
        })
        .collect())
}

/// One leaf of the recursion: the subset chosen at each level (`false` for
/// the larger-eigenvalue subset) and the 1-based column left by intersecting them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafRow {
    pub path: Vec<bool>,
    pub column: usize,
}

/// Leaves in the order the recursion visits them, each obtained by explicit
/// set intersection of the chosen subsets.
pub fn dichotomic_leaf_table(d: usize) -> Result<Vec<LeafRow>> {
    let subsets = dichotomic_stage_subsets(d)?;
    let levels = subsets.len();
    let mut rows = Vec::with_capacity(d);
    for code in 0..(1usize << levels) {
        let path: Vec<bool> = (0..levels)
            .map(|l| (code >> (levels - 1 - l)) & 1 == 1)
            .collect();
        let mut meet: BTreeSet<usize> = (1..=d).collect();
        for (l, &second) in path.iter().enumerate() {
            let chosen: BTreeSet<usize> = subsets[l][second as usize].iter().copied().collect();
            meet = meet.intersection(&chosen).copied().collect();
        }
        if meet.len() != 1 {
            return Err(EqptError::numerical(format!(
                "path {path:?} leaves {} columns instead of one",
                meet.len()
            )));
        }
        rows.push(LeafRow {
            path,
            column: meet.into_iter().next().unwrap_or_default(),
        });
    }
    Ok(rows)
}

struct Leaf {
    column: usize,
    vector: Col<c64>,
}

struct Walk<'a> {
    halves: &'a [[ComplexMatrix; 2]],
    d: usize,
    par: Par,
}

struct Branch {
    leaves: Vec<Leaf>,
    margin: f64,
}

impl Walk<'_> {
    fn depth(&self) -> usize {
        self.halves.len() - 1
    }

    fn descend(
        &self,
        level: usize,
        running: Option<MatRef<'_, c64>>,
        prefix: usize,
    ) -> Result<Branch> {
        let branch = |bit: usize| {
            linalg::with_parallelism(self.par, || self.branch(level, running, prefix, bit))
        };
        let (zero, one) = if matches!(self.par, Par::Seq) {
            (branch(0), branch(1))
        } else {
            rayon::join(|| branch(0), || branch(1))
        };
        let (mut zero, one) = (zero?, one?);
        zero.leaves.extend(one.leaves);
        Ok(Branch {
            leaves: zero.leaves,
            margin: zero.margin.min(one.margin),
        })
    }

    fn branch(
        &self,
        level: usize,
        running: Option<MatRef<'_, c64>>,
        prefix: usize,
        bit: usize,
    ) -> Result<Branch> {
        let half = self.halves[level][bit].as_ref();
        let index = 2 * prefix + bit;
        let (next, margin) = match running {
            None => (half.to_owned(), f64::INFINITY),
            Some(x) => {
                let keep = self.d >> (level + 1);
                let (dirs, sigma) = linalg::canonical_directions_orthonormal(x, half, keep)?;
                let runner_up = sigma.get(keep).copied().unwrap_or(0.0);
                (dirs, sigma[keep - 1] - runner_up)
            }
        };
        if level == self.depth() {
            let mut vector = next.col(0).to_owned();
            linalg::normalize_in_place(&mut vector)?;
            linalg::fix_phase(&mut vector);
            return Ok(Branch {
                leaves: vec![Leaf {
                    column: index,
                    vector,
                }],
                margin,
            });
        }
        let mut below = self.descend(level + 1, Some(next.as_ref()), index)?;
        below.margin = below.margin.min(margin);
        Ok(below)
    }
}

/// Dichotomic estimator. `rho_stages[ℓ]` is the preprocessed output for the
/// level-`ℓ` input, for every `ℓ` in `0..=log2(d/2)`.
pub fn eqpt5(rho_stages: &[DensityMatrix], phi2_hat: &Ket, d: usize) -> Result<ProcessEstimate> {
    let depth = dichotomic_depth(d)?;
    if rho_stages.len() != depth + 1 {
        return Err(EqptError::argument(format!(
            "dichotomic estimation at d = {d} needs {} stages, got {}",
            depth + 1,
            rho_stages.len()
        )));
    }
    for (level, rho) in rho_stages.iter().enumerate() {
        check_dim(rho.dim(), d, "stage output density")?;
        super::check_layout(
            rho,
            StageLayout::MultiStage { level },
            "stage output density",
        )?;
    }
    check_dim(phi2_hat.dim(), d, "output ket")?;

    let mut clock = StageClock::new();
    let mut gaps = Vec::with_capacity(depth + 1);
    let mut repaired = 0;
    let halves = clock.time(
        "eigendecompositions",
        || -> Result<Vec<[ComplexMatrix; 2]>> {
            rho_stages
                .iter()
                .map(|rho| {
                    let sorted = sorted_eigendecomposition(rho)?;
                    gaps.push(sorted.gap_at([d / 2]));
                    repaired += sorted.reorthonormalized_blocks;
                    Ok([
                        linalg::orthonormal_basis(sorted.vectors.get(.., ..d / 2))?,
                        linalg::orthonormal_basis(sorted.vectors.get(.., d / 2..))?,
                    ])
                })
                .collect()
        },
    )?;

    let walk = Walk {
        halves: &halves,
        d,
        par: linalg::current_par(),
    };
    let tree = clock.time("recursion", || walk.descend(0, None, 0))?;

    let mut u4 = Mat::<c64>::zeros(d, d);
    let mut emitted = vec![false; d];
    let mut order = Vec::with_capacity(d);
    for leaf in &tree.leaves {
        if leaf.column >= d || std::mem::replace(&mut emitted[leaf.column], true) {
            return Err(EqptError::numerical(format!(
                "column {} emitted twice or out of range",
                leaf.column
            )));
        }
        u4.col_mut(leaf.column).copy_from(&leaf.vector);
        order.push(leaf.column);
    }
    if order.len() != d {
        return Err(EqptError::numerical(format!(
            "recursion produced {} of {d} columns",
            order.len()
        )));
    }

    let psi1 = probe_ket(d)?;
    let u3 = clock.time("phase", || {
        resolve_phases_pure(u4.as_ref(), &psi1, phi2_hat)
    })?;

    let diagnostics = Diagnostics {
        min_eigen_gaps: gaps,
        reorthonormalized_blocks: repaired,
        min_cca_margin: Some(tree.margin),
        leaf_columns: order,
        ..Diagnostics::default()
    };
    finish(u3, Method::Eqpt5, diagnostics, clock)
}
