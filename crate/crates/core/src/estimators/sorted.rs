use faer::Mat;

use crate::error::Result;
use crate::linalg::{self, c64, ComplexMatrix, TOLERANCES};
use crate::states::DensityMatrix;

/// Eigenpairs ordered by nonincreasing eigenvalue, unit-norm columns.
#[derive(Debug, Clone)]
pub struct SortedEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
    /// Degenerate blocks whose eigenvectors were re-orthonormalized.
    pub reorthonormalized_blocks: usize,
}

impl SortedEig {
    /// Smallest `values[b - 1] - values[b]` over the given split points.
    pub fn gap_at(&self, boundaries: impl IntoIterator<Item = usize>) -> f64 {
        boundaries
            .into_iter()
            .filter(|&b| b > 0 && b < self.values.len())
            .map(|b| self.values[b - 1] - self.values[b])
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.gap_at(1..self.values.len())
    }
}

/// Eigendecomposition with a stable descending sort (ties keep the solver's
/// order) and explicit column normalization.
pub fn sorted_eigendecomposition(rho_hat: &DensityMatrix) -> Result<SortedEig> {
    let eig = linalg::hermitian_eig(rho_hat.matrix())?;
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));

    let values: Vec<f64> = order.iter().map(|&k| eig.values[k]).collect();
    let d = eig.vectors.nrows();
    let mut vectors = Mat::from_fn(d, order.len(), |i, j| eig.vectors[(i, order[j])]);
    linalg::normalize_columns(&mut vectors)?;
    let reorthonormalized_blocks = repair_degenerate_blocks(&values, &mut vectors)?;

    Ok(SortedEig {
        values,
        vectors,
        reorthonormalized_blocks,
    })
}

fn repair_degenerate_blocks(values: &[f64], vectors: &mut ComplexMatrix) -> Result<usize> {
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tie = 1e3 * f64::EPSILON * scale;
    let mut repaired = 0;
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end - 1] - values[end] <= tie {
            end += 1;
        }
        if end - start > 1 {
            let block = vectors.get(.., start..end);
            let gram = linalg::product(block.adjoint(), block);
            let defect = (gram - Mat::<c64>::identity(end - start, end - start)).norm_l2();
            if defect > TOLERANCES.block_gram {
                let q = linalg::orthonormal_basis(block)?;
                vectors.get_mut(.., start..end).copy_from(&q);
                log::debug!("re-orthonormalized eigenvector block {start}..{end} (Gram defect {defect:.3e})");
                repaired += 1;
            }
        }
        start = end;
    }
    Ok(repaired)
}
