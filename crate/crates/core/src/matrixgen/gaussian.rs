//! Plain Gauss-Jordan elimination over the full matrix.
//!
//! Every row, binary or not, is expanded to octets. Pivot rule: for each
//! column in order, the lowest-index row not yet used as a pivot that has a
//! nonzero entry in that column.

use super::solver::check_rhs;
use super::{ConstraintMatrix, SingularReport, SolveError, Solver};
use crate::fieldmath::{fma_slice, oct_inv, scale_slice, Octet, SymbolData};

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSolver;

/// Result of eliminating a dense row-major system in place.
pub(crate) struct Eliminated {
    pub rank: usize,
    /// Pivot row for each column, `None` for free columns.
    pub pivot_of_col: Vec<Option<usize>>,
}

/// Gauss-Jordan on `rows x cols` octets in `a` with optional right-hand
/// sides of `t` bytes each in `rhs` (`t == 0` means rank only). On return
/// every pivot row is normalized and its column is zero elsewhere.
pub(crate) fn gauss_jordan(
    a: &mut [u8],
    rows: usize,
    cols: usize,
    rhs: &mut [u8],
    t: usize,
) -> Eliminated {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(rhs.len(), rows * t);
    let mut used = vec![false; rows];
    let mut pivot_of_col = vec![None; cols];
    let mut rank = 0;
    let mut pivot_buf = vec![0u8; cols];
    let mut pivot_rhs = vec![0u8; t];
    for c in 0..cols {
        let Some(r) = (0..rows).find(|&r| !used[r] && a[r * cols + c] != 0) else {
            continue;
        };
        used[r] = true;
        pivot_of_col[c] = Some(r);
        rank += 1;
        // Entries left of c in an unused row are already zero.
        let inv = oct_inv(Octet(a[r * cols + c])).expect("nonzero pivot");
        scale_slice(&mut a[r * cols + c..(r + 1) * cols], inv);
        scale_slice(&mut rhs[r * t..(r + 1) * t], inv);
        pivot_buf[c..].copy_from_slice(&a[r * cols + c..(r + 1) * cols]);
        pivot_rhs.copy_from_slice(&rhs[r * t..(r + 1) * t]);
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = a[i * cols + c];
            if f == 0 {
                continue;
            }
            fma_slice(
                &mut a[i * cols + c..(i + 1) * cols],
                &pivot_buf[c..],
                Octet(f),
            );
            fma_slice(&mut rhs[i * t..(i + 1) * t], &pivot_rhs, Octet(f));
        }
        if rank == rows {
            break;
        }
    }
    Eliminated { rank, pivot_of_col }
}

fn dense_copy(matrix: &ConstraintMatrix) -> Vec<u8> {
    let cols = matrix.cols();
    let mut a = Vec::with_capacity(matrix.row_count() * cols);
    for r in 0..matrix.row_count() {
        a.extend_from_slice(&matrix.row_octets(r));
    }
    a
}

impl Solver for GaussianSolver {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn rank(&self, matrix: &ConstraintMatrix) -> usize {
        let mut a = dense_copy(matrix);
        gauss_jordan(&mut a, matrix.row_count(), matrix.cols(), &mut [], 0).rank
    }

    fn solve(
        &self,
        matrix: &ConstraintMatrix,
        rhs: &[SymbolData],
    ) -> Result<Vec<SymbolData>, SolveError> {
        let t = check_rhs(matrix, rhs)?;
        let (rows, cols) = matrix.dims();
        let mut a = dense_copy(matrix);
        let mut b: Vec<u8> = rhs
            .iter()
            .flat_map(|s| s.as_bytes().iter().copied())
            .collect();
        let el = gauss_jordan(&mut a, rows, cols, &mut b, t);
        if el.rank < cols {
            return Err(SolveError::Singular(SingularReport {
                rank: el.rank,
                cols,
            }));
        }
        Ok(el
            .pivot_of_col
            .iter()
            .map(|p| {
                let r = p.expect("full rank");
                SymbolData::new(b[r * t..(r + 1) * t].to_vec())
            })
            .collect())
    }
}
