//! Two-stage elimination that exploits the binary rows.
//!
//! Stage one runs Gauss-Jordan over GF(2) on the bit-packed rows. The dense
//! rows are then reduced against the binary pivots, which leaves a small
//! dense system over the columns the binary rows could not pivot on. Stage
//! two solves that system over GF(256) and back-substitutes into the binary
//! pivots. rank(M) = rank of the binary part + rank of the reduced dense part.

use super::gaussian::gauss_jordan;
use super::solver::check_rhs;
use super::{ConstraintMatrix, RowData, SingularReport, SolveError, Solver};
use crate::fieldmath::{add_assign_slice, fma_slice, Octet, SymbolData};

#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryFirstSolver;

const NONE: usize = usize::MAX;

struct Reduced {
    words: usize,
    /// Binary rows, `words` u64 each, in reduced row echelon form.
    bin: Vec<u64>,
    bin_rhs: Vec<u8>,
    /// Binary pivot row per column, NONE for free columns.
    pivot_of_col: Vec<usize>,
    free_cols: Vec<usize>,
    dense_rhs: Vec<u8>,
    dense_pivot_of_free: Vec<Option<usize>>,
    rank: usize,
}

fn reduce(matrix: &ConstraintMatrix, rhs: Option<&[SymbolData]>, t: usize) -> Reduced {
    let cols = matrix.cols();
    let words = cols.div_ceil(64);
    let mut bin = Vec::new();
    let mut bin_rhs = Vec::new();
    let mut dense_rows: Vec<(&[u8], Option<&SymbolData>)> = Vec::new();
    for (i, row) in matrix.rows().iter().enumerate() {
        match row {
            RowData::Binary(b) => {
                bin.extend_from_slice(b.words());
                if let Some(r) = rhs {
                    bin_rhs.extend_from_slice(r[i].as_bytes());
                }
            }
            RowData::Dense(d) => dense_rows.push((d, rhs.map(|r| &r[i]))),
        }
    }
    let nb = bin.len() / words.max(1);

    // Stage one: GF(2) Gauss-Jordan, lowest unused row wins each column.
    let mut pivot_of_col = vec![NONE; cols];
    let mut unused: Vec<usize> = (0..nb).collect();
    let mut pivot_words = vec![0u64; words];
    let mut pivot_rhs = vec![0u8; t];
    for c in 0..cols {
        if unused.is_empty() {
            break;
        }
        let w = c / 64;
        let mask = 1u64 << (c % 64);
        let Some(pos) = unused.iter().position(|&r| bin[r * words + w] & mask != 0) else {
            continue;
        };
        let r = unused.remove(pos);
        pivot_of_col[c] = r;
        pivot_words[w..].copy_from_slice(&bin[r * words + w..(r + 1) * words]);
        pivot_rhs.copy_from_slice(&bin_rhs[r * t..(r + 1) * t]);
        for i in 0..nb {
            if i != r && bin[i * words + w] & mask != 0 {
                for (dst, src) in bin[i * words + w..(i + 1) * words]
                    .iter_mut()
                    .zip(&pivot_words[w..])
                {
                    *dst ^= *src;
                }
                add_assign_slice(&mut bin_rhs[i * t..(i + 1) * t], &pivot_rhs);
            }
        }
    }
    let bin_rank = pivot_of_col.iter().filter(|&&p| p != NONE).count();

    let free_cols: Vec<usize> = (0..cols).filter(|&c| pivot_of_col[c] == NONE).collect();
    let nf = free_cols.len();
    let mut free_index = vec![NONE; cols];
    let mut free_mask = vec![0u64; words];
    for (fi, &c) in free_cols.iter().enumerate() {
        free_index[c] = fi;
        free_mask[c / 64] |= 1 << (c % 64);
    }

    // Dense rows minus their binary-pivot components, kept on free columns only.
    let nd = dense_rows.len();
    let mut dense = vec![0u8; nd * nf];
    let mut dense_rhs = vec![0u8; nd * t];
    for (di, (row, row_rhs)) in dense_rows.iter().enumerate() {
        let out = &mut dense[di * nf..(di + 1) * nf];
        let out_rhs = &mut dense_rhs[di * t..(di + 1) * t];
        if let Some(s) = row_rhs {
            out_rhs.copy_from_slice(s.as_bytes());
        }
        for (fi, &c) in free_cols.iter().enumerate() {
            out[fi] = row[c];
        }
        for (c, &p) in pivot_of_col.iter().enumerate() {
            let f = row[c];
            if p == NONE || f == 0 {
                continue;
            }
            let prow = &bin[p * words..(p + 1) * words];
            for (wi, (&bits, &fm)) in prow.iter().zip(&free_mask).enumerate() {
                let mut m = bits & fm;
                while m != 0 {
                    let col = wi * 64 + m.trailing_zeros() as usize;
                    out[free_index[col]] ^= f;
                    m &= m - 1;
                }
            }
            fma_slice(out_rhs, &bin_rhs[p * t..(p + 1) * t], Octet(f));
        }
    }

    // Stage two.
    let el = gauss_jordan(&mut dense, nd, nf, &mut dense_rhs, t);

    Reduced {
        words,
        bin,
        bin_rhs,
        pivot_of_col,
        free_cols,
        dense_rhs,
        dense_pivot_of_free: el.pivot_of_col,
        rank: bin_rank + el.rank,
    }
}

impl Solver for BinaryFirstSolver {
    fn name(&self) -> &'static str {
        "binary-first"
    }

    fn rank(&self, matrix: &ConstraintMatrix) -> usize {
        reduce(matrix, None, 0).rank
    }

    fn solve(
        &self,
        matrix: &ConstraintMatrix,
        rhs: &[SymbolData],
    ) -> Result<Vec<SymbolData>, SolveError> {
        let t = check_rhs(matrix, rhs)?;
        let cols = matrix.cols();
        let red = reduce(matrix, Some(rhs), t);
        if red.rank < cols {
            return Err(SolveError::Singular(SingularReport {
                rank: red.rank,
                cols,
            }));
        }
        let mut out = vec![SymbolData::zeros(t); cols];
        for (fi, &c) in red.free_cols.iter().enumerate() {
            let r = red.dense_pivot_of_free[fi].expect("full rank");
            out[c] = SymbolData::new(red.dense_rhs[r * t..(r + 1) * t].to_vec());
        }
        let words = red.words;
        for c in 0..cols {
            let p = red.pivot_of_col[c];
            if p == NONE {
                continue;
            }
            let mut value = red.bin_rhs[p * t..(p + 1) * t].to_vec();
            let prow = &red.bin[p * words..(p + 1) * words];
            for &f in &red.free_cols {
                if prow[f / 64] >> (f % 64) & 1 == 1 {
                    add_assign_slice(&mut value, out[f].as_bytes());
                }
            }
            out[c] = SymbolData::new(value);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixgen::GaussianSolver;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_gaussian_on_mixed_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let n = rng.random_range(1..=40);
            let extra = rng.random_range(0..4);
            let dense_rows = rng.random_range(0..=n.min(6));
            let mut rows = Vec::new();
            for i in 0..n + extra {
                let row: Vec<u8> = if i < dense_rows {
                    (0..n).map(|_| rng.random()).collect()
                } else {
                    (0..n).map(|_| rng.random_bool(0.3) as u8).collect()
                };
                rows.push(row);
            }
            let m = ConstraintMatrix::from_rows(n, rows);
            let g = GaussianSolver;
            let b = BinaryFirstSolver;
            assert_eq!(g.rank(&m), b.rank(&m), "trial {trial}");
            // consistent right-hand sides from a known solution
            let x: Vec<SymbolData> = (0..n)
                .map(|_| SymbolData::new((0..3).map(|_| rng.random()).collect()))
                .collect();
            let d = m.mul_symbols(&x);
            match (g.solve(&m, &d), b.solve(&m, &d)) {
                (Ok(a), Ok(c)) => {
                    assert_eq!(a, c);
                    assert_eq!(a, x);
                }
                (Err(SolveError::Singular(r1)), Err(SolveError::Singular(r2))) => {
                    assert_eq!(r1, r2)
                }
                other => panic!("solvers disagree on trial {trial}: {other:?}"),
            }
        }
    }
}
