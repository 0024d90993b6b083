//! Sparse elimination with column inactivation.
//!
//! Repeatedly takes the unused binary row with the fewest active columns,
//! pivots on its lowest active column and inactivates the rest. A pivot row
//! then has no active column but its pivot, so eliminating that column from
//! other rows only touches inactive columns and the sparse LT structure never
//! fills in. What remains is a small system over the inactive columns (the
//! leftover binary rows plus the dense rows), which is handed to the
//! two-stage solver.

use super::solver::check_rhs;
use super::{
    BinaryFirstSolver, BitRow, ConstraintMatrix, RowData, RowKind, SingularReport, SolveError,
    Solver,
};
use crate::fieldmath::{add_assign_slice, fma_slice, Octet, SymbolData};

#[derive(Debug, Clone, Copy, Default)]
pub struct InactivationSolver;

struct Peeled {
    bin_rhs: Vec<u8>,
    /// (row, column) in pivot order.
    pivots: Vec<(usize, usize)>,
    /// For pivot i, `rest_of_pivot[pivot_start[i]..pivot_start[i + 1]]` are
    /// the positions in `rest` where its row has a one.
    pivot_start: Vec<usize>,
    rest_of_pivot: Vec<usize>,
    /// Non-pivot columns, ascending.
    rest: Vec<usize>,
    residual: ConstraintMatrix,
    residual_rhs: Vec<SymbolData>,
}

fn for_each_one(words: &[u64], mut f: impl FnMut(usize)) {
    for (wi, &w) in words.iter().enumerate() {
        let mut m = w;
        while m != 0 {
            f(wi * 64 + m.trailing_zeros() as usize);
            m &= m - 1;
        }
    }
}

fn peel(matrix: &ConstraintMatrix, rhs: Option<&[SymbolData]>, t: usize) -> Peeled {
    let cols = matrix.cols();
    let words = cols.div_ceil(64);
    let mut bin = Vec::new();
    let mut bin_rhs = Vec::new();
    let mut dense: Vec<(&[u8], &[u8])> = Vec::new();
    for (i, row) in matrix.rows().iter().enumerate() {
        let r = rhs.map_or(&[][..], |r| r[i].as_bytes());
        match row {
            RowData::Binary(b) => {
                bin.extend_from_slice(b.words());
                bin_rhs.extend_from_slice(r);
            }
            RowData::Dense(d) => dense.push((d, r)),
        }
    }
    let nb = bin.len() / words.max(1);

    // Rows per column. Bits in active columns never change, so these lists
    // stay exact for every column until it leaves the active set.
    let mut col_start = vec![0usize; cols + 1];
    for i in 0..nb {
        for_each_one(&bin[i * words..(i + 1) * words], |c| col_start[c + 1] += 1);
    }
    for c in 0..cols {
        col_start[c + 1] += col_start[c];
    }
    let mut fill = col_start.clone();
    let mut col_rows = vec![0usize; col_start[cols]];
    for i in 0..nb {
        for_each_one(&bin[i * words..(i + 1) * words], |c| {
            col_rows[fill[c]] = i;
            fill[c] += 1;
        });
    }

    // Active weight of each unused row; pivot rows drop to 0 and, like
    // exhausted rows, are skipped because 0 - 1 wraps to the maximum.
    let mut weight: Vec<u32> = (0..nb)
        .map(|i| {
            bin[i * words..(i + 1) * words]
                .iter()
                .map(|w| w.count_ones())
                .sum()
        })
        .collect();
    let mut active = vec![true; cols];
    let mut pivots = Vec::new();
    let mut row_active = Vec::new();
    let mut pivot_words = vec![0u64; words];
    let mut pivot_rhs = vec![0u8; t];
    loop {
        let mut best = (u32::MAX, 0);
        for (i, &w) in weight.iter().enumerate() {
            let key = w.wrapping_sub(1);
            if key < best.0 {
                best = (key, i);
                if key == 0 {
                    break;
                }
            }
        }
        if best.0 == u32::MAX {
            break;
        }
        let r = best.1;
        row_active.clear();
        for_each_one(&bin[r * words..(r + 1) * words], |c| {
            if active[c] {
                row_active.push(c);
            }
        });
        let j = row_active[0];
        for &u in &row_active[1..] {
            active[u] = false;
            for &i in &col_rows[col_start[u]..col_start[u + 1]] {
                weight[i] -= 1;
            }
        }
        active[j] = false;
        weight[r] = 0;
        pivots.push((r, j));
        pivot_words.copy_from_slice(&bin[r * words..(r + 1) * words]);
        pivot_rhs.copy_from_slice(&bin_rhs[r * t..(r + 1) * t]);
        for &i in &col_rows[col_start[j]..col_start[j + 1]] {
            if weight[i] == 0 {
                // the pivot row itself or an earlier one
                continue;
            }
            for (d, s) in bin[i * words..(i + 1) * words].iter_mut().zip(&pivot_words) {
                *d ^= s;
            }
            add_assign_slice(&mut bin_rhs[i * t..(i + 1) * t], &pivot_rhs);
            weight[i] -= 1;
        }
    }

    let mut is_pivot = vec![false; cols];
    let mut is_pivot_row = vec![false; nb];
    for &(r, j) in &pivots {
        is_pivot[j] = true;
        is_pivot_row[r] = true;
    }
    let rest: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
    let mut rest_index = vec![usize::MAX; cols];
    for (k, &c) in rest.iter().enumerate() {
        rest_index[c] = k;
    }
    let mut pivot_start = Vec::with_capacity(pivots.len() + 1);
    let mut rest_of_pivot = Vec::new();
    pivot_start.push(0);
    for &(r, j) in &pivots {
        for_each_one(&bin[r * words..(r + 1) * words], |c| {
            if c != j {
                rest_of_pivot.push(rest_index[c]);
            }
        });
        pivot_start.push(rest_of_pivot.len());
    }

    let mut residual = ConstraintMatrix::new(rest.len());
    let mut residual_rhs = Vec::new();
    for i in (0..nb).filter(|&i| !is_pivot_row[i]) {
        let mut row = BitRow::zeros(rest.len());
        for_each_one(&bin[i * words..(i + 1) * words], |c| row.set(rest_index[c]));
        residual.push_binary(RowKind::Custom, row);
        residual_rhs.push(SymbolData::new(bin_rhs[i * t..(i + 1) * t].to_vec()));
    }
    // A pivot row holds no other pivot column, so a dense row's entries on
    // pivot columns are never changed by the other eliminations.
    for (d, d_rhs) in dense {
        let mut row: Vec<u8> = rest.iter().map(|&c| d[c]).collect();
        let mut row_rhs = d_rhs.to_vec();
        for (pi, &(r, j)) in pivots.iter().enumerate() {
            let f = d[j];
            if f == 0 {
                continue;
            }
            for &k in &rest_of_pivot[pivot_start[pi]..pivot_start[pi + 1]] {
                row[k] ^= f;
            }
            fma_slice(&mut row_rhs, &bin_rhs[r * t..(r + 1) * t], Octet(f));
        }
        residual.push_dense(RowKind::Custom, row);
        residual_rhs.push(SymbolData::new(row_rhs));
    }
    Peeled {
        bin_rhs,
        pivots,
        pivot_start,
        rest_of_pivot,
        rest,
        residual,
        residual_rhs,
    }
}

impl Solver for InactivationSolver {
    fn name(&self) -> &'static str {
        "inactivation"
    }

    fn rank(&self, matrix: &ConstraintMatrix) -> usize {
        let p = peel(matrix, None, 0);
        p.pivots.len() + BinaryFirstSolver.rank(&p.residual)
    }

    fn solve(
        &self,
        matrix: &ConstraintMatrix,
        rhs: &[SymbolData],
    ) -> Result<Vec<SymbolData>, SolveError> {
        let t = check_rhs(matrix, rhs)?;
        let cols = matrix.cols();
        let p = peel(matrix, Some(rhs), t);
        let rest_values = BinaryFirstSolver
            .solve(&p.residual, &p.residual_rhs)
            .map_err(|e| match e {
                SolveError::Singular(r) => SolveError::Singular(SingularReport {
                    rank: p.pivots.len() + r.rank,
                    cols,
                }),
                other => other,
            })?;
        let mut out = vec![SymbolData::zeros(t); cols];
        for (pi, &(r, j)) in p.pivots.iter().enumerate() {
            let value = out[j].as_bytes_mut();
            value.copy_from_slice(&p.bin_rhs[r * t..(r + 1) * t]);
            for &k in &p.rest_of_pivot[p.pivot_start[pi]..p.pivot_start[pi + 1]] {
                add_assign_slice(value, rest_values[k].as_bytes());
            }
        }
        for (value, &c) in rest_values.into_iter().zip(&p.rest) {
            out[c] = value;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codeparams::{pbpr_params, standard_params, ImportanceClass, ProfileSet};
    use crate::matrixgen::{build_constraint_matrix, GaussianSolver};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_against_gaussian(m: &ConstraintMatrix, rng: &mut ChaCha8Rng, what: &str) {
        let g = GaussianSolver;
        let s = InactivationSolver;
        assert_eq!(g.rank(m), s.rank(m), "{what}");
        let x: Vec<SymbolData> = (0..m.cols())
            .map(|_| SymbolData::new((0..3).map(|_| rng.random()).collect()))
            .collect();
        let d = m.mul_symbols(&x);
        match (g.solve(m, &d), s.solve(m, &d)) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a, b, "{what}");
                assert_eq!(a, x, "{what}");
            }
            (Err(SolveError::Singular(a)), Err(SolveError::Singular(b))) => {
                assert_eq!(a, b, "{what}")
            }
            other => panic!("{what}: solvers disagree: {other:?}"),
        }
    }

    #[test]
    fn agrees_with_gaussian_on_mixed_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..300 {
            let n = rng.random_range(1..=40);
            let extra = rng.random_range(0..4);
            let dense_rows = rng.random_range(0..=n.min(6));
            let density = rng.random_range(0.05..0.5);
            let rows: Vec<Vec<u8>> = (0..n + extra)
                .map(|i| {
                    if i < dense_rows {
                        (0..n).map(|_| rng.random()).collect()
                    } else {
                        (0..n).map(|_| rng.random_bool(density) as u8).collect()
                    }
                })
                .collect();
            let m = ConstraintMatrix::from_rows(n, rows);
            check_against_gaussian(&m, &mut rng, &format!("trial {trial}"));
        }
    }

    #[test]
    fn agrees_with_gaussian_on_constraint_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let shipped = ProfileSet::shipped();
        for k in [55u32, 101] {
            for params in [
                standard_params(k).unwrap(),
                pbpr_params(k, shipped.get(k, ImportanceClass::Mib).unwrap()).unwrap(),
            ] {
                for trial in 0..20 {
                    // K' LT rows from random ISIs, some of them rank deficient
                    let n = params.k_prime as usize + rng.random_range(0..2);
                    let isis: Vec<u32> = (0..n).map(|_| rng.random_range(0..1 << 20)).collect();
                    let m = build_constraint_matrix(&params, &isis);
                    check_against_gaussian(
                        &m,
                        &mut rng,
                        &format!("K={k} L={} trial {trial}", params.l),
                    );
                }
            }
        }
    }

    #[test]
    fn edge_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        check_against_gaussian(&ConstraintMatrix::identity(5), &mut rng, "identity");
        check_against_gaussian(&ConstraintMatrix::new(4), &mut rng, "no rows");
        let zero = ConstraintMatrix::from_rows(3, vec![vec![0; 3]; 3]);
        assert_eq!(InactivationSolver.rank(&zero), 0);
        let dup = ConstraintMatrix::from_rows(3, vec![vec![1, 2, 3], vec![1, 2, 3], vec![0, 0, 1]]);
        check_against_gaussian(&dup, &mut rng, "duplicate dense rows");
    }
}
