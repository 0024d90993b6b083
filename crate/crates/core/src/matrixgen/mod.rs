//! Constraint matrix construction and linear solving.
//!
//! Rows are stored in RFC 6330 order: S LDPC rows, then H HDPC rows, then
//! one LT row per encoding symbol. LDPC and LT rows are binary and kept
//! bit-packed; HDPC rows are dense octet rows. Solvers live behind the
//! [`Solver`] trait and are looked up by name in a [`SolverRegistry`].

mod binary_first;
mod gaussian;
mod inactivation;
mod solver;

pub use binary_first::BinaryFirstSolver;
pub use gaussian::GaussianSolver;
pub use inactivation::InactivationSolver;
pub use solver::{SingularReport, SolveError, Solver, SolverRegistry, UnknownSolver};

use crate::codeparams::{tuple_gen, CodeParams, Tuple};
use crate::fieldmath::{Octet, SymbolData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    Ldpc,
    Hdpc,
    Lt,
    /// Rows of matrices not built from code parameters.
    Custom,
}

/// A row over GF(2), packed 64 columns per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, col: usize) -> bool {
        self.words[col / 64] >> (col % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, col: usize) {
        debug_assert!(col < self.len);
        self.words[col / 64] |= 1 << (col % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn to_octets(&self) -> Vec<u8> {
        (0..self.len).map(|c| self.get(c) as u8).collect()
    }
}

impl std::fmt::Debug for BitRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = (0..self.len)
            .map(|c| if self.get(c) { '1' } else { '0' })
            .collect();
        write!(f, "BitRow({s})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum RowData {
    Binary(BitRow),
    Dense(Vec<u8>),
}

/// An L-column matrix over GF(256) with tagged rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMatrix {
    cols: usize,
    rows: Vec<RowData>,
    kinds: Vec<RowKind>,
}

impl ConstraintMatrix {
    pub fn new(cols: usize) -> Self {
        ConstraintMatrix {
            cols,
            rows: Vec::new(),
            kinds: Vec::new(),
        }
    }

    pub fn reserve(&mut self, additional: usize) {
        self.rows.reserve(additional);
        self.kinds.reserve(additional);
    }

    /// Copy of the first `n` rows.
    pub fn head(&self, n: usize) -> ConstraintMatrix {
        let n = n.min(self.rows.len());
        ConstraintMatrix {
            cols: self.cols,
            rows: self.rows[..n].to_vec(),
            kinds: self.kinds[..n].to_vec(),
        }
    }

    /// Builds a matrix of `Custom` rows from dense octet rows. Rows whose
    /// entries are all 0 or 1 are stored bit-packed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<u8>>) -> Self {
        let mut m = ConstraintMatrix::new(cols);
        for row in rows {
            m.push_dense(RowKind::Custom, row);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ConstraintMatrix::new(n);
        for i in 0..n {
            let mut r = BitRow::zeros(n);
            r.set(i);
            m.push_binary(RowKind::Custom, r);
        }
        m
    }

    pub fn push_binary(&mut self, kind: RowKind, row: BitRow) {
        assert_eq!(row.len(), self.cols, "row width");
        self.rows.push(RowData::Binary(row));
        self.kinds.push(kind);
    }

    pub fn push_dense(&mut self, kind: RowKind, row: Vec<u8>) {
        assert_eq!(row.len(), self.cols, "row width");
        if row.iter().all(|&x| x <= 1) {
            let mut bits = BitRow::zeros(self.cols);
            for (c, &x) in row.iter().enumerate() {
                if x == 1 {
                    bits.set(c);
                }
            }
            self.rows.push(RowData::Binary(bits));
        } else {
            self.rows.push(RowData::Dense(row));
        }
        self.kinds.push(kind);
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.cols)
    }

    pub fn kind(&self, row: usize) -> RowKind {
        self.kinds[row]
    }

    pub fn kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    pub fn count_kind(&self, kind: RowKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn get(&self, row: usize, col: usize) -> Octet {
        match &self.rows[row] {
            RowData::Binary(b) => Octet(b.get(col) as u8),
            RowData::Dense(d) => Octet(d[col]),
        }
    }

    pub fn row_octets(&self, row: usize) -> Vec<u8> {
        match &self.rows[row] {
            RowData::Binary(b) => b.to_octets(),
            RowData::Dense(d) => d.clone(),
        }
    }

    pub fn is_binary_row(&self, row: usize) -> bool {
        matches!(self.rows[row], RowData::Binary(_))
    }

    pub(crate) fn rows(&self) -> &[RowData] {
        &self.rows
    }

    /// Returns a copy with rows reordered by `order` (a permutation of row indices).
    pub fn permuted_rows(&self, order: &[usize]) -> Self {
        ConstraintMatrix {
            cols: self.cols,
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            kinds: order.iter().map(|&i| self.kinds[i]).collect(),
        }
    }

    /// Matrix-vector product `self * x` over symbols.
    pub fn mul_symbols(&self, x: &[SymbolData]) -> Vec<SymbolData> {
        assert_eq!(x.len(), self.cols);
        let t = x.first().map_or(0, |s| s.len());
        self.rows
            .iter()
            .map(|row| {
                let mut acc = SymbolData::zeros(t);
                match row {
                    RowData::Binary(b) => {
                        for c in b.ones() {
                            crate::fieldmath::add_assign_slice(acc.as_bytes_mut(), x[c].as_bytes());
                        }
                    }
                    RowData::Dense(d) => {
                        for (c, &v) in d.iter().enumerate() {
                            crate::fieldmath::fma_slice(
                                acc.as_bytes_mut(),
                                x[c].as_bytes(),
                                Octet(v),
                            );
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// S binary LDPC rows: the circulant part over the first B columns, the
/// S x S identity and two ones per row in the PI columns.
pub fn build_ldpc_rows(params: &CodeParams) -> Vec<BitRow> {
    let s = params.s as usize;
    let b = params.b as usize;
    let w = params.w as usize;
    let p = params.p as usize;
    let l = params.l as usize;
    let mut rows = vec![BitRow::zeros(l); s];
    for i in 0..b {
        let a = 1 + i / s;
        let mut r = i % s;
        rows[r].set(i);
        r = (r + a) % s;
        rows[r].set(i);
        r = (r + a) % s;
        rows[r].set(i);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.set(b + i);
        row.set(w + i % p);
        row.set(w + (i + 1) % p);
    }
    rows
}

/// H dense HDPC rows: MT * GAMMA over the first K' + S columns, then I_H.
///
/// Computed right to left: each column of MT * GAMMA is alpha times the
/// column to its right plus the column of MT.
pub fn build_hdpc_rows(params: &CodeParams) -> Vec<Vec<u8>> {
    let h = params.h as usize;
    let ks = (params.k_prime + params.s) as usize;
    let l = params.l as usize;
    let mut rows = vec![vec![0u8; l]; h];
    let alpha = Octet::alpha(1);
    for (i, row) in rows.iter_mut().enumerate() {
        row[ks - 1] = Octet::alpha(i).byte();
    }
    for j in (0..ks - 1).rev() {
        for row in rows.iter_mut() {
            row[j] = (alpha * Octet(row[j + 1])).byte();
        }
        for i in mt_ones(j, h) {
            rows[i][j] ^= 1;
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[ks + i] = 1;
    }
    rows
}

/// Rows of MT holding a one in column `j` (for j < K' + S - 1).
fn mt_ones(j: usize, h: usize) -> impl Iterator<Item = usize> {
    let y = (j + 1) as u32;
    let i1 = crate::codeparams::rand(y, 6, h as u32) as usize;
    // H = 1 makes Rand[y, 7, H - 1] undefined; both picks then name row 0.
    let i2 = if h > 1 {
        (i1 + crate::codeparams::rand(y, 7, (h - 1) as u32) as usize + 1) % h
    } else {
        i1
    };
    std::iter::once(i1).chain((i2 != i1).then_some(i2))
}

/// Columns of the intermediate symbols combined for one tuple: d columns
/// walked over the W LT columns and d1 columns walked over the P PI columns.
/// Repeated columns appear once.
pub fn lt_indices(params: &CodeParams, tuple: &Tuple) -> Vec<usize> {
    let w = params.w;
    let p = params.p;
    let p1 = params.p1;
    let mut out = Vec::with_capacity((tuple.d + tuple.d1) as usize);
    let mut b = tuple.b;
    out.push(b as usize);
    for _ in 1..tuple.d {
        b = (b + tuple.a) % w;
        out.push(b as usize);
    }
    let mut b1 = tuple.b1;
    while b1 >= p {
        b1 = (b1 + tuple.a1) % p1;
    }
    out.push((w + b1) as usize);
    for _ in 1..tuple.d1 {
        b1 = (b1 + tuple.a1) % p1;
        while b1 >= p {
            b1 = (b1 + tuple.a1) % p1;
        }
        out.push((w + b1) as usize);
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn build_lt_row(params: &CodeParams, tuple: &Tuple) -> BitRow {
    // setting a bit twice leaves it set, matching the deduplicated index set
    let (w, p, p1) = (params.w, params.p, params.p1);
    let mut row = BitRow::zeros(params.l as usize);
    let mut b = tuple.b;
    row.set(b as usize);
    for _ in 1..tuple.d {
        b = (b + tuple.a) % w;
        row.set(b as usize);
    }
    let mut b1 = tuple.b1;
    while b1 >= p {
        b1 = (b1 + tuple.a1) % p1;
    }
    row.set((w + b1) as usize);
    for _ in 1..tuple.d1 {
        b1 = (b1 + tuple.a1) % p1;
        while b1 >= p {
            b1 = (b1 + tuple.a1) % p1;
        }
        row.set((w + b1) as usize);
    }
    row
}

/// LDPC rows followed by HDPC rows.
pub fn build_precode_matrix(params: &CodeParams) -> ConstraintMatrix {
    let mut m = ConstraintMatrix::new(params.l as usize);
    m.reserve((params.s + params.h + params.k_prime) as usize);
    for row in build_ldpc_rows(params) {
        m.push_binary(RowKind::Ldpc, row);
    }
    for row in build_hdpc_rows(params) {
        m.rows.push(RowData::Dense(row));
        m.kinds.push(RowKind::Hdpc);
    }
    m
}

/// Appends one LT row per ISI.
pub fn append_lt_rows(m: &mut ConstraintMatrix, params: &CodeParams, isis: &[u32]) {
    m.reserve(isis.len());
    for &isi in isis {
        m.push_binary(RowKind::Lt, build_lt_row(params, &tuple_gen(params, isi)));
    }
}

/// Full constraint matrix: LDPC rows, HDPC rows, then one LT row per ISI.
pub fn build_constraint_matrix(params: &CodeParams, isis: &[u32]) -> ConstraintMatrix {
    let mut m = build_precode_matrix(params);
    append_lt_rows(&mut m, params, isis);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codeparams::{pbpr_params, standard_params, ImportanceClass, ProfileSet};

    /// HDPC rows from the definition: explicit MT times explicit GAMMA.
    fn hdpc_by_definition(params: &CodeParams) -> Vec<Vec<u8>> {
        let h = params.h as usize;
        let ks = (params.k_prime + params.s) as usize;
        let mut mt = vec![vec![0u8; ks]; h];
        for j in 0..ks - 1 {
            for i in mt_ones(j, h) {
                mt[i][j] = 1;
            }
        }
        for (i, row) in mt.iter_mut().enumerate() {
            row[ks - 1] = Octet::alpha(i).byte();
        }
        // GAMMA[i][j] = alpha^(i - j) for i >= j
        let mut out = vec![vec![0u8; params.l as usize]; h];
        for r in 0..h {
            for j in 0..ks {
                let mut acc = Octet::ZERO;
                for i in j..ks {
                    acc += Octet(mt[r][i]) * Octet::alpha(i - j);
                }
                out[r][j] = acc.byte();
            }
            out[r][ks + r] = 1;
        }
        out
    }

    #[test]
    fn hdpc_recursion_matches_definition() {
        let shipped = ProfileSet::shipped();
        let mut all = vec![standard_params(10).unwrap(), standard_params(300).unwrap()];
        for k in [55, 101, 213] {
            all.push(pbpr_params(k, shipped.get(k, ImportanceClass::Mib).unwrap()).unwrap());
        }
        for p in all {
            assert_eq!(build_hdpc_rows(&p), hdpc_by_definition(&p), "K={}", p.k);
        }
    }

    #[test]
    fn ldpc_shape() {
        let p = standard_params(101).unwrap();
        let rows = build_ldpc_rows(&p);
        assert_eq!(rows.len(), p.s as usize);
        for (i, r) in rows.iter().enumerate() {
            assert!(r.get((p.b as usize) + i));
        }
        // each of the first B columns has exactly three ones
        for c in 0..p.b as usize {
            assert_eq!(rows.iter().filter(|r| r.get(c)).count(), 3, "col {c}");
        }
    }

    #[test]
    fn hdpc_has_non_binary_entries() {
        let p = standard_params(10).unwrap();
        let rows = build_hdpc_rows(&p);
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().flatten().any(|&x| x > 1));
    }

    #[test]
    fn lt_rows_are_binary_and_nonempty() {
        let p = standard_params(213).unwrap();
        for isi in 0..500 {
            let t = tuple_gen(&p, isi);
            let row = build_lt_row(&p, &t);
            assert!(row.count_ones() >= 1);
            assert!(row.count_ones() <= (t.d + t.d1) as usize);
        }
    }

    #[test]
    fn matrix_partition() {
        let p = standard_params(55).unwrap();
        let isis: Vec<u32> = (0..70).collect();
        let m = build_constraint_matrix(&p, &isis);
        assert_eq!(m.count_kind(RowKind::Ldpc), p.s as usize);
        assert_eq!(m.count_kind(RowKind::Hdpc), p.h as usize);
        assert_eq!(m.count_kind(RowKind::Lt), 70);
        assert_eq!(m.dims(), (p.s as usize + p.h as usize + 70, p.l as usize));
        for r in 0..m.row_count() {
            if m.kind(r) != RowKind::Hdpc {
                assert!(m.row_octets(r).iter().all(|&x| x <= 1));
            }
        }
    }

    #[test]
    fn single_hdpc_row_is_well_defined() {
        let mut p = standard_params(10).unwrap();
        p.h = 1;
        p.l = p.k_prime + p.s + 1;
        p.p = p.l - p.w;
        let rows = build_hdpc_rows(&p);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows, hdpc_by_definition(&p));
    }

    #[test]
    fn bitrow_ones_iterates_in_order() {
        let mut r = BitRow::zeros(200);
        for c in [0, 5, 63, 64, 130, 199] {
            r.set(c);
        }
        assert_eq!(r.ones().collect::<Vec<_>>(), vec![0, 5, 63, 64, 130, 199]);
        assert_eq!(r.count_ones(), 6);
    }
}
