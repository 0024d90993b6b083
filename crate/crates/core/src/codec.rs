//! Systematic encode/decode of one source block.
//!
//! The encoder solves the constraint system for ISIs 0..K' to obtain the L
//! intermediate symbols; every encoding symbol is then an XOR of the
//! intermediate symbols selected by its LT row. The decoder assembles the
//! same system from whatever symbols arrived and succeeds exactly when that
//! system has rank L. There is no partial recovery.

use std::collections::HashSet;

use thiserror::Error;

use crate::codeparams::{tuple_gen, CodeParams, ImportanceClass};
use crate::fieldmath::{add_assign_slice, SymbolData};
use crate::matrixgen::{self, ConstraintMatrix, SolveError, Solver};

/// ESIs are 24-bit.
pub const MAX_ESI: u32 = (1 << 24) - 1;

/// Bytes of ESI in the wire form.
pub const ESI_BYTES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("block needs {expected} source symbols, got {got}")]
    WrongSymbolCount { expected: usize, got: usize },
    #[error("symbol {esi} has {got} bytes, block symbol size is {expected}")]
    SymbolSize {
        esi: u32,
        expected: usize,
        got: usize,
    },
    #[error("ESI {0} does not fit in 24 bits")]
    EsiOutOfRange(u32),
    #[error("duplicate ESI {0} among received symbols")]
    DuplicateEsi(u32),
    #[error("wire symbol of {got} bytes is shorter than the {ESI_BYTES}-byte header")]
    ShortWireSymbol { got: usize },
    #[error("constraint matrix is singular for systematic index J={j} (rank {rank} of {l})")]
    SingularEncoding { j: u32, rank: usize, l: u32 },
    #[error("block parameters differ from the encoder's")]
    ParamsMismatch,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Decoding did not reach full rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("decoding failed: rank {rank} of {required} from {received} received symbols")]
pub struct DecodeFailure {
    pub rank: usize,
    pub required: usize,
    pub received: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Failure(DecodeFailure),
    #[error(transparent)]
    Invalid(CodecError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub esi: u32,
    pub data: SymbolData,
}

impl Symbol {
    pub fn new(esi: u32, data: SymbolData) -> Self {
        Symbol { esi, data }
    }

    pub fn is_source(&self, k: u32) -> bool {
        self.esi < k
    }

    /// 3-byte big-endian ESI followed by the payload.
    pub fn to_wire(&self) -> Result<Vec<u8>, CodecError> {
        if self.esi > MAX_ESI {
            return Err(CodecError::EsiOutOfRange(self.esi));
        }
        let mut out = Vec::with_capacity(ESI_BYTES + self.data.len());
        out.extend_from_slice(&self.esi.to_be_bytes()[1..]);
        out.extend_from_slice(self.data.as_bytes());
        Ok(out)
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < ESI_BYTES {
            return Err(CodecError::ShortWireSymbol { got: bytes.len() });
        }
        let esi = u32::from_be_bytes([0, bytes[0], bytes[1], bytes[2]]);
        Ok(Symbol::new(esi, SymbolData::from(&bytes[ESI_BYTES..])))
    }
}

/// K source symbols with ESIs 0..K, all of the same importance class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBlock {
    symbols: Vec<Symbol>,
    class: ImportanceClass,
    params: CodeParams,
}

impl SourceBlock {
    pub fn new(
        data: Vec<SymbolData>,
        class: ImportanceClass,
        params: CodeParams,
    ) -> Result<Self, CodecError> {
        if data.len() != params.k as usize {
            return Err(CodecError::WrongSymbolCount {
                expected: params.k as usize,
                got: data.len(),
            });
        }
        let symbols = data
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d.len() != params.t {
                    return Err(CodecError::SymbolSize {
                        esi: i as u32,
                        expected: params.t,
                        got: d.len(),
                    });
                }
                Ok(Symbol::new(i as u32, d))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SourceBlock {
            symbols,
            class,
            params,
        })
    }

    /// Splits `bytes` into K symbols of `params.t` bytes.
    pub fn from_bytes(
        bytes: &[u8],
        class: ImportanceClass,
        params: CodeParams,
    ) -> Result<Self, CodecError> {
        let data = bytes.chunks(params.t).map(SymbolData::from).collect();
        Self::new(data, class, params)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn class(&self) -> ImportanceClass {
        self.class
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }
}

/// The L intermediate symbols of a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateSymbols {
    pub c: Vec<SymbolData>,
}

fn system_rhs(params: &CodeParams, lt_data: impl Iterator<Item = SymbolData>) -> Vec<SymbolData> {
    let precode = (params.s + params.h) as usize;
    std::iter::repeat_with(|| SymbolData::zeros(params.t))
        .take(precode)
        .chain(lt_data)
        .collect()
}

pub fn encode_block(
    block: &SourceBlock,
    solver: &dyn Solver,
) -> Result<IntermediateSymbols, CodecError> {
    BlockEncoder::new(block.params).encode(block, solver)
}

/// Encoder for one set of parameters. The constraint matrix over ISIs
/// 0..K' is the same for every block, so it is built once.
#[derive(Debug, Clone)]
pub struct BlockEncoder {
    params: CodeParams,
    matrix: ConstraintMatrix,
}

impl BlockEncoder {
    pub fn new(params: CodeParams) -> Self {
        let isis: Vec<u32> = (0..params.k_prime).collect();
        BlockEncoder {
            params,
            matrix: matrixgen::build_constraint_matrix(&params, &isis),
        }
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Same as [`decoding_matrix`], reusing the cached precode rows.
    pub fn decoding_matrix(&self, esis: &[u32]) -> ConstraintMatrix {
        let params = &self.params;
        let mut m = self.matrix.head((params.s + params.h) as usize);
        m.reserve(esis.len() + (params.k_prime - params.k) as usize);
        append_decoder_rows(&mut m, params, esis);
        m
    }

    pub fn encode(
        &self,
        block: &SourceBlock,
        solver: &dyn Solver,
    ) -> Result<IntermediateSymbols, CodecError> {
        let params = &self.params;
        if block.params != *params {
            return Err(CodecError::ParamsMismatch);
        }
        let padding = (params.k..params.k_prime).map(|_| SymbolData::zeros(params.t));
        let rhs = system_rhs(
            params,
            block.symbols.iter().map(|s| s.data.clone()).chain(padding),
        );
        match solver.solve(&self.matrix, &rhs) {
            Ok(c) => Ok(IntermediateSymbols { c }),
            Err(SolveError::Singular(r)) => Err(CodecError::SingularEncoding {
                j: params.j,
                rank: r.rank,
                l: params.l,
            }),
            Err(e) => Err(e.into()),
        }
    }
}

/// Encoding symbol for `esi`: source symbols for ESI < K, repair symbols above.
pub fn gen_encoding_symbol(c: &IntermediateSymbols, params: &CodeParams, esi: u32) -> Symbol {
    let tuple = tuple_gen(params, params.isi(esi));
    let mut data = SymbolData::zeros(params.t);
    for col in matrixgen::lt_indices(params, &tuple) {
        add_assign_slice(data.as_bytes_mut(), c.c[col].as_bytes());
    }
    Symbol::new(esi, data)
}

/// Constraint matrix a decoder builds for the given received ESIs (padding
/// ISIs K..K' are appended as known-zero symbols).
pub fn decoding_matrix(params: &CodeParams, esis: &[u32]) -> ConstraintMatrix {
    let mut m = matrixgen::build_precode_matrix(params);
    append_decoder_rows(&mut m, params, esis);
    m
}

fn append_decoder_rows(m: &mut ConstraintMatrix, params: &CodeParams, esis: &[u32]) {
    let isis: Vec<u32> = esis
        .iter()
        .map(|&e| params.isi(e))
        .chain(params.k..params.k_prime)
        .collect();
    matrixgen::append_lt_rows(m, params, &isis);
}

/// Recovers the K source payloads from `received`.
pub fn decode_block(
    received: &[Symbol],
    params: &CodeParams,
    solver: &dyn Solver,
) -> Result<Vec<SymbolData>, DecodeError> {
    let mut seen = HashSet::with_capacity(received.len());
    for s in received {
        if s.esi > MAX_ESI {
            return Err(DecodeError::Invalid(CodecError::EsiOutOfRange(s.esi)));
        }
        if !seen.insert(s.esi) {
            return Err(DecodeError::Invalid(CodecError::DuplicateEsi(s.esi)));
        }
        if s.data.len() != params.t {
            return Err(DecodeError::Invalid(CodecError::SymbolSize {
                esi: s.esi,
                expected: params.t,
                got: s.data.len(),
            }));
        }
    }
    let esis: Vec<u32> = received.iter().map(|s| s.esi).collect();
    let matrix = decoding_matrix(params, &esis);
    let padding = (params.k..params.k_prime).map(|_| SymbolData::zeros(params.t));
    let rhs = system_rhs(
        params,
        received.iter().map(|s| s.data.clone()).chain(padding),
    );
    let c = match solver.solve(&matrix, &rhs) {
        Ok(c) => IntermediateSymbols { c },
        Err(SolveError::Singular(r)) => {
            return Err(DecodeError::Failure(DecodeFailure {
                rank: r.rank,
                required: params.l as usize,
                received: received.len(),
            }))
        }
        Err(e) => return Err(DecodeError::Invalid(e.into())),
    };
    Ok((0..params.k)
        .map(|esi| gen_encoding_symbol(&c, params, esi).data)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codeparams::{pbpr_params, standard_params, ProfileSet};
    use crate::matrixgen::{BinaryFirstSolver, GaussianSolver};
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(
        rng: &mut ChaCha8Rng,
        params: CodeParams,
        class: ImportanceClass,
    ) -> SourceBlock {
        let data = (0..params.k)
            .map(|_| SymbolData::new((0..params.t).map(|_| rng.random()).collect()))
            .collect();
        SourceBlock::new(data, class, params).unwrap()
    }

    #[test]
    fn systematic_round_trip_and_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [1u32, 7, 10, 11, 55] {
            let params = standard_params(k).unwrap().with_symbol_size(4).unwrap();
            let block = random_block(&mut rng, params, ImportanceClass::Lib);
            let c = encode_block(&block, &BinaryFirstSolver).unwrap();
            assert_eq!(c.c.len(), params.l as usize);
            for s in block.symbols() {
                assert_eq!(&gen_encoding_symbol(&c, &params, s.esi), s);
            }
            // padding ISIs regenerate zeros
            for isi in params.k..params.k_prime {
                let t = tuple_gen(&params, isi);
                let mut acc = SymbolData::zeros(params.t);
                for col in matrixgen::lt_indices(&params, &t) {
                    add_assign_slice(acc.as_bytes_mut(), c.c[col].as_bytes());
                }
                assert!(acc.is_zero(), "K={k} isi={isi}");
            }
            let decoded = decode_block(block.symbols(), &params, &GaussianSolver).unwrap();
            let original: Vec<SymbolData> =
                block.symbols().iter().map(|s| s.data.clone()).collect();
            assert_eq!(decoded, original);
        }
    }

    #[test]
    fn intermediate_symbols_satisfy_precode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let profile = ProfileSet::shipped()
            .get(101, ImportanceClass::Mib)
            .unwrap();
        let params = pbpr_params(101, profile).unwrap();
        let block = random_block(&mut rng, params, ImportanceClass::Mib);
        let c = encode_block(&block, &BinaryFirstSolver).unwrap();
        let m = matrixgen::build_constraint_matrix(&params, &[]);
        for s in m.mul_symbols(&c.c) {
            assert!(s.is_zero());
        }
    }

    #[test]
    fn too_few_symbols_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = standard_params(55).unwrap();
        let block = random_block(&mut rng, params, ImportanceClass::Lib);
        let err = decode_block(&block.symbols()[1..], &params, &BinaryFirstSolver).unwrap_err();
        match err {
            DecodeError::Failure(f) => {
                assert_eq!(f.received, 54);
                assert!(f.rank < params.l as usize);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cached_decoding_matrix_matches_fresh_one() {
        let params = standard_params(55).unwrap();
        let enc = BlockEncoder::new(params);
        let esis = [0, 3, 54, 70, 1_000_000, 9];
        assert_eq!(enc.decoding_matrix(&esis), decoding_matrix(&params, &esis));
    }

    #[test]
    fn repair_only_decoding_and_reencoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = standard_params(101).unwrap();
        let block = random_block(&mut rng, params, ImportanceClass::Lib);
        let c = encode_block(&block, &BinaryFirstSolver).unwrap();
        let mut ok = 0;
        for _ in 0..20 {
            let mut esis: Vec<u32> = (params.k..params.k + 5000).collect();
            esis.shuffle(&mut rng);
            let received: Vec<Symbol> = esis[..(params.k + 2) as usize]
                .iter()
                .map(|&e| gen_encoding_symbol(&c, &params, e))
                .collect();
            if let Ok(decoded) = decode_block(&received, &params, &BinaryFirstSolver) {
                ok += 1;
                let original: Vec<SymbolData> =
                    block.symbols().iter().map(|s| s.data.clone()).collect();
                assert_eq!(decoded, original);
            }
        }
        assert!(ok >= 18, "{ok}/20 decoded with two overhead symbols");
    }

    #[test]
    fn invalid_input() {
        let params = standard_params(10).unwrap();
        let s = Symbol::new(3, SymbolData::zeros(1));
        assert_eq!(
            decode_block(&[s.clone(), s], &params, &BinaryFirstSolver),
            Err(DecodeError::Invalid(CodecError::DuplicateEsi(3)))
        );
        let big = Symbol::new(1 << 24, SymbolData::zeros(1));
        assert!(matches!(
            decode_block(&[big], &params, &BinaryFirstSolver),
            Err(DecodeError::Invalid(CodecError::EsiOutOfRange(_)))
        ));
        let wide = Symbol::new(0, SymbolData::zeros(2));
        assert!(matches!(
            decode_block(&[wide], &params, &BinaryFirstSolver),
            Err(DecodeError::Invalid(CodecError::SymbolSize { .. }))
        ));
        assert!(matches!(
            SourceBlock::new(vec![SymbolData::zeros(1); 9], ImportanceClass::Lib, params),
            Err(CodecError::WrongSymbolCount {
                expected: 10,
                got: 9
            })
        ));
    }

    #[test]
    fn wire_form() {
        let s = Symbol::new(0x01_02_03, SymbolData::new(vec![9, 8]));
        let w = s.to_wire().unwrap();
        assert_eq!(w, vec![1, 2, 3, 9, 8]);
        assert_eq!(Symbol::from_wire(&w).unwrap(), s);
        assert!(Symbol::new(1 << 24, SymbolData::zeros(1))
            .to_wire()
            .is_err());
        assert_eq!(
            Symbol::from_wire(&[1, 2]),
            Err(CodecError::ShortWireSymbol { got: 2 })
        );
    }

    proptest::proptest! {
        #[test]
        fn wire_round_trip(esi in 0u32..=MAX_ESI, data in proptest::collection::vec(proptest::num::u8::ANY, 0..16)) {
            let s = Symbol::new(esi, SymbolData::new(data));
            proptest::prop_assert_eq!(Symbol::from_wire(&s.to_wire().unwrap()).unwrap(), s);
        }
    }
}
