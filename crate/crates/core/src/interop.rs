//! Comparison against vectors recorded from an independent RFC 6330
//! implementation for standard parameters, K = 10.

use serde::Deserialize;

use crate::codec::{encode_block, gen_encoding_symbol, SourceBlock};
use crate::codeparams::{standard_params, tuple_gen, CodeParams, ImportanceClass};
use crate::fieldmath::SymbolData;
use crate::matrixgen::{build_constraint_matrix, Solver};

const K10_REFERENCE: &str = include_str!("../fixtures/k10_reference.json");

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceVectors {
    pub k: u32,
    pub l: u32,
    /// L x L rows in LDPC, HDPC, LT order, LT rows for ISIs 0..K'.
    pub constraint_matrix: Vec<Vec<u8>>,
    /// `[d, a, b, d1, a1, b1]` for ESIs 0..20.
    pub tuples_esi_0_to_19: Vec<[u32; 6]>,
    /// T = 1, source bytes 0..K.
    pub intermediate_symbols: Vec<u8>,
    pub repair_esis: Vec<u32>,
    pub repair_symbols: Vec<u8>,
    /// T = 4 source block, symbol i is bytes 4i..4i+4.
    pub t4_source: Vec<u8>,
    pub t4_intermediate_symbols: Vec<Vec<u8>>,
    pub t4_repair_symbols: Vec<Vec<u8>>,
}

impl ReferenceVectors {
    pub fn k10() -> Self {
        serde_json::from_str(K10_REFERENCE).expect("bundled fixture parses")
    }
}

fn encode(
    params: CodeParams,
    bytes: &[u8],
    solver: &dyn Solver,
) -> Result<Vec<SymbolData>, String> {
    let block =
        SourceBlock::from_bytes(bytes, ImportanceClass::Lib, params).map_err(|e| e.to_string())?;
    encode_block(&block, solver)
        .map(|c| c.c)
        .map_err(|e| e.to_string())
}

/// Every mismatch between this implementation and `r`, empty if none.
pub fn compare(r: &ReferenceVectors, solver: &dyn Solver) -> Vec<String> {
    let mut bad = Vec::new();
    let params = match standard_params(r.k) {
        Ok(p) => p,
        Err(e) => return vec![e.to_string()],
    };
    if params.l != r.l {
        bad.push(format!("L = {}, reference {}", params.l, r.l));
        return bad;
    }

    let isis: Vec<u32> = (0..params.k_prime).collect();
    let m = build_constraint_matrix(&params, &isis);
    if m.row_count() != r.constraint_matrix.len() {
        bad.push(format!(
            "constraint matrix has {} rows, reference {}",
            m.row_count(),
            r.constraint_matrix.len()
        ));
    } else {
        for (i, want) in r.constraint_matrix.iter().enumerate() {
            if &m.row_octets(i) != want {
                bad.push(format!("constraint row {i} ({:?}) differs", m.kind(i)));
            }
        }
    }

    for (esi, want) in r.tuples_esi_0_to_19.iter().enumerate() {
        let t = tuple_gen(&params, params.isi(esi as u32));
        if [t.d, t.a, t.b, t.d1, t.a1, t.b1] != *want {
            bad.push(format!("tuple for ESI {esi} differs"));
        }
    }

    let source: Vec<u8> = (0..r.k as u8).collect();
    match encode(params, &source, solver) {
        Ok(c) => {
            let got: Vec<u8> = c.iter().map(|s| s.as_bytes()[0]).collect();
            if got != r.intermediate_symbols {
                bad.push("intermediate symbols (T=1) differ".into());
            }
            let c = crate::codec::IntermediateSymbols { c };
            for (&esi, &want) in r.repair_esis.iter().zip(&r.repair_symbols) {
                if gen_encoding_symbol(&c, &params, esi).data.as_bytes() != [want] {
                    bad.push(format!("repair symbol ESI {esi} (T=1) differs"));
                }
            }
        }
        Err(e) => bad.push(format!("encoding (T=1) failed: {e}")),
    }

    let p4 = params.with_symbol_size(4).expect("nonzero");
    match encode(p4, &r.t4_source, solver) {
        Ok(c) => {
            let got: Vec<Vec<u8>> = c.iter().map(|s| s.as_bytes().to_vec()).collect();
            if got != r.t4_intermediate_symbols {
                bad.push("intermediate symbols (T=4) differ".into());
            }
            let c = crate::codec::IntermediateSymbols { c };
            for (&esi, want) in r.repair_esis.iter().zip(&r.t4_repair_symbols) {
                if gen_encoding_symbol(&c, &p4, esi).data.as_bytes() != want.as_slice() {
                    bad.push(format!("repair symbol ESI {esi} (T=4) differs"));
                }
            }
        }
        Err(e) => bad.push(format!("encoding (T=4) failed: {e}")),
    }
    bad
}
