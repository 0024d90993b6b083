//! Built-in consistency checks run by `uepq selftest`.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{decode_block, encode_block, gen_encoding_symbol, SourceBlock, Symbol};
use crate::codeparams::{pbpr_params, standard_params, CodeParams, ImportanceClass, ProfileSet};
use crate::fieldmath::{oct_mul, Octet, OctetTables, SymbolData};
use crate::interop::{compare, ReferenceVectors};
use crate::matrixgen::{ConstraintMatrix, GaussianSolver, Solver, SolverRegistry};
use crate::rankanalysis::{empirical_rank_profile, full_rank_prob_random, RandomSquare};

/// Replaceable inputs, so tests can check that faults are caught.
#[derive(Clone)]
pub struct SelftestInputs {
    pub tables: OctetTables,
    pub reference: ReferenceVectors,
}

impl Default for SelftestInputs {
    fn default() -> Self {
        SelftestInputs {
            tables: OctetTables::builtin(),
            reference: ReferenceVectors::k10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    /// Empty when the suite passed.
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn failed_suites(&self) -> Vec<&'static str> {
        self.suites
            .iter()
            .filter(|s| !s.passed())
            .map(|s| s.name)
            .collect()
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            if s.passed() {
                writeln!(f, "PASS {}", s.name)?;
            } else {
                writeln!(f, "FAIL {}: {}", s.name, s.failures[0])?;
                if s.failures.len() > 1 {
                    writeln!(f, "     ... and {} more", s.failures.len() - 1)?;
                }
            }
        }
        let failed = self.failed_suites();
        if failed.is_empty() {
            write!(f, "selftest passed ({} suites)", self.suites.len())
        } else {
            write!(f, "selftest failed: {}", failed.join(", "))
        }
    }
}

pub fn selftest() -> SelftestReport {
    selftest_with(&SelftestInputs::default())
}

pub fn selftest_with(inputs: &SelftestInputs) -> SelftestReport {
    SelftestReport {
        suites: vec![
            SuiteResult {
                name: "fieldmath",
                failures: field_suite(&inputs.tables),
            },
            SuiteResult {
                name: "reference-fixtures",
                failures: compare(&inputs.reference, &GaussianSolver),
            },
            SuiteResult {
                name: "systematic-round-trip",
                failures: round_trip_suite(),
            },
            SuiteResult {
                name: "solver-agreement",
                failures: solver_suite(),
            },
            SuiteResult {
                name: "rank-formula",
                failures: rank_suite(),
            },
        ],
    }
}

fn field_suite(t: &OctetTables) -> Vec<String> {
    let mut bad = Vec::new();
    for a in 1..=255u8 {
        if t.exp[t.log[a as usize] as usize] != a {
            bad.push(format!(
                "exp[log[{a}]] = {}",
                t.exp[t.log[a as usize] as usize]
            ));
        }
    }
    if let Err(e) = t.verify() {
        bad.push(e);
    }
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            if t.mul(a, b) != t.mul(b, a) {
                bad.push(format!("{a} * {b} is not commutative"));
            }
            if t.mul(a, b) != oct_mul(Octet(a), Octet(b)).0 {
                bad.push(format!("{a} * {b} disagrees with the live arithmetic"));
            }
        }
    }
    for &c in &[1u8, 2, 3, 29, 142, 255] {
        for a in 0..=255u8 {
            for b in (0..=255u8).step_by(7) {
                if t.mul(t.mul(a, b), c) != t.mul(a, t.mul(b, c)) {
                    bad.push(format!("({a} * {b}) * {c} is not associative"));
                }
                if t.mul(a, b ^ c) != t.mul(a, b) ^ t.mul(a, c) {
                    bad.push(format!("{a} * ({b} + {c}) does not distribute"));
                }
            }
        }
    }
    bad.truncate(20);
    bad
}

fn random_block(params: CodeParams, seed: u64) -> SourceBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..params.k)
        .map(|_| {
            let mut d = vec![0u8; params.t];
            rng.fill_bytes(&mut d);
            SymbolData::new(d)
        })
        .collect();
    SourceBlock::new(data, ImportanceClass::Lib, params).expect("sizes match")
}

fn round_trip_suite() -> Vec<String> {
    let mut bad = Vec::new();
    let profiles = ProfileSet::shipped();
    let mut cases = vec![("standard".to_string(), standard_params(10))];
    for k in profiles.block_sizes() {
        for class in ImportanceClass::ALL {
            let p = profiles
                .get(k, class)
                .expect("shipped set has both classes");
            cases.push((format!("K={k} {class}"), pbpr_params(k, p)));
        }
    }
    for (i, (name, params)) in cases.into_iter().enumerate() {
        let params = match params.and_then(|p| p.with_symbol_size(8)) {
            Ok(p) => p,
            Err(e) => {
                bad.push(format!("{name}: {e}"));
                continue;
            }
        };
        let block = random_block(params, i as u64);
        let c = match encode_block(&block, &GaussianSolver) {
            Ok(c) => c,
            Err(e) => {
                bad.push(format!("{name}: encode failed: {e}"));
                continue;
            }
        };
        for s in block.symbols() {
            if gen_encoding_symbol(&c, &params, s.esi) != *s {
                bad.push(format!("{name}: ESI {} not reproduced", s.esi));
            }
        }
        // every source symbol but the first, plus repair symbols
        let k = params.k;
        let received: Vec<Symbol> = block.symbols()[1..]
            .iter()
            .cloned()
            .chain((0..3).map(|i| gen_encoding_symbol(&c, &params, k + 1000 * i)))
            .collect();
        match decode_block(&received, &params, &GaussianSolver) {
            Ok(d) if d.iter().zip(block.symbols()).all(|(d, s)| *d == s.data) => {}
            Ok(_) => bad.push(format!("{name}: decoded data differs")),
            Err(e) => bad.push(format!("{name}: decode failed: {e:?}")),
        }
    }
    bad
}

fn solver_suite() -> Vec<String> {
    let mut bad = Vec::new();
    let reg = SolverRegistry::with_builtins();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..20 {
        let n = 12 + trial;
        let rows: Vec<Vec<u8>> = (0..n + 2)
            .map(|r| {
                let mut row = vec![0u8; n];
                rng.fill_bytes(&mut row);
                if r % 2 == 0 {
                    row.iter_mut().for_each(|x| *x &= 1);
                }
                row
            })
            .collect();
        let m = ConstraintMatrix::from_rows(n, rows);
        let rhs: Vec<SymbolData> = (0..m.row_count())
            .map(|i| SymbolData::new(vec![i as u8; 3]))
            .collect();
        let base = GaussianSolver.solve(&m, &rhs).map(|x| x.len());
        let base_rank = GaussianSolver.rank(&m);
        for name in reg.names() {
            let s = reg.get(name).expect("listed");
            if s.rank(&m) != base_rank {
                bad.push(format!("{name}: rank differs from gaussian"));
            }
            if s.solve(&m, &rhs).map(|x| x.len()) != base {
                bad.push(format!("{name}: solve outcome differs from gaussian"));
            }
        }
    }
    bad
}

fn rank_suite() -> Vec<String> {
    let mut bad = Vec::new();
    for h in [1u32, 2, 4, 8] {
        let r = match empirical_rank_profile(&RandomSquare, h, 10_000, 7, &GaussianSolver) {
            Ok(r) => r,
            Err(e) => {
                bad.push(e.to_string());
                continue;
            }
        };
        let want = full_rank_prob_random(h, 256);
        if (r.fraction() - want).abs() > 3.0 * r.sigma_at(want) {
            bad.push(format!(
                "H={h}: observed {:.5}, formula {want:.5}",
                r.fraction()
            ));
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_with_named_suites() {
        let r = selftest();
        assert!(r.passed(), "{r}");
        assert!(r.suites.len() >= 4);
        let text = r.to_string();
        for s in &r.suites {
            assert!(text.contains(&format!("PASS {}", s.name)));
        }
    }

    #[test]
    fn corrupted_log_table_fails_fieldmath() {
        let mut inputs = SelftestInputs::default();
        inputs.tables.log.swap(3, 5);
        let r = selftest_with(&inputs);
        assert!(!r.passed());
        assert_eq!(r.failed_suites(), vec!["fieldmath"]);
        assert!(r.to_string().contains("FAIL fieldmath"));
    }

    #[test]
    fn tampered_fixture_fails_reference_suite() {
        let mut inputs = SelftestInputs::default();
        inputs.reference.repair_symbols[0] ^= 1;
        assert_eq!(
            selftest_with(&inputs).failed_suites(),
            vec!["reference-fixtures"]
        );
    }
}
