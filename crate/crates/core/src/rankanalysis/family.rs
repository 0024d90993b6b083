use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::{full_rank_prob_random, RankError, OCTET_FIELD_ORDER};
use crate::chansim::{ci95_half_width, mix};
use crate::codeparams::{standard_params, CodeParams};
use crate::matrixgen::{self, BitRow, ConstraintMatrix, RowKind, Solver};

/// A distribution over matrices: a base part plus `h` rows of uniform
/// random octets.
///
/// Samples drawn from the same RNG state for different `h` share their base,
/// and where the width does not depend on `h` the random rows for `h` are a
/// prefix of those for `h + 1`.
pub trait MatrixFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn sample(&self, h: u32, rng: &mut ChaCha8Rng) -> ConstraintMatrix;

    /// Rank of a full-rank sample.
    fn full_rank(&self, h: u32) -> usize;

    /// Closed-form full-rank probability, where one exists.
    fn predicted(&self, h: u32) -> Option<f64>;
}

fn push_random_rows(m: &mut ConstraintMatrix, h: u32, rng: &mut ChaCha8Rng) {
    let cols = m.cols();
    m.reserve(h as usize);
    for _ in 0..h {
        let mut row = vec![0u8; cols];
        rng.fill_bytes(&mut row);
        m.push_dense(RowKind::Custom, row);
    }
}

/// H x H matrices of uniform octets.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSquare;

impl MatrixFamily for RandomSquare {
    fn name(&self) -> &'static str {
        "random-square"
    }

    fn sample(&self, h: u32, rng: &mut ChaCha8Rng) -> ConstraintMatrix {
        let mut m = ConstraintMatrix::new(h as usize);
        push_random_rows(&mut m, h, rng);
        m
    }

    fn full_rank(&self, h: u32) -> usize {
        h as usize
    }

    fn predicted(&self, h: u32) -> Option<f64> {
        Some(full_rank_prob_random(h, OCTET_FIELD_ORDER))
    }
}

/// `base` identity rows over `base + H` columns with H random rows below.
/// Full rank exactly when the random rows restricted to the last H columns
/// are, so the closed form is that of [`RandomSquare`].
#[derive(Debug, Clone, Copy)]
pub struct IdentityBase {
    pub base: usize,
}

impl Default for IdentityBase {
    fn default() -> Self {
        IdentityBase { base: 16 }
    }
}

impl MatrixFamily for IdentityBase {
    fn name(&self) -> &'static str {
        "identity-base"
    }

    fn sample(&self, h: u32, rng: &mut ChaCha8Rng) -> ConstraintMatrix {
        let cols = self.base + h as usize;
        let mut m = ConstraintMatrix::new(cols);
        for i in 0..self.base {
            let mut r = BitRow::zeros(cols);
            r.set(i);
            m.push_binary(RowKind::Custom, r);
        }
        push_random_rows(&mut m, h, rng);
        m
    }

    fn full_rank(&self, h: u32) -> usize {
        self.base + h as usize
    }

    fn predicted(&self, h: u32) -> Option<f64> {
        Some(full_rank_prob_random(h, OCTET_FIELD_ORDER))
    }
}

/// Decoding matrix of a standard code with its HDPC rows replaced by H
/// random rows: the LDPC rows, LT rows for K' ISIs drawn at random, and the
/// random rows, over the L columns of the standard code. Column count does
/// not depend on H, so full rank needs H at least the standard HDPC count.
#[derive(Debug, Clone, Copy)]
pub struct LdpcLtBase {
    params: CodeParams,
}

impl LdpcLtBase {
    pub fn new(k: u32) -> Result<Self, crate::codeparams::ParamError> {
        Ok(LdpcLtBase {
            params: standard_params(k)?,
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }
}

impl Default for LdpcLtBase {
    fn default() -> Self {
        LdpcLtBase::new(101).expect("K = 101 is in the systematic index table")
    }
}

impl MatrixFamily for LdpcLtBase {
    fn name(&self) -> &'static str {
        "ldpc-lt"
    }

    fn sample(&self, h: u32, rng: &mut ChaCha8Rng) -> ConstraintMatrix {
        let p = &self.params;
        let mut m = ConstraintMatrix::new(p.l as usize);
        m.reserve((p.s + p.k_prime + h) as usize);
        for row in matrixgen::build_ldpc_rows(p) {
            m.push_binary(RowKind::Ldpc, row);
        }
        let isis: Vec<u32> = index::sample(rng, 1 << 24, p.k_prime as usize)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        matrixgen::append_lt_rows(&mut m, p, &isis);
        push_random_rows(&mut m, h, rng);
        m
    }

    fn full_rank(&self, _h: u32) -> usize {
        self.params.l as usize
    }

    fn predicted(&self, _h: u32) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown matrix family {name:?}; available: {available}")]
pub struct UnknownFamily {
    pub name: String,
    pub available: String,
}

/// Matrix families by name.
#[derive(Clone, Default)]
pub struct MatrixFamilyRegistry {
    families: BTreeMap<String, Arc<dyn MatrixFamily>>,
}

impl MatrixFamilyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `random-square`, `identity-base` and `ldpc-lt`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(RandomSquare));
        reg.register(Arc::new(IdentityBase::default()));
        reg.register(Arc::new(LdpcLtBase::default()));
        reg
    }

    pub fn register(&mut self, family: Arc<dyn MatrixFamily>) {
        self.families.insert(family.name().to_string(), family);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MatrixFamily>, UnknownFamily> {
        self.families
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownFamily {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.families.keys().map(String::as_str).collect()
    }
}

impl std::fmt::Debug for MatrixFamilyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

/// Observed full-rank statistics of one family at one H.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRank {
    pub family: String,
    pub h: u32,
    pub trials: u64,
    pub full_rank: u64,
    /// `deficiency[d]` counts samples whose rank fell `d` short.
    pub deficiency: Vec<u64>,
    pub predicted: Option<f64>,
}

impl EmpiricalRank {
    pub fn fraction(&self) -> f64 {
        self.full_rank as f64 / self.trials as f64
    }

    pub fn ci95(&self) -> f64 {
        ci95_half_width(self.full_rank, self.trials)
    }

    /// Binomial standard deviation of the fraction if `p` is the true
    /// probability.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Samples `trials` matrices of `family` with `h` random rows and ranks
/// each with `solver`.
///
/// Sample `t` is drawn from an RNG seeded by (seed, t) alone, so the result
/// does not depend on the thread count, and calls that differ only in `h`
/// see the same bases.
pub fn empirical_rank_profile(
    family: &dyn MatrixFamily,
    h: u32,
    trials: u64,
    seed: u64,
    solver: &dyn Solver,
) -> Result<EmpiricalRank, RankError> {
    if trials == 0 {
        return Err(RankError::NoTrials);
    }
    let target = family.full_rank(h);
    let shortfalls: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t));
            target - solver.rank(&family.sample(h, &mut rng))
        })
        .collect();
    let mut deficiency = vec![0u64; shortfalls.iter().copied().max().unwrap_or(0) + 1];
    for d in shortfalls {
        deficiency[d] += 1;
    }
    Ok(EmpiricalRank {
        family: family.name().to_string(),
        h,
        trials,
        full_rank: deficiency[0],
        deficiency,
        predicted: family.predicted(h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixgen::{GaussianSolver, InactivationSolver};

    #[test]
    fn zero_rows_over_identity_is_full_rank() {
        let r =
            empirical_rank_profile(&IdentityBase::default(), 0, 50, 1, &GaussianSolver).unwrap();
        assert_eq!(r.fraction(), 1.0);
        assert_eq!(r.deficiency, vec![50]);
        let r = empirical_rank_profile(&RandomSquare, 0, 5, 1, &GaussianSolver).unwrap();
        assert_eq!(r.fraction(), 1.0);
    }

    #[test]
    fn no_trials_is_an_error() {
        assert_eq!(
            empirical_rank_profile(&RandomSquare, 3, 0, 1, &GaussianSolver),
            Err(RankError::NoTrials)
        );
    }

    #[test]
    fn shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(RandomSquare.sample(5, &mut rng).dims(), (5, 5));
        assert_eq!(IdentityBase { base: 3 }.sample(2, &mut rng).dims(), (5, 5));
        let f = LdpcLtBase::default();
        let p = *f.params();
        let m = f.sample(12, &mut rng);
        assert_eq!(m.dims(), ((p.s + p.k_prime + 12) as usize, p.l as usize));
        assert_eq!(m.count_kind(RowKind::Ldpc), p.s as usize);
        assert_eq!(m.count_kind(RowKind::Lt), p.k_prime as usize);
    }

    #[test]
    fn ldpc_lt_rows_are_prefix_paired_across_h() {
        let f = LdpcLtBase::default();
        let a = f.sample(10, &mut ChaCha8Rng::seed_from_u64(9));
        let b = f.sample(12, &mut ChaCha8Rng::seed_from_u64(9));
        for i in 0..a.row_count() {
            assert_eq!(a.row_octets(i), b.row_octets(i));
        }
    }

    #[test]
    fn ldpc_lt_needs_the_standard_hdpc_count() {
        let f = LdpcLtBase::default();
        let h_std = f.params().h;
        let short = empirical_rank_profile(&f, h_std - 1, 20, 4, &InactivationSolver).unwrap();
        assert_eq!(short.full_rank, 0);
        let enough = empirical_rank_profile(&f, h_std + 2, 200, 4, &InactivationSolver).unwrap();
        assert!(enough.fraction() > 0.9, "{}", enough.fraction());
    }

    #[test]
    fn registry() {
        let reg = MatrixFamilyRegistry::with_builtins();
        assert_eq!(
            reg.names(),
            vec!["identity-base", "ldpc-lt", "random-square"]
        );
        assert!(reg.get("random-square").is_ok());
        let e = reg.get("nope").err().unwrap();
        assert!(e
            .to_string()
            .contains("identity-base, ldpc-lt, random-square"));
    }

    #[test]
    fn independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    empirical_rank_profile(&RandomSquare, 2, 3000, 77, &GaussianSolver).unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }
}
