//! Erasure-channel Monte Carlo harness.
//!
//! A trial sends the K source symbols followed by repair symbols with random
//! ESIs through an i.i.d. erasure channel; the decoder works from the first
//! K + overhead survivors. MIB and LIB trials with the same index share the
//! repair ESIs, the erasure pattern and the source data, so the two classes
//! differ only in their code parameters.

mod stats;
mod timing;

use std::sync::Arc;
use std::time::Instant;

use rand::{seq::index, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{
    decode_block, gen_encoding_symbol, BlockEncoder, DecodeError, SourceBlock, Symbol,
};
use crate::codeparams::{pbpr_params, CodeParams, ImportanceClass, ParamError, ProfileSet};
use crate::fieldmath::SymbolData;
use crate::matrixgen::Solver;

pub use stats::{ci95_half_width, sign_test_p, Z95};
pub use timing::{measure_timing, timing_csv, ClassTiming, TimingReport, WARMUP_FRACTION};

/// Repair ESIs are drawn from [K, 2^24).
pub const ESI_SPACE: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("erasure probability {0} outside [0, 1]")]
    ErasureProbability(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("timing needs at least {min} runs, got {got}")]
    TooFewTimingRuns { min: usize, got: usize },
    #[error("no {class} precode profile for K={k}")]
    MissingProfile { k: u32, class: ImportanceClass },
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub erasure_p: f64,
    pub rng_seed: u64,
}

impl ChannelConfig {
    pub fn new(erasure_p: f64, rng_seed: u64) -> Result<Self, SimError> {
        check_probability(erasure_p)?;
        Ok(ChannelConfig {
            erasure_p,
            rng_seed,
        })
    }
}

fn check_probability(p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::ErasureProbability(p))
    }
}

fn erase_with<T: Clone, R: Rng>(items: &[T], p: f64, rng: &mut R) -> Vec<T> {
    items
        .iter()
        .filter(|_| !rng.random_bool(p))
        .cloned()
        .collect()
}

/// Drops each symbol independently with probability `cfg.erasure_p`.
pub fn erase(symbols: &[Symbol], cfg: &ChannelConfig) -> Vec<Symbol> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    erase_with(symbols, cfg.erasure_p, &mut rng)
}

/// Repair symbols sent per block: ceil(K (p + 0.2) / (1 - p)) + 10, capped
/// by the ESI space. Nothing survives at p = 1, so only the constant is sent.
pub fn repair_count(k: u32, p: f64) -> u32 {
    let extra = if p >= 1.0 {
        0.0
    } else {
        (k as f64 * (p + 0.2) / (1.0 - p)).ceil()
    };
    let cap = (ESI_SPACE - k) as f64;
    (extra + 10.0).min(cap) as u32
}

pub fn default_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Seed for trial `trial` at grid index `point` of an experiment.
pub fn trial_seed(seed: u64, point: usize, trial: u64) -> u64 {
    mix(mix(seed, point as u64), trial)
}

/// What the channel delivers in one trial, independent of the class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialPlan {
    /// ESIs handed to the decoder, in stream order.
    pub received: Vec<u32>,
    /// Symbols sent, sources included.
    pub sent: usize,
    /// Fewer than K + overhead symbols survived.
    pub shortfall: bool,
}

pub fn plan_trial(k: u32, erasure_p: f64, overhead: u32, seed: u64) -> TrialPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let repairs = repair_count(k, erasure_p) as usize;
    let mut stream: Vec<u32> = (0..k).collect();
    stream.extend(
        index::sample(&mut rng, (ESI_SPACE - k) as usize, repairs)
            .into_iter()
            .map(|i| i as u32 + k),
    );
    let mut survivors = erase_with(&stream, erasure_p, &mut rng);
    let need = (k + overhead) as usize;
    let shortfall = survivors.len() < need;
    survivors.truncate(need);
    TrialPlan {
        received: survivors,
        sent: stream.len(),
        shortfall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub success: bool,
    pub shortfall: bool,
    pub received_count: usize,
    pub rank_achieved: usize,
    pub encode_ns: u64,
    pub decode_ns: u64,
}

/// Code parameters of both classes for one block size, plus the solver and
/// symbol size every trial uses.
#[derive(Clone)]
pub struct BlockSetup {
    k: u32,
    mib: BlockEncoder,
    lib: BlockEncoder,
    solver: Arc<dyn Solver>,
}

impl std::fmt::Debug for BlockSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockSetup")
            .field("k", &self.k)
            .field("mib", self.mib.params())
            .field("lib", self.lib.params())
            .field("solver", &self.solver.name())
            .finish()
    }
}

impl BlockSetup {
    pub fn new(
        k: u32,
        profiles: &ProfileSet,
        solver: Arc<dyn Solver>,
        symbol_size: usize,
    ) -> Result<Self, SimError> {
        let resolve = |class| -> Result<BlockEncoder, SimError> {
            let profile = profiles
                .get(k, class)
                .ok_or(SimError::MissingProfile { k, class })?;
            let params = pbpr_params(k, profile)?.with_symbol_size(symbol_size)?;
            Ok(BlockEncoder::new(params))
        };
        Ok(BlockSetup {
            k,
            mib: resolve(ImportanceClass::Mib)?,
            lib: resolve(ImportanceClass::Lib)?,
            solver,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn params(&self, class: ImportanceClass) -> &CodeParams {
        self.encoder(class).params()
    }

    pub fn encoder(&self, class: ImportanceClass) -> &BlockEncoder {
        match class {
            ImportanceClass::Mib => &self.mib,
            ImportanceClass::Lib => &self.lib,
        }
    }

    pub fn solver(&self) -> &dyn Solver {
        self.solver.as_ref()
    }

    pub(crate) fn random_block(&self, class: ImportanceClass, seed: u64) -> SourceBlock {
        let params = *self.params(class);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..params.k)
            .map(|_| {
                let mut d = vec![0u8; params.t];
                rng.fill_bytes(&mut d);
                SymbolData::new(d)
            })
            .collect();
        SourceBlock::new(data, class, params).expect("sizes match params")
    }

    pub fn run_trial(
        &self,
        class: ImportanceClass,
        erasure_p: f64,
        overhead: u32,
        seed: u64,
    ) -> Result<TrialResult, SimError> {
        check_probability(erasure_p)?;
        let plan = plan_trial(self.k, erasure_p, overhead, seed);
        Ok(self.run_planned(class, &plan, mix(seed, 0xda7a)))
    }

    /// Outcome from the rank of the decoding matrix alone, without moving
    /// any symbol data.
    fn run_rank_only(&self, class: ImportanceClass, plan: &TrialPlan) -> TrialResult {
        let params = self.params(class);
        let m = self.encoder(class).decoding_matrix(&plan.received);
        let rank = self.solver.rank(&m);
        TrialResult {
            success: !plan.shortfall && rank == params.l as usize,
            shortfall: plan.shortfall,
            received_count: plan.received.len(),
            rank_achieved: rank,
            encode_ns: 0,
            decode_ns: 0,
        }
    }

    fn run_planned(&self, class: ImportanceClass, plan: &TrialPlan, data_seed: u64) -> TrialResult {
        let params = self.params(class);
        if plan.shortfall {
            return self.run_rank_only(class, plan);
        }
        let block = self.random_block(class, data_seed);
        let start = Instant::now();
        let c = self
            .encoder(class)
            .encode(&block, self.solver())
            .expect("systematic index gives a full-rank encoding");
        let encode_ns = start.elapsed().as_nanos() as u64;
        let received: Vec<Symbol> = plan
            .received
            .iter()
            .map(|&esi| match block.symbols().get(esi as usize) {
                Some(s) => s.clone(),
                None => gen_encoding_symbol(&c, params, esi),
            })
            .collect();
        let start = Instant::now();
        let decoded = decode_block(&received, params, self.solver());
        let decode_ns = start.elapsed().as_nanos() as u64;
        let (success, rank_achieved) = match decoded {
            Ok(data) => {
                assert!(
                    data.iter().zip(block.symbols()).all(|(d, s)| d == &s.data),
                    "decoder returned wrong source data (K={}, {class})",
                    self.k
                );
                (true, params.l as usize)
            }
            Err(DecodeError::Failure(f)) => (false, f.rank),
            Err(DecodeError::Invalid(e)) => panic!("simulator built an invalid decode input: {e}"),
        };
        TrialResult {
            success,
            shortfall: false,
            received_count: received.len(),
            rank_achieved,
            encode_ns,
            decode_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub grid: Vec<f64>,
    pub trials: u64,
    pub overhead: u32,
    pub seed: u64,
    /// Report decode times; off by default so that reports are reproducible.
    pub record_timing: bool,
    /// Every n-th trial encodes, decodes and checks real data; the rest
    /// decide success from the rank of the received rows. Timing forces 1.
    pub data_check_every: u64,
}

/// Default for [`ExperimentSpec::data_check_every`].
pub const DATA_CHECK_EVERY: u64 = 64;

impl ExperimentSpec {
    pub fn new(grid: Vec<f64>, trials: u64, overhead: u32, seed: u64) -> Self {
        ExperimentSpec {
            grid,
            trials,
            overhead,
            seed,
            record_timing: false,
            data_check_every: DATA_CHECK_EVERY,
        }
    }

    fn full_trial(&self, trial: u64) -> bool {
        self.record_timing || self.data_check_every <= 1 || trial.is_multiple_of(self.data_check_every)
    }
}

/// Outcome counts of one class at one grid point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub trials: u64,
    /// All failures, shortfalls included.
    pub failures: u64,
    pub shortfalls: u64,
    pub decode_ns_total: u128,
    pub decoded_trials: u64,
}

impl ClassStats {
    fn add(&mut self, r: &TrialResult) {
        self.trials += 1;
        self.failures += u64::from(!r.success);
        self.shortfalls += u64::from(r.shortfall);
        if !r.shortfall {
            self.decode_ns_total += u128::from(r.decode_ns);
            self.decoded_trials += 1;
        }
    }

    pub fn failure_rate(&self) -> f64 {
        ratio(self.failures, self.trials)
    }

    pub fn ci95(&self) -> f64 {
        ci95_half_width(self.failures, self.trials)
    }

    /// Failure rate among trials that received K + overhead symbols.
    pub fn conditional_failure_rate(&self) -> f64 {
        ratio(
            self.failures - self.shortfalls,
            self.trials - self.shortfalls,
        )
    }

    pub fn conditional_ci95(&self) -> f64 {
        ci95_half_width(
            self.failures - self.shortfalls,
            self.trials - self.shortfalls,
        )
    }

    pub fn mean_decode_ns(&self) -> Option<f64> {
        (self.decoded_trials > 0).then(|| self.decode_ns_total as f64 / self.decoded_trials as f64)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub erasure_p: f64,
    pub mib: ClassStats,
    pub lib: ClassStats,
    /// Trials where only MIB failed.
    pub mib_only_failures: u64,
    /// Trials where only LIB failed.
    pub lib_only_failures: u64,
}

impl PointReport {
    pub fn stats(&self, class: ImportanceClass) -> &ClassStats {
        match class {
            ImportanceClass::Mib => &self.mib,
            ImportanceClass::Lib => &self.lib,
        }
    }

    /// LIB over MIB conditional failure rate; infinite if only LIB failed,
    /// `None` if neither did.
    pub fn lib_mib_ratio(&self) -> Option<f64> {
        let lib = self.lib.failures - self.lib.shortfalls;
        let mib = self.mib.failures - self.mib.shortfalls;
        match (lib, mib) {
            (0, 0) => None,
            (_, 0) => Some(f64::INFINITY),
            _ => Some(self.lib.conditional_failure_rate() / self.mib.conditional_failure_rate()),
        }
    }

    /// p-value of the paired sign test against "MIB fails at least as often".
    pub fn mib_dominance_p(&self) -> f64 {
        sign_test_p(self.mib_only_failures, self.lib_only_failures)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub k: u32,
    pub overhead: u32,
    pub trials: u64,
    pub seed: u64,
    pub record_timing: bool,
    pub points: Vec<PointReport>,
}

impl ExperimentReport {
    /// Largest LIB/MIB ratio over the grid, `None` if no point has failures.
    pub fn max_ratio(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(PointReport::lib_mib_ratio)
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
    }

    pub fn point(&self, erasure_p: f64) -> Option<&PointReport> {
        self.points
            .iter()
            .find(|p| (p.erasure_p - erasure_p).abs() < 1e-9)
    }

    pub fn to_csv(&self) -> String {
        experiment_csv(std::slice::from_ref(self))
    }
}

pub const EXPERIMENT_CSV_HEADER: [&str; 11] = [
    "K",
    "class",
    "erasure_p",
    "overhead",
    "trials",
    "failures",
    "failure_rate",
    "ci95",
    "mean_decode_ns",
    "shortfalls",
    "conditional_failure_rate",
];

/// One row per grid point and class, LIB before MIB.
pub fn experiment_csv(reports: &[ExperimentReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXPERIMENT_CSV_HEADER)
        .expect("in-memory write");
    for r in reports {
        for p in &r.points {
            for class in [ImportanceClass::Lib, ImportanceClass::Mib] {
                let s = p.stats(class);
                let decode = match (r.record_timing, s.mean_decode_ns()) {
                    (true, Some(ns)) => format!("{ns:.0}"),
                    _ => "NA".to_string(),
                };
                w.write_record([
                    r.k.to_string(),
                    class.to_string(),
                    p.erasure_p.to_string(),
                    r.overhead.to_string(),
                    s.trials.to_string(),
                    s.failures.to_string(),
                    format!("{:.8}", s.failure_rate()),
                    format!("{:.8}", s.ci95()),
                    decode,
                    s.shortfalls.to_string(),
                    format!("{:.8}", s.conditional_failure_rate()),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// Runs both classes at every grid point. Trials run on the current rayon
/// pool; every trial derives its randomness from (seed, grid index, trial
/// index) alone, so the report does not depend on the thread count.
pub fn run_experiment(
    setup: &BlockSetup,
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, SimError> {
    if spec.trials == 0 {
        return Err(SimError::NoTrials);
    }
    for &p in &spec.grid {
        check_probability(p)?;
    }
    let points = spec
        .grid
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let outcomes: Vec<(TrialResult, TrialResult)> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(spec.seed, pi, t);
                    let plan = plan_trial(setup.k, p, spec.overhead, seed);
                    if spec.full_trial(t) {
                        let data_seed = mix(seed, 0xda7a);
                        (
                            setup.run_planned(ImportanceClass::Mib, &plan, data_seed),
                            setup.run_planned(ImportanceClass::Lib, &plan, data_seed),
                        )
                    } else {
                        (
                            setup.run_rank_only(ImportanceClass::Mib, &plan),
                            setup.run_rank_only(ImportanceClass::Lib, &plan),
                        )
                    }
                })
                .collect();
            let mut point = PointReport {
                erasure_p: p,
                mib: ClassStats::default(),
                lib: ClassStats::default(),
                mib_only_failures: 0,
                lib_only_failures: 0,
            };
            for (m, l) in &outcomes {
                point.mib.add(m);
                point.lib.add(l);
                point.mib_only_failures += u64::from(!m.success && l.success);
                point.lib_only_failures += u64::from(m.success && !l.success);
            }
            point
        })
        .collect();
    Ok(ExperimentReport {
        k: setup.k,
        overhead: spec.overhead,
        trials: spec.trials,
        seed: spec.seed,
        record_timing: spec.record_timing,
        points,
    })
}
