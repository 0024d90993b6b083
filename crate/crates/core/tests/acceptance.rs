//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints its PASS/FAIL line; exits non-zero if any fail.
//!
//! `cargo test --test acceptance -- 3 7` runs only the listed checks.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use uep_raptorq::chansim::{
    default_grid, erase, experiment_csv, measure_timing, run_experiment, BlockSetup, ChannelConfig,
    ExperimentReport, ExperimentSpec,
};
use uep_raptorq::cli::config::DEFAULT_SYMBOL_SIZE;
use uep_raptorq::codec::{decode_block, BlockEncoder, SourceBlock};
use uep_raptorq::codeparams::{
    pbpr_params, standard_params, ImportanceClass, PrecodeProfile, ProfileSet,
};
use uep_raptorq::fieldmath::SymbolData;
use uep_raptorq::interop::{compare, ReferenceVectors};
use uep_raptorq::matrixgen::{GaussianSolver, InactivationSolver, Solver, SolverRegistry};
use uep_raptorq::rankanalysis::{
    empirical_csv, empirical_rank_profile, full_rank_prob_random, rank_csv, rank_probabilities,
    rank_table, RandomSquare, RankInputs, DEFAULT_PI_EXCESS,
};

const SEED: u64 = 42;
const MC_TRIALS: u64 = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn profiles_with_k10() -> ProfileSet {
    let mut set = ProfileSet::shipped();
    let std10 = standard_params(10).unwrap();
    set.insert(
        10,
        PrecodeProfile {
            class: ImportanceClass::Lib,
            s: std10.s,
            h: std10.h,
        },
    );
    // no shipped MIB profile at K = 10; grow the precode as the others do
    set.insert(
        10,
        PrecodeProfile {
            class: ImportanceClass::Mib,
            s: 11,
            h: 12,
        },
    );
    set
}

fn round_trips() -> Outcome {
    let start = Instant::now();
    let profiles = profiles_with_k10();
    let lossless = ChannelConfig::new(0.0, 0).unwrap();
    let mut bad = Vec::new();
    let mut total = 0;
    for k in [10, 55, 101, 213] {
        for class in [ImportanceClass::Lib, ImportanceClass::Mib] {
            let params = pbpr_params(k, profiles.get(k, class).unwrap())
                .and_then(|p| p.with_symbol_size(16))
                .unwrap();
            let enc = BlockEncoder::new(params);
            let ok = (0..1000u64)
                .into_par_iter()
                .filter(|&t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(t ^ (u64::from(k) << 32));
                    let data: Vec<SymbolData> = (0..k)
                        .map(|_| {
                            let mut d = vec![0u8; params.t];
                            rng.fill_bytes(&mut d);
                            SymbolData::new(d)
                        })
                        .collect();
                    let block = SourceBlock::new(data.clone(), class, params).unwrap();
                    let Ok(_) = enc.encode(&block, &InactivationSolver) else {
                        return false;
                    };
                    let received = erase(block.symbols(), &lossless);
                    decode_block(&received, &params, &InactivationSolver).is_ok_and(|d| d == data)
                })
                .count();
            total += ok;
            if ok != 1000 {
                bad.push(format!("K={k} {class}: {ok}/1000"));
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(60);
    outcome(
        bad.is_empty() && fast,
        format!(
            "{total}/8000 round trips in {:.1}s{}",
            elapsed.as_secs_f64(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; short: {}", bad.join(", "))
            }
        ),
    )
}

fn reference_fixtures() -> Outcome {
    let r = ReferenceVectors::k10();
    let reg = SolverRegistry::with_builtins();
    let mut bad = Vec::new();
    for name in reg.names() {
        for e in compare(&r, reg.get(name).unwrap().as_ref()) {
            bad.push(format!("{name}: {e}"));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "constraint matrix, intermediate symbols and 5 repair symbols match with solvers {}",
                reg.names().join(", ")
            )
        } else {
            bad.join("; ")
        },
    )
}

fn failure_experiment(k: u32, overhead: u32) -> ExperimentReport {
    let setup = BlockSetup::new(
        k,
        &ProfileSet::shipped(),
        Arc::new(InactivationSolver),
        DEFAULT_SYMBOL_SIZE,
    )
    .unwrap();
    let spec = ExperimentSpec::new(default_grid(), MC_TRIALS, overhead, SEED);
    run_experiment(&setup, &spec).unwrap()
}

fn ratio_summary(r: &ExperimentReport) -> String {
    r.points
        .iter()
        .map(|p| {
            let ratio = p
                .lib_mib_ratio()
                .map_or("NA".to_string(), |x| format!("{x:.2}"));
            format!(
                "p={}: {}/{} {ratio}",
                p.erasure_p,
                p.lib.failures - p.lib.shortfalls,
                p.mib.failures - p.mib.shortfalls
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn ratio_check(r: &ExperimentReport, lo: f64, hi: f64) -> (bool, String) {
    let max = r.max_ratio();
    let pass = max.is_some_and(|m| (lo..=hi).contains(&m));
    let text = format!(
        "max LIB/MIB ratio {} (want [{lo}, {hi}]); LIB/MIB failures and ratio per point: {}",
        max.map_or("NA".to_string(), |m| format!("{m:.3}")),
        ratio_summary(r)
    );
    (pass, text)
}

fn experiment2() -> Outcome {
    let start = Instant::now();
    let r = failure_experiment(101, 0);
    let (ratio_ok, text) = ratio_check(&r, 1.2, 1.7);
    let mut weak = Vec::new();
    for i in 2..=8 {
        let p = r.point(i as f64 / 10.0).unwrap();
        if p.mib_dominance_p() >= 0.01 {
            weak.push(format!(
                "p={} (MIB-only {}, LIB-only {}, sign test p={:.4})",
                p.erasure_p,
                p.mib_only_failures,
                p.lib_only_failures,
                p.mib_dominance_p()
            ));
        }
    }
    let dominance = if weak.is_empty() {
        "MIB < LIB at 99% one-sided confidence for p = 0.2..0.8".to_string()
    } else {
        format!("dominance not shown at {}", weak.join(", "))
    };
    outcome(
        ratio_ok && weak.is_empty(),
        format!("{text}; {dominance}; {:.0}s", start.elapsed().as_secs_f64()),
    )
}

fn experiment3() -> Outcome {
    let start = Instant::now();
    let r = failure_experiment(213, 0);
    let (pass, text) = ratio_check(&r, 1.3, 1.9);
    outcome(
        pass,
        format!("{text}; {:.0}s", start.elapsed().as_secs_f64()),
    )
}

fn experiment4() -> Outcome {
    let start = Instant::now();
    let r = failure_experiment(101, 1);
    let (pass, text) = ratio_check(&r, 1.5, 2.5);
    outcome(
        pass,
        format!("{text}; {:.0}s", start.elapsed().as_secs_f64()),
    )
}

fn timing() -> Outcome {
    let solver: Arc<dyn Solver> = Arc::new(GaussianSolver);
    let bands = [(55, 8.0, 30.0), (101, 5.0, 25.0), (213, 2.0, 18.0)];
    let mut pass = true;
    let mut pcts = Vec::new();
    let mut text = Vec::new();
    for (k, lo, hi) in bands {
        let setup = BlockSetup::new(
            k,
            &ProfileSet::shipped(),
            solver.clone(),
            DEFAULT_SYMBOL_SIZE,
        )
        .unwrap();
        let r = measure_timing(&setup, 5000, SEED).unwrap();
        let pct = r.pct_increase();
        pass &= (lo..=hi).contains(&pct);
        text.push(format!("K={k} {pct:.2}% (want [{lo}, {hi}])"));
        pcts.push(pct);
    }
    let decreasing = pcts.windows(2).all(|w| w[1] < w[0]);
    outcome(
        pass && decreasing,
        format!(
            "{}; {}",
            text.join(", "),
            if decreasing {
                "strictly decreasing in K"
            } else {
                "NOT strictly decreasing in K"
            }
        ),
    )
}

fn rank_analysis() -> Outcome {
    let mut pass = true;
    let mut text = Vec::new();
    for h in [1u32, 2, 4, 8] {
        let r = empirical_rank_profile(&RandomSquare, h, 10_000, SEED, &GaussianSolver).unwrap();
        let want = full_rank_prob_random(h, 256);
        let z = (r.fraction() - want) / r.sigma_at(want);
        pass &= z.abs() <= 3.0;
        text.push(format!(
            "H={h} observed {:.4} formula {want:.6} ({z:+.2} sigma)",
            r.fraction()
        ));
    }
    let p_n: Vec<_> = (1..=64)
        .map(|h| {
            let inputs = RankInputs::with_pi_excess(h, 256, 1.0, DEFAULT_PI_EXCESS).unwrap();
            rank_probabilities(&inputs).p_n
        })
        .collect();
    let drop = p_n.windows(2).position(|w| w[1] <= w[0]);
    pass &= drop.is_none();
    text.push(match drop {
        None => "p_N strictly increasing over H = 1..64".to_string(),
        Some(i) => format!("p_N does not increase from H={} to H={}", i + 1, i + 2),
    });
    outcome(pass, text.join("; "))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn cli_csv(threads: &str, dir: &std::path::Path, name: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_uepq"))
        .args([
            "run",
            "--experiment",
            "4",
            "--trials",
            "3000",
            "--out",
            name,
        ])
        .env("RAYON_NUM_THREADS", threads)
        .current_dir(dir)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    std::fs::read(dir.join(name)).unwrap()
}

fn determinism() -> Outcome {
    let mut bad = Vec::new();
    let setups: Vec<BlockSetup> = [55, 213]
        .iter()
        .map(|&k| {
            BlockSetup::new(
                k,
                &ProfileSet::shipped(),
                Arc::new(InactivationSolver),
                DEFAULT_SYMBOL_SIZE,
            )
            .unwrap()
        })
        .collect();
    let spec = ExperimentSpec::new(default_grid(), 3000, 0, 7);
    let experiment = |threads| {
        in_pool(threads, || {
            let reports: Vec<_> = setups
                .iter()
                .map(|s| run_experiment(s, &spec).unwrap())
                .collect();
            experiment_csv(&reports)
        })
    };
    let base = experiment(1);
    for threads in [1, 4] {
        if experiment(threads) != base {
            bad.push(format!("experiment CSV differs with {threads} threads"));
        }
    }

    let rank = |threads| {
        in_pool(threads, || {
            let table = rank_csv(&rank_table(1..=64, 256, 1.0, DEFAULT_PI_EXCESS).unwrap());
            let emp: Vec<_> = [1, 2, 4, 8]
                .iter()
                .map(|&h| {
                    empirical_rank_profile(&RandomSquare, h, 5000, 3, &InactivationSolver).unwrap()
                })
                .collect();
            table + &empirical_csv(&emp)
        })
    };
    if rank(1) != rank(4) {
        bad.push("rank CSVs differ between 1 and 4 threads".to_string());
    }

    let dir = tempfile::tempdir().unwrap();
    let a = cli_csv("1", dir.path(), "a.csv");
    let b = cli_csv("4", dir.path(), "b.csv");
    let c = cli_csv("4", dir.path(), "c.csv");
    if a != b || b != c {
        bad.push("uepq run output differs across reruns".to_string());
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "experiment, rank and CLI CSVs byte-identical across reruns on 1 and 4 threads"
                .to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let checks: [(&str, &str, fn() -> Outcome); 8] = [
        ("1", "codec round trip", round_trips),
        ("2", "reference fixtures", reference_fixtures),
        ("3", "K=101 failure ratio and dominance", experiment2),
        ("4", "K=213 failure ratio", experiment3),
        ("5", "K=101 overhead 1 failure ratio", experiment4),
        ("6", "timing overhead", timing),
        ("7", "rank analysis", rank_analysis),
        ("8", "determinism", determinism),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let r = check();
        println!(
            "criterion {id} ({name}): {} - {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        failed += usize::from(!r.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
