//! Front end: runs configured experiments and rank tables, writing CSV.

pub mod config;
pub mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ConfigError, Entries, Experiment, ExperimentConfig};

use crate::chansim::{
    experiment_csv, measure_timing, run_experiment, timing_csv, BlockSetup, ExperimentSpec,
    SimError,
};
use crate::matrixgen::SolverRegistry;
use crate::output::write_atomic;
use crate::rankanalysis::{
    empirical_csv, empirical_rank_profile, rank_csv, rank_table, MatrixFamilyRegistry, RankError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SELFTEST: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

impl CliError {
    /// Every error is a problem with the configuration or its paths.
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

fn write_output(path: &Path, csv: &str) -> Result<(), CliError> {
    write_atomic(path, csv.as_bytes()).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

// Progress lines are best effort; a closed stdout must not abort a run.
macro_rules! say {
    ($log:expr, $($arg:tt)*) => {
        let _ = writeln!($log, $($arg)*);
    };
}

/// Runs `config`, writes its CSV to `config.out` and returns the CSV text.
/// Prints one line per grid point (per block size for timing) to `log`.
pub fn run(config: &ExperimentConfig, log: &mut dyn Write) -> Result<String, CliError> {
    config.validate()?;
    let solver = SolverRegistry::with_builtins()
        .get(&config.solver)
        .map_err(|e| ConfigError(e.to_string()))?;
    let setups = config
        .k
        .iter()
        .map(|&k| BlockSetup::new(k, &config.profiles, solver.clone(), config.symbol_size))
        .collect::<Result<Vec<_>, _>>()?;

    let csv = if config.experiment.is_timing() {
        let mut reports = Vec::new();
        for setup in &setups {
            let r = measure_timing(setup, config.timing_runs, config.seed)?;
            say!(
                log,
                "K={} LIB {:.0} ns MIB {:.0} ns (encode + decode) increase {:.2}%",
                r.k,
                r.lib.mean_total_ns(),
                r.mib.mean_total_ns(),
                r.pct_increase()
            );
            reports.push(r);
        }
        timing_csv(&reports)
    } else {
        let spec = ExperimentSpec {
            record_timing: config.record_timing,
            data_check_every: config.data_check_every,
            ..ExperimentSpec::new(
                config.erasure_grid.clone(),
                config.trials,
                config.overhead,
                config.seed,
            )
        };
        let mut reports = Vec::new();
        for setup in &setups {
            let r = run_experiment(setup, &spec)?;
            for p in &r.points {
                let ratio = p
                    .lib_mib_ratio()
                    .map_or("NA".to_string(), |x| format!("{x:.3}"));
                say!(
                    log,
                    "K={} overhead={} p={} LIB {:.6} MIB {:.6} shortfalls {} ratio {ratio}",
                    r.k,
                    r.overhead,
                    p.erasure_p,
                    p.lib.failure_rate(),
                    p.mib.failure_rate(),
                    p.lib.shortfalls
                );
            }
            reports.push(r);
        }
        experiment_csv(&reports)
    };
    write_output(&config.out, &csv)?;
    say!(log, "wrote {}", config.out.display());
    Ok(csv)
}

/// Analytic rank table over H = 1..=h_max, optionally with empirical
/// full-rank fractions for one matrix family.
#[derive(Debug, Clone, PartialEq)]
pub struct RankJob {
    pub h_max: u32,
    pub q: u32,
    pub p_w: f64,
    pub pi_excess: u32,
    pub out: PathBuf,
    pub empirical: Option<EmpiricalJob>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalJob {
    pub family: String,
    pub hs: Vec<u32>,
    pub samples: u64,
    pub seed: u64,
    pub solver: String,
    pub out: PathBuf,
}

pub fn run_rank(job: &RankJob, log: &mut dyn Write) -> Result<(), CliError> {
    let rows = rank_table(1..=job.h_max, job.q, job.p_w, job.pi_excess)?;
    write_output(&job.out, &rank_csv(&rows))?;
    say!(log, "wrote {} ({} rows)", job.out.display(), rows.len());
    if let Some(e) = &job.empirical {
        let family = MatrixFamilyRegistry::with_builtins()
            .get(&e.family)
            .map_err(|err| ConfigError(err.to_string()))?;
        let solver = SolverRegistry::with_builtins()
            .get(&e.solver)
            .map_err(|err| ConfigError(err.to_string()))?;
        let mut results = Vec::new();
        for &h in &e.hs {
            let r = empirical_rank_profile(family.as_ref(), h, e.samples, e.seed, solver.as_ref())?;
            say!(
                log,
                "{} H={h} full rank {:.6} +/- {:.6}{}",
                r.family,
                r.fraction(),
                r.ci95(),
                r.predicted
                    .map_or(String::new(), |p| format!(" predicted {p:.6}"))
            );
            results.push(r);
        }
        write_output(&e.out, &empirical_csv(&results))?;
        say!(log, "wrote {}", e.out.display());
    }
    Ok(())
}
