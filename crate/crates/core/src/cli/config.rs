//! Experiment configuration: flat `key = value` text.
//!
//! Allowed keys are listed in [`KEYS`]; profile entries use the `K.CLASS =
//! S,H` form of the profile file. Lists are comma separated. Keys are applied
//! on top of the preset chosen by `experiment`, and command-line flags are
//! applied on top of the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::chansim::{default_grid, DATA_CHECK_EVERY};
use crate::codeparams::{
    parse_profile_key, pbpr_params, ImportanceClass, PrecodeProfile, ProfileSet,
};
use crate::matrixgen::SolverRegistry;

/// Keys accepted besides `K.CLASS` profile entries.
pub const KEYS: [&str; 13] = [
    "experiment",
    "k",
    "erasure_grid",
    "trials",
    "overhead",
    "seed",
    "out",
    "profiles",
    "solver",
    "symbol_size",
    "timing_runs",
    "record_timing",
    "data_check_every",
];

pub const DEFAULT_TRIALS: u64 = 100_000;
/// Trial count of the `--full` flag.
pub const FULL_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TIMING_RUNS: usize = 5000;
/// One byte per symbol, so a block of K symbols is K bytes.
pub const DEFAULT_SYMBOL_SIZE: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Which experiment a configuration runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Failure rates per erasure probability: 1 (K=55), 2 (K=101), 3 (K=213)
    /// with no overhead, 4 (K=101) with one overhead symbol.
    Failure(u8),
    /// 5: encode and decode timing for K = 55, 101, 213.
    Timing,
    /// Failure rates for user-chosen K and overhead.
    Custom,
}

impl Experiment {
    pub fn is_timing(self) -> bool {
        self == Experiment::Timing
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Experiment::Failure(n) => write!(f, "{n}"),
            Experiment::Timing => f.write_str("5"),
            Experiment::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "1" => Ok(Experiment::Failure(1)),
            "2" => Ok(Experiment::Failure(2)),
            "3" => Ok(Experiment::Failure(3)),
            "4" => Ok(Experiment::Failure(4)),
            "5" => Ok(Experiment::Timing),
            "custom" => Ok(Experiment::Custom),
            other => err(format!("experiment must be 1-5 or custom, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub k: Vec<u32>,
    pub profiles: ProfileSet,
    pub erasure_grid: Vec<f64>,
    pub trials: u64,
    pub overhead: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub solver: String,
    pub symbol_size: usize,
    pub timing_runs: usize,
    pub record_timing: bool,
    pub data_check_every: u64,
}

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn preset(experiment: Experiment) -> Self {
        let (k, overhead) = match experiment {
            Experiment::Failure(1) => (vec![55], 0),
            Experiment::Failure(3) => (vec![213], 0),
            Experiment::Failure(4) => (vec![101], 1),
            Experiment::Failure(_) => (vec![101], 0),
            Experiment::Timing => (vec![55, 101, 213], 0),
            Experiment::Custom => (Vec::new(), 0),
        };
        let out = match experiment {
            Experiment::Custom => "experiment_custom.csv".to_string(),
            e => format!("experiment{e}.csv"),
        };
        ExperimentConfig {
            experiment,
            k,
            profiles: ProfileSet::shipped(),
            erasure_grid: default_grid(),
            trials: DEFAULT_TRIALS,
            overhead,
            seed: DEFAULT_SEED,
            out: PathBuf::from(out),
            // timing measures the dense baseline solver
            solver: if experiment.is_timing() {
                "gaussian"
            } else {
                "inactivation"
            }
            .to_string(),
            symbol_size: DEFAULT_SYMBOL_SIZE,
            timing_runs: DEFAULT_TIMING_RUNS,
            record_timing: false,
            data_check_every: DATA_CHECK_EVERY,
        }
    }

    /// Parses configuration text. `base_dir` resolves a relative `profiles`
    /// path.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_entries(parse_entries(text)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .or_else(|e| err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds a configuration from raw entries, e.g. a parsed file with
    /// command-line overrides merged in.
    pub fn from_entries(entries: Entries, base_dir: &Path) -> Result<Self, ConfigError> {
        let experiment = match entries.get("experiment") {
            Some(v) => v.parse()?,
            None => Experiment::Custom,
        };
        let mut c = Self::preset(experiment);
        match entries.get("profiles").map(String::as_str) {
            None => {}
            // an empty value starts from no profiles at all
            Some("") => c.profiles = ProfileSet::new(),
            Some(path) => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .or_else(|e| err(format!("cannot read profiles {}: {e}", path.display())))?;
                c.profiles = ProfileSet::parse(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            }
        }
        for (key, value) in &entries.values {
            match key.as_str() {
                "experiment" | "profiles" => {}
                "k" => c.k = parse_list(key, value)?,
                "erasure_grid" => c.erasure_grid = parse_list(key, value)?,
                "trials" => c.trials = parse_value(key, value)?,
                "overhead" => c.overhead = parse_value(key, value)?,
                "seed" => c.seed = parse_value(key, value)?,
                "out" => c.out = PathBuf::from(value),
                "solver" => c.solver = value.clone(),
                "symbol_size" => c.symbol_size = parse_value(key, value)?,
                "timing_runs" => c.timing_runs = parse_value(key, value)?,
                "record_timing" => c.record_timing = parse_value(key, value)?,
                "data_check_every" => c.data_check_every = parse_value(key, value)?,
                _ => {
                    let (k, class) = parse_profile_key(key).map_err(ConfigError)?;
                    let (s, h) = value
                        .split_once(',')
                        .ok_or_else(|| ConfigError(format!("{key}: expected S,H")))?;
                    c.profiles.insert(
                        k,
                        PrecodeProfile {
                            class,
                            s: parse_value(key, s)?,
                            h: parse_value(key, h)?,
                        },
                    );
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k.is_empty() {
            return err("k: no block size given");
        }
        for &k in &self.k {
            for class in ImportanceClass::ALL {
                let Some(profile) = self.profiles.get(k, class) else {
                    let shipped = ProfileSet::shipped()
                        .block_sizes()
                        .iter()
                        .map(u32::to_string)
                        .collect::<Vec<_>>()
                        .join(", ");
                    return err(format!(
                        "no {class} precode profile for K = {k}; shipped profile set covers K = {shipped}"
                    ));
                };
                pbpr_params(k, profile).map_err(|e| ConfigError(e.to_string()))?;
            }
        }
        if self.erasure_grid.is_empty() {
            return err("erasure_grid: empty");
        }
        if let Some(p) = self.erasure_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return err(format!("erasure_grid: {p} is outside [0, 1]"));
        }
        if self.trials == 0 {
            return err("trials must be at least 1");
        }
        if self.symbol_size == 0 {
            return err("symbol_size must be at least 1");
        }
        if self.timing_runs < 100 {
            return err("timing_runs must be at least 100");
        }
        if self.data_check_every == 0 {
            return err("data_check_every must be at least 1");
        }
        SolverRegistry::with_builtins()
            .get(&self.solver)
            .map_err(|e| ConfigError(format!("solver: {e}")))?;
        if self.out.as_os_str().is_empty() {
            return err("out: empty path");
        }
        Ok(())
    }

    /// Text that parses back to an equal configuration. Profiles are written
    /// inline, so the result does not depend on any profile file.
    pub fn to_text(&self) -> String {
        let list = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("experiment", self.experiment.to_string());
        line("k", list(self.k.iter().map(u32::to_string).collect()));
        line(
            "erasure_grid",
            list(self.erasure_grid.iter().map(f64::to_string).collect()),
        );
        line("trials", self.trials.to_string());
        line("overhead", self.overhead.to_string());
        line("seed", self.seed.to_string());
        line("out", self.out.display().to_string());
        line("solver", self.solver.clone());
        line("symbol_size", self.symbol_size.to_string());
        line("timing_runs", self.timing_runs.to_string());
        line("record_timing", self.record_timing.to_string());
        line("data_check_every", self.data_check_every.to_string());
        // replace the shipped set rather than add to it
        line("profiles", String::new());
        for (k, p) in self.profiles.iter() {
            line(&format!("{k}.{}", p.class), format!("{},{}", p.s, p.h));
        }
        s
    }
}

/// Raw `key = value` pairs; a later value for a key replaces an earlier one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Entries {
    values: BTreeMap<String, String>,
}

impl Entries {
    pub fn get(&self, key: &str) -> Option<&String> {
        self.values.get(key)
    }

    /// Sets `key`, checking it against the allowlist.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = key.trim();
        if !KEYS.contains(&key) && parse_profile_key(key).is_err() {
            return err(format!(
                "unknown key {key:?}; allowed: {} and K.CLASS profile entries",
                KEYS.join(", ")
            ));
        }
        let key = match parse_profile_key(key) {
            Ok((k, class)) => format!("{k}.{class}"),
            Err(_) => key.to_string(),
        };
        self.values.insert(key, value.into().trim().to_string());
        Ok(())
    }
}

pub fn parse_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut entries = Entries::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value", idx + 1));
        };
        entries
            .set(key, value)
            .map_err(|e| ConfigError(format!("line {}: {e}", idx + 1)))?;
    }
    Ok(entries)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn presets() {
        let c = parse("experiment = 2\ntrials = 100000\nseed = 42").unwrap();
        assert_eq!(c.k, vec![101]);
        assert_eq!(c.overhead, 0);
        assert_eq!(c.erasure_grid.len(), 9);
        assert_eq!(parse("experiment = 4").unwrap().overhead, 1);
        let t = parse("experiment = 5").unwrap();
        assert!(t.experiment.is_timing());
        assert_eq!(t.k, vec![55, 101, 213]);
        assert_eq!(t.solver, "gaussian");
    }

    #[test]
    fn keys_override_presets() {
        let c =
            parse("experiment=1\nk=101,213\noverhead=2\nerasure_grid=0.25, 0.5\n101.MIB = 25,12")
                .unwrap();
        assert_eq!(c.k, vec![101, 213]);
        assert_eq!(c.overhead, 2);
        assert_eq!(c.erasure_grid, vec![0.25, 0.5]);
        assert_eq!(c.profiles.get(101, ImportanceClass::Mib).unwrap().s, 25);
    }

    #[test]
    fn unknown_k_names_the_shipped_set() {
        let e = parse("experiment=custom\nk=56").unwrap_err();
        assert!(e.0.contains("K = 56"), "{e}");
        assert!(
            e.0.contains("shipped profile set covers K = 55, 101, 213"),
            "{e}"
        );
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "colour = blue",
            "experiment = 6",
            "trials = many",
            "trials = 0",
            "erasure_grid = 0.5, 1.5",
            "experiment = 2\nsolver = magic",
            "experiment = 2\ntiming_runs = 5",
            "no equals sign",
            "experiment = 2\n101.MIB = 12",
            "experiment = 2\n101.XIB = 1,2",
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = parse("experiment=3\ntrials=7\nseed=9\nerasure_grid=0.1,0.30000000000000004,1\nout=a b.csv\n213.MIB=29,14\nrecord_timing=true").unwrap();
        let again = parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse("# header\n\nexperiment = 2 # K=101\n").unwrap();
        assert_eq!(c.k, vec![101]);
    }
}
