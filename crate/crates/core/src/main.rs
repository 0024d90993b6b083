use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uep_raptorq::cli::config::{parse_entries, FULL_TRIALS};
use uep_raptorq::cli::selftest::selftest;
use uep_raptorq::cli::{
    run, run_rank, CliError, ConfigError, EmpiricalJob, Entries, ExperimentConfig, RankJob,
    EXIT_OK, EXIT_SELFTEST,
};
use uep_raptorq::rankanalysis::{DEFAULT_PI_EXCESS, OCTET_FIELD_ORDER};

#[derive(Parser)]
#[command(
    name = "uepq",
    version,
    about = "RaptorQ with per-class precode sizes: experiments and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a failure-rate or timing experiment and write its CSV.
    Run(RunArgs),
    /// Print the resolved configuration in config-file form.
    Config(RunArgs),
    /// Write the analytic full-rank probability table.
    Rank(RankArgs),
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1-5 or custom.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overhead: Option<u32>,
    /// Profile file with `K.CLASS = S,H` lines, replacing the shipped set.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Comma-separated block sizes.
    #[arg(long)]
    k: Option<String>,
    /// Trial count of the original experiments (10^6 per point).
    #[arg(long, conflicts_with = "trials")]
    full: bool,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long, default_value_t = 64)]
    h_max: u32,
    #[arg(long, default_value_t = OCTET_FIELD_ORDER)]
    q: u32,
    /// Probability that the LT part has full rank.
    #[arg(long, default_value_t = 1.0)]
    p_w: f64,
    /// P - H, the permanently inactive columns beyond H.
    #[arg(long, default_value_t = DEFAULT_PI_EXCESS)]
    pi_excess: u32,
    #[arg(long, default_value = "rank.csv")]
    out: PathBuf,
    /// Also sample this matrix family (random-square, identity-base, ldpc-lt).
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated H values for sampling.
    #[arg(long, default_value = "1,2,4,8")]
    hs: String,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "inactivation")]
    solver: String,
    #[arg(long, default_value = "rank_empirical.csv")]
    empirical_out: PathBuf,
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let (mut entries, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            (
                parse_entries(&text)?,
                path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            )
        }
        None => (Entries::default(), PathBuf::from(".")),
    };
    if let Some(v) = &args.experiment {
        entries.set("experiment", v.as_str())?;
    }
    if let Some(v) = args.trials {
        entries.set("trials", v.to_string())?;
    }
    if args.full {
        entries.set("trials", FULL_TRIALS.to_string())?;
    }
    if let Some(v) = args.seed {
        entries.set("seed", v.to_string())?;
    }
    if let Some(v) = args.overhead {
        entries.set("overhead", v.to_string())?;
    }
    if let Some(v) = &args.k {
        entries.set("k", v.as_str())?;
    }
    if let Some(v) = &args.out {
        entries.set("out", v.display().to_string())?;
    }
    if let Some(v) = &args.profiles {
        let abs = std::env::current_dir()
            .map(|d| d.join(v))
            .unwrap_or_else(|_| v.clone());
        entries.set("profiles", abs.display().to_string())?;
    }
    ExperimentConfig::from_entries(entries, &base)
}

fn parse_hs(text: &str) -> Result<Vec<u32>, ConfigError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| ConfigError(format!("hs: cannot parse {v:?}: {e}")))
        })
        .collect()
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run(args) => match resolve(&args)
            .map_err(CliError::from)
            .and_then(|c| run(&c, &mut stdout))
        {
            Ok(_) => ExitCode::from(EXIT_OK as u8),
            Err(e) => report(e),
        },
        Command::Config(args) => match resolve(&args) {
            Ok(c) => {
                let _ = stdout.write_all(c.to_text().as_bytes());
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => report(e.into()),
        },
        Command::Rank(args) => {
            let job = parse_hs(&args.hs).map(|hs| RankJob {
                h_max: args.h_max,
                q: args.q,
                p_w: args.p_w,
                pi_excess: args.pi_excess,
                out: args.out.clone(),
                empirical: args.family.clone().map(|family| EmpiricalJob {
                    family,
                    hs,
                    samples: args.samples,
                    seed: args.seed,
                    solver: args.solver.clone(),
                    out: args.empirical_out.clone(),
                }),
            });
            match job
                .map_err(CliError::from)
                .and_then(|j| run_rank(&j, &mut stdout))
            {
                Ok(()) => ExitCode::from(EXIT_OK as u8),
                Err(e) => report(e),
            }
        }
        Command::Selftest => {
            let r = selftest();
            let _ = writeln!(stdout, "{r}");
            if r.passed() {
                ExitCode::from(EXIT_OK as u8)
            } else {
                ExitCode::from(EXIT_SELFTEST as u8)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
