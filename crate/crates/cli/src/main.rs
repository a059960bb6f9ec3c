//! Command-line front end for the actuation monitor toolkit.
//!
//! Exit codes: `0` success, `1` usage or input error, `2` a negative
//! verdict (unschedulable taskset, rule diagnostics, violated bound, or a
//! deadline miss under `--fail-on-miss`).

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actguard::dsl::{parse_rules, DslError};
use actguard::rta;
use actguard::scenario::{ScenarioError, ScenarioFile};
use actguard::sim::{self, SimError};
use actguard::Micros;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "actguard", version, about = "Actuation monitoring, schedulability analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Cmd {
    /// Response-time analysis of a scenario's taskset.
    Check {
        path: PathBuf,
        /// Print CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Simulate a scenario and write trace files.
    Run {
        path: PathBuf,
        #[arg(long, value_enum)]
        monitor: Option<Switch>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon_ms: Option<String>,
        /// Stop at the first deadline miss with exit code 2.
        #[arg(long)]
        fail_on_miss: bool,
    },
    /// Parse a rule file and check it against a scenario's names.
    LintRules {
        rules: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Compare analysis bounds with simulated response times.
    CrossValidate { path: PathBuf },
}

enum Failure {
    /// Exit 1 with a message on stderr.
    Error(String),
    /// Exit 2; details were already printed.
    Verdict,
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Error(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Check { path, csv } => check(&path, csv),
        Cmd::Run { path, monitor, out, seed, horizon_ms, fail_on_miss } => {
            run(&path, monitor, &out, seed, horizon_ms.as_deref(), fail_on_miss)
        }
        Cmd::LintRules { rules, scenario } => lint(&rules, scenario.as_deref()),
        Cmd::CrossValidate { path } => cross_validate(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(2),
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn check(path: &Path, csv: bool) -> Result<(), Failure> {
    let file = ScenarioFile::load(path)?;
    let tasks = file.taskset()?;
    let report = rta::analyze(&tasks, file.check_overhead()).map_err(|e| Failure::Error(e.to_string()))?;
    let mut out = io::stdout().lock();
    // A closed stdout is not worth a failure exit.
    let _ = if csv { report.write_csv(&mut out).map_err(io::Error::other) } else { write!(out, "{report}") };
    if report.schedulable() {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn run(
    path: &Path,
    monitor: Option<Switch>,
    out: &Path,
    seed: Option<u64>,
    horizon_ms: Option<&str>,
    fail_on_miss: bool,
) -> Result<(), Failure> {
    let mut file = ScenarioFile::load(path)?;
    if let Some(m) = monitor {
        file.sim.monitor = m == Switch::On;
    }
    if let Some(s) = seed {
        file.sim.seed = s;
    }
    if let Some(h) = horizon_ms {
        let h = Micros::parse_ms(h).map_err(|e| Failure::Error(format!("--horizon-ms: {e}")))?;
        file.sim.horizon_ms = Some(h);
    }
    file.sim.fail_on_miss |= fail_on_miss;
    let scenario = file.compile(base_dir(path))?;
    let trace = match sim::run(&scenario) {
        Ok(t) => t,
        Err(e @ SimError::DeadlineMiss { .. }) => {
            eprintln!("{e}");
            return Err(Failure::Verdict);
        }
        Err(e) => return Err(Failure::Error(e.to_string())),
    };
    trace.write_all(out)?;
    let _ = write!(io::stdout().lock(), "{}", trace.summary());
    Ok(())
}

fn print_diagnostic(path: &Path, e: &DslError) {
    match e.position() {
        Some((line, col)) => {
            let msg = e.to_string();
            let msg = msg.split_once(": ").map_or(msg.as_str(), |(_, m)| m);
            eprintln!("{}:{line}:{col}: {msg}", path.display());
        }
        None => eprintln!("{}: {e}", path.display()),
    }
}

fn lint(rules: &Path, scenario: Option<&Path>) -> Result<(), Failure> {
    let src = std::fs::read_to_string(rules).map_err(|e| Failure::Error(format!("cannot read {}: {e}", rules.display())))?;
    let rs = match parse_rules(&src) {
        Ok(rs) => rs,
        Err(e) => {
            print_diagnostic(rules, &e);
            return Err(Failure::Verdict);
        }
    };
    if let Some(s) = scenario {
        let ctx = ScenarioFile::load(s)?.rule_context();
        let errs = rs.validate(&ctx);
        if !errs.is_empty() {
            for e in &errs {
                print_diagnostic(rules, e);
            }
            return Err(Failure::Verdict);
        }
    }
    for c in rs.conflicts(100_000) {
        eprintln!(
            "{}: warning: `{}` and `{}` demand different commands for `{}`",
            rules.display(),
            c.first,
            c.second,
            c.actuator
        );
    }
    let _ = writeln!(io::stdout().lock(), "{}: {} rules ok", rules.display(), rs.rules.len());
    Ok(())
}

fn cross_validate(path: &Path) -> Result<(), Failure> {
    let scenario = actguard::scenario::load_scenario(path)?;
    let report = sim::cross_validate(&scenario).map_err(|e| Failure::Error(e.to_string()))?;
    let _ = write!(io::stdout().lock(), "{report}");
    if report.sound() {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}
