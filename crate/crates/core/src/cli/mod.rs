//! Scenario-driven command line front end.
//!
//! A run reads a JSON scenario, executes one command and writes CSV/JSON
//! artifacts, SVG figures and a `report.json` with a manifest into a run
//! directory. Exit codes: 0 success, 1 other failure, 2 usage or schema
//! error, 3 solver failure, 4 estimation failure, 5 output directory locked.

mod commands;
pub mod output;
pub mod plot;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::error::{Error, ErrorCategory, Result};
pub use commands::check_sections;
use output::{RunDir, RunReport};
pub use scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;
pub const EXIT_LOCKED: i32 = 5;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SQZMEM_OUT";
const DEFAULT_ROOT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SimulateMemory,
    OptimizeWrite,
    SimulateHomodyne,
    Tomography,
    EstimateChannel,
    FullPipeline,
    SweepBandwidth,
    SweepReadPower,
    /// Redraw the figures of an existing run directory from its artifacts.
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateMemory => "simulate-memory",
            Command::OptimizeWrite => "optimize-write",
            Command::SimulateHomodyne => "simulate-homodyne",
            Command::Tomography => "tomography",
            Command::EstimateChannel => "estimate-channel",
            Command::FullPipeline => "full-pipeline",
            Command::SweepBandwidth => "sweep-bandwidth",
            Command::SweepReadPower => "sweep-read-power",
            Command::Plot => "plot",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::value_variants().iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Debug, Parser)]
#[command(name = "sqzmem", version, about = "Raman quantum memory for squeezed light: simulation and estimation")]
pub struct Cli {
    /// Scenario file (JSON). Required except for `plot`.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Run directory. Defaults to `outputs.directory`, else
    /// `$SQZMEM_OUT/<name>-<command>`, else `runs/<name>-<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces the scenario seed.
    #[arg(long)]
    pub seed_override: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

static VERBOSE: AtomicBool = AtomicBool::new(false);

fn progress(msg: &str) {
    if VERBOSE.load(Ordering::Relaxed) {
        eprintln!("sqzmem: {msg}");
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Schema => EXIT_SCHEMA,
        ErrorCategory::Solver => EXIT_SOLVER,
        ErrorCategory::Estimation => EXIT_ESTIMATION,
        ErrorCategory::Locked => EXIT_LOCKED,
        ErrorCategory::Other => EXIT_OTHER,
    }
}

/// Run directory for a scenario when `--out` is absent.
pub fn default_out(sc: &Scenario, cmd: Command, env_root: Option<&Path>) -> PathBuf {
    if let Some(d) = &sc.outputs.directory {
        return PathBuf::from(d);
    }
    let root = env_root.map_or_else(|| PathBuf::from(DEFAULT_ROOT), Path::to_path_buf);
    root.join(format!("{}-{}", sc.name, cmd.name()))
}

/// Loads the scenario, applies the seed override and checks the sections the
/// command needs. Nothing is written.
pub fn prepare(path: &Path, cmd: Command, seed_override: Option<u64>) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = seed_override {
        sc.seed = s;
    }
    check_sections(cmd, &sc)?;
    Ok(sc)
}

fn write_plots(run: &RunDir) -> Result<()> {
    let manifest = run.manifest()?;
    for (name, svg) in plot::emit_plots(run.staging(), &manifest)? {
        run.write(&name, svg.as_bytes())?;
    }
    Ok(())
}

/// Runs one scenario command into `out` and returns the committed directory.
pub fn run_scenario(sc: &Scenario, cmd: Command, out: &Path) -> Result<PathBuf> {
    if cmd == Command::Plot {
        return Err(Error::InvalidParameter("use replot for the plot command".into()));
    }
    let run = RunDir::begin(out)?;
    let mut report = RunReport::new(cmd.name(), &sc.name, sc.seed);
    run.write_json("scenario.json", sc)?;
    progress(&format!("{} into {}", cmd.name(), run.staging().display()));
    commands::execute(cmd, sc, &run, &mut report)?;
    if sc.outputs.svg() {
        write_plots(&run)?;
    }
    run.commit(report)
}

/// Regenerates the figures of a committed run from its manifest-listed
/// artifacts and refreshes the manifest.
pub fn replot(dir: &Path) -> Result<PathBuf> {
    let report = RunReport::load(dir)?;
    let run = RunDir::amend(dir)?;
    for (name, svg) in plot::emit_plots(run.staging(), &report.manifest)? {
        run.write(&name, svg.as_bytes())?;
    }
    run.commit(report)
}

fn dispatch(cli: &Cli) -> Result<PathBuf> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    if cli.command == Command::Plot {
        let dir = match (&cli.out, &cli.scenario) {
            (Some(d), _) => d.clone(),
            (None, Some(p)) => {
                let sc = Scenario::load(p)?;
                default_out(&sc, Command::Plot, std::env::var_os(OUT_ENV).as_deref().map(Path::new))
            }
            (None, None) => return Err(Error::Scenario("plot needs --out or --scenario".into())),
        };
        return replot(&dir);
    }
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Scenario(format!("command {} needs --scenario", cli.command.name())))?;
    let sc = prepare(path, cli.command, cli.seed_override)?;
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => default_out(&sc, cli.command, std::env::var_os(OUT_ENV).as_deref().map(Path::new)),
    };
    run_scenario(&sc, cli.command, &out)
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    VERBOSE.store(cli.verbose, Ordering::Relaxed);
    let start = Instant::now();
    match dispatch(&cli) {
        Ok(dir) => {
            progress(&format!("finished in {:.2} s", start.elapsed().as_secs_f64()));
            println!("{}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("sqzmem: error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests;
