//! Command-line front end: `run`, `compare` and `sweep`.
//!
//! The seed comes from `--seed`, else `DYSKEW_SEED`, else the config file.
//! With `--out` the structured report goes to the file and an aligned table
//! to stdout; without it the structured report goes to stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ScenarioConfig};
use crate::error::{Error, Result};
use crate::report::{self, Format};
use crate::simulator::run;

pub const SEED_ENV: &str = "DYSKEW_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "dyskew",
    version,
    about = "Simulate skew-adaptive row redistribution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario.
    Run(CommonArgs),
    /// Run one scenario under several policies; the first is the baseline.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "never,late,early")]
        policies: String,
    },
    /// Compare policies across node counts.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nodes: String,
        #[arg(long, default_value = "never,late")]
        policies: String,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Overrides both DYSKEW_SEED and the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, file: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env.map(str::trim) {
        None | Some("") => Ok(file),
        Some(text) => text
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={text:?} is not an unsigned integer"))),
    }
}

fn load(args: &CommonArgs, env_seed: Option<&str>) -> Result<ScenarioConfig> {
    let mut config = load_config(&args.config)?;
    config.seed = resolve_seed(args.seed, env_seed, config.seed)?;
    Ok(config)
}

/// What a command produced: the structured text and a human table.
pub struct Output {
    pub structured: String,
    pub table: String,
}

pub fn cmd_run(args: &CommonArgs, env_seed: Option<&str>) -> Result<Output> {
    let report = run(&load(args, env_seed)?)?;
    let structured = match Format::from(args.format) {
        Format::Json => report::report_json(&report),
        Format::Csv => report::report_csv(&report),
    };
    Ok(Output {
        structured,
        table: report::report_table(&report),
    })
}

pub fn cmd_compare(args: &CommonArgs, policies: &str, env_seed: Option<&str>) -> Result<Output> {
    let config = load(args, env_seed)?;
    let cmp = report::compare(&config, &report::parse_policy_list(policies)?)?;
    Ok(comparison_output(&cmp, args.format))
}

pub fn cmd_sweep(
    args: &CommonArgs,
    nodes: &str,
    policies: &str,
    env_seed: Option<&str>,
) -> Result<Output> {
    let config = load(args, env_seed)?;
    let nodes = report::parse_node_list(nodes)?;
    let cmp = report::sweep(&config, &nodes, &report::parse_policy_list(policies)?)?;
    Ok(comparison_output(&cmp, args.format))
}

fn comparison_output(cmp: &report::Comparison, format: FormatArg) -> Output {
    let structured = match Format::from(format) {
        Format::Json => report::comparison_json(cmp),
        Format::Csv => report::comparison_csv(cmp),
    };
    Output {
        structured,
        table: report::comparison_table(cmp),
    }
}

fn execute(cli: &Cli, env_seed: Option<&str>, stdout: &mut dyn Write) -> Result<()> {
    let (common, output) = match &cli.command {
        Command::Run(common) => (common, cmd_run(common, env_seed)?),
        Command::Compare { common, policies } => (common, cmd_compare(common, policies, env_seed)?),
        Command::Sweep {
            common,
            nodes,
            policies,
        } => (common, cmd_sweep(common, nodes, policies, env_seed)?),
    };
    let stdout_err = |e| Error::io(Path::new("<stdout>"), e);
    match &common.out {
        Some(path) => {
            report::write_atomic(path, &output.structured)?;
            stdout
                .write_all(output.table.as_bytes())
                .map_err(stdout_err)?;
        }
        None => stdout
            .write_all(output.structured.as_bytes())
            .map_err(stdout_err)?,
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(
    args: I,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli, env_seed, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "dyskew: {e}");
            if let Error::Validation(items) = &e {
                for item in items {
                    let _ = writeln!(stderr, "  - {item}");
                }
            }
            e.exit_code()
        }
    }
}
