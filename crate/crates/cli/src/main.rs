//! Command-line front end. Every subcommand assembles a one-command
//! pipeline document (merging the configuration file when given), runs it,
//! and prints the report; `run` executes the document's own command list.
//! Reports carry no wall-clock data, so identical invocations on identical
//! files print identical bytes.

mod vocab;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rbmeasure::harness::SuiteConfig;
use rbmeasure::pipeline::{run_doc, Command as DocCommand, CommandOutput, PipelineDoc, RunReport};
use rbmeasure::{Error, Result};
use vocab::{parse_bits, Vocab};

#[derive(Parser)]
#[command(
    name = "rbmeasure",
    version,
    about = "Exact martingale calculus on Cantor space: evaluate capital \
             processes, estimate measures through splitting operators, and \
             run the verification suite"
)]
struct Cli {
    /// Pipeline document (JSON) providing named measures, martingales, and
    /// operators; for `verify`, a suite configuration instead
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Scan depth for identity and regularity checks
    /// (regularize defaults to 8, zero-one to 6)
    #[arg(long, global = true, value_name = "N")]
    depth: Option<usize>,

    /// Dyadic precision: estimates land within 2^-R of the target
    /// (measure and split default to 10; eval stays exact without it)
    #[arg(long, global = true, value_name = "R")]
    precision: Option<u32>,

    /// Seed for the verification suite's random pools
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    /// Write the report here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a martingale at a string (default: the empty string)
    Eval {
        /// Document name or inline expression, e.g. unit, z3_ladder(1),
        /// from_prefix_set({0, 11})
        martingale: String,
        /// Bit string, quoted or bare; lambda or "" for the empty string
        at: Option<String>,
    },
    /// Estimate the measure behind an operator, two-sided
    Measure {
        /// Document name or inline expression, e.g. C_01, cylinder(01),
        /// complement(C_0), union(C_00, C_01), full
        operator: String,
    },
    /// Apply a splitting operator to a martingale and evaluate both halves
    Split {
        operator: String,
        martingale: String,
        at: Option<String>,
    },
    /// Smooth a martingale and check regularity to the scan depth
    Regularize { martingale: String },
    /// Drive the value-conserving diagonal constructor along a cylinder
    Diagonalize {
        martingale: String,
        /// Cylinder string the construction must stay inside
        cylinder: Option<String>,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Rewire heavy blocks through a light leaf and bound the result
    ZeroOne {
        martingale: String,
        /// Block length of the rewiring
        #[arg(long, default_value_t = 1)]
        block: usize,
    },
    /// Run the self-check suite
    Verify,
    /// Execute the command list of the configuration document
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input or configuration, 1 for anything the calculus rejects.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Config(_)
        | Error::UnknownName { .. }
        | Error::CyclicReference { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (doc, single) = assemble(&cli)?;
    let report = run_doc(&doc)?;
    let text = match cli.format {
        Format::Json => report.to_json()?,
        Format::Text => render_text(&report, single),
    };
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(report.passed())
}

/// Builds the document to run: the configuration file's sections plus one
/// synthesized command, or the file's own command list for `run`.
fn assemble(cli: &Cli) -> Result<(PipelineDoc, bool)> {
    if matches!(cli.cmd, Cmd::Verify) {
        let mut config = match &cli.config {
            Some(path) => serde_json::from_str::<SuiteConfig>(&fs::read_to_string(path)?)?,
            None => SuiteConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let mut doc = PipelineDoc::empty();
        doc.commands.push(DocCommand::Verify { config });
        return Ok((doc, true));
    }

    let mut doc = match &cli.config {
        Some(path) => PipelineDoc::from_json(&fs::read_to_string(path)?)?,
        None => PipelineDoc::empty(),
    };

    if matches!(cli.cmd, Cmd::Run) {
        if cli.config.is_none() {
            return Err(Error::Config(
                "run needs --config pointing at a pipeline document".to_string(),
            ));
        }
        if doc.commands.is_empty() {
            return Err(Error::Config(
                "the document has no commands to run".to_string(),
            ));
        }
        return Ok((doc, false));
    }
    doc.commands.clear();

    let mut vocab = Vocab::new(&mut doc);
    let command = match &cli.cmd {
        Cmd::Eval { martingale, at } => DocCommand::Eval {
            martingale: vocab.martingale(martingale)?,
            at: at.as_deref().map(parse_bits).transpose()?,
            precision: cli.precision,
        },
        Cmd::Measure { operator } => DocCommand::Measure {
            operator: vocab.operator(operator)?,
            precision: cli.precision.unwrap_or(10),
        },
        Cmd::Split {
            operator,
            martingale,
            at,
        } => DocCommand::Split {
            operator: vocab.operator(operator)?,
            to: vocab.martingale(martingale)?,
            precision: cli.precision.unwrap_or(10),
            at: at.as_deref().map(parse_bits).transpose()?,
        },
        Cmd::Regularize { martingale } => DocCommand::Regularize {
            martingale: vocab.martingale(martingale)?,
            depth: cli.depth.unwrap_or(8),
        },
        Cmd::Diagonalize {
            martingale,
            cylinder,
            steps,
        } => DocCommand::Diagonalize {
            martingale: vocab.martingale(martingale)?,
            cylinder: cylinder.as_deref().map(parse_bits).transpose()?,
            steps: *steps,
        },
        Cmd::ZeroOne { martingale, block } => DocCommand::ZeroOne {
            martingale: vocab.martingale(martingale)?,
            block: *block,
            depth: cli.depth.unwrap_or(6),
        },
        Cmd::Verify | Cmd::Run => unreachable!("handled above"),
    };
    doc.commands.push(command);
    Ok((doc, true))
}

/// Text rendering: a lone evaluation prints just its value, everything
/// else prints the standard report lines.
fn render_text(report: &RunReport, single: bool) -> String {
    if single {
        if let [CommandOutput::Eval { value, .. }] = report.results.as_slice() {
            return format!("{value}\n");
        }
    }
    report.text_summary()
}
