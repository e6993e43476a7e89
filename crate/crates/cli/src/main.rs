use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prudent_cli::{cmd_audit, cmd_check, cmd_compile, cmd_simulate, AuditArgs, Format, PipelineArgs, Report};
use prudent_core::compiler::EmitMode;
use prudent_core::runtime::Mutation;

/// Compile Alice&Bob narrations into prudent role implementations.
#[derive(Parser)]
#[command(name = "prudent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Pipeline {
    /// Extra theory file (.thy); may be repeated.
    #[arg(long = "theory", value_name = "FILE")]
    theories: Vec<PathBuf>,
    /// Context size bound for saturation and the equality basis.
    #[arg(long, value_name = "N")]
    bound: Option<usize>,
    /// Which reception checks to emit: delta, full, or none (debugging only).
    #[arg(long, default_value = "delta", value_parser = parse_emit)]
    emit: EmitMode,
    #[arg(long, value_enum, default_value_t = Format::Doc)]
    format: Format,
}

impl Pipeline {
    fn args(&self) -> PipelineArgs {
        PipelineArgs { theories: self.theories.clone(), bound: self.bound, emit: self.emit }
    }
}

fn parse_emit(s: &str) -> Result<EmitMode, String> {
    s.parse()
}

fn parse_mutation(s: &str) -> Result<Mutation, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Check that a theory file is subterm convergent.
    Check { theory: PathBuf },
    /// Compile every role of a narration into an active frame.
    Compile {
        narration: PathBuf,
        #[command(flatten)]
        pipeline: Pipeline,
    },
    /// Run one honest session of a narration (or of a compile document).
    Simulate {
        input: PathBuf,
        #[command(flatten)]
        pipeline: Pipeline,
        /// Tamper with a message: "step=<i> replace=<const>" replaces the first
        /// nonce in the payload sent at frame step i.
        #[arg(long, value_parser = parse_mutation)]
        mutate: Option<Mutation>,
    },
    /// Compare compiled checks with brute-force equalities of each role input.
    Audit {
        narration: PathBuf,
        #[command(flatten)]
        pipeline: Pipeline,
        /// DAG size of the enumerated contexts.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Mutated inputs sampled per role.
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report: Report = match &cli.command {
        Command::Check { theory } => cmd_check(theory),
        Command::Compile { narration, pipeline } => cmd_compile(narration, &pipeline.args(), pipeline.format),
        Command::Simulate { input, pipeline, mutate } => {
            cmd_simulate(input, &pipeline.args(), mutate.as_ref(), pipeline.format)
        }
        Command::Audit { narration, pipeline, depth, samples, seed } => cmd_audit(
            narration,
            &pipeline.args(),
            &AuditArgs { depth: *depth, samples: *samples, seed: *seed },
            pipeline.format,
        ),
    };
    let _ = std::io::stdout().write_all(report.stdout.as_bytes());
    let _ = std::io::stderr().write_all(report.stderr.as_bytes());
    ExitCode::from(report.code as u8)
}
