use clap::{Args, Parser, Subcommand, ValueEnum};
use iopc_cli::{
    cmd_emit, cmd_pipeline, cmd_simulate, cmd_translate, cmd_verify, Exit, InputFormat, PipelineConfig, ReportFormat,
};
use iopc_core::verify::{Bounds, DEFAULT_MAX_STATES};
use std::path::PathBuf;
use std::process::ExitCode;

/// Compile BPMN collaborations to CSP#, verify them and generate Solidity.
#[derive(Parser)]
#[command(name = "iopc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the CSP# translation.
    Translate(Common),
    /// Check deadlock freedom, terminability, task reachability and drainage.
    Verify(Common),
    /// Generate the contract and relation listing for a sound model.
    Emit(Common),
    /// Replay a request script against the contract simulator.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// One request per line: atomic id, function name or label.
        trace: PathBuf,
    },
    /// Run every stage and check contract conformance.
    Pipeline(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Xml,
    Bnf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Model file (`.bpmn`/`.xml` or BNF text).
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Maximum number of explored states.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    bounds_states: usize,
    /// Maximum queue length per channel; defaults to each channel's capacity.
    #[arg(long)]
    bounds_depth: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report format.
    #[arg(long, value_enum, default_value = "text")]
    report: ReportArg,
    /// Separate start and complete calls per task.
    #[arg(long)]
    two_call: bool,
    /// Capacity declared for every channel.
    #[arg(long)]
    channel_capacity: Option<usize>,
    /// Emit contracts without verifying the model first.
    #[arg(long)]
    unsafe_skip_verify: bool,
    /// Base name for the written artifacts.
    #[arg(long)]
    name: Option<String>,
}

impl Common {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            input: self.input.clone(),
            format: match self.format {
                None => InputFormat::Auto,
                Some(FormatArg::Xml) => InputFormat::Xml,
                Some(FormatArg::Bnf) => InputFormat::Bnf,
            },
            bounds: Bounds { max_states: self.bounds_states, max_queue_depth: self.bounds_depth },
            out: self.out.clone(),
            report: match self.report {
                ReportArg::Text => ReportFormat::Text,
                ReportArg::Json => ReportFormat::Json,
            },
            two_call: self.two_call,
            channel_capacity: self.channel_capacity,
            unsafe_skip_verify: self.unsafe_skip_verify,
            name: self.name.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, result) = match &cli.command {
        Command::Translate(c) => (c.config(), cmd_translate(&c.config())),
        Command::Verify(c) => (c.config(), cmd_verify(&c.config())),
        Command::Emit(c) => (c.config(), cmd_emit(&c.config())),
        Command::Simulate { common, trace } => (common.config(), cmd_simulate(&common.config(), trace)),
        Command::Pipeline(c) => (c.config(), cmd_pipeline(&c.config())),
    };
    let exit = match result {
        Ok(outcome) => {
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            print!("{}", outcome.render(config.report));
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            outcome.exit
        }
        Err(error) => {
            eprintln!("error: {error}");
            error.exit()
        }
    };
    if exit != Exit::Success {
        eprintln!("exit {}", exit.code());
    }
    ExitCode::from(exit.code() as u8)
}
