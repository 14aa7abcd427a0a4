//! Stage drivers behind the `iopc` binary. Every stage writes its artifacts
//! to the output directory and reports an exit code.

mod report;

pub use report::{Report, StageSummary, TransitionRecord, VerdictRecord};

use iopc_core::codegen::{
    build_contract_model, conformance_analysis, emit_solidity, parse_requests, ContractModel, TwinSimulator,
};
use iopc_core::csp::{print_csp, CspSpec};
use iopc_core::model::{parse_bnf_text, parse_bpmn_xml, CollaborationModel};
use iopc_core::relations::{dump_relations, extract_relations, reduce, RelationSet};
use iopc_core::verify::{check_soundness, write_trace, Bounds, Status, Verdict, DEFAULT_MAX_STATES};
use iopc_core::{translate_with, TranslateOptions};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    VerificationFailure = 1,
    InputError = 2,
    BoundExceeded = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    /// Chosen from the file extension: `.bpmn` and `.xml` are XML.
    #[default]
    Auto,
    Xml,
    Bnf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub bounds: Bounds,
    pub out: PathBuf,
    pub report: ReportFormat,
    pub two_call: bool,
    pub channel_capacity: Option<usize>,
    pub unsafe_skip_verify: bool,
    /// Base name of the artifacts; derived from the input path when absent.
    pub name: Option<String>,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            format: InputFormat::Auto,
            bounds: Bounds { max_states: DEFAULT_MAX_STATES, max_queue_depth: None },
            out: PathBuf::from("out"),
            report: ReportFormat::Text,
            two_call: false,
            channel_capacity: None,
            unsafe_skip_verify: false,
            name: None,
        }
    }

    /// `--name`, else the input file stem, else (for `model.*`) the
    /// enclosing directory name.
    pub fn base_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let stem = self.input.file_stem().and_then(|s| s.to_str()).unwrap_or("collaboration");
        if stem == "model" {
            if let Some(dir) = self.input.parent().and_then(Path::file_name).and_then(|s| s.to_str()) {
                return dir.to_string();
            }
        }
        stem.to_string()
    }

    /// Contract identifier: the base name in upper camel case.
    pub fn contract_name(&self) -> String {
        let mut out = String::new();
        for part in self.base_name().split(|c: char| !c.is_ascii_alphanumeric()).filter(|p| !p.is_empty()) {
            let mut chars = part.chars();
            if let Some(first) = chars.next() {
                out.push(first.to_ascii_uppercase());
                out.extend(chars);
            }
        }
        if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
            out.insert_str(0, "Collaboration");
        }
        out
    }

    fn artifact(&self, extension: &str) -> PathBuf {
        self.out.join(format!("{}.{extension}", self.base_name()))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("translation failed: {0}")]
    Translate(String),
    #[error("relation extraction failed: {0}")]
    Relations(String),
    #[error("contract construction failed: {0}")]
    Codegen(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        Exit::InputError
    }
}

/// Result of one stage: exit status, written files and the report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    pub artifacts: Vec<PathBuf>,
    pub report: Report,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.report.to_text(),
            ReportFormat::Json => self.report.to_json(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_path_buf(), message: e.to_string() })
}

fn write(path: &Path, text: &str, artifacts: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let failed = |e: std::io::Error| CliError::Write { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(failed)?;
    }
    fs::write(path, text).map_err(failed)?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

pub fn load_model(config: &PipelineConfig) -> Result<CollaborationModel, CliError> {
    let text = read(&config.input)?;
    let xml = match config.format {
        InputFormat::Xml => true,
        InputFormat::Bnf => false,
        InputFormat::Auto => matches!(
            config.input.extension().and_then(|e| e.to_str()),
            Some("bpmn" | "xml")
        ),
    };
    let parsed = if xml {
        parse_bpmn_xml(&text).map_err(|e| e.to_string())
    } else {
        parse_bnf_text(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| CliError::Parse { path: config.input.clone(), message })
}

fn translate(config: &PipelineConfig, artifacts: &mut Vec<PathBuf>) -> Result<CspSpec, CliError> {
    let model = load_model(config)?;
    let spec = translate_with(&model, TranslateOptions { channel_capacity: config.channel_capacity })
        .map_err(|e| CliError::Translate(e.to_string()))?;
    write(&config.artifact("csp"), &print_csp(&spec), artifacts)?;
    Ok(spec)
}

fn verdict_exit(verdicts: &[Verdict]) -> Exit {
    if verdicts.iter().any(|v| v.status == Status::Inconclusive) {
        Exit::BoundExceeded
    } else if verdicts.iter().any(|v| v.status == Status::Fail) {
        Exit::VerificationFailure
    } else {
        Exit::Success
    }
}

/// Checks soundness and writes the verdict report plus, on failure, the
/// first counterexample as `<name>.trace`.
fn verify(
    config: &PipelineConfig,
    spec: &CspSpec,
    artifacts: &mut Vec<PathBuf>,
    report: &mut Report,
) -> Result<Exit, CliError> {
    let verdicts = check_soundness(spec, config.bounds);
    report.verdicts.extend(verdicts.iter().map(VerdictRecord::from));
    let exit = verdict_exit(&verdicts);
    if let Some(failed) = verdicts.iter().find(|v| v.status == Status::Fail && !v.counterexample.is_empty()) {
        write(&config.artifact("trace"), &write_trace(&failed.counterexample), artifacts)?;
    }
    report.stage(
        "verify",
        exit,
        match exit {
            Exit::Success => "model is sound".to_string(),
            Exit::BoundExceeded => format!("inconclusive: state bound of {} reached", config.bounds.max_states),
            _ => "model is not sound".to_string(),
        },
    );
    let (extension, text) = match config.report {
        ReportFormat::Text => ("verdicts", report.to_text()),
        ReportFormat::Json => ("verdicts.json", report.to_json()),
    };
    write(&config.artifact(extension), &text, artifacts)?;
    Ok(exit)
}

fn contract(
    config: &PipelineConfig,
    spec: &CspSpec,
    artifacts: &mut Vec<PathBuf>,
) -> Result<(RelationSet, ContractModel), CliError> {
    let relations = extract_relations(spec);
    let reduced = reduce(&relations).map_err(|e| CliError::Relations(e.to_string()))?;
    write(&config.artifact("relations"), &dump_relations(&reduced), artifacts)?;
    let model = build_contract_model(&reduced, spec, &config.contract_name())
        .map_err(|e| CliError::Codegen(e.to_string()))?
        .with_two_call(config.two_call);
    let sol = config.out.join(format!("{}.sol", config.contract_name()));
    write(&sol, &emit_solidity(&model), artifacts)?;
    Ok((relations, model))
}

fn outcome(exit: Exit, artifacts: Vec<PathBuf>, report: Report, warnings: Vec<String>) -> Outcome {
    Outcome { exit, artifacts, report, warnings }
}

fn new_report(config: &PipelineConfig) -> Report {
    Report::new(&config.input.display().to_string(), &config.base_name())
}

/// Translates the model to CSP# and writes `<name>.csp`.
pub fn cmd_translate(config: &PipelineConfig) -> Result<Outcome, CliError> {
    let mut artifacts = Vec::new();
    let mut report = new_report(config);
    let spec = translate(config, &mut artifacts)?;
    report.stage(
        "translate",
        Exit::Success,
        format!("{} participants, {} channels", spec.system.len(), spec.channels.len()),
    );
    Ok(outcome(Exit::Success, artifacts, report, Vec::new()))
}

/// Translates and checks soundness. Exit 0 iff every property passes.
pub fn cmd_verify(config: &PipelineConfig) -> Result<Outcome, CliError> {
    let mut artifacts = Vec::new();
    let mut report = new_report(config);
    let spec = translate(config, &mut artifacts)?;
    let exit = verify(config, &spec, &mut artifacts, &mut report)?;
    Ok(outcome(exit, artifacts, report, Vec::new()))
}

/// Writes `<Contract>.sol` and `<name>.relations`, but only for sound
/// models unless verification is explicitly skipped.
pub fn cmd_emit(config: &PipelineConfig) -> Result<Outcome, CliError> {
    let mut artifacts = Vec::new();
    let mut report = new_report(config);
    let mut warnings = Vec::new();
    let spec = translate(config, &mut artifacts)?;
    if config.unsafe_skip_verify {
        warnings.push("verification skipped (--unsafe-skip-verify): the contract may encode an unsound model".into());
    } else {
        let exit = verify(config, &spec, &mut artifacts, &mut report)?;
        if exit != Exit::Success {
            report.stage("emit", exit, "refusing to generate a contract for a model that did not pass verification");
            return Ok(outcome(exit, artifacts, report, warnings));
        }
    }
    let (_, model) = contract(config, &spec, &mut artifacts)?;
    report.stage(
        "emit",
        Exit::Success,
        format!("{}.sol with {} functions", config.contract_name(), model.atomics.len()),
    );
    Ok(outcome(Exit::Success, artifacts, report, warnings))
}

/// Replays a request script against the twin simulator and writes the
/// transaction log as `<name>.log`.
pub fn cmd_simulate(config: &PipelineConfig, trace: &Path) -> Result<Outcome, CliError> {
    let mut artifacts = Vec::new();
    let mut report = new_report(config);
    let spec = translate(config, &mut artifacts)?;
    let (_, model) = contract(config, &spec, &mut artifacts)?;
    let requests = parse_requests(&read(trace)?);
    let mut sim = TwinSimulator::init(model.clone());
    let mut first_rejection = None;
    for (i, request) in requests.iter().enumerate() {
        let result = sim.request(request).map_err(|e| CliError::Parse {
            path: trace.to_path_buf(),
            message: format!("request {}: {e}", i + 1),
        })?;
        if !result.accepted && first_rejection.is_none() {
            let reason = result.reason.map(|r| r.to_string()).unwrap_or_default();
            first_rejection = Some(format!("request {} (`{request}`) rejected: {reason}", i + 1));
        }
    }
    write(&config.artifact("log"), &sim.write_log(), &mut artifacts)?;
    report.simulation = Some(report::SimulationRecord::new(&sim));
    let exit = if first_rejection.is_some() { Exit::VerificationFailure } else { Exit::Success };
    let detail = match first_rejection {
        Some(message) => message,
        None if requests.is_empty() => "no requests: initial state only".into(),
        None => format!("{} requests accepted, final: {}", requests.len(), sim.is_final()),
    };
    report.stage("simulate", exit, detail);
    Ok(outcome(exit, artifacts, report, Vec::new()))
}

/// translate, verify, relations, emit and conformance in order, stopping at
/// the first failing stage.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<Outcome, CliError> {
    let mut artifacts = Vec::new();
    let mut report = new_report(config);
    let spec = translate(config, &mut artifacts)?;
    report.stage("translate", Exit::Success, format!("{} participants", spec.system.len()));
    let exit = verify(config, &spec, &mut artifacts, &mut report)?;
    if exit != Exit::Success {
        return Ok(outcome(exit, artifacts, report, Vec::new()));
    }
    let (_, model) = contract(config, &spec, &mut artifacts)?;
    report.stage("emit", Exit::Success, format!("{} atomics", model.atomics.len()));
    let conformance = conformance_analysis(&spec, &model, config.bounds);
    let exit = verdict_exit(std::slice::from_ref(&conformance.verdict));
    report.verdicts.push(VerdictRecord::from(&conformance.verdict));
    report.stage("conformance", exit, conformance.verdict.detail.clone());
    if exit == Exit::Success {
        report.stage("pipeline", Exit::Success, "PASS");
    }
    let text = match config.report {
        ReportFormat::Text => ("report.txt", report.to_text()),
        ReportFormat::Json => ("report.json", report.to_json()),
    };
    write(&config.artifact(text.0), &text.1, &mut artifacts)?;
    Ok(outcome(exit, artifacts, report, Vec::new()))
}
