//! Test corpus: case directories under `corpus/<name>/` holding `model.bnf`,
//! an optional `model.bpmn`, `expected.verdicts`, `replay.trace` and
//! `expected.relations`.

use crate::codegen::{parse_requests, Request};
use crate::model::{parse_bnf_text, parse_bpmn_xml, BnfError, BpmnError, CollaborationModel};
use crate::verify::{Property, Status, Verdict};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Registered case names.
pub const CASES: &[&str] = &[
    "minimal-ping",
    "broker",
    "sc-round1",
    "sc-round2",
    "bt-round1",
    "bt-round2",
    "oe",
    "pr",
    "pc",
    "crossed-receive",
    "undelivered",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusCase {
    pub name: String,
    pub dir: PathBuf,
    pub bnf: String,
    pub model: CollaborationModel,
    pub bpmn: Option<String>,
    pub expected: Vec<(Property, Status)>,
    pub replay: Vec<Request>,
    pub relations: Option<String>,
}

impl CorpusCase {
    pub fn expected_sound(&self) -> bool {
        self.expected.iter().all(|(_, s)| *s == Status::Pass)
    }

    pub fn bpmn_model(&self) -> Option<Result<CollaborationModel, BpmnError>> {
        self.bpmn.as_deref().map(parse_bpmn_xml)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus case `{0}`")]
    UnknownCase(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Bnf { path: PathBuf, source: BnfError },
    #[error("{path} line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

/// `IOPC_CORPUS` when set, otherwise the `corpus/` directory of this repository.
pub fn corpus_root() -> PathBuf {
    std::env::var_os("IOPC_CORPUS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus"))
}

pub fn load_case(name: &str) -> Result<CorpusCase, CorpusError> {
    load_case_from(&corpus_root(), name)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| CorpusError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn read_optional(path: &Path) -> Result<Option<String>, CorpusError> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn load_case_from(root: &Path, name: &str) -> Result<CorpusCase, CorpusError> {
    if !CASES.contains(&name) {
        return Err(CorpusError::UnknownCase(name.to_string()));
    }
    let dir = root.join(name);
    let bnf_path = dir.join("model.bnf");
    let bnf = read(&bnf_path)?;
    let model = parse_bnf_text(&bnf).map_err(|source| CorpusError::Bnf { path: bnf_path, source })?;
    let verdicts_path = dir.join("expected.verdicts");
    let expected = parse_verdicts(&read(&verdicts_path)?).map_err(|(line, message)| CorpusError::Format {
        path: verdicts_path,
        line,
        message,
    })?;
    let replay = match read_optional(&dir.join("replay.trace"))? {
        Some(text) => parse_requests(&text),
        None => Vec::new(),
    };
    Ok(CorpusCase {
        name: name.to_string(),
        bpmn: read_optional(&dir.join("model.bpmn"))?,
        relations: read_optional(&dir.join("expected.relations"))?,
        dir,
        bnf,
        model,
        expected,
        replay,
    })
}

/// `property<TAB>PASS|FAIL` lines; `#` starts a comment.
pub fn parse_verdicts(text: &str) -> Result<Vec<(Property, Status)>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (property, status) = line.split_once('\t').ok_or((i + 1, "expected `property<TAB>status`".to_string()))?;
        let property = Property::parse(property.trim()).ok_or((i + 1, format!("unknown property `{property}`")))?;
        let status = Status::parse(status.trim()).ok_or((i + 1, format!("unknown status `{status}`")))?;
        out.push((property, status));
    }
    Ok(out)
}

pub fn write_verdicts(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(|v| format!("{}\t{}\n", v.property, v.status)).collect()
}
