use iopc_cli::{cmd_emit, cmd_pipeline, cmd_simulate, cmd_translate, cmd_verify, Exit, PipelineConfig, ReportFormat};
use iopc_core::csp::parse_csp;
use iopc_core::verify::{parse_trace, replay, Bounds};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;
use tempfile::TempDir;

fn corpus(case: &str, file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(case).join(file)
}

fn config(case: &str, out: &TempDir) -> PipelineConfig {
    PipelineConfig { out: out.path().to_path_buf(), ..PipelineConfig::new(corpus(case, "model.bnf")) }
}

fn iopc(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_iopc")).args(args).output().unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8(output.stdout).unwrap(),
        String::from_utf8(output.stderr).unwrap(),
    )
}

#[test]
fn translate_writes_parseable_csp() {
    let out = TempDir::new().unwrap();
    let outcome = cmd_translate(&config("sc-round2", &out)).unwrap();
    assert_eq!(outcome.exit, Exit::Success);
    let text = std::fs::read_to_string(out.path().join("sc-round2.csp")).unwrap();
    assert_eq!(parse_csp(&text).unwrap().system.len(), 5);
    let again = TempDir::new().unwrap();
    cmd_translate(&config("sc-round2", &again)).unwrap();
    assert_eq!(std::fs::read_to_string(again.path().join("sc-round2.csp")).unwrap(), text);
}

#[test]
fn xml_input_translates_like_bnf() {
    let out = TempDir::new().unwrap();
    let xml = PipelineConfig {
        out: out.path().join("xml"),
        name: Some("broker".into()),
        ..PipelineConfig::new(corpus("broker", "model.bpmn"))
    };
    cmd_translate(&xml).unwrap();
    let bnf = PipelineConfig { out: out.path().join("bnf"), ..config("broker", &out) };
    cmd_translate(&bnf).unwrap();
    let read = |dir: &str| std::fs::read_to_string(out.path().join(dir).join("broker.csp")).unwrap();
    assert_eq!(read("xml"), read("bnf"));
}

#[test]
fn empty_model_is_an_input_error() {
    let out = TempDir::new().unwrap();
    let input = out.path().join("empty.bnf");
    std::fs::write(&input, "messages {}\n").unwrap();
    let (code, _, stderr) = iopc(&["translate", input.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("error"));
}

#[test]
fn missing_file_is_an_input_error() {
    let (code, _, _) = iopc(&["verify", "/nonexistent/model.bnf"]);
    assert_eq!(code, 2);
}

#[test]
fn unsound_model_fails_verification_with_trace() {
    let out = TempDir::new().unwrap();
    let cfg = config("sc-round1", &out);
    let outcome = cmd_verify(&cfg).unwrap();
    assert_eq!(outcome.exit, Exit::VerificationFailure);
    let trace = parse_trace(&std::fs::read_to_string(out.path().join("sc-round1.trace")).unwrap()).unwrap();
    assert!(!trace.is_empty());
    let spec = parse_csp(&std::fs::read_to_string(out.path().join("sc-round1.csp")).unwrap()).unwrap();
    assert!(replay(&spec, &trace).is_ok());
}

#[test]
fn sound_model_verifies() {
    let out = TempDir::new().unwrap();
    let (code, stdout, _) =
        iopc(&["verify", corpus("sc-round2", "model.bnf").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.matches("\tPASS\t").count(), 4);
}

#[test]
fn truncated_run_is_inconclusive() {
    let out = TempDir::new().unwrap();
    let (code, stdout, _) = iopc(&[
        "verify",
        corpus("broker", "model.bnf").to_str().unwrap(),
        "--bounds-states",
        "1",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    assert!(stdout.to_lowercase().contains("inconclusive"));
}

#[test]
fn emit_writes_contract_and_relations() {
    let out = TempDir::new().unwrap();
    let outcome = cmd_emit(&config("sc-round2", &out)).unwrap();
    assert_eq!(outcome.exit, Exit::Success);
    assert!(out.path().join("ScRound2.sol").exists());
    let relations = std::fs::read_to_string(out.path().join("sc-round2.relations")).unwrap();
    assert_eq!(relations, std::fs::read_to_string(corpus("sc-round2", "expected.relations")).unwrap());
}

#[test]
fn emit_refuses_unsound_models() {
    let out = TempDir::new().unwrap();
    let outcome = cmd_emit(&config("sc-round1", &out)).unwrap();
    assert_eq!(outcome.exit, Exit::VerificationFailure);
    assert!(!out.path().join("ScRound1.sol").exists());
    let (code, _, _) = iopc(&["emit", corpus("sc-round1", "model.bnf").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn unsafe_flag_emits_with_warning() {
    let out = TempDir::new().unwrap();
    let (code, _, stderr) = iopc(&[
        "emit",
        corpus("sc-round1", "model.bnf").to_str().unwrap(),
        "--unsafe-skip-verify",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stderr.contains("warning"));
    assert!(out.path().join("ScRound1.sol").exists());
}

#[test]
fn two_call_flag_changes_the_contract() {
    let out = TempDir::new().unwrap();
    let cfg = PipelineConfig { two_call: true, ..config("minimal-ping", &out) };
    cmd_emit(&cfg).unwrap();
    let sol = std::fs::read_to_string(out.path().join("MinimalPing.sol")).unwrap();
    assert!(sol.contains("_start() external") && sol.contains("_complete() external"));
}

#[test]
fn simulate_replays_the_longest_path() {
    let out = TempDir::new().unwrap();
    let outcome = cmd_simulate(&config("sc-round2", &out), &corpus("sc-round2", "replay.trace")).unwrap();
    assert_eq!(outcome.exit, Exit::Success);
    let sim = outcome.report.simulation.unwrap();
    assert!(sim.is_final);
    assert!(sim.log.iter().all(|e| e.accepted));
    let log = std::fs::read_to_string(out.path().join("sc-round2.log")).unwrap();
    assert_eq!(log.lines().count(), sim.log.len());
}

#[test]
fn simulate_locates_the_first_rejection() {
    let out = TempDir::new().unwrap();
    let mut lines: Vec<String> =
        std::fs::read_to_string(corpus("sc-round2", "replay.trace")).unwrap().lines().map(String::from).collect();
    let last = lines.len() - 1;
    lines.swap(0, last);
    let tampered = out.path().join("tampered.trace");
    std::fs::write(&tampered, lines.join("\n")).unwrap();
    let outcome = cmd_simulate(&config("sc-round2", &out), &tampered).unwrap();
    assert_eq!(outcome.exit, Exit::VerificationFailure);
    let stage = outcome.report.stages.last().unwrap();
    assert!(stage.detail.starts_with("request 1 "), "{}", stage.detail);
}

#[test]
fn simulate_with_empty_trace_reports_initial_state() {
    let out = TempDir::new().unwrap();
    let empty = out.path().join("empty.trace");
    std::fs::write(&empty, "").unwrap();
    let outcome = cmd_simulate(&config("broker", &out), &empty).unwrap();
    assert_eq!(outcome.exit, Exit::Success);
    let sim = outcome.report.simulation.unwrap();
    assert!(sim.log.is_empty());
    assert!(sim.states.iter().any(|a| a.atomic == "Broker.P1" && a.state == "Waiting"));
}

#[test]
fn pipeline_passes_sound_model() {
    let out = TempDir::new().unwrap();
    let cfg = PipelineConfig { report: ReportFormat::Json, ..config("sc-round2", &out) };
    let outcome = cmd_pipeline(&cfg).unwrap();
    assert_eq!(outcome.exit, Exit::Success);
    for file in ["sc-round2.csp", "sc-round2.verdicts.json", "sc-round2.relations", "ScRound2.sol", "sc-round2.report.json"] {
        assert!(out.path().join(file).exists(), "{file}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("sc-round2.report.json")).unwrap()).unwrap();
    assert_eq!(json["stages"].as_array().unwrap().last().unwrap()["detail"], "PASS");
    assert_eq!(json["verdicts"].as_array().unwrap().len(), 5);
}

#[test]
fn pipeline_stops_at_verification() {
    let out = TempDir::new().unwrap();
    let outcome = cmd_pipeline(&config("sc-round1", &out)).unwrap();
    assert_eq!(outcome.exit, Exit::VerificationFailure);
    assert!(out.path().join("sc-round1.trace").exists());
    assert!(!out.path().join("ScRound1.sol").exists());
}

#[test]
fn pipeline_on_minimal_ping_is_fast() {
    let out = TempDir::new().unwrap();
    let start = Instant::now();
    let (code, _, _) =
        iopc(&["pipeline", corpus("minimal-ping", "model.bnf").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn channel_capacity_and_depth_flags_apply() {
    let out = TempDir::new().unwrap();
    let cfg = PipelineConfig {
        channel_capacity: Some(2),
        bounds: Bounds { max_states: 1_000_000, max_queue_depth: Some(2) },
        ..config("minimal-ping", &out)
    };
    cmd_translate(&cfg).unwrap();
    let spec = parse_csp(&std::fs::read_to_string(out.path().join("minimal-ping.csp")).unwrap()).unwrap();
    assert!(spec.channels.iter().all(|c| c.capacity == 2));
    assert_eq!(cmd_verify(&cfg).unwrap().exit, Exit::Success);
}
