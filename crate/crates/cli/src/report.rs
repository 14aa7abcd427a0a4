use crate::Exit;
use iopc_core::codegen::{LogEntry, TwinSimulator};
use iopc_core::verify::{Transition, Verdict};
use serde::Serialize;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionRecord {
    pub participant: String,
    pub label: String,
}

impl From<&Transition> for TransitionRecord {
    fn from(t: &Transition) -> Self {
        Self { participant: t.participant.clone(), label: t.label.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictRecord {
    pub property: String,
    pub status: String,
    pub detail: String,
    pub states: usize,
    pub edges: usize,
    pub depth: usize,
    pub truncated: bool,
    pub counterexample: Vec<TransitionRecord>,
}

impl From<&Verdict> for VerdictRecord {
    fn from(v: &Verdict) -> Self {
        Self {
            property: v.property.to_string(),
            status: v.status.to_string(),
            detail: v.detail.clone(),
            states: v.stats.states,
            edges: v.stats.edges,
            depth: v.stats.depth,
            truncated: v.stats.truncated,
            counterexample: v.counterexample.iter().map(TransitionRecord::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub exit: i32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomicRecord {
    pub atomic: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationRecord {
    pub is_final: bool,
    pub log: Vec<LogEntry>,
    pub states: Vec<AtomicRecord>,
}

impl SimulationRecord {
    pub fn new(sim: &TwinSimulator) -> Self {
        let model = sim.model();
        Self {
            is_final: sim.is_final(),
            log: sim.log().to_vec(),
            states: model
                .atomics
                .iter()
                .zip(&sim.contract_state().states)
                .map(|(a, s)| AtomicRecord { atomic: a.id.clone(), state: s.to_string() })
                .collect(),
        }
    }
}

/// Everything a command found, in the order it found it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub input: String,
    pub name: String,
    pub stages: Vec<StageSummary>,
    pub verdicts: Vec<VerdictRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationRecord>,
}

impl Report {
    pub fn new(input: &str, name: &str) -> Self {
        Self { input: input.into(), name: name.into(), stages: Vec::new(), verdicts: Vec::new(), simulation: None }
    }

    pub fn stage(&mut self, stage: &str, exit: Exit, detail: impl Into<String>) {
        self.stages.push(StageSummary { stage: stage.into(), exit: exit.code(), detail: detail.into() });
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "input: {}", self.input);
        for v in &self.verdicts {
            let _ = write!(out, "{}\t{}\tstates={} edges={} depth={}", v.property, v.status, v.states, v.edges, v.depth);
            if v.truncated {
                out.push_str(" truncated");
            }
            out.push('\n');
            if !v.detail.is_empty() {
                let _ = writeln!(out, "  {}", v.detail);
            }
            for t in &v.counterexample {
                let _ = writeln!(out, "    {}\t{}", t.participant, t.label);
            }
        }
        if let Some(sim) = &self.simulation {
            for entry in &sim.log {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", entry.seq, entry.atomic, entry.accepted, entry.reason);
            }
            for a in &sim.states {
                let _ = writeln!(out, "  {} = {}", a.atomic, a.state);
            }
            let _ = writeln!(out, "final: {}", sim.is_final);
        }
        for s in &self.stages {
            let _ = writeln!(out, "[{}] exit {}: {}", s.stage, s.exit, s.detail);
        }
        out
    }
}
