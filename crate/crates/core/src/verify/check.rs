use super::semantics::{initial_state, successors, GlobalState, Transition};
use super::{explore, explore_with, Bounds, SearchOrder, StateGraph, Stats};
use crate::csp::{syntax_tree, CspSpec, Label, NodeKind};
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub enum Property {
    DeadlockFreedom,
    Terminability,
    TaskReachability,
    MessageDrainage,
    Reaches(String),
    Conformance,
}

impl Property {
    pub const SOUNDNESS: [Property; 4] = [
        Property::DeadlockFreedom,
        Property::Terminability,
        Property::TaskReachability,
        Property::MessageDrainage,
    ];

    pub fn parse(name: &str) -> Option<Property> {
        Some(match name {
            "deadlock-free" => Property::DeadlockFreedom,
            "terminable" => Property::Terminability,
            "tasks-reachable" => Property::TaskReachability,
            "channels-drained" => Property::MessageDrainage,
            "conformance" => Property::Conformance,
            other => Property::Reaches(other.strip_prefix("reaches ")?.to_string()),
        })
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::DeadlockFreedom => f.write_str("deadlock-free"),
            Property::Terminability => f.write_str("terminable"),
            Property::TaskReachability => f.write_str("tasks-reachable"),
            Property::MessageDrainage => f.write_str("channels-drained"),
            Property::Reaches(target) => write!(f, "reaches {target}"),
            Property::Conformance => f.write_str("conformance"),
        }
    }
}

impl From<Property> for String {
    fn from(p: Property) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn parse(text: &str) -> Option<Status> {
        match text {
            "PASS" => Some(Status::Pass),
            "FAIL" => Some(Status::Fail),
            "INCONCLUSIVE" => Some(Status::Inconclusive),
            _ => None,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub property: Property,
    pub status: Status,
    /// Transitions from the initial state to a violating state; empty on pass.
    pub counterexample: Vec<Transition>,
    /// For reachability: a run reaching the target.
    pub witness: Vec<Transition>,
    pub detail: String,
    pub stats: Stats,
}

impl Verdict {
    fn new(property: Property, status: Status, stats: Stats) -> Self {
        Self { property, status, counterexample: Vec::new(), witness: Vec::new(), detail: String::new(), stats }
    }

    fn fail(property: Property, stats: Stats, counterexample: Vec<Transition>, detail: String) -> Self {
        Self { counterexample, detail, ..Self::new(property, Status::Fail, stats) }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("`{0}` is not in the alphabet of the model")]
    UnknownLabel(String),
}

/// The four soundness verdicts over an explored graph.
pub fn soundness_verdicts(graph: &StateGraph, spec: &CspSpec) -> Vec<Verdict> {
    let stats = graph.stats();
    if graph.truncated() {
        return Property::SOUNDNESS
            .into_iter()
            .map(|p| Verdict {
                detail: format!("exploration truncated after {} states", stats.states),
                ..Verdict::new(p, Status::Inconclusive, stats)
            })
            .collect();
    }
    let n = graph.state_count();
    let mut verdicts = Vec::new();

    let stuck = (0..n).find(|&s| graph.edges(s).is_empty() && !graph.is_terminal(s));
    verdicts.push(match stuck {
        None => Verdict::new(Property::DeadlockFreedom, Status::Pass, stats),
        Some(s) => Verdict::fail(
            Property::DeadlockFreedom,
            stats,
            graph.path_to(s),
            format!("no transition enabled in non-terminal state {}", describe(&graph.state(s))),
        ),
    });

    let mut predecessors = vec![Vec::new(); n];
    for s in 0..n {
        for e in graph.edges(s) {
            predecessors[e.target as usize].push(s);
        }
    }
    let mut can_finish = vec![false; n];
    let mut work: VecDeque<usize> = (0..n).filter(|&s| graph.is_terminal(s)).collect();
    for &s in &work {
        can_finish[s] = true;
    }
    while let Some(s) = work.pop_front() {
        for &p in &predecessors[s] {
            if !can_finish[p] {
                can_finish[p] = true;
                work.push_back(p);
            }
        }
    }
    verdicts.push(match (0..n).find(|&s| !can_finish[s]) {
        None => Verdict::new(Property::Terminability, Status::Pass, stats),
        Some(s) => Verdict::fail(
            Property::Terminability,
            stats,
            graph.path_to(s),
            format!("no terminal state reachable from {}", describe(&graph.state(s))),
        ),
    });

    let seen = graph.edge_labels();
    let tree = syntax_tree(spec);
    let mut missing = BTreeSet::new();
    for leaf in tree.leaves() {
        if let NodeKind::Atomic { labels } = &tree.node(leaf).kind {
            missing.extend(labels.iter().filter(|l| !seen.contains(l)).map(ToString::to_string));
        }
    }
    verdicts.push(if missing.is_empty() {
        Verdict::new(Property::TaskReachability, Status::Pass, stats)
    } else {
        Verdict::fail(
            Property::TaskReachability,
            stats,
            Vec::new(),
            format!("never executed: {}", missing.into_iter().collect::<Vec<_>>().join(", ")),
        )
    });

    let undelivered = (0..n).find(|&s| graph.is_terminal(s) && graph.queued(s) > 0);
    verdicts.push(match undelivered {
        None => Verdict::new(Property::MessageDrainage, Status::Pass, stats),
        Some(s) => Verdict::fail(
            Property::MessageDrainage,
            stats,
            graph.path_to(s),
            format!("terminal state with undelivered messages: {}", describe(&graph.state(s))),
        ),
    });
    verdicts
}

fn describe(state: &GlobalState) -> String {
    let mut parts: Vec<String> = state
        .continuations
        .iter()
        .filter(|(_, p)| **p != crate::csp::Process::Skip)
        .map(|(name, p)| format!("{name} at `{}`", crate::csp::print_process(p)))
        .collect();
    for (channel, queue) in &state.channels {
        if !queue.is_empty() {
            parts.push(format!("|{channel}| = {} [{}]", queue.len(), queue.iter().cloned().collect::<Vec<_>>().join(", ")));
        }
    }
    if parts.is_empty() {
        "all participants finished".into()
    } else {
        parts.join("; ")
    }
}

/// Deadlock freedom, terminability, task reachability and message drainage.
pub fn check_soundness(spec: &CspSpec, bounds: Bounds) -> Vec<Verdict> {
    soundness_verdicts(&explore(spec, bounds), spec)
}

pub fn check_soundness_with(spec: &CspSpec, bounds: Bounds, order: SearchOrder) -> Vec<Verdict> {
    soundness_verdicts(&explore_with(spec, bounds, order), spec)
}

/// Whether an edge labelled `target` (or a terminal state, for `end`) is reachable.
pub fn check_reachability(spec: &CspSpec, target: &str, bounds: Bounds) -> Result<Verdict, VerifyError> {
    let unknown = || VerifyError::UnknownLabel(target.to_string());
    let property = Property::Reaches(target.to_string());
    let wanted = if target == "end" {
        None
    } else {
        let label = Label::parse(target).ok_or_else(unknown)?;
        if !spec.alphabet().labels().contains(&label) {
            return Err(unknown());
        }
        Some(label)
    };
    let graph = explore(spec, bounds);
    let stats = graph.stats();
    let mut witness = None;
    'search: for s in 0..graph.state_count() {
        match &wanted {
            None if graph.is_terminal(s) => {
                witness = Some(graph.path_to(s));
                break;
            }
            None => {}
            Some(label) => {
                for e in graph.edges(s) {
                    let t = graph.transition(e.transition);
                    if t.label == *label {
                        let mut path = graph.path_to(s);
                        path.push(t.clone());
                        witness = Some(path);
                        break 'search;
                    }
                }
            }
        }
    }
    Ok(match witness {
        Some(witness) => Verdict { witness, ..Verdict::new(property, Status::Pass, stats) },
        None if graph.truncated() => Verdict {
            detail: format!("not found within {} states", stats.states),
            ..Verdict::new(property, Status::Inconclusive, stats)
        },
        None => Verdict {
            detail: format!("`{target}` is unreachable"),
            ..Verdict::new(property, Status::Fail, stats)
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step} (`{transition}`) is not enabled")]
pub struct ReplayError {
    /// 1-based position in the trace.
    pub step: usize,
    pub transition: Transition,
}

/// Runs a trace from the initial state. Several states may match when
/// choice branches open with the same label, so the result is a set.
pub fn replay(spec: &CspSpec, trace: &[Transition]) -> Result<Vec<GlobalState>, ReplayError> {
    let mut current = BTreeSet::from([initial_state(spec)]);
    for (i, wanted) in trace.iter().enumerate() {
        let next: BTreeSet<GlobalState> = current
            .iter()
            .flat_map(|s| successors(s, spec))
            .filter(|(t, _)| t.participant == wanted.participant && t.label == wanted.label)
            .map(|(_, s)| s)
            .collect();
        if next.is_empty() {
            return Err(ReplayError { step: i + 1, transition: wanted.clone() });
        }
        current = next;
    }
    Ok(current.into_iter().collect())
}

/// One `participant<TAB>label` line per transition.
pub fn write_trace(trace: &[Transition]) -> String {
    trace.iter().map(|t| format!("{t}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

pub fn parse_trace(text: &str) -> Result<Vec<Transition>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| TraceError { line: i + 1, message: message.to_string() };
        let (participant, label) = line.split_once('\t').ok_or_else(|| err("expected `participant<TAB>label`"))?;
        let label = Label::parse(label.trim()).ok_or_else(|| err("malformed label"))?;
        out.push(Transition::new(participant.trim(), label));
    }
    Ok(out)
}
