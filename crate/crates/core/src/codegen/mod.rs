//! Contract state machine over atomic processes, its Solidity rendering and
//! an off-chain twin that executes the same guard tables.

mod conformance;
mod solidity;

pub use conformance::{conformance_analysis, conformance_check, Conformance};
pub use solidity::emit_solidity;

use crate::csp::{CspSpec, Label, NodeId, NodeKind};
use crate::model::MessageRef;
use crate::relations::{Join, ReducedRelationSet, RelationSet};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomicKind {
    Internal,
    Send,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AtomicState {
    Disabled,
    Waiting,
    Executing,
    Done,
}

impl fmt::Display for AtomicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Atomic {
    /// `participant.P<n>`.
    pub id: String,
    pub participant: usize,
    pub kind: AtomicKind,
    /// Index into `ContractModel::messages` for send and receive atomics.
    pub message: Option<usize>,
    pub label: Label,
    /// Contract function name.
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub targets: Vec<usize>,
    pub join: Join<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub message: MessageRef,
    pub receiver: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractModel {
    pub name: String,
    pub participants: Vec<String>,
    /// Sorted by participant, then flow order.
    pub atomics: Vec<Atomic>,
    pub messages: Vec<Message>,
    pub initials: Vec<usize>,
    pub activate: Vec<Option<Activation>>,
    pub inactivate: Vec<Vec<usize>>,
    pub parallel: Vec<Vec<usize>>,
    /// Per participant: when it has finished.
    pub completion: Vec<Join<usize>>,
    /// Start and complete as separate requests.
    pub two_call: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("relation set refers to `{0}`, which is not an atomic process")]
    Dangling(String),
    #[error("atomic process `{0}` must carry exactly one task or message label")]
    AtomicLabels(String),
    #[error("no atomic process `{0}`")]
    UnknownAtomic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContractState {
    pub states: Vec<AtomicState>,
    /// Pending count per message.
    pub pending: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    /// By atomic id, function name or label.
    Atomic(String),
    Message { message: MessageRef, sender: String },
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Request::Atomic(id) => f.write_str(id),
            Request::Message { message, sender } => write!(f, "{sender}:{}!{}", message.channel, message.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    NotEnabled,
    MissingMessage,
    WrongSender,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::NotEnabled => "not enabled",
            RejectReason::MissingMessage => "missing message",
            RejectReason::WrongSender => "wrong sender",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateChange {
    pub atomic: usize,
    pub from: AtomicState,
    pub to: AtomicState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Forward {
    pub message: MessageRef,
    pub receiver: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestResult {
    pub atomic: usize,
    pub accepted: bool,
    pub reason: Option<RejectReason>,
    pub changes: Vec<StateChange>,
    pub forwarded: Vec<Forward>,
}

fn function_name(label: &Label) -> String {
    match label {
        Label::Event(name) => name.clone(),
        Label::Send(m) => format!("send_{}_{}", m.channel, m.message),
        Label::Recv(m) => format!("receive_{}_{}", m.channel, m.message),
    }
}

/// Initial atomics waiting, everything else disabled; guard tables taken
/// from the reduced relationships.
pub fn build_contract_model(
    reduced: &ReducedRelationSet,
    spec: &CspSpec,
    name: &str,
) -> Result<ContractModel, CodegenError> {
    let tree = &reduced.tree;
    let participants = spec.participants();
    let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut atomics = Vec::new();
    let mut messages: Vec<Message> = Vec::new();
    for (p, participant) in participants.iter().enumerate() {
        let Some(def) = tree.definition(participant) else { continue };
        for leaf in tree.leaves_under(def.id) {
            let node = tree.node(leaf);
            let NodeKind::Atomic { labels } = &node.kind else { unreachable!("leaves are atomic") };
            let [label] = labels.as_slice() else {
                return Err(CodegenError::AtomicLabels(node.qualified_name()));
            };
            let (kind, message) = match label {
                Label::Event(_) => (AtomicKind::Internal, None),
                Label::Send(m) | Label::Recv(m) => {
                    let at = match messages.iter().position(|x| x.message == *m) {
                        Some(at) => at,
                        None => {
                            messages.push(Message { message: m.clone(), receiver: None });
                            messages.len() - 1
                        }
                    };
                    if matches!(label, Label::Recv(_)) {
                        messages[at].receiver = Some(p);
                        (AtomicKind::Receive, Some(at))
                    } else {
                        (AtomicKind::Send, Some(at))
                    }
                }
            };
            let mut function = function_name(label);
            if atomics.iter().any(|a: &Atomic| a.function == function) {
                function = format!("{function}_{}", atomics.len());
            }
            index.insert(leaf, atomics.len());
            atomics.push(Atomic {
                id: node.qualified_name(),
                participant: p,
                kind,
                message,
                label: label.clone(),
                function,
            });
        }
    }
    let at = |id: NodeId| index.get(&id).copied().ok_or_else(|| CodegenError::Dangling(tree.node(id).qualified_name()));
    let ats = |ids: &[NodeId]| ids.iter().map(|&i| at(i)).collect::<Result<Vec<_>, _>>();
    let join = |j: &Join| -> Result<Join<usize>, CodegenError> {
        ats(&j.atoms())?;
        Ok(j.map(&|n| index[&n]))
    };
    let n = atomics.len();
    let mut activate = vec![None; n];
    for (&a, act) in &reduced.activate {
        activate[at(a)?] = Some(Activation { targets: ats(&act.targets)?, join: join(&act.join)? });
    }
    let mut inactivate = vec![Vec::new(); n];
    for (&a, targets) in &reduced.inactivate {
        inactivate[at(a)?] = ats(targets)?;
    }
    let mut parallel = vec![Vec::new(); n];
    for (&a, group) in &reduced.parallel {
        parallel[at(a)?] = ats(group)?;
    }
    let mut initials = Vec::new();
    let mut completion = Vec::new();
    for participant in &participants {
        match reduced.participants.get(participant) {
            Some(ends) => {
                initials.extend(ats(&ends.initials)?);
                completion.push(join(&ends.completion)?);
            }
            None => completion.push(Join::All(Vec::new())),
        }
    }
    Ok(ContractModel {
        name: name.to_string(),
        participants,
        atomics,
        messages,
        initials,
        activate,
        inactivate,
        parallel,
        completion,
        two_call: false,
    })
}

impl ContractModel {
    pub fn initial_state(&self) -> ContractState {
        let mut states = vec![AtomicState::Disabled; self.atomics.len()];
        for &i in &self.initials {
            states[i] = AtomicState::Waiting;
        }
        ContractState { states, pending: vec![0; self.messages.len()] }
    }

    pub fn atomic_index(&self, name: &str) -> Option<usize> {
        self.atomics
            .iter()
            .position(|a| a.id == name || a.function == name || a.label.to_string() == name)
    }

    fn resolve(&self, request: &Request) -> Result<(usize, Option<String>), CodegenError> {
        match request {
            Request::Atomic(name) => self
                .atomic_index(name)
                .map(|i| (i, None))
                .ok_or_else(|| CodegenError::UnknownAtomic(name.clone())),
            Request::Message { message, sender } => self
                .atomics
                .iter()
                .position(|a| a.kind == AtomicKind::Send && a.message.map(|m| &self.messages[m].message) == Some(message))
                .map(|i| (i, Some(sender.clone())))
                .ok_or_else(|| CodegenError::UnknownAtomic(request.to_string())),
        }
    }

    /// Applies one request; a rejected request changes nothing.
    pub fn handle_request(&self, state: &mut ContractState, request: &Request) -> Result<RequestResult, CodegenError> {
        let (a, sender) = self.resolve(request)?;
        let atomic = &self.atomics[a];
        let reject = |reason| RequestResult { atomic: a, accepted: false, reason: Some(reason), changes: vec![], forwarded: vec![] };
        if let Some(sender) = sender {
            if self.participants[atomic.participant] != sender {
                return Ok(reject(RejectReason::WrongSender));
            }
        }
        let message_ready = || match (atomic.kind, atomic.message) {
            (AtomicKind::Receive, Some(m)) => state.pending[m] > 0,
            _ => true,
        };
        let current = state.states[a];
        let completes = match (self.two_call, current) {
            (false, AtomicState::Waiting) | (true, AtomicState::Executing) => true,
            (true, AtomicState::Waiting) => false,
            _ => return Ok(reject(RejectReason::NotEnabled)),
        };
        if !message_ready() {
            return Ok(reject(RejectReason::MissingMessage));
        }
        let mut result = RequestResult { atomic: a, accepted: true, reason: None, changes: vec![], forwarded: vec![] };
        let mut set = |state: &mut ContractState, i: usize, to: AtomicState| {
            let from = state.states[i];
            if from != to {
                state.states[i] = to;
                result.changes.push(StateChange { atomic: i, from, to });
            }
        };
        if !completes {
            set(state, a, AtomicState::Executing);
            return Ok(result);
        }
        set(state, a, AtomicState::Done);
        for &q in &self.inactivate[a] {
            if matches!(state.states[q], AtomicState::Waiting | AtomicState::Executing) {
                set(state, q, AtomicState::Disabled);
            }
        }
        if let Some(activation) = &self.activate[a] {
            let states = state.states.clone();
            if activation.join.holds(&|i| states[i] == AtomicState::Done) {
                for &t in &activation.targets {
                    if !self.inactivate[a].contains(&t) && state.states[t] == AtomicState::Disabled {
                        set(state, t, AtomicState::Waiting);
                    }
                }
            }
        }
        match (atomic.kind, atomic.message) {
            (AtomicKind::Send, Some(m)) => {
                state.pending[m] += 1;
                let receiver = self.messages[m].receiver.map(|p| self.participants[p].clone());
                result.forwarded.push(Forward { message: self.messages[m].message.clone(), receiver });
            }
            (AtomicKind::Receive, Some(m)) => state.pending[m] -= 1,
            _ => {}
        }
        Ok(result)
    }

    /// Atomics whose request would be accepted now.
    pub fn enabled(&self, state: &ContractState) -> Vec<usize> {
        (0..self.atomics.len())
            .filter(|&a| {
                let mut probe = state.clone();
                self.handle_request(&mut probe, &Request::Atomic(self.atomics[a].id.clone()))
                    .is_ok_and(|r| r.accepted)
            })
            .collect()
    }

    pub fn participant_final(&self, state: &ContractState, participant: usize) -> bool {
        self.completion[participant].holds(&|i| state.states[i] == AtomicState::Done)
    }

    pub fn is_final(&self, state: &ContractState) -> bool {
        (0..self.participants.len()).all(|p| self.participant_final(state, p))
    }

    /// One state per atomic plus one pending counter per message.
    pub fn state_variables(&self) -> usize {
        self.atomics.len() + self.messages.len()
    }

    /// The same model with every join replaced by its own atomic: successors
    /// of a parallel block fire as soon as any branch finishes.
    pub fn without_join_guards(&self) -> ContractModel {
        let mut model = self.clone();
        for (a, activation) in model.activate.iter_mut().enumerate() {
            if let Some(activation) = activation {
                activation.join = Join::Done(a);
            }
        }
        model
    }

    pub fn with_two_call(mut self, two_call: bool) -> ContractModel {
        self.two_call = two_call;
        self
    }
}

/// Variables a contract would track if composite processes kept their own
/// state: every process node below the participants plus the counters.
pub fn unreduced_state_variables(relations: &RelationSet, model: &ContractModel) -> usize {
    relations.process_nodes() + model.messages.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub seq: usize,
    pub atomic: String,
    pub accepted: bool,
    pub reason: String,
}

/// Sequential executor of the contract semantics with a transaction log.
#[derive(Debug, Clone)]
pub struct TwinSimulator {
    model: ContractModel,
    state: ContractState,
    log: Vec<LogEntry>,
}

pub fn simulate(model: &ContractModel) -> TwinSimulator {
    TwinSimulator::init(model.clone())
}

impl TwinSimulator {
    pub fn init(model: ContractModel) -> Self {
        let state = model.initial_state();
        Self { model, state, log: Vec::new() }
    }

    pub fn request(&mut self, request: &Request) -> Result<RequestResult, CodegenError> {
        let result = self.model.handle_request(&mut self.state, request)?;
        self.log.push(LogEntry {
            seq: self.log.len() + 1,
            atomic: self.model.atomics[result.atomic].id.clone(),
            accepted: result.accepted,
            reason: result.reason.map(|r| r.to_string()).unwrap_or_default(),
        });
        Ok(result)
    }

    pub fn state(&self, atomic: &str) -> Result<AtomicState, CodegenError> {
        self.model
            .atomic_index(atomic)
            .map(|i| self.state.states[i])
            .ok_or_else(|| CodegenError::UnknownAtomic(atomic.to_string()))
    }

    pub fn contract_state(&self) -> &ContractState {
        &self.state
    }

    pub fn model(&self) -> &ContractModel {
        &self.model
    }

    pub fn is_final(&self) -> bool {
        self.model.is_final(&self.state)
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// `seq<TAB>atomic<TAB>accepted<TAB>reason` per request.
    pub fn write_log(&self) -> String {
        self.log
            .iter()
            .map(|e| format!("{}\t{}\t{}\t{}\n", e.seq, e.atomic, e.accepted, e.reason))
            .collect()
    }
}

/// One request per line: an atomic id, function name or label. A
/// `participant<TAB>label` line (the counterexample format) uses its label.
pub fn parse_requests(text: &str) -> Vec<Request> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| Request::Atomic(l.rsplit('\t').next().unwrap_or(l).trim().to_string()))
        .collect()
}
