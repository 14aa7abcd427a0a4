//! Collaboration models: one pool per participant, block-structured control
//! flow inside each pool, and a message list connecting send and receive
//! tasks across pools.

mod bnf;
mod bpmn;

pub use bnf::{parse_bnf_text, print_bnf, BnfError};
pub use bpmn::{parse_bpmn_xml, BpmnError};

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A whole collaboration: the pools composed in parallel plus the message list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CollaborationModel {
    pub pools: Vec<Pool>,
    pub message_flows: Vec<MessageFlow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub name: String,
    pub elements: Vec<Element>,
}

/// Reference to a message on a channel, `(ch, m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MessageRef {
    pub channel: String,
    pub message: String,
}

impl MessageRef {
    pub fn new(channel: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            channel: channel.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for MessageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.channel, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    /// Parallel split/join.
    And,
    /// Exclusive split/join.
    Xor,
    /// Event-based split; every branch opens with a receive task.
    Event,
}

impl GateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GateKind::And => "andGate",
            GateKind::Xor => "xorGate",
            GateKind::Event => "eventbaseGate",
        }
    }
}

/// A flow element. `input`/`output` are sequence-flow identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Task {
        input: String,
        output: String,
    },
    SndTask {
        input: String,
        message: MessageRef,
        output: String,
    },
    RcvTask {
        input: String,
        message: MessageRef,
        output: String,
    },
    Gate {
        kind: GateKind,
        input: String,
        branches: Vec<Vec<Element>>,
        output: String,
    },
}

impl Element {
    pub fn input(&self) -> &str {
        match self {
            Element::Task { input, .. }
            | Element::SndTask { input, .. }
            | Element::RcvTask { input, .. }
            | Element::Gate { input, .. } => input,
        }
    }

    pub fn output(&self) -> &str {
        match self {
            Element::Task { output, .. }
            | Element::SndTask { output, .. }
            | Element::RcvTask { output, .. }
            | Element::Gate { output, .. } => output,
        }
    }

    pub fn is_gate(&self) -> bool {
        matches!(self, Element::Gate { .. })
    }
}

/// `(ch(sender, receiver), m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFlow {
    pub channel: String,
    pub sender: String,
    pub receiver: String,
    pub message: String,
}

impl MessageFlow {
    pub fn new(
        channel: impl Into<String>,
        sender: impl Into<String>,
        receiver: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            channel: channel.into(),
            sender: sender.into(),
            receiver: receiver.into(),
            message: message.into(),
        }
    }

    pub fn message_ref(&self) -> MessageRef {
        MessageRef::new(&self.channel, &self.message)
    }
}

/// Visits every element of a list depth-first, in flow order (a gate is
/// visited before the contents of its branches).
pub fn walk_elements<'a>(elements: &'a [Element], visit: &mut impl FnMut(&'a Element)) {
    for element in elements {
        visit(element);
        if let Element::Gate { branches, .. } = element {
            for branch in branches {
                walk_elements(branch, visit);
            }
        }
    }
}

impl Pool {
    /// Stable identifier of every element: `<pool>_<n>`, numbering the
    /// elements of the pool depth-first in flow order starting at 1.
    pub fn element_ids(&self) -> Vec<(String, &Element)> {
        let mut out = Vec::new();
        walk_elements(&self.elements, &mut |element| {
            out.push((format!("{}_{}", self.name, out.len() + 1), element));
        });
        out
    }

    /// Number of tasks (of any kind) in the pool.
    pub fn task_count(&self) -> usize {
        let mut count = 0;
        walk_elements(&self.elements, &mut |element| {
            if !element.is_gate() {
                count += 1;
            }
        });
        count
    }
}

impl CollaborationModel {
    pub fn pool(&self, name: &str) -> Option<&Pool> {
        self.pools.iter().find(|p| p.name == name)
    }

    /// Distinct channels in message-list order.
    pub fn channels(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.message_flows
            .iter()
            .filter(|flow| seen.insert(flow.channel.clone()))
            .map(|flow| flow.channel.clone())
            .collect()
    }

    pub fn task_count(&self) -> usize {
        self.pools.iter().map(Pool::task_count).sum()
    }

    pub fn has_gateway(&self) -> bool {
        let mut found = false;
        for pool in &self.pools {
            walk_elements(&pool.elements, &mut |element| found |= element.is_gate());
        }
        found
    }
}

/// One violated structural invariant, naming the offending identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuralIssue {
    DuplicatePoolName(String),
    EmptyPool(String),
    DuplicateMessage(MessageRef),
    SelfMessage(MessageRef),
    /// A message-list entry names a pool that does not exist.
    UnknownPool { message: MessageRef, pool: String },
    /// A message-list entry has no matching send task in the sender pool or
    /// no matching receive task in the receiver pool.
    DanglingMessageEndpoint { message: MessageRef, pool: String, role: &'static str },
    /// A task uses a message that is not in the message list.
    UndeclaredMessage { element: String, message: MessageRef },
    /// A task uses a message in the wrong direction or from the wrong pool.
    MisdirectedMessage { element: String, message: MessageRef },
    /// More than one task sends (or receives) the same message.
    DuplicateEndpoint { message: MessageRef, role: &'static str },
    GateTooFewBranches(String),
    EmptyBranch(String),
    EventGateBranchWithoutReceive(String),
}

impl fmt::Display for StructuralIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralIssue::DuplicatePoolName(name) => write!(f, "duplicate pool name `{name}`"),
            StructuralIssue::EmptyPool(name) => write!(f, "pool `{name}` has no elements"),
            StructuralIssue::DuplicateMessage(m) => write!(f, "duplicate message {m}"),
            StructuralIssue::SelfMessage(m) => write!(f, "message {m} has the same sender and receiver"),
            StructuralIssue::UnknownPool { message, pool } => {
                write!(f, "message {message} references unknown pool `{pool}`")
            }
            StructuralIssue::DanglingMessageEndpoint { message, pool, role } => {
                write!(f, "dangling message endpoint: pool `{pool}` has no {role} task for {message}")
            }
            StructuralIssue::UndeclaredMessage { element, message } => {
                write!(f, "element `{element}` uses undeclared message {message}")
            }
            StructuralIssue::MisdirectedMessage { element, message } => {
                write!(f, "element `{element}` uses message {message} against its declared direction")
            }
            StructuralIssue::DuplicateEndpoint { message, role } => {
                write!(f, "message {message} has more than one {role} task")
            }
            StructuralIssue::GateTooFewBranches(id) => write!(f, "gateway `{id}` has fewer than two branches"),
            StructuralIssue::EmptyBranch(id) => write!(f, "gateway `{id}` has an empty branch"),
            StructuralIssue::EventGateBranchWithoutReceive(id) => {
                write!(f, "event-based gateway `{id}` has a branch not starting with a receive task")
            }
        }
    }
}

/// Checks every structural invariant of the model. Total: never panics on
/// parseable input, returns an empty list iff the model is well-formed.
pub fn validate_model(model: &CollaborationModel) -> Vec<StructuralIssue> {
    let mut issues = Vec::new();

    let mut pool_names = BTreeSet::new();
    for pool in &model.pools {
        if !pool_names.insert(pool.name.as_str()) {
            issues.push(StructuralIssue::DuplicatePoolName(pool.name.clone()));
        }
        if pool.elements.is_empty() {
            issues.push(StructuralIssue::EmptyPool(pool.name.clone()));
        }
    }

    let mut declared: BTreeMap<MessageRef, &MessageFlow> = BTreeMap::new();
    for flow in &model.message_flows {
        let key = flow.message_ref();
        if declared.insert(key.clone(), flow).is_some() {
            issues.push(StructuralIssue::DuplicateMessage(key.clone()));
        }
        if flow.sender == flow.receiver {
            issues.push(StructuralIssue::SelfMessage(key.clone()));
        }
        for pool in [&flow.sender, &flow.receiver] {
            if !pool_names.contains(pool.as_str()) {
                issues.push(StructuralIssue::UnknownPool {
                    message: key.clone(),
                    pool: pool.clone(),
                });
            }
        }
    }

    // (message, pool) pairs where a send / receive task actually occurs
    let mut senders: BTreeMap<MessageRef, Vec<String>> = BTreeMap::new();
    let mut receivers: BTreeMap<MessageRef, Vec<String>> = BTreeMap::new();
    for pool in &model.pools {
        for (id, element) in pool.element_ids() {
            match element {
                Element::SndTask { message, .. } | Element::RcvTask { message, .. } => {
                    let sending = matches!(element, Element::SndTask { .. });
                    match declared.get(message) {
                        None => issues.push(StructuralIssue::UndeclaredMessage {
                            element: id.clone(),
                            message: message.clone(),
                        }),
                        Some(flow) => {
                            let expected = if sending { &flow.sender } else { &flow.receiver };
                            if *expected != pool.name {
                                issues.push(StructuralIssue::MisdirectedMessage {
                                    element: id.clone(),
                                    message: message.clone(),
                                });
                            }
                        }
                    }
                    let table = if sending { &mut senders } else { &mut receivers };
                    table.entry(message.clone()).or_default().push(pool.name.clone());
                }
                Element::Gate { kind, branches, .. } => {
                    if branches.len() < 2 {
                        issues.push(StructuralIssue::GateTooFewBranches(id.clone()));
                    }
                    if branches.iter().any(Vec::is_empty) {
                        issues.push(StructuralIssue::EmptyBranch(id.clone()));
                    }
                    if *kind == GateKind::Event
                        && branches
                            .iter()
                            .any(|b| !matches!(b.first(), Some(Element::RcvTask { .. })))
                    {
                        issues.push(StructuralIssue::EventGateBranchWithoutReceive(id.clone()));
                    }
                }
                Element::Task { .. } => {}
            }
        }
    }

    for flow in &model.message_flows {
        let key = flow.message_ref();
        for (table, pool, role) in [
            (&senders, &flow.sender, "send"),
            (&receivers, &flow.receiver, "receive"),
        ] {
            let found = table.get(&key).map(Vec::as_slice).unwrap_or_default();
            if !found.contains(pool) && pool_names.contains(pool.as_str()) {
                issues.push(StructuralIssue::DanglingMessageEndpoint {
                    message: key.clone(),
                    pool: pool.clone(),
                    role,
                });
            }
            if found.len() > 1 {
                issues.push(StructuralIssue::DuplicateEndpoint {
                    message: key.clone(),
                    role,
                });
            }
        }
    }

    issues
}
