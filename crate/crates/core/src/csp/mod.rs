//! A CSP# subset: event prefixing, `Skip`, sequential composition,
//! interleaving, external choice, event-based choice and asynchronous
//! channel operations over bounded FIFO channels.

mod text;
mod tree;

pub use text::{parse_csp, print_csp, print_process, CspError};
pub use tree::{syntax_tree, NodeId, NodeKind, SyntaxTree, TreeNode};

use crate::model::MessageRef;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;

/// Events named with this prefix are sequence-flow markers. They carry no
/// task semantics and are not observable at the contract level.
pub const FRAME_EVENT_PREFIX: &str = "event_";

/// Name of the definition holding the system composition.
pub const SYSTEM_NAME: &str = "System";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Event(String, Box<Process>),
    Send {
        channel: String,
        message: String,
        cont: Box<Process>,
    },
    Recv {
        channel: String,
        message: String,
        cont: Box<Process>,
    },
    Skip,
    /// `P1; P2; ...`, at least two items.
    Seq(Vec<Process>),
    /// `P1 || P2 || ...`, at least two branches.
    Par(Vec<Process>),
    /// `P1 [] P2 [] ...`
    ExtChoice(Vec<Process>),
    /// `P1 [*] P2 [*] ...`: a choice resolved only by the receive that opens
    /// each branch.
    EventChoice(Vec<Process>),
    Call(String),
}

/// A single step label: `event`, `ch!m` or `ch?m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    Event(String),
    Send(MessageRef),
    Recv(MessageRef),
}

impl Label {
    /// Channel operations and non-frame events.
    pub fn is_observable(&self) -> bool {
        match self {
            Label::Event(name) => !name.starts_with(FRAME_EVENT_PREFIX),
            Label::Send(_) | Label::Recv(_) => true,
        }
    }

    /// Parses the textual form produced by `Display`.
    pub fn parse(text: &str) -> Option<Label> {
        let ident = |s: &str| {
            !s.is_empty()
                && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !s.starts_with(|c: char| c.is_ascii_digit())
        };
        if let Some((ch, m)) = text.split_once('!') {
            return (ident(ch) && ident(m)).then(|| Label::Send(MessageRef::new(ch, m)));
        }
        if let Some((ch, m)) = text.split_once('?') {
            return (ident(ch) && ident(m)).then(|| Label::Recv(MessageRef::new(ch, m)));
        }
        ident(text).then(|| Label::Event(text.to_string()))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Event(name) => f.write_str(name),
            Label::Send(m) => write!(f, "{}!{}", m.channel, m.message),
            Label::Recv(m) => write!(f, "{}?{}", m.channel, m.message),
        }
    }
}

impl Process {
    pub fn event(name: impl Into<String>, cont: Process) -> Process {
        Process::Event(name.into(), Box::new(cont))
    }

    pub fn send(message: &MessageRef, cont: Process) -> Process {
        Process::Send {
            channel: message.channel.clone(),
            message: message.message.clone(),
            cont: Box::new(cont),
        }
    }

    pub fn recv(message: &MessageRef, cont: Process) -> Process {
        Process::Recv {
            channel: message.channel.clone(),
            message: message.message.clone(),
            cont: Box::new(cont),
        }
    }

    /// Sequential composition that flattens nothing and collapses the
    /// single-item case.
    pub fn seq(mut items: Vec<Process>) -> Process {
        match items.len() {
            0 => Process::Skip,
            1 => items.pop().expect("one item"),
            _ => Process::Seq(items),
        }
    }

    /// The label and continuation of a prefix.
    pub fn prefix(&self) -> Option<(Label, &Process)> {
        match self {
            Process::Event(name, cont) => Some((Label::Event(name.clone()), cont)),
            Process::Send { channel, message, cont } => {
                Some((Label::Send(MessageRef::new(channel, message)), cont))
            }
            Process::Recv { channel, message, cont } => {
                Some((Label::Recv(MessageRef::new(channel, message)), cont))
            }
            _ => None,
        }
    }

    /// A run of prefixes ending in `Skip`.
    pub fn is_chain(&self) -> bool {
        let mut current = self;
        while let Some((_, cont)) = current.prefix() {
            current = cont;
        }
        *current == Process::Skip && *self != Process::Skip
    }

    /// Chains and sequences of chains: the granularity of one task.
    pub fn is_chain_group(&self) -> bool {
        match self {
            Process::Seq(items) => items.iter().all(Process::is_chain),
            other => other.is_chain(),
        }
    }

    /// Every label occurring in this term, left to right (calls not followed).
    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut Vec<Label>) {
        if let Some((label, cont)) = self.prefix() {
            out.push(label);
            cont.collect_labels(out);
            return;
        }
        match self {
            Process::Seq(items)
            | Process::Par(items)
            | Process::ExtChoice(items)
            | Process::EventChoice(items) => items.iter().for_each(|p| p.collect_labels(out)),
            _ => {}
        }
    }

    /// The receive that opens this term, looking through leading event
    /// prefixes and leading event-only sequence items.
    pub fn opening_receive(&self) -> Option<MessageRef> {
        match self {
            Process::Event(_, cont) => cont.opening_receive(),
            Process::Recv { channel, message, .. } => Some(MessageRef::new(channel, message)),
            Process::Seq(items) => {
                for item in items {
                    if let Some(m) = item.opening_receive() {
                        return Some(m);
                    }
                    if !item.is_event_chain() {
                        return None;
                    }
                }
                None
            }
            _ => None,
        }
    }

    /// `Skip`, or event prefixes ending in `Skip`.
    pub fn is_event_chain(&self) -> bool {
        match self {
            Process::Skip => true,
            Process::Event(_, cont) => cont.is_event_chain(),
            _ => false,
        }
    }

    pub fn calls(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Process::Call(name) => out.push(name),
            Process::Event(_, cont) | Process::Send { cont, .. } | Process::Recv { cont, .. } => {
                cont.collect_calls(out)
            }
            Process::Seq(items)
            | Process::Par(items)
            | Process::ExtChoice(items)
            | Process::EventChoice(items) => items.iter().for_each(|p| p.collect_calls(out)),
            Process::Skip => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub name: String,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub body: Process,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CspSpec {
    pub channels: Vec<Channel>,
    pub definitions: Vec<Definition>,
    /// Participants composed with `||`. Empty when the text has no
    /// `System()` line.
    pub system: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Alphabet {
    pub events: BTreeSet<String>,
    pub channels: BTreeSet<String>,
    pub messages: BTreeSet<MessageRef>,
}

impl Alphabet {
    /// Every label that could occur on a transition.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out: BTreeSet<Label> = self.events.iter().cloned().map(Label::Event).collect();
        for m in &self.messages {
            out.insert(Label::Send(m.clone()));
            out.insert(Label::Recv(m.clone()));
        }
        out
    }
}

impl CspSpec {
    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// The composed participants: the system line when present, otherwise
    /// every definition that no other definition calls.
    pub fn participants(&self) -> Vec<String> {
        if !self.system.is_empty() {
            return self.system.clone();
        }
        let called: BTreeSet<&str> = self.definitions.iter().flat_map(|d| d.body.calls()).collect();
        self.definitions
            .iter()
            .filter(|d| !called.contains(d.name.as_str()))
            .map(|d| d.name.clone())
            .collect()
    }

    /// Exact sets of events, channels and `(ch, m)` pairs in the definitions.
    pub fn alphabet(&self) -> Alphabet {
        let mut alphabet = Alphabet::default();
        for definition in &self.definitions {
            for label in definition.body.labels() {
                match label {
                    Label::Event(name) => {
                        alphabet.events.insert(name);
                    }
                    Label::Send(m) | Label::Recv(m) => {
                        alphabet.channels.insert(m.channel.clone());
                        alphabet.messages.insert(m);
                    }
                }
            }
        }
        alphabet
    }
}

pub fn alphabet(spec: &CspSpec) -> Alphabet {
    spec.alphabet()
}
