//! Small-step rules. A participant's term yields local steps; whether a step
//! can fire depends only on the channel contents.

use crate::csp::{CspSpec, Label, Process};
use crate::model::MessageRef;
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

/// Depth limit for unfolding unguarded calls.
const UNFOLD_FUEL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionKind {
    InternalEvent,
    Send,
    Receive,
    /// Flow-marker event.
    Tau,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Transition {
    pub kind: TransitionKind,
    pub participant: String,
    pub label: Label,
}

impl Transition {
    pub fn new(participant: impl Into<String>, label: Label) -> Self {
        let kind = match &label {
            Label::Send(_) => TransitionKind::Send,
            Label::Recv(_) => TransitionKind::Receive,
            Label::Event(_) if label.is_observable() => TransitionKind::InternalEvent,
            Label::Event(_) => TransitionKind::Tau,
        };
        Self { kind, participant: participant.into(), label }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.participant, self.label)
    }
}

/// Participant continuations and channel contents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub continuations: BTreeMap<String, Process>,
    pub channels: BTreeMap<String, VecDeque<String>>,
}

impl GlobalState {
    /// Every participant has finished.
    pub fn is_terminal(&self) -> bool {
        self.continuations.values().all(|p| *p == Process::Skip)
    }

    pub fn queued(&self) -> usize {
        self.channels.values().map(VecDeque::len).sum()
    }
}

/// A step of one participant's term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LocalStep {
    pub label: Label,
    /// Message that must be at the head of its channel (event-based choice).
    pub guard: Option<MessageRef>,
    pub next: Process,
}

pub(crate) struct Rules<'a> {
    spec: &'a CspSpec,
}

impl<'a> Rules<'a> {
    pub fn new(spec: &'a CspSpec) -> Self {
        Self { spec }
    }

    fn body(&self, name: &str) -> Option<&'a Process> {
        self.spec.definition(name).map(|d| &d.body)
    }

    /// Unfolds calls in head position, drops finished sequence heads and
    /// finished parallel branches.
    pub fn normalize(&self, process: Process) -> Process {
        self.normalize_with(process, UNFOLD_FUEL)
    }

    fn normalize_with(&self, process: Process, fuel: usize) -> Process {
        match process {
            Process::Call(name) if fuel > 0 => match self.body(&name) {
                Some(body) => self.normalize_with(body.clone(), fuel - 1),
                None => Process::Call(name),
            },
            Process::Seq(items) => {
                let mut items: VecDeque<Process> = items.into();
                loop {
                    let Some(head) = items.pop_front() else { return Process::Skip };
                    match self.normalize_with(head, fuel) {
                        Process::Skip => continue,
                        head => {
                            items.push_front(head);
                            return Process::seq(items.into());
                        }
                    }
                }
            }
            Process::Par(branches) => {
                let mut live: Vec<Process> = branches
                    .into_iter()
                    .map(|b| self.normalize_with(b, fuel))
                    .filter(|b| *b != Process::Skip)
                    .collect();
                match live.len() {
                    0 => Process::Skip,
                    1 => live.pop().expect("one branch"),
                    _ => Process::Par(live),
                }
            }
            other => other,
        }
    }

    /// Steps of a normalized term, ignoring channel contents.
    pub fn steps(&self, process: &Process) -> Vec<LocalStep> {
        let mut out = Vec::new();
        self.collect(process, &mut out);
        out
    }

    fn collect(&self, process: &Process, out: &mut Vec<LocalStep>) {
        if let Some((label, cont)) = process.prefix() {
            out.push(LocalStep { label, guard: None, next: self.normalize(cont.clone()) });
            return;
        }
        match process {
            Process::Skip | Process::Call(_) => {}
            Process::Seq(items) => {
                let (head, rest) = items.split_first().expect("non-empty sequence");
                for step in self.steps(head) {
                    let mut seq = Vec::with_capacity(items.len());
                    seq.push(step.next);
                    seq.extend(rest.iter().cloned());
                    out.push(LocalStep { next: self.normalize(Process::Seq(seq)), ..step });
                }
            }
            Process::Par(branches) => {
                for (i, branch) in branches.iter().enumerate() {
                    for step in self.steps(branch) {
                        let mut next = branches.clone();
                        next[i] = step.next;
                        out.push(LocalStep { next: self.normalize(Process::Par(next)), ..step });
                    }
                }
            }
            Process::ExtChoice(branches) => {
                for branch in branches {
                    out.extend(self.steps(&self.normalize(branch.clone())));
                }
            }
            Process::EventChoice(branches) => {
                for branch in branches {
                    let guard = branch.opening_receive();
                    for step in self.steps(&self.normalize(branch.clone())) {
                        out.push(LocalStep { guard: guard.clone().or(step.guard), ..step });
                    }
                }
            }
            Process::Event(..) | Process::Send { .. } | Process::Recv { .. } => unreachable!("prefix handled above"),
        }
    }

    pub fn capacity(&self, channel: &str) -> usize {
        self.spec.channel(channel).map_or(0, |c| c.capacity)
    }
}

/// Whether `step` can fire given the queues.
pub(crate) fn fires(step: &LocalStep, queues: &BTreeMap<String, VecDeque<String>>, rules: &Rules) -> bool {
    let head_is = |m: &MessageRef| {
        queues.get(&m.channel).and_then(VecDeque::front) == Some(&m.message)
    };
    if let Some(guard) = &step.guard {
        if !head_is(guard) {
            return false;
        }
    }
    match &step.label {
        Label::Event(_) => true,
        Label::Send(m) => queues.get(&m.channel).map_or(0, VecDeque::len) < rules.capacity(&m.channel),
        Label::Recv(m) => head_is(m),
    }
}

pub(crate) fn apply_queues(label: &Label, queues: &mut BTreeMap<String, VecDeque<String>>) {
    match label {
        Label::Event(_) => {}
        Label::Send(m) => queues.entry(m.channel.clone()).or_default().push_back(m.message.clone()),
        Label::Recv(m) => {
            queues.get_mut(&m.channel).and_then(VecDeque::pop_front);
        }
    }
}

/// Each participant at its definition body, all channels empty.
pub fn initial_state(spec: &CspSpec) -> GlobalState {
    let rules = Rules::new(spec);
    GlobalState {
        continuations: spec
            .participants()
            .into_iter()
            .map(|name| {
                let body = rules.normalize(Process::Call(name.clone()));
                (name, body)
            })
            .collect(),
        channels: spec.channels.iter().map(|c| (c.name.clone(), VecDeque::new())).collect(),
    }
}

/// Successor states of `state` with the transitions leading to them.
pub fn successors(state: &GlobalState, spec: &CspSpec) -> Vec<(Transition, GlobalState)> {
    let rules = Rules::new(spec);
    let mut out = Vec::new();
    for (participant, process) in &state.continuations {
        for step in rules.steps(process) {
            if !fires(&step, &state.channels, &rules) {
                continue;
            }
            let mut next = state.clone();
            apply_queues(&step.label, &mut next.channels);
            next.continuations.insert(participant.clone(), step.next);
            out.push((Transition::new(participant.clone(), step.label), next));
        }
    }
    out
}

pub fn enabled_transitions(state: &GlobalState, spec: &CspSpec) -> Vec<Transition> {
    let mut out: Vec<Transition> = successors(state, spec).into_iter().map(|(t, _)| t).collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::parse_csp;

    fn labels(state: &GlobalState, spec: &CspSpec) -> Vec<String> {
        enabled_transitions(state, spec).iter().map(|t| t.label.to_string()).collect()
    }

    #[test]
    fn crossed_receives_offer_nothing() {
        let spec = parse_csp(
            "channel chAB 1; channel chBA 1;
             A() = chAB?m1 -> chBA!m2 -> Skip;
             B() = chBA?m2 -> chAB!m1 -> Skip;",
        )
        .unwrap();
        assert!(enabled_transitions(&initial_state(&spec), &spec).is_empty());
    }

    #[test]
    fn broker_receives_after_start_marker() {
        let spec = parse_csp(
            "channel cMB 1; channel cBS 1; channel cBC 1;
Broker() = (event_e1 -> Skip; cMB?SupplierOrder -> Skip; event_e2 -> Skip); ((event_e2 -> Skip; cBS!TurnSupplierOrder -> Skip; event_e3 -> Skip) || (event_e2 -> Skip; cBC!TransportOrder -> Skip; event_e3 -> Skip));",
        )
        .unwrap();
        let mut state = initial_state(&spec);
        assert_eq!(state.continuations["Broker"], spec.definitions[0].body);
        state.channels.get_mut("cMB").unwrap().push_back("SupplierOrder".into());
        assert_eq!(labels(&state, &spec), ["event_e1"]);
        let (_, next) = successors(&state, &spec).remove(0);
        assert_eq!(labels(&next, &spec), ["cMB?SupplierOrder"]);
    }

    #[test]
    fn parallel_sends_interleave() {
        let spec = parse_csp("channel a 1; channel b 1; P() = (a!x -> Skip || b!y -> Skip);").unwrap();
        assert_eq!(labels(&initial_state(&spec), &spec), ["a!x", "b!y"]);
    }

    #[test]
    fn full_channel_blocks_send() {
        let spec = parse_csp("channel a 1; P() = a!x -> a!x -> Skip;").unwrap();
        let (_, next) = successors(&initial_state(&spec), &spec).remove(0);
        assert!(enabled_transitions(&next, &spec).is_empty());
    }

    #[test]
    fn event_choice_follows_queue_head() {
        let spec = parse_csp(
            "channel c 2; S() = c!b -> Skip; R() = (event_g -> c?a -> Skip [*] event_g -> c?b -> Skip);",
        )
        .unwrap();
        let state = initial_state(&spec);
        assert_eq!(labels(&state, &spec), ["c!b"]);
        let (_, next) = successors(&state, &spec).remove(0);
        let steps = successors(&next, &spec);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].0.label.to_string(), "event_g");
        assert_eq!(labels(&steps[0].1, &spec), ["c?b"]);
    }

    #[test]
    fn parallel_joins_before_continuation() {
        let spec = parse_csp("P() = (a -> Skip || b -> Skip); c -> Skip;").unwrap();
        let state = initial_state(&spec);
        assert_eq!(labels(&state, &spec), ["a", "b"]);
        let (_, after_a) = successors(&state, &spec).remove(0);
        assert_eq!(labels(&after_a, &spec), ["b"]);
        let (_, after_b) = successors(&after_a, &spec).remove(0);
        assert_eq!(labels(&after_b, &spec), ["c"]);
    }

    #[test]
    fn skip_system_is_terminal() {
        let spec = parse_csp("P() = Skip;").unwrap();
        let state = initial_state(&spec);
        assert_eq!(state.continuations["P"], Process::Skip);
        assert!(state.is_terminal());
    }

    #[test]
    fn calls_unfold() {
        let spec = parse_csp("P() = a -> Skip; (Q [] R); Q() = b -> Skip; R() = c -> Skip;").unwrap();
        let (_, next) = successors(&initial_state(&spec), &spec).remove(0);
        assert_eq!(labels(&next, &spec), ["b", "c"]);
    }
}
