//! Bounded explicit-state exploration and soundness checking.

mod check;
mod semantics;

pub use check::{
    check_reachability, check_soundness, check_soundness_with, parse_trace, replay, soundness_verdicts,
    write_trace, Property, ReplayError, Status, TraceError, Verdict, VerifyError,
};
pub use semantics::{enabled_transitions, initial_state, successors, GlobalState, Transition, TransitionKind};

use crate::csp::{CspSpec, Label, Process};
use indexmap::IndexSet;
use semantics::Rules;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, VecDeque};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_states: usize,
    /// Longest queue explored; `None` uses each channel's declared capacity.
    pub max_queue_depth: Option<usize>,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { max_states: DEFAULT_MAX_STATES, max_queue_depth: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SearchOrder {
    #[default]
    BreadthFirst,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub states: usize,
    pub edges: usize,
    pub depth: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub transition: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Packed {
    locals: Box<[u32]>,
    queues: Box<[Box<[u32]>]>,
}

#[derive(Debug, Clone)]
enum Op {
    None,
    Send(usize, u32),
    Recv(usize, u32),
}

#[derive(Debug, Clone)]
struct CompiledStep {
    transition: u32,
    guard: Option<(usize, u32)>,
    op: Op,
    next: u32,
}

/// Reachable states and transitions, up to the bounds.
#[derive(Debug, Clone)]
pub struct StateGraph {
    participants: Vec<String>,
    channels: Vec<String>,
    terms: IndexSet<Process>,
    messages: IndexSet<String>,
    transitions: IndexSet<Transition>,
    states: IndexSet<Packed>,
    edges: Vec<Vec<Edge>>,
    parent: Vec<Option<(u32, u32)>>,
    depth: Vec<u32>,
    truncated: bool,
}

struct Explorer<'a> {
    rules: Rules<'a>,
    graph: StateGraph,
    capacities: Vec<usize>,
    channel_index: HashMap<String, usize>,
    cache: HashMap<(usize, u32), Vec<CompiledStep>>,
}

impl<'a> Explorer<'a> {
    fn new(spec: &'a CspSpec) -> Self {
        let mut channels: Vec<String> = spec.channels.iter().map(|c| c.name.clone()).collect();
        for name in spec.alphabet().channels {
            if !channels.contains(&name) {
                channels.push(name);
            }
        }
        let rules = Rules::new(spec);
        let capacities = channels.iter().map(|c| rules.capacity(c)).collect();
        let channel_index = channels.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let mut terms = IndexSet::new();
        terms.insert(Process::Skip);
        Self {
            rules,
            graph: StateGraph {
                participants: spec.participants(),
                channels,
                terms,
                messages: IndexSet::new(),
                transitions: IndexSet::new(),
                states: IndexSet::new(),
                edges: Vec::new(),
                parent: Vec::new(),
                depth: Vec::new(),
                truncated: false,
            },
            capacities,
            channel_index,
            cache: HashMap::new(),
        }
    }

    fn message_ref(&mut self, m: &crate::model::MessageRef) -> (usize, u32) {
        let channel = self.channel_index[&m.channel];
        let (message, _) = self.graph.messages.insert_full(m.message.clone());
        (channel, message as u32)
    }

    fn compile(&mut self, participant: usize, term: u32) -> Vec<CompiledStep> {
        if let Some(steps) = self.cache.get(&(participant, term)) {
            return steps.clone();
        }
        let process = self.graph.terms[term as usize].clone();
        let mut compiled = Vec::new();
        for step in self.rules.steps(&process) {
            let guard = step.guard.as_ref().map(|g| self.message_ref(g));
            let op = match &step.label {
                Label::Event(_) => Op::None,
                Label::Send(m) => {
                    let (c, msg) = self.message_ref(m);
                    Op::Send(c, msg)
                }
                Label::Recv(m) => {
                    let (c, msg) = self.message_ref(m);
                    Op::Recv(c, msg)
                }
            };
            let transition = Transition::new(self.graph.participants[participant].clone(), step.label);
            let (transition, _) = self.graph.transitions.insert_full(transition);
            let (next, _) = self.graph.terms.insert_full(step.next);
            compiled.push(CompiledStep { transition: transition as u32, guard, op, next: next as u32 });
        }
        self.cache.insert((participant, term), compiled.clone());
        compiled
    }

    fn successors(&mut self, state: &Packed) -> Vec<(u32, Packed)> {
        let mut out = Vec::new();
        for participant in 0..state.locals.len() {
            for step in self.compile(participant, state.locals[participant]) {
                let head = |c: usize| state.queues[c].first().copied();
                if let Some((c, m)) = step.guard {
                    if head(c) != Some(m) {
                        continue;
                    }
                }
                let mut queues = state.queues.clone();
                match step.op {
                    Op::None => {}
                    Op::Send(c, m) => {
                        if queues[c].len() >= self.capacities[c] {
                            continue;
                        }
                        let mut q = queues[c].to_vec();
                        q.push(m);
                        queues[c] = q.into();
                    }
                    Op::Recv(c, m) => {
                        if head(c) != Some(m) {
                            continue;
                        }
                        queues[c] = queues[c][1..].into();
                    }
                }
                let mut locals = state.locals.clone();
                locals[participant] = step.next;
                out.push((step.transition, Packed { locals, queues }));
            }
        }
        out
    }

    fn run(mut self, initial: &GlobalState, bounds: Bounds, order: SearchOrder) -> StateGraph {
        let start = self.pack(initial);
        self.graph.states.insert(start);
        self.graph.edges.push(Vec::new());
        self.graph.parent.push(None);
        self.graph.depth.push(0);
        let mut work = VecDeque::from([0u32]);
        while let Some(current) = match order {
            SearchOrder::BreadthFirst => work.pop_front(),
            SearchOrder::DepthFirst => work.pop_back(),
        } {
            let state = self.graph.states[current as usize].clone();
            for (transition, target) in self.successors(&state) {
                if let Some(limit) = bounds.max_queue_depth {
                    if target.queues.iter().any(|q| q.len() > limit) {
                        self.graph.truncated = true;
                        continue;
                    }
                }
                let index = match self.graph.states.get_index_of(&target) {
                    Some(index) => index as u32,
                    None if self.graph.states.len() >= bounds.max_states => {
                        self.graph.truncated = true;
                        continue;
                    }
                    None => {
                        let (index, _) = self.graph.states.insert_full(target);
                        let index = index as u32;
                        self.graph.edges.push(Vec::new());
                        self.graph.parent.push(Some((current, transition)));
                        let depth = self.graph.depth[current as usize] + 1;
                        self.graph.depth.push(depth);
                        work.push_back(index);
                        index
                    }
                };
                self.graph.edges[current as usize].push(Edge { transition, target: index });
            }
        }
        self.graph
    }

    fn pack(&mut self, state: &GlobalState) -> Packed {
        let locals = self
            .graph
            .participants
            .clone()
            .iter()
            .map(|p| {
                let term = state.continuations.get(p).cloned().unwrap_or(Process::Skip);
                self.graph.terms.insert_full(term).0 as u32
            })
            .collect();
        let queues = self
            .graph
            .channels
            .clone()
            .iter()
            .map(|c| {
                state
                    .channels
                    .get(c)
                    .map(|q| q.iter().map(|m| self.graph.messages.insert_full(m.clone()).0 as u32).collect())
                    .unwrap_or_default()
            })
            .collect();
        Packed { locals, queues }
    }
}

/// Explores breadth-first from the initial state.
pub fn explore(spec: &CspSpec, bounds: Bounds) -> StateGraph {
    explore_with(spec, bounds, SearchOrder::BreadthFirst)
}

pub fn explore_with(spec: &CspSpec, bounds: Bounds, order: SearchOrder) -> StateGraph {
    explore_from(spec, &initial_state(spec), bounds, order)
}

pub fn explore_from(spec: &CspSpec, initial: &GlobalState, bounds: Bounds, order: SearchOrder) -> StateGraph {
    Explorer::new(spec).run(initial, bounds, order)
}

impl StateGraph {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn stats(&self) -> Stats {
        Stats {
            states: self.state_count(),
            edges: self.edge_count(),
            depth: self.depth.iter().copied().max().unwrap_or(0) as usize,
            truncated: self.truncated,
        }
    }

    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    pub fn edges(&self, state: usize) -> &[Edge] {
        &self.edges[state]
    }

    pub fn transition(&self, id: u32) -> &Transition {
        &self.transitions[id as usize]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.states[state].locals.iter().all(|&t| t == 0)
    }

    /// Messages waiting in any channel.
    pub fn queued(&self, state: usize) -> usize {
        self.states[state].queues.iter().map(|q| q.len()).sum()
    }

    pub fn state(&self, state: usize) -> GlobalState {
        let packed = &self.states[state];
        GlobalState {
            continuations: self
                .participants
                .iter()
                .zip(packed.locals.iter())
                .map(|(p, &t)| (p.clone(), self.terms[t as usize].clone()))
                .collect(),
            channels: self
                .channels
                .iter()
                .zip(packed.queues.iter())
                .map(|(c, q)| (c.clone(), q.iter().map(|&m| self.messages[m as usize].clone()).collect()))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    /// Transitions from the initial state along discovery edges.
    pub fn path_to(&self, state: usize) -> Vec<Transition> {
        let mut path = Vec::new();
        let mut current = state;
        while let Some((parent, transition)) = self.parent[current] {
            path.push(self.transition(transition).clone());
            current = parent as usize;
        }
        path.reverse();
        path
    }

    /// Every label on some edge.
    pub fn edge_labels(&self) -> std::collections::BTreeSet<Label> {
        self.edges
            .iter()
            .flatten()
            .map(|e| self.transition(e.transition).label.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::parse_csp;

    #[test]
    fn skip_system_has_one_terminal_state() {
        let graph = explore(&parse_csp("P() = Skip;").unwrap(), Bounds::default());
        assert_eq!(graph.state_count(), 1);
        assert!(graph.is_terminal(0));
        assert!(!graph.truncated());
    }

    #[test]
    fn ping_is_small() {
        let spec = parse_csp("channel c 1; A() = c!m -> Skip; B() = c?m -> Skip;").unwrap();
        let graph = explore(&spec, Bounds::default());
        assert_eq!(graph.state_count(), 3);
        assert_eq!(graph.edge_count(), 2);
        assert!(graph.is_terminal(2));
    }

    #[test]
    fn state_bound_truncates() {
        let spec = parse_csp("channel c 1; A() = c!m -> Skip; B() = c?m -> Skip;").unwrap();
        let graph = explore(&spec, Bounds { max_states: 1, max_queue_depth: None });
        assert!(graph.truncated());
        assert_eq!(graph.state_count(), 1);
    }

    #[test]
    fn queue_depth_bound_truncates() {
        let spec = parse_csp("channel c 2; A() = c!m -> c!m -> Skip; B() = c?m -> c?m -> Skip;").unwrap();
        assert!(!explore(&spec, Bounds::default()).truncated());
        assert!(explore(&spec, Bounds { max_states: 100, max_queue_depth: Some(1) }).truncated());
    }

    #[test]
    fn materialized_states_match_direct_semantics() {
        let spec = parse_csp("channel c 1; A() = (c!m -> Skip || x -> Skip); B() = c?m -> Skip;").unwrap();
        let graph = explore(&spec, Bounds::default());
        for s in 0..graph.state_count() {
            let direct: std::collections::BTreeSet<_> =
                successors(&graph.state(s), &spec).into_iter().collect();
            let packed: std::collections::BTreeSet<_> = graph
                .edges(s)
                .iter()
                .map(|e| (graph.transition(e.transition).clone(), graph.state(e.target as usize)))
                .collect();
            assert_eq!(direct, packed);
        }
    }

    #[test]
    fn orders_agree_on_counts() {
        let spec = parse_csp("channel c 1; A() = (c!m -> Skip || x -> Skip); B() = (c?m -> Skip [] y -> Skip);").unwrap();
        let bfs = explore_with(&spec, Bounds::default(), SearchOrder::BreadthFirst);
        let dfs = explore_with(&spec, Bounds::default(), SearchOrder::DepthFirst);
        assert_eq!(bfs.stats().states, dfs.stats().states);
        assert_eq!(bfs.edge_count(), dfs.edge_count());
    }
}
