//! Trace-set comparison between the verifier's state graph and the contract.
//! Verifier states are grouped into macro-states closed under flow-marker
//! steps; at every reachable pair both sides must offer the same labels.

use super::{ContractModel, ContractState, Request};
use crate::csp::{CspSpec, Label};
use crate::verify::{explore, Bounds, Property, StateGraph, Status, Transition, Verdict};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conformance {
    pub verdict: Verdict,
    /// Maximal label traces, counted once per distinct sequence.
    pub traces: u128,
    /// Distinct (macro-state, contract state) pairs visited.
    pub pairs: usize,
}

type Macro = Vec<u32>;

struct Search<'a> {
    graph: &'a StateGraph,
    model: &'a ContractModel,
    memo: HashMap<(Macro, ContractState), u128>,
    prefix: Vec<Transition>,
    mismatch: Option<(Vec<Transition>, String)>,
}

impl Search<'_> {
    fn closure(&self, seeds: impl IntoIterator<Item = u32>) -> Macro {
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut stack: Vec<u32> = seeds.into_iter().collect();
        while let Some(s) = stack.pop() {
            if !seen.insert(s) {
                continue;
            }
            for e in self.graph.edges(s as usize) {
                if !self.graph.transition(e.transition).label.is_observable() {
                    stack.push(e.target);
                }
            }
        }
        seen.into_iter().collect()
    }

    fn model_steps(&self, states: &Macro) -> BTreeMap<Label, (String, BTreeSet<u32>)> {
        let mut out: BTreeMap<Label, (String, BTreeSet<u32>)> = BTreeMap::new();
        for &s in states {
            for e in self.graph.edges(s as usize) {
                let t = self.graph.transition(e.transition);
                if t.label.is_observable() {
                    out.entry(t.label.clone())
                        .or_insert_with(|| (t.participant.clone(), BTreeSet::new()))
                        .1
                        .insert(e.target);
                }
            }
        }
        out
    }

    fn contract_steps(&self, state: &ContractState) -> BTreeMap<Label, (String, ContractState)> {
        let mut out = BTreeMap::new();
        for (i, atomic) in self.model.atomics.iter().enumerate() {
            let mut next = state.clone();
            let request = Request::Atomic(atomic.id.clone());
            let accepted = self.model.handle_request(&mut next, &request).is_ok_and(|r| r.accepted);
            if accepted {
                let participant = self.model.participants[self.model.atomics[i].participant].clone();
                out.insert(atomic.label.clone(), (participant, next));
            }
        }
        out
    }

    fn visit(&mut self, states: Macro, contract: ContractState) -> u128 {
        if self.mismatch.is_some() {
            return 0;
        }
        let key = (states, contract);
        if let Some(&count) = self.memo.get(&key) {
            return count;
        }
        let (states, contract) = key;
        let model = self.model_steps(&states);
        let chain = self.contract_steps(&contract);
        let only_model = model.iter().find(|(l, _)| !chain.contains_key(*l));
        let only_contract = chain.iter().find(|(l, _)| !model.contains_key(*l));
        if let Some((label, (participant, _))) = only_model {
            let mut witness = self.prefix.clone();
            witness.push(Transition::new(participant.clone(), label.clone()));
            self.mismatch = Some((witness, format!("the model allows `{label}` here but the contract rejects it")));
            return 0;
        }
        if let Some((label, (participant, _))) = only_contract {
            let mut witness = self.prefix.clone();
            witness.push(Transition::new(participant.clone(), label.clone()));
            self.mismatch = Some((witness, format!("the contract accepts `{label}` here but the model does not allow it")));
            return 0;
        }
        let mut count = if model.is_empty() { 1 } else { 0 };
        for (label, (participant, targets)) in model {
            let next_states = self.closure(targets);
            let next_contract = chain[&label].1.clone();
            self.prefix.push(Transition::new(participant, label));
            count += self.visit(next_states, next_contract);
            self.prefix.pop();
            if self.mismatch.is_some() {
                return 0;
            }
        }
        self.memo.insert((states, contract), count);
        count
    }
}

/// Compares the label traces accepted by `model` with those of `spec`.
pub fn conformance_analysis(spec: &CspSpec, model: &ContractModel, bounds: Bounds) -> Conformance {
    let graph = explore(spec, bounds);
    let stats = graph.stats();
    let verdict = |status, counterexample, detail| Verdict {
        property: Property::Conformance,
        status,
        counterexample,
        witness: Vec::new(),
        detail,
        stats,
    };
    if graph.truncated() {
        return Conformance {
            verdict: verdict(Status::Inconclusive, Vec::new(), format!("exploration truncated after {} states", stats.states)),
            traces: 0,
            pairs: 0,
        };
    }
    let mut search = Search { graph: &graph, model, memo: HashMap::new(), prefix: Vec::new(), mismatch: None };
    let start = search.closure([0]);
    let traces = search.visit(start, model.initial_state());
    let pairs = search.memo.len();
    match search.mismatch {
        Some((witness, detail)) => Conformance { verdict: verdict(Status::Fail, witness, detail), traces: 0, pairs },
        None => Conformance {
            verdict: verdict(Status::Pass, Vec::new(), format!("{traces} traces agree")),
            traces,
            pairs,
        },
    }
}

pub fn conformance_check(spec: &CspSpec, model: &ContractModel, bounds: Bounds) -> Verdict {
    conformance_analysis(spec, model, bounds).verdict
}
