//! Collaboration model to CSP# translation.
//!
//! | element                       | process                                              |
//! |-------------------------------|------------------------------------------------------|
//! | `task(ei, eo)`                | `event_ei -> Skip; work_<id> -> Skip; event_eo -> Skip` |
//! | `sndTask(ei, (ch, m), eo)`    | `event_ei -> Skip; ch!m -> Skip; event_eo -> Skip`   |
//! | `rcvTask(ei, (ch, m), eo)`    | `event_ei -> Skip; ch?m -> Skip; event_eo -> Skip`   |
//! | `andGate(ei, (T1..Tn), eo)`   | `event_ei -> Skip; (T1 \|\| .. \|\| Tn); event_eo -> Skip` |
//! | `xorGate(ei, (T1..Tn), eo)`   | `event_ei -> Skip; (T1 [] .. [] Tn); event_eo -> Skip` |
//! | `eventbaseGate(..)`           | `event_ei -> Skip; (T1 [*] .. [*] Tn); event_eo -> Skip` |
//!
//! A gateway's `event_ei` (`event_eo`) frame is left out when every branch
//! already opens (closes) with that same flow event, so the flow event is
//! emitted once per branch rather than twice.

use crate::csp::{Channel, CspSpec, Definition, Process, FRAME_EVENT_PREFIX};
use crate::model::{validate_model, CollaborationModel, Element, GateKind, MessageRef, Pool, StructuralIssue};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("model has no pools")]
    EmptyModel,
    #[error("model is not well-formed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<StructuralIssue>),
    #[error("message {0} is not declared")]
    UndeclaredMessage(MessageRef),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Capacity for every channel instead of the number of messages it carries.
    pub channel_capacity: Option<usize>,
}

/// Per-pool translation state.
#[derive(Debug, Clone)]
pub struct TranslationContext {
    /// Element id to the ids of the elements that may run right after it.
    pub next_elements: BTreeMap<String, Vec<String>>,
    /// Declared messages, for resolving task references.
    pub channels: BTreeMap<MessageRef, String>,
    pool: String,
    counter: usize,
}

pub fn flow_event(flow: &str) -> String {
    format!("{FRAME_EVENT_PREFIX}{flow}")
}

pub fn work_event(element_id: &str) -> String {
    format!("work_{element_id}")
}

fn first_ids(elements: &[Element], ids: &BTreeMap<*const Element, String>) -> Vec<String> {
    match elements.first() {
        Some(element) => vec![ids[&(element as *const Element)].clone()],
        None => vec![],
    }
}

impl TranslationContext {
    pub fn new(model: &CollaborationModel, pool: &Pool) -> Self {
        let channels = model
            .message_flows
            .iter()
            .map(|f| (f.message_ref(), f.channel.clone()))
            .collect();
        let ids: BTreeMap<*const Element, String> = pool
            .element_ids()
            .into_iter()
            .map(|(id, element)| (element as *const Element, id))
            .collect();
        let mut next_elements = BTreeMap::new();
        Self::link(&pool.elements, &[], &ids, &mut next_elements);
        Self { next_elements, channels, pool: pool.name.clone(), counter: 0 }
    }

    /// Records the successors of every element in `elements`; `after` are
    /// the successors of the list as a whole.
    fn link(
        elements: &[Element],
        after: &[String],
        ids: &BTreeMap<*const Element, String>,
        next: &mut BTreeMap<String, Vec<String>>,
    ) {
        for (i, element) in elements.iter().enumerate() {
            let following = match elements.get(i + 1) {
                Some(_) => first_ids(&elements[i + 1..], ids),
                None => after.to_vec(),
            };
            let id = ids[&(element as *const Element)].clone();
            if let Element::Gate { branches, .. } = element {
                next.insert(id, branches.iter().flat_map(|b| first_ids(b, ids)).collect());
                for branch in branches {
                    Self::link(branch, &following, ids, next);
                }
            } else {
                next.insert(id, following);
            }
        }
    }

    fn next_id(&mut self) -> String {
        self.counter += 1;
        format!("{}_{}", self.pool, self.counter)
    }

    fn resolve(&self, message: &MessageRef) -> Result<(), TranslateError> {
        if self.channels.contains_key(message) {
            Ok(())
        } else {
            Err(TranslateError::UndeclaredMessage(message.clone()))
        }
    }
}

fn opens_with(elements: &[Element], flow: &str) -> bool {
    elements.first().is_some_and(|e| e.input() == flow)
}

fn closes_with(elements: &[Element], flow: &str) -> bool {
    elements.last().is_some_and(|e| e.output() == flow)
}

/// Translates one element; nested elements are numbered depth-first.
pub fn translate_element(element: &Element, ctx: &mut TranslationContext) -> Result<Process, TranslateError> {
    let id = ctx.next_id();
    let framed = |input: &str, middle: Process, output: &str| {
        Process::Seq(vec![
            Process::event(flow_event(input), Process::Skip),
            middle,
            Process::event(flow_event(output), Process::Skip),
        ])
    };
    Ok(match element {
        Element::Task { input, output } => framed(input, Process::event(work_event(&id), Process::Skip), output),
        Element::SndTask { input, message, output } => {
            ctx.resolve(message)?;
            framed(input, Process::send(message, Process::Skip), output)
        }
        Element::RcvTask { input, message, output } => {
            ctx.resolve(message)?;
            framed(input, Process::recv(message, Process::Skip), output)
        }
        Element::Gate { kind, input, branches, output } => {
            let translated = branches
                .iter()
                .map(|branch| translate_sequence(branch, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            let composed = match kind {
                GateKind::And => Process::Par(translated),
                GateKind::Xor => Process::ExtChoice(translated),
                GateKind::Event => Process::EventChoice(translated),
            };
            let mut items = Vec::new();
            if !branches.iter().all(|b| opens_with(b, input)) {
                items.push(Process::event(flow_event(input), Process::Skip));
            }
            items.push(composed);
            if !branches.iter().all(|b| closes_with(b, output)) {
                items.push(Process::event(flow_event(output), Process::Skip));
            }
            Process::seq(items)
        }
    })
}

fn translate_sequence(elements: &[Element], ctx: &mut TranslationContext) -> Result<Process, TranslateError> {
    let items = elements
        .iter()
        .map(|element| translate_element(element, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Process::seq(items))
}

/// Sequential composition of the pool's translated elements.
pub fn translate_participant(
    pool: &Pool,
    ctx: &mut TranslationContext,
) -> Result<(String, Process), TranslateError> {
    ctx.counter = 0;
    ctx.pool = pool.name.clone();
    Ok((pool.name.clone(), translate_sequence(&pool.elements, ctx)?))
}

pub fn translate_collaboration(model: &CollaborationModel) -> Result<CspSpec, TranslateError> {
    translate_with(model, TranslateOptions::default())
}

/// Translates a validated model: one definition per pool, the pools
/// composed in the system line, one channel per distinct message channel.
pub fn translate_with(model: &CollaborationModel, options: TranslateOptions) -> Result<CspSpec, TranslateError> {
    if model.pools.is_empty() {
        return Err(TranslateError::EmptyModel);
    }
    let issues = validate_model(model);
    if !issues.is_empty() {
        return Err(TranslateError::Invalid(issues));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for flow in &model.message_flows {
        *counts.entry(flow.channel.as_str()).or_default() += 1;
    }
    let channels = model
        .channels()
        .into_iter()
        .map(|name| {
            let capacity = options.channel_capacity.unwrap_or(counts[name.as_str()]);
            Channel { name, capacity }
        })
        .collect();
    let mut definitions = Vec::new();
    for pool in &model.pools {
        let mut ctx = TranslationContext::new(model, pool);
        let (name, body) = translate_participant(pool, &mut ctx)?;
        definitions.push(Definition { name, body });
    }
    Ok(CspSpec {
        channels,
        definitions,
        system: model.pools.iter().map(|p| p.name.clone()).collect(),
    })
}
