//! BPMN 2.0 XML ingestion for the supported subset: pools, (send/receive)
//! tasks, none start/end events, parallel/exclusive/event-based gateways,
//! sequence flows and message flows.
//!
//! Gateways must come in matching split/join pairs. Sequence flows that only
//! connect a gateway to the first or last element of one of its branches are
//! folded onto the gateway's own input and output flows, so every element in
//! a branch sees the gateway's flow ids at the branch boundary.

use super::{CollaborationModel, Element, GateKind, MessageFlow, MessageRef, Pool};
use roxmltree::{Document, Node};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

pub const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BpmnError {
    #[error("XML syntax error: {0}")]
    Xml(String),
    #[error("not a BPMN 2.0 document (root element `{0}`)")]
    NotBpmn(String),
    #[error("unsupported element kind `{tag}` (id `{id}`)")]
    Unsupported { id: String, tag: String },
    #[error("unstructured gateway `{id}`: {reason}")]
    Unstructured { id: String, reason: String },
    #[error("invalid model at `{id}`: {reason}")]
    Invalid { id: String, reason: String },
}

fn invalid(id: &str, reason: impl Into<String>) -> BpmnError {
    BpmnError::Invalid { id: id.to_string(), reason: reason.into() }
}

/// Maps an XML id or name onto the identifier alphabet of the textual formats.
fn sanitize(raw: &str) -> String {
    let mut out: String = raw
        .trim()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if !out.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        out.insert(0, '_');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Start,
    End,
    PassThrough,
    Task,
    SendTask,
    ReceiveTask,
    Gateway(GateKind),
}

#[derive(Debug)]
struct FlowNode {
    kind: NodeKind,
    incoming: Vec<String>,
    outgoing: Vec<String>,
}

struct ProcessGraph {
    nodes: BTreeMap<String, FlowNode>,
    /// sequence flow id -> target node id
    targets: HashMap<String, String>,
}

const IGNORED_CHILDREN: &[&str] = &["documentation", "extensionElements", "incoming", "outgoing"];

fn is_bpmn(node: &Node<'_, '_>) -> bool {
    node.is_element() && node.tag_name().namespace() == Some(BPMN_NS)
}

fn id_of(node: &Node<'_, '_>) -> String {
    node.attribute("id").unwrap_or("").to_string()
}

fn unsupported(node: &Node<'_, '_>) -> BpmnError {
    BpmnError::Unsupported { id: id_of(node), tag: node.tag_name().name().to_string() }
}

/// Rejects events that carry an event definition (message, timer, ...).
fn check_none_event(node: &Node<'_, '_>) -> Result<(), BpmnError> {
    for child in node.children().filter(is_bpmn) {
        let tag = child.tag_name().name();
        if tag.ends_with("EventDefinition") {
            return Err(BpmnError::Unsupported {
                id: id_of(node),
                tag: format!("{} with {tag}", node.tag_name().name()),
            });
        }
        if !IGNORED_CHILDREN.contains(&tag) {
            return Err(unsupported(&child));
        }
    }
    Ok(())
}

fn read_process(process: &Node<'_, '_>) -> Result<ProcessGraph, BpmnError> {
    let mut nodes = BTreeMap::new();
    let mut flows = Vec::new();
    for child in process.children().filter(is_bpmn) {
        let tag = child.tag_name().name();
        let kind = match tag {
            "sequenceFlow" => {
                let id = id_of(&child);
                let source = child.attribute("sourceRef").ok_or_else(|| invalid(&id, "missing sourceRef"))?;
                let target = child.attribute("targetRef").ok_or_else(|| invalid(&id, "missing targetRef"))?;
                if child.children().any(|c| is_bpmn(&c) && c.tag_name().name() == "conditionExpression") {
                    return Err(BpmnError::Unsupported { id, tag: "conditionExpression".into() });
                }
                flows.push((id, source.to_string(), target.to_string()));
                continue;
            }
            t if IGNORED_CHILDREN.contains(&t) => continue,
            "startEvent" => NodeKind::Start,
            "endEvent" => NodeKind::End,
            "intermediateThrowEvent" | "intermediateCatchEvent" => NodeKind::PassThrough,
            "task" => NodeKind::Task,
            "sendTask" => NodeKind::SendTask,
            "receiveTask" => NodeKind::ReceiveTask,
            "parallelGateway" => NodeKind::Gateway(GateKind::And),
            "exclusiveGateway" => NodeKind::Gateway(GateKind::Xor),
            "eventBasedGateway" => NodeKind::Gateway(GateKind::Event),
            _ => return Err(unsupported(&child)),
        };
        match kind {
            NodeKind::Start | NodeKind::End | NodeKind::PassThrough => check_none_event(&child)?,
            _ => {
                if let Some(extra) = child
                    .children()
                    .filter(is_bpmn)
                    .find(|c| !IGNORED_CHILDREN.contains(&c.tag_name().name()))
                {
                    return Err(unsupported(&extra));
                }
            }
        }
        let id = id_of(&child);
        if id.is_empty() {
            return Err(invalid(tag, "element without id"));
        }
        let node = FlowNode { kind, incoming: Vec::new(), outgoing: Vec::new() };
        if nodes.insert(id.clone(), node).is_some() {
            return Err(invalid(&id, "duplicate id"));
        }
    }
    let mut targets = HashMap::new();
    for (id, source, target) in flows {
        nodes
            .get_mut(&source)
            .ok_or_else(|| invalid(&id, format!("sourceRef `{source}` is not a flow node")))?
            .outgoing
            .push(id.clone());
        nodes
            .get_mut(&target)
            .ok_or_else(|| invalid(&id, format!("targetRef `{target}` is not a flow node")))?
            .incoming
            .push(id.clone());
        if targets.insert(id.clone(), target).is_some() {
            return Err(invalid(&id, "duplicate sequence flow id"));
        }
    }
    Ok(ProcessGraph { nodes, targets })
}

enum Ending {
    End,
    Join { gateway: String, outgoing: String },
}

struct Structurer<'a> {
    graph: &'a ProcessGraph,
    messages: &'a HashMap<String, (bool, MessageRef)>,
    visited: BTreeSet<String>,
}

fn rewrite_input(element: &mut Element, flow: &str) {
    if let Element::Gate { branches, .. } = element {
        for branch in branches.iter_mut() {
            if let Some(first) = branch.first_mut() {
                rewrite_input(first, flow);
            }
        }
    }
    match element {
        Element::Task { input, .. }
        | Element::SndTask { input, .. }
        | Element::RcvTask { input, .. }
        | Element::Gate { input, .. } => *input = flow.to_string(),
    }
}

fn rewrite_output(element: &mut Element, flow: &str) {
    if let Element::Gate { branches, .. } = element {
        for branch in branches.iter_mut() {
            if let Some(last) = branch.last_mut() {
                rewrite_output(last, flow);
            }
        }
    }
    match element {
        Element::Task { output, .. }
        | Element::SndTask { output, .. }
        | Element::RcvTask { output, .. }
        | Element::Gate { output, .. } => *output = flow.to_string(),
    }
}

impl Structurer<'_> {
    fn single_out(&self, id: &str, node: &FlowNode) -> Result<String, BpmnError> {
        match node.outgoing.as_slice() {
            [flow] => Ok(flow.clone()),
            [] => Err(invalid(id, "no outgoing sequence flow")),
            _ => Err(BpmnError::Unstructured {
                id: id.to_string(),
                reason: "implicit split (several outgoing flows without a gateway)".into(),
            }),
        }
    }

    fn enter(&mut self, id: &str) -> Result<(), BpmnError> {
        if !self.visited.insert(id.to_string()) {
            return Err(BpmnError::Unstructured {
                id: id.to_string(),
                reason: "cycle or shared path (loops are not supported)".into(),
            });
        }
        Ok(())
    }

    /// Follows the flow from `flow` until an end event or a join gateway.
    fn sequence(&mut self, mut flow: String) -> Result<(Vec<Element>, Ending), BpmnError> {
        let mut elements = Vec::new();
        loop {
            let id = self.graph.targets[&flow].clone();
            let node = &self.graph.nodes[&id];
            if node.incoming.len() > 1 && !matches!(node.kind, NodeKind::Gateway(_)) {
                return Err(BpmnError::Unstructured {
                    id,
                    reason: "implicit join (several incoming flows without a gateway)".into(),
                });
            }
            match node.kind {
                NodeKind::Start => return Err(invalid(&id, "start event with incoming flow")),
                NodeKind::End => {
                    self.enter(&id)?;
                    return Ok((elements, Ending::End));
                }
                NodeKind::PassThrough => {
                    self.enter(&id)?;
                    flow = self.single_out(&id, node)?;
                }
                NodeKind::Task | NodeKind::SendTask | NodeKind::ReceiveTask => {
                    self.enter(&id)?;
                    let output = self.single_out(&id, node)?;
                    let input = flow.clone();
                    let element = match (node.kind, self.messages.get(&id)) {
                        (NodeKind::Task, None) => Element::Task { input: sanitize(&input), output: sanitize(&output) },
                        (NodeKind::Task | NodeKind::SendTask, Some((true, message))) => Element::SndTask {
                            input: sanitize(&input),
                            message: message.clone(),
                            output: sanitize(&output),
                        },
                        (NodeKind::Task | NodeKind::ReceiveTask, Some((false, message))) => Element::RcvTask {
                            input: sanitize(&input),
                            message: message.clone(),
                            output: sanitize(&output),
                        },
                        (NodeKind::SendTask, _) => return Err(invalid(&id, "send task without outgoing message flow")),
                        _ => return Err(invalid(&id, "receive task without incoming message flow")),
                    };
                    elements.push(element);
                    flow = output;
                }
                NodeKind::Gateway(kind) => {
                    if node.incoming.len() > 1 {
                        if node.outgoing.len() != 1 {
                            return Err(BpmnError::Unstructured {
                                id,
                                reason: "gateway both joins and splits".into(),
                            });
                        }
                        let outgoing = node.outgoing[0].clone();
                        return Ok((elements, Ending::Join { gateway: id, outgoing }));
                    }
                    self.enter(&id)?;
                    if node.outgoing.len() < 2 {
                        return Err(BpmnError::Unstructured { id, reason: "split with a single branch".into() });
                    }
                    let mut branches = Vec::new();
                    let mut join: Option<String> = None;
                    let mut after = String::new();
                    for branch_flow in node.outgoing.clone() {
                        let (mut branch, ending) = self.sequence(branch_flow)?;
                        let Ending::Join { gateway, outgoing } = ending else {
                            return Err(BpmnError::Unstructured {
                                id: id.clone(),
                                reason: "split without matching join".into(),
                            });
                        };
                        if join.as_ref().is_some_and(|j| *j != gateway) {
                            return Err(BpmnError::Unstructured {
                                id: id.clone(),
                                reason: "branches reach different joins".into(),
                            });
                        }
                        if branch.is_empty() {
                            return Err(BpmnError::Unstructured { id: id.clone(), reason: "empty branch".into() });
                        }
                        rewrite_input(branch.first_mut().expect("non-empty"), &sanitize(&flow));
                        rewrite_output(branch.last_mut().expect("non-empty"), &sanitize(&outgoing));
                        join = Some(gateway);
                        after = outgoing;
                        branches.push(branch);
                    }
                    let join = join.expect("at least two branches");
                    let join_node = &self.graph.nodes[&join];
                    let compatible = match (kind, join_node.kind) {
                        (GateKind::Event, NodeKind::Gateway(GateKind::Xor)) => true,
                        (k, NodeKind::Gateway(j)) => k == j,
                        _ => false,
                    };
                    if !compatible || join_node.incoming.len() != branches.len() {
                        return Err(BpmnError::Unstructured {
                            id: id.clone(),
                            reason: format!("split does not match join `{join}`"),
                        });
                    }
                    self.enter(&join)?;
                    elements.push(Element::Gate {
                        kind,
                        input: sanitize(&flow),
                        branches,
                        output: sanitize(&after),
                    });
                    flow = after;
                }
            }
        }
    }
}

fn structure(
    process_id: &str,
    graph: &ProcessGraph,
    messages: &HashMap<String, (bool, MessageRef)>,
) -> Result<Vec<Element>, BpmnError> {
    let starts: Vec<_> = graph.nodes.iter().filter(|(_, n)| n.kind == NodeKind::Start).collect();
    let [(start_id, start)] = starts.as_slice() else {
        return Err(invalid(process_id, format!("expected exactly one start event, found {}", starts.len())));
    };
    let mut structurer = Structurer { graph, messages, visited: BTreeSet::new() };
    structurer.visited.insert(start_id.to_string());
    let first = structurer.single_out(start_id, start)?;
    let (elements, ending) = structurer.sequence(first)?;
    if let Ending::Join { gateway, .. } = ending {
        return Err(BpmnError::Unstructured { id: gateway, reason: "join without matching split".into() });
    }
    if let Some(unvisited) = graph.nodes.keys().find(|id| !structurer.visited.contains(*id)) {
        return Err(invalid(unvisited, "element not on the structured path from the start event"));
    }
    if elements.is_empty() {
        return Err(invalid(process_id, "process without tasks"));
    }
    Ok(elements)
}

/// Channel name for an ordered pool pair: `c` followed by both initials, or
/// the full names when initials collide with another pair.
fn channel_names(pairs: &BTreeSet<(String, String)>) -> BTreeMap<(String, String), String> {
    let initial = |s: &str| s.chars().next().map(|c| c.to_ascii_uppercase()).unwrap_or('X');
    let short = |(s, r): &(String, String)| format!("c{}{}", initial(s), initial(r));
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for pair in pairs {
        *counts.entry(short(pair)).or_default() += 1;
    }
    pairs
        .iter()
        .map(|pair| {
            let name = short(pair);
            let name = if counts[&name] > 1 { format!("c{}{}", pair.0, pair.1) } else { name };
            (pair.clone(), name)
        })
        .collect()
}

/// Parses a BPMN 2.0 collaboration diagram.
pub fn parse_bpmn_xml(text: &str) -> Result<CollaborationModel, BpmnError> {
    let doc = Document::parse(text).map_err(|e| BpmnError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().namespace() != Some(BPMN_NS) || root.tag_name().name() != "definitions" {
        return Err(BpmnError::NotBpmn(root.tag_name().name().to_string()));
    }

    let mut processes: BTreeMap<String, Node<'_, '_>> = BTreeMap::new();
    let mut collaboration = None;
    let mut message_names: HashMap<String, String> = HashMap::new();
    for child in root.children().filter(is_bpmn) {
        match child.tag_name().name() {
            "process" => {
                processes.insert(id_of(&child), child);
            }
            "collaboration" => collaboration = Some(child),
            "message" => {
                let name = child.attribute("name").unwrap_or(child.attribute("id").unwrap_or(""));
                message_names.insert(id_of(&child), sanitize(name));
            }
            // diagram interchange and imports carry no behaviour
            "documentation" | "extensionElements" | "import" => {}
            _ => return Err(unsupported(&child)),
        }
    }

    // (pool name, process id), in document order
    let mut pools: Vec<(String, String)> = Vec::new();
    let mut raw_flows = Vec::new();
    match collaboration {
        Some(collaboration) => {
            for child in collaboration.children().filter(is_bpmn) {
                match child.tag_name().name() {
                    "participant" => {
                        let id = id_of(&child);
                        let process = child
                            .attribute("processRef")
                            .ok_or_else(|| invalid(&id, "participant without process (black-box pools are not supported)"))?;
                        let name = sanitize(child.attribute("name").unwrap_or(&id));
                        pools.push((name, process.to_string()));
                    }
                    "messageFlow" => raw_flows.push(child),
                    "documentation" | "extensionElements" => {}
                    _ => return Err(unsupported(&child)),
                }
            }
        }
        None => {
            for (id, process) in &processes {
                pools.push((sanitize(process.attribute("name").unwrap_or(id)), id.clone()));
            }
        }
    }

    // owning pool of every flow node
    let mut owner: HashMap<String, String> = HashMap::new();
    for (pool, process_id) in &pools {
        let process = processes
            .get(process_id)
            .ok_or_else(|| invalid(process_id, "participant references a missing process"))?;
        for node in process.children().filter(is_bpmn) {
            if let Some(id) = node.attribute("id") {
                owner.insert(id.to_string(), pool.clone());
            }
        }
    }

    struct RawFlow {
        source: String,
        target: String,
        sender: String,
        receiver: String,
        message: String,
    }
    let mut resolved = Vec::new();
    for flow in raw_flows {
        let id = id_of(&flow);
        let source = flow.attribute("sourceRef").unwrap_or("").to_string();
        let target = flow.attribute("targetRef").unwrap_or("").to_string();
        let sender = owner
            .get(&source)
            .ok_or_else(|| invalid(&id, "message flow must start at a task inside a pool"))?
            .clone();
        let receiver = owner
            .get(&target)
            .ok_or_else(|| invalid(&id, "message flow must end at a task inside a pool"))?
            .clone();
        let message = flow
            .attribute("messageRef")
            .and_then(|m| message_names.get(m).cloned())
            .or_else(|| flow.attribute("name").map(sanitize))
            .unwrap_or_else(|| sanitize(&id));
        resolved.push(RawFlow { source, target, sender, receiver, message });
    }

    let pairs = resolved.iter().map(|f| (f.sender.clone(), f.receiver.clone())).collect();
    let channels = channel_names(&pairs);
    let mut task_messages: HashMap<String, (bool, MessageRef)> = HashMap::new();
    let mut message_flows = Vec::new();
    for flow in &resolved {
        let channel = channels[&(flow.sender.clone(), flow.receiver.clone())].clone();
        let message = MessageRef::new(&channel, &flow.message);
        for (task, sending) in [(&flow.source, true), (&flow.target, false)] {
            if task_messages.insert(task.clone(), (sending, message.clone())).is_some() {
                return Err(invalid(task, "task with more than one message flow"));
            }
        }
        message_flows.push(MessageFlow::new(channel, &flow.sender, &flow.receiver, &flow.message));
    }

    let mut out = Vec::new();
    for (name, process_id) in &pools {
        let graph = read_process(&processes[process_id])?;
        let elements = structure(process_id, &graph, &task_messages)?;
        out.push(Pool { name: name.clone(), elements });
    }
    Ok(CollaborationModel { pools: out, message_flows })
}
