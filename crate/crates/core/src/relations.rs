//! Association relationships between syntax-tree nodes, and their reduction
//! to relationships between atomic processes only.

use crate::csp::{syntax_tree, CspSpec, Label, NodeId, NodeKind, SyntaxTree};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type Relation = BTreeMap<NodeId, Vec<NodeId>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    pub tree: SyntaxTree,
    /// Sequence item to the item after it.
    pub next: Relation,
    /// Last item of a sequence (or definition) to that composite.
    pub end: Relation,
    /// Sequence (or definition) to its first item.
    pub init: Relation,
    /// Parallel composite to its branches.
    pub and_rel: Relation,
    /// Choice branch to its sibling branches.
    pub xor: Relation,
    /// Sending atomic to the atomics receiving the same message.
    pub enable: Relation,
}

/// Completion condition over atomics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Join<A = NodeId> {
    Done(A),
    All(Vec<Join<A>>),
    Any(Vec<Join<A>>),
}

impl<A: Copy> Join<A> {
    pub fn holds(&self, done: &impl Fn(A) -> bool) -> bool {
        match self {
            Join::Done(a) => done(*a),
            Join::All(items) => items.iter().all(|j| j.holds(done)),
            Join::Any(items) => items.iter().any(|j| j.holds(done)),
        }
    }

    pub fn atoms(&self) -> Vec<A> {
        match self {
            Join::Done(a) => vec![*a],
            Join::All(items) | Join::Any(items) => items.iter().flat_map(Join::atoms).collect(),
        }
    }

    pub fn map<B>(&self, f: &impl Fn(A) -> B) -> Join<B> {
        match self {
            Join::Done(a) => Join::Done(f(*a)),
            Join::All(items) => Join::All(items.iter().map(|j| j.map(f)).collect()),
            Join::Any(items) => Join::Any(items.iter().map(|j| j.map(f)).collect()),
        }
    }

    /// Largest conjunctions, not nested in another conjunction.
    fn maximal_conjunctions(&self, out: &mut Vec<Vec<A>>) {
        match self {
            Join::Done(_) => {}
            Join::All(_) => out.push(self.atoms()),
            Join::Any(items) => items.iter().for_each(|j| j.maximal_conjunctions(out)),
        }
    }

    pub fn render(&self, name: &impl Fn(A) -> String) -> String {
        let list = |items: &[Join<A>]| items.iter().map(|j| j.render(name)).collect::<Vec<_>>().join(", ");
        match self {
            Join::Done(a) => name(*a),
            Join::All(items) => format!("all({})", list(items)),
            Join::Any(items) => format!("any({})", list(items)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub targets: Vec<NodeId>,
    /// Must hold before the targets become waiting.
    pub join: Join,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantEnds {
    pub initials: Vec<NodeId>,
    pub completion: Join,
    pub finals: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedRelationSet {
    pub tree: SyntaxTree,
    pub activate: BTreeMap<NodeId, Activation>,
    pub inactivate: Relation,
    /// Atomic to the members of its join group.
    pub parallel: Relation,
    pub enable: Relation,
    pub participants: BTreeMap<String, ParticipantEnds>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("cannot reduce `{0}`: process calls inside a participant are not supported")]
    Call(String),
}

fn push(rel: &mut Relation, from: NodeId, to: NodeId) {
    let entry = rel.entry(from).or_default();
    if !entry.contains(&to) {
        entry.push(to);
    }
}

fn is_sequential(kind: &NodeKind) -> bool {
    matches!(kind, NodeKind::Definition | NodeKind::Sequence)
}

fn is_choice(kind: &NodeKind) -> bool {
    matches!(kind, NodeKind::Choice | NodeKind::EventChoice)
}

/// Walks the syntax tree of `spec`, recording Init, Next, End, And, Xor
/// and Enable.
pub fn extract_relations(spec: &CspSpec) -> RelationSet {
    let tree = syntax_tree(spec);
    let mut rel = RelationSet {
        tree: tree.clone(),
        next: Relation::new(),
        end: Relation::new(),
        init: Relation::new(),
        and_rel: Relation::new(),
        xor: Relation::new(),
        enable: Relation::new(),
    };
    for node in &tree.nodes {
        let children = &node.children;
        if is_sequential(&node.kind) {
            if let (Some(&first), Some(&last)) = (children.first(), children.last()) {
                push(&mut rel.init, node.id, first);
                push(&mut rel.end, last, node.id);
            }
            for pair in children.windows(2) {
                push(&mut rel.next, pair[0], pair[1]);
            }
        } else if node.kind == NodeKind::Parallel {
            for &c in children {
                push(&mut rel.and_rel, node.id, c);
            }
        } else if is_choice(&node.kind) {
            for &c in children {
                for &other in children.iter().filter(|&&o| o != c) {
                    push(&mut rel.xor, c, other);
                }
            }
        }
    }
    let leaves = tree.leaves();
    let labels = |id: NodeId| match &tree.node(id).kind {
        NodeKind::Atomic { labels } => labels.clone(),
        _ => Vec::new(),
    };
    for &sender in &leaves {
        for label in labels(sender) {
            let Label::Send(m) = label else { continue };
            for &receiver in &leaves {
                if labels(receiver).contains(&Label::Recv(m.clone())) {
                    push(&mut rel.enable, sender, receiver);
                }
            }
        }
    }
    rel
}

struct Reducer<'a> {
    tree: &'a SyntaxTree,
}

impl Reducer<'_> {
    fn first(&self, id: NodeId) -> Vec<NodeId> {
        let node = self.tree.node(id);
        match &node.kind {
            NodeKind::Atomic { .. } => vec![id],
            kind if is_sequential(kind) => node.children.first().map(|&c| self.first(c)).unwrap_or_default(),
            _ => node.children.iter().flat_map(|&c| self.first(c)).collect(),
        }
    }

    fn done(&self, id: NodeId) -> Join {
        let node = self.tree.node(id);
        match &node.kind {
            NodeKind::Atomic { .. } => Join::Done(id),
            kind if is_sequential(kind) => match node.children.last() {
                Some(&last) => self.done(last),
                None => Join::All(Vec::new()),
            },
            NodeKind::Parallel => Join::All(node.children.iter().map(|&c| self.done(c)).collect()),
            _ => Join::Any(node.children.iter().map(|&c| self.done(c)).collect()),
        }
    }

    /// Climbs from `atomic` to the first sequence with a following item.
    fn activation(&self, atomic: NodeId) -> Option<Activation> {
        let mut current = atomic;
        loop {
            let parent = self.tree.node(self.tree.node(current).parent?);
            if is_sequential(&parent.kind) {
                let at = parent.children.iter().position(|&c| c == current).expect("child of parent");
                if let Some(&following) = parent.children.get(at + 1) {
                    return Some(Activation { targets: self.first(following), join: self.done(current) });
                }
                if parent.kind == NodeKind::Definition {
                    return None;
                }
            }
            current = parent.id;
        }
    }
}

/// Collapses the relationships onto atomics: Activate, Inactivate,
/// Parallel join groups, initial and final atomics per participant.
pub fn reduce(relations: &RelationSet) -> Result<ReducedRelationSet, RelationError> {
    let tree = &relations.tree;
    if let Some(call) = tree.nodes.iter().find(|n| matches!(n.kind, NodeKind::Call(_))) {
        return Err(RelationError::Call(call.qualified_name()));
    }
    let reducer = Reducer { tree };
    let mut activate = BTreeMap::new();
    let mut joins = Vec::new();
    for leaf in tree.leaves() {
        if let Some(activation) = reducer.activation(leaf) {
            joins.push(activation.join.clone());
            activate.insert(leaf, activation);
        }
    }
    let mut inactivate = Relation::new();
    for node in tree.nodes.iter().filter(|n| is_choice(&n.kind)) {
        for &branch in &node.children {
            for a in reducer.first(branch) {
                for &other in node.children.iter().filter(|&&o| o != branch) {
                    for leaf in tree.leaves_under(other) {
                        push(&mut inactivate, a, leaf);
                    }
                }
            }
        }
    }
    let mut participants = BTreeMap::new();
    for &def in &tree.root().children {
        let completion = reducer.done(def);
        joins.push(completion.clone());
        let mut finals = completion.atoms();
        finals.sort();
        finals.dedup();
        participants.insert(
            tree.node(def).name.clone(),
            ParticipantEnds { initials: reducer.first(def), completion, finals },
        );
    }
    let mut parallel = Relation::new();
    let mut groups = Vec::new();
    for join in &joins {
        join.maximal_conjunctions(&mut groups);
    }
    for mut group in groups {
        group.sort();
        group.dedup();
        for &member in &group {
            parallel.insert(member, group.clone());
        }
    }
    Ok(ReducedRelationSet {
        tree: tree.clone(),
        activate,
        inactivate,
        parallel,
        enable: relations.enable.clone(),
        participants,
    })
}

impl ReducedRelationSet {
    /// Every node id occurring anywhere in the set.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for (a, act) in &self.activate {
            out.insert(*a);
            out.extend(act.targets.iter().copied());
            out.extend(act.join.atoms());
        }
        for rel in [&self.inactivate, &self.parallel, &self.enable] {
            for (a, bs) in rel {
                out.insert(*a);
                out.extend(bs.iter().copied());
            }
        }
        for ends in self.participants.values() {
            out.extend(ends.initials.iter().copied());
            out.extend(ends.finals.iter().copied());
        }
        out
    }

    pub fn atomics(&self) -> Vec<NodeId> {
        self.tree.leaves()
    }
}

impl RelationSet {
    /// Nodes a contract built without reduction would track: every atomic
    /// and composite process below the participant definitions.
    pub fn process_nodes(&self) -> usize {
        self.tree
            .nodes
            .iter()
            .filter(|n| !matches!(n.kind, NodeKind::Spec | NodeKind::Definition))
            .count()
    }
}

struct Listing<'a> {
    tree: &'a SyntaxTree,
    sections: BTreeMap<String, Vec<String>>,
    enable: Vec<String>,
}

impl<'a> Listing<'a> {
    fn new(tree: &'a SyntaxTree) -> Self {
        Self { tree, sections: BTreeMap::new(), enable: Vec::new() }
    }

    fn name(&self, id: NodeId) -> String {
        self.tree.node(id).name.clone()
    }

    fn owner(&self, id: NodeId) -> String {
        let node = self.tree.node(id);
        if node.kind == NodeKind::Definition {
            node.name.clone()
        } else {
            node.participant.clone()
        }
    }

    fn line(&mut self, owner: String, rel: &str, lhs: String, rhs: &str) {
        self.sections.entry(owner).or_default().push(format!("{rel}({lhs}) = {rhs}"));
    }

    fn list(&self, ids: &[NodeId]) -> String {
        format!("[{}]", ids.iter().map(|&i| self.name(i)).collect::<Vec<_>>().join(", "))
    }

    fn relation(&mut self, rel: &str, map: &Relation) {
        for (&a, bs) in map {
            let rhs = self.list(bs);
            self.line(self.owner(a), rel, self.name(a), &rhs);
        }
    }

    fn enable(&mut self, map: &Relation) {
        for (&a, bs) in map {
            let rhs: Vec<String> = bs.iter().map(|&b| self.tree.node(b).qualified_name()).collect();
            self.enable.push(format!("Enable({}) = [{}]", self.tree.node(a).qualified_name(), rhs.join(", ")));
        }
    }

    fn finish(mut self) -> String {
        let mut out = String::new();
        for (owner, mut lines) in std::mem::take(&mut self.sections) {
            lines.sort();
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{owner}]\n"));
            for line in lines {
                out.push_str(&line);
                out.push('\n');
            }
        }
        if !self.enable.is_empty() {
            self.enable.sort();
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("[Enable]\n");
            for line in &self.enable {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

impl fmt::Display for RelationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut listing = Listing::new(&self.tree);
        listing.relation("Init", &self.init);
        listing.relation("Next", &self.next);
        listing.relation("End", &self.end);
        listing.relation("And", &self.and_rel);
        listing.relation("Xor", &self.xor);
        listing.enable(&self.enable);
        f.write_str(&listing.finish())
    }
}

impl fmt::Display for ReducedRelationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut listing = Listing::new(&self.tree);
        let name = |id: NodeId| self.tree.node(id).name.clone();
        for (&a, act) in &self.activate {
            let rhs = listing.list(&act.targets);
            listing.line(listing.owner(a), "Activate", name(a), &rhs);
            if act.join != Join::Done(a) {
                let guard = act.join.render(&name);
                listing.line(listing.owner(a), "Join", name(a), &guard);
            }
        }
        listing.relation("Inactivate", &self.inactivate);
        listing.relation("Parallel", &self.parallel);
        for (participant, ends) in self.participants.iter().filter(|(_, e)| !e.initials.is_empty()) {
            let initials = listing.list(&ends.initials);
            listing.line(participant.clone(), "Initial", participant.clone(), &initials);
            let finals = listing.list(&ends.finals);
            listing.line(participant.clone(), "Final", participant.clone(), &finals);
            if ends.completion.atoms().len() > 1 {
                let completion = ends.completion.render(&name);
                listing.line(participant.clone(), "Complete", participant.clone(), &completion);
            }
        }
        listing.enable(&self.enable);
        f.write_str(&listing.finish())
    }
}

/// Sorted, sectioned listing of either relation set.
pub fn dump_relations(relations: &impl fmt::Display) -> String {
    relations.to_string()
}
