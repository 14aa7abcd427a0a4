//! Syntax tree over the definitions of a spec. Internal nodes are composite
//! processes; leaves are atomic processes, the task-sized chain groups that
//! carry exactly the observable labels of one task. Chains made only of
//! flow-marker events are not atomic processes and are left out of the tree.

use super::{print_process, CspSpec, Label, Process};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Spec,
    Definition,
    Sequence,
    Parallel,
    Choice,
    EventChoice,
    Call(String),
    /// Leaf; `labels` are the observable labels of the chain group.
    Atomic { labels: Vec<Label> },
}

impl NodeKind {
    /// Non-terminal name used when rendering the tree.
    pub fn rule(&self) -> &'static str {
        match self {
            NodeKind::Spec => "spec",
            NodeKind::Definition => "definition",
            NodeKind::Sequence => "sequentialDef",
            NodeKind::Parallel => "parallelDef",
            NodeKind::Choice => "choiceDef",
            NodeKind::EventChoice => "eventChoiceDef",
            NodeKind::Call(_) => "defnCallLeft",
            NodeKind::Atomic { .. } => "simpleDefinition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// `P<n>` numbering in pre-order within a definition; the definition's
    /// own name for definition nodes; `spec` for the root.
    pub name: String,
    /// Owning definition (empty for the root).
    pub participant: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Text of the subterm.
    pub text: String,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Atomic { .. })
    }

    /// `participant.name`, unique across the tree.
    pub fn qualified_name(&self) -> String {
        if self.kind == NodeKind::Definition || self.kind == NodeKind::Spec {
            self.name.clone()
        } else {
            format!("{}.{}", self.participant, self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    pub nodes: Vec<TreeNode>,
}

struct Builder {
    nodes: Vec<TreeNode>,
    counter: usize,
    participant: String,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, name: String, parent: Option<NodeId>, text: String) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(TreeNode {
            id,
            kind,
            name,
            participant: self.participant.clone(),
            parent,
            children: Vec::new(),
            text,
        });
        if let Some(parent) = parent {
            self.nodes[parent.0].children.push(id);
        }
        id
    }

    /// Adds `process` under `parent`; returns false when nothing was added.
    fn add(&mut self, process: &Process, parent: NodeId) -> bool {
        if process.is_chain_group() {
            let labels: Vec<Label> = process.labels().into_iter().filter(Label::is_observable).collect();
            if labels.is_empty() {
                return false;
            }
            self.counter += 1;
            let name = format!("P{}", self.counter);
            self.push(NodeKind::Atomic { labels }, name, Some(parent), print_process(process));
            return true;
        }
        let (kind, children): (NodeKind, &[Process]) = match process {
            Process::Seq(items) => (NodeKind::Sequence, items),
            Process::Par(items) => (NodeKind::Parallel, items),
            Process::ExtChoice(items) => (NodeKind::Choice, items),
            Process::EventChoice(items) => (NodeKind::EventChoice, items),
            Process::Call(name) => (NodeKind::Call(name.clone()), &[]),
            // Skip, or a prefix whose continuation is composite
            other => match other.prefix() {
                Some((_, cont)) => return self.add(cont, parent),
                None => return false,
            },
        };
        // composites with no atomic process below them are dropped
        let has_atomics = matches!(kind, NodeKind::Call(_)) || process.labels().iter().any(Label::is_observable);
        if !has_atomics {
            return false;
        }
        self.counter += 1;
        let name = format!("P{}", self.counter);
        let id = self.push(kind, name, Some(parent), print_process(process));
        for child in children {
            self.add(child, id);
        }
        true
    }
}

impl SyntaxTree {
    /// Builds the tree. A definition whose body is a sequence takes the
    /// sequence items as its direct children.
    pub fn build(spec: &CspSpec) -> SyntaxTree {
        let mut builder = Builder { nodes: Vec::new(), counter: 0, participant: String::new() };
        let root = builder.push(NodeKind::Spec, "spec".into(), None, String::new());
        for definition in &spec.definitions {
            builder.participant = definition.name.clone();
            builder.counter = 0;
            let id = builder.push(
                NodeKind::Definition,
                definition.name.clone(),
                Some(root),
                print_process(&definition.body),
            );
            match &definition.body {
                Process::Seq(items) => {
                    for item in items {
                        builder.add(item, id);
                    }
                }
                body => {
                    builder.add(body, id);
                }
            }
        }
        SyntaxTree { nodes: builder.nodes }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.0]
    }

    pub fn definition(&self, name: &str) -> Option<&TreeNode> {
        self.root()
            .children
            .iter()
            .map(|&id| self.node(id))
            .find(|n| n.name == name)
    }

    /// Leaves below `id`, left to right.
    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let node = self.node(id);
        if node.is_leaf() {
            return vec![id];
        }
        node.children.iter().flat_map(|&c| self.leaves_under(c)).collect()
    }

    /// All leaves, left to right.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.leaves_under(self.root().id)
    }

    /// Indented rendering, one node per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(self.root().id, 0, &mut out);
        out
    }

    fn render_node(&self, id: NodeId, depth: usize, out: &mut String) {
        let node = self.node(id);
        let line = match &node.kind {
            NodeKind::Spec => "spec".to_string(),
            NodeKind::Definition => format!("definition {} [definitionLeft {}()]", node.name, node.name),
            NodeKind::Atomic { .. } => format!("{} {}: {}", node.kind.rule(), node.name, node.text),
            NodeKind::Call(callee) => format!("{} {}: {callee}", node.kind.rule(), node.name),
            kind => format!("{} {}", kind.rule(), node.name),
        };
        out.push_str(&"  ".repeat(depth));
        out.push_str(&line);
        out.push('\n');
        for &child in &node.children {
            self.render_node(child, depth + 1, out);
        }
    }
}

pub fn syntax_tree(spec: &CspSpec) -> SyntaxTree {
    SyntaxTree::build(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::parse_csp;

    const BROKER: &str = "channel cMB 1; channel cBS 1; channel cBC 1;
Broker() = (event_e1 -> Skip; cMB?SupplierOrder -> Skip; event_e2 -> Skip); ((event_e2 -> Skip; cBS!TurnSupplierOrder -> Skip; event_e3 -> Skip) || (event_e2 -> Skip; cBC!TransportOrder -> Skip; event_e3 -> Skip));";

    #[test]
    fn broker_tree_has_three_leaves() {
        let tree = SyntaxTree::build(&parse_csp(BROKER).unwrap());
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 3);
        let names: Vec<_> = leaves.iter().map(|&l| tree.node(l).name.as_str()).collect();
        assert_eq!(names, ["P1", "P3", "P4"]);
        let broker = tree.definition("Broker").unwrap();
        let children: Vec<_> = broker.children.iter().map(|&c| tree.node(c).name.as_str()).collect();
        assert_eq!(children, ["P1", "P2"]);
        assert_eq!(tree.node(broker.children[1]).kind, NodeKind::Parallel);
        assert_eq!(
            tree.node(leaves[0]).kind,
            NodeKind::Atomic { labels: vec![Label::parse("cMB?SupplierOrder").unwrap()] }
        );
    }

    #[test]
    fn single_task_participant_has_one_leaf() {
        let tree = SyntaxTree::build(&parse_csp("A() = event_e1 -> Skip; work_A_1 -> Skip; event_e2 -> Skip;").unwrap());
        assert_eq!(tree.leaves().len(), 1);
        assert_eq!(tree.definition("A").unwrap().children.len(), 1);
    }

    #[test]
    fn flow_marker_chains_are_not_leaves() {
        let tree = SyntaxTree::build(
            &parse_csp("A() = event_x -> Skip; (a -> Skip || b -> Skip); event_y -> Skip;").unwrap(),
        );
        assert_eq!(tree.leaves().len(), 2);
        let a = tree.definition("A").unwrap();
        assert_eq!(a.children.len(), 1);
    }

    #[test]
    fn leaves_follow_text_order() {
        let tree = SyntaxTree::build(&parse_csp(BROKER).unwrap());
        let text = &tree.definition("Broker").unwrap().text;
        let mut last = 0;
        for leaf in tree.leaves() {
            let at = text[last..].find(&tree.node(leaf).text).unwrap() + last;
            assert!(at >= last);
            last = at;
        }
    }

    #[test]
    fn render_names_rules() {
        let tree = SyntaxTree::build(&parse_csp(BROKER).unwrap());
        let rendered = tree.render();
        assert!(rendered.starts_with("spec\n  definition Broker"));
        assert!(rendered.contains("parallelDef P2"));
    }
}
