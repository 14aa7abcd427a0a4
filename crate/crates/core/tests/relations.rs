use iopc_core::csp::{parse_csp, NodeId, SyntaxTree};
use iopc_core::model::parse_bnf_text;
use iopc_core::relations::{dump_relations, extract_relations, reduce, Join, Relation};
use iopc_core::translate_collaboration;

const BROKER: &str = "channel cMB 1; channel cBS 1; channel cBC 1;
Broker() = (event_e1 -> Skip; cMB?SupplierOrder -> Skip; event_e2 -> Skip); ((event_e2 -> Skip; cBS!TurnSupplierOrder -> Skip; event_e3 -> Skip) || (event_e2 -> Skip; cBC!TransportOrder -> Skip; event_e3 -> Skip));";

fn id(tree: &SyntaxTree, participant: &str, name: &str) -> NodeId {
    tree.nodes
        .iter()
        .find(|n| n.name == name && (n.participant == participant || n.name == participant))
        .unwrap_or_else(|| panic!("no node {participant}.{name}"))
        .id
}

fn named(tree: &SyntaxTree, rel: &Relation, participant: &str, lhs: &str) -> Vec<String> {
    rel.get(&id(tree, participant, lhs))
        .map(|v| v.iter().map(|&n| tree.node(n).name.clone()).collect())
        .unwrap_or_default()
}

fn translate(bnf: &str) -> iopc_core::csp::CspSpec {
    translate_collaboration(&parse_bnf_text(bnf).unwrap()).unwrap()
}

#[test]
fn broker_relationships() {
    let rel = extract_relations(&parse_csp(BROKER).unwrap());
    let t = &rel.tree;
    assert_eq!(named(t, &rel.init, "Broker", "Broker"), ["P1"]);
    assert_eq!(named(t, &rel.next, "Broker", "P1"), ["P2"]);
    assert_eq!(named(t, &rel.end, "Broker", "P2"), ["Broker"]);
    assert_eq!(named(t, &rel.and_rel, "Broker", "P2"), ["P3", "P4"]);
    assert!(rel.xor.is_empty());
}

#[test]
fn single_task_relationships() {
    let rel = extract_relations(&translate("pool(A, task(e1,e2)) messages {}"));
    let t = &rel.tree;
    assert_eq!(named(t, &rel.init, "A", "A"), ["P1"]);
    assert_eq!(named(t, &rel.end, "A", "P1"), ["A"]);
}

#[test]
fn xor_branches_exclude_each_other() {
    let rel = extract_relations(&translate(
        "pool(A, xorGate(e1,((task(e1,e2)),(task(e1,e2))),e2)) messages {}",
    ));
    let t = &rel.tree;
    assert_eq!(named(t, &rel.xor, "A", "P2"), ["P3"]);
    assert_eq!(named(t, &rel.xor, "A", "P3"), ["P2"]);
}

#[test]
fn broker_reduction_is_leaf_only() {
    let rel = extract_relations(&parse_csp(BROKER).unwrap());
    let reduced = reduce(&rel).unwrap();
    let t = &reduced.tree;
    let p1 = id(t, "Broker", "P1");
    let activation = &reduced.activate[&p1];
    let targets: Vec<_> = activation.targets.iter().map(|&n| t.node(n).name.as_str()).collect();
    assert_eq!(targets, ["P3", "P4"]);
    assert_eq!(activation.join, Join::Done(p1));
    assert_eq!(named(t, &reduced.parallel, "Broker", "P3"), ["P3", "P4"]);
    assert!(reduced.inactivate.is_empty());
    assert!(reduced.nodes().iter().all(|&n| t.node(n).is_leaf()));
    assert!(!reduced.nodes().contains(&id(t, "Broker", "P2")));
}

#[test]
fn broker_reduced_listing() {
    let reduced = reduce(&extract_relations(&parse_csp(BROKER).unwrap())).unwrap();
    assert_eq!(
        dump_relations(&reduced),
        "[Broker]
Activate(P1) = [P3, P4]
Complete(Broker) = all(P3, P4)
Final(Broker) = [P3, P4]
Initial(Broker) = [P1]
Parallel(P3) = [P3, P4]
Parallel(P4) = [P3, P4]
"
    );
    assert_eq!(dump_relations(&reduced), dump_relations(&reduced.clone()));
}

#[test]
fn broker_listing() {
    let rel = extract_relations(&parse_csp(BROKER).unwrap());
    assert_eq!(
        dump_relations(&rel),
        "[Broker]
And(P2) = [P3, P4]
End(P2) = [Broker]
Init(Broker) = [P1]
Next(P1) = [P2]
"
    );
}

#[test]
fn empty_participant_lists_nothing() {
    let spec = parse_csp("P() = Skip;").unwrap();
    let rel = extract_relations(&spec);
    assert_eq!(dump_relations(&rel), "");
    assert_eq!(dump_relations(&reduce(&rel).unwrap()), "");
}

#[test]
fn sequential_tasks_chain() {
    let rel = extract_relations(&translate("pool(A, task(e1,e2); task(e2,e3); task(e3,e4)) messages {}"));
    let reduced = reduce(&rel).unwrap();
    assert_eq!(reduced.activate.len(), 2);
    assert!(reduced.parallel.is_empty());
    assert!(reduced.inactivate.is_empty());
    let t = &reduced.tree;
    let targets = |a: &str| reduced.activate[&id(t, "A", a)].targets.iter().map(|&n| t.node(n).name.clone()).collect::<Vec<_>>();
    assert_eq!(targets("P1"), ["P2"]);
    assert_eq!(targets("P2"), ["P3"]);
}

#[test]
fn xor_reduction_inactivates_siblings() {
    let reduced = reduce(&extract_relations(&translate(
        "pool(A, xorGate(e1,((task(e1,e2)),(task(e1,e2))),e2)) messages {}",
    )))
    .unwrap();
    let t = &reduced.tree;
    assert_eq!(named(t, &reduced.inactivate, "A", "P2"), ["P3"]);
    assert_eq!(named(t, &reduced.inactivate, "A", "P3"), ["P2"]);
}

#[test]
fn xor_inside_and_joins_on_either_branch() {
    let reduced = reduce(&extract_relations(&translate(
        "pool(A, andGate(e1,((xorGate(e1,((task(e1,e2)),(task(e1,e2))),e2)),(task(e1,e2))),e2); task(e2,e3)) messages {}",
    )))
    .unwrap();
    let t = &reduced.tree;
    let leaf = |n: &str| id(t, "A", n);
    // P1 parallel, P2 choice over P3/P4, P5 second branch, P6 after the join
    let expected = Join::All(vec![Join::Any(vec![Join::Done(leaf("P3")), Join::Done(leaf("P4"))]), Join::Done(leaf("P5"))]);
    for a in ["P3", "P4", "P5"] {
        assert_eq!(reduced.activate[&leaf(a)].join, expected);
        assert_eq!(reduced.activate[&leaf(a)].targets, [leaf("P6")]);
    }
    assert_eq!(named(t, &reduced.parallel, "A", "P5"), ["P3", "P4", "P5"]);
}

#[test]
fn enable_edges_match_message_flows() {
    let model = parse_bnf_text(
        "pool(A, sndTask(a1,(cAB,m1),a2); rcvTask(a2,(cBA,m2),a3)) || pool(B, rcvTask(b1,(cAB,m1),b2); sndTask(b2,(cBA,m2),b3)) messages { (cAB(A,B),m1) (cBA(B,A),m2) }",
    )
    .unwrap();
    let rel = extract_relations(&translate_collaboration(&model).unwrap());
    let edges: usize = rel.enable.values().map(Vec::len).sum();
    assert_eq!(edges, model.message_flows.len());
    assert!(dump_relations(&rel).contains("[Enable]\nEnable(A.P1) = [B.P1]\nEnable(B.P2) = [A.P2]\n"));
}
