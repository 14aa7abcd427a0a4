use iopc_core::codegen::{
    build_contract_model, conformance_analysis, emit_solidity, parse_requests, simulate, unreduced_state_variables,
    AtomicState, ContractModel, RejectReason, Request, TwinSimulator,
};
use iopc_core::corpus::{load_case, CASES};
use iopc_core::csp::CspSpec;
use iopc_core::model::{parse_bnf_text, MessageRef};
use iopc_core::relations::{extract_relations, reduce};
use iopc_core::translate_collaboration;
use iopc_core::verify::{Bounds, Status};
use std::path::Path;

fn build(bnf: &str, name: &str) -> (CspSpec, ContractModel) {
    let spec = translate_collaboration(&parse_bnf_text(bnf).unwrap()).unwrap();
    let reduced = reduce(&extract_relations(&spec)).unwrap();
    let model = build_contract_model(&reduced, &spec, name).unwrap();
    (spec, model)
}

fn case(name: &str) -> (CspSpec, ContractModel) {
    build(&load_case(name).unwrap().bnf, name)
}

fn atomic(id: &str) -> Request {
    Request::Atomic(id.into())
}

#[test]
fn broker_contract_layout() {
    let (_, model) = case("broker");
    let broker: Vec<_> = model.atomics.iter().filter(|a| a.id.starts_with("Broker.")).map(|a| a.id.as_str()).collect();
    assert_eq!(broker, ["Broker.P1", "Broker.P3", "Broker.P4"]);
    let state = model.initial_state();
    let at = |id: &str| state.states[model.atomic_index(id).unwrap()];
    assert_eq!(at("Broker.P1"), AtomicState::Waiting);
    assert_eq!(at("Broker.P3"), AtomicState::Disabled);
    assert_eq!(at("Broker.P4"), AtomicState::Disabled);
}

#[test]
fn broker_receive_activates_both_sends() {
    let (_, model) = case("broker");
    let mut sim = simulate(&model);
    assert!(sim.request(&atomic("Manufacturer.P1")).unwrap().accepted);
    let result = sim.request(&atomic("Broker.P1")).unwrap();
    assert!(result.accepted);
    assert_eq!(sim.state("Broker.P1").unwrap(), AtomicState::Done);
    assert_eq!(sim.state("Broker.P3").unwrap(), AtomicState::Waiting);
    assert_eq!(sim.state("Broker.P4").unwrap(), AtomicState::Waiting);
}

#[test]
fn request_out_of_order_changes_nothing() {
    let (_, model) = case("broker");
    let mut sim = simulate(&model);
    let before = sim.contract_state().clone();
    let result = sim.request(&atomic("Broker.P3")).unwrap();
    assert!(!result.accepted);
    assert_eq!(result.reason, Some(RejectReason::NotEnabled));
    assert_eq!(result.reason.unwrap().to_string(), "not enabled");
    assert!(result.changes.is_empty());
    assert_eq!(sim.contract_state(), &before);
}

#[test]
fn receive_without_message_is_rejected() {
    let (_, model) = case("broker");
    let mut sim = simulate(&model);
    let result = sim.request(&atomic("Broker.P1")).unwrap();
    assert_eq!(result.reason, Some(RejectReason::MissingMessage));
}

#[test]
fn message_request_checks_sender() {
    let (_, model) = case("broker");
    let mut sim = simulate(&model);
    let order = MessageRef::new("cMB", "SupplierOrder");
    let wrong = Request::Message { message: order.clone(), sender: "Carrier".into() };
    assert_eq!(sim.request(&wrong).unwrap().reason, Some(RejectReason::WrongSender));
    let right = Request::Message { message: order, sender: "Manufacturer".into() };
    let result = sim.request(&right).unwrap();
    assert!(result.accepted);
    assert_eq!(result.forwarded[0].receiver.as_deref(), Some("Broker"));
}

#[test]
fn parallel_join_gates_participant_completion() {
    let (_, model) = case("broker");
    let broker = model.participants.iter().position(|p| p == "Broker").unwrap();
    let mut sim = simulate(&model);
    for id in ["Manufacturer.P1", "Broker.P1", "Broker.P3"] {
        assert!(sim.request(&atomic(id)).unwrap().accepted, "{id}");
    }
    assert!(!model.participant_final(sim.contract_state(), broker));
    assert!(sim.request(&atomic("Broker.P4")).unwrap().accepted);
    assert!(model.participant_final(sim.contract_state(), broker));
}

#[test]
fn init_puts_every_initial_in_waiting() {
    let (_, model) = case("sc-round2");
    let sim = TwinSimulator::init(model.clone());
    for (i, state) in sim.contract_state().states.iter().enumerate() {
        let expected = if model.initials.contains(&i) { AtomicState::Waiting } else { AtomicState::Disabled };
        assert_eq!(*state, expected);
    }
}

#[test]
fn single_task_model() {
    let (spec, model) = build("pool(A, task(e1,e2)) messages {}", "Single");
    assert_eq!(model.atomics.len(), 1);
    assert_eq!(model.initial_state().states, [AtomicState::Waiting]);
    let conformance = conformance_analysis(&spec, &model, Bounds::default());
    assert_eq!(conformance.verdict.status, Status::Pass);
    assert_eq!(conformance.traces, 1);
}

#[test]
fn xor_branches_wait_together_and_disable_each_other() {
    let (spec, model) =
        build("pool(A, task(e1,e2); xorGate(e2,((task(e2,e3)),(task(e2,e3))),e3)) messages {}", "Choice");
    let mut sim = simulate(&model);
    sim.request(&atomic("A.P1")).unwrap();
    assert_eq!(sim.state("A.P3").unwrap(), AtomicState::Waiting);
    assert_eq!(sim.state("A.P4").unwrap(), AtomicState::Waiting);
    sim.request(&atomic("A.P3")).unwrap();
    assert_eq!(sim.state("A.P4").unwrap(), AtomicState::Disabled);
    assert!(sim.is_final());
    assert_eq!(conformance_analysis(&spec, &model, Bounds::default()).verdict.status, Status::Pass);
}

#[test]
fn longest_path_replays_to_completion() {
    let loaded = load_case("sc-round2").unwrap();
    let (_, model) = case("sc-round2");
    let mut sim = simulate(&model);
    for request in &loaded.replay {
        let result = sim.request(request).unwrap();
        assert!(result.accepted, "{request}: {:?}", result.reason);
    }
    assert!(sim.is_final());
}

#[test]
fn swapping_across_an_enable_edge_rejects_the_receive() {
    let loaded = load_case("sc-round2").unwrap();
    let (_, model) = case("sc-round2");
    let mut requests = loaded.replay.clone();
    let label = |r: &Request| match r {
        Request::Atomic(name) => model.atomics[model.atomic_index(name).unwrap()].label.to_string(),
        _ => unreachable!(),
    };
    let first_receive = requests.iter().position(|r| label(r).contains('?')).unwrap();
    let channel_op = label(&requests[first_receive]).replace('?', "!");
    let send = requests.iter().position(|r| label(r) == channel_op).unwrap();
    requests.swap(send, first_receive);
    let mut sim = simulate(&model);
    let rejected = requests.iter().position(|r| !sim.request(r).unwrap().accepted).unwrap();
    assert_eq!(rejected, send);
    assert_eq!(sim.log().last().unwrap().reason, "missing message");
}

#[test]
fn log_replay_reproduces_state() {
    let loaded = load_case("oe").unwrap();
    let (_, model) = case("oe");
    let mut sim = simulate(&model);
    for request in loaded.replay.iter().take(5) {
        sim.request(request).unwrap();
    }
    sim.request(&atomic(&model.atomics[0].id)).unwrap();
    let log = sim.write_log();
    let accepted: String =
        log.lines().filter(|l| l.split('\t').nth(2) == Some("true")).map(|l| format!("{}\n", l.split('\t').nth(1).unwrap())).collect();
    let mut again = simulate(&model);
    for request in parse_requests(&accepted) {
        assert!(again.request(&request).unwrap().accepted);
    }
    assert_eq!(again.contract_state(), sim.contract_state());
}

#[test]
fn two_call_mode_passes_through_executing() {
    let (_, model) = case("minimal-ping");
    let model = model.with_two_call(true);
    let mut sim = simulate(&model);
    let first = model.atomics[model.initials[0]].id.clone();
    sim.request(&atomic(&first)).unwrap();
    assert_eq!(sim.state(&first).unwrap(), AtomicState::Executing);
    sim.request(&atomic(&first)).unwrap();
    assert_eq!(sim.state(&first).unwrap(), AtomicState::Done);
    let solidity = emit_solidity(&model);
    assert!(solidity.contains("_start() external"));
    assert!(solidity.contains("_complete() external"));
}

#[test]
fn broker_solidity_matches_golden() {
    let (_, model) = build(&load_case("broker").unwrap().bnf, "Broker");
    let text = emit_solidity(&model);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/Broker.sol");
    if std::env::var_os("IOPC_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(&path).unwrap());
    assert_eq!(text.matches("    function send_").count() + text.matches("    function receive_").count(), 6);
}

#[test]
fn empty_model_gives_constructor_only_contract() {
    let model = ContractModel {
        name: "Empty".into(),
        participants: vec![],
        atomics: vec![],
        messages: vec![],
        initials: vec![],
        activate: vec![],
        inactivate: vec![],
        parallel: vec![],
        completion: vec![],
        two_call: false,
    };
    let text = emit_solidity(&model);
    assert!(text.contains("constructor() {"));
    assert!(!text.contains("external"));
}

#[test]
fn function_count_equals_atomic_count() {
    let (_, model) = case("sc-round2");
    let text = emit_solidity(&model);
    assert_eq!(text.matches(") external {").count(), model.atomics.len());
}

#[test]
fn dropping_join_guards_breaks_conformance() {
    let (spec, model) = case("sc-round2");
    let mutated = model.without_join_guards();
    assert_ne!(mutated, model);
    let conformance = conformance_analysis(&spec, &mutated, Bounds::default());
    assert_eq!(conformance.verdict.status, Status::Fail);
    assert!(!conformance.verdict.counterexample.is_empty());
}

#[test]
fn passing_cases_conform() {
    for name in CASES {
        let loaded = load_case(name).unwrap();
        if !loaded.expected_sound() {
            continue;
        }
        let (spec, model) = case(name);
        let conformance = conformance_analysis(&spec, &model, Bounds::default());
        assert_eq!(conformance.verdict.status, Status::Pass, "{name}: {}", conformance.verdict.detail);
        assert!(conformance.traces >= 1 && conformance.traces <= 10_000, "{name}: {}", conformance.traces);
    }
}

#[test]
fn reduction_tracks_fewer_variables_for_gateway_models() {
    for name in CASES {
        let loaded = load_case(name).unwrap();
        if !loaded.model.has_gateway() {
            continue;
        }
        let spec = translate_collaboration(&loaded.model).unwrap();
        let relations = extract_relations(&spec);
        let model = build_contract_model(&reduce(&relations).unwrap(), &spec, name).unwrap();
        assert!(model.state_variables() < unreduced_state_variables(&relations, &model), "{name}");
    }
}
