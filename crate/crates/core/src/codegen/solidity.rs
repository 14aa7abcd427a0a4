use super::{AtomicKind, ContractModel};
use crate::relations::Join;
use std::fmt::Write;

fn condition(join: &Join<usize>) -> String {
    match join {
        Join::Done(i) => format!("states[{i}] == State.Done"),
        Join::All(items) if items.is_empty() => "true".into(),
        Join::Any(items) if items.is_empty() => "false".into(),
        Join::All(items) => format!("({})", items.iter().map(condition).collect::<Vec<_>>().join(" && ")),
        Join::Any(items) => format!("({})", items.iter().map(condition).collect::<Vec<_>>().join(" || ")),
    }
}

/// `condition` without the outermost parentheses.
fn bare_condition(join: &Join<usize>) -> String {
    let text = condition(join);
    match join {
        Join::All(items) | Join::Any(items) if !items.is_empty() => text[1..text.len() - 1].to_string(),
        _ => text,
    }
}

fn contract_name(name: &str) -> String {
    let mut out: String = name.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "Collaboration");
    }
    out
}

/// Self-contained Solidity source for `model`.
pub fn emit_solidity(model: &ContractModel) -> String {
    let n = model.atomics.len();
    let m = model.messages.len();
    let p = model.participants.len();
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "// SPDX-License-Identifier: UNLICENSED").unwrap();
    writeln!(w, "pragma solidity ^0.8.0;").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "/// Collaboration `{}`.", model.name).unwrap();
    for (i, a) in model.atomics.iter().enumerate() {
        writeln!(w, "///   atomic {i}: {} ({})", a.id, a.label).unwrap();
    }
    for (i, msg) in model.messages.iter().enumerate() {
        writeln!(w, "///   message {i}: ({},{})", msg.message.channel, msg.message.message).unwrap();
    }
    writeln!(w, "contract {} {{", contract_name(&model.name)).unwrap();
    writeln!(w, "    enum State {{ Disabled, Waiting, Executing, Done }}").unwrap();
    writeln!(w).unwrap();
    if n > 0 {
        writeln!(w, "    State[{n}] public states;").unwrap();
    }
    if m > 0 {
        writeln!(w, "    uint256[{m}] public pending;").unwrap();
    }
    if p > 0 {
        writeln!(w, "    address[{p}] public participants;").unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "    event Transition(uint256 indexed atomic, State from, State to);").unwrap();
    writeln!(w, "    event MessageForwarded(string channel, string message, address receiver);").unwrap();
    writeln!(w).unwrap();
    if p > 0 {
        writeln!(w, "    constructor(address[{p}] memory owners) {{").unwrap();
        writeln!(w, "        participants = owners;").unwrap();
    } else {
        writeln!(w, "    constructor() {{").unwrap();
    }
    for &i in &model.initials {
        writeln!(w, "        _set({i}, State.Waiting);").unwrap();
    }
    writeln!(w, "    }}").unwrap();

    for (i, a) in model.atomics.iter().enumerate() {
        let receive = a.kind == AtomicKind::Receive;
        let header = |w: &mut String, name: &str, required: &str| {
            writeln!(w).unwrap();
            writeln!(w, "    function {name}() external {{").unwrap();
            writeln!(w, "        require(msg.sender == participants[{}], \"wrong sender\");", a.participant).unwrap();
            writeln!(w, "        require(states[{i}] == State.{required}, \"not enabled\");").unwrap();
            if let (true, Some(msg)) = (receive, a.message) {
                writeln!(w, "        require(pending[{msg}] > 0, \"missing message\");").unwrap();
            }
        };
        if model.two_call {
            header(w, &format!("{}_start", a.function), "Waiting");
            writeln!(w, "        _set({i}, State.Executing);").unwrap();
            writeln!(w, "    }}").unwrap();
            header(w, &format!("{}_complete", a.function), "Executing");
        } else {
            header(w, &a.function, "Waiting");
        }
        writeln!(w, "        _set({i}, State.Done);").unwrap();
        for &q in &model.inactivate[i] {
            writeln!(w, "        _disable({q});").unwrap();
        }
        if let Some(activation) = &model.activate[i] {
            let targets: Vec<usize> =
                activation.targets.iter().copied().filter(|t| !model.inactivate[i].contains(t)).collect();
            if activation.join == Join::Done(i) {
                for t in targets {
                    writeln!(w, "        _activate({t});").unwrap();
                }
            } else {
                writeln!(w, "        if ({}) {{", bare_condition(&activation.join)).unwrap();
                for t in targets {
                    writeln!(w, "            _activate({t});").unwrap();
                }
                writeln!(w, "        }}").unwrap();
            }
        }
        match (a.kind, a.message) {
            (AtomicKind::Send, Some(msg)) => {
                let message = &model.messages[msg];
                writeln!(w, "        pending[{msg}] += 1;").unwrap();
                let receiver = match message.receiver {
                    Some(r) => format!("participants[{r}]"),
                    None => "address(0)".into(),
                };
                writeln!(
                    w,
                    "        emit MessageForwarded(\"{}\", \"{}\", {receiver});",
                    message.message.channel, message.message.message
                )
                .unwrap();
            }
            (AtomicKind::Receive, Some(msg)) => writeln!(w, "        pending[{msg}] -= 1;").unwrap(),
            _ => {}
        }
        writeln!(w, "    }}").unwrap();
    }

    writeln!(w).unwrap();
    let finals: Vec<String> = model.completion.iter().map(condition).collect();
    writeln!(w, "    function isFinal() public view returns (bool) {{").unwrap();
    if finals.is_empty() {
        writeln!(w, "        return true;").unwrap();
    } else {
        writeln!(w, "        return {};", finals.join(" && ")).unwrap();
    }
    writeln!(w, "    }}").unwrap();
    if n > 0 {
        writeln!(w).unwrap();
        writeln!(w, "    function _set(uint256 i, State to) private {{").unwrap();
        writeln!(w, "        emit Transition(i, states[i], to);").unwrap();
        writeln!(w, "        states[i] = to;").unwrap();
        writeln!(w, "    }}").unwrap();
        writeln!(w).unwrap();
        writeln!(w, "    function _activate(uint256 i) private {{").unwrap();
        writeln!(w, "        if (states[i] == State.Disabled) {{").unwrap();
        writeln!(w, "            _set(i, State.Waiting);").unwrap();
        writeln!(w, "        }}").unwrap();
        writeln!(w, "    }}").unwrap();
        writeln!(w).unwrap();
        writeln!(w, "    function _disable(uint256 i) private {{").unwrap();
        writeln!(w, "        if (states[i] == State.Waiting || states[i] == State.Executing) {{").unwrap();
        writeln!(w, "            _set(i, State.Disabled);").unwrap();
        writeln!(w, "        }}").unwrap();
        writeln!(w, "    }}").unwrap();
    }
    writeln!(w, "}}").unwrap();
    s
}
