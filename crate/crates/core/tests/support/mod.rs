//! Random structured collaborations and CSP# terms.

use iopc_core::csp::Process;
use iopc_core::model::{CollaborationModel, Element, GateKind, MessageFlow, MessageRef, Pool};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Shape {
    Leaf,
    Gate(GateKind, Vec<Vec<Shape>>),
}

fn shape(depth: u32) -> impl Strategy<Value = Shape> {
    Just(Shape::Leaf).prop_recursive(depth, 8, 3, |inner| {
        (
            prop_oneof![Just(GateKind::And), Just(GateKind::Xor)],
            prop::collection::vec(prop::collection::vec(inner, 1..3), 2..4),
        )
            .prop_map(|(kind, branches)| Shape::Gate(kind, branches))
    })
}

struct Builder {
    roles: Vec<u8>,
    leaf: usize,
    flows: usize,
}

#[derive(Clone, Copy)]
enum Slot {
    Task,
    Message,
}

impl Builder {
    fn flow(&mut self, pool: &str) -> String {
        self.flows += 1;
        format!("{}{}", pool.to_lowercase(), self.flows)
    }

    fn slot(&mut self) -> Slot {
        let role = self.roles[self.leaf % self.roles.len()];
        self.leaf += 1;
        if role.is_multiple_of(3) {
            Slot::Task
        } else {
            Slot::Message
        }
    }

    fn sequence(&mut self, pool: &str, shapes: &[Shape], input: &str, output: &str, slots: &mut Vec<Slot>) -> Vec<Element> {
        let mut current = input.to_string();
        let mut out = Vec::new();
        for (i, s) in shapes.iter().enumerate() {
            let next = if i + 1 == shapes.len() { output.to_string() } else { self.flow(pool) };
            out.push(match s {
                Shape::Leaf => {
                    slots.push(self.slot());
                    Element::Task { input: current.clone(), output: next.clone() }
                }
                Shape::Gate(kind, branches) => Element::Gate {
                    kind: *kind,
                    input: current.clone(),
                    branches: branches.iter().map(|b| self.sequence(pool, b, &current, &next, slots)).collect(),
                    output: next.clone(),
                },
            });
            current = next;
        }
        out
    }
}

fn assign(elements: &mut [Element], roles: &mut impl Iterator<Item = Option<(bool, MessageRef)>>) {
    for element in elements {
        match element {
            Element::Gate { branches, .. } => branches.iter_mut().for_each(|b| assign(b, roles)),
            Element::Task { input, output } => {
                if let Some(Some((send, message))) = roles.next() {
                    let (input, output) = (input.clone(), output.clone());
                    *element = if send {
                        Element::SndTask { input, message, output }
                    } else {
                        Element::RcvTask { input, message, output }
                    };
                }
            }
            _ => {}
        }
    }
}

/// A valid collaboration: structured pools whose message endpoints are
/// paired across distinct pools, in leaf order.
pub fn collaboration(max_pools: usize, max_items: usize) -> impl Strategy<Value = CollaborationModel> {
    collaboration_of_depth(max_pools, max_items, 2)
}

pub fn collaboration_of_depth(max_pools: usize, max_items: usize, depth: u32) -> impl Strategy<Value = CollaborationModel> {
    (
        prop::collection::vec(prop::collection::vec(shape(depth), 1..=max_items), 2..=max_pools),
        prop::collection::vec(any::<u8>(), 1..24),
    )
        .prop_map(|(pools, roles)| {
            let names = ["A", "B", "C", "D"];
            let mut builder = Builder { roles, leaf: 0, flows: 0 };
            let mut built = Vec::new();
            let mut slots = Vec::new();
            for (i, shapes) in pools.iter().enumerate() {
                let mut pool_slots = Vec::new();
                builder.flows = 0;
                let input = builder.flow(names[i]);
                let output = format!("{}_end", names[i].to_lowercase());
                let elements = builder.sequence(names[i], shapes, &input, &output, &mut pool_slots);
                built.push(Pool { name: names[i].to_string(), elements });
                slots.push(pool_slots);
            }
            let mut open: Vec<(usize, usize)> = Vec::new();
            let mut plan: Vec<Vec<Option<(bool, MessageRef)>>> = slots.iter().map(|s| vec![None; s.len()]).collect();
            let mut flows = Vec::new();
            for (p, pool_slots) in slots.iter().enumerate() {
                for (k, slot) in pool_slots.iter().enumerate() {
                    if !matches!(slot, Slot::Message) {
                        continue;
                    }
                    match open.iter().position(|&(q, _)| q != p) {
                        Some(j) => {
                            let (q, l) = open.remove(j);
                            let (sender, receiver) = (names[q], names[p]);
                            let channel = format!("c{sender}{receiver}");
                            let message = format!("M{}", flows.len() + 1);
                            let m = MessageRef::new(&channel, &message);
                            plan[q][l] = Some((true, m.clone()));
                            plan[p][k] = Some((false, m));
                            flows.push(MessageFlow::new(channel, sender, receiver, message));
                        }
                        None => open.push((p, k)),
                    }
                }
            }
            for (pool, roles) in built.iter_mut().zip(plan) {
                assign(&mut pool.elements, &mut roles.into_iter());
            }
            CollaborationModel { pools: built, message_flows: flows }
        })
}

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "work_x", "event_e1", "go"]).prop_map(String::from)
}

fn message() -> impl Strategy<Value = (String, String)> {
    (prop::sample::select(vec!["c1", "c2"]), prop::sample::select(vec!["m", "n"]))
        .prop_map(|(c, m)| (c.to_string(), m.to_string()))
}

fn receive_led(inner: BoxedStrategy<Process>) -> impl Strategy<Value = Process> {
    (message(), inner).prop_map(|((channel, message), cont)| Process::Recv { channel, message, cont: Box::new(cont) })
}

pub fn process() -> impl Strategy<Value = Process> {
    let leaf = prop_oneof![Just(Process::Skip), Just(Process::Call("Q".into()))];
    leaf.prop_recursive(4, 24, 3, |inner| {
        let boxed = inner.clone().boxed();
        prop_oneof![
            (ident(), inner.clone()).prop_map(|(e, p)| Process::Event(e, Box::new(p))),
            (message(), inner.clone()).prop_map(|((channel, message), p)| Process::Send {
                channel,
                message,
                cont: Box::new(p)
            }),
            receive_led(boxed.clone()),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Process::Seq),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Process::Par),
            prop::collection::vec(inner, 2..4).prop_map(Process::ExtChoice),
            prop::collection::vec(receive_led(boxed), 2..4).prop_map(Process::EventChoice),
        ]
    })
}
