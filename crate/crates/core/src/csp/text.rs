//! Concrete syntax:
//!
//! ```text
//! file     := (channel | definition)*
//! channel  := "channel" ident number ";"
//! definition := ident "(" ")" "=" seq ";"
//!            | "System" "(" ")" "=" ident ("||" ident)* ";"
//! seq      := unit (";" unit)*
//! unit     := "Skip" | ident ["(" ")"]            // call
//!           | ident "->" unit                      // event prefix
//!           | ident "!" ident "->" unit            // send
//!           | ident "?" ident "->" unit            // receive
//!           | "(" seq ")"
//!           | "(" unit (op unit)+ ")"              // op one of ||  []  [*]
//! ```
//!
//! Inside one pair of parentheses all operators must be the same.

use super::{Channel, CspSpec, Definition, Label, Process, SYSTEM_NAME};
use std::collections::BTreeSet;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CspError {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared channel `{channel}` used in `{definition}`")]
    UndeclaredChannel { channel: String, definition: String },
    #[error("duplicate definition `{0}`")]
    DuplicateDefinition(String),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("`{caller}` refers to undefined process `{callee}`")]
    UndefinedProcess { caller: String, callee: String },
    #[error("event-based choice in `{0}` has a branch that does not open with a receive")]
    EventChoiceWithoutReceive(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(usize),
    LParen,
    RParen,
    Arrow,
    Semi,
    Eq,
    Bang,
    Query,
    Par,
    Ext,
    EventExt,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("`{name}`"),
            Tok::Number(n) => format!("`{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Query => "`?`".into(),
            Tok::Par => "`||`".into(),
            Tok::Ext => "`[]`".into(),
            Tok::EventExt => "`[*]`".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, CspError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let rest = &chars[i..];
        let starts = |s: &str| rest.iter().take(s.len()).copied().eq(s.chars());
        let (tok, width) = if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        } else if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        } else if starts("//") {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        } else if starts("->") {
            (Tok::Arrow, 2)
        } else if starts("||") {
            (Tok::Par, 2)
        } else if starts("[*]") {
            (Tok::EventExt, 3)
        } else if starts("[]") {
            (Tok::Ext, 2)
        } else if c.is_ascii_digit() {
            let len = rest.iter().take_while(|c| c.is_ascii_digit()).count();
            let digits: String = rest[..len].iter().collect();
            let n = digits.parse().map_err(|_| CspError::Parse {
                line,
                column,
                message: format!("number `{digits}` out of range"),
            })?;
            (Tok::Number(n), len)
        } else if c.is_ascii_alphabetic() || c == '_' {
            let len = rest.iter().take_while(|c| c.is_ascii_alphanumeric() || **c == '_').count();
            (Tok::Ident(rest[..len].iter().collect()), len)
        } else {
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '!' => Tok::Bang,
                '?' => Tok::Query,
                _ => {
                    return Err(CspError::Parse {
                        line,
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            (tok, 1)
        };
        out.push(Spanned { tok, line, column });
        i += width;
        column += width;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|s| &s.tok)
    }

    fn peek(&self) -> Option<&Tok> {
        self.peek_at(0)
    }

    fn error(&self, message: impl Into<String>) -> CspError {
        let (line, column) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(s) => (s.line, s.column),
            None => (1, 1),
        };
        CspError::Parse { line, column, message: message.into() }
    }

    fn found(&self) -> String {
        self.peek().map_or("end of input".into(), Tok::describe)
    }

    fn expect(&mut self, want: Tok) -> Result<(), CspError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.found())))
        }
    }

    fn ident(&mut self) -> Result<String, CspError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.found()))),
        }
    }

    /// `Name ( ) =` opens a new definition.
    fn at_definition(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_)))
            && self.peek_at(1) == Some(&Tok::LParen)
            && self.peek_at(2) == Some(&Tok::RParen)
            && self.peek_at(3) == Some(&Tok::Eq)
    }

    fn file(&mut self) -> Result<CspSpec, CspError> {
        let mut spec = CspSpec::default();
        while let Some(tok) = self.peek() {
            if *tok == Tok::Ident("channel".into()) {
                self.pos += 1;
                let name = self.ident()?;
                let capacity = match self.peek() {
                    Some(Tok::Number(n)) => *n,
                    _ => return Err(self.error(format!("expected channel capacity, found {}", self.found()))),
                };
                self.pos += 1;
                self.expect(Tok::Semi)?;
                spec.channels.push(Channel { name, capacity });
                continue;
            }
            if !self.at_definition() {
                return Err(self.error(format!("expected a definition, found {}", self.found())));
            }
            let name = self.ident()?;
            self.pos += 3;
            if name == SYSTEM_NAME {
                if !spec.system.is_empty() {
                    return Err(CspError::DuplicateDefinition(name));
                }
                spec.system.push(self.ident()?);
                while self.peek() == Some(&Tok::Par) {
                    self.pos += 1;
                    spec.system.push(self.ident()?);
                }
            } else {
                let body = self.seq()?;
                spec.definitions.push(Definition { name, body });
            }
            self.expect(Tok::Semi)?;
        }
        Ok(spec)
    }

    fn seq(&mut self) -> Result<Process, CspError> {
        let first = self.unit()?;
        self.seq_from(first)
    }

    fn seq_from(&mut self, first: Process) -> Result<Process, CspError> {
        let mut items = vec![first];
        while self.peek() == Some(&Tok::Semi) {
            // a `;` followed by a definition header, a channel or the end
            // terminates the definition
            let next = self.peek_at(1);
            let ends = next.is_none()
                || next == Some(&Tok::Ident("channel".into()))
                || next == Some(&Tok::RParen)
                || {
                    self.pos += 1;
                    let at = self.at_definition();
                    self.pos -= 1;
                    at
                };
            if ends {
                break;
            }
            self.pos += 1;
            items.push(self.unit()?);
        }
        Ok(Process::seq(items))
    }

    fn unit(&mut self) -> Result<Process, CspError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let first = self.unit()?;
                let op = self.peek().cloned();
                let process = match op {
                    Some(Tok::Par | Tok::Ext | Tok::EventExt) => {
                        let op = op.expect("checked");
                        let mut branches = vec![first];
                        while let Some(tok) = self.peek() {
                            if *tok == op {
                                self.pos += 1;
                                branches.push(self.unit()?);
                            } else if matches!(tok, Tok::Par | Tok::Ext | Tok::EventExt) {
                                return Err(self.error("mixed operators need parentheses"));
                            } else {
                                break;
                            }
                        }
                        match op {
                            Tok::Par => Process::Par(branches),
                            Tok::Ext => Process::ExtChoice(branches),
                            _ => Process::EventChoice(branches),
                        }
                    }
                    _ => {
                        let process = self.seq_from(first)?;
                        if let Some(tok @ (Tok::Par | Tok::Ext | Tok::EventExt)) = self.peek() {
                            return Err(self.error(format!(
                                "parenthesize the sequence before {}",
                                tok.describe()
                            )));
                        }
                        process
                    }
                };
                self.expect(Tok::RParen)?;
                Ok(process)
            }
            Some(Tok::Ident(name)) if name == "Skip" => {
                self.pos += 1;
                Ok(Process::Skip)
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                match self.peek() {
                    Some(Tok::Arrow) => {
                        self.pos += 1;
                        Ok(Process::Event(name, Box::new(self.unit()?)))
                    }
                    Some(Tok::Bang | Tok::Query) => {
                        let sending = self.peek() == Some(&Tok::Bang);
                        self.pos += 1;
                        let message = self.ident()?;
                        self.expect(Tok::Arrow)?;
                        let cont = Box::new(self.unit()?);
                        Ok(if sending {
                            Process::Send { channel: name, message, cont }
                        } else {
                            Process::Recv { channel: name, message, cont }
                        })
                    }
                    Some(Tok::LParen) if self.peek_at(1) == Some(&Tok::RParen) => {
                        self.pos += 2;
                        Ok(Process::Call(name))
                    }
                    _ => Ok(Process::Call(name)),
                }
            }
            _ => Err(self.error(format!("expected a process, found {}", self.found()))),
        }
    }
}

fn check(spec: &CspSpec) -> Result<(), CspError> {
    let mut channels = BTreeSet::new();
    for channel in &spec.channels {
        if !channels.insert(channel.name.as_str()) {
            return Err(CspError::DuplicateChannel(channel.name.clone()));
        }
    }
    let mut names = BTreeSet::new();
    for definition in &spec.definitions {
        if !names.insert(definition.name.as_str()) {
            return Err(CspError::DuplicateDefinition(definition.name.clone()));
        }
    }
    for definition in &spec.definitions {
        for label in definition.body.labels() {
            if let Label::Send(m) | Label::Recv(m) = label {
                if !channels.contains(m.channel.as_str()) {
                    return Err(CspError::UndeclaredChannel {
                        channel: m.channel,
                        definition: definition.name.clone(),
                    });
                }
            }
        }
        for callee in definition.body.calls() {
            if !names.contains(callee) {
                return Err(CspError::UndefinedProcess {
                    caller: definition.name.clone(),
                    callee: callee.to_string(),
                });
            }
        }
        if !event_choices_guarded(&definition.body) {
            return Err(CspError::EventChoiceWithoutReceive(definition.name.clone()));
        }
    }
    for participant in &spec.system {
        if !names.contains(participant.as_str()) {
            return Err(CspError::UndefinedProcess {
                caller: SYSTEM_NAME.into(),
                callee: participant.clone(),
            });
        }
    }
    Ok(())
}

fn event_choices_guarded(process: &Process) -> bool {
    match process {
        Process::EventChoice(branches) => branches
            .iter()
            .all(|b| b.opening_receive().is_some() && event_choices_guarded(b)),
        Process::Event(_, cont) | Process::Send { cont, .. } | Process::Recv { cont, .. } => {
            event_choices_guarded(cont)
        }
        Process::Seq(items) | Process::Par(items) | Process::ExtChoice(items) => {
            items.iter().all(event_choices_guarded)
        }
        Process::Skip | Process::Call(_) => true,
    }
}

/// Parses CSP# text and checks declarations and references.
pub fn parse_csp(text: &str) -> Result<CspSpec, CspError> {
    let toks = lex(text)?;
    let spec = Parser { toks, pos: 0 }.file()?;
    check(&spec)?;
    Ok(spec)
}

fn write_unit(out: &mut String, process: &Process) {
    match process {
        Process::Seq(_) => {
            out.push('(');
            write_process(out, process);
            out.push(')');
        }
        other => write_process(out, other),
    }
}

fn write_process(out: &mut String, process: &Process) {
    match process {
        Process::Skip => out.push_str("Skip"),
        Process::Call(name) => out.push_str(name),
        Process::Event(name, cont) => {
            let _ = write!(out, "{name} -> ");
            write_unit(out, cont);
        }
        Process::Send { channel, message, cont } => {
            let _ = write!(out, "{channel}!{message} -> ");
            write_unit(out, cont);
        }
        Process::Recv { channel, message, cont } => {
            let _ = write!(out, "{channel}?{message} -> ");
            write_unit(out, cont);
        }
        Process::Seq(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                write_unit(out, item);
            }
        }
        Process::Par(branches) | Process::ExtChoice(branches) | Process::EventChoice(branches) => {
            let op = match process {
                Process::Par(_) => " || ",
                Process::ExtChoice(_) => " [] ",
                _ => " [*] ",
            };
            out.push('(');
            for (i, branch) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(op);
                }
                write_unit(out, branch);
            }
            out.push(')');
        }
    }
}

/// Text of a process body as it appears after `Name() =`.
pub fn print_process(process: &Process) -> String {
    let mut out = String::new();
    write_process(&mut out, process);
    out
}

/// Canonical text: channel declarations, then definitions, then the system
/// line, one per line.
pub fn print_csp(spec: &CspSpec) -> String {
    let mut out = String::new();
    for channel in &spec.channels {
        let _ = writeln!(out, "channel {} {};", channel.name, channel.capacity);
    }
    for definition in &spec.definitions {
        let _ = writeln!(out, "{}() = {};", definition.name, print_process(&definition.body));
    }
    if !spec.system.is_empty() {
        let _ = writeln!(out, "{SYSTEM_NAME}() = {};", spec.system.join(" || "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MessageRef;

    /// The Broker definition with `event_<flow>` flow events.
    const BROKER: &str = "channel cMB 1;
channel cBS 1;
channel cBC 1;
Broker() = (event_e1 -> Skip; cMB?SupplierOrder -> Skip; event_e2 -> Skip); ((event_e2 -> Skip; cBS!TurnSupplierOrder -> Skip; event_e3 -> Skip) || (event_e2 -> Skip; cBC!TransportOrder -> Skip; event_e3 -> Skip));
";

    fn task(input: &str, op: Process, output: &str) -> Process {
        Process::Seq(vec![
            Process::event(format!("event_{input}"), Process::Skip),
            op,
            Process::event(format!("event_{output}"), Process::Skip),
        ])
    }

    fn broker_body() -> Process {
        Process::Seq(vec![
            task("e1", Process::recv(&MessageRef::new("cMB", "SupplierOrder"), Process::Skip), "e2"),
            Process::Par(vec![
                task("e2", Process::send(&MessageRef::new("cBS", "TurnSupplierOrder"), Process::Skip), "e3"),
                task("e2", Process::send(&MessageRef::new("cBC", "TransportOrder"), Process::Skip), "e3"),
            ]),
        ])
    }

    fn tokens(text: &str) -> Vec<Tok> {
        lex(text).unwrap().into_iter().map(|s| s.tok).collect()
    }

    #[test]
    fn parses_broker_definition() {
        let spec = parse_csp(BROKER).unwrap();
        assert_eq!(spec.definitions.len(), 1);
        assert_eq!(spec.definitions[0].body, broker_body());
        assert_eq!(spec.channels.len(), 3);
    }

    #[test]
    fn prints_broker_exactly() {
        let spec = parse_csp(BROKER).unwrap();
        assert_eq!(print_csp(&spec), BROKER);
    }

    #[test]
    fn skip_process() {
        let spec = parse_csp("P() = Skip;").unwrap();
        assert_eq!(spec.definitions[0].body, Process::Skip);
        assert_eq!(print_csp(&spec), "P() = Skip;\n");
    }

    #[test]
    fn external_choice_of_calls() {
        let text = "P() = a -> Skip; (Q [] R); Q() = b -> Skip; R() = c -> Skip;";
        let spec = parse_csp(text).unwrap();
        assert_eq!(
            spec.definitions[0].body,
            Process::Seq(vec![
                Process::event("a", Process::Skip),
                Process::ExtChoice(vec![Process::Call("Q".into()), Process::Call("R".into())]),
            ])
        );
        assert_eq!(tokens(&print_csp(&spec)), tokens(text));
    }

    #[test]
    fn event_choice_prints_with_star_operator() {
        let body = Process::EventChoice(vec![
            Process::recv(&MessageRef::new("c", "m1"), Process::Skip),
            Process::recv(&MessageRef::new("c", "m2"), Process::Skip),
        ]);
        assert_eq!(print_process(&body), "(c?m1 -> Skip [*] c?m2 -> Skip)");
    }

    #[test]
    fn undeclared_channel_is_an_error() {
        let err = parse_csp("P() = c!m -> Skip;").unwrap_err();
        assert_eq!(
            err,
            CspError::UndeclaredChannel { channel: "c".into(), definition: "P".into() }
        );
    }

    #[test]
    fn unguarded_event_choice_is_an_error() {
        let err = parse_csp("P() = (a -> Skip [*] b -> Skip);").unwrap_err();
        assert_eq!(err, CspError::EventChoiceWithoutReceive("P".into()));
    }

    #[test]
    fn parse_errors_have_locations() {
        let err = parse_csp("P() = a -> ;").unwrap_err();
        assert!(matches!(err, CspError::Parse { line: 1, column: 12, .. }), "{err}");
        let err = parse_csp("P() = (a -> Skip || b -> Skip [] c -> Skip);").unwrap_err();
        assert!(matches!(err, CspError::Parse { .. }), "{err}");
    }

    #[test]
    fn system_line_round_trips() {
        let text = "P() = Skip;\nQ() = Skip;\nSystem() = P || Q;\n";
        let spec = parse_csp(text).unwrap();
        assert_eq!(spec.system, ["P", "Q"]);
        assert_eq!(print_csp(&spec), text);
    }
}
