//! Structured textual form of a collaboration model.
//!
//! ```text
//! spec   := pools "messages" "{" msg* "}"
//! pools  := pool ("||" pool)*
//! pool   := "pool" "(" ident "," elems ")"
//! elems  := elem (";" elem)*
//! elem   := "task(" sf "," sf ")"
//!         | ("sndTask" | "rcvTask") "(" sf ",(" ident "," ident ")," sf ")"
//!         | ("andGate" | "xorGate" | "eventbaseGate") "(" sf ",(" branch ("," branch)* ")," sf ")"
//! branch := "(" elems ")"
//! msg    := "(" ident "(" ident "," ident ")" "," ident ")"
//! ```
//!
//! `//` starts a comment running to the end of the line.

use super::{CollaborationModel, Element, GateKind, MessageFlow, MessageRef, Pool};
use std::collections::BTreeSet;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BnfError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate pool name `{0}`")]
    DuplicatePool(String),
    #[error("duplicate message {0}")]
    DuplicateMessage(MessageRef),
    #[error("pool `{pool}` references message {message} which is not declared in the message list")]
    UndeclaredMessage { pool: String, message: MessageRef },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Par,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("`{name}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Par => "`||`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, BnfError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let (start_line, start_column) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(tok) = single {
            bump(&mut chars);
            out.push(Spanned { tok, line: start_line, column: start_column });
            continue;
        }
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '|' {
            bump(&mut chars);
            if chars.peek() != Some(&'|') {
                return Err(BnfError::Syntax {
                    line: start_line,
                    column: start_column,
                    message: "expected `||`".into(),
                });
            }
            bump(&mut chars);
            out.push(Spanned { tok: Tok::Par, line: start_line, column: start_column });
        } else if c == '/' {
            bump(&mut chars);
            if chars.peek() != Some(&'/') {
                return Err(BnfError::Syntax {
                    line: start_line,
                    column: start_column,
                    message: "unexpected character `/`".into(),
                });
            }
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&c) = chars.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                ident.push(c);
                bump(&mut chars);
            }
            out.push(Spanned { tok: Tok::Ident(ident), line: start_line, column: start_column });
        } else {
            return Err(BnfError::Syntax {
                line: start_line,
                column: start_column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn error(&self, message: impl Into<String>) -> BnfError {
        let (line, column) = self
            .toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end);
        BnfError::Syntax { line, column, message: message.into() }
    }

    fn expect(&mut self, want: Tok) -> Result<(), BnfError> {
        match self.peek() {
            Some(tok) if *tok == want => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(self.error(format!("expected {}, found {}", want.describe(), tok.describe()))),
            None => Err(self.error(format!("expected {}, found end of input", want.describe()))),
        }
    }

    fn ident(&mut self) -> Result<String, BnfError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            Some(tok) => Err(self.error(format!("expected identifier, found {}", tok.describe()))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), BnfError> {
        match self.peek() {
            Some(Tok::Ident(name)) if name == word => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{word}`"))),
        }
    }

    fn spec(&mut self) -> Result<CollaborationModel, BnfError> {
        let mut pools = Vec::new();
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == "pool") {
            pools.push(self.pool()?);
            while self.peek() == Some(&Tok::Par) {
                self.pos += 1;
                pools.push(self.pool()?);
            }
        }
        self.keyword("messages")?;
        self.expect(Tok::LBrace)?;
        let mut message_flows = Vec::new();
        while self.peek() == Some(&Tok::LParen) {
            message_flows.push(self.message()?);
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            }
        }
        self.expect(Tok::RBrace)?;
        if let Some(tok) = self.peek() {
            return Err(self.error(format!("unexpected {} after message list", tok.describe())));
        }
        Ok(CollaborationModel { pools, message_flows })
    }

    fn pool(&mut self) -> Result<Pool, BnfError> {
        self.keyword("pool")?;
        self.expect(Tok::LParen)?;
        let name = self.ident()?;
        self.expect(Tok::Comma)?;
        let elements = self.elements()?;
        self.expect(Tok::RParen)?;
        Ok(Pool { name, elements })
    }

    fn elements(&mut self) -> Result<Vec<Element>, BnfError> {
        let mut out = vec![self.element()?];
        while self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
            out.push(self.element()?);
        }
        Ok(out)
    }

    fn message_ref(&mut self) -> Result<MessageRef, BnfError> {
        self.expect(Tok::LParen)?;
        let channel = self.ident()?;
        self.expect(Tok::Comma)?;
        let message = self.ident()?;
        self.expect(Tok::RParen)?;
        Ok(MessageRef { channel, message })
    }

    fn element(&mut self) -> Result<Element, BnfError> {
        let start = self.pos;
        let kind = self.ident()?;
        if !matches!(
            kind.as_str(),
            "task" | "sndTask" | "rcvTask" | "andGate" | "xorGate" | "eventbaseGate"
        ) {
            self.pos = start;
            return Err(self.error(format!("unknown element kind `{kind}`")));
        }
        self.expect(Tok::LParen)?;
        let input = self.ident()?;
        self.expect(Tok::Comma)?;
        let element = match kind.as_str() {
            "task" => Element::Task { input, output: self.ident()? },
            "sndTask" | "rcvTask" => {
                let message = self.message_ref()?;
                self.expect(Tok::Comma)?;
                let output = self.ident()?;
                if kind == "sndTask" {
                    Element::SndTask { input, message, output }
                } else {
                    Element::RcvTask { input, message, output }
                }
            }
            "andGate" | "xorGate" | "eventbaseGate" => {
                let kind = match kind.as_str() {
                    "andGate" => GateKind::And,
                    "xorGate" => GateKind::Xor,
                    _ => GateKind::Event,
                };
                self.expect(Tok::LParen)?;
                let mut branches = vec![self.branch()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    branches.push(self.branch()?);
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Comma)?;
                let output = self.ident()?;
                Element::Gate { kind, input, branches, output }
            }
            _ => unreachable!("element kind checked above"),
        };
        self.expect(Tok::RParen)?;
        Ok(element)
    }

    fn branch(&mut self) -> Result<Vec<Element>, BnfError> {
        self.expect(Tok::LParen)?;
        let elements = self.elements()?;
        self.expect(Tok::RParen)?;
        Ok(elements)
    }

    fn message(&mut self) -> Result<MessageFlow, BnfError> {
        self.expect(Tok::LParen)?;
        let channel = self.ident()?;
        self.expect(Tok::LParen)?;
        let sender = self.ident()?;
        self.expect(Tok::Comma)?;
        let receiver = self.ident()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Comma)?;
        let message = self.ident()?;
        self.expect(Tok::RParen)?;
        Ok(MessageFlow { channel, sender, receiver, message })
    }
}

/// Parses the structured textual form. Checks identifier uniqueness and that
/// every message a task refers to is declared; all other invariants are left
/// to [`super::validate_model`].
pub fn parse_bnf_text(text: &str) -> Result<CollaborationModel, BnfError> {
    let toks = lex(text)?;
    let lines = text.split('\n').collect::<Vec<_>>();
    let end = (lines.len(), lines.last().map_or(0, |l| l.chars().count()) + 1);
    let model = Parser { toks, pos: 0, end }.spec()?;

    let mut names = BTreeSet::new();
    for pool in &model.pools {
        if !names.insert(&pool.name) {
            return Err(BnfError::DuplicatePool(pool.name.clone()));
        }
    }
    let mut declared = BTreeSet::new();
    for flow in &model.message_flows {
        if !declared.insert(flow.message_ref()) {
            return Err(BnfError::DuplicateMessage(flow.message_ref()));
        }
    }
    for pool in &model.pools {
        let mut missing = None;
        super::walk_elements(&pool.elements, &mut |element| match element {
            Element::SndTask { message, .. } | Element::RcvTask { message, .. }
                if missing.is_none() && !declared.contains(message) =>
            {
                missing = Some(message.clone());
            }
            _ => {}
        });
        if let Some(message) = missing {
            return Err(BnfError::UndeclaredMessage { pool: pool.name.clone(), message });
        }
    }
    Ok(model)
}

fn write_elements(out: &mut String, elements: &[Element]) {
    for (i, element) in elements.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        match element {
            Element::Task { input, output } => {
                let _ = write!(out, "task({input},{output})");
            }
            Element::SndTask { input, message, output } => {
                let _ = write!(out, "sndTask({input},{message},{output})");
            }
            Element::RcvTask { input, message, output } => {
                let _ = write!(out, "rcvTask({input},{message},{output})");
            }
            Element::Gate { kind, input, branches, output } => {
                let _ = write!(out, "{}({input},(", kind.keyword());
                for (j, branch) in branches.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    out.push('(');
                    write_elements(out, branch);
                    out.push(')');
                }
                let _ = write!(out, "),{output})");
            }
        }
    }
}

/// Canonical text: one pool per line, then the message list one entry per line.
pub fn print_bnf(model: &CollaborationModel) -> String {
    let mut out = String::new();
    for (i, pool) in model.pools.iter().enumerate() {
        if i > 0 {
            out.push_str("|| ");
        }
        let _ = write!(out, "pool({}, ", pool.name);
        write_elements(&mut out, &pool.elements);
        out.push_str(")\n");
    }
    out.push_str("messages {\n");
    for flow in &model.message_flows {
        let _ = writeln!(
            out,
            "  ({}({},{}),{})",
            flow.channel, flow.sender, flow.receiver, flow.message
        );
    }
    out.push_str("}\n");
    out
}
