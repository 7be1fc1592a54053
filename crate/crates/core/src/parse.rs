//! Line-oriented text format for knowledge bases and single axioms.
//!
//! ```text
//! # blood cells
//! tbox:
//!   BRBC <= MRBC
//!   (some hasN. top) & NotN <= bot
//!   A == B
//! dbox:
//!   VRBC <~ some hasN. top
//!   <a> <~ NotN
//! ```
//!
//! `&` is conjunction, `some r. C` an existential (scoping over one primary),
//! `{a}` a nominal and `<a>` a defeasible nominal. `==` is only legal in the
//! tbox and expands to two inclusions.

use std::fmt;

use thiserror::Error;

use crate::model::{Axiom, Concept, DefeasibleGci, KnowledgeBase, Name, StrictGci, RESERVED_PREFIX};

#[derive(Clone, Debug)]
pub struct SourceDocument {
    pub text: String,
    pub origin: String,
}

impl SourceDocument {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceDocument { text: text.into(), origin: origin.into() }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        SourceDocument::new(text, "<inline>")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AxiomKind {
    Strict,
    Defeasible,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    TBox,
    DBox,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Op {
    Sub,
    DefSub,
    Equiv,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Sub => "<=",
            Op::DefSub => "<~",
            Op::Equiv => "==",
        })
    }
}

pub fn parse_kb(doc: &SourceDocument) -> Result<KnowledgeBase, ParseError> {
    let mut kb = KnowledgeBase::default();
    let mut section = None;
    let mut seen_tbox = false;
    let mut seen_dbox = false;

    for (idx, raw) in doc.text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if trimmed == "tbox:" || trimmed == "dbox:" {
            let (seen, s) = if trimmed == "tbox:" {
                (&mut seen_tbox, Section::TBox)
            } else {
                (&mut seen_dbox, Section::DBox)
            };
            if *seen {
                return Err(ParseError {
                    line: line_no,
                    column: indent + 1,
                    message: format!("duplicate section header `{}`", trimmed),
                });
            }
            *seen = true;
            section = Some(s);
            continue;
        }
        let Some(section) = section else {
            return Err(ParseError {
                line: line_no,
                column: indent + 1,
                message: "axiom outside of a `tbox:` or `dbox:` section".into(),
            });
        };
        let mut p = Parser::new(content, line_no);
        let (lhs, op, rhs, op_col) = p.axiom()?;
        match (section, op) {
            (Section::TBox, Op::Sub) => {
                kb.tbox.insert(StrictGci::new(lhs, rhs));
            }
            (Section::TBox, Op::Equiv) => {
                kb.tbox.insert(StrictGci::new(lhs.clone(), rhs.clone()));
                kb.tbox.insert(StrictGci::new(rhs, lhs));
            }
            (Section::DBox, Op::DefSub) => {
                kb.dbox.insert(DefeasibleGci::new(lhs, rhs));
            }
            (Section::TBox, Op::DefSub) | (Section::DBox, _) => {
                let where_ = if section == Section::TBox { "tbox" } else { "dbox" };
                return Err(ParseError {
                    line: line_no,
                    column: op_col,
                    message: format!("`{}` is not allowed in the {} section", op, where_),
                });
            }
        }
    }
    Ok(kb)
}

/// Parses one axiom of the requested kind.
pub fn parse_axiom(text: &str, kind: AxiomKind) -> Result<Axiom, ParseError> {
    let ax = parse_query(text)?;
    match (kind, &ax) {
        (AxiomKind::Strict, Axiom::Strict(_)) | (AxiomKind::Defeasible, Axiom::Defeasible(_)) => Ok(ax),
        _ => {
            let expected = if kind == AxiomKind::Strict { "<=" } else { "<~" };
            let col = text.find(['<', '=']).map_or(1, |i| i + 1);
            Err(ParseError { line: 1, column: col, message: format!("expected a `{}` axiom", expected) })
        }
    }
}

/// Parses one axiom, taking its kind from the operator (`<=` or `<~`).
pub fn parse_query(text: &str) -> Result<Axiom, ParseError> {
    if text.contains('\n') {
        let line = text.lines().count().max(1);
        return Err(ParseError { line, column: 1, message: "a single axiom must fit on one line".into() });
    }
    let content = text.split('#').next().unwrap_or("");
    let mut p = Parser::new(content, 1);
    let (lhs, op, rhs, op_col) = p.axiom()?;
    match op {
        Op::Sub => Ok(Axiom::Strict(StrictGci::new(lhs, rhs))),
        Op::DefSub => Ok(Axiom::Defeasible(DefeasibleGci::new(lhs, rhs))),
        Op::Equiv => Err(ParseError {
            line: 1,
            column: op_col,
            message: "`==` is only allowed inside a tbox section".into(),
        }),
    }
}

/// Parses a single concept expression.
pub fn parse_concept(text: &str) -> Result<Concept, ParseError> {
    let mut p = Parser::new(text, 1);
    let c = p.concept()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(c.canonical())
}

/// Deterministic text form; axioms sorted by their printed form.
pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::from("tbox:\n");
    let mut lines: Vec<String> = kb.tbox.iter().map(|g| g.to_string()).collect();
    lines.sort();
    for l in lines {
        out.push_str("  ");
        out.push_str(&l);
        out.push('\n');
    }
    out.push_str("dbox:\n");
    let mut lines: Vec<String> = kb.dbox.iter().map(|g| g.to_string()).collect();
    lines.sort();
    for l in lines {
        out.push_str("  ");
        out.push_str(&l);
        out.push('\n');
    }
    out
}

impl fmt::Display for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_kb(self))
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, line, _src: src }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.pos + 1, message: message.into() }
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: pos + 1, message: message.into() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c)))
        }
    }

    fn axiom(&mut self) -> Result<(Concept, Op, Concept, usize), ParseError> {
        let lhs = self.concept()?;
        self.skip_ws();
        let op_pos = self.pos;
        let op = match (self.peek(), self.peek2()) {
            (Some('<'), Some('=')) => Op::Sub,
            (Some('<'), Some('~')) => Op::DefSub,
            (Some('='), Some('=')) => Op::Equiv,
            _ => return Err(self.error("expected `<=`, `<~` or `==`")),
        };
        self.pos += 2;
        let rhs = self.concept()?;
        self.skip_ws();
        if !self.at_end() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok((lhs, op, rhs, op_pos + 1))
    }

    fn concept(&mut self) -> Result<Concept, ParseError> {
        let mut ops = vec![self.primary()?];
        loop {
            self.skip_ws();
            if self.peek() == Some('&') {
                self.pos += 1;
                ops.push(self.primary()?);
            } else {
                break;
            }
        }
        Ok(if ops.len() == 1 { ops.pop().unwrap() } else { Concept::And(ops) })
    }

    fn primary(&mut self) -> Result<Concept, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("expected a concept")),
            Some('(') => {
                self.pos += 1;
                let c = self.concept()?;
                self.expect(')')?;
                Ok(c)
            }
            Some('{') => {
                self.pos += 1;
                let n = self.name()?;
                self.expect('}')?;
                Ok(Concept::Nominal(n))
            }
            Some('<') if !matches!(self.peek2(), Some('=') | Some('~')) => {
                self.pos += 1;
                let n = self.name()?;
                self.expect('>')?;
                Ok(Concept::DefNominal(n))
            }
            Some(c) if is_name_start(c) => {
                let start = self.pos;
                let word = self.scan_word();
                match word.as_str() {
                    "top" => Ok(Concept::Top),
                    "bot" => Ok(Concept::Bot),
                    "some" => {
                        let role = self.role()?;
                        let filler = self.primary()?;
                        Ok(Concept::Exists(role, Box::new(filler)))
                    }
                    _ => Ok(Concept::Atom(self.check_name(word, start)?)),
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{}`", c))),
        }
    }

    fn scan_word(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if is_name_char(c)) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn name(&mut self) -> Result<Name, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if is_name_start(c) => {}
            _ => return Err(self.error("expected a name")),
        }
        let word = self.scan_word();
        self.check_name(word, start)
    }

    /// Role position of `some r. C`: the role ends at the last `.` of the
    /// scanned word, so both `some r. C` and `some r.C` parse.
    fn role(&mut self) -> Result<Name, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if is_name_start(c) => {}
            _ => return Err(self.error("expected a role name after `some`")),
        }
        let word = self.scan_word();
        match word.rfind('.') {
            Some(dot) if dot > 0 => {
                self.pos = start + dot + 1;
                self.check_name(word[..dot].to_string(), start)
            }
            _ => {
                let role = self.check_name(word, start)?;
                self.expect('.')?;
                Ok(role)
            }
        }
    }

    fn check_name(&self, word: String, start: usize) -> Result<Name, ParseError> {
        if word.starts_with(RESERVED_PREFIX) {
            return Err(self.error_at(
                start,
                format!("symbol `{}` uses the reserved prefix `{}`", word, RESERVED_PREFIX),
            ));
        }
        if matches!(word.as_str(), "top" | "bot" | "some") {
            return Err(self.error_at(start, format!("`{}` is a keyword, not a name", word)));
        }
        Ok(Name::from(word))
    }
}
