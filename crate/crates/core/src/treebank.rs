//! Bracketed constituency trees and context-free production counts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Error;

/// A constituency tree node.
///
/// Leaves are preterminals: they carry the POS label and the token, and
/// have no children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
    pub token: Option<String>,
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>, token: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
            token: Some(token.into()),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        Self {
            label: label.into(),
            children,
            token: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    /// Terminal tokens in left-to-right order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(n) = stack.pop() {
            if let Some(t) = &n.token {
                out.push(t.as_str());
            }
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Bracketed form, e.g. `(NP (NR x))`. Parses back to an equal tree.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out);
        out
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        if let Some(t) = &self.token {
            out.push(' ');
            out.push_str(t);
        }
        for c in &self.children {
            out.push(' ');
            c.write_bracketed(out);
        }
        out.push(')');
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

impl FromStr for ParseTree {
    type Err = TreeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bracketed_tree(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TreeParseError {
    #[error("unexpected end of input at byte {0}")]
    UnexpectedEnd(usize),
    #[error("empty constituent at byte {0}")]
    EmptyConstituent(usize),
    #[error("unexpected ')' at byte {0}")]
    UnbalancedClose(usize),
    #[error("expected '(' at byte {0}")]
    ExpectedOpen(usize),
    #[error("constituent mixes a bare token with other content at byte {0}")]
    MixedConstituent(usize),
    #[error("trailing input at byte {0}")]
    TrailingInput(usize),
}

struct Frame {
    label: String,
    children: Vec<ParseTree>,
    token: Option<String>,
    open: usize,
}

fn is_atom_byte(b: u8) -> bool {
    !(b == b'(' || b == b')' || b.is_ascii_whitespace())
}

/// Parses one bracketed tree such as `(TOP (IP (VP (VV 走))))`.
///
/// Whitespace between tokens is insignificant. Error offsets are byte offsets
/// into `text`.
pub fn parse_bracketed_tree(text: &str) -> Result<ParseTree, TreeParseError> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let skip_ws = |mut i: usize| {
        while i < len && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        i
    };
    let read_atom = |start: usize| {
        let mut i = start;
        while i < len && is_atom_byte(bytes[i]) {
            i += 1;
        }
        i
    };

    let mut pos = skip_ws(0);
    if pos >= len {
        return Err(TreeParseError::UnexpectedEnd(len));
    }
    if bytes[pos] != b'(' {
        return Err(TreeParseError::ExpectedOpen(pos));
    }

    let mut stack: Vec<Frame> = Vec::new();
    loop {
        pos = skip_ws(pos);
        if pos >= len {
            return Err(TreeParseError::UnexpectedEnd(len));
        }
        match bytes[pos] {
            b'(' => {
                let open = pos;
                if let Some(top) = stack.last() {
                    if top.token.is_some() {
                        return Err(TreeParseError::MixedConstituent(open));
                    }
                }
                let start = skip_ws(pos + 1);
                let end = read_atom(start);
                if end == start {
                    return Err(TreeParseError::EmptyConstituent(open));
                }
                stack.push(Frame {
                    label: text[start..end].to_string(),
                    children: Vec::new(),
                    token: None,
                    open,
                });
                pos = end;
            }
            b')' => {
                let frame = stack.pop().ok_or(TreeParseError::UnbalancedClose(pos))?;
                if frame.token.is_none() && frame.children.is_empty() {
                    return Err(TreeParseError::EmptyConstituent(frame.open));
                }
                let tree = ParseTree {
                    label: frame.label,
                    children: frame.children,
                    token: frame.token,
                };
                pos += 1;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(tree),
                    None => {
                        let rest = skip_ws(pos);
                        if rest < len {
                            return Err(TreeParseError::TrailingInput(rest));
                        }
                        return Ok(tree);
                    }
                }
            }
            _ => {
                let end = read_atom(pos);
                let top = stack.last_mut().ok_or(TreeParseError::ExpectedOpen(pos))?;
                if top.token.is_some() || !top.children.is_empty() {
                    return Err(TreeParseError::MixedConstituent(pos));
                }
                top.token = Some(text[pos..end].to_string());
                pos = end;
            }
        }
    }
}

/// A context-free rule `lhs → rhs…`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<String>,
}

impl Production {
    pub fn new<I, S>(lhs: impl Into<String>, rhs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            lhs: lhs.into(),
            rhs: rhs.into_iter().map(Into::into).collect(),
        }
    }

    /// Canonical text form: `LHS → S1 S2`.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} →", self.lhs)?;
        for s in &self.rhs {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

impl FromStr for Production {
    type Err = Error;

    /// Accepts `→` or `->` as the arrow and any whitespace between symbols.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once('→')
            .or_else(|| s.split_once("->"))
            .ok_or_else(|| Error::InvalidProduction(s.to_string()))?;
        let lhs = lhs.trim();
        let rhs: Vec<&str> = rhs.split_whitespace().collect();
        if lhs.is_empty() || lhs.contains(char::is_whitespace) || rhs.is_empty() {
            return Err(Error::InvalidProduction(s.to_string()));
        }
        Ok(Production::new(lhs, rhs))
    }
}

/// One production per internal node, in pre-order.
///
/// With `include_lexical` the preterminal rules (`PN → 我`) are emitted too.
pub fn extract_productions(tree: &ParseTree, include_lexical: bool) -> Vec<Production> {
    let mut out = Vec::new();
    let mut stack = alloc::vec![tree];
    while let Some(n) = stack.pop() {
        match &n.token {
            Some(tok) => {
                if include_lexical {
                    out.push(Production::new(n.label.clone(), [tok.clone()]));
                }
            }
            None => {
                out.push(Production::new(
                    n.label.clone(),
                    n.children.iter().map(|c| c.label.clone()),
                ));
                stack.extend(n.children.iter().rev());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionTable {
    counts: BTreeMap<Production, u64>,
    total: u64,
}

impl ProductionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_trees(trees: &[ParseTree], include_lexical: bool) -> Self {
        let mut table = Self::new();
        for t in trees {
            for p in extract_productions(t, include_lexical) {
                table.add(p, 1);
            }
        }
        table
    }

    /// Adding a zero count is a no-op so every stored count stays positive.
    pub fn add(&mut self, production: Production, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(production).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: &ProductionTable) {
        for (p, &c) in &other.counts {
            self.add(p.clone(), c);
        }
    }

    pub fn count(&self, production: &Production) -> u64 {
        self.counts.get(production).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct productions.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Production, u64)> {
        self.counts.iter().map(|(p, &c)| (p, c))
    }
}

impl FromIterator<(Production, u64)> for ProductionTable {
    fn from_iter<T: IntoIterator<Item = (Production, u64)>>(iter: T) -> Self {
        let mut t = Self::new();
        for (p, c) in iter {
            t.add(p, c);
        }
        t
    }
}

/// Non-lexical production counts over all trees.
pub fn count_productions(trees: &[ParseTree]) -> ProductionTable {
    ProductionTable::from_trees(trees, false)
}
