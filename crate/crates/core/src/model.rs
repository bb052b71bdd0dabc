//! Feature models: a line-oriented text format and compilation to CNF.
//!
//! ```text
//! car
//!   m body            # mandatory child
//!   o power_locks     # optional child
//!     o keyless_entry
//!   m engine
//!     or              # at least one member
//!       electric
//!       gas
//! constraints:
//!   keyless_entry => power_locks
//! ```
//!
//! Indentation is two spaces per level. Group members sit one level below
//! their `or`/`alt` header and may carry children of their own.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::cnf::{Cnf, CnfError};

/// Per-constraint clause cap of [`to_cnf`].
pub const MAX_CONSTRAINT_CLAUSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid feature model: {0}")]
    Invalid(String),
    #[error("constraint {index} needs more than {limit} clauses without auxiliary variables")]
    ConstraintTooLarge { index: usize, limit: usize },
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub children: Vec<ChildEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChildEntry {
    Mandatory(Feature),
    Optional(Feature),
    OrGroup(Vec<Feature>),
    AltGroup(Vec<Feature>),
}

impl ChildEntry {
    pub fn features(&self) -> &[Feature] {
        match self {
            ChildEntry::Mandatory(f) | ChildEntry::Optional(f) => std::slice::from_ref(f),
            ChildEntry::OrGroup(fs) | ChildEntry::AltGroup(fs) => fs,
        }
    }
}

impl Feature {
    pub fn leaf(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropFormula {
    Var(String),
    Not(Box<PropFormula>),
    And(Box<PropFormula>, Box<PropFormula>),
    Or(Box<PropFormula>, Box<PropFormula>),
    Implies(Box<PropFormula>, Box<PropFormula>),
    Iff(Box<PropFormula>, Box<PropFormula>),
}

impl PropFormula {
    pub fn eval(&self, value: &impl Fn(&str) -> bool) -> bool {
        match self {
            PropFormula::Var(name) => value(name),
            PropFormula::Not(f) => !f.eval(value),
            PropFormula::And(a, b) => a.eval(value) && b.eval(value),
            PropFormula::Or(a, b) => a.eval(value) || b.eval(value),
            PropFormula::Implies(a, b) => !a.eval(value) || b.eval(value),
            PropFormula::Iff(a, b) => a.eval(value) == b.eval(value),
        }
    }

    fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            PropFormula::Var(name) => f(name),
            PropFormula::Not(x) => x.visit_vars(f),
            PropFormula::And(a, b)
            | PropFormula::Or(a, b)
            | PropFormula::Implies(a, b)
            | PropFormula::Iff(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

impl fmt::Display for PropFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropFormula::Var(name) => write!(f, "{name}"),
            PropFormula::Not(x) => write!(f, "!{x}"),
            PropFormula::And(a, b) => write!(f, "({a} & {b})"),
            PropFormula::Or(a, b) => write!(f, "({a} | {b})"),
            PropFormula::Implies(a, b) => write!(f, "({a} => {b})"),
            PropFormula::Iff(a, b) => write!(f, "({a} <=> {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureModel {
    root: Feature,
    constraints: Vec<PropFormula>,
}

impl FeatureModel {
    pub fn new(root: Feature, constraints: Vec<PropFormula>) -> Result<Self, ModelError> {
        let fm = Self { root, constraints };
        fm.validate()?;
        Ok(fm)
    }

    pub fn root(&self) -> &Feature {
        &self.root
    }

    pub fn constraints(&self) -> &[PropFormula] {
        &self.constraints
    }

    /// Feature names in depth-first pre-order.
    pub fn feature_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        preorder(&self.root, &mut |f| out.push(f.name.as_str()));
        out
    }

    pub fn num_features(&self) -> usize {
        self.feature_names().len()
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut seen = HashSet::new();
        let mut problem = None;
        preorder(&self.root, &mut |f| {
            if problem.is_some() {
                return;
            }
            if !is_identifier(&f.name) {
                problem = Some(format!("`{}` is not a valid feature name", f.name));
            } else if !seen.insert(f.name.clone()) {
                problem = Some(format!("duplicate feature `{}`", f.name));
            } else if f.children.iter().any(|c| c.features().is_empty()) {
                problem = Some(format!("empty group under `{}`", f.name));
            }
        });
        if let Some(p) = problem {
            return Err(ModelError::Invalid(p));
        }
        for c in &self.constraints {
            let mut unknown = None;
            c.visit_vars(&mut |v| {
                if unknown.is_none() && !seen.contains(v) {
                    unknown = Some(v.to_string());
                }
            });
            if let Some(v) = unknown {
                return Err(ModelError::Invalid(format!(
                    "constraint references unknown feature `{v}`"
                )));
            }
        }
        Ok(())
    }

    /// Renders the model in the textual format accepted by
    /// [`parse_feature_model`].
    pub fn to_text(&self) -> String {
        fn write(f: &Feature, indent: usize, out: &mut String) {
            for entry in &f.children {
                let pad = " ".repeat(indent + 2);
                match entry {
                    ChildEntry::Mandatory(c) | ChildEntry::Optional(c) => {
                        let tag = if matches!(entry, ChildEntry::Mandatory(_)) { "m" } else { "o" };
                        out.push_str(&format!("{pad}{tag} {}\n", c.name));
                        write(c, indent + 2, out);
                    }
                    ChildEntry::OrGroup(cs) | ChildEntry::AltGroup(cs) => {
                        let tag = if matches!(entry, ChildEntry::OrGroup(_)) { "or" } else { "alt" };
                        out.push_str(&format!("{pad}{tag}\n"));
                        for c in cs {
                            out.push_str(&format!("{pad}  {}\n", c.name));
                            write(c, indent + 4, out);
                        }
                    }
                }
            }
        }
        let mut out = format!("{}\n", self.root.name);
        write(&self.root, 0, &mut out);
        if !self.constraints.is_empty() {
            out.push_str("constraints:\n");
            for c in &self.constraints {
                out.push_str(&format!("  {c}\n"));
            }
        }
        out
    }

    /// Checks a selection directly against the tree semantics, independent of
    /// the CNF encoding.
    pub fn is_valid_configuration(&self, selected: &impl Fn(&str) -> bool) -> bool {
        fn feature_ok(f: &Feature, selected: &impl Fn(&str) -> bool) -> bool {
            let on = selected(&f.name);
            f.children.iter().all(|entry| {
                let members = entry.features();
                let count = members.iter().filter(|c| selected(&c.name)).count();
                let group_ok = if !on {
                    count == 0
                } else {
                    match entry {
                        ChildEntry::Mandatory(_) => count == 1,
                        ChildEntry::Optional(_) => true,
                        ChildEntry::OrGroup(_) => count >= 1,
                        ChildEntry::AltGroup(_) => count == 1,
                    }
                };
                group_ok && members.iter().all(|c| feature_ok(c, selected))
            })
        }
        selected(&self.root.name)
            && feature_ok(&self.root, selected)
            && self.constraints.iter().all(|c| c.eval(selected))
    }
}

fn preorder<'a>(f: &'a Feature, visit: &mut impl FnMut(&'a Feature)) {
    visit(f);
    for entry in &f.children {
        for child in entry.features() {
            preorder(child, visit);
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Bijection between feature names and 1-based CNF variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl VariableMap {
    fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i + 1))
            .collect();
        Self { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, var: usize) -> Option<&str> {
        var.checked_sub(1)
            .and_then(|i| self.names.get(i))
            .map(String::as_str)
    }

    /// `(variable, name)` pairs in variable order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (i + 1, n.as_str()))
    }

    /// One `<index> <feature>` line per variable.
    pub fn to_map_file(&self) -> String {
        self.iter().map(|(v, n)| format!("{v} {n}\n")).collect()
    }
}

/// Compiles a feature model into CNF.
///
/// Clause order: the root unit clause; for every non-root feature in
/// pre-order, `(!child | parent)` followed by `(!parent | child)` when the
/// child is mandatory; one `(!parent | members...)` per or-group; per
/// alternative group the same clause plus pairwise `(!a | !b)`; then each
/// constraint through NNF and distribution.
pub fn to_cnf(fm: &FeatureModel) -> Result<(Cnf, VariableMap), ModelError> {
    let names: Vec<String> = fm.feature_names().into_iter().map(String::from).collect();
    let map = VariableMap::from_names(names);
    let var = |name: &str| map.var(name).expect("validated feature") as i32;

    let mut hierarchy: Vec<Vec<i32>> = vec![vec![1]];
    let mut or_groups: Vec<Vec<i32>> = Vec::new();
    let mut alt_groups: Vec<Vec<i32>> = Vec::new();
    preorder(&fm.root, &mut |f| {
        let p = var(&f.name);
        for entry in &f.children {
            let members: Vec<i32> = entry.features().iter().map(|m| var(&m.name)).collect();
            let group_clause = || std::iter::once(-p).chain(members.iter().copied()).collect();
            match entry {
                ChildEntry::OrGroup(_) => or_groups.push(group_clause()),
                ChildEntry::AltGroup(_) => {
                    alt_groups.push(group_clause());
                    for (i, &a) in members.iter().enumerate() {
                        for &b in &members[i + 1..] {
                            alt_groups.push(vec![-a, -b]);
                        }
                    }
                }
                _ => {}
            }
        }
    });
    hierarchy_clauses(&fm.root, &var, &mut hierarchy);

    let mut clauses = hierarchy;
    clauses.extend(or_groups);
    clauses.extend(alt_groups);
    for (i, constraint) in fm.constraints.iter().enumerate() {
        let nnf = Nnf::from_formula(constraint, true, &var);
        let cnf = nnf
            .to_clauses(MAX_CONSTRAINT_CLAUSES)
            .ok_or(ModelError::ConstraintTooLarge {
                index: i + 1,
                limit: MAX_CONSTRAINT_CLAUSES,
            })?;
        clauses.extend(cnf);
    }
    let cnf = Cnf::new(map.len(), clauses)?;
    Ok((cnf, map))
}

/// Child/parent implications, one child at a time in pre-order.
fn hierarchy_clauses(f: &Feature, var: &impl Fn(&str) -> i32, out: &mut Vec<Vec<i32>>) {
    let p = var(&f.name);
    for entry in &f.children {
        for child in entry.features() {
            let c = var(&child.name);
            out.push(vec![-c, p]);
            if matches!(entry, ChildEntry::Mandatory(_)) {
                out.push(vec![-p, c]);
            }
            hierarchy_clauses(child, var, out);
        }
    }
}

enum Nnf {
    Lit(i32),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

impl Nnf {
    fn from_formula(f: &PropFormula, positive: bool, var: &impl Fn(&str) -> i32) -> Nnf {
        use PropFormula::*;
        let pos = |x: &PropFormula| Nnf::from_formula(x, true, var);
        let neg = |x: &PropFormula| Nnf::from_formula(x, false, var);
        match (f, positive) {
            (Var(name), true) => Nnf::Lit(var(name)),
            (Var(name), false) => Nnf::Lit(-var(name)),
            (Not(x), p) => Nnf::from_formula(x, !p, var),
            (And(a, b), true) => Nnf::And(vec![pos(a), pos(b)]),
            (And(a, b), false) => Nnf::Or(vec![neg(a), neg(b)]),
            (Or(a, b), true) => Nnf::Or(vec![pos(a), pos(b)]),
            (Or(a, b), false) => Nnf::And(vec![neg(a), neg(b)]),
            (Implies(a, b), true) => Nnf::Or(vec![neg(a), pos(b)]),
            (Implies(a, b), false) => Nnf::And(vec![pos(a), neg(b)]),
            (Iff(a, b), true) => Nnf::And(vec![
                Nnf::Or(vec![neg(a), pos(b)]),
                Nnf::Or(vec![pos(a), neg(b)]),
            ]),
            (Iff(a, b), false) => Nnf::Or(vec![
                Nnf::And(vec![pos(a), neg(b)]),
                Nnf::And(vec![neg(a), pos(b)]),
            ]),
        }
    }

    /// Distributes to clauses; `None` once any intermediate result exceeds
    /// `cap` clauses. Tautologies are dropped and repeated literals merged.
    fn to_clauses(&self, cap: usize) -> Option<Vec<Vec<i32>>> {
        let out = match self {
            Nnf::Lit(l) => vec![vec![*l]],
            Nnf::And(parts) => {
                let mut acc = Vec::new();
                for p in parts {
                    acc.extend(p.to_clauses(cap)?);
                }
                acc
            }
            Nnf::Or(parts) => {
                // identity of disjunction: a single empty clause
                let mut acc: Vec<Vec<i32>> = vec![Vec::new()];
                for p in parts {
                    let rhs = p.to_clauses(cap)?;
                    let mut next = Vec::new();
                    for a in &acc {
                        for b in &rhs {
                            if let Some(c) = merge_clause(a, b) {
                                next.push(c);
                                if next.len() > cap {
                                    return None;
                                }
                            }
                        }
                    }
                    acc = next;
                }
                acc
            }
        };
        (out.len() <= cap).then_some(out)
    }
}

fn merge_clause(a: &[i32], b: &[i32]) -> Option<Vec<i32>> {
    let mut out = a.to_vec();
    for &l in b {
        if out.contains(&-l) {
            return None;
        }
        if !out.contains(&l) {
            out.push(l);
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy)]
struct Line<'a> {
    number: usize,
    indent: usize,
    text: &'a str,
}

/// Parses the textual feature-model format.
pub fn parse_feature_model(text: &str) -> Result<FeatureModel, ModelError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim_end();
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start_matches(' ').len();
        if content[indent..].starts_with('\t') {
            return Err(parse_error(number, indent + 1, "tabs are not allowed for indentation"));
        }
        lines.push(Line {
            number,
            indent,
            text: &content[indent..],
        });
    }

    let Some(first) = lines.first() else {
        return Err(parse_error(1, 1, "empty feature model"));
    };
    if first.indent != 0 {
        return Err(parse_error(first.number, 1, "root feature must start at column 1"));
    }
    let split = lines
        .iter()
        .position(|l| l.indent == 0 && l.text == "constraints:")
        .unwrap_or(lines.len());
    let (tree_lines, constraint_lines) = lines.split_at(split);

    let mut parser = TreeParser {
        lines: tree_lines,
        pos: 1,
        seen: HashMap::new(),
    };
    let root_name = expect_name(first, first.text)?;
    parser.seen.insert(root_name.to_string(), first.number);
    let children = parser.children(0)?;
    if let Some(extra) = parser.lines.get(parser.pos) {
        return Err(parse_error(
            extra.number,
            extra.indent + 1,
            if extra.indent == 0 {
                "a feature model has exactly one root"
            } else {
                "unexpected indentation"
            },
        ));
    }
    let root = Feature {
        name: root_name.to_string(),
        children,
    };

    let mut constraints = Vec::new();
    for line in constraint_lines.iter().skip(1) {
        let formula = FormulaParser::new(line)?.parse()?;
        let mut unknown = None;
        formula.visit_vars(&mut |v| {
            if unknown.is_none() && !parser.seen.contains_key(v) {
                unknown = Some(v.to_string());
            }
        });
        if let Some(v) = unknown {
            let column = line.indent + line.text.find(v.as_str()).unwrap_or(0) + 1;
            return Err(parse_error(
                line.number,
                column,
                &format!("unknown feature `{v}` in constraint"),
            ));
        }
        constraints.push(formula);
    }
    FeatureModel::new(root, constraints)
}

fn parse_error(line: usize, column: usize, message: &str) -> ModelError {
    ModelError::Parse {
        line,
        column,
        message: message.to_string(),
    }
}

fn expect_name<'a>(line: &Line<'_>, name: &'a str) -> Result<&'a str, ModelError> {
    if is_identifier(name) {
        Ok(name)
    } else {
        let column = line.indent + line.text.len() - name.len() + 1;
        Err(parse_error(
            line.number,
            column,
            &format!("`{name}` is not a valid feature name"),
        ))
    }
}

struct TreeParser<'a, 'b> {
    lines: &'b [Line<'a>],
    pos: usize,
    seen: HashMap<String, usize>,
}

impl<'a> TreeParser<'a, '_> {
    fn peek_at(&self, indent: usize) -> Result<Option<Line<'a>>, ModelError> {
        match self.lines.get(self.pos) {
            Some(l) if l.indent == indent => Ok(Some(*l)),
            Some(l) if l.indent > indent => {
                Err(parse_error(l.number, l.indent + 1, "unexpected indentation"))
            }
            _ => Ok(None),
        }
    }

    fn feature(&mut self, line_no: usize, line: &Line<'_>, name: &str, indent: usize) -> Result<Feature, ModelError> {
        let name = expect_name(line, name)?;
        if let Some(first) = self.seen.insert(name.to_string(), line_no) {
            return Err(parse_error(
                line_no,
                line.indent + line.text.len() - name.len() + 1,
                &format!("duplicate feature `{name}` (first declared on line {first})"),
            ));
        }
        let children = self.children(indent)?;
        Ok(Feature {
            name: name.to_string(),
            children,
        })
    }

    /// Child entries of a feature declared at `indent`.
    fn children(&mut self, indent: usize) -> Result<Vec<ChildEntry>, ModelError> {
        let level = indent + 2;
        let mut entries = Vec::new();
        while let Some(line) = self.peek_at(level)? {
            let number = line.number;
            self.pos += 1;
            let mut words = line.text.split_whitespace();
            let head = words.next().unwrap_or("");
            let rest: Vec<&str> = words.collect();
            match (head, rest.as_slice()) {
                ("m", [name]) => {
                    entries.push(ChildEntry::Mandatory(self.feature(number, &line, name, level)?))
                }
                ("o", [name]) => {
                    entries.push(ChildEntry::Optional(self.feature(number, &line, name, level)?))
                }
                ("or" | "alt", []) => {
                    let members = self.group_members(level)?;
                    if members.is_empty() {
                        return Err(parse_error(number, level + 1, "group has no members"));
                    }
                    entries.push(if head == "or" {
                        ChildEntry::OrGroup(members)
                    } else {
                        ChildEntry::AltGroup(members)
                    });
                }
                _ => {
                    return Err(parse_error(
                        number,
                        level + 1,
                        &format!("expected `m <name>`, `o <name>`, `or` or `alt`, found `{}`", line.text),
                    ))
                }
            }
        }
        Ok(entries)
    }

    fn group_members(&mut self, header_indent: usize) -> Result<Vec<Feature>, ModelError> {
        let level = header_indent + 2;
        let mut members = Vec::new();
        while let Some(line) = self.peek_at(level)? {
            let number = line.number;
            self.pos += 1;
            if line.text.split_whitespace().count() != 1 {
                return Err(parse_error(
                    number,
                    level + 1,
                    "group members are bare feature names",
                ));
            }
            members.push(self.feature(number, &line, line.text, level)?);
        }
        Ok(members)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Iff,
    Open,
    Close,
}

struct FormulaParser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl FormulaParser {
    fn new(line: &Line<'_>) -> Result<Self, ModelError> {
        let text = line.text;
        let bytes = text.as_bytes();
        let column = |i: usize| line.indent + i + 1;
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let (tok, len) = match c {
                b' ' | b'\t' => {
                    i += 1;
                    continue;
                }
                b'!' => (Token::Not, 1),
                b'&' => (Token::And, 1),
                b'|' => (Token::Or, 1),
                b'(' => (Token::Open, 1),
                b')' => (Token::Close, 1),
                b'=' if text[i..].starts_with("=>") => (Token::Implies, 2),
                b'<' if text[i..].starts_with("<=>") => (Token::Iff, 3),
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let len = text[i..]
                        .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                        .unwrap_or(text.len() - i);
                    (Token::Ident(text[i..i + len].to_string()), len)
                }
                _ => {
                    return Err(parse_error(
                        line.number,
                        column(i),
                        &format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                    ))
                }
            };
            tokens.push((tok, column(i)));
            i += len;
        }
        Ok(Self {
            tokens,
            pos: 0,
            line: line.number,
            end_column: column(text.len()),
        })
    }

    fn parse(mut self) -> Result<PropFormula, ModelError> {
        let f = self.iff()?;
        match self.tokens.get(self.pos) {
            None => Ok(f),
            Some((_, col)) => Err(parse_error(self.line, *col, "unexpected token")),
        }
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.tokens.get(self.pos).map(|(t, _)| t) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<PropFormula, ModelError> {
        let mut lhs = self.implies()?;
        while self.eat(&Token::Iff) {
            lhs = PropFormula::Iff(Box::new(lhs), Box::new(self.implies()?));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<PropFormula, ModelError> {
        let lhs = self.or()?;
        if self.eat(&Token::Implies) {
            Ok(PropFormula::Implies(Box::new(lhs), Box::new(self.implies()?)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<PropFormula, ModelError> {
        let mut lhs = self.and()?;
        while self.eat(&Token::Or) {
            lhs = PropFormula::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<PropFormula, ModelError> {
        let mut lhs = self.unary()?;
        while self.eat(&Token::And) {
            lhs = PropFormula::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PropFormula, ModelError> {
        let Some((tok, col)) = self.tokens.get(self.pos).cloned() else {
            return Err(parse_error(self.line, self.end_column, "unexpected end of formula"));
        };
        self.pos += 1;
        match tok {
            Token::Not => Ok(PropFormula::Not(Box::new(self.unary()?))),
            Token::Ident(name) => Ok(PropFormula::Var(name)),
            Token::Open => {
                let inner = self.iff()?;
                if self.eat(&Token::Close) {
                    Ok(inner)
                } else {
                    let col = self.tokens.get(self.pos).map_or(self.end_column, |t| t.1);
                    Err(parse_error(self.line, col, "expected `)`"))
                }
            }
            _ => Err(parse_error(self.line, col, "expected a feature name, `!` or `(`")),
        }
    }
}
