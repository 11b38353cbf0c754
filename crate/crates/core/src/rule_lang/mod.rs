//! Behavioral rule language.
//!
//! A rule file is a sequence of `NAME: IF (...) THEN (...)` blocks. Conditions
//! compare a packet attribute (`pkt_in.x` on the IF side, `pkt_out.x` on the
//! THEN side) against a literal with `EQ` or `NEQ`, combined with `AND` and
//! `OR`. `AND` binds tighter than `OR`. A `#` starts a comment that runs to the
//! end of the line.
//!
//! Parsing yields a [`RuleSet`], which also carries the derived DNF clauses
//! used by the trace generator and the attribute/constant sets used to build
//! the register file.

mod dnf;
mod lexer;
mod parser;

use std::fmt;
use std::net::Ipv4Addr;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dnf::{make_default_clause, to_dnf};
pub use parser::parse_rules;

/// Name of the synthetic clause matching packets that no rule matches.
pub const DEFAULT_CLAUSE: &str = "__default__";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("empty rule input")]
    EmptyInput,
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error(
        "type error at {line}:{column}: attribute `{attribute}` compared with {found} literal, but it was already used as {expected}"
    )]
    Type {
        attribute: String,
        expected: TypeTag,
        found: TypeTag,
        line: usize,
        column: usize,
    },
    #[error("rule `{rule}` at {line}:{column}: `{attribute}` may not appear in the {part} part")]
    Direction {
        rule: String,
        attribute: String,
        part: &'static str,
        line: usize,
        column: usize,
    },
    #[error("rule `{rule}` is defined more than once")]
    DuplicateRule { rule: String },
    #[error("rule `{rule}`: OR is not supported in THEN conditions; split it into separate rules")]
    ThenDisjunction { rule: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn prefix(self) -> &'static str {
        match self {
            Direction::In => "pkt_in",
            Direction::Out => "pkt_out",
        }
    }
}

/// A dot-notation packet attribute reference, e.g. `pkt_in.src_ip`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeRef {
    pub direction: Direction,
    pub name: String,
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.direction.prefix(), self.name)
    }
}

/// Returns true if `name` matches `[a-z_][a-z0-9_]*`.
pub fn is_attribute_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    IpAddr,
    Int,
    Bool,
    String,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TypeTag::IpAddr => "IpAddr",
            TypeTag::Int => "Int",
            TypeTag::Bool => "Bool",
            TypeTag::String => "String",
        };
        f.write_str(s)
    }
}

/// A typed constant. Equality is by type and canonical value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    IpAddr(Ipv4Addr),
    Int(u64),
    Bool(bool),
    Str(String),
}

impl Literal {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Literal::IpAddr(_) => TypeTag::IpAddr,
            Literal::Int(_) => TypeTag::Int,
            Literal::Bool(_) => TypeTag::Bool,
            Literal::Str(_) => TypeTag::String,
        }
    }

    /// Canonical source form, as it appears in rule files.
    pub fn raw(&self) -> String {
        self.to_string()
    }

    /// Parses the canonical source form of any literal type.
    pub fn parse(raw: &str) -> Option<Literal> {
        if let Some(inner) = raw.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
            return (!inner.contains('"')).then(|| Literal::Str(inner.to_string()));
        }
        match raw {
            "true" => return Some(Literal::Bool(true)),
            "false" => return Some(Literal::Bool(false)),
            _ => {}
        }
        if raw.contains('.') {
            return raw.parse::<Ipv4Addr>().ok().map(Literal::IpAddr);
        }
        if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        // Non-canonical forms such as `007` are rejected so that every constant
        // prints back exactly as written.
        if raw.len() > 1 && raw.starts_with('0') {
            return None;
        }
        raw.parse::<u64>().ok().map(Literal::Int)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::IpAddr(ip) => write!(f, "{ip}"),
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

impl Serialize for Literal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw())
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Literal::parse(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid literal `{raw}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "NEQ")]
    Neq,
}

impl CmpOp {
    pub fn keyword(self) -> &'static str {
        match self {
            CmpOp::Eq => "EQ",
            CmpOp::Neq => "NEQ",
        }
    }

    pub fn holds(self, lhs: &Literal, rhs: &Literal) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Neq => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition {
    pub lhs: AttributeRef,
    pub op: CmpOp,
    pub rhs: Literal,
}

impl Condition {
    pub fn holds_for(&self, value: &Literal) -> bool {
        self.op.holds(value, &self.rhs)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.keyword(), self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Cond(Condition),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn and(lhs: BoolExpr, rhs: BoolExpr) -> BoolExpr {
        BoolExpr::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: BoolExpr, rhs: BoolExpr) -> BoolExpr {
        BoolExpr::Or(Box::new(lhs), Box::new(rhs))
    }

    /// Leaves in left-to-right order.
    pub fn conditions(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        self.collect_conditions(&mut out);
        out
    }

    fn collect_conditions<'a>(&'a self, out: &mut Vec<&'a Condition>) {
        match self {
            BoolExpr::Cond(c) => out.push(c),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                l.collect_conditions(out);
                r.collect_conditions(out);
            }
        }
    }

    pub fn contains_or(&self) -> bool {
        match self {
            BoolExpr::Cond(_) => false,
            BoolExpr::Or(..) => true,
            BoolExpr::And(l, r) => l.contains_or() || r.contains_or(),
        }
    }

    /// Evaluates the expression with `truth` giving the value of each leaf.
    pub fn eval_with(&self, truth: &mut impl FnMut(&Condition) -> bool) -> bool {
        match self {
            BoolExpr::Cond(c) => truth(c),
            BoolExpr::And(l, r) => l.eval_with(truth) && r.eval_with(truth),
            BoolExpr::Or(l, r) => l.eval_with(truth) || r.eval_with(truth),
        }
    }

    // The parser builds left-associative chains, so a right operand of the
    // same operator needs parentheses to reparse to the same tree.
    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Cond(c) => write!(f, "{c}"),
            BoolExpr::And(l, r) => {
                l.fmt_operand(f, !matches!(**l, BoolExpr::Or(..)))?;
                f.write_str(" AND ")?;
                r.fmt_operand(f, matches!(**r, BoolExpr::Cond(_)))
            }
            BoolExpr::Or(l, r) => {
                l.fmt_operand(f, true)?;
                f.write_str(" OR ")?;
                r.fmt_operand(f, !matches!(**r, BoolExpr::Or(..)))
            }
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, bare: bool) -> fmt::Result {
        if bare {
            self.fmt_inner(f)
        } else {
            f.write_str("(")?;
            self.fmt_inner(f)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        self.fmt_inner(f)?;
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub if_expr: BoolExpr,
    pub then_expr: BoolExpr,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: IF {} THEN {}",
            self.name, self.if_expr, self.then_expr
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClauseSource {
    Rule(String),
    Default,
}

impl fmt::Display for ClauseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseSource::Rule(name) => f.write_str(name),
            ClauseSource::Default => f.write_str(DEFAULT_CLAUSE),
        }
    }
}

/// One disjunct of a rule's IF part, or the default clause.
///
/// The default clause has an empty conjunction and matches by exclusion: a
/// packet belongs to it when it matches no rule clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseRule {
    pub source: ClauseSource,
    pub if_conjunction: Vec<Condition>,
    pub then_conditions: Vec<Condition>,
}

impl ClauseRule {
    pub fn is_default(&self) -> bool {
        self.source == ClauseSource::Default
    }

    /// Whether the conjunction holds under `lookup`. Always false for the
    /// default clause, which is matched by exclusion elsewhere.
    pub fn matches(&self, lookup: impl Fn(&str) -> Literal) -> bool {
        !self.is_default()
            && self
                .if_conjunction
                .iter()
                .all(|c| c.holds_for(&lookup(&c.lhs.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub clauses: Vec<ClauseRule>,
    /// Attribute names in first-appearance order, with their inferred type.
    pub attributes: IndexMap<String, TypeTag>,
    /// Distinct constants in first-appearance order.
    pub constants: IndexSet<Literal>,
}

impl RuleSet {
    pub fn empty() -> RuleSet {
        RuleSet::from_rules(Vec::new()).expect("empty rule list is valid")
    }

    /// Builds a rule set from already-parsed rules, checking the same
    /// invariants the parser does.
    pub fn from_rules(rules: Vec<Rule>) -> Result<RuleSet, RuleError> {
        let mut attributes: IndexMap<String, TypeTag> = IndexMap::new();
        let mut constants = IndexSet::new();
        let mut names = std::collections::HashSet::new();
        for rule in &rules {
            if !names.insert(rule.name.as_str()) {
                return Err(RuleError::DuplicateRule {
                    rule: rule.name.clone(),
                });
            }
            if rule.then_expr.contains_or() {
                return Err(RuleError::ThenDisjunction {
                    rule: rule.name.clone(),
                });
            }
            let parts = [
                (&rule.if_expr, Direction::In),
                (&rule.then_expr, Direction::Out),
            ];
            for (expr, dir) in parts {
                for cond in expr.conditions() {
                    if cond.lhs.direction != dir {
                        return Err(RuleError::Direction {
                            rule: rule.name.clone(),
                            attribute: cond.lhs.to_string(),
                            part: if dir == Direction::In { "IF" } else { "THEN" },
                            line: 0,
                            column: 0,
                        });
                    }
                    let found = cond.rhs.type_tag();
                    match attributes.get(&cond.lhs.name) {
                        Some(&expected) if expected != found => {
                            return Err(RuleError::Type {
                                attribute: cond.lhs.name.clone(),
                                expected,
                                found,
                                line: 0,
                                column: 0,
                            })
                        }
                        Some(_) => {}
                        None => {
                            attributes.insert(cond.lhs.name.clone(), found);
                        }
                    }
                    constants.insert(cond.rhs.clone());
                }
            }
        }
        let mut clauses: Vec<ClauseRule> = rules.iter().flat_map(to_dnf).collect();
        clauses.push(make_default_clause(&rules));
        Ok(RuleSet {
            rules,
            clauses,
            attributes,
            constants,
        })
    }

    pub fn rule_clauses(&self) -> impl Iterator<Item = &ClauseRule> {
        self.clauses.iter().filter(|c| !c.is_default())
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_parsing_and_canonical_form() {
        assert_eq!(
            Literal::parse("192.168.1.1"),
            Some(Literal::IpAddr(Ipv4Addr::new(192, 168, 1, 1)))
        );
        assert_eq!(Literal::parse("0"), Some(Literal::Int(0)));
        assert_eq!(Literal::parse("007"), None);
        assert_eq!(Literal::parse("1.2.3"), None);
        assert_eq!(Literal::parse("true"), Some(Literal::Bool(true)));
        assert_eq!(
            Literal::parse("\"eth0\""),
            Some(Literal::Str("eth0".into()))
        );
        for raw in ["10.0.0.10", "42", "false", "\"x y\""] {
            assert_eq!(Literal::parse(raw).unwrap().raw(), raw);
        }
    }

    #[test]
    fn literal_equality_needs_matching_type() {
        assert_ne!(Literal::Int(1), Literal::Str("1".into()));
        assert_eq!(Literal::Int(1), Literal::parse("1").unwrap());
    }

    #[test]
    fn attribute_names() {
        assert!(is_attribute_name("src_ip"));
        assert!(is_attribute_name("_x9"));
        assert!(!is_attribute_name("SrcIp"));
        assert!(!is_attribute_name("9x"));
        assert!(!is_attribute_name(""));
    }
}
