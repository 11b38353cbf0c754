//! Synthetic trace generation.
//!
//! Every attribute type gets a value universe: the rule constants of that type
//! plus [`SENTINELS_PER_TYPE`] fresh values that no rule mentions (Bool has no
//! room for fresh values and uses `{true, false}`). Packets for a rule clause
//! take forced values for constrained attributes and uniform draws for the
//! rest; default packets are drawn until they match no clause.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::registry::{RegIndex, RegisterFile};
use crate::rule_lang::{ClauseRule, CmpOp, Literal, RuleSet, TypeTag, DEFAULT_CLAUSE};

pub const SENTINELS_PER_TYPE: usize = 2;
const DEFAULT_RETRIES: usize = 100;

/// Required state of one attribute after the program has run. `EQ` carries
/// exactly one value; `NEQ` requires the output to differ from every listed
/// value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputCondition {
    pub attribute: String,
    pub op: CmpOp,
    pub expected: Vec<Literal>,
}

impl OutputCondition {
    pub fn holds(&self, value: &Literal) -> bool {
        match self.op {
            CmpOp::Eq => self.expected.first() == Some(value),
            CmpOp::Neq => self.expected.iter().all(|e| e != value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePacket {
    /// Label of the clause this packet was generated for.
    pub source: String,
    pub inputs: IndexMap<String, Literal>,
    pub output_conditions: Vec<OutputCondition>,
}

#[derive(Debug, Clone)]
pub(crate) enum Check {
    Eq(u32),
    Neq(Box<[u32]>),
}

impl Check {
    #[inline]
    pub(crate) fn holds(&self, v: u32) -> bool {
        match self {
            Check::Eq(e) => *e == v,
            Check::Neq(es) => !es.contains(&v),
        }
    }
}

/// Trace packets lowered to interned value ids for the hot fitness loop.
#[derive(Debug, Clone, Default)]
pub(crate) struct Compiled {
    /// Register image with constants filled in; attributes are overwritten
    /// per packet.
    pub base: Vec<u32>,
    /// Per packet: `(register, value id)` inputs and `(register, check)` pairs.
    pub inputs: Vec<Vec<(RegIndex, u32)>>,
    pub checks: Vec<Vec<(RegIndex, Check)>>,
    pub writable: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub packets: Vec<TracePacket>,
    /// Output conditions per packet (= number of attribute registers).
    pub a_p: usize,
    pub(crate) compiled: Compiled,
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.packets == other.packets && self.a_p == other.a_p
    }
}

impl Trace {
    /// Wraps packets built elsewhere. Every packet must give an input for
    /// every attribute register.
    pub fn from_packets(packets: Vec<TracePacket>, rf: &RegisterFile) -> Result<Trace, EvalError> {
        let compiled = compile(&packets, rf)?;
        Ok(Trace {
            packets,
            a_p: rf.attribute_count(),
            compiled,
        })
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Total number of output conditions, `N × A_p`.
    pub fn condition_count(&self) -> u64 {
        self.packets
            .iter()
            .map(|p| p.output_conditions.len() as u64)
            .sum()
    }

    /// This trace followed by `other`'s packets.
    pub fn union(&self, other: &Trace, rf: &RegisterFile) -> Result<Trace, EvalError> {
        let mut packets = self.packets.clone();
        packets.extend(other.packets.iter().cloned());
        Trace::from_packets(packets, rf)
    }

    /// Keeps only packets accepted by `keep`.
    pub fn filter(
        &self,
        rf: &RegisterFile,
        keep: impl Fn(&TracePacket) -> bool,
    ) -> Result<Trace, EvalError> {
        let packets = self.packets.iter().filter(|p| keep(p)).cloned().collect();
        Trace::from_packets(packets, rf)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.packets).expect("trace serializes")
    }

    /// Checks that rule packets satisfy their clause and default packets
    /// satisfy none.
    pub fn is_sound(&self, rules: &RuleSet) -> bool {
        self.packets.iter().all(|pkt| {
            let lookup = |name: &str| pkt.inputs[name].clone();
            let matched: Vec<&ClauseRule> =
                rules.rule_clauses().filter(|c| c.matches(lookup)).collect();
            if pkt.source == DEFAULT_CLAUSE {
                matched.is_empty()
            } else {
                matched.iter().any(|c| c.source.to_string() == pkt.source)
            }
        })
    }
}

fn compile(packets: &[TracePacket], rf: &RegisterFile) -> Result<Compiled, EvalError> {
    let mut ids: HashMap<Literal, u32> = HashMap::new();
    let mut intern = |lit: &Literal| -> u32 {
        let next = ids.len() as u32;
        *ids.entry(lit.clone()).or_insert(next)
    };
    // Attribute slots start out with an id no literal can take.
    let mut base = vec![u32::MAX; rf.len()];
    let mut writable = vec![false; rf.len()];
    for r in rf.registers() {
        writable[r.index as usize] = r.writable;
        if let Some(v) = &r.value {
            base[r.index as usize] = intern(v);
        }
    }
    let mut inputs = Vec::with_capacity(packets.len());
    let mut checks = Vec::with_capacity(packets.len());
    for pkt in packets {
        let mut pin = Vec::with_capacity(rf.attribute_count());
        for attr in rf.attributes() {
            let v = pkt
                .inputs
                .get(&attr.name)
                .ok_or_else(|| EvalError::MissingInput(attr.name.clone()))?;
            pin.push((attr.index, intern(v)));
        }
        let mut pcheck = Vec::with_capacity(pkt.output_conditions.len());
        for cond in &pkt.output_conditions {
            let reg = rf
                .attr_index(&cond.attribute)
                .ok_or_else(|| EvalError::MissingInput(cond.attribute.clone()))?;
            let check = match cond.op {
                CmpOp::Eq => Check::Eq(intern(&cond.expected[0])),
                CmpOp::Neq => Check::Neq(cond.expected.iter().map(&mut intern).collect()),
            };
            pcheck.push((reg, check));
        }
        inputs.push(pin);
        checks.push(pcheck);
    }
    Ok(Compiled {
        base,
        inputs,
        checks,
        writable,
    })
}

/// Builds `k` packets per clause (default clause included).
pub fn generate_trace<R: Rng + ?Sized>(
    rules: &RuleSet,
    rf: &RegisterFile,
    k: usize,
    rng: &mut R,
) -> Result<Trace, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidMultiplier);
    }
    let universe = value_universe(rules, rng);
    let attrs: Vec<(&str, TypeTag)> = rules
        .attributes
        .iter()
        .map(|(n, &t)| (n.as_str(), t))
        .collect();

    let mut packets = Vec::with_capacity(k * rules.clauses.len());
    for (ci, clause) in rules.clauses.iter().enumerate() {
        let label = clause.source.to_string();
        if clause.is_default() {
            for _ in 0..k {
                let inputs = default_inputs(rules, &attrs, &universe, rng)?;
                packets.push(finish_packet(rules, label.clone(), inputs)?);
            }
            continue;
        }
        let domains = clause_domains(clause, ci, &attrs, &universe)?;
        for _ in 0..k {
            let inputs: IndexMap<String, Literal> = attrs
                .iter()
                .zip(&domains)
                .map(|(&(name, _), dom)| {
                    (name.to_string(), dom.choose(rng).expect("nonempty").clone())
                })
                .collect();
            packets.push(finish_packet(rules, label.clone(), inputs)?);
        }
    }
    let trace = Trace::from_packets(packets, rf)?;
    assert!(
        trace.is_sound(rules),
        "generated trace violates its clauses"
    );
    Ok(trace)
}

fn value_universe<R: Rng + ?Sized>(
    rules: &RuleSet,
    rng: &mut R,
) -> BTreeMap<TypeTag, Vec<Literal>> {
    let mut universe: BTreeMap<TypeTag, Vec<Literal>> = BTreeMap::new();
    for &tag in rules.attributes.values() {
        universe.entry(tag).or_default();
    }
    for lit in &rules.constants {
        universe
            .entry(lit.type_tag())
            .or_default()
            .push(lit.clone());
    }
    for (&tag, values) in universe.iter_mut() {
        if tag == TypeTag::Bool {
            for b in [false, true] {
                if !values.contains(&Literal::Bool(b)) {
                    values.push(Literal::Bool(b));
                }
            }
            continue;
        }
        let mut added = 0;
        while added < SENTINELS_PER_TYPE {
            let candidate = match tag {
                // Int attributes render as 16-bit fields.
                TypeTag::Int => Literal::Int(rng.gen_range(0..=u16::MAX as u64)),
                TypeTag::IpAddr => Literal::IpAddr(Ipv4Addr::from(rng.gen::<u32>())),
                TypeTag::String => Literal::Str(format!("s{:08x}", rng.gen::<u32>())),
                TypeTag::Bool => unreachable!(),
            };
            if !values.contains(&candidate) {
                values.push(candidate);
                added += 1;
            }
        }
    }
    universe
}

/// For each attribute, the values a packet of this clause may take.
fn clause_domains(
    clause: &ClauseRule,
    index: usize,
    attrs: &[(&str, TypeTag)],
    universe: &BTreeMap<TypeTag, Vec<Literal>>,
) -> Result<Vec<Vec<Literal>>, EvalError> {
    let unsat = |reason: String| EvalError::UnsatisfiableClause {
        clause: format!("#{index} of {}", clause.source),
        reason,
    };
    let mut out = Vec::with_capacity(attrs.len());
    for &(name, tag) in attrs {
        let conds: Vec<_> = clause
            .if_conjunction
            .iter()
            .filter(|c| c.lhs.name == name)
            .collect();
        let eqs: BTreeSet<&Literal> = conds
            .iter()
            .filter(|c| c.op == CmpOp::Eq)
            .map(|c| &c.rhs)
            .collect();
        let neqs: BTreeSet<&Literal> = conds
            .iter()
            .filter(|c| c.op == CmpOp::Neq)
            .map(|c| &c.rhs)
            .collect();
        let domain: Vec<Literal> = if let Some(&first) = eqs.iter().next() {
            if eqs.len() > 1 {
                return Err(unsat(format!(
                    "`{name}` must equal several different values"
                )));
            }
            if neqs.contains(first) {
                return Err(unsat(format!(
                    "`{name}` must both equal and differ from {first}"
                )));
            }
            vec![first.clone()]
        } else {
            universe[&tag]
                .iter()
                .filter(|v| !neqs.contains(v))
                .cloned()
                .collect()
        };
        if domain.is_empty() {
            return Err(unsat(format!("`{name}` excludes every possible value")));
        }
        out.push(domain);
    }
    Ok(out)
}

fn matches_any(rules: &RuleSet, inputs: &IndexMap<String, Literal>) -> bool {
    rules
        .rule_clauses()
        .any(|c| c.matches(|n| inputs[n].clone()))
}

fn default_inputs<R: Rng + ?Sized>(
    rules: &RuleSet,
    attrs: &[(&str, TypeTag)],
    universe: &BTreeMap<TypeTag, Vec<Literal>>,
    rng: &mut R,
) -> Result<IndexMap<String, Literal>, EvalError> {
    for _ in 0..DEFAULT_RETRIES {
        let inputs: IndexMap<String, Literal> = attrs
            .iter()
            .map(|&(n, t)| {
                (
                    n.to_string(),
                    universe[&t].choose(rng).expect("nonempty").clone(),
                )
            })
            .collect();
        if !matches_any(rules, &inputs) {
            return Ok(inputs);
        }
    }
    systematic_default(rules, attrs, universe).ok_or(EvalError::ValueExhaustion)
}

/// Depth-first search for an assignment that breaks at least one condition
/// of every rule clause. Each attribute starts at a sentinel (or the first
/// universe value) and may be pinned to a value that falsifies one condition.
fn systematic_default(
    rules: &RuleSet,
    attrs: &[(&str, TypeTag)],
    universe: &BTreeMap<TypeTag, Vec<Literal>>,
) -> Option<IndexMap<String, Literal>> {
    let clauses: Vec<&ClauseRule> = rules.rule_clauses().collect();
    let start: IndexMap<String, Literal> = attrs
        .iter()
        .map(|&(n, t)| {
            let values = &universe[&t];
            let fresh = values
                .iter()
                .find(|v| !rules.constants.contains(*v))
                .unwrap_or(&values[0]);
            (n.to_string(), fresh.clone())
        })
        .collect();
    let mut pinned = BTreeSet::new();
    let mut assignment = start;
    if search(&clauses, 0, universe, attrs, &mut assignment, &mut pinned) {
        Some(assignment)
    } else {
        None
    }
}

fn search(
    clauses: &[&ClauseRule],
    at: usize,
    universe: &BTreeMap<TypeTag, Vec<Literal>>,
    attrs: &[(&str, TypeTag)],
    assignment: &mut IndexMap<String, Literal>,
    pinned: &mut BTreeSet<String>,
) -> bool {
    let Some(clause) = clauses.get(at) else {
        // Later pins may have re-enabled earlier clauses.
        return !clauses.iter().any(|c| c.matches(|n| assignment[n].clone()));
    };
    if !clause.matches(|n| assignment[n].clone()) {
        return search(clauses, at + 1, universe, attrs, assignment, pinned);
    }
    for cond in &clause.if_conjunction {
        let name = &cond.lhs.name;
        if pinned.contains(name) {
            continue;
        }
        let Some(&(_, tag)) = attrs.iter().find(|(n, _)| n == name) else {
            continue;
        };
        for v in &universe[&tag] {
            if cond.holds_for(v) {
                continue;
            }
            let old = assignment
                .insert(name.clone(), v.clone())
                .expect("attribute present");
            pinned.insert(name.clone());
            if search(clauses, at + 1, universe, attrs, assignment, pinned) {
                return true;
            }
            pinned.remove(name);
            assignment.insert(name.clone(), old);
        }
    }
    false
}

/// Attaches output conditions: THEN conditions of every matching clause, and
/// "keep the input value" for attributes no matched THEN mentions.
fn finish_packet(
    rules: &RuleSet,
    source: String,
    inputs: IndexMap<String, Literal>,
) -> Result<TracePacket, EvalError> {
    let matched: Vec<&ClauseRule> = rules
        .rule_clauses()
        .filter(|c| c.matches(|n| inputs[n].clone()))
        .collect();
    let mut output_conditions = Vec::with_capacity(inputs.len());
    for (name, input) in &inputs {
        let mut eqs: BTreeSet<&Literal> = BTreeSet::new();
        let mut neqs: BTreeSet<&Literal> = BTreeSet::new();
        let mut sources: BTreeSet<String> = BTreeSet::new();
        for clause in &matched {
            for cond in clause
                .then_conditions
                .iter()
                .filter(|c| &c.lhs.name == name)
            {
                sources.insert(clause.source.to_string());
                match cond.op {
                    CmpOp::Eq => eqs.insert(&cond.rhs),
                    CmpOp::Neq => neqs.insert(&cond.rhs),
                };
            }
        }
        let contradiction = || EvalError::ContradictoryRules {
            attribute: name.clone(),
            rules: sources.iter().cloned().collect::<Vec<_>>().join(", "),
        };
        let cond = match eqs.len() {
            0 if neqs.is_empty() => OutputCondition {
                attribute: name.clone(),
                op: CmpOp::Eq,
                expected: vec![input.clone()],
            },
            0 => OutputCondition {
                attribute: name.clone(),
                op: CmpOp::Neq,
                expected: neqs.into_iter().cloned().collect(),
            },
            1 => {
                let v = *eqs.iter().next().expect("one value");
                if neqs.contains(v) {
                    return Err(contradiction());
                }
                OutputCondition {
                    attribute: name.clone(),
                    op: CmpOp::Eq,
                    expected: vec![v.clone()],
                }
            }
            _ => return Err(contradiction()),
        };
        output_conditions.push(cond);
    }
    Ok(TracePacket {
        source,
        inputs,
        output_conditions,
    })
}
