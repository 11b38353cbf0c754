//! The register file: one slot per rule attribute and one read-only slot per
//! distinct rule constant.
//!
//! `pkt_in.x` and `pkt_out.x` share a register. Attributes come first, in
//! first-appearance order, then constants in first-appearance order, so
//! indices are stable for a given rule set.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::rule_lang::{Literal, RuleSet, TypeTag};

/// Register index into a [`RegisterFile`].
pub type RegIndex = u16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("no valid register pair for {kind:?}{}", type_tag.map(|t| format!(" over {t}")).unwrap_or_default())]
    NoValidPair {
        kind: PrimitiveKind,
        type_tag: Option<TypeTag>,
    },
    #[error("too many registers ({0}); at most {max} are supported", max = RegIndex::MAX)]
    TooManyRegisters(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PrimitiveKind {
    Assign,
    IfEq,
    IfNeq,
    EndIf,
}

impl PrimitiveKind {
    pub fn is_if(self) -> bool {
        matches!(self, PrimitiveKind::IfEq | PrimitiveKind::IfNeq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegisterKind {
    Attribute,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Register {
    pub index: RegIndex,
    pub kind: RegisterKind,
    /// Attribute name, or the literal's canonical form for constants.
    pub name: String,
    pub type_tag: TypeTag,
    pub writable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Literal>,
}

impl Register {
    /// Name used in the genotype text format: `src_ip` or `const:10.0.0.10`.
    pub fn label(&self) -> String {
        match self.kind {
            RegisterKind::Attribute => self.name.clone(),
            RegisterKind::Constant => format!("const:{}", self.name),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegisterFile {
    registers: Vec<Register>,
    by_type: BTreeMap<TypeTag, Vec<RegIndex>>,
    attr_index: IndexMap<String, RegIndex>,
    #[serde(skip)]
    assign_pairs: Vec<(RegIndex, RegIndex)>,
    #[serde(skip)]
    compare_pairs: Vec<(RegIndex, RegIndex)>,
}

/// Builds the register file for a rule set.
pub fn build_registers(rules: &RuleSet) -> RegisterFile {
    RegisterFile::new(rules).expect("rule sets never hold 65535 symbols in practice")
}

impl RegisterFile {
    pub fn new(rules: &RuleSet) -> Result<RegisterFile, RegistryError> {
        let count = rules.attributes.len() + rules.constants.len();
        if count > RegIndex::MAX as usize {
            return Err(RegistryError::TooManyRegisters(count));
        }
        let mut registers = Vec::with_capacity(count);
        for (name, &type_tag) in &rules.attributes {
            registers.push(Register {
                index: registers.len() as RegIndex,
                kind: RegisterKind::Attribute,
                name: name.clone(),
                type_tag,
                writable: true,
                value: None,
            });
        }
        for lit in &rules.constants {
            registers.push(Register {
                index: registers.len() as RegIndex,
                kind: RegisterKind::Constant,
                name: lit.raw(),
                type_tag: lit.type_tag(),
                writable: false,
                value: Some(lit.clone()),
            });
        }
        Ok(RegisterFile::from_registers(registers))
    }

    fn from_registers(registers: Vec<Register>) -> RegisterFile {
        let mut by_type: BTreeMap<TypeTag, Vec<RegIndex>> = BTreeMap::new();
        let mut attr_index = IndexMap::new();
        for r in &registers {
            by_type.entry(r.type_tag).or_default().push(r.index);
            if r.kind == RegisterKind::Attribute {
                attr_index.insert(r.name.clone(), r.index);
            }
        }
        let mut rf = RegisterFile {
            registers,
            by_type,
            attr_index,
            assign_pairs: Vec::new(),
            compare_pairs: Vec::new(),
        };
        rf.assign_pairs = rf.enumerate_pairs(PrimitiveKind::Assign, None);
        rf.compare_pairs = rf.enumerate_pairs(PrimitiveKind::IfEq, None);
        rf
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn get(&self, index: RegIndex) -> Option<&Register> {
        self.registers.get(index as usize)
    }

    pub fn by_type(&self) -> &BTreeMap<TypeTag, Vec<RegIndex>> {
        &self.by_type
    }

    pub fn attr_index(&self, name: &str) -> Option<RegIndex> {
        self.attr_index.get(name).copied()
    }

    /// Attribute registers in index order.
    pub fn attributes(&self) -> impl Iterator<Item = &Register> {
        self.registers
            .iter()
            .filter(|r| r.kind == RegisterKind::Attribute)
    }

    pub fn attribute_count(&self) -> usize {
        self.attr_index.len()
    }

    pub fn constants(&self) -> impl Iterator<Item = &Register> {
        self.registers
            .iter()
            .filter(|r| r.kind == RegisterKind::Constant)
    }

    /// Looks a register up by its genotype label (`name` or `const:raw`).
    pub fn find_label(&self, label: &str) -> Option<RegIndex> {
        match label.strip_prefix("const:") {
            Some(raw) => {
                let lit = Literal::parse(raw)?;
                self.constants()
                    .find(|r| r.value.as_ref() == Some(&lit))
                    .map(|r| r.index)
            }
            None => self.attr_index(label),
        }
    }

    /// Cached pair list used for sampling. Empty if the kind has no pair.
    pub fn pairs(&self, kind: PrimitiveKind) -> &[(RegIndex, RegIndex)] {
        match kind {
            PrimitiveKind::Assign => &self.assign_pairs,
            PrimitiveKind::IfEq | PrimitiveKind::IfNeq => &self.compare_pairs,
            PrimitiveKind::EndIf => &[],
        }
    }

    /// Whether `(a, b)` is a legal operand pair for `kind`.
    pub fn is_compatible(&self, kind: PrimitiveKind, a: RegIndex, b: RegIndex) -> bool {
        let (Some(ra), Some(rb)) = (self.get(a), self.get(b)) else {
            return false;
        };
        if ra.type_tag != rb.type_tag || a == b {
            return false;
        }
        match kind {
            PrimitiveKind::Assign => ra.writable,
            PrimitiveKind::IfEq | PrimitiveKind::IfNeq => true,
            PrimitiveKind::EndIf => false,
        }
    }

    fn enumerate_pairs(
        &self,
        kind: PrimitiveKind,
        type_tag: Option<TypeTag>,
    ) -> Vec<(RegIndex, RegIndex)> {
        let mut out = Vec::new();
        for (&tag, members) in &self.by_type {
            if type_tag.is_some_and(|t| t != tag) {
                continue;
            }
            for (i, &a) in members.iter().enumerate() {
                match kind {
                    PrimitiveKind::Assign => {
                        if !self.registers[a as usize].writable {
                            continue;
                        }
                        out.extend(members.iter().filter(|&&b| b != a).map(|&b| (a, b)));
                    }
                    PrimitiveKind::IfEq | PrimitiveKind::IfNeq => {
                        out.extend(members[i + 1..].iter().map(|&b| (a, b)));
                    }
                    PrimitiveKind::EndIf => {}
                }
            }
        }
        out
    }

    /// All operand pairs `kind` may use. ASSIGN pairs are ordered
    /// `(dst, src)` with a writable `dst`; comparison pairs are unordered and
    /// listed once with the lower index first.
    pub fn compatible_pairs(
        &self,
        kind: PrimitiveKind,
    ) -> Result<Vec<(RegIndex, RegIndex)>, RegistryError> {
        let pairs = self.enumerate_pairs(kind, None);
        if pairs.is_empty() {
            return Err(RegistryError::NoValidPair {
                kind,
                type_tag: None,
            });
        }
        Ok(pairs)
    }

    /// [`compatible_pairs`](Self::compatible_pairs) restricted to one type.
    pub fn compatible_pairs_of_type(
        &self,
        kind: PrimitiveKind,
        type_tag: TypeTag,
    ) -> Result<Vec<(RegIndex, RegIndex)>, RegistryError> {
        let pairs = self.enumerate_pairs(kind, Some(type_tag));
        if pairs.is_empty() {
            return Err(RegistryError::NoValidPair {
                kind,
                type_tag: Some(type_tag),
            });
        }
        Ok(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule_lang::parse_rules;

    pub(crate) const NAT: &str = "RULE1: IF (pkt_in.port_num EQ 0 AND pkt_in.src_ip EQ 192.168.1.1) THEN (pkt_out.src_ip EQ 10.0.0.10)
RULE2: IF (pkt_in.port_num EQ 1 AND pkt_in.dst_ip EQ 10.0.0.10) THEN (pkt_out.dst_ip EQ 192.168.1.1)";

    fn nat() -> RegisterFile {
        build_registers(&parse_rules(NAT).unwrap())
    }

    fn names(rf: &RegisterFile, pairs: &[(RegIndex, RegIndex)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|&(a, b)| (rf.get(a).unwrap().label(), rf.get(b).unwrap().label()))
            .collect()
    }

    #[test]
    fn nat_registers() {
        let rf = nat();
        assert_eq!(rf.len(), 7);
        let labels: Vec<_> = rf.registers().iter().map(Register::label).collect();
        assert_eq!(
            labels,
            [
                "port_num",
                "src_ip",
                "dst_ip",
                "const:0",
                "const:192.168.1.1",
                "const:10.0.0.10",
                "const:1"
            ]
        );
        assert_eq!(rf.attribute_count(), 3);
        for r in rf.registers() {
            assert_eq!(r.writable, r.kind == RegisterKind::Attribute);
            assert_eq!(
                r.index as usize,
                rf.registers().iter().position(|x| x == r).unwrap()
            );
        }
        assert_eq!(rf.by_type()[&TypeTag::Int], vec![0, 3, 6]);
        assert_eq!(rf.by_type()[&TypeTag::IpAddr], vec![1, 2, 4, 5]);
    }

    #[test]
    fn empty_rules_give_empty_file() {
        let rf = build_registers(&RuleSet::empty());
        assert!(rf.is_empty());
        assert!(rf.compatible_pairs(PrimitiveKind::Assign).is_err());
    }

    #[test]
    fn single_rule_registers() {
        let rs = parse_rules("R: IF (pkt_in.src_ip EQ 192.168.1.1) THEN (pkt_out.out_port EQ 2)")
            .unwrap();
        let rf = build_registers(&rs);
        let labels: Vec<_> = rf.registers().iter().map(Register::label).collect();
        assert_eq!(
            labels,
            ["src_ip", "out_port", "const:192.168.1.1", "const:2"]
        );
    }

    // Independent brute force over all ordered register pairs.
    fn brute_pairs(
        rf: &RegisterFile,
        kind: PrimitiveKind,
        tag: TypeTag,
    ) -> Vec<(RegIndex, RegIndex)> {
        let mut out = Vec::new();
        for a in rf.registers() {
            for b in rf.registers() {
                if a.type_tag != tag || b.type_tag != tag || a.index == b.index {
                    continue;
                }
                let ok = match kind {
                    PrimitiveKind::Assign => a.writable,
                    _ => a.index < b.index,
                };
                if ok {
                    out.push((a.index, b.index));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn nat_assign_ip_pairs() {
        let rf = nat();
        let mut pairs = rf
            .compatible_pairs_of_type(PrimitiveKind::Assign, TypeTag::IpAddr)
            .unwrap();
        pairs.sort();
        assert_eq!(pairs.len(), 6);
        assert_eq!(
            pairs,
            brute_pairs(&rf, PrimitiveKind::Assign, TypeTag::IpAddr)
        );
        for (dst, _) in names(&rf, &pairs) {
            assert!(dst == "src_ip" || dst == "dst_ip");
        }
    }

    #[test]
    fn nat_if_int_pairs() {
        let rf = nat();
        let pairs = rf
            .compatible_pairs_of_type(PrimitiveKind::IfEq, TypeTag::Int)
            .unwrap();
        assert_eq!(
            names(&rf, &pairs),
            [
                ("port_num".into(), "const:0".into()),
                ("port_num".into(), "const:1".into()),
                ("const:0".into(), "const:1".into())
            ]
        );
        assert_eq!(pairs, brute_pairs(&rf, PrimitiveKind::IfEq, TypeTag::Int));
    }

    #[test]
    fn single_bool_register_has_no_pair() {
        // Rule files always pair an attribute with a literal of its type, so
        // build the register file by hand.
        let rf = RegisterFile::from_registers(vec![Register {
            index: 0,
            kind: RegisterKind::Attribute,
            name: "flag".into(),
            type_tag: TypeTag::Bool,
            writable: true,
            value: None,
        }]);
        assert_eq!(
            rf.compatible_pairs_of_type(PrimitiveKind::IfEq, TypeTag::Bool)
                .unwrap_err(),
            RegistryError::NoValidPair {
                kind: PrimitiveKind::IfEq,
                type_tag: Some(TypeTag::Bool)
            }
        );
    }

    #[test]
    fn cached_pairs_cover_all_types() {
        let rf = nat();
        assert_eq!(rf.pairs(PrimitiveKind::Assign).len(), 2 + 6);
        assert_eq!(rf.pairs(PrimitiveKind::IfNeq).len(), 3 + 6);
        for &(a, b) in rf.pairs(PrimitiveKind::Assign) {
            assert!(rf.is_compatible(PrimitiveKind::Assign, a, b));
        }
        assert!(!rf.is_compatible(PrimitiveKind::Assign, 3, 0));
    }

    #[test]
    fn labels_resolve() {
        let rf = nat();
        assert_eq!(rf.find_label("dst_ip"), Some(2));
        assert_eq!(rf.find_label("const:10.0.0.10"), Some(5));
        assert_eq!(rf.find_label("const:10.0.0.11"), None);
        assert_eq!(rf.find_label("ttl"), None);
    }
}
