//! Linear genotypes: sequences of `ASSIGN`, `IF_EQ`, `IF_NEQ` and `ENDIF`
//! primitives over register indices, plus the operators that create and
//! recombine them.
//!
//! Every program handed out by this module is balanced: reading left to
//! right, `ENDIF`s never outnumber open `IF_*`s and the counts agree at the
//! end.

mod ops;
mod text;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::FitnessValue;
use crate::registry::{PrimitiveKind, RegIndex, RegisterFile};

pub use ops::{
    crossover, crossover_with, mutate, mutate_with, random_primitive, random_program, Gene,
    MutationKind,
};
pub use text::{format_genotype, parse_genotype};

/// Programs never grow past this many primitives during evolution.
pub const DEFAULT_BLOAT_CAP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenomeError {
    #[error("register file has no usable register pair")]
    EmptyRegisterFile,
    #[error("invalid length bounds: min_len {min} > max_len {max}")]
    InvalidLength { min: usize, max: usize },
    #[error("unbalanced program: {0}")]
    Unbalanced(String),
    #[error("genotype line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Assign { dst: RegIndex, src: RegIndex },
    IfEq { a: RegIndex, b: RegIndex },
    IfNeq { a: RegIndex, b: RegIndex },
    EndIf,
}

impl Primitive {
    pub fn kind(self) -> PrimitiveKind {
        match self {
            Primitive::Assign { .. } => PrimitiveKind::Assign,
            Primitive::IfEq { .. } => PrimitiveKind::IfEq,
            Primitive::IfNeq { .. } => PrimitiveKind::IfNeq,
            Primitive::EndIf => PrimitiveKind::EndIf,
        }
    }

    pub fn is_if(self) -> bool {
        matches!(self, Primitive::IfEq { .. } | Primitive::IfNeq { .. })
    }

    pub fn operands(self) -> Option<(RegIndex, RegIndex)> {
        match self {
            Primitive::Assign { dst, src } => Some((dst, src)),
            Primitive::IfEq { a, b } | Primitive::IfNeq { a, b } => Some((a, b)),
            Primitive::EndIf => None,
        }
    }

    pub fn is_type_valid(self, rf: &RegisterFile) -> bool {
        match self.operands() {
            Some((a, b)) => rf.is_compatible(self.kind(), a, b),
            None => true,
        }
    }
}

/// Half-open span of a crossover unit: one non-IF primitive, or an `IF_*`
/// together with everything up to and including its `ENDIF`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub start: usize,
    pub end: usize,
    /// Number of enclosing IF blocks.
    pub depth: usize,
}

impl Unit {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSelection {
    /// Uniform over units at every nesting depth.
    #[default]
    All,
    /// Uniform over units that are not nested in an IF block.
    TopLevel,
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    pub code: Vec<Primitive>,
    pub fitness: Option<FitnessValue>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl Eq for Program {}

impl From<Vec<Primitive>> for Program {
    fn from(code: Vec<Primitive>) -> Self {
        Program {
            code,
            fitness: None,
        }
    }
}

impl Program {
    pub fn empty() -> Program {
        Program::default()
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn is_balanced(&self) -> bool {
        is_balanced(&self.code)
    }

    pub fn is_type_valid(&self, rf: &RegisterFile) -> bool {
        self.code.iter().all(|p| p.is_type_valid(rf))
    }

    pub fn units(&self) -> Result<Vec<Unit>, GenomeError> {
        enumerate_units(self)
    }

    /// For every IF_*, the index of its ENDIF (and vice versa). Non-IF
    /// primitives map to themselves.
    pub fn partners(&self) -> Result<Vec<usize>, GenomeError> {
        partner_table(&self.code)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.code {
            match *p {
                Primitive::Assign { dst, src } => writeln!(f, "ASSIGN(r{dst}, r{src})")?,
                Primitive::IfEq { a, b } => writeln!(f, "IF_EQ(r{a}, r{b})")?,
                Primitive::IfNeq { a, b } => writeln!(f, "IF_NEQ(r{a}, r{b})")?,
                Primitive::EndIf => writeln!(f, "ENDIF()")?,
            }
        }
        Ok(())
    }
}

pub fn is_balanced(code: &[Primitive]) -> bool {
    let mut depth = 0usize;
    for p in code {
        if p.is_if() {
            depth += 1;
        } else if *p == Primitive::EndIf {
            if depth == 0 {
                return false;
            }
            depth -= 1;
        }
    }
    depth == 0
}

pub(crate) fn partner_table(code: &[Primitive]) -> Result<Vec<usize>, GenomeError> {
    let mut table: Vec<usize> = (0..code.len()).collect();
    let mut open = Vec::new();
    for (i, p) in code.iter().enumerate() {
        if p.is_if() {
            open.push(i);
        } else if *p == Primitive::EndIf {
            let start = open
                .pop()
                .ok_or_else(|| GenomeError::Unbalanced(format!("ENDIF at {i} has no IF")))?;
            table[start] = i;
            table[i] = start;
        }
    }
    match open.pop() {
        Some(i) => Err(GenomeError::Unbalanced(format!(
            "IF at {i} is never closed"
        ))),
        None => Ok(table),
    }
}

/// All crossover units at all depths, ordered by start index.
pub fn enumerate_units(p: &Program) -> Result<Vec<Unit>, GenomeError> {
    let partners = partner_table(&p.code)?;
    let mut units = Vec::new();
    let mut depth = 0;
    for (i, prim) in p.code.iter().enumerate() {
        match prim {
            Primitive::EndIf => depth -= 1,
            Primitive::Assign { .. } => units.push(Unit {
                start: i,
                end: i + 1,
                depth,
            }),
            Primitive::IfEq { .. } | Primitive::IfNeq { .. } => {
                units.push(Unit {
                    start: i,
                    end: partners[i] + 1,
                    depth,
                });
                depth += 1;
            }
        }
    }
    Ok(units)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: Primitive = Primitive::Assign { dst: 0, src: 1 };
    const IF: Primitive = Primitive::IfEq { a: 0, b: 1 };
    const IFN: Primitive = Primitive::IfNeq { a: 0, b: 1 };
    const END: Primitive = Primitive::EndIf;

    fn spans(code: Vec<Primitive>) -> Vec<(usize, usize)> {
        enumerate_units(&Program::from(code))
            .unwrap()
            .into_iter()
            .map(|u| (u.start, u.end))
            .collect()
    }

    #[test]
    fn balance() {
        assert!(is_balanced(&[]));
        assert!(is_balanced(&[IF, A, END]));
        assert!(is_balanced(&[IF, IFN, END, END, A]));
        assert!(!is_balanced(&[END, IF]));
        assert!(!is_balanced(&[IF, A]));
        assert!(!is_balanced(&[IF, END, END]));
    }

    #[test]
    fn units_flat() {
        assert_eq!(spans(vec![A, A]), [(0, 1), (1, 2)]);
    }

    #[test]
    fn units_if_block() {
        assert_eq!(spans(vec![IF, A, END]), [(0, 3), (1, 2)]);
    }

    #[test]
    fn units_nested_blocks() {
        assert_eq!(spans(vec![IF, IFN, END, END]), [(0, 4), (1, 3)]);
    }

    #[test]
    fn units_reject_unbalanced() {
        assert!(matches!(
            enumerate_units(&Program::from(vec![IF, A])),
            Err(GenomeError::Unbalanced(_))
        ));
    }

    #[test]
    fn unit_depths() {
        let units = enumerate_units(&Program::from(vec![A, IF, A, IF, A, END, END])).unwrap();
        let depths: Vec<_> = units.iter().map(|u| u.depth).collect();
        assert_eq!(depths, [0, 0, 1, 1, 2]);
    }

    #[test]
    fn partners() {
        let p = Program::from(vec![IF, IFN, A, END, END]);
        assert_eq!(p.partners().unwrap(), [4, 3, 2, 1, 0]);
    }

    #[test]
    fn equality_ignores_fitness() {
        let mut a = Program::from(vec![A]);
        let b = Program::from(vec![A]);
        a.fitness = Some(FitnessValue::new(1, 2));
        assert_eq!(a, b);
    }
}
