//! Switch simulator. Runs genotypes directly: copy packet attributes into
//! registers, interpret primitives in order, copy attributes back out.

use indexmap::IndexMap;
use serde::Serialize;

use super::trace::{Trace, TracePacket};
use super::{EvalError, FitnessValue};
use crate::genome::{partner_table, Primitive, Program};
use crate::registry::RegisterFile;
use crate::rule_lang::Literal;

/// Interprets `code` over `regs`. A false IF jumps past its matching ENDIF
/// (`partners[pc]`). Writes to non-writable registers are refused.
#[inline]
fn execute<T: Clone + PartialEq>(
    code: &[Primitive],
    partners: &[usize],
    regs: &mut [T],
    writable: &[bool],
) -> Result<(), EvalError> {
    let mut pc = 0;
    while pc < code.len() {
        pc = match code[pc] {
            Primitive::Assign { dst, src } => {
                if !writable[dst as usize] {
                    return Err(EvalError::ReadOnlyWrite(dst));
                }
                regs[dst as usize] = regs[src as usize].clone();
                pc + 1
            }
            Primitive::IfEq { a, b } => {
                if regs[a as usize] == regs[b as usize] {
                    pc + 1
                } else {
                    partners[pc] + 1
                }
            }
            Primitive::IfNeq { a, b } => {
                if regs[a as usize] != regs[b as usize] {
                    pc + 1
                } else {
                    partners[pc] + 1
                }
            }
            Primitive::EndIf => pc + 1,
        };
    }
    Ok(())
}

fn writable_mask(rf: &RegisterFile) -> Vec<bool> {
    rf.registers().iter().map(|r| r.writable).collect()
}

/// Runs `p` on one packet and returns the output attribute values.
pub fn simulate(
    p: &Program,
    rf: &RegisterFile,
    pkt: &TracePacket,
) -> Result<IndexMap<String, Literal>, EvalError> {
    let partners = partner_table(&p.code)?;
    let mut regs: Vec<Literal> = Vec::with_capacity(rf.len());
    for r in rf.registers() {
        let v = match &r.value {
            Some(v) => v.clone(),
            None => pkt
                .inputs
                .get(&r.name)
                .cloned()
                .ok_or_else(|| EvalError::MissingInput(r.name.clone()))?,
        };
        regs.push(v);
    }
    execute(&p.code, &partners, &mut regs, &writable_mask(rf))?;
    Ok(rf
        .attributes()
        .map(|r| (r.name.clone(), regs[r.index as usize].clone()))
        .collect())
}

/// `A_c / (N × A_p)` over the whole trace.
pub fn fitness(p: &Program, trace: &Trace, rf: &RegisterFile) -> Result<FitnessValue, EvalError> {
    let partners = partner_table(&p.code)?;
    let c = &trace.compiled;
    debug_assert_eq!(c.base.len(), rf.len());
    let mut regs = c.base.clone();
    let mut satisfied = 0u64;
    let mut total = 0u64;
    for (inputs, checks) in c.inputs.iter().zip(&c.checks) {
        for &(reg, v) in inputs {
            regs[reg as usize] = v;
        }
        execute(&p.code, &partners, &mut regs, &c.writable)?;
        for (reg, check) in checks {
            total += 1;
            if check.holds(regs[*reg as usize]) {
                satisfied += 1;
            }
        }
    }
    Ok(FitnessValue::new(satisfied, total))
}

/// Per-packet fitness breakdown for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct PacketReport {
    pub index: usize,
    pub source: String,
    pub outputs: IndexMap<String, Literal>,
    /// `(attribute, satisfied)` per output condition.
    pub conditions: Vec<(String, bool)>,
}

impl PacketReport {
    pub fn for_trace(
        p: &Program,
        trace: &Trace,
        rf: &RegisterFile,
    ) -> Result<Vec<PacketReport>, EvalError> {
        trace
            .packets
            .iter()
            .enumerate()
            .map(|(index, pkt)| {
                let outputs = simulate(p, rf, pkt)?;
                let conditions = pkt
                    .output_conditions
                    .iter()
                    .map(|c| (c.attribute.clone(), c.holds(&outputs[&c.attribute])))
                    .collect();
                Ok(PacketReport {
                    index,
                    source: pkt.source.clone(),
                    outputs,
                    conditions,
                })
            })
            .collect()
    }

    pub fn satisfied(&self) -> usize {
        self.conditions.iter().filter(|(_, ok)| *ok).count()
    }
}
