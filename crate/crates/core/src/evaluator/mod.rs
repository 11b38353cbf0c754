//! Program evaluation: synthetic traces, the switch simulator and the fitness
//! score.
//!
//! Fitness is the fraction of satisfied output conditions over the whole
//! trace, counted with integers. Every packet carries exactly one output
//! condition per attribute register.

mod sim;
mod trace;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::GenomeError;

pub use sim::{fitness, simulate, PacketReport};
pub use trace::{generate_trace, OutputCondition, Trace, TracePacket, SENTINELS_PER_TYPE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("trace multiplier k must be at least 1")]
    InvalidMultiplier,
    #[error("clause {clause} can never match: {reason}")]
    UnsatisfiableClause { clause: String, reason: String },
    #[error("no packet can avoid every rule, so the default clause has no members")]
    ValueExhaustion,
    #[error("rules {rules} demand conflicting values for `{attribute}` on the same packet")]
    ContradictoryRules { attribute: String, rules: String },
    #[error("packet has no value for attribute `{0}`")]
    MissingInput(String),
    #[error("program attempted to write read-only register {0}")]
    ReadOnlyWrite(u16),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

/// `satisfied / total` output conditions. An empty condition set counts as
/// fully satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FitnessValue {
    pub satisfied: u64,
    pub total: u64,
}

impl FitnessValue {
    pub fn new(satisfied: u64, total: u64) -> FitnessValue {
        debug_assert!(satisfied <= total);
        FitnessValue { satisfied, total }
    }

    pub fn value(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.satisfied == self.total
    }

    /// Compares by fraction, exactly. Values from the same trace share a
    /// denominator, but this also holds across traces.
    pub fn compare(&self, other: &Self) -> Ordering {
        let lhs = if self.total == 0 {
            (1, 1)
        } else {
            (self.satisfied, self.total)
        };
        let rhs = if other.total == 0 {
            (1, 1)
        } else {
            (other.satisfied, other.total)
        };
        (lhs.0 as u128 * rhs.1 as u128).cmp(&(rhs.0 as u128 * lhs.1 as u128))
    }
}

impl fmt::Display for FitnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.4})", self.satisfied, self.total, self.value())
    }
}

#[derive(Serialize, Deserialize)]
struct FitnessRepr {
    value: f64,
    satisfied: u64,
    total: u64,
}

impl Serialize for FitnessValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FitnessRepr {
            value: self.value(),
            satisfied: self.satisfied,
            total: self.total,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FitnessValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FitnessRepr::deserialize(d)?;
        Ok(FitnessValue::new(r.satisfied, r.total))
    }
}
