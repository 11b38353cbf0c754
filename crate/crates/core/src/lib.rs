//! Synthesis of P4-style dataplane programs from behavioral rules.
//!
//! Operators describe the intended forwarding behavior as IF-THEN rules over
//! packet attributes. The library turns those rules into a register file and a
//! synthetic packet trace, then evolves linear programs of `ASSIGN`, `IF_EQ`,
//! `IF_NEQ` and `ENDIF` primitives until one satisfies every rule on the trace.
//! The winning genotype is rendered as P4-style source.
//!
//! The pipeline, module by module:
//!
//! * [`rule_lang`] parses rule files and derives DNF clauses.
//! * [`registry`] builds the typed register file.
//! * [`genome`] holds programs and the genetic operators.
//! * [`evaluator`] generates traces, simulates programs and scores them.
//! * [`engine`] runs the two-loop evolutionary search.
//! * [`codegen`] emits P4-style source.
//! * [`fixtures`] embeds the demonstration rule sets.
//! * [`cli`] and [`stats`] back the `p4gen` binary.

pub mod cli;
pub mod codegen;
pub mod engine;
pub mod evaluator;
pub mod fixtures;
pub mod genome;
pub mod registry;
pub mod rule_lang;
pub mod stats;
