//! The two-loop search. The inner loop runs tournaments for a bounded number
//! of generations; the outer loop restarts from a fresh population with a
//! doubled budget until a program satisfies every output condition.

mod params;
mod search;

use std::time::Duration;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evaluator::{fitness, EvalError, FitnessValue, Trace};
use crate::genome::{crossover_with, mutate_with, random_program, GenomeError, Program};
use crate::registry::{RegisterFile, RegistryError};

pub use params::{budget_schedule, restart_budget, GpParams};
pub use search::{evolve, evolve_with, ProgressEvent, Synthesis};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("wall-clock limit hit after {:.1}s without a valid program", .0.stats.wall_clock.as_secs_f64())]
    TimeBudgetExceeded(Box<Synthesis>),
}

/// One point of the best-fitness trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub restart: usize,
    /// Bumped whenever a failed validation enlarges the evolution trace.
    pub epoch: usize,
    pub generation: usize,
    pub best: FitnessValue,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunStats {
    /// Generations run by each inner loop, in order.
    pub generations_used: Vec<usize>,
    /// Inner loops started after the first.
    pub restarts: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    #[serde(serialize_with = "secs")]
    pub wall_clock: Duration,
    pub fitness_evaluations: u64,
    pub validations_failed: usize,
    pub trace_packets: usize,
    /// Genotype lines of the returned program, if it validated.
    pub solution: Option<Vec<String>>,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl RunStats {
    pub fn total_generations(&self) -> usize {
        self.generations_used.iter().sum()
    }
}

fn evaluate(p: &mut Program, trace: &Trace, rf: &RegisterFile) -> Result<FitnessValue, EvalError> {
    let f = fitness(p, trace, rf)?;
    p.fitness = Some(f);
    Ok(f)
}

fn cached(p: &Program) -> FitnessValue {
    p.fitness.expect("population member without cached fitness")
}

/// Generates `N` random programs from `rng` (sequentially, so the stream is
/// reproducible) and evaluates them in parallel.
pub fn init_population<R: Rng + ?Sized>(
    params: &GpParams,
    trace: &Trace,
    rf: &RegisterFile,
    rng: &mut R,
) -> Result<Vec<Program>, EngineError> {
    let mut pop = (0..params.population_size)
        .map(|_| random_program(rf, params.min_len, params.max_len, params.p_if, rng))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_all(&mut pop, trace, rf)?;
    Ok(pop)
}

/// Re-scores every member against `trace`.
pub fn evaluate_all(
    pop: &mut [Program],
    trace: &Trace,
    rf: &RegisterFile,
) -> Result<(), EvalError> {
    pop.par_iter_mut()
        .try_for_each(|p| evaluate(p, trace, rf).map(|_| ()))
}

/// Index of the fittest member (first on ties).
pub fn best_index(pop: &[Program]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in pop.iter().enumerate() {
        if best.is_none_or(|b| cached(p).compare(&cached(&pop[b])).is_gt()) {
            best = Some(i);
        }
    }
    best
}

/// What reproduction did to one pair of winners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OffspringInfo {
    pub crossed: bool,
    pub mutated: [bool; 2],
}

/// Duplicate both winners, cross the copies with probability `P_c`, mutate
/// each copy with probability `P_m`, then score both.
pub fn make_offspring_pair<R: Rng + ?Sized>(
    w1: &Program,
    w2: &Program,
    params: &GpParams,
    rf: &RegisterFile,
    trace: &Trace,
    rng: &mut R,
) -> Result<(Program, Program), EvalError> {
    make_offspring_pair_traced(w1, w2, params, rf, trace, rng).map(|(a, b, _)| (a, b))
}

pub fn make_offspring_pair_traced<R: Rng + ?Sized>(
    w1: &Program,
    w2: &Program,
    params: &GpParams,
    rf: &RegisterFile,
    trace: &Trace,
    rng: &mut R,
) -> Result<(Program, Program, OffspringInfo), EvalError> {
    let mut info = OffspringInfo::default();
    let (mut a, mut b) = (w1.clone(), w2.clone());
    if rng.gen_bool(params.crossover_rate) {
        info.crossed = true;
        (a, b) = crossover_with(&a, &b, params.unit_selection, params.bloat_cap, rng);
    }
    for (i, child) in [&mut a, &mut b].into_iter().enumerate() {
        if rng.gen_bool(params.mutation_rate) {
            info.mutated[i] = true;
            *child = mutate_with(child, rf, params.p_if, params.bloat_cap, rng).0;
        }
    }
    evaluate(&mut a, trace, rf)?;
    evaluate(&mut b, trace, rf)?;
    Ok((a, b, info))
}

/// Members of one tournament, best first. Ties are broken by a random key.
fn run_tournament<R: Rng + ?Sized>(pop: &[Program], size: usize, rng: &mut R) -> Vec<usize> {
    let mut entrants: Vec<(usize, u64)> = sample(rng, pop.len(), size)
        .into_iter()
        .map(|i| (i, rng.gen()))
        .collect();
    entrants
        .sort_by(|(i, ki), (j, kj)| cached(&pop[*j]).compare(&cached(&pop[*i])).then(ki.cmp(kj)));
    entrants.into_iter().map(|(i, _)| i).collect()
}

/// Result of one generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOutcome {
    pub winners: (usize, usize),
    /// Population slots overwritten by offspring, in fill order.
    pub replaced: Vec<usize>,
}

/// Picks `2·n_r` distinct replacement slots: each tournament's bottom `n_r`,
/// skipping winners and slots already taken, walking upward from the worst.
fn pick_losers(a: &[usize], b: &[usize], n_r: usize, winners: (usize, usize)) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(2 * n_r);
    let eligible =
        |i: &usize, chosen: &[usize]| *i != winners.0 && *i != winners.1 && !chosen.contains(i);
    for ranking in [a, b] {
        let want = chosen.len() + n_r;
        for i in ranking.iter().rev() {
            if chosen.len() == want {
                break;
            }
            if eligible(i, &chosen) {
                chosen.push(*i);
            }
        }
    }
    // Both tournaments drained (heavy overlap): take from either, worst first.
    if chosen.len() < 2 * n_r {
        for ranking in [a, b] {
            for i in ranking.iter().rev() {
                if chosen.len() < 2 * n_r && eligible(i, &chosen) {
                    chosen.push(*i);
                }
            }
        }
    }
    chosen
}

/// One double tournament with replacement. Only the new offspring are scored.
pub fn step_generation<R: Rng + ?Sized>(
    pop: &mut [Program],
    params: &GpParams,
    trace: &Trace,
    rf: &RegisterFile,
    rng: &mut R,
) -> Result<GenerationOutcome, EvalError> {
    let size = params.tournament_size().min(pop.len());
    let a = run_tournament(pop, size, rng);
    let b = run_tournament(pop, size, rng);
    let winners = (a[0], b[0]);
    let losers = pick_losers(&a, &b, params.tournament_losers, winners);

    let (w1, w2) = (pop[winners.0].clone(), pop[winners.1].clone());
    let mut offspring = Vec::with_capacity(losers.len() + 1);
    while offspring.len() < losers.len() {
        let (x, y) = make_offspring_pair(&w1, &w2, params, rf, trace, rng)?;
        offspring.push(x);
        offspring.push(y);
    }
    for (&slot, child) in losers.iter().zip(offspring) {
        pop[slot] = child;
    }
    Ok(GenerationOutcome {
        winners,
        replaced: losers,
    })
}
