use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    best_index, cached, evaluate, evaluate_all, init_population, restart_budget, step_generation,
    EngineError, GpParams, RunStats, TrajectoryPoint,
};
use crate::evaluator::{fitness, generate_trace, FitnessValue, Trace};
use crate::genome::{format_genotype, Program};
use crate::registry::{PrimitiveKind, RegisterFile, RegistryError};
use crate::rule_lang::RuleSet;

/// Outcome of a search. `program` carries its fitness on the final
/// evolution `trace`.
#[derive(Debug, Clone, Serialize)]
pub struct Synthesis {
    #[serde(skip)]
    pub program: Program,
    #[serde(skip)]
    pub trace: Trace,
    pub solved: bool,
    pub best_fitness: Option<FitnessValue>,
    pub stats: RunStats,
}

/// Emitted whenever the best fitness of the current population changes and
/// at the start of every inner loop.
#[derive(Debug, Clone, Serialize)]
pub struct ProgressEvent {
    pub restart: usize,
    pub generation: usize,
    pub best_fitness: f64,
    pub elapsed_ms: u64,
}

/// Runs the search until a program scores 1.0 on both the evolution trace
/// and a freshly generated validation trace.
pub fn evolve(rules: &RuleSet, params: &GpParams) -> Result<Synthesis, EngineError> {
    evolve_with(rules, params, |_| {})
}

struct Run<'a, F> {
    rules: &'a RuleSet,
    params: &'a GpParams,
    rf: RegisterFile,
    trace: Trace,
    val_rng: ChaCha8Rng,
    start: Instant,
    stats: RunStats,
    epoch: usize,
    best_overall: Option<Program>,
    progress: F,
}

impl<F: FnMut(&ProgressEvent)> Run<'_, F> {
    fn record(&mut self, restart: usize, generation: usize, best: FitnessValue) {
        self.stats.trajectory.push(TrajectoryPoint {
            restart,
            epoch: self.epoch,
            generation,
            best,
        });
        (self.progress)(&ProgressEvent {
            restart,
            generation,
            best_fitness: best.value(),
            elapsed_ms: self.start.elapsed().as_millis() as u64,
        });
    }

    fn remember(&mut self, candidate: &Program) {
        let better = match &self.best_overall {
            None => true,
            Some(b) => cached(candidate).compare(&cached(b)).is_gt(),
        };
        if better {
            self.best_overall = Some(candidate.clone());
        }
    }

    /// Checks `p` on a fresh trace. On failure the evolution trace absorbs the
    /// validation packets.
    fn validate(&mut self, p: &Program) -> Result<bool, EngineError> {
        let fresh = generate_trace(
            self.rules,
            &self.rf,
            self.params.validation_multiplier,
            &mut self.val_rng,
        )?;
        if fitness(p, &fresh, &self.rf)?.is_perfect() {
            return Ok(true);
        }
        self.stats.validations_failed += 1;
        self.trace = self.trace.union(&fresh, &self.rf)?;
        self.epoch += 1;
        // Earlier bests were scored on a smaller trace.
        if let Some(b) = self.best_overall.as_mut() {
            evaluate(b, &self.trace, &self.rf)?;
        }
        Ok(false)
    }

    fn finish(mut self, program: Program, solved: bool) -> Synthesis {
        self.stats.wall_clock = self.start.elapsed();
        self.stats.trace_packets = self.trace.len();
        if solved {
            self.stats.solution = Some(
                format_genotype(&program, &self.rf)
                    .lines()
                    .map(str::to_owned)
                    .collect(),
            );
        }
        Synthesis {
            best_fitness: program.fitness,
            program,
            trace: self.trace,
            solved,
            stats: self.stats,
        }
    }

    fn timed_out(&self) -> bool {
        self.start.elapsed() >= self.params.wall_clock()
    }

    fn timeout(mut self) -> EngineError {
        let best = self.best_overall.take().unwrap_or_else(Program::empty);
        EngineError::TimeBudgetExceeded(Box::new(self.finish(best, false)))
    }
}

/// [`evolve`] with a progress callback.
pub fn evolve_with(
    rules: &RuleSet,
    params: &GpParams,
    progress: impl FnMut(&ProgressEvent),
) -> Result<Synthesis, EngineError> {
    let start = Instant::now();
    params.validate().map_err(EngineError::InvalidParams)?;
    let rf = RegisterFile::new(rules)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Validation traces come from an independent stream of the same seed.
    let mut val_rng = ChaCha8Rng::seed_from_u64(params.seed);
    val_rng.set_stream(1);
    let trace = generate_trace(rules, &rf, params.trace_multiplier, &mut rng)?;
    let mut run = Run {
        rules,
        params,
        rf,
        trace,
        val_rng,
        start,
        stats: RunStats::default(),
        epoch: 0,
        best_overall: None,
        progress,
    };

    let no_primitives = run.rf.pairs(PrimitiveKind::Assign).is_empty()
        && run.rf.pairs(PrimitiveKind::IfEq).is_empty();
    if no_primitives {
        // Only the empty program exists.
        let mut p = Program::empty();
        let f = evaluate(&mut p, &run.trace, &run.rf)?;
        run.stats.fitness_evaluations += 1;
        run.stats.generations_used.push(0);
        run.record(0, 0, f);
        if f.is_perfect() && run.validate(&p)? {
            return Ok(run.finish(p, true));
        }
        return Err(RegistryError::NoValidPair {
            kind: PrimitiveKind::Assign,
            type_tag: None,
        }
        .into());
    }

    for restart in 0.. {
        if restart > 0 {
            run.stats.restarts += 1;
        }
        if run.timed_out() {
            return Err(run.timeout());
        }
        let budget = restart_budget(params.init_it, params.max_it, restart);
        let mut pop = init_population(params, &run.trace, &run.rf, &mut rng)?;
        run.stats.fitness_evaluations += pop.len() as u64;
        let mut best = best_index(&pop).expect("population is non-empty");
        run.remember(&pop[best]);
        run.record(restart, 0, cached(&pop[best]));

        let mut generation = 0;
        loop {
            while cached(&pop[best]).is_perfect() {
                let candidate = pop[best].clone();
                if run.validate(&candidate)? {
                    run.stats.generations_used.push(generation);
                    return Ok(run.finish(candidate, true));
                }
                evaluate_all(&mut pop, &run.trace, &run.rf)?;
                run.stats.fitness_evaluations += pop.len() as u64;
                best = best_index(&pop).expect("population is non-empty");
                run.remember(&pop[best]);
                run.record(restart, generation, cached(&pop[best]));
            }
            if generation == budget {
                break;
            }
            if run.timed_out() {
                run.stats.generations_used.push(generation);
                return Err(run.timeout());
            }
            let out = step_generation(&mut pop, params, &run.trace, &run.rf, &mut rng)?;
            run.stats.fitness_evaluations += out.replaced.len() as u64;
            generation += 1;

            let before = cached(&pop[best]);
            if out.replaced.contains(&best) {
                best = best_index(&pop).expect("population is non-empty");
            } else {
                for &i in &out.replaced {
                    if cached(&pop[i]).compare(&cached(&pop[best])).is_gt() {
                        best = i;
                    }
                }
            }
            let now = cached(&pop[best]);
            debug_assert!(now.compare(&before).is_ge(), "best fitness decreased");
            if now.compare(&before).is_gt() {
                run.remember(&pop[best]);
                run.record(restart, generation, now);
            }
        }
        run.stats.generations_used.push(generation);
    }
    unreachable!("the restart loop only exits by returning")
}
