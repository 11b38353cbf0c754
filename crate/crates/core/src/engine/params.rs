use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::genome::{UnitSelection, DEFAULT_BLOAT_CAP};

/// Evolutionary hyperparameters. Defaults follow the reference parameter
/// table: N = 3000, init_it = 200, max_it = 3000, lengths 1..=10, P_c = 1,
/// P_m = 0.4, P_if = 0.5, t_r = 0.05, n_r = 3, k = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub population_size: usize,
    pub init_it: usize,
    pub max_it: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub p_if: f64,
    pub tournament_size_ratio: f64,
    pub tournament_losers: usize,
    pub trace_multiplier: usize,
    /// Packets per clause in each validation trace. Larger values make
    /// overfitting to the evolution trace less likely to go unnoticed.
    pub validation_multiplier: usize,
    pub bloat_cap: usize,
    pub seed: u64,
    /// Seconds.
    pub wall_clock_limit: f64,
    pub unit_selection: UnitSelection,
}

impl Default for GpParams {
    fn default() -> Self {
        GpParams {
            population_size: 3000,
            init_it: 200,
            max_it: 3000,
            min_len: 1,
            max_len: 10,
            crossover_rate: 1.0,
            mutation_rate: 0.4,
            p_if: 0.5,
            tournament_size_ratio: 0.05,
            tournament_losers: 3,
            trace_multiplier: 1,
            validation_multiplier: 1,
            bloat_cap: DEFAULT_BLOAT_CAP,
            seed: 0,
            wall_clock_limit: 600.0,
            unit_selection: UnitSelection::All,
        }
    }
}

impl GpParams {
    /// Members per tournament, `ceil(t_r × N)`.
    pub fn tournament_size(&self) -> usize {
        (self.tournament_size_ratio * self.population_size as f64).ceil() as usize
    }

    pub fn wall_clock(&self) -> Duration {
        Duration::from_secs_f64(self.wall_clock_limit.max(0.0))
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {p}"))
            }
        };
        prob("crossover_rate", self.crossover_rate)?;
        prob("mutation_rate", self.mutation_rate)?;
        prob("p_if", self.p_if)?;
        if !(self.tournament_size_ratio > 0.0 && self.tournament_size_ratio <= 1.0) {
            return Err(format!(
                "tournament_size_ratio must lie in (0, 1], got {}",
                self.tournament_size_ratio
            ));
        }
        let t = self.tournament_size();
        if t < 2 {
            return Err(format!("tournaments need at least 2 members, got {t}"));
        }
        if self.population_size < 2 * t {
            return Err(format!(
                "population_size {} is smaller than two tournaments of {t}",
                self.population_size
            ));
        }
        if self.tournament_losers == 0 || self.tournament_losers >= t {
            return Err(format!(
                "tournament_losers must lie in [1, {}), got {}",
                t, self.tournament_losers
            ));
        }
        if self.init_it == 0 || self.init_it > self.max_it {
            return Err(format!(
                "need 1 <= init_it <= max_it, got {} and {}",
                self.init_it, self.max_it
            ));
        }
        if self.min_len > self.max_len {
            return Err(format!(
                "min_len {} exceeds max_len {}",
                self.min_len, self.max_len
            ));
        }
        if self.max_len >= self.bloat_cap {
            return Err(format!(
                "max_len {} must stay below bloat_cap {}",
                self.max_len, self.bloat_cap
            ));
        }
        if self.trace_multiplier == 0 || self.validation_multiplier == 0 {
            return Err("trace and validation multipliers must be at least 1".into());
        }
        if self.wall_clock_limit.is_nan() || self.wall_clock_limit <= 0.0 {
            return Err(format!(
                "wall_clock_limit must be positive, got {}",
                self.wall_clock_limit
            ));
        }
        Ok(())
    }

    /// Sets a field from `KEY=VALUE` style input. Accepts field names and the
    /// short symbols (`N`, `P_c`, `P_m`, `P_if`, `t_r`, `n_r`, `k`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.trim()
                .parse()
                .map_err(|_| format!("invalid value `{v}` for {key}"))
        }
        match key.trim() {
            "N" | "population_size" => self.population_size = num(key, value)?,
            "init_it" => self.init_it = num(key, value)?,
            "max_it" => self.max_it = num(key, value)?,
            "min_len" => self.min_len = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "P_c" | "crossover_rate" => self.crossover_rate = num(key, value)?,
            "P_m" | "mutation_rate" => self.mutation_rate = num(key, value)?,
            "P_if" | "p_if" => self.p_if = num(key, value)?,
            "t_r" | "tournament_size_ratio" => self.tournament_size_ratio = num(key, value)?,
            "n_r" | "tournament_losers" => self.tournament_losers = num(key, value)?,
            "k" | "trace_multiplier" => self.trace_multiplier = num(key, value)?,
            "validation_multiplier" => self.validation_multiplier = num(key, value)?,
            "bloat_cap" => self.bloat_cap = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "wall_clock_limit" => self.wall_clock_limit = num(key, value)?,
            "unit_selection" | "units" => {
                self.unit_selection = match value.trim() {
                    "all" => UnitSelection::All,
                    "toplevel" => UnitSelection::TopLevel,
                    other => return Err(format!("unknown unit selection `{other}`")),
                }
            }
            other => return Err(format!("unknown parameter `{other}`")),
        }
        Ok(())
    }

    /// Parses a `KEY=VALUE` assignment and applies it.
    pub fn apply(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=VALUE, got `{assignment}`"))?;
        self.set(k, v)
    }
}

/// Inner-loop generation budget of the `restart`-th inner loop (0-based):
/// `init_it`, doubled each restart, capped at `max_it`.
pub fn restart_budget(init_it: usize, max_it: usize, restart: usize) -> usize {
    let doubled = u32::try_from(restart)
        .ok()
        .and_then(|r| init_it.checked_mul(1usize.checked_shl(r)?))
        .unwrap_or(usize::MAX);
    doubled.min(max_it)
}

/// The endless sequence of inner-loop budgets.
pub fn budget_schedule(init_it: usize, max_it: usize) -> impl Iterator<Item = usize> {
    (0..).map(move |r| restart_budget(init_it, max_it, r))
}
