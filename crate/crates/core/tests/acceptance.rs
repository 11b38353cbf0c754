//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use p4gen::codegen::{emit, parse_body};
use p4gen::engine::{evolve, restart_budget, EngineError, GpParams};
use p4gen::evaluator::{fitness, generate_trace, simulate, Trace, TracePacket};
use p4gen::fixtures;
use p4gen::genome::{
    crossover_with, is_balanced, mutate_with, random_program, Primitive, Program, UnitSelection,
    DEFAULT_BLOAT_CAP,
};
use p4gen::registry::{build_registers, RegIndex, RegisterFile};
use p4gen::rule_lang::{parse_rules, Literal, RuleSet};
use p4gen::stats::summarize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rules(text: &str) -> RuleSet {
    parse_rules(text).expect("fixture parses")
}

/// Runs `reps` seeded syntheses and returns `(solved, seconds)` per run.
fn runs(rs: &RuleSet, base: &GpParams, seeds: impl Iterator<Item = u64>) -> Vec<(bool, f64)> {
    seeds
        .map(|seed| {
            let params = GpParams {
                seed,
                ..base.clone()
            };
            let start = Instant::now();
            let solved = match evolve(rs, &params) {
                Ok(s) => s.solved,
                Err(EngineError::TimeBudgetExceeded(_)) => false,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            (solved, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn solve_rate(name: &str, text: &str, reps: u64, need: usize, limit: f64) -> Outcome {
    let rs = rules(text);
    let base = GpParams {
        wall_clock_limit: limit,
        ..GpParams::default()
    };
    let results = runs(&rs, &base, 0..reps);
    let solved = results
        .iter()
        .filter(|(ok, secs)| *ok && *secs <= limit)
        .count();
    let secs: Vec<f64> = results.iter().map(|r| r.1).collect();
    let s = summarize(&secs).expect("runs");
    outcome(
        solved >= need,
        format!(
            "{name}: {solved}/{reps} solved within {limit}s (need {need}); median {:.3}s, max {:.3}s",
            s.median, s.max
        ),
    )
}

fn crit1() -> Outcome {
    solve_rate("nat", fixtures::NAT, 100, 95, 120.0)
}

fn crit2() -> Outcome {
    solve_rate("router", fixtures::ROUTER, 100, 90, 600.0)
}

fn crit3() -> Outcome {
    let got: Vec<usize> = (0..7).map(|r| restart_budget(200, 3000, r)).collect();
    let fixed_ok = got == [200, 400, 800, 1600, 3000, 3000, 3000];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut law_ok = true;
    for _ in 0..20 {
        let init = rng.gen_range(1..=1000usize);
        let max = init + rng.gen_range(0..=20_000usize);
        // Oracle: simulate the loop, doubling and clamping each restart.
        let mut budget = init;
        for r in 0..30 {
            law_ok &= restart_budget(init, max, r) == budget.min(max);
            budget = (budget * 2).min(max);
        }
    }
    outcome(
        fixed_ok && law_ok,
        format!("schedule {got:?}; doubling-with-cap law over 20 random pairs: {law_ok}"),
    )
}

fn sorted(code: impl IntoIterator<Item = Primitive>) -> Vec<Primitive> {
    let mut v: Vec<_> = code.into_iter().collect();
    v.sort();
    v
}

fn crit4() -> Outcome {
    let rf = build_registers(&rules(fixtures::ROUTER));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let mut bad_mut = 0;
    for _ in 0..n {
        let p = random_program(&rf, 0, 30, 0.5, &mut rng).unwrap();
        let q = mutate_with(&p, &rf, 0.5, DEFAULT_BLOAT_CAP, &mut rng).0;
        if !(q.is_balanced() && q.is_type_valid(&rf)) {
            bad_mut += 1;
        }
    }
    let mut bad_cross = 0;
    let mut not_conserved = 0;
    for i in 0..n {
        let a = random_program(&rf, 0, 30, 0.5, &mut rng).unwrap();
        let b = random_program(&rf, 0, 30, 0.5, &mut rng).unwrap();
        let sel = if i % 2 == 0 {
            UnitSelection::All
        } else {
            UnitSelection::TopLevel
        };
        let (c, d) = crossover_with(&a, &b, sel, DEFAULT_BLOAT_CAP, &mut rng);
        if !(c.is_balanced() && d.is_balanced() && c.is_type_valid(&rf) && d.is_type_valid(&rf)) {
            bad_cross += 1;
        }
        if sorted(a.code.iter().chain(&b.code).copied())
            != sorted(c.code.iter().chain(&d.code).copied())
        {
            not_conserved += 1;
        }
    }
    outcome(
        bad_mut == 0 && bad_cross == 0 && not_conserved == 0,
        format!(
            "{n} mutations: {bad_mut} malformed; {n} crossovers: {bad_cross} malformed, {not_conserved} changed the primitive multiset"
        ),
    )
}

/// Reference interpreter: values keyed by register index, false IFs scan
/// forward counting nesting depth until the matching ENDIF.
fn oracle_run(
    code: &[Primitive],
    rf: &RegisterFile,
    pkt: &TracePacket,
) -> HashMap<String, Literal> {
    let mut val: HashMap<RegIndex, Literal> = HashMap::new();
    for r in rf.registers() {
        let v = r
            .value
            .clone()
            .unwrap_or_else(|| pkt.inputs[&r.name].clone());
        val.insert(r.index, v);
    }
    let mut pc = 0;
    while pc < code.len() {
        let cond = match code[pc] {
            Primitive::Assign { dst, src } => {
                let v = val[&src].clone();
                val.insert(dst, v);
                None
            }
            Primitive::IfEq { a, b } => Some(val[&a] == val[&b]),
            Primitive::IfNeq { a, b } => Some(val[&a] != val[&b]),
            Primitive::EndIf => None,
        };
        pc += 1;
        if cond == Some(false) {
            let mut depth = 1;
            while depth > 0 {
                match code[pc] {
                    Primitive::EndIf => depth -= 1,
                    Primitive::IfEq { .. } | Primitive::IfNeq { .. } => depth += 1,
                    Primitive::Assign { .. } => {}
                }
                pc += 1;
            }
        }
    }
    rf.attributes()
        .map(|r| (r.name.clone(), val[&r.index].clone()))
        .collect()
}

fn enumerate_programs(alphabet: &[Primitive], max_len: usize) -> Vec<Vec<Primitive>> {
    let mut all = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for &p in alphabet {
                let mut v: Vec<Primitive> = prefix.clone();
                v.push(p);
                next.push(v);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all.into_iter().filter(|c| is_balanced(c)).collect()
}

fn crit5() -> Outcome {
    let rs = rules("R: IF (pkt_in.a EQ 1) THEN (pkt_out.b EQ 2)");
    let rf = build_registers(&rs);
    let shape_ok = rf.attribute_count() == 2 && rf.constants().count() == 2;
    let trace = generate_trace(&rs, &rf, 5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let n = rf.len() as RegIndex;
    let mut alphabet = vec![Primitive::EndIf];
    for x in 0..n {
        for y in 0..n {
            for p in [
                Primitive::Assign { dst: x, src: y },
                Primitive::IfEq { a: x, b: y },
                Primitive::IfNeq { a: x, b: y },
            ] {
                if p.is_type_valid(&rf) {
                    alphabet.push(p);
                }
            }
        }
    }
    let programs = enumerate_programs(&alphabet, 4);
    let mut mismatches = 0usize;
    for code in &programs {
        let prog = Program::from(code.clone());
        let mut satisfied = 0u64;
        let mut total = 0u64;
        for pkt in &trace.packets {
            let expected = oracle_run(code, &rf, pkt);
            let got = simulate(&prog, &rf, pkt).unwrap();
            if got.len() != expected.len() || got.iter().any(|(k, v)| expected.get(k) != Some(v)) {
                mismatches += 1;
            }
            for c in &pkt.output_conditions {
                total += 1;
                satisfied += c.holds(&expected[&c.attribute]) as u64;
            }
        }
        let f = fitness(&prog, &trace, &rf).unwrap();
        if (f.satisfied, f.total) != (satisfied, total) {
            mismatches += 1;
        }
    }
    outcome(
        shape_ok && trace.len() == 10 && mismatches == 0 && programs.len() > 1000,
        format!(
            "{} programs x {} packets over {} primitives: {mismatches} mismatches",
            programs.len(),
            trace.len(),
            alphabet.len()
        ),
    )
}

fn crit6() -> Outcome {
    let rs = rules(fixtures::NAT);
    let rf = build_registers(&rs);
    let trace = generate_trace(&rs, &rf, 1, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let f = fitness(&Program::empty(), &trace, &rf).unwrap();
    let defaults: Trace = trace
        .filter(&rf, |p| p.source == p4gen::rule_lang::DEFAULT_CLAUSE)
        .unwrap();
    let d = fitness(&Program::empty(), &defaults, &rf).unwrap();
    outcome(
        (f.satisfied, f.total) == (7, 9) && d.is_perfect() && d.value() == 1.0,
        format!("empty program on NAT trace: {f}; on default-only trace: {d}"),
    )
}

fn crit7() -> Outcome {
    let rs = rules(fixtures::ROUTER);
    let with = GpParams {
        crossover_rate: 1.0,
        ..GpParams::default()
    };
    let without = GpParams {
        crossover_rate: 0.0,
        ..GpParams::default()
    };
    let mut t_with = Vec::new();
    let mut t_without = Vec::new();
    for seed in 0..30 {
        t_with.extend(
            runs(&rs, &with, std::iter::once(seed))
                .into_iter()
                .map(|r| r.1),
        );
        t_without.extend(
            runs(&rs, &without, std::iter::once(seed))
                .into_iter()
                .map(|r| r.1),
        );
    }
    let m1 = summarize(&t_with).unwrap().median;
    let m0 = summarize(&t_without).unwrap().median;
    outcome(
        m1 < m0,
        format!("router median over 30 runs: P_c=1 {m1:.4}s vs P_c=0 {m0:.4}s"),
    )
}

fn crit8() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_p4gen");
    let rules = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/router.rules");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(format!("{run}.p4"));
        let status = Command::new(bin)
            .arg("synth")
            .arg(&rules)
            .arg("-o")
            .arg(&out)
            .args(["--seed", "8"])
            .output()
            .expect("binary runs")
            .status;
        let read = |suffix: &str| fs::read(dir.path().join(format!("{run}{suffix}"))).ok();
        outputs.push((status.code(), read(".genotype"), read(".body.p4")));
    }
    let ok = outputs[0].0 == Some(0)
        && outputs[0].1.is_some()
        && outputs[0].2.is_some()
        && outputs[0] == outputs[1];
    outcome(
        ok,
        format!(
            "two synth runs with --seed 8: genotype and body identical = {}",
            outputs[0] == outputs[1]
        ),
    )
}

fn crit9() -> Outcome {
    let rs = rules(fixtures::NAT);
    let rf = build_registers(&rs);
    let trace = generate_trace(&rs, &rf, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for _ in 0..1000 {
        let p = random_program(&rf, 0, 30, 0.5, &mut rng).unwrap();
        let body = emit(&p, &rf).unwrap().body;
        let back = match parse_body(&body, &rf) {
            Ok(b) => b,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let same = trace
            .packets
            .iter()
            .all(|pkt| simulate(&p, &rf, pkt).unwrap() == simulate(&back, &rf, pkt).unwrap());
        if !same {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "1000 random programs, emit -> reparse -> simulate on {} packets: {failures} failures",
            trace.len()
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("1 end-to-end NAT synthesis", crit1),
        ("2 router synthesis", crit2),
        ("3 restart budget schedule", crit3),
        ("4 genetic operator safety", crit4),
        ("5 simulator oracle equivalence", crit5),
        ("6 fitness exactness", crit6),
        ("7 crossover ablation", crit7),
        ("8 synth determinism", crit8),
        ("9 codegen round trip", crit9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
