use rand::Rng;

use super::{
    enumerate_units, partner_table, GenomeError, Primitive, Program, UnitSelection,
    DEFAULT_BLOAT_CAP,
};
use crate::registry::{PrimitiveKind, RegisterFile, RegistryError};

/// A freshly drawn primitive. IF primitives always come with their ENDIF,
/// placed directly after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gene {
    Single(Primitive),
    Block(Primitive),
}

impl Gene {
    pub fn len(self) -> usize {
        match self {
            Gene::Single(_) => 1,
            Gene::Block(_) => 2,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn head(self) -> Primitive {
        match self {
            Gene::Single(p) | Gene::Block(p) => p,
        }
    }

    pub fn is_if(self) -> bool {
        matches!(self, Gene::Block(_))
    }

    fn insert_into(self, code: &mut Vec<Primitive>, at: usize) {
        match self {
            Gene::Single(p) => code.insert(at, p),
            Gene::Block(p) => {
                code.splice(at..at, [p, Primitive::EndIf]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationKind {
    Insert,
    Remove,
    Replace,
}

/// Draws an IF block with probability `p_if`, otherwise an ASSIGN. Operands
/// are uniform over the register file's compatible pairs. If the drawn
/// category has no pair at all, the other category is used instead.
pub fn random_primitive<R: Rng + ?Sized>(
    rf: &RegisterFile,
    p_if: f64,
    rng: &mut R,
) -> Result<Gene, RegistryError> {
    let want_if = rng.gen_bool(p_if.clamp(0.0, 1.0));
    let assign = rf.pairs(PrimitiveKind::Assign);
    let compare = rf.pairs(PrimitiveKind::IfEq);
    let use_if = match (compare.is_empty(), assign.is_empty()) {
        (true, true) => {
            return Err(RegistryError::NoValidPair {
                kind: if want_if {
                    PrimitiveKind::IfEq
                } else {
                    PrimitiveKind::Assign
                },
                type_tag: None,
            })
        }
        (true, false) => false,
        (false, true) => true,
        (false, false) => want_if,
    };
    if use_if {
        let (a, b) = compare[rng.gen_range(0..compare.len())];
        let prim = if rng.gen_bool(0.5) {
            Primitive::IfEq { a, b }
        } else {
            Primitive::IfNeq { a, b }
        };
        Ok(Gene::Block(prim))
    } else {
        let (dst, src) = assign[rng.gen_range(0..assign.len())];
        Ok(Gene::Single(Primitive::Assign { dst, src }))
    }
}

/// A random balanced program. The target length is uniform in
/// `[min_len, max_len]`; genes are inserted at uniform positions until the
/// length reaches the target, so an IF block drawn last can overshoot by one.
pub fn random_program<R: Rng + ?Sized>(
    rf: &RegisterFile,
    min_len: usize,
    max_len: usize,
    p_if: f64,
    rng: &mut R,
) -> Result<Program, GenomeError> {
    if min_len > max_len {
        return Err(GenomeError::InvalidLength {
            min: min_len,
            max: max_len,
        });
    }
    let target = rng.gen_range(min_len..=max_len);
    let mut code = Vec::with_capacity(target + 1);
    while code.len() < target {
        let gene = random_primitive(rf, p_if, rng).map_err(|_| GenomeError::EmptyRegisterFile)?;
        let at = rng.gen_range(0..=code.len());
        gene.insert_into(&mut code, at);
    }
    Ok(Program::from(code))
}

/// Mutates a copy of `p` with the default bloat cap.
pub fn mutate<R: Rng + ?Sized>(p: &Program, rf: &RegisterFile, p_if: f64, rng: &mut R) -> Program {
    mutate_with(p, rf, p_if, DEFAULT_BLOAT_CAP, rng).0
}

/// Picks an index `i` and, with equal probability, inserts a new gene at
/// `i + 1`, removes the primitive at `i`, or replaces it. Removing an IF or
/// ENDIF also removes its partner; replacing one removes the pair and inserts
/// the new gene where it stood. Empty programs always take the insert path.
/// An insert that would push the program past `cap` becomes a replace.
pub fn mutate_with<R: Rng + ?Sized>(
    p: &Program,
    rf: &RegisterFile,
    p_if: f64,
    cap: usize,
    rng: &mut R,
) -> (Program, MutationKind) {
    let mut code = p.code.clone();
    if code.is_empty() {
        if let Ok(gene) = random_primitive(rf, p_if, rng) {
            if gene.len() <= cap {
                gene.insert_into(&mut code, 0);
            }
        }
        return (Program::from(code), MutationKind::Insert);
    }

    let i = rng.gen_range(0..code.len());
    let mut kind = match rng.gen_range(0..3) {
        0 => MutationKind::Insert,
        1 => MutationKind::Remove,
        _ => MutationKind::Replace,
    };
    let partners = partner_table(&code).expect("mutate called on an unbalanced program");

    if kind == MutationKind::Insert {
        match random_primitive(rf, p_if, rng) {
            Ok(gene) if code.len() + gene.len() <= cap => {
                gene.insert_into(&mut code, i + 1);
                return (Program::from(code), kind);
            }
            Ok(_) => kind = MutationKind::Replace,
            Err(_) => return (Program::from(code), kind),
        }
    }

    // Removal of the primitive (and partner) at `i`; returns where the
    // removed primitive used to start in the shortened program.
    let remove_at = |code: &mut Vec<Primitive>| -> usize {
        let j = partners[i];
        if j == i {
            code.remove(i);
            i
        } else {
            let (lo, hi) = (i.min(j), i.max(j));
            code.remove(hi);
            code.remove(lo);
            if j < i {
                i - 1
            } else {
                i
            }
        }
    };

    match kind {
        MutationKind::Remove => {
            remove_at(&mut code);
        }
        MutationKind::Replace => {
            let at = remove_at(&mut code);
            // The freed slot(s) leave room for at least one primitive; only
            // fall back to ASSIGN when an IF block would break the cap.
            let room = cap.saturating_sub(code.len());
            let gene = if room >= 2 {
                random_primitive(rf, p_if, rng)
            } else {
                random_primitive(rf, 0.0, rng)
            };
            if let Ok(gene) = gene {
                if gene.len() <= room {
                    let at = at.min(code.len());
                    gene.insert_into(&mut code, at);
                }
            }
        }
        MutationKind::Insert => unreachable!(),
    }
    (Program::from(code), kind)
}

/// Unit-swap crossover with uniform selection over all units.
pub fn crossover<R: Rng + ?Sized>(p1: &Program, p2: &Program, rng: &mut R) -> (Program, Program) {
    crossover_with(p1, p2, UnitSelection::All, DEFAULT_BLOAT_CAP, rng)
}

/// Swaps one randomly chosen unit of `p1` with one of `p2`. If either program
/// has no unit, or a child would exceed `cap`, both parents come back
/// unchanged (fitness caches cleared).
pub fn crossover_with<R: Rng + ?Sized>(
    p1: &Program,
    p2: &Program,
    selection: UnitSelection,
    cap: usize,
    rng: &mut R,
) -> (Program, Program) {
    let pick = |p: &Program| {
        let units = enumerate_units(p).expect("crossover called on an unbalanced program");
        match selection {
            UnitSelection::All => units,
            UnitSelection::TopLevel => units.into_iter().filter(|u| u.depth == 0).collect(),
        }
    };
    let (units1, units2) = (pick(p1), pick(p2));
    let unchanged = || {
        (
            Program::from(p1.code.clone()),
            Program::from(p2.code.clone()),
        )
    };
    if units1.is_empty() || units2.is_empty() {
        return unchanged();
    }
    let u1 = &units1[rng.gen_range(0..units1.len())];
    let u2 = &units2[rng.gen_range(0..units2.len())];
    if p1.len() - u1.len() + u2.len() > cap || p2.len() - u2.len() + u1.len() > cap {
        return unchanged();
    }
    let mut c1 = p1.code.clone();
    c1.splice(u1.span(), p2.code[u2.span()].iter().copied());
    let mut c2 = p2.code.clone();
    c2.splice(u2.span(), p1.code[u1.span()].iter().copied());
    (Program::from(c1), Program::from(c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::build_registers;
    use crate::rule_lang::parse_rules;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const NAT: &str = "RULE1: IF (pkt_in.port_num EQ 0 AND pkt_in.src_ip EQ 192.168.1.1) THEN (pkt_out.src_ip EQ 10.0.0.10)
RULE2: IF (pkt_in.port_num EQ 1 AND pkt_in.dst_ip EQ 10.0.0.10) THEN (pkt_out.dst_ip EQ 192.168.1.1)";

    fn nat() -> RegisterFile {
        build_registers(&parse_rules(NAT).unwrap())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_length_program() {
        let p = random_program(&nat(), 0, 0, 0.5, &mut rng(1)).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn length_one_without_ifs() {
        let rf = nat();
        let p = random_program(&rf, 1, 1, 0.0, &mut rng(2)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.code[0].kind(), PrimitiveKind::Assign);
    }

    #[test]
    fn invalid_bounds() {
        assert_eq!(
            random_program(&nat(), 3, 2, 0.5, &mut rng(0)),
            Err(GenomeError::InvalidLength { min: 3, max: 2 })
        );
    }

    #[test]
    fn empty_register_file() {
        let rf = build_registers(&crate::rule_lang::RuleSet::empty());
        assert_eq!(
            random_program(&rf, 1, 3, 0.5, &mut rng(0)),
            Err(GenomeError::EmptyRegisterFile)
        );
    }

    #[test]
    fn default_bounds_statistics() {
        let rf = nat();
        let mut r = rng(3);
        for _ in 0..10_000 {
            let p = random_program(&rf, 1, 10, 0.5, &mut r).unwrap();
            assert!(p.is_balanced());
            assert!(p.is_type_valid(&rf));
            assert!((1..=11).contains(&p.len()), "len {}", p.len());
        }
    }

    fn if_fraction(p_if: f64) -> f64 {
        let rf = nat();
        let mut r = rng(4);
        let n = 10_000;
        let ifs = (0..n)
            .filter(|_| random_primitive(&rf, p_if, &mut r).unwrap().is_if())
            .count();
        ifs as f64 / n as f64
    }

    #[test]
    fn p_if_extremes() {
        assert_eq!(if_fraction(0.0), 0.0);
        assert_eq!(if_fraction(1.0), 1.0);
    }

    #[test]
    fn p_if_half() {
        let f = if_fraction(0.5);
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }

    #[test]
    fn if_kind_is_uniform() {
        let rf = nat();
        let mut r = rng(5);
        let n = 10_000;
        let eq = (0..n)
            .filter(|_| {
                matches!(
                    random_primitive(&rf, 1.0, &mut r).unwrap().head(),
                    Primitive::IfEq { .. }
                )
            })
            .count();
        assert!((eq as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn mutate_empty_inserts() {
        let rf = nat();
        let mut r = rng(7);
        for _ in 0..100 {
            let (m, kind) = mutate_with(&Program::empty(), &rf, 0.5, 200, &mut r);
            assert_eq!(kind, MutationKind::Insert);
            assert!(m.len() == 1 || m.len() == 2);
            assert!(m.is_balanced());
        }
    }

    #[test]
    fn remove_if_keeps_body() {
        let rf = nat();
        let ifp = Primitive::IfEq { a: 0, b: 3 };
        let body = Primitive::Assign { dst: 1, src: 5 };
        let p = Program::from(vec![ifp, body, Primitive::EndIf]);
        // Search seeds for a removal targeting index 0 or 2; either removes the pair.
        let mut seen = 0;
        for seed in 0..200 {
            let (m, kind) = mutate_with(&p, &rf, 0.5, 200, &mut rng(seed));
            if kind == MutationKind::Remove && m.len() == 1 {
                assert_eq!(m.code, vec![body]);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn mutation_modes_are_uniform() {
        let rf = nat();
        let mut r = rng(8);
        let base = random_program(&rf, 5, 5, 0.0, &mut r).unwrap();
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let (_, kind) = mutate_with(&base, &rf, 0.5, 200, &mut r);
            counts[kind as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn mutate_clears_fitness() {
        let rf = nat();
        let mut p = Program::from(vec![Primitive::Assign { dst: 1, src: 2 }]);
        p.fitness = Some(crate::evaluator::FitnessValue::new(1, 1));
        assert!(mutate(&p, &rf, 0.5, &mut rng(9)).fitness.is_none());
    }

    #[test]
    fn bloat_cap_respected() {
        let rf = nat();
        let mut r = rng(10);
        let mut p = random_program(&rf, 10, 10, 0.5, &mut r).unwrap();
        for _ in 0..5_000 {
            p = mutate_with(&p, &rf, 0.5, 12, &mut r).0;
            assert!(p.len() <= 12);
            assert!(p.is_balanced());
        }
    }

    #[test]
    fn single_unit_swap() {
        let a = Program::from(vec![Primitive::Assign { dst: 1, src: 2 }]);
        let b = Program::from(vec![Primitive::Assign { dst: 2, src: 5 }]);
        let (c1, c2) = crossover(&a, &b, &mut rng(11));
        assert_eq!((c1, c2), (b, a));
    }

    #[test]
    fn self_crossover_same_unit() {
        let rf = nat();
        let mut r = rng(12);
        let p = random_program(&rf, 6, 6, 0.5, &mut r).unwrap();
        let units = enumerate_units(&p).unwrap();
        // With a single-unit program the same unit is always drawn.
        let single = Program::from(p.code[units[0].span()].to_vec());
        let (c1, c2) = crossover(&single, &single, &mut r);
        assert_eq!(c1, single);
        assert_eq!(c2, single);
    }

    #[test]
    fn crossover_with_empty_is_identity() {
        let a = Program::from(vec![Primitive::Assign { dst: 1, src: 2 }]);
        let (c1, c2) = crossover(&a, &Program::empty(), &mut rng(13));
        assert_eq!(c1, a);
        assert!(c2.is_empty());
    }

    #[test]
    fn toplevel_selection() {
        let rf = nat();
        let mut r = rng(14);
        let outer = Program::from(vec![
            Primitive::IfEq { a: 0, b: 3 },
            Primitive::Assign { dst: 1, src: 5 },
            Primitive::EndIf,
        ]);
        let other = Program::from(vec![Primitive::Assign { dst: 2, src: 4 }]);
        for _ in 0..50 {
            let (c1, _) = crossover_with(&outer, &other, UnitSelection::TopLevel, 200, &mut r);
            assert_eq!(c1, other);
        }
        let _ = rf;
    }
}
