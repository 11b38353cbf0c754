use super::{BoolExpr, ClauseRule, ClauseSource, Condition, Rule};

/// Splits a rule's IF part into disjunctive normal form, one clause per
/// disjunct. THEN conditions are copied onto every clause.
pub fn to_dnf(rule: &Rule) -> Vec<ClauseRule> {
    let then_conditions: Vec<Condition> =
        rule.then_expr.conditions().into_iter().cloned().collect();
    dnf_terms(&rule.if_expr)
        .into_iter()
        .map(|if_conjunction| ClauseRule {
            source: ClauseSource::Rule(rule.name.clone()),
            if_conjunction,
            then_conditions: then_conditions.clone(),
        })
        .collect()
}

/// The complement clause. It carries no conditions; the trace generator and
/// evaluator treat it as "matches no other clause".
pub fn make_default_clause(_rules: &[Rule]) -> ClauseRule {
    ClauseRule {
        source: ClauseSource::Default,
        if_conjunction: Vec::new(),
        then_conditions: Vec::new(),
    }
}

fn dnf_terms(expr: &BoolExpr) -> Vec<Vec<Condition>> {
    match expr {
        BoolExpr::Cond(c) => vec![vec![c.clone()]],
        BoolExpr::Or(l, r) => {
            let mut terms = dnf_terms(l);
            terms.extend(dnf_terms(r));
            terms
        }
        BoolExpr::And(l, r) => {
            let left = dnf_terms(l);
            let right = dnf_terms(r);
            let mut terms = Vec::with_capacity(left.len() * right.len());
            for a in &left {
                for b in &right {
                    terms.push(a.iter().chain(b).cloned().collect());
                }
            }
            terms
        }
    }
}
