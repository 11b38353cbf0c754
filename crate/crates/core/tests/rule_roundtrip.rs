use p4gen::rule_lang::parse_rules;
use proptest::prelude::*;

/// Attribute pools keep each attribute to a single type.
fn condition(prefix: &'static str) -> impl Strategy<Value = String> {
    let int = (prop::sample::select(vec!["port_num", "vlan"]), 0u64..70_000)
        .prop_map(|(a, v)| (a, v.to_string()));
    let ip = (
        prop::sample::select(vec!["src_ip", "dst_ip"]),
        any::<[u8; 4]>(),
    )
        .prop_map(|(a, b)| (a, format!("{}.{}.{}.{}", b[0], b[1], b[2], b[3])));
    let flag = any::<bool>().prop_map(|b| ("urgent", b.to_string()));
    let text =
        prop::sample::select(vec!["web", "dns", "a b"]).prop_map(|s| ("label", format!("\"{s}\"")));
    (prop_oneof![int, ip, flag, text], any::<bool>()).prop_map(move |((attr, value), eq)| {
        format!("{prefix}.{attr} {} {value}", if eq { "EQ" } else { "NEQ" })
    })
}

fn if_expr() -> impl Strategy<Value = String> {
    let leaf = condition("pkt_in");
    leaf.prop_recursive(3, 12, 3, |inner| {
        (
            prop::collection::vec(inner, 2..4),
            prop::collection::vec(any::<bool>(), 3),
        )
            .prop_map(|(terms, ops)| {
                let mut s = String::from("(");
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        s.push_str(if ops[i - 1] { " AND " } else { " OR " });
                    }
                    s.push_str(t);
                }
                s.push(')');
                s
            })
    })
}

fn rule_file() -> impl Strategy<Value = String> {
    let rule = (if_expr(), prop::collection::vec(condition("pkt_out"), 1..3));
    prop::collection::vec(rule, 1..4).prop_map(|rules| {
        rules
            .into_iter()
            .enumerate()
            .map(|(i, (cond, then))| format!("R{i}: IF ({cond}) THEN ({})\n", then.join(" AND ")))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn display_reparses_to_the_same_rule_set(text in rule_file()) {
        let rs = parse_rules(&text).unwrap();
        let printed = rs.to_string();
        let again = parse_rules(&printed).unwrap();
        prop_assert_eq!(&rs, &again);
        prop_assert_eq!(printed, again.to_string());
    }

    #[test]
    fn every_clause_implies_its_rule(text in rule_file()) {
        let rs = parse_rules(&text).unwrap();
        for clause in rs.clauses.iter().filter(|c| !c.is_default()) {
            prop_assert!(!clause.if_conjunction.is_empty());
        }
        prop_assert_eq!(rs.clauses.iter().filter(|c| c.is_default()).count(), 1);
    }
}

#[test]
fn whitespace_and_comments_are_ignored() {
    let a = parse_rules("R: IF (pkt_in.x EQ 1) THEN (pkt_out.y EQ 2)").unwrap();
    let b = parse_rules(
        "# header\n\n  R :\n IF ( pkt_in.x   EQ 1 )  # trailing\n THEN (pkt_out.y EQ 2)\n",
    )
    .unwrap();
    assert_eq!(a, b);
}
