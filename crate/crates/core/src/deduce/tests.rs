use super::*;
use crate::dynamics::{DomainSpec, SequenceParams};
use crate::presentation::{harvest, kernel_member, HarvestConfig, KernelAnswer};

fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

fn pos_params(p: i64, q: i64) -> SequenceParams {
    SequenceParams::new(big(p), big(q), DomainSpec::PositiveIntegers).unwrap()
}

fn h_pos(p: i64, q: i64) -> GroupRef {
    GroupRef::h(big(p), big(q), DomainSpec::PositiveIntegers).unwrap()
}

/// Harvests, certifies, and asserts `x` in the kernel for `(p, q)`.
fn assert_certified_kernel(store: &mut FactStore, p: i64, q: i64, x: i64) -> FactId {
    let params = pos_params(p, q);
    let config = HarvestConfig {
        seed_bound: 10,
        ..HarvestConfig::default()
    };
    let handle = harvest(&params, &config).unwrap();
    let KernelAnswer::Yes(cert) = kernel_member(&big(x), &handle).unwrap() else {
        panic!("{x} must certify for ({p},{q})");
    };
    store.assert_kernel_member(&handle, &big(x), &cert).unwrap()
}

#[test]
fn certified_kernel_fact_round() {
    let mut store = FactStore::new();
    let id = assert_certified_kernel(&mut store, 7, 2, 8);
    let fact = store.get(id).unwrap();
    assert_eq!(fact.status, FactStatus::Certified);
    assert!(matches!(
        &fact.statement,
        Statement::KernelMember { element, .. } if element == &big(8)
    ));
    store.replay_chain(id).unwrap();
}

#[test]
fn asserting_twice_returns_the_same_id() {
    let mut store = FactStore::new();
    let a = assert_certified_kernel(&mut store, 7, 2, 8);
    let b = assert_certified_kernel(&mut store, 7, 2, 8);
    assert_eq!(a, b);
    assert_eq!(store.len(), 1);
}

#[test]
fn hypotheses_do_not_need_certificates() {
    let mut store = FactStore::new();
    let id = store
        .assert_hypothesis(Statement::SingleClass {
            params: pos_params(3, 2),
        })
        .unwrap();
    assert_eq!(store.get(id).unwrap().status, FactStatus::Hypothesis);
}

#[test]
fn certified_facts_require_derivations() {
    let mut store = FactStore::new();
    let err = store.assert_fact(
        Statement::Trivial { group: h_pos(3, 2) },
        FactStatus::Certified,
        None,
    );
    assert!(matches!(err, Err(DeduceError::InvalidCertificate(_))));
}

#[test]
fn status_upgrade_on_stronger_reassertion() {
    let mut store = FactStore::new();
    let weak = store
        .assert_hypothesis(Statement::KernelMember {
            element: big(8),
            group: h_pos(7, 2),
        })
        .unwrap();
    let strong = assert_certified_kernel(&mut store, 7, 2, 8);
    assert_eq!(weak, strong);
    assert_eq!(store.get(weak).unwrap().status, FactStatus::Certified);
    assert!(store
        .log()
        .iter()
        .any(|e| matches!(e, LogEntry::Upgraded { fact } if *fact == weak)));
}

#[test]
fn r4_derives_mutual_quotients_for_the_worked_pairs() {
    let mut store = FactStore::new();
    for (p, q, x) in [(7, 2, 8), (7, 16, 8), (5, 2, 6), (5, 12, 6), (3, 2, 4), (3, 8, 4)] {
        assert_certified_kernel(&mut store, p, q, x);
    }
    store.apply_rules(4).unwrap();

    for (p, small, large) in [(7, 2, 16), (5, 2, 12), (3, 2, 8)] {
        for (a, b) in [(small, large), (large, small)] {
            let id = store
                .find(&Statement::QuotientOf {
                    quotient: h_pos(p, a),
                    of: h_pos(p, b),
                })
                .unwrap_or_else(|| panic!("missing QuotientOf(H[{p},{a}], H[{p},{b}])"));
            let fact = store.get(id).unwrap();
            assert_eq!(fact.status, FactStatus::Certified);
            store.replay_chain(id).unwrap();
        }
    }
}

#[test]
fn requested_power_quotient_is_certified() {
    let mut store = FactStore::new();
    let id = request_power_quotient(
        &mut store,
        big(3),
        big(2),
        3,
        DomainSpec::PositiveIntegers,
    )
    .unwrap();
    let fact = store.get(id).unwrap();
    assert_eq!(
        fact.statement,
        Statement::QuotientOf {
            quotient: h_pos(3, 2),
            of: h_pos(3, 8),
        }
    );
    assert_eq!(fact.status, FactStatus::Certified);
    store.replay_chain(id).unwrap();
}

#[test]
fn single_class_hypothesis_yields_conditional_order_bound() {
    let mut store = FactStore::new();
    let sc = store
        .assert_hypothesis(Statement::SingleClass {
            params: pos_params(3, 2),
        })
        .unwrap();
    store.apply_rules(4).unwrap();
    let id = store
        .find(&Statement::OrderAtMost {
            group: GroupRef::h(big(3), big(2), DomainSpec::NonzeroIntegers).unwrap(),
            bound: big(3),
        })
        .expect("order bound derived");
    match &store.get(id).unwrap().status {
        FactStatus::Conditional { assumes } => {
            assert_eq!(assumes.iter().copied().collect::<Vec<_>>(), vec![sc]);
        }
        other => panic!("expected conditional, got {other:?}"),
    }
}

#[test]
fn power_roots_collapse_from_single_class() {
    let mut store = FactStore::new();
    store
        .assert_hypothesis(Statement::SingleClass {
            params: pos_params(3, 16),
        })
        .unwrap();
    store.apply_rules(4).unwrap();
    for q in [2i64, 4, 16] {
        let id = store
            .find(&Statement::Trivial { group: h_pos(3, q) })
            .unwrap_or_else(|| panic!("missing Trivial(H[3,{q}])"));
        assert!(matches!(
            store.get(id).unwrap().status,
            FactStatus::Conditional { .. }
        ));
    }
}

#[test]
fn kernel_products_sum_their_certificates() {
    let mut store = FactStore::new();
    let params = pos_params(3, 2);
    let config = HarvestConfig {
        seed_bound: 10,
        ..HarvestConfig::default()
    };
    let handle = harvest(&params, &config).unwrap();
    let mut witnesses = Vec::new();
    for x in [4i64, 16] {
        let KernelAnswer::Yes(cert) = kernel_member(&big(x), &handle).unwrap() else {
            panic!("{x} certifies");
        };
        store.assert_kernel_member(&handle, &big(x), &cert).unwrap();
        witnesses.push(cert);
    }
    store.apply_rules(2).unwrap();

    let id = store
        .find(&Statement::KernelMember {
            element: big(64),
            group: h_pos(3, 2),
        })
        .expect("product fact derived");
    let fact = store.get(id).unwrap();
    assert_eq!(fact.status, FactStatus::Certified);
    let derivation = fact.derivation.as_ref().unwrap();
    assert_eq!(derivation.rule, RuleId::R13);
    let witness = derivation.witness.as_ref().unwrap();

    // coefficient-wise sum of the premise certificates
    let mut expected: std::collections::BTreeMap<usize, BigInt> = Default::default();
    for cert in &witnesses {
        for (i, k) in &cert.coefficients {
            *expected.entry(*i).or_default() += k;
        }
    }
    let summed: Vec<(usize, BigInt)> = expected.into_iter().filter(|(_, k)| !k.is_zero()).collect();
    assert_eq!(witness.coefficients, summed);
    store.replay_chain(id).unwrap();
}

#[test]
fn conclusions_are_certified_exactly_when_all_premises_are() {
    let mut store = FactStore::new();
    assert_certified_kernel(&mut store, 7, 2, 8);
    assert_certified_kernel(&mut store, 7, 16, 8);
    let sc = store
        .assert_hypothesis(Statement::SingleClass {
            params: pos_params(7, 16),
        })
        .unwrap();
    store.apply_rules(4).unwrap();

    for fact in store.facts() {
        let Some(d) = &fact.derivation else { continue };
        if d.rule == RuleId::External {
            continue;
        }
        let all_certified = d
            .premises
            .iter()
            .all(|&p| store.get(p).unwrap().status == FactStatus::Certified);
        assert_eq!(
            all_certified,
            fact.status == FactStatus::Certified,
            "fact {}: {:?}",
            fact.id,
            fact.statement
        );
    }
    // the single-class hypothesis fed at least one conditional conclusion
    assert!(store.facts().iter().any(|f| matches!(
        &f.status,
        FactStatus::Conditional { assumes } if assumes.contains(&sc)
    )));
}

#[test]
fn query_patterns() {
    let mut store = FactStore::new();
    for (p, q, x) in [(5, 2, 6), (5, 12, 6)] {
        assert_certified_kernel(&mut store, p, q, x);
    }
    store.apply_rules(4).unwrap();

    // QuotientOf(H[5,2], ?) must include H[5,12]
    let pattern = Pattern {
        kind: Some(StatementKind::QuotientOf),
        groups: vec![Some(h_pos(5, 2))],
        ..Pattern::default()
    };
    let hits = store.query(&pattern);
    assert!(hits.iter().any(|f| matches!(
        &f.statement,
        Statement::QuotientOf { of, .. } if of == &h_pos(5, 12)
    )));

    // Trivial(?) on this store is empty
    assert!(store.query(&Pattern::by_kind(StatementKind::Trivial)).is_empty());

    // lookup by id returns exactly one fact
    assert_eq!(store.query(&Pattern::by_id(0)).len(), 1);
}

#[test]
fn export_import_round_trip_is_identity() {
    let mut store = FactStore::new();
    for (p, q, x) in [(7, 2, 8), (7, 16, 8)] {
        assert_certified_kernel(&mut store, p, q, x);
    }
    store
        .assert_hypothesis(Statement::SingleClass {
            params: pos_params(7, 2),
        })
        .unwrap();
    store.apply_rules(3).unwrap();

    let doc = store.export_json();
    let imported = FactStore::import_json(&doc).unwrap();
    assert_eq!(imported.export_json(), doc);
    imported.replay_all().unwrap();
}

#[test]
fn empty_store_round_trips() {
    let doc = FactStore::new().export_json();
    let imported = FactStore::import_json(&doc).unwrap();
    assert!(imported.is_empty());
    assert_eq!(imported.export_json(), doc);
}

#[test]
fn import_rejects_schema_mismatch() {
    let doc = FactStore::new().export_json().replace(SCHEMA, "divseq-facts/9");
    assert!(matches!(
        FactStore::import_json(&doc),
        Err(DeduceError::SchemaVersionMismatch(_))
    ));
}

#[test]
fn import_rejects_tampered_certificates() {
    let mut store = FactStore::new();
    assert_certified_kernel(&mut store, 7, 2, 8);
    let doc = store.export_json();
    // corrupt the certificate coefficient 3 -> 4
    let tampered = doc.replace("\"3\"", "\"4\"");
    assert_ne!(doc, tampered, "fixture must actually change");
    assert!(matches!(
        FactStore::import_json(&tampered),
        Err(DeduceError::CorruptCertificate(..))
    ));
}

#[test]
fn overline_rules_fire_on_mentioned_groups() {
    let mut store = FactStore::new();
    let o32 = GroupRef::overline(big(3), big(2), DomainSpec::PositiveIntegers).unwrap();
    let o38 = GroupRef::overline(big(3), big(8), DomainSpec::PositiveIntegers).unwrap();
    let o62 = GroupRef::overline(big(6), big(2), DomainSpec::PositiveIntegers).unwrap();
    store
        .assert_hypothesis(Statement::NonTrivial { group: o32.clone() })
        .unwrap();
    store
        .assert_hypothesis(Statement::Finite { group: o38.clone() })
        .unwrap();
    store
        .assert_hypothesis(Statement::Finite { group: o62.clone() })
        .unwrap();
    store.apply_rules(3).unwrap();

    // every mentioned overline group is a quotient of its kernel group
    for g in [&o32, &o38, &o62] {
        let kernel =
            GroupRef::kernel_group(g.p.clone(), g.q.clone(), g.domain).unwrap();
        let id = store
            .find(&Statement::QuotientOf {
                quotient: g.clone(),
                of: kernel,
            })
            .unwrap_or_else(|| panic!("missing kernel-group quotient for {g}"));
        assert_eq!(store.get(id).unwrap().status, FactStatus::Certified);
    }

    // q-transfer: adjoining 4 = 1 maps onto the q*4 overline group
    let id = store
        .find(&Statement::QuotientOf {
            quotient: o32.clone().quotiented_by([big(4)]),
            of: o38,
        })
        .expect("missing q-transfer quotient");
    store.replay_chain(id).unwrap();

    // p-transfer: adjoining 2 = 1 maps onto the p*2 overline group
    let id = store
        .find(&Statement::QuotientOf {
            quotient: o32.quotiented_by([big(2)]),
            of: o62,
        })
        .expect("missing p-transfer quotient");
    store.replay_chain(id).unwrap();
}

#[test]
fn upgraded_facts_keep_replayable_stores() {
    // a hypothesis asserted before the facts that later certify it ends up
    // with premises of larger ids; the store must still replay and round-trip
    let mut store = FactStore::new();
    let early = store
        .assert_hypothesis(Statement::QuotientOf {
            quotient: h_pos(7, 16),
            of: h_pos(7, 2),
        })
        .unwrap();
    assert_certified_kernel(&mut store, 7, 2, 8);
    assert_certified_kernel(&mut store, 7, 16, 8);
    store.apply_rules(3).unwrap();

    let fact = store.get(early).unwrap();
    assert_eq!(fact.status, FactStatus::Certified);
    let premises = &fact.derivation.as_ref().unwrap().premises;
    assert!(premises.iter().any(|&p| p > early));
    store.replay_chain(early).unwrap();

    let doc = store.export_json();
    let imported = FactStore::import_json(&doc).unwrap();
    assert_eq!(imported.export_json(), doc);
}

#[test]
fn mutual_upgrades_never_form_derivation_cycles() {
    // Trivial(A) and Trivial(B) can each be derived from the other through
    // the shared kernel member; only one direction may be recorded
    let mut store = FactStore::new();
    let t_a = store
        .assert_hypothesis(Statement::Trivial { group: h_pos(7, 2) })
        .unwrap();
    let t_b = store
        .assert_hypothesis(Statement::Trivial { group: h_pos(7, 16) })
        .unwrap();
    assert_certified_kernel(&mut store, 7, 2, 8);
    assert_certified_kernel(&mut store, 7, 16, 8);
    store.apply_rules(5).unwrap();

    let upgraded = [t_a, t_b]
        .iter()
        .filter(|&&id| store.get(id).unwrap().status != FactStatus::Hypothesis)
        .count();
    assert_eq!(upgraded, 1, "exactly one direction picks up a derivation");
    store.replay_all().unwrap();
    let doc = store.export_json();
    FactStore::import_json(&doc).unwrap();
}

/// Canonical shape of a store for order-independence comparisons: statement,
/// status discriminant, and the *statements* of the assumed hypotheses
/// (ids may differ across runs).
fn shape(store: &FactStore) -> std::collections::BTreeSet<(Statement, u8, Vec<Statement>)> {
    store
        .facts()
        .iter()
        .map(|f| {
            let (tag, assumes) = match &f.status {
                FactStatus::Certified => (0u8, Vec::new()),
                FactStatus::Hypothesis => (1, Vec::new()),
                FactStatus::Conditional { assumes } => (
                    2,
                    assumes
                        .iter()
                        .map(|&a| store.get(a).unwrap().statement.clone())
                        .collect(),
                ),
            };
            (f.statement.clone(), tag, assumes)
        })
        .collect()
}

#[test]
fn rule_order_does_not_change_the_outcome() {
    let build = |order: &[RuleId]| {
        let mut store = FactStore::new();
        for (p, q, x) in [(7, 2, 8), (7, 16, 8), (3, 2, 4), (3, 8, 4)] {
            assert_certified_kernel(&mut store, p, q, x);
        }
        store
            .assert_hypothesis(Statement::SingleClass {
                params: pos_params(3, 2),
            })
            .unwrap();
        store
            .assert_hypothesis(Statement::EquivalentToOne {
                params: pos_params(3, 2),
                element: big(4),
            })
            .unwrap();
        store
            .assert_hypothesis(Statement::EquivalentToOne {
                params: pos_params(3, 8),
                element: big(4),
            })
            .unwrap();
        store.apply_rules_with(6, order).unwrap();
        shape(&store)
    };

    let reference = build(&RuleId::ALL);
    let mut order: Vec<RuleId> = RuleId::ALL.to_vec();
    let mut state = 0x9e3779b97f4a7c15u64;
    for round in 0..6 {
        for i in (1..order.len()).rev() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        assert_eq!(build(&order), reference, "shuffle round {round}");
    }
}
