//! The deduction rules.
//!
//! Each rule reads a store snapshot and proposes candidate facts; the store
//! merges candidates in canonical order. `check_rule` is the replay side:
//! given the premise statements it re-verifies that a rule application
//! licenses its conclusion, so derivation trees can be audited without
//! rerunning the engine.
//!
//! Power-indexed rules (quotients against `H[p, q^n]`) instantiate against
//! the groups already mentioned in the store; `request_power_quotient`
//! instantiates a specific exponent on demand.

use super::{
    Candidate, DeduceError, FactId, FactStatus, FactStore, FactorTarget, GroupRef, GroupVariant,
    KernelWitness, Statement,
};
use crate::dynamics::{DomainSpec, SequenceParams};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Kernel products above this size are not enumerated by R13; the closure
/// is infinite and the engine only materializes a useful finite slice.
const KERNEL_PRODUCT_BIT_LIMIT: u64 = 64;

/// Divisor enumeration cap for single-class transfers (R12).
const DIVISOR_ENUMERATION_LIMIT: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    /// Externally asserted fact backed by a lattice witness.
    External,
    /// `H[p,q]` is a quotient of `H[p,q^n]`.
    R1,
    /// Triviality and nontriviality transfer from `q` to `q^n`.
    R2,
    /// A kernel member `x` makes `H[p,q]` a quotient of `H[p*x,q]`.
    R3,
    /// A shared kernel member `x` makes `H[p,q]` and `H[p,q*x]` quotients of
    /// each other.
    R4,
    /// R4 plus finiteness gives isomorphism; triviality transfers.
    R5,
    /// The positive-domain group is a quotient of the nonzero-domain group.
    R6,
    /// Kernel containments: powers of `q`, kernel members into `p`, and
    /// kernel equality under R4's premises.
    R7,
    /// The overline group is a quotient of the kernel group.
    R8,
    /// Overline quotients transfer along `p*p'` and `q*q'`.
    R9,
    /// R4's premises identify the overline groups modulo `x = 1`.
    R10,
    /// An order lower bound on the group bounds the class count below.
    R11,
    /// Single-class transfers: order cap, power roots, factor splits, and
    /// the paired equivalence assumption.
    R12,
    /// Kernel members are closed under multiplication, certificates add.
    R13,
    /// Full-kernel transfer to powers; single-class divisibility criterion.
    R14,
}

impl RuleId {
    pub const ALL: [RuleId; 14] = [
        RuleId::R1,
        RuleId::R2,
        RuleId::R3,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6,
        RuleId::R7,
        RuleId::R8,
        RuleId::R9,
        RuleId::R10,
        RuleId::R11,
        RuleId::R12,
        RuleId::R13,
        RuleId::R14,
    ];
}

/// `true` when `base^n = target` for some `n >= 1`.
fn is_power_of(base: &BigInt, target: &BigInt) -> bool {
    if base.abs() < BigInt::from(2) {
        return base == target;
    }
    let mut pow = base.clone();
    loop {
        if &pow == target {
            return true;
        }
        if pow.abs() > target.abs() {
            return false;
        }
        pow *= base;
    }
}

fn plain_h(g: &GroupRef) -> bool {
    g.variant == GroupVariant::H && g.quotient_by.is_empty()
}

fn plain_overline(g: &GroupRef) -> bool {
    g.variant == GroupVariant::OverlineH && g.quotient_by.is_empty()
}

fn mentioned_groups(store: &FactStore) -> BTreeSet<GroupRef> {
    let mut out = BTreeSet::new();
    for fact in store.facts() {
        for g in fact.statement.groups() {
            out.insert(g.clone());
        }
    }
    out
}

/// Kernel-membership facts over plain presentations: `(id, element, group)`.
fn kernel_members(store: &FactStore) -> Vec<(FactId, &BigInt, &GroupRef)> {
    store
        .facts()
        .iter()
        .filter_map(|f| match &f.statement {
            Statement::KernelMember { element, group } if plain_h(group) => {
                Some((f.id, element, group))
            }
            _ => None,
        })
        .collect()
}

/// Matched R4 premise pairs: `(km1, km2, x, smaller group, larger group)`.
fn r4_pairs(store: &FactStore) -> Vec<(FactId, FactId, &BigInt, &GroupRef, &GroupRef)> {
    let members = kernel_members(store);
    let mut out = Vec::new();
    for &(id_a, x, a) in &members {
        if x.is_one() {
            continue;
        }
        let grown = &a.q * x;
        for &(id_b, y, b) in &members {
            if x == y && a.p == b.p && a.domain == b.domain && b.q == grown {
                out.push((id_a, id_b, x, a, b));
            }
        }
    }
    out
}

fn group_params(g: &GroupRef) -> Option<SequenceParams> {
    SequenceParams::with_options(g.p.clone(), g.q.clone(), g.domain, true).ok()
}

fn push(
    out: &mut Vec<Candidate>,
    rule: RuleId,
    statement: Statement,
    premises: Vec<FactId>,
    witness: Option<KernelWitness>,
) {
    let statement = statement.normalized();
    if statement.groups().iter().all(|g| g.validate().is_ok()) {
        out.push(Candidate {
            statement,
            rule,
            premises,
            witness,
        });
    }
}

pub(super) fn candidates(store: &FactStore, rule: RuleId) -> Vec<Candidate> {
    let mut out = Vec::new();
    match rule {
        RuleId::External => {}
        RuleId::R1 => {
            let groups = mentioned_groups(store);
            for a in groups.iter().filter(|g| plain_h(g)) {
                for b in groups.iter().filter(|g| plain_h(g)) {
                    if a != b
                        && a.p == b.p
                        && a.domain == b.domain
                        && is_power_of(&a.q, &b.q)
                    {
                        push(
                            &mut out,
                            rule,
                            Statement::QuotientOf {
                                quotient: a.clone(),
                                of: b.clone(),
                            },
                            vec![],
                            None,
                        );
                    }
                }
            }
        }
        RuleId::R2 => {
            let groups = mentioned_groups(store);
            for fact in store.facts() {
                let (g, trivial) = match &fact.statement {
                    Statement::Trivial { group } if plain_h(group) => (group, true),
                    Statement::NonTrivial { group } if plain_h(group) => (group, false),
                    _ => continue,
                };
                for b in groups.iter().filter(|c| plain_h(c)) {
                    if *b != *g && b.p == g.p && b.domain == g.domain && is_power_of(&g.q, &b.q) {
                        let statement = if trivial {
                            Statement::Trivial { group: b.clone() }
                        } else {
                            Statement::NonTrivial { group: b.clone() }
                        };
                        push(&mut out, rule, statement, vec![fact.id], None);
                    }
                }
            }
        }
        RuleId::R3 => {
            for (id, x, g) in kernel_members(store) {
                if x.is_one() {
                    continue;
                }
                let grown = GroupRef {
                    p: &g.p * x,
                    q: g.q.clone(),
                    domain: g.domain,
                    variant: GroupVariant::H,
                    quotient_by: Vec::new(),
                };
                push(
                    &mut out,
                    rule,
                    Statement::QuotientOf {
                        quotient: g.clone(),
                        of: grown,
                    },
                    vec![id],
                    None,
                );
            }
        }
        RuleId::R4 => {
            for (id_a, id_b, _, a, b) in r4_pairs(store) {
                push(
                    &mut out,
                    rule,
                    Statement::QuotientOf {
                        quotient: a.clone(),
                        of: b.clone(),
                    },
                    vec![id_a, id_b],
                    None,
                );
                push(
                    &mut out,
                    rule,
                    Statement::QuotientOf {
                        quotient: b.clone(),
                        of: a.clone(),
                    },
                    vec![id_a, id_b],
                    None,
                );
            }
        }
        RuleId::R5 => {
            for (id_a, id_b, _, a, b) in r4_pairs(store) {
                let finiteness: Vec<FactId> = [
                    Statement::Trivial { group: a.clone() },
                    Statement::Trivial { group: b.clone() },
                    Statement::Finite { group: a.clone() },
                    Statement::Finite { group: b.clone() },
                ]
                .into_iter()
                .filter_map(|s| store.find(&s))
                .collect();
                for f in &finiteness {
                    push(
                        &mut out,
                        rule,
                        Statement::Isomorphic {
                            a: a.clone(),
                            b: b.clone(),
                        },
                        vec![id_a, id_b, *f],
                        None,
                    );
                }
                if let Some(t) = store.find(&Statement::Trivial { group: a.clone() }) {
                    push(
                        &mut out,
                        rule,
                        Statement::Trivial { group: b.clone() },
                        vec![id_a, id_b, t],
                        None,
                    );
                }
                if let Some(t) = store.find(&Statement::Trivial { group: b.clone() }) {
                    push(
                        &mut out,
                        rule,
                        Statement::Trivial { group: a.clone() },
                        vec![id_a, id_b, t],
                        None,
                    );
                }
            }
        }
        RuleId::R6 => {
            for g in mentioned_groups(store) {
                if !plain_h(&g) || !g.p.is_positive() || !g.q.is_positive() {
                    continue;
                }
                let positive = GroupRef {
                    domain: DomainSpec::PositiveIntegers,
                    ..g.clone()
                };
                let nonzero = GroupRef {
                    domain: DomainSpec::NonzeroIntegers,
                    ..g
                };
                push(
                    &mut out,
                    rule,
                    Statement::QuotientOf {
                        quotient: positive,
                        of: nonzero,
                    },
                    vec![],
                    None,
                );
            }
        }
        RuleId::R7 => {
            let groups = mentioned_groups(store);
            for a in groups.iter().filter(|g| plain_h(g)) {
                for b in groups.iter().filter(|g| plain_h(g)) {
                    if a != b && a.p == b.p && a.domain == b.domain && is_power_of(&a.q, &b.q) {
                        push(
                            &mut out,
                            rule,
                            Statement::KernelContains {
                                outer: b.clone(),
                                inner: a.clone(),
                            },
                            vec![],
                            None,
                        );
                    }
                }
            }
            for (id, x, g) in kernel_members(store) {
                if x.is_one() {
                    continue;
                }
                let grown = GroupRef {
                    p: &g.p * x,
                    ..g.clone()
                };
                push(
                    &mut out,
                    rule,
                    Statement::KernelContains {
                        outer: g.clone(),
                        inner: grown,
                    },
                    vec![id],
                    None,
                );
            }
            for (id_a, id_b, _, a, b) in r4_pairs(store) {
                push(
                    &mut out,
                    rule,
                    Statement::KernelEquals {
                        a: a.clone(),
                        b: b.clone(),
                    },
                    vec![id_a, id_b],
                    None,
                );
            }
        }
        RuleId::R8 => {
            for g in mentioned_groups(store) {
                if g.quotient_by.is_empty()
                    && matches!(g.variant, GroupVariant::OverlineH | GroupVariant::KernelGroup)
                {
                    let overline = GroupRef {
                        variant: GroupVariant::OverlineH,
                        ..g.clone()
                    };
                    let kernel = GroupRef {
                        variant: GroupVariant::KernelGroup,
                        ..g
                    };
                    push(
                        &mut out,
                        rule,
                        Statement::QuotientOf {
                            quotient: overline,
                            of: kernel,
                        },
                        vec![],
                        None,
                    );
                }
            }
        }
        RuleId::R9 => {
            let groups = mentioned_groups(store);
            let overlines: Vec<&GroupRef> = groups.iter().filter(|g| plain_overline(g)).collect();
            for a in &overlines {
                for b in &overlines {
                    if a == b || a.domain != b.domain {
                        continue;
                    }
                    if a.q == b.q && (&b.p % &a.p).is_zero() {
                        let p_prime = &b.p / &a.p;
                        if !p_prime.is_one() && a.domain.contains(&p_prime) {
                            push(
                                &mut out,
                                rule,
                                Statement::QuotientOf {
                                    quotient: (*a).clone().quotiented_by([p_prime]),
                                    of: (*b).clone(),
                                },
                                vec![],
                                None,
                            );
                        }
                    }
                    if a.p == b.p && (&b.q % &a.q).is_zero() {
                        let q_prime = &b.q / &a.q;
                        if !q_prime.is_one() && a.domain.contains(&q_prime) {
                            push(
                                &mut out,
                                rule,
                                Statement::QuotientOf {
                                    quotient: (*a).clone().quotiented_by([q_prime]),
                                    of: (*b).clone(),
                                },
                                vec![],
                                None,
                            );
                        }
                    }
                }
            }
        }
        RuleId::R10 => {
            for (id_a, id_b, x, a, b) in r4_pairs(store) {
                let left = GroupRef {
                    variant: GroupVariant::OverlineH,
                    ..a.clone()
                }
                .quotiented_by([x.clone()]);
                let right = GroupRef {
                    variant: GroupVariant::OverlineH,
                    ..b.clone()
                }
                .quotiented_by([x.clone()]);
                push(
                    &mut out,
                    rule,
                    Statement::Isomorphic { a: left, b: right },
                    vec![id_a, id_b],
                    None,
                );
            }
        }
        RuleId::R11 => {
            for fact in store.facts() {
                let Statement::OrderAtLeast { group, bound } = &fact.statement else {
                    continue;
                };
                if !plain_h(group) {
                    continue;
                }
                if let Some(params) = group_params(group) {
                    push(
                        &mut out,
                        rule,
                        Statement::ClassLowerBound {
                            params,
                            bound: bound.clone(),
                        },
                        vec![fact.id],
                        None,
                    );
                }
            }
        }
        RuleId::R12 => {
            candidates_r12(store, &mut out);
        }
        RuleId::R13 => {
            let members = kernel_members(store);
            for &(id_a, a, g) in &members {
                for &(id_b, b, h) in &members {
                    if id_b < id_a || g != h {
                        continue;
                    }
                    let product = a * b;
                    if product.bits() > KERNEL_PRODUCT_BIT_LIMIT || !g.domain.contains(&product) {
                        continue;
                    }
                    let witness = summed_witness(store, id_a, id_b, &product);
                    push(
                        &mut out,
                        rule,
                        Statement::KernelMember {
                            element: product,
                            group: g.clone(),
                        },
                        vec![id_a, id_b],
                        witness,
                    );
                }
            }
        }
        RuleId::R14 => {
            let groups = mentioned_groups(store);
            for fact in store.facts() {
                let Statement::KernelIsAllOfF { group } = &fact.statement else {
                    continue;
                };
                if !plain_h(group) {
                    continue;
                }
                for b in groups.iter().filter(|g| plain_h(g)) {
                    if *b != *group
                        && b.p == group.p
                        && b.domain == group.domain
                        && is_power_of(&group.q, &b.q)
                    {
                        push(
                            &mut out,
                            rule,
                            Statement::KernelIsAllOfF { group: b.clone() },
                            vec![fact.id],
                            None,
                        );
                    }
                }
            }
            for (id_a, id_b, x, a, b) in r4_pairs(store) {
                let pairs = [(b, a), (a, b)];
                for (single, target) in pairs {
                    let Some(single_params) = group_params(single) else {
                        continue;
                    };
                    let Some(sc) = store.find(&Statement::SingleClass {
                        params: single_params,
                    }) else {
                        continue;
                    };
                    if let Some(target_params) = group_params(target) {
                        push(
                            &mut out,
                            rule,
                            Statement::NotEquivToOneImpliesDivides {
                                params: target_params,
                                divisor: x.clone(),
                            },
                            vec![id_a, id_b, sc],
                            None,
                        );
                    }
                }
            }
        }
    }
    out
}

fn candidates_r12(store: &FactStore, out: &mut Vec<Candidate>) {
    for fact in store.facts() {
        match &fact.statement {
            Statement::SingleClass { params } => {
                // order cap for single-class positive maps
                if params.domain() == DomainSpec::PositiveIntegers {
                    if let Ok(group) = GroupRef::h(
                        params.p().clone(),
                        params.q().clone(),
                        DomainSpec::NonzeroIntegers,
                    ) {
                        push(
                            out,
                            RuleId::R12,
                            Statement::OrderAtMost {
                                group,
                                bound: BigInt::from(3),
                            },
                            vec![fact.id],
                            None,
                        );
                    }
                }
                // roots: a single class at q^n collapses the group at q
                for root in integer_roots(params.q()) {
                    if let Ok(group) = GroupRef::h(params.p().clone(), root, params.domain()) {
                        push(
                            out,
                            RuleId::R12,
                            Statement::Trivial { group },
                            vec![fact.id],
                            None,
                        );
                    }
                }
                // factor splits: a single class at p*p' collapses the group at p
                for divisor in signed_divisors(params.p(), params.domain()) {
                    if let Ok(group) =
                        GroupRef::h(divisor, params.q().clone(), params.domain())
                    {
                        push(
                            out,
                            RuleId::R12,
                            Statement::Trivial { group },
                            vec![fact.id],
                            None,
                        );
                    }
                }
            }
            Statement::EquivalentToOne { params, element } => {
                // paired assumption: element ~ 1 under both q and q*element
                let grown_q = params.q() * element;
                let Ok(grown) = SequenceParams::with_options(
                    params.p().clone(),
                    grown_q,
                    params.domain(),
                    true,
                ) else {
                    continue;
                };
                let Some(e2) = store.find(&Statement::EquivalentToOne {
                    params: grown.clone(),
                    element: element.clone(),
                }) else {
                    continue;
                };
                let transfers = [(params.clone(), grown.clone()), (grown, params.clone())];
                for (single, target) in transfers {
                    let Some(sc) = store.find(&Statement::SingleClass {
                        params: single,
                    }) else {
                        continue;
                    };
                    if let Ok(group) = GroupRef::h(
                        target.p().clone(),
                        target.q().clone(),
                        target.domain(),
                    ) {
                        push(
                            out,
                            RuleId::R12,
                            Statement::Trivial { group },
                            vec![fact.id, e2, sc],
                            None,
                        );
                    }
                }
            }
            _ => {}
        }
    }
}

/// All integers `r` with `|r| >= 2` and `r^n = value` for some `n >= 1`.
fn integer_roots(value: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::new();
    let magnitude = value.abs();
    let bits = magnitude.bits();
    for n in 1..=bits.max(1) as u32 {
        let r = magnitude.nth_root(n);
        if r.abs() < BigInt::from(2) {
            break;
        }
        if r.pow(n) == magnitude {
            for candidate in [r.clone(), -r] {
                if candidate.pow(n) == *value && !out.contains(&candidate) {
                    out.push(candidate);
                }
            }
        }
    }
    out
}

/// Divisors of `p` that stay in the domain (both the divisor and the
/// cofactor); bounded enumeration.
fn signed_divisors(p: &BigInt, domain: DomainSpec) -> Vec<BigInt> {
    let magnitude = p.abs();
    if magnitude > BigInt::from(DIVISOR_ENUMERATION_LIMIT) {
        return Vec::new();
    }
    let m = magnitude.to_string().parse::<u64>().unwrap_or(0);
    let mut out = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= m {
        if m % d == 0 {
            for part in [d, m / d] {
                let positive = BigInt::from(part);
                match domain {
                    DomainSpec::PositiveIntegers => {
                        if !out.contains(&positive) {
                            out.push(positive);
                        }
                    }
                    DomainSpec::NonzeroIntegers => {
                        for candidate in [positive.clone(), -positive] {
                            if !out.contains(&candidate) {
                                out.push(candidate);
                            }
                        }
                    }
                }
            }
        }
        d += 1;
    }
    out.sort();
    out
}

/// Coefficient-wise sum of two kernel witnesses on the same handle. When
/// both premise targets are negative, the sign coordinate of the raw sum is
/// 2 and an explicit `-1` on the handle's sign row brings it back to the
/// factored product. The result is replay-verified before use.
fn summed_witness(
    store: &FactStore,
    id_a: FactId,
    id_b: FactId,
    product: &BigInt,
) -> Option<KernelWitness> {
    let wa = kernel_witness_of(store, id_a)?;
    let wb = kernel_witness_of(store, id_b)?;
    if wa.handle != wb.handle {
        return None;
    }
    let record = store.handles().get(wa.handle)?;
    let mut coefficients: BTreeMap<usize, BigInt> = BTreeMap::new();
    for (i, k) in wa.coefficients.iter().chain(wb.coefficients.iter()) {
        let slot = coefficients.entry(*i).or_insert_with(BigInt::zero);
        *slot += k;
        if slot.is_zero() {
            coefficients.remove(i);
        }
    }
    if wa.target.sign + wb.target.sign == 2 {
        let sign_row = record
            .rows
            .iter()
            .position(|p| matches!(p, crate::lattice::RelationProvenance::SignSquared))?;
        let slot = coefficients.entry(sign_row).or_insert_with(BigInt::zero);
        *slot -= 1;
        if slot.is_zero() {
            coefficients.remove(&sign_row);
        }
    }
    let witness = KernelWitness {
        handle: wa.handle,
        coefficients: coefficients.into_iter().collect(),
        target: FactorTarget::of_value(product).ok()?,
    };
    super::witness_replays(record, &witness).ok()?;
    Some(witness)
}

fn kernel_witness_of(store: &FactStore, id: FactId) -> Option<&KernelWitness> {
    let fact = store.get(id)?;
    if fact.status != FactStatus::Certified {
        return None;
    }
    fact.derivation.as_ref()?.witness.as_ref()
}

/// Instantiates the power-quotient statement for a requested exponent and
/// asserts it as certified (the rule is unconditional).
pub fn request_power_quotient(
    store: &mut FactStore,
    p: BigInt,
    q: BigInt,
    n: u32,
    domain: DomainSpec,
) -> Result<FactId, DeduceError> {
    if n < 1 {
        return Err(DeduceError::InvalidGroup("exponent must be at least 1".into()));
    }
    let small = GroupRef::h(p.clone(), q.clone(), domain)?;
    let large = GroupRef::h(p, q.pow(n), domain)?;
    store.assert_fact(
        Statement::QuotientOf {
            quotient: small,
            of: large,
        },
        FactStatus::Certified,
        Some(super::Derivation {
            rule: RuleId::R1,
            premises: Vec::new(),
            witness: None,
        }),
    )
}

/// Replay check: does `rule` derive `conclusion` from `premises`?
pub(super) fn check_rule(rule: RuleId, premises: &[&Statement], conclusion: &Statement) -> bool {
    match rule {
        RuleId::External => false, // externals carry witnesses, not premises
        RuleId::R1 => {
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            premises.is_empty()
                && plain_h(quotient)
                && plain_h(of)
                && quotient.p == of.p
                && quotient.domain == of.domain
                && is_power_of(&quotient.q, &of.q)
        }
        RuleId::R2 => {
            let [premise] = premises else { return false };
            match (premise, conclusion) {
                (Statement::Trivial { group: a }, Statement::Trivial { group: b })
                | (Statement::NonTrivial { group: a }, Statement::NonTrivial { group: b }) => {
                    plain_h(a)
                        && plain_h(b)
                        && a.p == b.p
                        && a.domain == b.domain
                        && is_power_of(&a.q, &b.q)
                }
                _ => false,
            }
        }
        RuleId::R3 => {
            let [Statement::KernelMember { element, group }] = premises else {
                return false;
            };
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            plain_h(group)
                && quotient == group
                && plain_h(of)
                && of.q == group.q
                && of.domain == group.domain
                && of.p == &group.p * element
        }
        RuleId::R4 => {
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            r4_shape(premises, quotient, of) || r4_shape(premises, of, quotient)
        }
        RuleId::R5 => {
            let [km1, km2, extra] = premises else { return false };
            let Some((a, b)) = r4_groups(km1, km2) else {
                return false;
            };
            let finite_ok = matches!(
                extra,
                Statement::Finite { group } | Statement::Trivial { group }
                    if group == &a || group == &b
            );
            if !finite_ok {
                return false;
            }
            match conclusion {
                Statement::Isomorphic { a: x, b: y } => {
                    (x == &a && y == &b) || (x == &b && y == &a)
                }
                Statement::Trivial { group } => {
                    let Statement::Trivial { group: source } = extra else {
                        return false;
                    };
                    (source == &a && group == &b) || (source == &b && group == &a)
                }
                _ => false,
            }
        }
        RuleId::R6 => {
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            premises.is_empty()
                && plain_h(quotient)
                && plain_h(of)
                && quotient.p == of.p
                && quotient.q == of.q
                && quotient.domain == DomainSpec::PositiveIntegers
                && of.domain == DomainSpec::NonzeroIntegers
        }
        RuleId::R7 => match conclusion {
            Statement::KernelContains { outer, inner } => match premises {
                [] => {
                    plain_h(outer)
                        && plain_h(inner)
                        && outer.p == inner.p
                        && outer.domain == inner.domain
                        && is_power_of(&inner.q, &outer.q)
                }
                [Statement::KernelMember { element, group }] => {
                    plain_h(group)
                        && outer == group
                        && plain_h(inner)
                        && inner.q == group.q
                        && inner.domain == group.domain
                        && inner.p == &group.p * element
                }
                _ => false,
            },
            Statement::KernelEquals { a, b } => {
                let [km1, km2] = premises else { return false };
                let Some((x, y)) = r4_groups(km1, km2) else {
                    return false;
                };
                (a == &x && b == &y) || (a == &y && b == &x)
            }
            _ => false,
        },
        RuleId::R8 => {
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            premises.is_empty()
                && quotient.variant == GroupVariant::OverlineH
                && of.variant == GroupVariant::KernelGroup
                && quotient.quotient_by.is_empty()
                && of.quotient_by.is_empty()
                && quotient.p == of.p
                && quotient.q == of.q
                && quotient.domain == of.domain
        }
        RuleId::R9 => {
            let Statement::QuotientOf { quotient, of } = conclusion else {
                return false;
            };
            if !premises.is_empty() || !plain_overline(of) {
                return false;
            }
            if quotient.variant != GroupVariant::OverlineH || quotient.quotient_by.len() != 1 {
                return false;
            }
            let adjoined = &quotient.quotient_by[0];
            if quotient.domain != of.domain || !quotient.domain.contains(adjoined) {
                return false;
            }
            let p_transfer = quotient.q == of.q && &quotient.p * adjoined == of.p;
            let q_transfer = quotient.p == of.p && &quotient.q * adjoined == of.q;
            p_transfer || q_transfer
        }
        RuleId::R10 => {
            let [km1, km2] = premises else { return false };
            let Some((g_a, g_b)) = r4_groups(km1, km2) else {
                return false;
            };
            let Statement::KernelMember { element: x, .. } = km1 else {
                return false;
            };
            let Statement::Isomorphic { a, b } = conclusion else {
                return false;
            };
            let expect_a = GroupRef {
                variant: GroupVariant::OverlineH,
                ..g_a
            }
            .quotiented_by([(*x).clone()]);
            let expect_b = GroupRef {
                variant: GroupVariant::OverlineH,
                ..g_b
            }
            .quotiented_by([(*x).clone()]);
            (a == &expect_a && b == &expect_b) || (a == &expect_b && b == &expect_a)
        }
        RuleId::R11 => {
            let [Statement::OrderAtLeast { group, bound }] = premises else {
                return false;
            };
            let Statement::ClassLowerBound {
                params,
                bound: claimed,
            } = conclusion
            else {
                return false;
            };
            plain_h(group)
                && claimed == bound
                && params.p() == &group.p
                && params.q() == &group.q
                && params.domain() == group.domain
        }
        RuleId::R12 => check_r12(premises, conclusion),
        RuleId::R13 => {
            let [km1, km2] = premises else { return false };
            let (
                Statement::KernelMember {
                    element: a,
                    group: g,
                },
                Statement::KernelMember {
                    element: b,
                    group: h,
                },
            ) = (km1, km2)
            else {
                return false;
            };
            let Statement::KernelMember { element, group } = conclusion else {
                return false;
            };
            plain_h(g) && g == h && group == g && element == &(a.clone() * b.clone())
        }
        RuleId::R14 => match conclusion {
            Statement::KernelIsAllOfF { group: b } => {
                let [Statement::KernelIsAllOfF { group: a }] = premises else {
                    return false;
                };
                plain_h(a)
                    && plain_h(b)
                    && a.p == b.p
                    && a.domain == b.domain
                    && is_power_of(&a.q, &b.q)
            }
            Statement::NotEquivToOneImpliesDivides { params, divisor } => {
                let [km1, km2, sc] = premises else { return false };
                let Some((a, b)) = r4_groups(km1, km2) else {
                    return false;
                };
                let Statement::KernelMember { element: x, .. } = km1 else {
                    return false;
                };
                if *x != divisor.clone() {
                    return false;
                }
                let Statement::SingleClass { params: single } = sc else {
                    return false;
                };
                let matches_group = |g: &GroupRef, p: &SequenceParams| {
                    p.p() == &g.p && p.q() == &g.q && p.domain() == g.domain
                };
                (matches_group(&b, single) && matches_group(&a, params))
                    || (matches_group(&a, single) && matches_group(&b, params))
            }
            _ => false,
        },
    }
}

fn r4_shape(premises: &[&Statement], small: &GroupRef, large: &GroupRef) -> bool {
    match r4_groups_from(premises) {
        Some((a, b)) => (&a == small && &b == large) || (&b == small && &a == large),
        None => false,
    }
}

fn r4_groups(km1: &Statement, km2: &Statement) -> Option<(GroupRef, GroupRef)> {
    r4_groups_from(&[km1, km2])
}

fn r4_groups_from(premises: &[&Statement]) -> Option<(GroupRef, GroupRef)> {
    let [Statement::KernelMember {
        element: x,
        group: a,
    }, Statement::KernelMember {
        element: y,
        group: b,
    }] = premises
    else {
        return None;
    };
    if x != y || x.is_one() || !plain_h(a) || !plain_h(b) {
        return None;
    }
    if a.p != b.p || a.domain != b.domain {
        return None;
    }
    if &a.q * x == b.q {
        Some(((*a).clone(), (*b).clone()))
    } else if &b.q * x == a.q {
        Some(((*b).clone(), (*a).clone()))
    } else {
        None
    }
}

fn check_r12(premises: &[&Statement], conclusion: &Statement) -> bool {
    match conclusion {
        Statement::OrderAtMost { group, bound } => {
            let [Statement::SingleClass { params }] = premises else {
                return false;
            };
            params.domain() == DomainSpec::PositiveIntegers
                && plain_h(group)
                && group.domain == DomainSpec::NonzeroIntegers
                && group.p == *params.p()
                && group.q == *params.q()
                && bound == &BigInt::from(3)
        }
        Statement::Trivial { group } => match premises {
            [Statement::SingleClass { params }] => {
                if !plain_h(group) || group.domain != params.domain() {
                    return false;
                }
                let root_case = group.p == *params.p() && is_power_of(&group.q, params.q());
                let split_case = group.q == *params.q()
                    && (params.p() % &group.p).is_zero()
                    && group.domain.contains(&(params.p() / &group.p));
                root_case || split_case
            }
            [Statement::EquivalentToOne {
                params: p1,
                element: x1,
            }, Statement::EquivalentToOne {
                params: p2,
                element: x2,
            }, Statement::SingleClass { params: single }] => {
                if x1 != x2 || p1.p() != p2.p() || p1.domain() != p2.domain() {
                    return false;
                }
                if &(p1.q() * x1) != p2.q() {
                    return false;
                }
                if !plain_h(group) || group.domain != p1.domain() || group.p != *p1.p() {
                    return false;
                }
                // single class at one parameter collapses the other
                (single == p1 && group.q == *p2.q()) || (single == p2 && group.q == *p1.q())
            }
            _ => false,
        },
        _ => false,
    }
}
