//! A certificate-chaining rule engine over a persistent fact store.
//!
//! Facts are statements about presented groups (`H`, its overline
//! complement, and kernel groups), about kernel membership of concrete
//! integers, and about the dynamics itself (single-class and class-bound
//! statements). Every fact carries a status:
//!
//! - `Certified` — backed by a replayable derivation: a lattice certificate
//!   at the leaves, rule applications above them;
//! - `Hypothesis` — assumed, never derived (single-class conjectures and
//!   equivalence assumptions have no decision procedure);
//! - `Conditional` — derived, but resting on at least one hypothesis; the
//!   hypothesis ids are tracked explicitly.
//!
//! [`FactStore::apply_rules`] runs the deduction rules in snapshot rounds:
//! every rule reads the same store state, candidates are merged in a
//! canonical order, and a round either reaches a fixpoint or the round cap.
//! The final fact set is therefore independent of the order in which rules
//! fire.

mod rules;
mod serial;

pub use rules::{request_power_quotient, RuleId};

use crate::dynamics::{DomainSpec, SequenceParams};
use crate::lattice::{verify_certificate, MembershipCertificate, RelationProvenance};
use crate::numth::{factor_value, NumthError};
use crate::presentation::PresentationHandle;
use crate::serde_util::{dec, dec_vec};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type FactId = usize;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DeduceError {
    #[error("invalid group reference: {0}")]
    InvalidGroup(String),
    #[error("certified facts need a derivation that replays; {0}")]
    InvalidCertificate(String),
    #[error("unknown fact id {0}")]
    UnknownFact(FactId),
    #[error("unsupported schema `{0}` (expected {expected})", expected = SCHEMA)]
    SchemaVersionMismatch(String),
    #[error("certificate of fact {0} does not replay: {1}")]
    CorruptCertificate(FactId, String),
    #[error("malformed store document: {0}")]
    MalformedDocument(String),
    #[error(transparent)]
    Numth(#[from] NumthError),
}

/// Schema tag of the persisted fact store.
pub const SCHEMA: &str = "divseq-facts/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupVariant {
    /// The presented group itself.
    H,
    /// The complementary presentation (`value = 1` for values not
    /// equivalent to 1).
    OverlineH,
    /// The kernel of the presentation homomorphism, as a group.
    KernelGroup,
}

/// Reference to a presented group: parameters, target domain, variant, and
/// optional adjoined relations `x = 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupRef {
    #[serde(with = "dec")]
    pub p: BigInt,
    #[serde(with = "dec")]
    pub q: BigInt,
    pub domain: DomainSpec,
    pub variant: GroupVariant,
    #[serde(with = "dec_vec", default, skip_serializing_if = "Vec::is_empty")]
    pub quotient_by: Vec<BigInt>,
}

impl GroupRef {
    pub fn new(
        p: BigInt,
        q: BigInt,
        domain: DomainSpec,
        variant: GroupVariant,
    ) -> Result<Self, DeduceError> {
        let g = GroupRef {
            p,
            q,
            domain,
            variant,
            quotient_by: Vec::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn h(p: BigInt, q: BigInt, domain: DomainSpec) -> Result<Self, DeduceError> {
        Self::new(p, q, domain, GroupVariant::H)
    }

    pub fn overline(p: BigInt, q: BigInt, domain: DomainSpec) -> Result<Self, DeduceError> {
        Self::new(p, q, domain, GroupVariant::OverlineH)
    }

    pub fn kernel_group(p: BigInt, q: BigInt, domain: DomainSpec) -> Result<Self, DeduceError> {
        Self::new(p, q, domain, GroupVariant::KernelGroup)
    }

    /// Adjoins relations `x = 1`; the list is kept sorted and deduplicated,
    /// and the trivial relation `1 = 1` is dropped.
    pub fn quotiented_by(mut self, xs: impl IntoIterator<Item = BigInt>) -> Self {
        self.quotient_by.extend(xs);
        self.normalize();
        self
    }

    fn normalize(&mut self) {
        self.quotient_by.retain(|x| !x.is_one());
        self.quotient_by.sort();
        self.quotient_by.dedup();
    }

    pub fn validate(&self) -> Result<(), DeduceError> {
        if self.p.is_zero() {
            return Err(DeduceError::InvalidGroup("p must be nonzero".into()));
        }
        if self.q.abs() < BigInt::from(2) {
            return Err(DeduceError::InvalidGroup(format!(
                "|q| must be at least 2, got {}",
                self.q
            )));
        }
        if self.domain == DomainSpec::PositiveIntegers
            && (self.p.is_negative() || self.q.is_negative())
        {
            return Err(DeduceError::InvalidGroup(
                "negative parameters need the nonzero domain".into(),
            ));
        }
        if self.quotient_by.iter().any(|x| x.is_zero()) {
            return Err(DeduceError::InvalidGroup(
                "cannot adjoin 0 = 1".into(),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SequenceParams, DeduceError> {
        SequenceParams::with_options(self.p.clone(), self.q.clone(), self.domain, true)
            .map_err(|e| DeduceError::InvalidGroup(e.to_string()))
    }
}

impl fmt::Display for GroupRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.variant {
            GroupVariant::H => "H",
            GroupVariant::OverlineH => "oH",
            GroupVariant::KernelGroup => "Ker",
        };
        let d = match self.domain {
            DomainSpec::PositiveIntegers => ">0",
            DomainSpec::NonzeroIntegers => "!=0",
        };
        write!(f, "{name}[{},{};{d}]", self.p, self.q)?;
        if !self.quotient_by.is_empty() {
            write!(f, "/<")?;
            for (i, x) in self.quotient_by.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}=1")?;
            }
            write!(f, ">")?;
        }
        Ok(())
    }
}

/// The statement forms the engine reasons about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    /// `element` lies in the kernel of `group`'s presentation homomorphism.
    KernelMember {
        #[serde(with = "dec")]
        element: BigInt,
        group: GroupRef,
    },
    /// `quotient` is isomorphic to a quotient group of `of`.
    QuotientOf { quotient: GroupRef, of: GroupRef },
    Isomorphic { a: GroupRef, b: GroupRef },
    Trivial { group: GroupRef },
    NonTrivial { group: GroupRef },
    OrderAtMost {
        group: GroupRef,
        #[serde(with = "dec")]
        bound: BigInt,
    },
    OrderAtLeast {
        group: GroupRef,
        #[serde(with = "dec")]
        bound: BigInt,
    },
    Finite { group: GroupRef },
    /// The kernels of the two presentation homomorphisms coincide.
    KernelEquals { a: GroupRef, b: GroupRef },
    /// `Ker(outer)` contains `Ker(inner)` (as a normal subgroup).
    KernelContains { outer: GroupRef, inner: GroupRef },
    /// The kernel is the whole free group.
    KernelIsAllOfF { group: GroupRef },
    /// The map has a single equivalence class (hypothesis only).
    SingleClass { params: SequenceParams },
    ClassLowerBound {
        params: SequenceParams,
        #[serde(with = "dec")]
        bound: BigInt,
    },
    /// `element ~ 1` under the map (hypothesis only).
    EquivalentToOne {
        params: SequenceParams,
        #[serde(with = "dec")]
        element: BigInt,
    },
    /// Any value not equivalent to 1 is divisible by `divisor`.
    NotEquivToOneImpliesDivides {
        params: SequenceParams,
        #[serde(with = "dec")]
        divisor: BigInt,
    },
}

impl Statement {
    /// Normalizes symmetric statements so equal claims compare equal.
    pub fn normalized(mut self) -> Self {
        match &mut self {
            Statement::Isomorphic { a, b } | Statement::KernelEquals { a, b } => {
                if a > b {
                    std::mem::swap(a, b);
                }
            }
            _ => {}
        }
        self
    }

    /// Group references mentioned by this statement, in positional order.
    pub fn groups(&self) -> Vec<&GroupRef> {
        match self {
            Statement::KernelMember { group, .. }
            | Statement::Trivial { group }
            | Statement::NonTrivial { group }
            | Statement::OrderAtMost { group, .. }
            | Statement::OrderAtLeast { group, .. }
            | Statement::Finite { group }
            | Statement::KernelIsAllOfF { group } => vec![group],
            Statement::QuotientOf { quotient, of } => vec![quotient, of],
            Statement::Isomorphic { a, b } | Statement::KernelEquals { a, b } => vec![a, b],
            Statement::KernelContains { outer, inner } => vec![outer, inner],
            Statement::SingleClass { .. }
            | Statement::ClassLowerBound { .. }
            | Statement::EquivalentToOne { .. }
            | Statement::NotEquivToOneImpliesDivides { .. } => Vec::new(),
        }
    }

    pub fn params(&self) -> Option<&SequenceParams> {
        match self {
            Statement::SingleClass { params }
            | Statement::ClassLowerBound { params, .. }
            | Statement::EquivalentToOne { params, .. }
            | Statement::NotEquivToOneImpliesDivides { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn element(&self) -> Option<&BigInt> {
        match self {
            Statement::KernelMember { element, .. } | Statement::EquivalentToOne { element, .. } => {
                Some(element)
            }
            Statement::NotEquivToOneImpliesDivides { divisor, .. } => Some(divisor),
            _ => None,
        }
    }

    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::KernelMember { .. } => StatementKind::KernelMember,
            Statement::QuotientOf { .. } => StatementKind::QuotientOf,
            Statement::Isomorphic { .. } => StatementKind::Isomorphic,
            Statement::Trivial { .. } => StatementKind::Trivial,
            Statement::NonTrivial { .. } => StatementKind::NonTrivial,
            Statement::OrderAtMost { .. } => StatementKind::OrderAtMost,
            Statement::OrderAtLeast { .. } => StatementKind::OrderAtLeast,
            Statement::Finite { .. } => StatementKind::Finite,
            Statement::KernelEquals { .. } => StatementKind::KernelEquals,
            Statement::KernelContains { .. } => StatementKind::KernelContains,
            Statement::KernelIsAllOfF { .. } => StatementKind::KernelIsAllOfF,
            Statement::SingleClass { .. } => StatementKind::SingleClass,
            Statement::ClassLowerBound { .. } => StatementKind::ClassLowerBound,
            Statement::EquivalentToOne { .. } => StatementKind::EquivalentToOne,
            Statement::NotEquivToOneImpliesDivides { .. } => {
                StatementKind::NotEquivToOneImpliesDivides
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    KernelMember,
    QuotientOf,
    Isomorphic,
    Trivial,
    NonTrivial,
    OrderAtMost,
    OrderAtLeast,
    Finite,
    KernelEquals,
    KernelContains,
    KernelIsAllOfF,
    SingleClass,
    ClassLowerBound,
    EquivalentToOne,
    NotEquivToOneImpliesDivides,
}

/// Certified > Conditional > Hypothesis; among conditionals, fewer
/// assumptions win.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactStatus {
    Certified,
    Hypothesis,
    Conditional { assumes: BTreeSet<FactId> },
}

impl FactStatus {
    /// `true` when `self` is a strictly stronger claim than `other`.
    pub fn stronger_than(&self, other: &FactStatus) -> bool {
        use FactStatus::*;
        match (self, other) {
            (Certified, Certified) => false,
            (Certified, _) => true,
            (Conditional { .. }, Certified) => false,
            (Conditional { .. }, Hypothesis) => true,
            (Conditional { assumes: a }, Conditional { assumes: b }) => {
                a != b && a.is_subset(b)
            }
            (Hypothesis, _) => false,
        }
    }

    /// Deterministic tie-break for incomparable conditional sets.
    fn preferable_to(&self, other: &FactStatus) -> bool {
        use FactStatus::*;
        if self.stronger_than(other) {
            return true;
        }
        if other.stronger_than(self) {
            return false;
        }
        match (self, other) {
            (Conditional { assumes: a }, Conditional { assumes: b }) => {
                (a.len(), a) < (b.len(), b)
            }
            _ => false,
        }
    }
}

/// Replayable recipe for a harvested relation matrix: parameters plus the
/// provenance of every row, in order. Recomputing the rows from this record
/// is what certificate replay means.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandleRecord {
    #[serde(with = "dec")]
    pub p: BigInt,
    #[serde(with = "dec")]
    pub q: BigInt,
    pub domain: DomainSpec,
    pub rows: Vec<RelationProvenance>,
}

impl HandleRecord {
    pub fn of(handle: &PresentationHandle) -> Self {
        HandleRecord {
            p: handle.params().p().clone(),
            q: handle.params().q().clone(),
            domain: handle.params().domain(),
            rows: handle.matrix().provenance().to_vec(),
        }
    }

    /// Recomputes row `i` as a signed factor map: the sign coordinate as an
    /// unreduced integer plus prime-keyed exponents.
    pub fn replay_row(&self, i: usize) -> Result<SignedFactorMap, DeduceError> {
        let prov = self
            .rows
            .get(i)
            .ok_or_else(|| DeduceError::InvalidCertificate(format!("row {i} out of range")))?;
        match prov {
            RelationProvenance::QIsOne => SignedFactorMap::of_value(&self.q),
            RelationProvenance::SignSquared => Ok(SignedFactorMap {
                sign: BigInt::from(2),
                primes: BTreeMap::new(),
            }),
            RelationProvenance::OrbitStep { source } => {
                let next = &self.p * source + BigInt::one();
                let mut map = SignedFactorMap::of_value(&next)?;
                map.subtract(&SignedFactorMap::of_value(source)?);
                Ok(map)
            }
            RelationProvenance::ValueIsOne { value } => SignedFactorMap::of_value(value),
        }
    }
}

/// Prime-keyed integer exponent vector with an unreduced sign coordinate;
/// the exact arithmetic object certificates are replayed in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignedFactorMap {
    pub sign: BigInt,
    pub primes: BTreeMap<BigInt, BigInt>,
}

impl SignedFactorMap {
    pub fn of_value(n: &BigInt) -> Result<Self, DeduceError> {
        let f = factor_value(n)?;
        Ok(SignedFactorMap {
            sign: if f.negative { BigInt::one() } else { BigInt::zero() },
            primes: f
                .factors
                .into_iter()
                .map(|(p, e)| (p, BigInt::from(e)))
                .collect(),
        })
    }

    pub fn add_scaled(&mut self, other: &SignedFactorMap, k: &BigInt) {
        self.sign += k * &other.sign;
        for (p, e) in &other.primes {
            let slot = self.primes.entry(p.clone()).or_insert_with(BigInt::zero);
            *slot += k * e;
            if slot.is_zero() {
                self.primes.remove(p);
            }
        }
    }

    pub fn subtract(&mut self, other: &SignedFactorMap) {
        self.add_scaled(other, &BigInt::from(-1));
    }

    pub fn is_zero(&self) -> bool {
        self.sign.is_zero() && self.primes.is_empty()
    }
}

/// Portable kernel certificate: coefficients over a [`HandleRecord`]'s rows
/// plus the factored target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelWitness {
    pub handle: usize,
    #[serde(with = "crate::serde_util::dec_pairs")]
    pub coefficients: Vec<(usize, BigInt)>,
    pub target: FactorTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorTarget {
    pub sign: u8,
    #[serde(with = "crate::serde_util::dec_map")]
    pub primes: BTreeMap<BigInt, BigInt>,
}

impl FactorTarget {
    fn of_value(n: &BigInt) -> Result<Self, DeduceError> {
        let m = SignedFactorMap::of_value(n)?;
        Ok(FactorTarget {
            sign: if m.sign.is_one() { 1 } else { 0 },
            primes: m.primes,
        })
    }

    fn as_map(&self) -> SignedFactorMap {
        SignedFactorMap {
            sign: BigInt::from(self.sign),
            primes: self.primes.clone(),
        }
    }
}

/// A rule's proposed conclusion, before merging into the store.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub statement: Statement,
    pub rule: RuleId,
    pub premises: Vec<FactId>,
    pub witness: Option<KernelWitness>,
}

/// Exact replay of a witness against a handle record: the coefficient
/// combination of the recomputed rows must reproduce the target, integer by
/// integer (the sign coordinate included — overflow past the order-2
/// structure must be absorbed by an explicit sign-row coefficient).
pub(crate) fn witness_replays(record: &HandleRecord, witness: &KernelWitness) -> Result<(), DeduceError> {
    let mut sum = SignedFactorMap::default();
    for (row, k) in &witness.coefficients {
        sum.add_scaled(&record.replay_row(*row)?, k);
    }
    let mut residue = witness.target.as_map();
    residue.subtract(&sum);
    if residue.is_zero() {
        Ok(())
    } else {
        Err(DeduceError::InvalidCertificate(
            "coefficient combination does not reproduce the target".into(),
        ))
    }
}

/// How a fact got into the store: a rule application over premises, with an
/// optional lattice witness at the leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: RuleId,
    pub premises: Vec<FactId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<KernelWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub statement: Statement,
    pub status: FactStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
}

/// Append-only event log; replaying it reproduces the store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    Inserted { fact: FactId },
    Upgraded { fact: FactId },
}

#[derive(Debug, Clone, Default)]
pub struct FactStore {
    facts: Vec<Fact>,
    index: BTreeMap<Statement, FactId>,
    handles: Vec<HandleRecord>,
    log: Vec<LogEntry>,
}

impl FactStore {
    pub fn new() -> Self {
        FactStore::default()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn handles(&self) -> &[HandleRecord] {
        &self.handles
    }

    pub fn get(&self, id: FactId) -> Option<&Fact> {
        self.facts.get(id)
    }

    pub fn find(&self, statement: &Statement) -> Option<FactId> {
        self.index.get(statement).copied()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Registers a handle record, reusing an identical existing one.
    pub fn add_handle(&mut self, record: HandleRecord) -> usize {
        if let Some(i) = self.handles.iter().position(|h| h == &record) {
            return i;
        }
        self.handles.push(record);
        self.handles.len() - 1
    }

    /// Inserts a fact, deduplicating by statement. Re-asserting an existing
    /// statement returns the same id; the status is upgraded when the new
    /// claim is stronger.
    pub fn assert_fact(
        &mut self,
        statement: Statement,
        status: FactStatus,
        derivation: Option<Derivation>,
    ) -> Result<FactId, DeduceError> {
        let statement = statement.normalized();
        for group in statement.groups() {
            group.validate()?;
        }
        match (&status, &derivation) {
            (FactStatus::Hypothesis, _) => {}
            (_, None) => {
                return Err(DeduceError::InvalidCertificate(
                    "non-hypothesis facts need a derivation".into(),
                ))
            }
            (_, Some(d)) => {
                for &p in &d.premises {
                    if p >= self.facts.len() {
                        return Err(DeduceError::UnknownFact(p));
                    }
                }
                self.check_derivation(&statement, d)?;
            }
        }

        if let Some(&id) = self.index.get(&statement) {
            if status.stronger_than(&self.facts[id].status) {
                // a derivation that reaches back to its own conclusion is
                // not a justification; keep the old status
                if let Some(d) = &derivation {
                    if self.reaches(&d.premises, id) {
                        return Ok(id);
                    }
                }
                self.facts[id].status = status;
                self.facts[id].derivation = derivation;
                self.log.push(LogEntry::Upgraded { fact: id });
            }
            return Ok(id);
        }
        let id = self.facts.len();
        self.facts.push(Fact {
            id,
            statement: statement.clone(),
            status,
            derivation,
        });
        self.index.insert(statement, id);
        self.log.push(LogEntry::Inserted { fact: id });
        Ok(id)
    }

    pub fn assert_hypothesis(&mut self, statement: Statement) -> Result<FactId, DeduceError> {
        self.assert_fact(statement, FactStatus::Hypothesis, None)
    }

    /// Asserts a certified kernel membership straight from a presentation
    /// handle and a lattice certificate; the certificate is re-verified
    /// against the handle and converted into the portable witness form.
    pub fn assert_kernel_member(
        &mut self,
        handle: &PresentationHandle,
        element: &BigInt,
        certificate: &MembershipCertificate,
    ) -> Result<FactId, DeduceError> {
        if !verify_certificate(certificate, handle.matrix()) {
            return Err(DeduceError::InvalidCertificate(
                "lattice certificate does not replay against the handle".into(),
            ));
        }
        let doc = KernelCertificateDoc {
            element: element.clone(),
            handle: HandleRecord::of(handle),
            coefficients: certificate.coefficients.clone(),
            target: FactorTarget::of_value(element)?,
        };
        doc.assert_into(self)
    }

    /// Status a conclusion inherits from its premises: certified only when
    /// every premise is, otherwise conditional on the union of the premise
    /// assumptions (a hypothesis premise contributes itself).
    pub fn inherited_status(&self, premises: &[FactId]) -> FactStatus {
        let mut assumes: BTreeSet<FactId> = BTreeSet::new();
        for &p in premises {
            match &self.facts[p].status {
                FactStatus::Certified => {}
                FactStatus::Hypothesis => {
                    assumes.insert(p);
                }
                FactStatus::Conditional { assumes: deps } => {
                    assumes.extend(deps.iter().copied());
                }
            }
        }
        if assumes.is_empty() {
            FactStatus::Certified
        } else {
            FactStatus::Conditional { assumes }
        }
    }

    /// Replays one fact: witness replay for external leaves, side-condition
    /// checks for rule applications, and premise statuses for the status
    /// claim. Does not recurse; use [`FactStore::replay_chain`] for whole
    /// trees.
    pub fn replay(&self, id: FactId) -> Result<(), DeduceError> {
        let fact = self.facts.get(id).ok_or(DeduceError::UnknownFact(id))?;
        match (&fact.status, &fact.derivation) {
            (FactStatus::Hypothesis, _) => Ok(()),
            (_, None) => Err(DeduceError::CorruptCertificate(
                id,
                "missing derivation".into(),
            )),
            (claimed, Some(d)) => {
                self.check_derivation(&fact.statement, d)
                    .map_err(|e| DeduceError::CorruptCertificate(id, e.to_string()))?;
                let inherited = self.inherited_status(&d.premises);
                // the recorded status may not claim more than the premises give
                if claimed.stronger_than(&inherited) {
                    return Err(DeduceError::CorruptCertificate(
                        id,
                        format!("status {claimed:?} exceeds what the premises warrant"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `true` when `target` is reachable from `premises` along stored
    /// derivation edges.
    fn reaches(&self, premises: &[FactId], target: FactId) -> bool {
        let mut stack: Vec<FactId> = premises.to_vec();
        let mut seen: BTreeSet<FactId> = BTreeSet::new();
        while let Some(at) = stack.pop() {
            if at == target {
                return true;
            }
            if !seen.insert(at) {
                continue;
            }
            if let Some(fact) = self.facts.get(at) {
                if let Some(d) = &fact.derivation {
                    stack.extend(d.premises.iter().copied());
                }
            }
        }
        false
    }

    /// Replays the full derivation tree below a fact; a cycle among the
    /// derivation edges is a corrupt certificate.
    pub fn replay_chain(&self, id: FactId) -> Result<(), DeduceError> {
        let mut done: BTreeSet<FactId> = BTreeSet::new();
        let mut on_path: BTreeSet<FactId> = BTreeSet::new();
        self.replay_chain_inner(id, &mut done, &mut on_path)
    }

    fn replay_chain_inner(
        &self,
        id: FactId,
        done: &mut BTreeSet<FactId>,
        on_path: &mut BTreeSet<FactId>,
    ) -> Result<(), DeduceError> {
        if done.contains(&id) {
            return Ok(());
        }
        if !on_path.insert(id) {
            return Err(DeduceError::CorruptCertificate(
                id,
                "derivation chain is circular".into(),
            ));
        }
        self.replay(id)?;
        if let Some(d) = &self.facts[id].derivation {
            for &p in &d.premises {
                self.replay_chain_inner(p, done, on_path)?;
            }
        }
        on_path.remove(&id);
        done.insert(id);
        Ok(())
    }

    pub fn replay_all(&self) -> Result<(), DeduceError> {
        let mut done = BTreeSet::new();
        for fact in &self.facts {
            let mut on_path = BTreeSet::new();
            self.replay_chain_inner(fact.id, &mut done, &mut on_path)?;
        }
        Ok(())
    }

    fn check_derivation(&self, statement: &Statement, d: &Derivation) -> Result<(), DeduceError> {
        if d.rule == RuleId::External {
            let witness = d.witness.as_ref().ok_or_else(|| {
                DeduceError::InvalidCertificate("external facts need a witness".into())
            })?;
            return self.check_kernel_witness(statement, witness);
        }
        let premises: Vec<&Statement> = d
            .premises
            .iter()
            .map(|&p| {
                self.facts
                    .get(p)
                    .map(|f| &f.statement)
                    .ok_or(DeduceError::UnknownFact(p))
            })
            .collect::<Result<_, _>>()?;
        if !rules::check_rule(d.rule, &premises, statement) {
            return Err(DeduceError::InvalidCertificate(format!(
                "rule {:?} does not derive `{statement:?}` from the recorded premises",
                d.rule
            )));
        }
        if let Some(witness) = &d.witness {
            self.check_kernel_witness(statement, witness)?;
        }
        Ok(())
    }

    /// Exact replay: expand the coefficient combination of the recomputed
    /// rows and compare with the factored target.
    fn check_kernel_witness(
        &self,
        statement: &Statement,
        witness: &KernelWitness,
    ) -> Result<(), DeduceError> {
        let Statement::KernelMember { element, group } = statement else {
            return Err(DeduceError::InvalidCertificate(
                "kernel witnesses only support kernel-membership statements".into(),
            ));
        };
        if group.variant != GroupVariant::H || !group.quotient_by.is_empty() {
            return Err(DeduceError::InvalidCertificate(
                "kernel witnesses certify the plain presentation".into(),
            ));
        }
        let record = self.handles.get(witness.handle).ok_or_else(|| {
            DeduceError::InvalidCertificate(format!("unknown handle {}", witness.handle))
        })?;
        if record.p != group.p || record.q != group.q || record.domain != group.domain {
            return Err(DeduceError::InvalidCertificate(
                "witness handle does not match the stated group".into(),
            ));
        }
        let expected = FactorTarget::of_value(element)?;
        if expected != witness.target {
            return Err(DeduceError::InvalidCertificate(
                "witness target does not factor the stated element".into(),
            ));
        }
        witness_replays(record, witness)
    }

    /// Runs the deduction rules in snapshot rounds until a fixpoint or the
    /// round cap; returns the newly inserted fact ids in insertion order.
    pub fn apply_rules(&mut self, max_rounds: u32) -> Result<Vec<FactId>, DeduceError> {
        self.apply_rules_with(max_rounds, &RuleId::ALL)
    }

    /// Rule-order-explicit variant; the outcome does not depend on `order`.
    pub fn apply_rules_with(
        &mut self,
        max_rounds: u32,
        order: &[RuleId],
    ) -> Result<Vec<FactId>, DeduceError> {
        let mut new_ids = Vec::new();
        for _ in 0..max_rounds {
            let mut candidates = Vec::new();
            for &rule in order {
                candidates.extend(rules::candidates(self, rule));
            }
            // canonical order: by statement; among derivations of the same
            // statement, the latest applicable rule wins (worked-example
            // routes like R4 beat blanket axioms like R1)
            candidates.sort_by(|a, b| {
                (&a.statement, std::cmp::Reverse(a.rule), &a.premises)
                    .cmp(&(&b.statement, std::cmp::Reverse(b.rule), &b.premises))
            });
            let mut changed = false;
            for c in candidates {
                let status = self.inherited_status(&c.premises);
                let existing = self.index.get(&c.statement).copied();
                let worth_it = match existing {
                    None => true,
                    Some(id) => status.preferable_to(&self.facts[id].status),
                };
                if !worth_it {
                    continue;
                }
                let before = self.facts.len();
                let id = self.assert_fact(
                    c.statement,
                    status,
                    Some(Derivation {
                        rule: c.rule,
                        premises: c.premises,
                        witness: c.witness,
                    }),
                )?;
                if self.facts.len() > before {
                    new_ids.push(id);
                    changed = true;
                } else if matches!(self.log.last(), Some(LogEntry::Upgraded { fact }) if *fact == id)
                {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(new_ids)
    }

    /// Pattern query; matching facts in id order.
    pub fn query(&self, pattern: &Pattern) -> Vec<&Fact> {
        self.facts.iter().filter(|f| pattern.matches(f)).collect()
    }

    /// Checks one rule application against the store without mutating it:
    /// would `rule` derive `conclusion` from these premises?
    pub fn validate_rule(
        &self,
        rule: RuleId,
        premises: &[FactId],
        conclusion: &Statement,
    ) -> bool {
        let Some(statements) = premises
            .iter()
            .map(|&p| self.facts.get(p).map(|f| &f.statement))
            .collect::<Option<Vec<_>>>()
        else {
            return false;
        };
        rules::check_rule(rule, &statements, &conclusion.clone().normalized())
    }
}

/// Self-contained, portable kernel certificate: the element, the full
/// handle recipe, and the coefficient combination. This is what the CLI
/// emits for a kernel query and accepts back as an assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelCertificateDoc {
    #[serde(with = "dec")]
    pub element: BigInt,
    pub handle: HandleRecord,
    #[serde(with = "crate::serde_util::dec_pairs")]
    pub coefficients: Vec<(usize, BigInt)>,
    pub target: FactorTarget,
}

impl KernelCertificateDoc {
    pub fn from_presentation(
        handle: &PresentationHandle,
        element: &BigInt,
        certificate: &MembershipCertificate,
    ) -> Result<Self, DeduceError> {
        if !verify_certificate(certificate, handle.matrix()) {
            return Err(DeduceError::InvalidCertificate(
                "lattice certificate does not replay against the handle".into(),
            ));
        }
        let doc = KernelCertificateDoc {
            element: element.clone(),
            handle: HandleRecord::of(handle),
            coefficients: certificate.coefficients.clone(),
            target: FactorTarget::of_value(element)?,
        };
        doc.verify()?;
        Ok(doc)
    }

    /// Replays the coefficient combination against the recomputed rows.
    pub fn verify(&self) -> Result<(), DeduceError> {
        let expected = FactorTarget::of_value(&self.element)?;
        if expected != self.target {
            return Err(DeduceError::InvalidCertificate(
                "target does not factor the stated element".into(),
            ));
        }
        let witness = KernelWitness {
            handle: 0,
            coefficients: self.coefficients.clone(),
            target: self.target.clone(),
        };
        witness_replays(&self.handle, &witness)
    }

    /// Verifies and inserts the certified fact.
    pub fn assert_into(&self, store: &mut FactStore) -> Result<FactId, DeduceError> {
        self.verify()?;
        let handle_id = store.add_handle(self.handle.clone());
        let group = GroupRef::h(
            self.handle.p.clone(),
            self.handle.q.clone(),
            self.handle.domain,
        )?;
        store.assert_fact(
            Statement::KernelMember {
                element: self.element.clone(),
                group,
            },
            FactStatus::Certified,
            Some(Derivation {
                rule: RuleId::External,
                premises: Vec::new(),
                witness: Some(KernelWitness {
                    handle: handle_id,
                    coefficients: self.coefficients.clone(),
                    target: self.target.clone(),
                }),
            }),
        )
    }
}

/// Wildcard pattern over facts: absent fields match anything; `groups`
/// constrains the statement's group slots positionally (use `None` inside
/// the list for a per-slot wildcard).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Pattern {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<FactId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<StatementKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Option<GroupRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_dec")]
    pub element: Option<BigInt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SequenceParams>,
}

mod opt_dec {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&x.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        raw.map(|x| BigInt::from_str(&x).map_err(|_| D::Error::custom("invalid integer")))
            .transpose()
    }
}

impl Pattern {
    pub fn by_id(id: FactId) -> Self {
        Pattern {
            id: Some(id),
            ..Pattern::default()
        }
    }

    pub fn by_kind(kind: StatementKind) -> Self {
        Pattern {
            kind: Some(kind),
            ..Pattern::default()
        }
    }

    pub fn matches(&self, fact: &Fact) -> bool {
        if let Some(id) = self.id {
            if fact.id != id {
                return false;
            }
        }
        if let Some(kind) = self.kind {
            if fact.statement.kind() != kind {
                return false;
            }
        }
        if !self.groups.is_empty() {
            let slots = fact.statement.groups();
            for (i, want) in self.groups.iter().enumerate() {
                let Some(want) = want else { continue };
                match slots.get(i) {
                    Some(have) if *have == want => {}
                    _ => return false,
                }
            }
        }
        if let Some(element) = &self.element {
            if fact.statement.element() != Some(element) {
                return false;
            }
        }
        if let Some(params) = &self.params {
            if fact.statement.params() != Some(params) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests;
