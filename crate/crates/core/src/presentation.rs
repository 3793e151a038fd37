//! Builds truncated group presentations from division-sequence dynamics and
//! answers kernel and quotient queries against them.
//!
//! A harvest collects the defining relation `q = 1`, the sign relation when
//! the domain is the nonzero integers, and one relation per multiply-branch
//! step `c -> p*c + 1` seen either directly (all `|c| <= N` coprime to `q`)
//! or along orbits walked to a configured depth. The harvested rows span a
//! sublattice of the full (infinite) relation lattice, so a membership
//! certificate is a sound witness of kernel membership, while a miss only
//! means "not derivable at this truncation".

use crate::dynamics::{orbit, Budget, ClassPartition, Cycle, DomainSpec, SequenceParams};
use crate::lattice::{
    hnf, membership, snf_quotient_rows, verify_certificate, HNFBasis, LatticeError, Membership,
    MembershipCertificate, QuotientReport, RelationMatrix, RelationProvenance, SparseVec,
};
use crate::numth::{factor_in, factor_value, sieve_primes, ExponentVector, NumthError, PrimeBasis};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PresentationError {
    #[error(transparent)]
    Numth(#[from] NumthError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{0} is not an element of the domain")]
    OutsideDomain(BigInt),
    #[error("certificate failed to replay against the harvested rows")]
    CertificateReplay,
    #[error("the partition does not resolve the component of 1")]
    MissingComponentOfOne,
    #[error("partition was computed for different parameters")]
    PartitionMismatch,
}

/// Basis policy: adaptive bases absorb every prime the harvest encounters;
/// a fixed bound excludes (and logs) whole rows containing larger primes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisPolicy {
    Adaptive,
    FixedBound(u64),
}

/// Harvest shape: one-step relations for all `|c| <= seed_bound` coprime to
/// `q`, plus relations along orbits of the same seeds walked up to
/// `trajectory_depth` steps under `budget`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestConfig {
    pub seed_bound: u64,
    pub trajectory_depth: u64,
    pub budget: Budget,
    pub basis_policy: BasisPolicy,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            seed_bound: 10,
            trajectory_depth: 0,
            budget: Budget::default(),
            basis_policy: BasisPolicy::Adaptive,
        }
    }
}

/// A relation that the harvest refused to keep, with the reason. Rows are
/// excluded whole — projecting them onto a smaller basis would be unsound.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExcludedRelation {
    pub provenance: RelationProvenance,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExclusionReason {
    /// The row involves primes beyond the fixed basis bound.
    PrimeOverBound(Vec<BigInt>),
    /// The multiply branch leaves the domain (`p*c + 1 = 0`).
    StepLeavesDomain,
    /// A value's factorization stalled; the stubborn cofactor is recorded.
    FactorizationStalled(BigInt),
}

/// A truncated presentation: parameters, the discovered prime basis, the
/// harvested relation rows with provenance, and a lazily computed reduced
/// basis for membership queries.
#[derive(Debug)]
pub struct PresentationHandle {
    params: SequenceParams,
    config: HarvestConfig,
    basis: PrimeBasis,
    matrix: RelationMatrix,
    excluded: Vec<ExcludedRelation>,
    reduced: OnceLock<Result<HNFBasis, LatticeError>>,
}

impl PresentationHandle {
    pub fn params(&self) -> &SequenceParams {
        &self.params
    }

    pub fn config(&self) -> &HarvestConfig {
        &self.config
    }

    pub fn basis(&self) -> &PrimeBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &RelationMatrix {
        &self.matrix
    }

    pub fn excluded(&self) -> &[ExcludedRelation] {
        &self.excluded
    }

    /// Reduced row basis, computed on first use and cached.
    pub fn reduced_basis(&self) -> Result<&HNFBasis, PresentationError> {
        self.reduced
            .get_or_init(|| hnf(&self.matrix))
            .as_ref()
            .map_err(|e| PresentationError::Lattice(e.clone()))
    }
}

/// Multiply-branch sources harvested for one seed range: every `c` with
/// `q` not dividing `c` whose step stays inside the budget.
fn collect_sources(
    params: &SequenceParams,
    config: &HarvestConfig,
    skipped: &mut Vec<ExcludedRelation>,
) -> BTreeSet<BigInt> {
    let mut sources = BTreeSet::new();
    let bound = BigInt::from(config.seed_bound);
    let mut record = |c: &BigInt, skipped: &mut Vec<ExcludedRelation>| {
        if (c % params.q()).is_zero() {
            return;
        }
        let next = params.p() * c + BigInt::one();
        if next.is_zero() {
            skipped.push(ExcludedRelation {
                provenance: RelationProvenance::OrbitStep { source: c.clone() },
                reason: ExclusionReason::StepLeavesDomain,
            });
            return;
        }
        sources.insert(c.clone());
    };

    let mut magnitude = BigInt::one();
    while magnitude <= bound {
        record(&magnitude, skipped);
        if params.domain() == DomainSpec::NonzeroIntegers {
            record(&-&magnitude, skipped);
        }
        magnitude += 1;
    }

    if config.trajectory_depth > 0 {
        let walk_budget = Budget {
            max_steps: config.trajectory_depth.min(config.budget.max_steps),
            max_magnitude: config.budget.max_magnitude.clone(),
        };
        let mut seed = BigInt::one();
        while seed <= bound {
            for s in [seed.clone(), -&seed] {
                if !params.domain().contains(&s) {
                    continue;
                }
                let result = orbit(s, params, &walk_budget);
                for value in &result.path {
                    if !(value % params.q()).is_zero() {
                        record(value, skipped);
                    }
                }
            }
            seed += 1;
        }
    }

    sources
}

/// Harvests the defining relations of the truncated presentation.
pub fn harvest(params: &SequenceParams, config: &HarvestConfig) -> Result<PresentationHandle, PresentationError> {
    let mut excluded = Vec::new();
    let sources = collect_sources(params, config, &mut excluded);

    // factor everything first so the basis comes out sorted; a stalled
    // factorization poisons the rows that touch the value, never the harvest
    let mut factored: BTreeMap<BigInt, crate::numth::Factorization> = BTreeMap::new();
    let mut stalled: BTreeMap<BigInt, BigInt> = BTreeMap::new();
    let mut factor_of = |n: &BigInt,
                         factored: &mut BTreeMap<BigInt, crate::numth::Factorization>|
     -> Result<(), PresentationError> {
        if factored.contains_key(n) || stalled.contains_key(n) {
            return Ok(());
        }
        match factor_value(n) {
            Ok(f) => {
                factored.insert(n.clone(), f);
                Ok(())
            }
            Err(NumthError::FactorizationStalled(cofactor)) => {
                stalled.insert(n.clone(), cofactor);
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    };
    factor_of(params.q(), &mut factored)?;
    for c in &sources {
        factor_of(c, &mut factored)?;
        factor_of(&(params.p() * c + BigInt::one()), &mut factored)?;
    }
    let stalled_row = |c: &BigInt| -> Option<BigInt> {
        let next = params.p() * c + BigInt::one();
        stalled.get(c).or_else(|| stalled.get(&next)).cloned()
    };

    let row_primes = |c: &BigInt, factored: &BTreeMap<BigInt, crate::numth::Factorization>| -> Vec<BigInt> {
        let next = params.p() * c + BigInt::one();
        let mut primes: Vec<BigInt> = factored[c].factors.keys().cloned().collect();
        primes.extend(factored[&next].factors.keys().cloned());
        primes
    };

    let over_bound = |primes: &[BigInt], bound: u64| -> Vec<BigInt> {
        let b = BigInt::from(bound);
        primes.iter().filter(|p| **p > b).cloned().collect()
    };

    let mut keep_q = true;
    let mut kept_sources: Vec<BigInt> = Vec::new();
    let mut basis_primes: BTreeSet<BigInt> = BTreeSet::new();
    if let Some(cofactor) = stalled.get(params.q()) {
        keep_q = false;
        excluded.push(ExcludedRelation {
            provenance: RelationProvenance::QIsOne,
            reason: ExclusionReason::FactorizationStalled(cofactor.clone()),
        });
    }
    let mut usable_sources: Vec<&BigInt> = Vec::new();
    for c in &sources {
        match stalled_row(c) {
            None => usable_sources.push(c),
            Some(cofactor) => excluded.push(ExcludedRelation {
                provenance: RelationProvenance::OrbitStep { source: c.clone() },
                reason: ExclusionReason::FactorizationStalled(cofactor),
            }),
        }
    }
    match config.basis_policy {
        BasisPolicy::Adaptive => {
            if keep_q {
                basis_primes.extend(factored[params.q()].factors.keys().cloned());
            }
            for &c in &usable_sources {
                basis_primes.extend(row_primes(c, &factored));
                kept_sources.push(c.clone());
            }
        }
        BasisPolicy::FixedBound(bound) => {
            if keep_q {
                let q_primes: Vec<BigInt> =
                    factored[params.q()].factors.keys().cloned().collect();
                let over = over_bound(&q_primes, bound);
                if over.is_empty() {
                    basis_primes.extend(q_primes);
                } else {
                    keep_q = false;
                    excluded.push(ExcludedRelation {
                        provenance: RelationProvenance::QIsOne,
                        reason: ExclusionReason::PrimeOverBound(over),
                    });
                }
            }
            for &c in &usable_sources {
                let primes = row_primes(c, &factored);
                let over = over_bound(&primes, bound);
                if over.is_empty() {
                    basis_primes.extend(primes);
                    kept_sources.push(c.clone());
                } else {
                    excluded.push(ExcludedRelation {
                        provenance: RelationProvenance::OrbitStep { source: c.clone() },
                        reason: ExclusionReason::PrimeOverBound(over),
                    });
                }
            }
        }
    }
    excluded.sort();
    excluded.dedup();

    let includes_sign = params.domain() == DomainSpec::NonzeroIntegers;
    let basis = PrimeBasis::from_primes(includes_sign, basis_primes);
    let mut matrix = RelationMatrix::new(&basis);

    let vectorize = |n: &BigInt| -> Result<ExponentVector, PresentationError> {
        factor_in(n, &basis).map_err(PresentationError::from)
    };

    if keep_q {
        matrix.push(&vectorize(params.q())?, RelationProvenance::QIsOne)?;
    }
    if includes_sign {
        matrix.push_sign_row();
    }
    for c in &kept_sources {
        let next = params.p() * c + BigInt::one();
        let row = crate::numth::vec_sub(&vectorize(&next)?, &vectorize(c)?)
            .map_err(PresentationError::from)?;
        matrix.push(&row, RelationProvenance::OrbitStep { source: c.clone() })?;
    }

    Ok(PresentationHandle {
        params: params.clone(),
        config: config.clone(),
        basis,
        matrix,
        excluded,
        reduced: OnceLock::new(),
    })
}

/// Answer to a kernel query. `Yes` is sound at any truncation; `Unknown`
/// means the harvested relations do not derive the membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelAnswer {
    Yes(MembershipCertificate),
    Unknown { diagnostic: String },
}

impl KernelAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, KernelAnswer::Yes(_))
    }
}

/// Tests whether `x` lies in the kernel of the presentation homomorphism,
/// as witnessed by the harvested relation lattice. Certificates are
/// replay-verified before being returned.
pub fn kernel_member(x: &BigInt, handle: &PresentationHandle) -> Result<KernelAnswer, PresentationError> {
    if !handle.params.domain().contains(x) {
        return Err(PresentationError::OutsideDomain(x.clone()));
    }
    let vector = match factor_in(x, handle.basis()) {
        Ok(v) => v,
        Err(NumthError::BasisExceeded(cofactor)) => {
            return Ok(KernelAnswer::Unknown {
                diagnostic: format!(
                    "{x} has prime factors outside the harvested basis (cofactor {cofactor})"
                ),
            })
        }
        Err(e) => return Err(e.into()),
    };
    match membership(&vector, handle.reduced_basis()?)? {
        Membership::Yes(cert) => {
            if !verify_certificate(&cert, handle.matrix()) {
                return Err(PresentationError::CertificateReplay);
            }
            Ok(KernelAnswer::Yes(cert))
        }
        Membership::No => Ok(KernelAnswer::Unknown {
            diagnostic: format!(
                "not derivable at this truncation (seed_bound={}, depth={})",
                handle.config.seed_bound, handle.config.trajectory_depth
            ),
        }),
    }
}

/// Kernel flag for one basis prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeKernelFlag {
    pub prime: BigInt,
    pub in_kernel_certified: bool,
}

/// Quotient structure of the truncated presentation plus per-prime kernel
/// flags. The reported group is the quotient of the free group on the
/// reported columns by the harvested rows supported there; the subgroup of
/// the presented group generated by those primes is a quotient of it, so a
/// trivial report certifies that every reported prime is in the kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresentationReport {
    pub quotient: QuotientReport,
    pub primes: Vec<PrimeKernelFlag>,
    pub truncated: bool,
    pub note: String,
}

/// Smith-form report of the truncated quotient. With `report_bound`, the
/// ambient is the free group on *all* primes up to the bound (plus the sign
/// slot) and only rows fully supported there are kept; rows are never
/// projected.
pub fn quotient_report(
    handle: &PresentationHandle,
    report_bound: Option<u64>,
) -> Result<PresentationReport, PresentationError> {
    let includes_sign = handle.matrix().includes_sign();
    let offset = usize::from(includes_sign);

    let (rows, ambient, reported_primes): (Vec<SparseVec>, usize, Vec<BigInt>) = match report_bound {
        None => {
            let ambient = offset + handle.basis().len();
            (
                handle.matrix().rows().to_vec(),
                ambient,
                handle.basis().primes().to_vec(),
            )
        }
        Some(bound) => {
            let small: Vec<BigInt> = sieve_primes(bound).into_iter().map(BigInt::from).collect();
            let slot: BTreeMap<BigInt, usize> = small
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), i + offset))
                .collect();
            let ambient = offset + small.len();
            let mut rows = Vec::new();
            'rows: for row in handle.matrix().rows() {
                let mut mapped = SparseVec::new();
                for (&col, e) in row {
                    if includes_sign && col == 0 {
                        mapped.insert(0, e.clone());
                        continue;
                    }
                    let prime = handle.basis().prime(col - offset);
                    match slot.get(prime) {
                        Some(&target) => {
                            mapped.insert(target, e.clone());
                        }
                        None => continue 'rows, // excluded whole, never projected
                    }
                }
                rows.push(mapped);
            }
            (rows, ambient, small)
        }
    };

    let quotient = snf_quotient_rows(&rows, ambient)?;

    let reduced = handle.reduced_basis()?;
    let mut primes = Vec::new();
    for prime in &reported_primes {
        let flag = match handle.basis().index_of(prime) {
            Some(i) => {
                let v = ExponentVector::from_parts(handle.basis(), 0, [(i, BigInt::one())]);
                membership(&v, reduced)?.is_yes()
            }
            None => false,
        };
        primes.push(PrimeKernelFlag {
            prime: prime.clone(),
            in_kernel_certified: flag,
        });
    }

    Ok(PresentationReport {
        quotient,
        primes,
        truncated: true,
        note: "truncated harvest: the reported quotient only bounds the subgroup generated by the \
               reported primes; relations outside the scan may collapse it further"
            .to_string(),
    })
}

/// Status of one overline relation row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OverlineRowStatus {
    /// `value` resolves to a cycle distinct from the cycle of 1; both
    /// witness cycles are recorded.
    Certified { witness: Box<(Cycle, Cycle)> },
    /// Assumed not equivalent to 1 (its component is unresolved).
    Hypothesis,
    /// The `q = 1` or sign relation, shared with the plain presentation.
    Structural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlineRow {
    pub provenance: RelationProvenance,
    pub status: OverlineRowStatus,
}

/// Truncation of the complementary presentation: `value = 1` for every
/// resolved value not equivalent to 1, plus the structural rows.
#[derive(Debug)]
pub struct OverlineHandle {
    params: SequenceParams,
    basis: PrimeBasis,
    matrix: RelationMatrix,
    rows: Vec<OverlineRow>,
    excluded: Vec<ExcludedRelation>,
}

impl OverlineHandle {
    pub fn params(&self) -> &SequenceParams {
        &self.params
    }

    pub fn basis(&self) -> &PrimeBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &RelationMatrix {
        &self.matrix
    }

    pub fn rows(&self) -> &[OverlineRow] {
        &self.rows
    }

    pub fn excluded(&self) -> &[ExcludedRelation] {
        &self.excluded
    }

    pub fn has_hypotheses(&self) -> bool {
        self.rows.iter().any(|r| r.status == OverlineRowStatus::Hypothesis)
    }

    pub fn certified_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.status, OverlineRowStatus::Certified { .. }))
            .count()
    }

    pub fn quotient(&self) -> Result<QuotientReport, PresentationError> {
        let includes_sign = self.matrix.includes_sign();
        let ambient = usize::from(includes_sign) + self.basis.len();
        snf_quotient_rows(self.matrix.rows(), ambient).map_err(PresentationError::from)
    }
}

/// Builds the overline truncation from a class partition. Certified rows
/// need the partition to resolve the component of 1; unresolved seeds only
/// contribute rows when hypotheses are explicitly allowed.
pub fn build_overline(
    params: &SequenceParams,
    partition: &mut ClassPartition,
    config: &HarvestConfig,
    allow_hypotheses: bool,
) -> Result<OverlineHandle, PresentationError> {
    if partition.params() != params {
        return Err(PresentationError::PartitionMismatch);
    }
    let one = BigInt::one();
    let cycle_of_one = partition
        .classify_value(&one)
        .ok_or(PresentationError::MissingComponentOfOne)?;
    let one_cycle = partition.cycles()[cycle_of_one].clone();

    // candidate values: resolved seeds and the members of foreign cycles
    let mut certified: BTreeMap<BigInt, usize> = BTreeMap::new();
    let mut hypothetical: BTreeSet<BigInt> = BTreeSet::new();
    for (seed, res) in partition.resolutions() {
        match res {
            crate::dynamics::SeedResolution::InCycle(c) if *c != cycle_of_one => {
                certified.insert(seed.clone(), *c);
            }
            crate::dynamics::SeedResolution::InCycle(_) => {}
            crate::dynamics::SeedResolution::Unresolved(_) => {
                if allow_hypotheses {
                    hypothetical.insert(seed.clone());
                }
            }
        }
    }
    for (i, cycle) in partition.cycles().iter().enumerate() {
        if i == cycle_of_one {
            continue;
        }
        for member in cycle.members() {
            certified.insert(member.clone(), i);
        }
    }

    // factor all values, then build the sorted basis; stalls drop the row
    let mut excluded = Vec::new();
    let mut factored: BTreeMap<BigInt, crate::numth::Factorization> = BTreeMap::new();
    for value in certified
        .keys()
        .chain(hypothetical.iter())
        .chain(std::iter::once(params.q()))
    {
        if factored.contains_key(value) {
            continue;
        }
        match factor_value(value) {
            Ok(f) => {
                factored.insert(value.clone(), f);
            }
            Err(NumthError::FactorizationStalled(cofactor)) => {
                let provenance = if value == params.q() {
                    RelationProvenance::QIsOne
                } else {
                    RelationProvenance::ValueIsOne { value: value.clone() }
                };
                excluded.push(ExcludedRelation {
                    provenance,
                    reason: ExclusionReason::FactorizationStalled(cofactor),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    certified.retain(|v, _| factored.contains_key(v));
    hypothetical.retain(|v| factored.contains_key(v));
    let keep_q_value = factored.contains_key(params.q());

    let bound_filter = |value: &BigInt, excluded: &mut Vec<ExcludedRelation>| -> bool {
        if let BasisPolicy::FixedBound(bound) = config.basis_policy {
            let b = BigInt::from(bound);
            let over: Vec<BigInt> = factored[value]
                .factors
                .keys()
                .filter(|p| **p > b)
                .cloned()
                .collect();
            if !over.is_empty() {
                excluded.push(ExcludedRelation {
                    provenance: RelationProvenance::ValueIsOne { value: value.clone() },
                    reason: ExclusionReason::PrimeOverBound(over),
                });
                return false;
            }
        }
        true
    };

    let keep_q = keep_q_value && bound_filter(params.q(), &mut excluded);
    let kept_certified: Vec<(BigInt, usize)> = certified
        .iter()
        .filter(|(v, _)| bound_filter(v, &mut excluded))
        .map(|(v, c)| (v.clone(), *c))
        .collect();
    let kept_hypothetical: Vec<BigInt> = hypothetical
        .iter()
        .filter(|v| bound_filter(v, &mut excluded))
        .cloned()
        .collect();

    let mut basis_primes: BTreeSet<BigInt> = BTreeSet::new();
    if keep_q {
        basis_primes.extend(factored[params.q()].factors.keys().cloned());
    }
    for (v, _) in &kept_certified {
        basis_primes.extend(factored[v].factors.keys().cloned());
    }
    for v in &kept_hypothetical {
        basis_primes.extend(factored[v].factors.keys().cloned());
    }

    let includes_sign = params.domain() == DomainSpec::NonzeroIntegers;
    let basis = PrimeBasis::from_primes(includes_sign, basis_primes);
    let mut matrix = RelationMatrix::new(&basis);
    let mut rows = Vec::new();

    if keep_q {
        matrix.push(&factor_in(params.q(), &basis)?, RelationProvenance::QIsOne)?;
        rows.push(OverlineRow {
            provenance: RelationProvenance::QIsOne,
            status: OverlineRowStatus::Structural,
        });
    }
    if includes_sign {
        matrix.push_sign_row();
        rows.push(OverlineRow {
            provenance: RelationProvenance::SignSquared,
            status: OverlineRowStatus::Structural,
        });
    }
    for (value, cycle) in &kept_certified {
        let provenance = RelationProvenance::ValueIsOne { value: value.clone() };
        matrix.push(&factor_in(value, &basis)?, provenance.clone())?;
        rows.push(OverlineRow {
            provenance,
            status: OverlineRowStatus::Certified {
                witness: Box::new((partition.cycles()[*cycle].clone(), one_cycle.clone())),
            },
        });
    }
    for value in &kept_hypothetical {
        let provenance = RelationProvenance::ValueIsOne { value: value.clone() };
        matrix.push(&factor_in(value, &basis)?, provenance.clone())?;
        rows.push(OverlineRow {
            provenance,
            status: OverlineRowStatus::Hypothesis,
        });
    }

    excluded.sort();
    excluded.dedup();
    Ok(OverlineHandle {
        params: params.clone(),
        basis,
        matrix,
        rows,
        excluded,
    })
}
