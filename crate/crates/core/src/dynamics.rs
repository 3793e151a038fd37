//! The division-sequence step map, orbit iteration with cycle detection, and
//! the equivalence-class census.
//!
//! One application of the map sends `c` to `c / q` when `|q|` divides `c`
//! and to `p*c + 1` otherwise. Orbits are iterated exactly until a value
//! repeats, a step budget runs out, a magnitude cap is exceeded, or the
//! trajectory leaves the domain. A census resolves a whole seed range,
//! registers every distinct cycle in canonical form, and keeps a union-find
//! over the visited values; the number of distinct cycles is a sound lower
//! bound on the number of equivalence classes.

use crate::serde_util::dec;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DynamicsError {
    #[error("{0} is not an element of the domain {1}")]
    OutsideDomain(BigInt, DomainSpec),
    #[error("|q| must be at least 2, got {0}")]
    DegenerateQ(BigInt),
    #[error("p = {0} requires the unusual-parameter override (default guard is p >= 1)")]
    UnusualP(BigInt),
    #[error("seed range is empty")]
    EmptyRange,
    #[error("seed range {0}..{1} leaves the domain {2}")]
    RangeOutsideDomain(BigInt, BigInt, DomainSpec),
}

/// Domain of the map: positive integers or nonzero integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    PositiveIntegers,
    NonzeroIntegers,
}

impl DomainSpec {
    pub fn contains(&self, v: &BigInt) -> bool {
        match self {
            DomainSpec::PositiveIntegers => v.is_positive(),
            DomainSpec::NonzeroIntegers => !v.is_zero(),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::PositiveIntegers => f.write_str("positive integers"),
            DomainSpec::NonzeroIntegers => f.write_str("nonzero integers"),
        }
    }
}

/// Map parameters. `|q| >= 2` always (a unit `q` makes the division branch
/// total and degenerate); the default guard additionally requires `p >= 1`,
/// and the unusual-parameter override admits any `p` in the domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceParams {
    #[serde(with = "dec")]
    p: BigInt,
    #[serde(with = "dec")]
    q: BigInt,
    domain: DomainSpec,
}

impl SequenceParams {
    pub fn new(p: BigInt, q: BigInt, domain: DomainSpec) -> Result<Self, DynamicsError> {
        Self::with_options(p, q, domain, false)
    }

    pub fn with_options(
        p: BigInt,
        q: BigInt,
        domain: DomainSpec,
        allow_unusual: bool,
    ) -> Result<Self, DynamicsError> {
        if q.abs() < BigInt::from(2) {
            return Err(DynamicsError::DegenerateQ(q));
        }
        if !domain.contains(&q) {
            return Err(DynamicsError::OutsideDomain(q, domain));
        }
        if !domain.contains(&p) {
            return Err(DynamicsError::OutsideDomain(p, domain));
        }
        if !allow_unusual && p < BigInt::from(1) {
            return Err(DynamicsError::UnusualP(p));
        }
        Ok(SequenceParams { p, q, domain })
    }

    pub fn p(&self) -> &BigInt {
        &self.p
    }

    pub fn q(&self) -> &BigInt {
        &self.q
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }
}

impl fmt::Display for SequenceParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.domain {
            DomainSpec::PositiveIntegers => "Z>0",
            DomainSpec::NonzeroIntegers => "Z!=0",
        };
        write!(f, "C[p={}, q={}, {}]", self.p, self.q, d)
    }
}

/// Step and magnitude caps for orbit iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
    pub max_magnitude: BigInt,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: 100_000,
            max_magnitude: BigInt::from(10u32).pow(36),
        }
    }
}

/// One application of the map. Divisibility tests use `|q|`; the quotient is
/// the exact integer `c / q`, keeping `q`'s sign.
pub fn step(c: &BigInt, params: &SequenceParams) -> Result<BigInt, DynamicsError> {
    if !params.domain.contains(c) {
        return Err(DynamicsError::OutsideDomain(c.clone(), params.domain));
    }
    let next = if (c % &params.q).is_zero() {
        c / &params.q
    } else {
        &params.p * c + BigInt::one()
    };
    if !params.domain.contains(&next) {
        return Err(DynamicsError::OutsideDomain(next, params.domain));
    }
    Ok(next)
}

/// A periodic orbit in canonical rotation: members start at the minimum
/// element, the map sends each member to the next and the last to the first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cycle {
    members: Vec<BigInt>,
}

impl Cycle {
    /// Canonicalizes a raw rotation by starting at its minimum element.
    fn from_rotation(raw: Vec<BigInt>) -> Self {
        debug_assert!(!raw.is_empty());
        let min_at = raw
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut members = Vec::with_capacity(raw.len());
        members.extend_from_slice(&raw[min_at..]);
        members.extend_from_slice(&raw[..min_at]);
        Cycle { members }
    }

    pub fn members(&self) -> &[BigInt] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Stable hex identifier derived from the canonical member list.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        for m in &self.members {
            hasher.update(m.to_string().as_bytes());
            hasher.update(b",");
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// How an orbit ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrbitStatus {
    /// A value repeated; the entry point of the cycle occurs in the path.
    ReachedCycle(Cycle),
    BudgetExceeded(u64),
    /// The first out-of-bounds value (not appended to the path).
    MagnitudeExceeded(BigInt),
    /// Index of the path entry whose step left the domain.
    DomainViolation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitResult {
    pub seed: BigInt,
    pub path: Vec<BigInt>,
    pub status: OrbitStatus,
}

/// Iterates the map from `seed` until a value repeats or the budget is
/// spent. Failures are reported through the status; this never panics.
pub fn orbit(seed: BigInt, params: &SequenceParams, budget: &Budget) -> OrbitResult {
    if !params.domain.contains(&seed) {
        return OrbitResult {
            seed: seed.clone(),
            path: vec![seed],
            status: OrbitStatus::DomainViolation(0),
        };
    }
    let mut path = vec![seed.clone()];
    let mut position: HashMap<BigInt, usize> = HashMap::new();
    position.insert(seed.clone(), 0);
    let mut steps = 0u64;
    let status = loop {
        if steps == budget.max_steps {
            break OrbitStatus::BudgetExceeded(budget.max_steps);
        }
        let current = path.last().expect("path is never empty");
        let next = match step(current, params) {
            Ok(v) => v,
            Err(_) => break OrbitStatus::DomainViolation(path.len() - 1),
        };
        if next.abs() > budget.max_magnitude {
            break OrbitStatus::MagnitudeExceeded(next);
        }
        steps += 1;
        if let Some(&entry) = position.get(&next) {
            break OrbitStatus::ReachedCycle(Cycle::from_rotation(path[entry..].to_vec()));
        }
        position.insert(next.clone(), path.len());
        path.push(next);
    };
    OrbitResult { seed, path, status }
}

/// Inclusive seed range. For the nonzero domain, zero inside the range is
/// skipped rather than rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedRange {
    pub start: BigInt,
    pub end: BigInt,
}

impl SeedRange {
    pub fn new(start: BigInt, end: BigInt) -> Result<Self, DynamicsError> {
        if start > end {
            return Err(DynamicsError::EmptyRange);
        }
        Ok(SeedRange { start, end })
    }

    fn validate(&self, domain: DomainSpec) -> Result<(), DynamicsError> {
        let ok = match domain {
            DomainSpec::PositiveIntegers => self.start.is_positive(),
            DomainSpec::NonzeroIntegers => !(self.start.is_zero() && self.end.is_zero()),
        };
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::RangeOutsideDomain(
                self.start.clone(),
                self.end.clone(),
                domain,
            ))
        }
    }
}

/// Why a seed is not assigned to a cycle class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unresolved {
    BudgetExceeded(u64),
    MagnitudeExceeded(BigInt),
    DomainViolation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedResolution {
    /// Index into [`ClassPartition::cycles`].
    InCycle(usize),
    Unresolved(Unresolved),
}

/// Union-find over interned big-integer values.
#[derive(Debug, Clone, Default)]
pub struct ValueClasses {
    ids: HashMap<BigInt, u32>,
    values: Vec<BigInt>,
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl ValueClasses {
    fn intern(&mut self, v: &BigInt) -> u32 {
        if let Some(&i) = self.ids.get(v) {
            return i;
        }
        let i = self.values.len() as u32;
        self.ids.insert(v.clone(), i);
        self.values.push(v.clone());
        self.parent.push(i);
        self.rank.push(0);
        i
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }

    pub fn contains(&self, v: &BigInt) -> bool {
        self.ids.contains_key(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Some(true)` when both values were visited and lie in the same class.
    pub fn same_class(&mut self, a: &BigInt, b: &BigInt) -> Option<bool> {
        let (&ia, &ib) = (self.ids.get(a)?, self.ids.get(b)?);
        Some(self.find(ia) == self.find(ib))
    }

    /// Replays every merge of `other` into `self`; the resulting partition is
    /// independent of merge order.
    fn absorb(&mut self, mut other: ValueClasses) {
        for i in 0..other.values.len() as u32 {
            let root = other.find(i);
            let a = self.intern(&other.values[i as usize]);
            let b = self.intern(&other.values[root as usize]);
            self.union(a, b);
        }
    }
}

/// Result of resolving a seed range: per-seed resolutions, the registry of
/// distinct cycles in canonical order, and the union-find over every value
/// the walks visited.
#[derive(Debug, Clone)]
pub struct ClassPartition {
    params: SequenceParams,
    range: SeedRange,
    cycles: Vec<Cycle>,
    resolutions: BTreeMap<BigInt, SeedResolution>,
    classes: ValueClasses,
}

impl ClassPartition {
    pub fn params(&self) -> &SequenceParams {
        &self.params
    }

    pub fn range(&self) -> &SeedRange {
        &self.range
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    pub fn resolutions(&self) -> &BTreeMap<BigInt, SeedResolution> {
        &self.resolutions
    }

    pub fn unresolved(&self) -> impl Iterator<Item = (&BigInt, &Unresolved)> {
        self.resolutions.iter().filter_map(|(s, r)| match r {
            SeedResolution::Unresolved(u) => Some((s, u)),
            SeedResolution::InCycle(_) => None,
        })
    }

    pub fn classes_mut(&mut self) -> &mut ValueClasses {
        &mut self.classes
    }

    /// Cycle index of any visited value, resolved through the union-find.
    pub fn classify_value(&mut self, v: &BigInt) -> Option<usize> {
        if !self.classes.contains(v) {
            return None;
        }
        let cycle_heads: Vec<BigInt> = self
            .cycles
            .iter()
            .map(|c| c.members()[0].clone())
            .collect();
        for (i, head) in cycle_heads.iter().enumerate() {
            if self.classes.same_class(v, head) == Some(true) {
                return Some(i);
            }
        }
        None
    }
}

/// Number of distinct certified cycles: a sound lower bound on the number of
/// equivalence classes, with the cycles themselves as witnesses. Unresolved
/// seeds never contribute.
pub fn class_lower_bound(partition: &ClassPartition) -> (usize, &[Cycle]) {
    (partition.cycles.len(), partition.cycles())
}

struct ShardOutcome {
    cycles: Vec<Cycle>,
    resolutions: Vec<(BigInt, ShardResolution)>,
    classes: ValueClasses,
}

enum ShardResolution {
    InCycle(usize),
    Unresolved(Unresolved),
}

/// Resolves every seed in `range`, sharded over `jobs` workers. Seeds whose
/// walk reaches an already-classified value inherit that value's class; a
/// memo hit is only trusted when it provably fits the remaining step budget,
/// otherwise the seed is re-run standalone, so the per-seed outcome is
/// identical to a standalone [`orbit`] call and independent of sharding.
pub fn census(
    params: &SequenceParams,
    range: &SeedRange,
    budget: &Budget,
    jobs: usize,
) -> Result<ClassPartition, DynamicsError> {
    range.validate(params.domain())?;
    let jobs = jobs.max(1);
    let shards = shard_ranges(range, jobs);

    let outcomes: Vec<ShardOutcome> = if shards.len() == 1 {
        vec![census_shard(params, &shards[0], budget)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .iter()
                .map(|shard| scope.spawn(move || census_shard(params, shard, budget)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("census shard panicked")).collect()
        })
    };

    // Canonical merge: cycles sorted by member list, seed maps are disjoint,
    // union-find merges commute.
    let mut registry: BTreeMap<Cycle, usize> = BTreeMap::new();
    for outcome in &outcomes {
        for cycle in &outcome.cycles {
            let next = registry.len();
            registry.entry(cycle.clone()).or_insert(next);
        }
    }
    let cycles: Vec<Cycle> = registry.keys().cloned().collect();
    let index_of: BTreeMap<Cycle, usize> = cycles
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();

    let mut resolutions = BTreeMap::new();
    let mut classes = ValueClasses::default();
    for outcome in outcomes {
        for (seed, res) in outcome.resolutions {
            let mapped = match res {
                ShardResolution::InCycle(local) => {
                    SeedResolution::InCycle(index_of[&outcome.cycles[local]])
                }
                ShardResolution::Unresolved(u) => SeedResolution::Unresolved(u),
            };
            resolutions.insert(seed, mapped);
        }
        classes.absorb(outcome.classes);
    }

    Ok(ClassPartition {
        params: params.clone(),
        range: range.clone(),
        cycles,
        resolutions,
        classes,
    })
}

fn shard_ranges(range: &SeedRange, jobs: usize) -> Vec<SeedRange> {
    let total = (&range.end - &range.start) + 1;
    let jobs = BigInt::from(jobs.max(1));
    let per = { (&total + &jobs - 1) / &jobs };
    let mut out = Vec::new();
    let mut lo = range.start.clone();
    while lo <= range.end {
        let hi = std::cmp::min(&lo + &per - 1, range.end.clone());
        out.push(SeedRange {
            start: lo.clone(),
            end: hi.clone(),
        });
        lo = hi + 1;
    }
    out
}

fn census_shard(params: &SequenceParams, range: &SeedRange, budget: &Budget) -> ShardOutcome {
    let mut classes = ValueClasses::default();
    // memo[id] = (cycle index + 1, steps-to-resolution upper bound); 0 = none
    let mut memo_cycle: Vec<u32> = Vec::new();
    let mut memo_dist: Vec<u64> = Vec::new();
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut cycle_index: HashMap<Vec<BigInt>, usize> = HashMap::new();
    let mut resolutions = Vec::new();

    let mut seed = range.start.clone();
    while seed <= range.end {
        if params.domain().contains(&seed) {
            let res = resolve_seed(
                &seed,
                params,
                budget,
                &mut classes,
                &mut memo_cycle,
                &mut memo_dist,
                &mut cycles,
                &mut cycle_index,
            );
            resolutions.push((seed.clone(), res));
        }
        seed += 1;
    }

    ShardOutcome {
        cycles,
        resolutions,
        classes,
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_seed(
    seed: &BigInt,
    params: &SequenceParams,
    budget: &Budget,
    classes: &mut ValueClasses,
    memo_cycle: &mut Vec<u32>,
    memo_dist: &mut Vec<u64>,
    cycles: &mut Vec<Cycle>,
    cycle_index: &mut HashMap<Vec<BigInt>, usize>,
) -> ShardResolution {
    let mut use_memo = true;
    loop {
        let mut path_ids: Vec<u32> = Vec::new();
        let mut path_pos: HashMap<u32, usize> = HashMap::new();
        let sid = classes.intern(seed);
        grow_memo(memo_cycle, memo_dist, classes.len());
        path_ids.push(sid);
        path_pos.insert(sid, 0);
        let mut steps = 0u64;

        let outcome = loop {
            let cur = *path_ids.last().expect("path never empty");
            if use_memo && memo_cycle[cur as usize] != 0 {
                let cyc = (memo_cycle[cur as usize] - 1) as usize;
                let dist = memo_dist[cur as usize];
                if steps.saturating_add(dist) <= budget.max_steps {
                    // every path value resolves to the same cycle
                    for (i, &vid) in path_ids.iter().enumerate() {
                        set_memo(memo_cycle, memo_dist, vid, cyc, steps - i as u64 + dist);
                    }
                    break Some(ShardResolution::InCycle(cyc));
                }
                // The memo bound does not fit the remaining budget; re-run
                // this seed standalone so the answer matches a plain orbit.
                break None;
            }
            if steps == budget.max_steps {
                break Some(ShardResolution::Unresolved(Unresolved::BudgetExceeded(
                    budget.max_steps,
                )));
            }
            let cur_value = classes.values[cur as usize].clone();
            let next = match step(&cur_value, params) {
                Ok(v) => v,
                Err(_) => {
                    break Some(ShardResolution::Unresolved(Unresolved::DomainViolation(
                        path_ids.len() - 1,
                    )))
                }
            };
            if next.abs() > budget.max_magnitude {
                break Some(ShardResolution::Unresolved(Unresolved::MagnitudeExceeded(
                    next,
                )));
            }
            steps += 1;
            let nid = classes.intern(&next);
            grow_memo(memo_cycle, memo_dist, classes.len());
            classes.union(cur, nid);
            if let Some(&entry) = path_pos.get(&nid) {
                // cycle closed inside this walk
                let raw: Vec<BigInt> = path_ids[entry..]
                    .iter()
                    .map(|&i| classes.values[i as usize].clone())
                    .collect();
                let cycle = Cycle::from_rotation(raw);
                let cyc = *cycle_index
                    .entry(cycle.members().to_vec())
                    .or_insert_with(|| {
                        cycles.push(cycle.clone());
                        cycles.len() - 1
                    });
                let closed_at = steps; // steps used to close the loop
                let cycle_len = (path_ids.len() - entry) as u64;
                for (i, &vid) in path_ids.iter().enumerate() {
                    let dist = if i <= entry {
                        closed_at - i as u64
                    } else {
                        cycle_len
                    };
                    set_memo(memo_cycle, memo_dist, vid, cyc, dist);
                }
                break Some(ShardResolution::InCycle(cyc));
            }
            path_pos.insert(nid, path_ids.len());
            path_ids.push(nid);
        };

        match outcome {
            Some(res) => return res,
            None => {
                debug_assert!(use_memo, "standalone fallback must terminate");
                use_memo = false;
            }
        }
    }
}

fn grow_memo(memo_cycle: &mut Vec<u32>, memo_dist: &mut Vec<u64>, len: usize) {
    if memo_cycle.len() < len {
        memo_cycle.resize(len, 0);
        memo_dist.resize(len, 0);
    }
}

fn set_memo(memo_cycle: &mut [u32], memo_dist: &mut [u64], id: u32, cycle: usize, dist: u64) {
    if memo_cycle[id as usize] == 0 {
        memo_cycle[id as usize] = cycle as u32 + 1;
        memo_dist[id as usize] = dist;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    fn params(p: i64, q: i64, domain: DomainSpec) -> SequenceParams {
        SequenceParams::new(big(p), big(q), domain).unwrap()
    }

    fn range(a: i64, b: i64) -> SeedRange {
        SeedRange::new(big(a), big(b)).unwrap()
    }

    /// Independent direct-iteration oracle over machine integers.
    fn oracle_orbit(seed: i128, p: i128, q: i128, max_steps: u64) -> Option<Vec<i128>> {
        let mut path = vec![seed];
        for _ in 0..max_steps {
            let c = *path.last().unwrap();
            let next = if c % q == 0 { c / q } else { p * c + 1 };
            if let Some(at) = path.iter().position(|&v| v == next) {
                let mut cycle = path[at..].to_vec();
                let min_at = cycle
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, v)| **v)
                    .map(|(i, _)| i)
                    .unwrap();
                cycle.rotate_left(min_at);
                return Some(cycle);
            }
            path.push(next);
        }
        None
    }

    #[test]
    fn step_examples() {
        let pos = params(3, 2, DomainSpec::PositiveIntegers);
        assert_eq!(step(&big(1), &pos).unwrap(), big(4));
        assert_eq!(step(&big(6), &pos).unwrap(), big(3));

        let nz = params(3, 2, DomainSpec::NonzeroIntegers);
        assert_eq!(step(&big(-5), &nz).unwrap(), big(-14));

        let unusual =
            SequenceParams::with_options(big(1), big(2), DomainSpec::NonzeroIntegers, true).unwrap();
        assert!(matches!(
            step(&big(-1), &unusual),
            Err(DynamicsError::OutsideDomain(..))
        ));
    }

    #[test]
    fn negative_q_divides_by_magnitude() {
        let nz =
            SequenceParams::new(big(3), big(-2), DomainSpec::NonzeroIntegers).unwrap();
        assert_eq!(step(&big(6), &nz).unwrap(), big(-3));
        assert_eq!(step(&big(5), &nz).unwrap(), big(16));
    }

    #[test]
    fn parameter_guards() {
        assert!(SequenceParams::new(big(3), big(1), DomainSpec::PositiveIntegers).is_err());
        assert!(SequenceParams::new(big(3), big(-2), DomainSpec::PositiveIntegers).is_err());
        assert!(SequenceParams::new(big(-3), big(2), DomainSpec::NonzeroIntegers).is_err());
        assert!(SequenceParams::with_options(
            big(-3),
            big(2),
            DomainSpec::NonzeroIntegers,
            true
        )
        .is_ok());
    }

    #[test]
    fn orbit_reaches_the_unit_cycle() {
        let p = params(3, 2, DomainSpec::PositiveIntegers);
        let r = orbit(big(1), &p, &Budget::default());
        match &r.status {
            OrbitStatus::ReachedCycle(c) => {
                assert_eq!(c.members(), &[big(1), big(4), big(2)]);
                assert_eq!(
                    oracle_orbit(1, 3, 2, 100).unwrap(),
                    vec![1i128, 4, 2],
                );
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn orbit_canonicalizes_negative_cycle_from_minimum() {
        let p = params(3, 2, DomainSpec::NonzeroIntegers);
        let r = orbit(big(-5), &p, &Budget::default());
        match &r.status {
            OrbitStatus::ReachedCycle(c) => {
                let expected = vec![big(-20), big(-10), big(-5), big(-14), big(-7)];
                assert_eq!(c.members(), expected.as_slice());
                let oracle: Vec<BigInt> = oracle_orbit(-5, 3, 2, 100)
                    .unwrap()
                    .into_iter()
                    .map(BigInt::from)
                    .collect();
                assert_eq!(c.members(), oracle.as_slice());
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn orbit_budget_exhaustion() {
        let p = params(5, 2, DomainSpec::PositiveIntegers);
        let budget = Budget {
            max_steps: 10,
            ..Budget::default()
        };
        let r = orbit(big(7), &p, &budget);
        assert_eq!(r.status, OrbitStatus::BudgetExceeded(10));
        assert!(oracle_orbit(7, 5, 2, 10).is_none());
        assert_eq!(r.path.len(), 11);
    }

    #[test]
    fn orbit_paths_are_step_chains() {
        let p = params(3, 2, DomainSpec::PositiveIntegers);
        for seed in [1i64, 7, 27, 97, 871] {
            let r = orbit(big(seed), &p, &Budget::default());
            for pair in r.path.windows(2) {
                assert_eq!(step(&pair[0], &p).unwrap(), pair[1]);
            }
        }
    }

    #[test]
    fn census_collatz_positive_has_one_class() {
        let p = params(3, 2, DomainSpec::PositiveIntegers);
        let part = census(&p, &range(1, 1000), &Budget::default(), 1).unwrap();
        assert_eq!(part.cycles().len(), 1);
        assert_eq!(part.cycles()[0].members(), &[big(1), big(4), big(2)]);
        assert_eq!(part.unresolved().count(), 0);
        assert_eq!(class_lower_bound(&part).0, 1);
    }

    #[test]
    fn census_nonzero_finds_four_cycles() {
        let p = params(3, 2, DomainSpec::NonzeroIntegers);
        let part = census(&p, &range(-300, 300), &Budget::default(), 1).unwrap();
        assert_eq!(part.cycles().len(), 4);
        assert_eq!(part.unresolved().count(), 0);
        let mins: Vec<BigInt> = part.cycles().iter().map(|c| c.members()[0].clone()).collect();
        assert_eq!(mins, vec![big(-272), big(-20), big(-2), big(1)]);
    }

    #[test]
    fn census_5x_plus_1_leaves_divergents_unresolved() {
        let p = params(5, 2, DomainSpec::PositiveIntegers);
        let budget = Budget {
            max_steps: 10_000,
            max_magnitude: BigInt::from(10u32).pow(18),
        };
        let part = census(&p, &range(1, 100), &budget, 1).unwrap();
        assert!(part.cycles().len() >= 3);
        assert!(part.unresolved().count() > 0);
        // the lower bound counts only certified cycles
        assert_eq!(class_lower_bound(&part).0, part.cycles().len());
    }

    #[test]
    fn census_agrees_with_standalone_orbits() {
        let p = params(3, 2, DomainSpec::PositiveIntegers);
        let budget = Budget::default();
        let part = census(&p, &range(1, 500), &budget, 1).unwrap();
        for (seed, res) in part.resolutions() {
            let standalone = orbit(seed.clone(), &p, &budget);
            match (res, standalone.status) {
                (SeedResolution::InCycle(i), OrbitStatus::ReachedCycle(c)) => {
                    assert_eq!(&part.cycles()[*i], &c);
                }
                (SeedResolution::Unresolved(_), OrbitStatus::ReachedCycle(_)) => {
                    panic!("census left {seed} unresolved but the orbit resolves")
                }
                _ => {}
            }
        }
    }

    #[test]
    fn census_is_shard_invariant() {
        let p = params(3, 2, DomainSpec::NonzeroIntegers);
        let base = census(&p, &range(-200, 200), &Budget::default(), 1).unwrap();
        for jobs in [2usize, 3, 8] {
            let sharded = census(&p, &range(-200, 200), &Budget::default(), jobs).unwrap();
            assert_eq!(base.cycles(), sharded.cycles());
            assert_eq!(base.resolutions(), sharded.resolutions());
        }
    }

    #[test]
    fn census_same_cycle_means_same_class() {
        let p = params(3, 2, DomainSpec::NonzeroIntegers);
        let mut part = census(&p, &range(-50, 50), &Budget::default(), 1).unwrap();
        let pairs: Vec<(BigInt, usize)> = part
            .resolutions()
            .iter()
            .filter_map(|(s, r)| match r {
                SeedResolution::InCycle(i) => Some((s.clone(), *i)),
                _ => None,
            })
            .collect();
        for (a, ca) in &pairs {
            for (b, cb) in &pairs {
                let same = part.classes_mut().same_class(a, b).unwrap();
                if ca == cb {
                    assert!(same, "{a} and {b} resolve to the same cycle");
                } else {
                    assert!(!same, "{a} and {b} resolve to different cycles");
                }
            }
        }
    }

    #[test]
    fn lower_bound_is_monotone_in_the_range() {
        let p = params(3, 2, DomainSpec::NonzeroIntegers);
        let mut prev = 0;
        for hi in [10i64, 50, 200, 400] {
            let part = census(&p, &range(-hi, hi), &Budget::default(), 1).unwrap();
            let (bound, _) = class_lower_bound(&part);
            assert!(bound >= prev);
            prev = bound;
        }
    }

    #[test]
    fn empty_partition_has_zero_lower_bound() {
        let p = params(5, 2, DomainSpec::PositiveIntegers);
        let budget = Budget {
            max_steps: 3,
            max_magnitude: BigInt::from(10u32).pow(18),
        };
        // seed 7 diverges past any cycle within 3 steps
        let part = census(&p, &range(7, 7), &budget, 1).unwrap();
        assert_eq!(class_lower_bound(&part).0, 0);
    }

    #[test]
    fn census_rejects_invalid_ranges() {
        let p = params(3, 2, DomainSpec::PositiveIntegers);
        assert!(census(&p, &range(-5, 5), &Budget::default(), 1).is_err());
        assert!(SeedRange::new(big(5), big(1)).is_err());
    }
}
