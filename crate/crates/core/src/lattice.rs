//! Integer relation lattices: Hermite-form bases with membership
//! certificates and Smith invariant factors for quotients.
//!
//! Rows live in the column space of a prime basis: when the basis carries a
//! sign slot, column 0 is the sign coordinate (an honest integer coordinate
//! here — the order-2 structure enters through an explicit `2*e_sign` row)
//! and prime index `i` maps to column `i + 1`; without a sign slot the
//! prime index is the column. All arithmetic is exact; a size guard aborts
//! rather than grind through entries beyond a million digits.

use crate::numth::ExponentVector;
use crate::serde_util::dec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Sparse integer vector keyed by column index; never stores zeros.
pub type SparseVec = BTreeMap<usize, BigInt>;

/// Entries beyond ~10^6 decimal digits abort the computation.
const MAX_ENTRY_BITS: u64 = 3_400_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("operands belong to different prime bases")]
    BasisMismatch,
    #[error("entry grew past the size guard ({0} bits)")]
    SizeGuard(u64),
    #[error("ambient rank {given} is smaller than the largest occupied column ({needed})")]
    AmbientTooSmall { needed: usize, given: usize },
}

/// Where a relation row came from; rows are recomputable from this record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationProvenance {
    /// The defining relation `q = 1`: row `vec(q)`.
    QIsOne,
    /// One map step from `source` through the multiply branch:
    /// row `vec(p*source + 1) - vec(source)`.
    OrbitStep {
        #[serde(with = "dec")]
        source: BigInt,
    },
    /// The order-2 sign generator: row `2*e_sign`.
    SignSquared,
    /// A declared relation `value = 1`: row `vec(value)`.
    ValueIsOne {
        #[serde(with = "dec")]
        value: BigInt,
    },
}

/// Relation rows over a shared prime basis, with one provenance record per
/// row.
#[derive(Debug, Clone)]
pub struct RelationMatrix {
    basis_id: u64,
    includes_sign: bool,
    columns: usize,
    rows: Vec<SparseVec>,
    provenance: Vec<RelationProvenance>,
}

impl RelationMatrix {
    pub fn new(basis: &crate::numth::PrimeBasis) -> Self {
        RelationMatrix {
            basis_id: basis.id(),
            includes_sign: basis.includes_sign(),
            columns: 0,
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn includes_sign(&self) -> bool {
        self.includes_sign
    }

    /// Highest occupied column + 1.
    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn provenance(&self) -> &[RelationProvenance] {
        &self.provenance
    }

    /// Converts an exponent vector into this matrix's column space.
    pub fn column_vector(&self, v: &ExponentVector) -> Result<SparseVec, LatticeError> {
        if v.basis_id() != self.basis_id {
            return Err(LatticeError::BasisMismatch);
        }
        Ok(to_columns(v, self.includes_sign))
    }

    pub fn push(&mut self, row: &ExponentVector, provenance: RelationProvenance) -> Result<(), LatticeError> {
        let cols = self.column_vector(row)?;
        self.push_raw(cols, provenance);
        Ok(())
    }

    /// The implicit order-2 relation on the sign slot, `2*e_sign`.
    pub fn push_sign_row(&mut self) {
        debug_assert!(self.includes_sign, "sign row needs a sign slot");
        let mut row = SparseVec::new();
        row.insert(0, BigInt::from(2));
        self.push_raw(row, RelationProvenance::SignSquared);
    }

    fn push_raw(&mut self, row: SparseVec, provenance: RelationProvenance) {
        if let Some((&max, _)) = row.iter().next_back() {
            self.columns = self.columns.max(max + 1);
        }
        self.rows.push(row);
        self.provenance.push(provenance);
    }
}

fn to_columns(v: &ExponentVector, includes_sign: bool) -> SparseVec {
    let offset = usize::from(includes_sign);
    let mut out = SparseVec::new();
    if includes_sign && v.sign_exponent() == 1 {
        out.insert(0, BigInt::one());
    }
    for (&i, e) in v.entries() {
        out.insert(i + offset, e.clone());
    }
    out
}

fn add_scaled(dst: &mut SparseVec, src: &SparseVec, k: &BigInt) -> Result<(), LatticeError> {
    if k.is_zero() {
        return Ok(());
    }
    for (&j, v) in src {
        let slot = dst.entry(j).or_insert_with(BigInt::zero);
        *slot += k * v;
        if slot.is_zero() {
            dst.remove(&j);
        } else if slot.bits() > MAX_ENTRY_BITS {
            return Err(LatticeError::SizeGuard(slot.bits()));
        }
    }
    Ok(())
}

fn negate(v: &mut SparseVec) {
    for e in v.values_mut() {
        *e = -std::mem::take(e);
    }
}

/// One reduced row: the vector plus its expression as an integer
/// combination of the original input rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnfRow {
    pub vec: SparseVec,
    pub comb: BTreeMap<usize, BigInt>,
}

/// Row-style Hermite normal form: pivots positive and strictly increasing
/// by column, entries above each pivot reduced into `[0, pivot)`. The row
/// list is canonical for the span; the combination trail depends on the
/// input order.
#[derive(Debug, Clone)]
pub struct HNFBasis {
    basis_id: u64,
    includes_sign: bool,
    n_original: usize,
    rows: Vec<HnfRow>,
}

impl HNFBasis {
    pub fn rows(&self) -> &[HnfRow] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn n_original(&self) -> usize {
        self.n_original
    }

    /// Pivot column of each row, ascending.
    pub fn pivot_columns(&self) -> Vec<usize> {
        self.rows.iter().map(|r| *r.vec.keys().next().expect("no zero rows")).collect()
    }

    /// The reduced vectors alone, for span comparisons.
    pub fn row_vectors(&self) -> Vec<SparseVec> {
        self.rows.iter().map(|r| r.vec.clone()).collect()
    }
}

/// Hermite normal form of the row span, with a combination trail expressing
/// every reduced row in terms of the input rows.
pub fn hnf(matrix: &RelationMatrix) -> Result<HNFBasis, LatticeError> {
    let tracked: Vec<(SparseVec, BTreeMap<usize, BigInt>)> = matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut comb = BTreeMap::new();
            comb.insert(i, BigInt::one());
            (row.clone(), comb)
        })
        .collect();
    let rows = echelonize(tracked)?;
    Ok(HNFBasis {
        basis_id: matrix.basis_id,
        includes_sign: matrix.includes_sign,
        n_original: matrix.len(),
        rows,
    })
}

type Tracked = (SparseVec, BTreeMap<usize, BigInt>);

fn echelonize(input: Vec<Tracked>) -> Result<Vec<HnfRow>, LatticeError> {
    // pivot column -> row slot
    let mut pivots: BTreeMap<usize, Tracked> = BTreeMap::new();

    for (mut vec, mut comb) in input {
        loop {
            let Some((&col, _)) = vec.iter().next() else {
                break; // reduced to zero: dependent row
            };
            match pivots.remove(&col) {
                None => {
                    if vec[&col].is_negative() {
                        negate(&mut vec);
                        for c in comb.values_mut() {
                            *c = -std::mem::take(c);
                        }
                    }
                    pivots.insert(col, (vec, comb));
                    break;
                }
                Some((bvec, bcomb)) => {
                    let a = bvec[&col].clone();
                    let b = vec[&col].clone();
                    if (&b % &a).is_zero() {
                        let k = -(&b / &a);
                        add_scaled(&mut vec, &bvec, &k)?;
                        add_scaled_map(&mut comb, &bcomb, &k)?;
                        pivots.insert(col, (bvec, bcomb));
                    } else {
                        // replace the pivot with the gcd combination and
                        // push the complementary row back through the loop
                        let (g, u, w) = extended_gcd(&a, &b);
                        let mut new_vec = SparseVec::new();
                        add_scaled(&mut new_vec, &bvec, &u)?;
                        add_scaled(&mut new_vec, &vec, &w)?;
                        let mut new_comb = BTreeMap::new();
                        add_scaled_map(&mut new_comb, &bcomb, &u)?;
                        add_scaled_map(&mut new_comb, &comb, &w)?;

                        let ka = &a / &g;
                        let kb = -(&b / &g);
                        let mut rest_vec = SparseVec::new();
                        add_scaled(&mut rest_vec, &vec, &ka)?;
                        add_scaled(&mut rest_vec, &bvec, &kb)?;
                        let mut rest_comb = BTreeMap::new();
                        add_scaled_map(&mut rest_comb, &comb, &ka)?;
                        add_scaled_map(&mut rest_comb, &bcomb, &kb)?;

                        pivots.insert(col, (new_vec, new_comb));
                        vec = rest_vec;
                        comb = rest_comb;
                    }
                }
            }
        }
    }

    // full reduction: entries above each pivot into [0, pivot)
    let order: Vec<usize> = pivots.keys().copied().collect();
    let mut rows: Vec<Tracked> = order.iter().map(|c| pivots.remove(c).expect("pivot")).collect();
    for r in 0..rows.len() {
        let col = order[r];
        let (pivot_vec, pivot_comb) = (rows[r].0.clone(), rows[r].1.clone());
        let pivot = pivot_vec[&col].clone();
        for s in 0..r {
            let entry = match rows[s].0.get(&col) {
                Some(e) => e.clone(),
                None => continue,
            };
            let k = -entry.div_floor(&pivot);
            if k.is_zero() {
                continue;
            }
            add_scaled(&mut rows[s].0, &pivot_vec, &k)?;
            add_scaled_map(&mut rows[s].1, &pivot_comb, &k)?;
        }
    }

    Ok(rows
        .into_iter()
        .map(|(vec, comb)| HnfRow { vec, comb })
        .collect())
}

fn add_scaled_map(
    dst: &mut BTreeMap<usize, BigInt>,
    src: &BTreeMap<usize, BigInt>,
    k: &BigInt,
) -> Result<(), LatticeError> {
    if k.is_zero() {
        return Ok(());
    }
    for (&j, v) in src {
        let slot = dst.entry(j).or_insert_with(BigInt::zero);
        *slot += k * v;
        if slot.is_zero() {
            dst.remove(&j);
        } else if slot.bits() > MAX_ENTRY_BITS {
            return Err(LatticeError::SizeGuard(slot.bits()));
        }
    }
    Ok(())
}

/// `(g, u, w)` with `g = gcd(a, b) > 0` and `u*a + w*b = g`.
fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    (e.gcd, e.x, e.y)
}

/// Integer coefficients over the original relation rows whose combination
/// equals the target vector exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    #[serde(with = "crate::serde_util::dec_pairs")]
    pub coefficients: Vec<(usize, BigInt)>,
    #[serde(with = "crate::serde_util::sparse")]
    pub target: SparseVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Membership {
    Yes(MembershipCertificate),
    No,
}

impl Membership {
    pub fn is_yes(&self) -> bool {
        matches!(self, Membership::Yes(_))
    }
}

/// Exact membership of `v` in the integer row span. `Yes` carries a
/// certificate over the original rows; `No` is exact for this lattice —
/// callers working with truncated harvests must read it as "not derivable
/// from these relations".
pub fn membership(v: &ExponentVector, basis: &HNFBasis) -> Result<Membership, LatticeError> {
    if v.basis_id() != basis.basis_id {
        return Err(LatticeError::BasisMismatch);
    }
    let target = to_columns(v, basis.includes_sign);
    membership_columns(&target, basis)
}

/// Column-space variant of [`membership`].
pub fn membership_columns(target: &SparseVec, basis: &HNFBasis) -> Result<Membership, LatticeError> {
    let mut remainder = target.clone();
    let mut comb: BTreeMap<usize, BigInt> = BTreeMap::new();
    let by_pivot: BTreeMap<usize, &HnfRow> = basis
        .rows
        .iter()
        .map(|r| (*r.vec.keys().next().expect("no zero rows"), r))
        .collect();
    while let Some((&col, entry)) = remainder.iter().next() {
        let Some(row) = by_pivot.get(&col) else {
            return Ok(Membership::No);
        };
        let pivot = &row.vec[&col];
        let (k, rem) = entry.div_rem(pivot);
        if !rem.is_zero() {
            return Ok(Membership::No);
        }
        let neg = -k.clone();
        add_scaled(&mut remainder, &row.vec, &neg)?;
        add_scaled_map(&mut comb, &row.comb, &k)?;
    }
    Ok(Membership::Yes(MembershipCertificate {
        coefficients: comb.into_iter().collect(),
        target: target.clone(),
    }))
}

/// Expands the certificate against the original rows and compares with the
/// recorded target, exactly.
pub fn verify_certificate(cert: &MembershipCertificate, matrix: &RelationMatrix) -> bool {
    let mut sum = SparseVec::new();
    for (i, k) in &cert.coefficients {
        let Some(row) = matrix.rows.get(*i) else {
            return false;
        };
        if add_scaled(&mut sum, row, k).is_err() {
            return false;
        }
    }
    sum == cert.target
}

/// Order of the quotient of the ambient free group by the row span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupOrder {
    Finite {
        #[serde(with = "dec")]
        order: BigInt,
    },
    Infinite,
}

/// Invariant-factor description of `Z^ambient / rowspan`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub ambient_rank: usize,
    #[serde(with = "crate::serde_util::dec_vec")]
    pub invariant_factors: Vec<BigInt>,
    pub free_rank: usize,
    pub order: GroupOrder,
}

/// Smith invariant factors of the quotient by the row span. The factors
/// satisfy the divisibility chain; the order is finite exactly when the
/// free rank is zero.
pub fn snf_quotient(matrix: &RelationMatrix, ambient_rank: usize) -> Result<QuotientReport, LatticeError> {
    snf_quotient_rows(&matrix.rows, ambient_rank)
}

/// Row-level entry point used for filtered and ad-hoc reports.
pub fn snf_quotient_rows(rows: &[SparseVec], ambient_rank: usize) -> Result<QuotientReport, LatticeError> {
    let needed = rows
        .iter()
        .filter_map(|r| r.keys().next_back().map(|&c| c + 1))
        .max()
        .unwrap_or(0);
    if ambient_rank < needed {
        return Err(LatticeError::AmbientTooSmall {
            needed,
            given: ambient_rank,
        });
    }

    // Echelonize first: unit pivot rows whose pivot column is otherwise
    // untouched split off as factor-1 coordinates, leaving a small dense
    // core for the Smith reduction.
    let tracked: Vec<Tracked> = rows.iter().map(|r| (r.clone(), BTreeMap::new())).collect();
    let reduced = echelonize(tracked)?;

    let mut unit_count = 0usize;
    let mut core: Vec<&SparseVec> = Vec::new();
    for row in &reduced {
        let pivot = row.vec.values().next().expect("no zero rows");
        if pivot.is_one() && row.vec.len() == 1 {
            unit_count += 1;
        } else {
            core.push(&row.vec);
        }
    }

    let mut core_cols: Vec<usize> = core
        .iter()
        .flat_map(|r| r.keys().copied())
        .collect();
    core_cols.sort_unstable();
    core_cols.dedup();
    let col_slot: BTreeMap<usize, usize> = core_cols.iter().enumerate().map(|(s, &c)| (c, s)).collect();

    let dense: Vec<Vec<BigInt>> = core
        .iter()
        .map(|r| {
            let mut row = vec![BigInt::zero(); core_cols.len()];
            for (c, v) in r.iter() {
                row[col_slot[c]] = v.clone();
            }
            row
        })
        .collect();

    let diag = snf_diagonal(dense)?;
    debug_assert_eq!(diag.len(), core.len(), "echelon rows are independent");

    let mut invariant_factors = vec![BigInt::one(); unit_count];
    invariant_factors.extend(diag);
    let rank = invariant_factors.len();
    let free_rank = ambient_rank - rank;
    let order = if free_rank == 0 {
        let mut product = BigInt::one();
        for f in &invariant_factors {
            product *= f;
        }
        GroupOrder::Finite { order: product }
    } else {
        GroupOrder::Infinite
    };
    debug_assert!(invariant_factors
        .windows(2)
        .all(|w| (&w[1] % &w[0]).is_zero()));
    Ok(QuotientReport {
        ambient_rank,
        invariant_factors,
        free_rank,
        order,
    })
}

/// Dense Smith reduction; returns the nonzero diagonal, ascending under
/// divisibility.
fn snf_diagonal(mut a: Vec<Vec<BigInt>>) -> Result<Vec<BigInt>, LatticeError> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut k = 0;
    while k < rows.min(cols) {
        // smallest nonzero entry of the trailing submatrix becomes the pivot
        let mut best: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if a[i][j].is_zero() {
                    continue;
                }
                if best
                    .map(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                    .unwrap_or(true)
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        a.swap(k, bi);
        for row in a.iter_mut() {
            row.swap(k, bj);
        }

        'reduce: loop {
            for i in k + 1..rows {
                if a[i][k].is_zero() {
                    continue;
                }
                let q = &a[i][k] / &a[k][k];
                for j in k..cols {
                    let delta = &q * &a[k][j];
                    a[i][j] -= delta;
                    if a[i][j].bits() > MAX_ENTRY_BITS {
                        return Err(LatticeError::SizeGuard(a[i][j].bits()));
                    }
                }
                if !a[i][k].is_zero() {
                    a.swap(k, i); // strictly smaller pivot
                    continue 'reduce;
                }
            }
            for j in k + 1..cols {
                if a[k][j].is_zero() {
                    continue;
                }
                let q = &a[k][j] / &a[k][k];
                for i in k..rows {
                    let delta = &q * &a[i][k];
                    a[i][j] -= delta;
                    if a[i][j].bits() > MAX_ENTRY_BITS {
                        return Err(LatticeError::SizeGuard(a[i][j].bits()));
                    }
                }
                if !a[k][j].is_zero() {
                    for row in a.iter_mut() {
                        row.swap(k, j);
                    }
                    continue 'reduce;
                }
            }
            // pivot now isolated; pull in any entry it does not divide
            let mut fixed = true;
            'scan: for i in k + 1..rows {
                for j in k + 1..cols {
                    if !(&a[i][j] % &a[k][k]).is_zero() {
                        for col in k..cols {
                            let add = a[i][col].clone();
                            a[k][col] += add;
                        }
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if fixed {
                break;
            }
        }

        if a[k][k].is_negative() {
            for j in k..cols {
                a[k][j] = -std::mem::take(&mut a[k][j]);
            }
        }
        k += 1;
    }

    Ok((0..k).map(|i| a[i][i].clone()).collect())
}
