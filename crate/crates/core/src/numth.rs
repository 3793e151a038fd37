//! Exact integer arithmetic, prime discovery, and the exponent-vector
//! representation of the free abelian group over the primes.
//!
//! A nonzero integer (or rational) is written multiplicatively as
//! `(-1)^s * prod(p_i^e_i)` over a [`PrimeBasis`]. The basis is append-only:
//! indices handed out once stay valid for the lifetime of the basis, so
//! relation vectors harvested early remain meaningful as new primes are
//! discovered. The optional sign slot models `-1` as an order-2 generator;
//! exponent vectors keep it reduced mod 2.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use thiserror::Error;

/// Trial-division cutoff used after the basis primes have been tried.
const SMALL_PRIME_BOUND: u64 = 1_000_000;

/// Iteration cap for the rho splitter; factoring stalls (instead of hanging)
/// on adversarial semiprimes far above the magnitudes orbits produce.
const RHO_ITERATION_CAP: u64 = 20_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum NumthError {
    #[error("zero is not an element of the multiplicative domain")]
    ZeroInput,
    #[error("negative value requires a basis with a sign slot")]
    NegativeWithoutSign,
    #[error("cofactor {0} has prime factors outside the basis")]
    BasisExceeded(BigInt),
    #[error("operands belong to different prime bases")]
    BasisMismatch,
    #[error("factorization stalled on cofactor {0}")]
    FactorizationStalled(BigInt),
    #[error("exponent too large to materialize a rational")]
    ExponentTooLarge,
}

/// Primes up to `bound`, ascending. Plain sieve of Eratosthenes.
pub fn sieve_primes(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if composite[p] {
            continue;
        }
        primes.push(p as u64);
        let mut m = p * p;
        while m <= n {
            composite[m] = true;
            m += p;
        }
    }
    primes
}

fn small_primes() -> &'static [u64] {
    static SMALL: OnceLock<Vec<u64>> = OnceLock::new();
    SMALL.get_or_init(|| sieve_primes(SMALL_PRIME_BOUND))
}

static NEXT_BASIS_ID: AtomicU64 = AtomicU64::new(1);

/// An append-only sequence of primes plus an optional order-2 sign slot.
///
/// Indices are stable identifiers: extending the basis never renumbers
/// existing entries. Bases built from a complete prime set (the harvest
/// path) come out sorted ascending; incremental extension appends at the
/// end regardless of magnitude. Clones keep the identity token, so only
/// one copy may keep extending if vectors are to stay exchangeable.
#[derive(Debug, Clone)]
pub struct PrimeBasis {
    id: u64,
    includes_sign: bool,
    primes: Vec<BigInt>,
    index: HashMap<BigInt, usize>,
}

impl PrimeBasis {
    pub fn new(includes_sign: bool) -> Self {
        PrimeBasis {
            id: NEXT_BASIS_ID.fetch_add(1, Ordering::Relaxed),
            includes_sign,
            primes: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a basis from a set of primes, sorted ascending and deduplicated.
    pub fn from_primes(includes_sign: bool, primes: impl IntoIterator<Item = BigInt>) -> Self {
        let mut basis = PrimeBasis::new(includes_sign);
        let mut sorted: Vec<BigInt> = primes.into_iter().collect();
        sorted.sort();
        sorted.dedup();
        for p in sorted {
            basis.ensure(p);
        }
        basis
    }

    /// Identity token; vectors remember which basis indexed them.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn includes_sign(&self) -> bool {
        self.includes_sign
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn prime(&self, index: usize) -> &BigInt {
        &self.primes[index]
    }

    pub fn primes(&self) -> &[BigInt] {
        &self.primes
    }

    pub fn index_of(&self, prime: &BigInt) -> Option<usize> {
        self.index.get(prime).copied()
    }

    /// Index of `prime`, appending it if absent. Requires exclusive access;
    /// reads may be shared freely.
    pub fn ensure(&mut self, prime: BigInt) -> usize {
        if let Some(&i) = self.index.get(&prime) {
            return i;
        }
        debug_assert!(is_probable_prime(&prime), "basis entry {prime} must be prime");
        let i = self.primes.len();
        self.index.insert(prime.clone(), i);
        self.primes.push(prime);
        i
    }
}

/// Element of the free abelian group over a [`PrimeBasis`]: a sign exponent
/// (mod 2, present only when the basis has a sign slot) and finitely many
/// nonzero integer exponents keyed by basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentVector {
    basis_id: u64,
    sign_exponent: u8,
    entries: BTreeMap<usize, BigInt>,
}

impl ExponentVector {
    pub fn identity(basis: &PrimeBasis) -> Self {
        ExponentVector {
            basis_id: basis.id(),
            sign_exponent: 0,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a vector from raw parts; zero exponents are stripped and the
    /// sign exponent is reduced mod 2 (and forced to 0 without a sign slot).
    pub fn from_parts(
        basis: &PrimeBasis,
        sign_exponent: u8,
        entries: impl IntoIterator<Item = (usize, BigInt)>,
    ) -> Self {
        let mut map = BTreeMap::new();
        for (i, e) in entries {
            debug_assert!(i < basis.len(), "index {i} outside basis");
            if !e.is_zero() {
                map.insert(i, e);
            }
        }
        ExponentVector {
            basis_id: basis.id(),
            sign_exponent: if basis.includes_sign() { sign_exponent % 2 } else { 0 },
            entries: map,
        }
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn sign_exponent(&self) -> u8 {
        self.sign_exponent
    }

    pub fn entries(&self) -> &BTreeMap<usize, BigInt> {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.sign_exponent == 0 && self.entries.is_empty()
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(sign={}, {{", self.sign_exponent)?;
        for (n, (i, e)) in self.entries.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "#{i}:{e}")?;
        }
        write!(f, "}})")
    }
}

/// Componentwise sum; sign exponents add mod 2.
pub fn vec_add(a: &ExponentVector, b: &ExponentVector) -> Result<ExponentVector, NumthError> {
    combine(a, b, false)
}

/// Componentwise difference; sign exponents add mod 2 (sign is self-inverse).
pub fn vec_sub(a: &ExponentVector, b: &ExponentVector) -> Result<ExponentVector, NumthError> {
    combine(a, b, true)
}

fn combine(a: &ExponentVector, b: &ExponentVector, subtract: bool) -> Result<ExponentVector, NumthError> {
    if a.basis_id != b.basis_id {
        return Err(NumthError::BasisMismatch);
    }
    let mut entries = a.entries.clone();
    for (&i, e) in &b.entries {
        let delta = if subtract { -e.clone() } else { e.clone() };
        let slot = entries.entry(i).or_insert_with(BigInt::zero);
        *slot += delta;
        if slot.is_zero() {
            entries.remove(&i);
        }
    }
    Ok(ExponentVector {
        basis_id: a.basis_id,
        sign_exponent: (a.sign_exponent + b.sign_exponent) % 2,
        entries,
    })
}

/// Basis-independent factorization of a nonzero integer: sign plus
/// multiplicities keyed by prime value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub negative: bool,
    pub factors: BTreeMap<BigInt, u64>,
}

impl Factorization {
    pub fn value(&self) -> BigInt {
        let mut v = BigInt::one();
        for (p, &e) in &self.factors {
            v *= p.pow(e as u32);
        }
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// Complete factorization of `n != 0`: trial division by the small-prime
/// table, then Brent's rho with a deterministic parameter schedule for any
/// remaining cofactor. The product of the returned factors is checked
/// against `n` before returning, so the splitting strategy cannot affect
/// soundness.
pub fn factor_value(n: &BigInt) -> Result<Factorization, NumthError> {
    if n.is_zero() {
        return Err(NumthError::ZeroInput);
    }
    let negative = n.is_negative();
    let mut m = n.abs();
    let mut factors: BTreeMap<BigInt, u64> = BTreeMap::new();

    for &p in small_primes() {
        let pb = BigInt::from(p);
        if (&pb * &pb) > m {
            break;
        }
        while (&m % &pb).is_zero() {
            m /= &pb;
            *factors.entry(pb.clone()).or_insert(0) += 1;
        }
        if m.is_one() {
            break;
        }
    }

    if !m.is_one() {
        let mut stack = vec![m];
        while let Some(c) = stack.pop() {
            if is_probable_prime(&c) {
                *factors.entry(c).or_insert(0) += 1;
            } else {
                let d = rho_split(&c).ok_or_else(|| NumthError::FactorizationStalled(c.clone()))?;
                stack.push(&c / &d);
                stack.push(d);
            }
        }
    }

    let result = Factorization { negative, factors };
    debug_assert_eq!(&result.value(), n, "factorization must reproduce its input");
    if &result.value() != n {
        return Err(NumthError::FactorizationStalled(n.clone()));
    }
    Ok(result)
}

/// Factors `n` into an [`ExponentVector`] over `basis`.
///
/// Basis primes are tried first; leftover cofactors go through
/// [`factor_value`]. With `allow_extend` the newly discovered primes are
/// appended to the basis (ascending among themselves); without it a leftover
/// cofactor is an error.
pub fn factor(n: &BigInt, basis: &mut PrimeBasis, allow_extend: bool) -> Result<ExponentVector, NumthError> {
    let (sign, known, cofactor) = divide_by_basis(n, basis)?;
    let mut entries = known;
    if !cofactor.is_one() {
        if !allow_extend {
            return Err(NumthError::BasisExceeded(cofactor));
        }
        let fresh = factor_value(&cofactor)?;
        for (p, e) in fresh.factors {
            let i = basis.ensure(p);
            *entries.entry(i).or_insert(0) += e;
        }
    }
    Ok(ExponentVector::from_parts(
        basis,
        sign,
        entries.into_iter().map(|(i, e)| (i, BigInt::from(e))),
    ))
}

/// Read-only variant of [`factor`]: fails with `BasisExceeded` when `n` has a
/// prime factor outside `basis`.
pub fn factor_in(n: &BigInt, basis: &PrimeBasis) -> Result<ExponentVector, NumthError> {
    let (sign, entries, cofactor) = divide_by_basis(n, basis)?;
    if !cofactor.is_one() {
        return Err(NumthError::BasisExceeded(cofactor));
    }
    Ok(ExponentVector::from_parts(
        basis,
        sign,
        entries.into_iter().map(|(i, e)| (i, BigInt::from(e))),
    ))
}

fn divide_by_basis(
    n: &BigInt,
    basis: &PrimeBasis,
) -> Result<(u8, BTreeMap<usize, u64>, BigInt), NumthError> {
    if n.is_zero() {
        return Err(NumthError::ZeroInput);
    }
    if n.is_negative() && !basis.includes_sign() {
        return Err(NumthError::NegativeWithoutSign);
    }
    let sign = u8::from(n.is_negative());
    let mut m = n.abs();
    let mut entries: BTreeMap<usize, u64> = BTreeMap::new();
    for (i, p) in basis.primes().iter().enumerate() {
        if m.is_one() {
            break;
        }
        while (&m % p).is_zero() {
            m /= p;
            *entries.entry(i).or_insert(0) += 1;
        }
    }
    Ok((sign, entries, m))
}

/// Evaluates a vector back to an exact rational `(numerator, denominator)`
/// with positive, coprime denominator. Inverse of [`factor`] on integers.
pub fn unfactor(v: &ExponentVector, basis: &PrimeBasis) -> Result<(BigInt, BigInt), NumthError> {
    if v.basis_id != basis.id() {
        return Err(NumthError::BasisMismatch);
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for (&i, e) in &v.entries {
        let exp = e.abs().to_u32().ok_or(NumthError::ExponentTooLarge)?;
        let power = basis.prime(i).pow(exp);
        if e.is_negative() {
            den *= power;
        } else {
            num *= power;
        }
    }
    if v.sign_exponent == 1 {
        num = -num;
    }
    Ok((num, den))
}

/// Miller–Rabin with a fixed base set: deterministic for inputs below
/// 3.3 * 10^24, overwhelming evidence beyond. Callers that need certainty
/// verify products by multiplication anyway.
pub fn is_probable_prime(n: &BigInt) -> bool {
    if n <= &BigInt::one() {
        return false;
    }
    const BASES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 61, 73];
    let two = BigInt::from(2);
    for &b in &BASES {
        if *n == BigInt::from(b) {
            return true;
        }
    }
    if (n % &two).is_zero() {
        return false;
    }
    let n_minus_1 = n - BigInt::one();
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'outer: for &b in &BASES {
        let base = BigInt::from(b);
        let mut x = base.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Brent-cycle Pollard rho; returns a nontrivial divisor of composite `n`,
/// or `None` if the iteration cap is exhausted.
fn rho_split(n: &BigInt) -> Option<BigInt> {
    let one = BigInt::one();
    let two = BigInt::from(2);
    if (n % &two).is_zero() {
        return Some(two);
    }
    let mut spent = 0u64;
    for c in 1u64..64 {
        let c = BigInt::from(c);
        let mut y = BigInt::from(2);
        let mut r: u64 = 1;
        let mut q = BigInt::one();
        let mut g = BigInt::one();
        let mut x = y.clone();
        let mut ys = y.clone();
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = (&y * &y + &c) % n;
            }
            let mut k = 0u64;
            while k < r && g.is_one() {
                ys = y.clone();
                let block = 128.min(r - k);
                for _ in 0..block {
                    y = (&y * &y + &c) % n;
                    q = (&q * (&x - &y).abs()) % n;
                }
                g = q.gcd(n);
                k += block;
                spent += block;
                if spent > RHO_ITERATION_CAP {
                    return None;
                }
            }
            r *= 2;
        }
        if &g == n {
            // backtrack one step at a time
            loop {
                ys = (&ys * &ys + &c) % n;
                g = (&x - &ys).abs().gcd(n);
                if g > one {
                    break;
                }
                spent += 1;
                if spent > RHO_ITERATION_CAP {
                    return None;
                }
            }
        }
        if &g != n && g > one {
            return Some(g);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn sieve_matches_textbook_values() {
        assert_eq!(sieve_primes(10), vec![2, 3, 5, 7]);
        assert_eq!(sieve_primes(1), Vec::<u64>::new());
        assert_eq!(sieve_primes(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(sieve_primes(2), vec![2]);
    }

    #[test]
    fn factor_twelve() {
        let mut basis = PrimeBasis::new(false);
        let v = factor(&big(12), &mut basis, true).unwrap();
        let entries: Vec<(BigInt, BigInt)> = v
            .entries()
            .iter()
            .map(|(&i, e)| (basis.prime(i).clone(), e.clone()))
            .collect();
        assert_eq!(entries, vec![(big(2), big(2)), (big(3), big(1))]);
        assert_eq!(v.sign_exponent(), 0);
    }

    #[test]
    fn factor_negative_eight_with_sign() {
        let mut basis = PrimeBasis::new(true);
        let v = factor(&big(-8), &mut basis, true).unwrap();
        assert_eq!(v.sign_exponent(), 1);
        assert_eq!(v.entries().len(), 1);
        let (&i, e) = v.entries().iter().next().unwrap();
        assert_eq!(basis.prime(i), &big(2));
        assert_eq!(e, &big(3));
    }

    #[test]
    fn factor_negative_without_sign_is_rejected() {
        let mut basis = PrimeBasis::new(false);
        assert_eq!(
            factor(&big(-6), &mut basis, true),
            Err(NumthError::NegativeWithoutSign)
        );
    }

    #[test]
    fn factor_without_extension_reports_leftover_cofactor() {
        let mut basis =
            PrimeBasis::from_primes(false, [big(2), big(3), big(5), big(7)]);
        assert_eq!(
            factor(&big(22), &mut basis, false),
            Err(NumthError::BasisExceeded(big(11)))
        );
    }

    #[test]
    fn factor_zero_is_rejected() {
        let mut basis = PrimeBasis::new(true);
        assert_eq!(factor(&big(0), &mut basis, true), Err(NumthError::ZeroInput));
    }

    #[test]
    fn vector_sum_and_difference() {
        let mut basis = PrimeBasis::new(false);
        let two = factor(&big(2), &mut basis, true).unwrap();
        let four = vec_add(&two, &two).unwrap();
        assert_eq!(unfactor(&four, &basis).unwrap(), (big(4), big(1)));

        let eight = factor(&big(8), &mut basis, true).unwrap();
        assert!(vec_sub(&eight, &eight).unwrap().is_identity());
    }

    #[test]
    fn sign_exponents_add_mod_two() {
        let mut basis = PrimeBasis::new(true);
        let a = factor(&big(-3), &mut basis, true).unwrap();
        let b = factor(&big(-2), &mut basis, true).unwrap();
        let sum = vec_add(&a, &b).unwrap();
        assert_eq!(sum.sign_exponent(), 0);
        assert_eq!(unfactor(&sum, &basis).unwrap(), (big(6), big(1)));
    }

    #[test]
    fn vectors_from_different_bases_do_not_combine() {
        let mut a = PrimeBasis::new(false);
        let mut b = PrimeBasis::new(false);
        let va = factor(&big(2), &mut a, true).unwrap();
        let vb = factor(&big(2), &mut b, true).unwrap();
        assert_eq!(vec_add(&va, &vb), Err(NumthError::BasisMismatch));
    }

    #[test]
    fn unfactor_examples() {
        let mut basis = PrimeBasis::new(false);
        let twelve = factor(&big(12), &mut basis, true).unwrap();
        assert_eq!(unfactor(&twelve, &basis).unwrap(), (big(12), big(1)));

        basis.ensure(big(5));
        let i2 = basis.index_of(&big(2)).unwrap();
        let i5 = basis.index_of(&big(5)).unwrap();
        let five_halves =
            ExponentVector::from_parts(&basis, 0, [(i2, big(-1)), (i5, big(1))]);
        assert_eq!(unfactor(&five_halves, &basis).unwrap(), (big(5), big(2)));

        let empty = ExponentVector::identity(&basis);
        assert_eq!(unfactor(&empty, &basis).unwrap(), (big(1), big(1)));
    }

    #[test]
    fn probable_prime_spot_checks() {
        assert!(is_probable_prime(&big(2)));
        assert!(is_probable_prime(&big(577)));
        assert!(is_probable_prime(&big(1_000_003)));
        assert!(!is_probable_prime(&big(1)));
        assert!(!is_probable_prime(&big(561))); // Carmichael
        assert!(!is_probable_prime(&big(1_000_001)));
    }

    #[test]
    fn factors_past_the_small_prime_table() {
        // 1000003 * 1000033, both prime and above the trial-division cutoff
        // once squared; exercises the rho path.
        let n = BigInt::from(1_000_003u64) * BigInt::from(1_000_033u64);
        let f = factor_value(&n).unwrap();
        assert_eq!(f.value(), n);
        assert_eq!(f.factors.len(), 2);
    }

    proptest! {
        #[test]
        fn roundtrip_and_no_zero_exponents(n in -1_000_000_000i64..1_000_000_000i64) {
            prop_assume!(n != 0);
            let mut basis = PrimeBasis::new(true);
            let v = factor(&big(n), &mut basis, true).unwrap();
            prop_assert!(v.entries().values().all(|e| !e.is_zero()));
            prop_assert_eq!(unfactor(&v, &basis).unwrap(), (big(n), big(1)));
        }

        #[test]
        fn factor_is_a_homomorphism(a in -31_622i64..31_622i64, b in -31_622i64..31_622i64) {
            prop_assume!(a != 0 && b != 0);
            let mut basis = PrimeBasis::new(true);
            let va = factor(&big(a), &mut basis, true).unwrap();
            let vb = factor(&big(b), &mut basis, true).unwrap();
            let vab = factor(&(big(a) * big(b)), &mut basis, true).unwrap();
            prop_assert_eq!(vec_add(&va, &vb).unwrap(), vab);
        }

        #[test]
        fn self_difference_is_identity(n in 1i64..100_000i64) {
            let mut basis = PrimeBasis::new(false);
            let v = factor(&big(n), &mut basis, true).unwrap();
            prop_assert!(vec_sub(&v, &v).unwrap().is_identity());
        }
    }
}
