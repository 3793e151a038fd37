//! Exact-arithmetic toolkit for division sequences.
//!
//! A division sequence maps `c` to `p*c + 1` when `q` does not divide `c`
//! and to `c / q` otherwise, over the positive or the nonzero integers.
//! This crate computes orbits and equivalence-class censuses for such maps,
//! harvests the relations they induce on the free abelian group over the
//! primes, answers kernel-membership queries with replayable integer
//! certificates, and chains those certificates through a rule engine that
//! tracks how each derived statement was obtained.
//!
//! Modules:
//! - [`numth`] — big-integer factorization and exponent vectors over a prime basis
//! - [`dynamics`] — the step map, orbit iteration, cycle census, class lower bounds
//! - [`lattice`] — integer relation lattices: Hermite form, membership certificates, Smith invariants
//! - [`presentation`] — relation harvesting and truncated quotient reports
//! - [`deduce`] — fact store, deduction rules, certificate replay, JSON persistence

pub mod deduce;
pub mod dynamics;
pub mod lattice;
pub mod numth;
pub mod presentation;

pub(crate) mod serde_util;
