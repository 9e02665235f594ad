//! Small-state pseudorandom permutations of `0..n`.
//!
//! Indices are split into a digit pair `(lo, hi)` over base `side = ⌈√n⌉`.
//! Each round maps `(lo, hi)` to `(hi, lo + f(hi) mod side)`; four keyed
//! rounds give a permutation of `0..side²`, and cycle-walking restricts it
//! to `0..n`.

use rand::Rng;

use crate::error::{Result, SortError};
use crate::seed::{mix64, SeedSpec};

pub const ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RoundFunction {
    Keyed([u64; ROUNDS]),
    /// f ≡ 0; every round degenerates to a digit swap.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudorandomPermutation {
    domain_size: u64,
    side: u64,
    rounds: RoundFunction,
}

impl PseudorandomPermutation {
    /// Builds a permutation of `0..n`. `n` must be at least 1.
    pub fn new(n: u64, seed: &SeedSpec) -> Result<Self> {
        let mut rng = seed.rng();
        let keys = [rng.random(), rng.random(), rng.random(), rng.random()];
        Self::with_round_keys(n, keys)
    }

    pub fn with_round_keys(n: u64, keys: [u64; ROUNDS]) -> Result<Self> {
        Self::build(n, RoundFunction::Keyed(keys))
    }

    /// All round functions zero. Useful only as a known fixture.
    pub fn with_zero_rounds(n: u64) -> Result<Self> {
        Self::build(n, RoundFunction::Zero)
    }

    fn build(n: u64, rounds: RoundFunction) -> Result<Self> {
        if n == 0 {
            return Err(SortError::precondition("permutation domain must be non-empty"));
        }
        Ok(PseudorandomPermutation {
            domain_size: n,
            side: ceil_sqrt(n),
            rounds,
        })
    }

    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    fn round_value(&self, round: usize, x: u64) -> u64 {
        match self.rounds {
            RoundFunction::Keyed(keys) => mix64(x ^ mix64(keys[round])) % self.side,
            RoundFunction::Zero => 0,
        }
    }

    /// The permutation of the padded domain `0..side²`.
    fn padded(&self, i: u64) -> u64 {
        let side = self.side;
        let (mut lo, mut hi) = (i % side, i / side);
        for round in 0..ROUNDS {
            let next_hi = (lo + self.round_value(round, hi)) % side;
            lo = hi;
            hi = next_hi;
        }
        lo + hi * side
    }

    pub fn apply(&self, i: u64) -> Result<u64> {
        if i >= self.domain_size {
            return Err(SortError::OutOfDomain {
                index: i,
                size: self.domain_size,
            });
        }
        let cap = self.side * self.side;
        let mut x = self.padded(i);
        let mut steps = 1;
        while x >= self.domain_size {
            if steps >= cap {
                return Err(SortError::InvariantViolation(format!(
                    "cycle walk from {i} did not return to 0..{}",
                    self.domain_size
                )));
            }
            x = self.padded(x);
            steps += 1;
        }
        Ok(x)
    }

    /// Images of `0..n` in index order.
    pub fn images(&self) -> Vec<u64> {
        (0..self.domain_size)
            .map(|i| self.apply(i).expect("index is in domain"))
            .collect()
    }
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut s = (n as f64).sqrt() as u64;
    while s * s > n {
        s -= 1;
    }
    while s * s < n {
        s += 1;
    }
    s
}
