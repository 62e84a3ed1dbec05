//! Exact cylinder and conditional probabilities of the stationary pair
//! chain under partial observation patterns.
//!
//! Two independent evaluation routes are provided:
//!
//! * [`event_probability`] and [`conditional_query`] sum explicitly over
//!   every full pair cylinder consistent with a pattern, refusing queries
//!   whose cylinder count exceeds the [`Budget`];
//! * [`forward_filter`] and [`forward_predict`] propagate the joint law of
//!   the last `m` pair symbols through the pattern slot by slot, which is
//!   linear in the depth.

mod enumerate;
mod pattern;
mod sweep;

pub use enumerate::{conditional_query, cylinder_probability, event_probability, joint_masses};
pub use pattern::{parse_symbols, words, ObservationPattern, Slot};
pub use sweep::{forward_filter, forward_predict, sweep_event_probability};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, PairSymbol};
use crate::scalar::Real;

/// Coordinate of `Z₀` a conditional law is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    X,
    Y,
    Z,
}

impl Target {
    pub fn dimension(&self, alphabet: Alphabet) -> usize {
        match self {
            Target::X | Target::Y => alphabet.size(),
            Target::Z => alphabet.pair_count(),
        }
    }

    pub fn outcome(&self, alphabet: Alphabet, pair: PairSymbol) -> usize {
        match self {
            Target::X => pair.x,
            Target::Y => pair.y,
            Target::Z => alphabet.pair_index(pair),
        }
    }
}

/// Exact conditional distribution of a coordinate of `Z₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLaw<T> {
    pub target: Target,
    pub probabilities: Vec<T>,
    /// Probability of the conditioning event.
    pub event_mass: T,
}

impl<T: Real> ConditionalLaw<T> {
    pub fn prob(&self, outcome: usize) -> T {
        self.probabilities[outcome]
    }

    /// Marginal of a `Z₀` law onto one coordinate.
    pub fn marginal(&self, alphabet: Alphabet, target: Target) -> Self {
        assert_eq!(self.target, Target::Z, "marginal of a Z law");
        let mut out = vec![T::zero(); target.dimension(alphabet)];
        for (p, &v) in self.probabilities.iter().enumerate() {
            let o = target.outcome(alphabet, alphabet.pair(p));
            out[o] = out[o] + v;
        }
        Self {
            target,
            probabilities: out,
            event_mass: self.event_mass,
        }
    }
}

/// Limits on exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest number of full cylinders a single query may sum over.
    pub max_cylinders: u128,
    /// Largest estimated cylinder count for one composite operation.
    pub max_work: u128,
}

impl Budget {
    /// Cylinders of a depth-8 query on a binary alphabet, `4^9`.
    pub const DEFAULT_MAX_CYLINDERS: u128 = 1 << 18;
    pub const DEFAULT_MAX_WORK: u128 = 2_000_000_000;

    pub fn unlimited() -> Self {
        Self {
            max_cylinders: u128::MAX,
            max_work: u128::MAX,
        }
    }

    /// Largest pattern depth `k` whose all-free query (`(size²)^(k+1)`
    /// cylinders) fits the per-query cap.
    pub fn depth_cap(&self, alphabet: Alphabet) -> usize {
        let s = alphabet.pair_count() as u128;
        let mut k = 0;
        let mut cylinders = s * s;
        while cylinders <= self.max_cylinders {
            k += 1;
            cylinders = cylinders.saturating_mul(s);
        }
        k
    }

    pub fn check_query(&self, estimated: u128) -> Result<()> {
        if estimated > self.max_cylinders {
            Err(Error::Cost {
                estimated,
                budget: self.max_cylinders,
            })
        } else {
            Ok(())
        }
    }

    pub fn check_work(&self, estimated: u128) -> Result<()> {
        if estimated > self.max_work {
            Err(Error::Cost {
                estimated,
                budget: self.max_work,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_cylinders: Self::DEFAULT_MAX_CYLINDERS,
            max_work: Self::DEFAULT_MAX_WORK,
        }
    }
}
