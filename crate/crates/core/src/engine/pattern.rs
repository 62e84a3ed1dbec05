use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, PairSymbol};

/// Constraint on one time slot of the pair chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Free,
    X(usize),
    Y(usize),
    Pair(PairSymbol),
}

impl Slot {
    pub fn pair(x: usize, y: usize) -> Self {
        Slot::Pair(PairSymbol::new(x, y))
    }

    pub fn admits(&self, pair: PairSymbol) -> bool {
        match *self {
            Slot::Free => true,
            Slot::X(a) => pair.x == a,
            Slot::Y(b) => pair.y == b,
            Slot::Pair(p) => pair == p,
        }
    }

    /// Pair indices admitted by the slot, ascending.
    pub fn options(&self, alphabet: Alphabet) -> Vec<usize> {
        (0..alphabet.pair_count())
            .filter(|&p| self.admits(alphabet.pair(p)))
            .collect()
    }

    pub fn option_count(&self, alphabet: Alphabet) -> usize {
        match self {
            Slot::Free => alphabet.pair_count(),
            Slot::X(_) | Slot::Y(_) => alphabet.size(),
            Slot::Pair(_) => 1,
        }
    }

    /// Conjunction of two constraints; `None` when they contradict.
    pub fn intersect(self, other: Slot) -> Option<Slot> {
        use Slot::*;
        match (self, other) {
            (Free, s) | (s, Free) => Some(s),
            (X(a), X(b)) => (a == b).then_some(X(a)),
            (Y(a), Y(b)) => (a == b).then_some(Y(a)),
            (X(a), Y(b)) | (Y(b), X(a)) => Some(Slot::pair(a, b)),
            (Pair(p), s) | (s, Pair(p)) => s.admits(p).then_some(Pair(p)),
        }
    }

    pub fn check(&self, alphabet: Alphabet) -> Result<()> {
        match *self {
            Slot::Free => Ok(()),
            Slot::X(a) | Slot::Y(a) => alphabet.check_symbol(a),
            Slot::Pair(p) => {
                alphabet.check_symbol(p.x)?;
                alphabet.check_symbol(p.y)
            }
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Free => write!(f, "*"),
            Slot::X(a) => write!(f, "x={a}"),
            Slot::Y(b) => write!(f, "y={b}"),
            Slot::Pair(p) => write!(f, "xy={},{}", p.x, p.y),
        }
    }
}

/// Constraints on positions `-k .. -1`, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ObservationPattern {
    pub slots: Vec<Slot>,
}

impl ObservationPattern {
    pub fn new(slots: Vec<Slot>) -> Self {
        Self { slots }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn free(depth: usize) -> Self {
        Self {
            slots: vec![Slot::Free; depth],
        }
    }

    pub fn x_history(symbols: &[usize]) -> Self {
        Self {
            slots: symbols.iter().map(|&a| Slot::X(a)).collect(),
        }
    }

    pub fn y_history(symbols: &[usize]) -> Self {
        Self {
            slots: symbols.iter().map(|&b| Slot::Y(b)).collect(),
        }
    }

    pub fn pair_history(pairs: &[PairSymbol]) -> Self {
        Self {
            slots: pairs.iter().map(|&p| Slot::Pair(p)).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    /// Adds `older` slots before the oldest one.
    pub fn with_older(&self, older: &[Slot]) -> Self {
        let mut slots = older.to_vec();
        slots.extend_from_slice(&self.slots);
        Self { slots }
    }

    /// Concatenation `self` (older) followed by `newer`.
    pub fn then(&self, newer: &[Slot]) -> Self {
        let mut slots = self.slots.clone();
        slots.extend_from_slice(newer);
        Self { slots }
    }

    pub fn check(&self, alphabet: Alphabet) -> Result<()> {
        self.slots.iter().try_for_each(|s| s.check(alphabet))
    }
}

impl fmt::Display for ObservationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

fn parse_symbol(tok: &str, whole: &str) -> Result<usize> {
    tok.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad symbol {tok:?} in pattern {whole:?}")))
}

impl FromStr for ObservationPattern {
    type Err = Error;

    /// Parses `*`, `x=A`, `y=B` and `xy=A,B` slots separated by commas.
    fn from_str(s: &str) -> Result<Self> {
        let mut slots = Vec::new();
        if s.trim().is_empty() {
            return Ok(Self { slots });
        }
        let mut tokens = s.split(',').map(str::trim);
        while let Some(tok) = tokens.next() {
            let slot = if tok == "*" {
                Slot::Free
            } else if let Some(rest) = tok.strip_prefix("xy=") {
                let x = parse_symbol(rest, s)?;
                let y = tokens
                    .next()
                    .ok_or_else(|| Error::Parse(format!("xy slot missing y symbol in {s:?}")))?;
                Slot::pair(x, parse_symbol(y, s)?)
            } else if let Some(rest) = tok.strip_prefix("x=") {
                Slot::X(parse_symbol(rest, s)?)
            } else if let Some(rest) = tok.strip_prefix("y=") {
                Slot::Y(parse_symbol(rest, s)?)
            } else {
                return Err(Error::Parse(format!("bad slot {tok:?} in pattern {s:?}")));
            };
            slots.push(slot);
        }
        Ok(Self { slots })
    }
}

impl Serialize for ObservationPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObservationPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated symbol list such as `"0,1,1"`.
pub fn parse_symbols(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_symbol(t, s)).collect()
}

/// Every word of length `len` over `0..base`, in lexicographic order.
pub fn words(base: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (base as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    let mut next = if base == 0 && len > 0 {
        None
    } else {
        Some(vec![0; len])
    };
    let mut produced = 0u128;
    std::iter::from_fn(move || {
        let current = next.take()?;
        produced += 1;
        if produced < total {
            let mut w = current.clone();
            for d in w.iter_mut().rev() {
                *d += 1;
                if *d < base {
                    break;
                }
                *d = 0;
            }
            next = Some(w);
        }
        Some(current)
    })
}
