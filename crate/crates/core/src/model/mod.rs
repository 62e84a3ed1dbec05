//! Joint chain model: alphabet, pair symbols, packed contexts, the coupled
//! transition kernel and its stationary law.
//!
//! A context of order `m` is the window `Z_{-m} .. Z_{-1}` of pair symbols,
//! oldest first. It is packed as a base-`size²` integer with the oldest
//! symbol in the most significant digit, and each pair `(x, y)` packed as
//! `x * size + y`. Witnesses, model files and trajectory exports all rely on
//! this order.

mod build;
mod io;
mod kernel;
mod stationary;

pub use build::{
    binary_symmetric_channel, build_channel_model, iid_model, random_model, MarkovChain,
    RandomModelSpec,
};
pub use io::ModelFile;
pub use kernel::{validate_kernel, CoupledKernel, RowViolation, ValidationReport};
pub use stationary::{
    invariance_residual, shift_step, stationary_law, StationaryLaw, INVARIANCE_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite alphabet `{0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Structural(format!("alphabet size {size} < 2")));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of pair symbols, `size²`.
    pub fn pair_count(&self) -> usize {
        self.size * self.size
    }

    pub fn contains(&self, symbol: usize) -> bool {
        symbol < self.size
    }

    pub fn pair(&self, index: usize) -> PairSymbol {
        debug_assert!(index < self.pair_count());
        PairSymbol {
            x: index / self.size,
            y: index % self.size,
        }
    }

    pub fn pair_index(&self, pair: PairSymbol) -> usize {
        debug_assert!(self.contains(pair.x) && self.contains(pair.y));
        pair.x * self.size + pair.y
    }

    pub fn check_symbol(&self, symbol: usize) -> Result<()> {
        if self.contains(symbol) {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "symbol {symbol} outside alphabet of size {}",
                self.size
            )))
        }
    }
}

/// One joint symbol `(x, y)` of the pair chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairSymbol {
    pub x: usize,
    pub y: usize,
}

impl PairSymbol {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Packing of length-`order` pair windows into `0 .. (size²)^order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextSpace {
    alphabet: Alphabet,
    order: usize,
    count: usize,
}

impl ContextSpace {
    pub fn new(alphabet: Alphabet, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Structural("order must be >= 1".into()));
        }
        let count = u32::try_from(order)
            .ok()
            .and_then(|o| alphabet.pair_count().checked_pow(o))
            .ok_or_else(|| {
                Error::Structural(format!("context space of order {order} overflows"))
            })?;
        Ok(Self {
            alphabet,
            order,
            count,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Packs pair indices (oldest first).
    pub fn pack_indices(&self, pairs: &[usize]) -> usize {
        debug_assert_eq!(pairs.len(), self.order);
        let s = self.alphabet.pair_count();
        pairs.iter().fold(0, |acc, &p| acc * s + p)
    }

    pub fn pack(&self, context: &Context) -> Result<usize> {
        if context.slots.len() != self.order {
            return Err(Error::Structural(format!(
                "context of length {} for order {}",
                context.slots.len(),
                self.order
            )));
        }
        let mut idx = 0;
        for pair in &context.slots {
            self.alphabet.check_symbol(pair.x)?;
            self.alphabet.check_symbol(pair.y)?;
            idx = idx * self.alphabet.pair_count() + self.alphabet.pair_index(*pair);
        }
        Ok(idx)
    }

    pub fn unpack_indices(&self, mut index: usize) -> Vec<usize> {
        let s = self.alphabet.pair_count();
        let mut out = vec![0; self.order];
        for slot in out.iter_mut().rev() {
            *slot = index % s;
            index /= s;
        }
        out
    }

    pub fn unpack(&self, index: usize) -> Context {
        Context {
            slots: self
                .unpack_indices(index)
                .into_iter()
                .map(|p| self.alphabet.pair(p))
                .collect(),
        }
    }

    /// Context after appending `pair` as the newest symbol.
    pub fn shift(&self, context: usize, pair: usize) -> usize {
        (context * self.alphabet.pair_count() + pair) % self.count
    }

    /// Newest pair index of a packed context.
    pub fn newest(&self, context: usize) -> usize {
        context % self.alphabet.pair_count()
    }
}

/// A kernel together with its stationary law: the stationary pair chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    kernel: CoupledKernel<T>,
    law: StationaryLaw<T>,
}

impl<T: crate::scalar::Real> Model<T> {
    pub fn new(kernel: CoupledKernel<T>) -> Result<Self> {
        let law = stationary_law(&kernel)?;
        Ok(Self { kernel, law })
    }

    pub fn kernel(&self) -> &CoupledKernel<T> {
        &self.kernel
    }

    pub fn law(&self) -> &StationaryLaw<T> {
        &self.law
    }

    pub fn alphabet(&self) -> Alphabet {
        self.kernel.alphabet()
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    pub fn space(&self) -> ContextSpace {
        self.kernel.space()
    }
}

/// Unpacked window `Z_{-m} .. Z_{-1}`, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Context {
    pub slots: Vec<PairSymbol>,
}
