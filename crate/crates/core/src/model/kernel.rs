use serde::Serialize;

use super::{Alphabet, ContextSpace, PairSymbol};
use crate::error::{Error, Result};
use crate::scalar::{csum, Real};

/// Row-sum tolerance of a valid `f64` kernel; narrower scalars get 64 ulps.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

fn row_sum_tolerance<T: Real>() -> f64 {
    ROW_SUM_TOLERANCE.max(64.0 * T::epsilon().as_f64())
}

/// Finite-order transition law of the pair chain `Z_n = (X_n, Y_n)`.
///
/// One row per packed context, each row a distribution over the
/// `size²` pair symbols in packing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledKernel<T> {
    space: ContextSpace,
    rows: Vec<T>,
    positivity_floor: Option<T>,
}

impl<T: Real> CoupledKernel<T> {
    /// Builds a kernel from explicit rows, checking dimensions only.
    pub fn from_rows(
        alphabet_size: usize,
        order: usize,
        rows: Vec<Vec<T>>,
        positivity_floor: Option<T>,
    ) -> Result<Self> {
        let space = ContextSpace::new(Alphabet::new(alphabet_size)?, order)?;
        if rows.len() != space.count() {
            return Err(Error::Structural(format!(
                "kernel has {} rows, expected {} for alphabet {alphabet_size} and order {order}",
                rows.len(),
                space.count()
            )));
        }
        let width = space.alphabet().pair_count();
        let mut flat = Vec::with_capacity(space.count() * width);
        for (c, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Structural(format!(
                    "row {c} has {} entries, expected {width}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        if let Some(floor) = positivity_floor {
            if !(floor > T::zero()) {
                return Err(Error::Parameter("positivity floor must be > 0".into()));
            }
        }
        Ok(Self {
            space,
            rows: flat,
            positivity_floor,
        })
    }

    /// Builds a kernel by evaluating `f(context_pairs, pair)` on every entry.
    pub fn from_fn(
        alphabet: Alphabet,
        order: usize,
        positivity_floor: Option<T>,
        mut f: impl FnMut(&[PairSymbol], PairSymbol) -> T,
    ) -> Result<Self> {
        let space = ContextSpace::new(alphabet, order)?;
        let width = alphabet.pair_count();
        let mut rows = Vec::with_capacity(space.count() * width);
        for c in 0..space.count() {
            let ctx = space.unpack(c);
            for p in 0..width {
                rows.push(f(&ctx.slots, alphabet.pair(p)));
            }
        }
        Ok(Self {
            space,
            rows,
            positivity_floor,
        })
    }

    pub fn space(&self) -> ContextSpace {
        self.space
    }

    pub fn alphabet(&self) -> Alphabet {
        self.space.alphabet()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn context_count(&self) -> usize {
        self.space.count()
    }

    pub fn positivity_floor(&self) -> Option<T> {
        self.positivity_floor
    }

    pub fn row(&self, context: usize) -> &[T] {
        let w = self.alphabet().pair_count();
        &self.rows[context * w..(context + 1) * w]
    }

    pub fn prob(&self, context: usize, pair: usize) -> T {
        self.rows[context * self.alphabet().pair_count() + pair]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.rows.chunks(self.alphabet().pair_count())
    }

    /// Every entry is `>= floor` when a floor is set, `> 0` otherwise.
    pub fn is_strictly_positive(&self) -> bool {
        match self.positivity_floor {
            Some(floor) => self.rows.iter().all(|&v| v >= floor),
            None => self.rows.iter().all(|&v| v > T::zero()),
        }
    }

    /// Converts entries to another scalar type.
    pub fn cast<U: Real>(&self) -> CoupledKernel<U> {
        CoupledKernel {
            space: self.space,
            rows: self.rows.iter().map(|v| U::of(v.as_f64())).collect(),
            positivity_floor: self.positivity_floor.map(|v| U::of(v.as_f64())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowViolation {
    pub context: usize,
    pub sum: f64,
}

/// Numeric health of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub alphabet_size: usize,
    pub order: usize,
    pub contexts: usize,
    pub max_row_residual: f64,
    pub row_violations: Vec<RowViolation>,
    pub negative_entries: usize,
    pub min_entry: f64,
    pub min_entry_context: usize,
    pub min_entry_pair: usize,
    pub positivity_floor: Option<f64>,
    pub strictly_positive: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    /// Rows are distributions; positivity is reported separately.
    pub fn is_valid(&self) -> bool {
        self.row_violations.is_empty() && self.negative_entries == 0
    }
}

pub fn validate_kernel<T: Real>(kernel: &CoupledKernel<T>) -> ValidationReport {
    let mut max_row_residual = 0.0f64;
    let mut row_violations = Vec::new();
    let mut negative_entries = 0;
    let mut min_entry = f64::INFINITY;
    let (mut min_entry_context, mut min_entry_pair) = (0, 0);
    for (c, row) in kernel.rows().enumerate() {
        let sum = csum(row.iter().copied()).as_f64();
        let residual = (sum - 1.0).abs();
        max_row_residual = max_row_residual.max(residual);
        if !(residual <= row_sum_tolerance::<T>()) {
            row_violations.push(RowViolation { context: c, sum });
        }
        for (p, &v) in row.iter().enumerate() {
            let v = v.as_f64();
            if v < 0.0 || v.is_nan() {
                negative_entries += 1;
            }
            if v < min_entry {
                min_entry = v;
                min_entry_context = c;
                min_entry_pair = p;
            }
        }
    }
    let strictly_positive = kernel.is_strictly_positive();
    let mut warnings = Vec::new();
    if !strictly_positive {
        warnings.push(match kernel.positivity_floor() {
            Some(f) => format!("minimum entry {min_entry:e} below positivity floor {f}"),
            None => format!("kernel is not strictly positive (minimum entry {min_entry:e})"),
        });
    }
    ValidationReport {
        alphabet_size: kernel.alphabet().size(),
        order: kernel.order(),
        contexts: kernel.context_count(),
        max_row_residual,
        row_violations,
        negative_entries,
        min_entry,
        min_entry_context,
        min_entry_pair,
        positivity_floor: kernel.positivity_floor().map(Real::as_f64),
        strictly_positive,
        warnings,
    }
}
