//! Canonical model builders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Alphabet, ContextSpace, CoupledKernel};
use crate::error::{Error, Result};
use crate::scalar::{csum, Real};

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Autonomous finite-order chain on the single alphabet.
///
/// Rows are indexed by the packed `x`-context (oldest symbol most
/// significant, base `size`).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain<T> {
    pub alphabet_size: usize,
    pub order: usize,
    pub rows: Vec<Vec<T>>,
}

impl<T: Real> MarkovChain<T> {
    /// Binary order-1 chain that repeats its symbol with probability `stay`.
    pub fn symmetric_binary(stay: T) -> Self {
        let flip = T::one() - stay;
        Self {
            alphabet_size: 2,
            order: 1,
            rows: vec![vec![stay, flip], vec![flip, stay]],
        }
    }

    /// Order-1 chain whose rows all equal `q`.
    pub fn iid(q: Vec<T>) -> Self {
        let n = q.len();
        Self {
            alphabet_size: n,
            order: 1,
            rows: vec![q; n],
        }
    }
}

fn check_stochastic<T: Real>(what: &str, rows: &[Vec<T>], width: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Structural(format!(
                "{what} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        let sum = csum(row.iter().copied()).as_f64();
        if row.iter().any(|&v| v < T::zero()) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::Parameter(format!(
                "{what} row {i} is not a distribution"
            )));
        }
    }
    Ok(())
}

/// Joint kernel `P(Z₀ = (x, y) | ctx) = P_X(x | x-part of ctx) · C(y | x)`.
pub fn build_channel_model<T: Real>(
    x_chain: &MarkovChain<T>,
    channel: &[Vec<T>],
) -> Result<CoupledKernel<T>> {
    let size = x_chain.alphabet_size;
    let alphabet = Alphabet::new(size)?;
    let x_contexts = u32::try_from(x_chain.order)
        .ok()
        .and_then(|o| size.checked_pow(o))
        .ok_or_else(|| Error::Structural("x-chain order overflows".into()))?;
    if x_chain.rows.len() != x_contexts {
        return Err(Error::Structural(format!(
            "x-chain has {} rows, expected {x_contexts}",
            x_chain.rows.len()
        )));
    }
    if channel.len() != size {
        return Err(Error::Structural(format!(
            "channel has {} rows, expected {size}",
            channel.len()
        )));
    }
    check_stochastic("x-chain", &x_chain.rows, size)?;
    check_stochastic("channel", channel, size)?;

    let floor = {
        let m = x_chain
            .rows
            .iter()
            .flatten()
            .copied()
            .fold(T::infinity(), T::min)
            * channel
                .iter()
                .flatten()
                .copied()
                .fold(T::infinity(), T::min);
        (m > T::zero()).then_some(m)
    };
    CoupledKernel::from_fn(alphabet, x_chain.order, floor, |ctx, pair| {
        let x_ctx = ctx.iter().fold(0, |acc, p| acc * size + p.x);
        x_chain.rows[x_ctx][pair.x] * channel[pair.x][pair.y]
    })
}

/// Binary symmetric X-chain (`stay`) observed through a binary symmetric
/// channel that flips with probability `flip`.
pub fn binary_symmetric_channel<T: Real>(stay: T, flip: T) -> Result<CoupledKernel<T>> {
    let keep = T::one() - flip;
    build_channel_model(
        &MarkovChain::symmetric_binary(stay),
        &[vec![keep, flip], vec![flip, keep]],
    )
}

/// Order-1 kernel whose rows all equal the pair distribution `q`.
pub fn iid_model<T: Real>(alphabet_size: usize, q: &[T]) -> Result<CoupledKernel<T>> {
    let alphabet = Alphabet::new(alphabet_size)?;
    if q.len() != alphabet.pair_count() {
        return Err(Error::Structural(format!(
            "pair distribution has {} entries, expected {}",
            q.len(),
            alphabet.pair_count()
        )));
    }
    check_stochastic("pair distribution", &[q.to_vec()], q.len())?;
    let min = q.iter().copied().fold(T::infinity(), T::min);
    CoupledKernel::from_fn(alphabet, 1, (min > T::zero()).then_some(min), |_, p| {
        q[alphabet.pair_index(p)]
    })
}

/// Parameters of a random kernel satisfying the blurring and non-nullness
/// hypotheses by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelSpec {
    pub seed: u64,
    pub alphabet_size: usize,
    pub order: usize,
    /// Every kernel entry is at least this.
    pub floor: f64,
    /// `P(Y₀ = a | X₀ = a, context) >= fidelity` for every context and `a`.
    pub fidelity: f64,
}

impl RandomModelSpec {
    /// Binary order-1 corpus member (`δ = 0.05`, `φ = 0.7`).
    pub fn corpus(seed: u64) -> Self {
        Self {
            seed,
            alphabet_size: 2,
            order: 1,
            floor: 0.05,
            fidelity: 0.7,
        }
    }

    /// Smallest `X₀` marginal a row can carry so that every entry clears
    /// the floor while the diagonal keeps the fidelity.
    fn required_marginal(&self) -> f64 {
        let a = self.alphabet_size as f64;
        ((a - 1.0) * self.floor / (1.0 - self.fidelity)).max(self.floor / self.fidelity)
    }
}

/// Draws a kernel row by row from a ChaCha8 stream seeded with `spec.seed`.
///
/// Each row is `p(x) · q(y | x)` with `p(x)` bounded below and
/// `q(y | x) >= floor / p(x)` off the diagonal, `q(x | x) >= fidelity`.
pub fn random_model<T: Real>(spec: &RandomModelSpec) -> Result<CoupledKernel<T>> {
    let alphabet = Alphabet::new(spec.alphabet_size)?;
    let a = spec.alphabet_size;
    let s = alphabet.pair_count() as f64;
    if !(spec.floor > 0.0) {
        return Err(Error::Parameter(format!(
            "floor {} must be > 0",
            spec.floor
        )));
    }
    if !(spec.fidelity > 0.0 && spec.fidelity < 1.0) {
        return Err(Error::Parameter(format!(
            "fidelity {} must lie in (0, 1)",
            spec.fidelity
        )));
    }
    if !(spec.floor * s < 1.0) {
        return Err(Error::Parameter(format!(
            "floor {} times {} pair symbols is not < 1",
            spec.floor, s
        )));
    }
    let required = spec.required_marginal();
    if !(required * a as f64 <= 1.0) {
        return Err(Error::Parameter(format!(
            "floor {} and fidelity {} are infeasible for alphabet {a}: need marginal floor {required} <= 1/{a}",
            spec.floor, spec.fidelity
        )));
    }
    let space = ContextSpace::new(alphabet, spec.order)?;
    // Leave a quarter of the remaining room so the off-diagonal channel
    // entries are not pinned to their floor.
    let p_min = required + (1.0 / a as f64 - required) / 4.0;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(space.count());
    for _ in 0..space.count() {
        let marginal = spread(&mut rng, a, p_min);
        let mut row = vec![T::zero(); alphabet.pair_count()];
        for x in 0..a {
            let off_floor = spec.floor / marginal[x];
            let off_budget = 1.0 - spec.fidelity - (a as f64 - 1.0) * off_floor;
            let scale: f64 = rng.gen();
            let weights: Vec<f64> = (0..a - 1).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = weights.iter().sum();
            let mut off = weights
                .iter()
                .map(|w| off_floor + off_budget * scale * w / total);
            let mut diag = 1.0;
            let mut q = vec![0.0; a];
            for (y, qy) in q.iter_mut().enumerate() {
                if y != x {
                    *qy = off.next().expect("a - 1 off-diagonal weights");
                    diag -= *qy;
                }
            }
            q[x] = diag;
            for y in 0..a {
                row[x * a + y] = T::of(marginal[x] * q[y]);
            }
        }
        rows.push(row);
    }
    CoupledKernel::from_rows(a, spec.order, rows, Some(T::of(spec.floor)))
}

/// Random distribution over `n` points with every entry `>= lower`.
fn spread(rng: &mut ChaCha8Rng, n: usize, lower: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let free = 1.0 - lower * n as f64;
    w.iter().map(|v| lower + free * v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_kernel;

    #[test]
    fn channel_star_expands_product_formula() {
        let k = binary_symmetric_channel(0.7f64, 0.1).unwrap();
        // context x' = 0 rows; packing (0,0),(0,1),(1,0),(1,1)
        let expected_x0 = [0.63, 0.07, 0.03, 0.27];
        let expected_x1 = [0.27, 0.03, 0.07, 0.63];
        for c in 0..4 {
            let expected = if c / 2 == 0 { expected_x0 } else { expected_x1 };
            for (a, b) in k.row(c).iter().zip(expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let report = validate_kernel(&k);
        assert!(report.is_valid() && report.strictly_positive);
        assert!((report.min_entry - 0.03).abs() < 1e-15);
    }

    #[test]
    fn noiseless_channel_copies_x() {
        let k = binary_symmetric_channel(0.7f64, 0.0).unwrap();
        for row in k.rows() {
            assert_eq!(row[1], 0.0);
            assert_eq!(row[2], 0.0);
        }
        assert!(k.positivity_floor().is_none());
    }

    #[test]
    fn uniform_x_rows_are_constant() {
        let k = build_channel_model(
            &MarkovChain::symmetric_binary(0.5f64),
            &[vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap();
        for row in k.rows() {
            for (a, b) in row.iter().zip([0.45, 0.05, 0.05, 0.45]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn channel_dimension_mismatch() {
        let chain = MarkovChain::symmetric_binary(0.7);
        assert!(matches!(
            build_channel_model(&chain, &[vec![1.0, 0.0]]),
            Err(Error::Structural(_))
        ));
        let iid = MarkovChain::iid(vec![0.2, 0.3, 0.5]);
        assert_eq!(iid.rows.len(), 3);
    }

    #[test]
    fn random_model_is_deterministic_and_floored() {
        let spec = RandomModelSpec {
            seed: 1,
            alphabet_size: 2,
            order: 1,
            floor: 0.05,
            fidelity: 0.7,
        };
        let a: CoupledKernel<f64> = random_model(&spec).unwrap();
        let b: CoupledKernel<f64> = random_model(&spec).unwrap();
        assert_eq!(a, b);
        let report = validate_kernel(&a);
        assert!(report.is_valid() && report.strictly_positive, "{report:?}");
        for c in 0..a.context_count() {
            for x in 0..2 {
                let row = a.row(c);
                let px = row[x * 2] + row[x * 2 + 1];
                assert!(row[x * 2 + x] / px >= 0.7 - 1e-12);
            }
        }
    }

    #[test]
    fn random_model_larger_alphabet_and_order() {
        let spec = RandomModelSpec {
            seed: 9,
            alphabet_size: 3,
            order: 2,
            floor: 0.01,
            fidelity: 0.6,
        };
        let k: CoupledKernel<f64> = random_model(&spec).unwrap();
        assert_eq!(k.context_count(), 81);
        assert!(validate_kernel(&k).strictly_positive);
    }

    #[test]
    fn infeasible_floor_is_rejected() {
        let spec = RandomModelSpec {
            seed: 1,
            alphabet_size: 2,
            order: 1,
            floor: 0.3,
            fidelity: 0.7,
        };
        assert!(matches!(
            random_model::<f64>(&spec),
            Err(Error::Parameter(_))
        ));
        let spec = RandomModelSpec {
            floor: 0.2,
            fidelity: 0.7,
            ..spec
        };
        assert!(matches!(
            random_model::<f64>(&spec),
            Err(Error::Parameter(_))
        ));
    }
}
