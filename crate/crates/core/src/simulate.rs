//! Stationary sample paths and empirical conditional frequencies, used as
//! an independent check of the exact engine.
//!
//! Paths are drawn with ChaCha8 seeded by `seed_from_u64`: the first `m`
//! pair symbols as one context from the stationary law, every later symbol
//! from the kernel row of the current context, each by inverse-CDF lookup
//! on one `f64` uniform. All windows are therefore exactly stationary.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{conditional_query, Budget, ObservationPattern, Target};
use crate::error::{Error, Result};
use crate::model::{Alphabet, Model, PairSymbol};
use crate::scalar::Real;

pub const GENERATOR: &str = "chacha8";

/// Fewer matching windows than this marks an estimate as low power.
pub const LOW_POWER_MATCHES: u64 = 10_000;

/// A comparison fails when `|z|` exceeds this.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub seed: u64,
    pub symbols: Vec<PairSymbol>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Writes `# model_hash=… seed=… n=… generator=…` then one `x y` line
    /// per step.
    pub fn export(&self, model_hash: &str, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "# model_hash={model_hash} seed={} n={} generator={GENERATOR}",
            self.seed,
            self.len()
        )?;
        for p in &self.symbols {
            writeln!(out, "{} {}", p.x, p.y)?;
        }
        Ok(())
    }
}

fn cumulative<T: Real>(weights: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w.as_f64();
            acc
        })
        .collect()
}

/// Index of the first cumulative weight above `u`, never a zero-weight
/// entry even when rounding leaves the total slightly below one.
fn pick(cum: &[f64], u: f64) -> usize {
    let u = u * cum[cum.len() - 1];
    let i = cum.partition_point(|&c| c <= u);
    if i < cum.len() {
        return i;
    }
    (0..cum.len())
        .rev()
        .find(|&i| i == 0 || cum[i] > cum[i - 1])
        .unwrap_or(0)
}

/// Samples `n` consecutive pair symbols of the stationary chain.
pub fn sample_path<T: Real>(model: &Model<T>, n: usize, seed: u64) -> Result<Trajectory> {
    let m = model.order();
    if n < m {
        return Err(Error::Parameter(format!(
            "trajectory length {n} is below the model order {m}"
        )));
    }
    let space = model.space();
    let law = cumulative(model.law().probabilities());
    let rows: Vec<Vec<f64>> = model.kernel().rows().map(cumulative).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(n);
    let mut ctx = pick(&law, rng.gen());
    symbols.extend(space.unpack(ctx).slots.into_iter().take(n));
    let alphabet = model.alphabet();
    while symbols.len() < n {
        let p = pick(&rows[ctx], rng.gen());
        symbols.push(alphabet.pair(p));
        ctx = space.shift(ctx, p);
    }
    Ok(Trajectory { seed, symbols })
}

/// Window counts for `P(target of Z₀ = · | pattern)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub matches: u64,
    pub counts: Vec<u64>,
    pub estimates: Vec<f64>,
    /// `sqrt(p̂ (1 - p̂) / matches)`.
    pub std_errors: Vec<f64>,
}

/// Slides the pattern (followed by `Z₀`) over the path.
pub fn empirical_conditional(
    trajectory: &Trajectory,
    alphabet: Alphabet,
    pattern: &ObservationPattern,
    target: Target,
) -> Result<Estimate> {
    pattern.check(alphabet)?;
    let d = pattern.depth();
    let mut counts = vec![0u64; target.dimension(alphabet)];
    if trajectory.len() > d {
        for window in trajectory.symbols.windows(d + 1) {
            if pattern.slots.iter().zip(window).all(|(s, p)| s.admits(*p)) {
                counts[target.outcome(alphabet, window[d])] += 1;
            }
        }
    }
    let matches: u64 = counts.iter().sum();
    if matches == 0 {
        return Err(Error::InsufficientData(format!(
            "no window of the {}-step path matches [{pattern}]",
            trajectory.len()
        )));
    }
    let n = matches as f64;
    let estimates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errors = estimates
        .iter()
        .map(|p| (p * (1.0 - p) / n).sqrt())
        .collect();
    Ok(Estimate {
        matches,
        counts,
        estimates,
        std_errors,
    })
}

/// A conditional probability to compare: the law of one coordinate of
/// `Z₀` given a pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McQuery {
    pub pattern: ObservationPattern,
    pub target: Target,
}

impl McQuery {
    /// Parses `<pattern>` or `<pattern> => x|y|xy`.
    pub fn parse(line: &str) -> Result<Self> {
        let (pat, target) = match line.split_once("=>") {
            Some((p, t)) => (p, t.trim()),
            None => (line, "x"),
        };
        let target = match target {
            "x" => Target::X,
            "y" => Target::Y,
            "xy" => Target::Z,
            other => {
                return Err(Error::Parse(format!(
                    "unknown target {other:?} in {line:?}"
                )))
            }
        };
        Ok(Self {
            pattern: pat.trim().parse()?,
            target,
        })
    }

    /// Patterns file: one query per line, `#` comments and blank lines skipped.
    pub fn parse_many(text: &str) -> Result<Vec<Self>> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Self::parse)
            .collect()
    }
}

/// `count` queries with depth uniform in `1..=max_depth`, slot kinds and
/// symbols uniform, and an X or Y target.
pub fn random_queries(
    alphabet: Alphabet,
    count: usize,
    max_depth: usize,
    seed: u64,
) -> Vec<McQuery> {
    use crate::engine::Slot;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = alphabet.size();
    (0..count)
        .map(|_| {
            let depth = rng.gen_range(1..=max_depth.max(1));
            let slots = (0..depth)
                .map(|_| match rng.gen_range(0..4) {
                    0 => Slot::Free,
                    1 => Slot::X(rng.gen_range(0..a)),
                    2 => Slot::Y(rng.gen_range(0..a)),
                    _ => Slot::pair(rng.gen_range(0..a), rng.gen_range(0..a)),
                })
                .collect();
            let target = if rng.gen_bool(0.5) {
                Target::X
            } else {
                Target::Y
            };
            McQuery {
                pattern: ObservationPattern::new(slots),
                target,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub pattern: ObservationPattern,
    pub target: Target,
    pub outcome: usize,
    pub exact: f64,
    #[serde(with = "crate::json::nullable")]
    pub estimate: f64,
    /// Binomial standard error at the exact probability.
    #[serde(with = "crate::json::nullable")]
    pub std_error: f64,
    #[serde(with = "crate::json::nullable")]
    pub z: f64,
    pub matches: u64,
    pub low_power: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub rows: Vec<McRow>,
    #[serde(with = "crate::json::nullable")]
    pub max_abs_z: f64,
    /// Some `|z| > 4`.
    pub exceeds: bool,
    pub low_power_rows: usize,
}

/// Samples one path of length `n` and compares every outcome of every
/// query with its exact conditional probability.
pub fn mc_vs_exact<T: Real>(
    model: &Model<T>,
    queries: &[McQuery],
    n: usize,
    seed: u64,
    budget: &Budget,
) -> Result<McReport> {
    let alphabet = model.alphabet();
    let exact = queries
        .iter()
        .map(|q| conditional_query(model, &q.pattern, q.target, None, budget))
        .collect::<Result<Vec<_>>>()?;
    let path = sample_path(model, n, seed)?;
    let estimates: Vec<Option<Estimate>> = queries
        .par_iter()
        .map(
            |q| match empirical_conditional(&path, alphabet, &q.pattern, q.target) {
                Ok(e) => Ok(Some(e)),
                Err(Error::InsufficientData(_)) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for ((q, law), est) in queries.iter().zip(&exact).zip(&estimates) {
        for outcome in 0..q.target.dimension(alphabet) {
            let p = law.prob(outcome).as_f64();
            let (estimate, matches) = match est {
                Some(e) => (e.estimates[outcome], e.matches),
                None => (f64::NAN, 0),
            };
            let std_error = (p * (1.0 - p) / matches as f64).sqrt();
            let z = if est.is_none() {
                f64::NAN
            } else if std_error > 0.0 {
                (estimate - p) / std_error
            } else if estimate == p {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(McRow {
                pattern: q.pattern.clone(),
                target: q.target,
                outcome,
                exact: p,
                estimate,
                std_error,
                z,
                matches,
                low_power: matches < LOW_POWER_MATCHES,
            });
        }
    }
    let max_abs_z = rows
        .iter()
        .map(|r| r.z.abs())
        .filter(|z| !z.is_nan())
        .fold(0.0, f64::max);
    Ok(McReport {
        generator: GENERATOR.into(),
        seed,
        n,
        exceeds: max_abs_z > Z_LIMIT,
        max_abs_z,
        low_power_rows: rows.iter().filter(|r| r.low_power).count(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::binary_symmetric_channel;

    fn star() -> Model<f64> {
        Model::new(binary_symmetric_channel(0.7f64, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let m = star();
        assert_eq!(
            sample_path(&m, 500, 9).unwrap(),
            sample_path(&m, 500, 9).unwrap()
        );
        assert_ne!(
            sample_path(&m, 500, 9).unwrap(),
            sample_path(&m, 500, 10).unwrap()
        );
    }

    #[test]
    fn noiseless_paths_copy_x() {
        let m = Model::new(binary_symmetric_channel(0.7f64, 0.0).unwrap()).unwrap();
        assert!(sample_path(&m, 10_000, 3)
            .unwrap()
            .symbols
            .iter()
            .all(|p| p.x == p.y));
    }

    #[test]
    fn too_short_and_too_deep() {
        let spec = crate::model::RandomModelSpec {
            seed: 1,
            alphabet_size: 2,
            order: 3,
            floor: 0.01,
            fidelity: 0.7,
        };
        let m = Model::new(crate::model::random_model::<f64>(&spec).unwrap()).unwrap();
        assert!(matches!(sample_path(&m, 2, 0), Err(Error::Parameter(_))));
        let path = sample_path(&star(), 3, 0).unwrap();
        let deep = ObservationPattern::free(3);
        assert!(matches!(
            empirical_conditional(&path, Alphabet::new(2).unwrap(), &deep, Target::X),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn export_format() {
        let path = sample_path(&star(), 3, 1).unwrap();
        let mut buf = Vec::new();
        path.export("abc", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# model_hash=abc seed=1 n=3 generator=chacha8");
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.len() == 3));
    }

    #[test]
    fn query_lines() {
        let q = McQuery::parse("x=0,*,xy=1,0 => y").unwrap();
        assert_eq!(q.target, Target::Y);
        assert_eq!(q.pattern.depth(), 3);
        assert_eq!(McQuery::parse("y=1").unwrap().target, Target::X);
        assert!(McQuery::parse("y=1 => w").is_err());
        let many = McQuery::parse_many("# c\n\nx=0\ny=1 => xy\n").unwrap();
        assert_eq!(many.len(), 2);
    }
}
