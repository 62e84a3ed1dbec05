//! Blurring coefficient `ρ`, non-nullness `α`, oscillations `β_{j,k}`,
//! their partial sums `Γ_{j,k}` and the amplification factor `R`.
//!
//! Every supremum and infimum ranges over positive-mass conditioning
//! events only. Quantities indexed by an unbounded past depth are scanned
//! up to the model order `m`; the scan at depth `m + 1` is repeated as a
//! guard and must agree to [`STABILIZATION_TOLERANCE`].

use serde::{Deserialize, Serialize};

use crate::engine::{
    conditional_query, words, Budget, ConditionalLaw, ObservationPattern, Slot, Target,
};
use crate::error::{Error, Result};
use crate::model::{Model, PairSymbol};
use crate::scalar::{csum, Real};

pub const STABILIZATION_TOLERANCE: f64 = 1e-12;

/// An extremal value together with the configuration attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremum<T> {
    pub value: T,
    pub witness: String,
}

impl<T: Real> Extremum<T> {
    pub fn to_f64(&self) -> Extremum<f64> {
        Extremum {
            value: self.value.as_f64(),
            witness: self.witness.clone(),
        }
    }
}

/// `None` when the conditioning event has zero mass.
pub(crate) fn positive<T: Real>(r: Result<ConditionalLaw<T>>) -> Result<Option<ConditionalLaw<T>>> {
    match r {
        Ok(law) => Ok(Some(law)),
        Err(Error::Conditioning { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn pair_word<T: Real>(model: &Model<T>, word: &[usize]) -> Vec<PairSymbol> {
    let alphabet = model.alphabet();
    word.iter().map(|&p| alphabet.pair(p)).collect()
}

fn guard_tolerance<T: Real>() -> f64 {
    STABILIZATION_TOLERANCE.max(64.0 * T::epsilon().as_f64())
}

fn keep<T: Real>(
    best: &mut Option<Extremum<T>>,
    value: T,
    better: impl Fn(T, T) -> bool,
    witness: impl FnOnce() -> String,
) {
    if best.as_ref().map_or(true, |b| better(value, b.value)) {
        *best = Some(Extremum {
            value,
            witness: witness(),
        });
    }
}

fn check_stable<T: Real>(
    name: &str,
    capped: &Extremum<T>,
    beyond: &Option<Extremum<T>>,
) -> Result<()> {
    if let Some(b) = beyond {
        let residual = (capped.value - b.value).abs().as_f64();
        if !(residual <= guard_tolerance::<T>()) {
            return Err(Error::Numerical {
                message: format!("{name} at depth m+1 differs from its value at the model order"),
                residual,
            });
        }
    }
    Ok(())
}

/// `max_a Σ_{b≠a} P(Y₀=b | X₀=a, Z_{-k}^{-1}=η)` over pair pasts of depth `k`.
fn rho_at_depth<T: Real>(
    model: &Model<T>,
    k: usize,
    budget: &Budget,
) -> Result<Option<Extremum<T>>> {
    let a_size = model.alphabet().size();
    let mut best = None;
    for eta in words(model.alphabet().pair_count(), k) {
        let past = ObservationPattern::pair_history(&pair_word(model, &eta));
        for a in 0..a_size {
            let Some(law) = positive(conditional_query(
                model,
                &past,
                Target::Y,
                Some(Slot::X(a)),
                budget,
            ))?
            else {
                continue;
            };
            let off = csum((0..a_size).filter(|&b| b != a).map(|b| law.prob(b)));
            keep(
                &mut best,
                off,
                |v, b| v > b,
                || format!("a={a}; k={k}; past=[{past}]"),
            );
        }
    }
    Ok(best)
}

/// Blurring coefficient `ρ`.
pub fn compute_rho<T: Real>(model: &Model<T>, budget: &Budget) -> Result<Extremum<T>> {
    let m = model.order();
    let mut best: Option<Extremum<T>> = None;
    for k in 0..=m {
        if let Some(e) = rho_at_depth(model, k, budget)? {
            keep(&mut best, e.value, |v, b| v > b, || e.witness);
        }
    }
    let best = best.expect("the empty past has mass one");
    check_stable("rho", &best, &rho_at_depth(model, m + 1, budget)?)?;
    Ok(best)
}

fn alpha_at_depth<T: Real>(
    model: &Model<T>,
    k: usize,
    budget: &Budget,
) -> Result<Option<Extremum<T>>> {
    let mut best = None;
    for eta in words(model.alphabet().pair_count(), k) {
        let past = ObservationPattern::pair_history(&pair_word(model, &eta));
        let Some(law) = positive(conditional_query(model, &past, Target::X, None, budget))? else {
            continue;
        };
        for (a, &p) in law.probabilities.iter().enumerate() {
            keep(
                &mut best,
                p,
                |v, b| v < b,
                || format!("a={a}; k={k}; past=[{past}]"),
            );
        }
    }
    Ok(best)
}

/// Non-nullness constant `α = inf P(X₀=a | Z_{-k}^{-1}=η)` over `k >= 1`.
pub fn compute_alpha<T: Real>(model: &Model<T>, budget: &Budget) -> Result<Extremum<T>> {
    let m = model.order();
    let mut best: Option<Extremum<T>> = None;
    for k in 1..=m {
        if let Some(e) = alpha_at_depth(model, k, budget)? {
            keep(&mut best, e.value, |v, b| v < b, || e.witness);
        }
    }
    let best = best.expect("some depth-one past has positive mass");
    check_stable("alpha", &best, &alpha_at_depth(model, m + 1, budget)?)?;
    Ok(best)
}

/// Oscillation `β_{j,k}`: the largest log-ratio of
/// `P(X₀=a | X_{-j}^{-1}=x, Z_{-k}^{-j-1}=η)` between two deep pair pasts.
///
/// `j = 0` (no recent X past) is accepted; the comparison bounds on the
/// observed chain use it for their shallowest case.
pub fn compute_beta<T: Real>(
    model: &Model<T>,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<Extremum<T>> {
    if j > k {
        return Err(Error::Parameter(format!(
            "beta needs k >= j, got j={j}, k={k}"
        )));
    }
    if j == k {
        return Ok(Extremum {
            value: T::zero(),
            witness: "empty deep past".into(),
        });
    }
    let alphabet = model.alphabet();
    let a_size = alphabet.size();
    let mut best: Option<Extremum<T>> = None;
    for x in words(a_size, j) {
        let recent: Vec<Slot> = x.iter().map(|&s| Slot::X(s)).collect();
        // Per outcome: (max log, its pattern, min log, its pattern).
        let mut spread: Vec<Option<(T, String, T, String)>> = vec![None; a_size];
        for eta in words(alphabet.pair_count(), k - j) {
            let pattern = ObservationPattern::pair_history(&pair_word(model, &eta)).then(&recent);
            let Some(law) = positive(conditional_query(model, &pattern, Target::X, None, budget))?
            else {
                continue;
            };
            for (a, entry) in spread.iter_mut().enumerate() {
                let l = law.prob(a).ln();
                match entry {
                    None => *entry = Some((l, pattern.to_string(), l, pattern.to_string())),
                    Some((hi, hi_w, lo, lo_w)) => {
                        if l > *hi {
                            *hi = l;
                            *hi_w = pattern.to_string();
                        }
                        if l < *lo {
                            *lo = l;
                            *lo_w = pattern.to_string();
                        }
                    }
                }
            }
        }
        for (a, entry) in spread.into_iter().enumerate() {
            if let Some((hi, hi_w, lo, lo_w)) = entry {
                let v = if hi == lo { T::zero() } else { hi - lo };
                keep(
                    &mut best,
                    v,
                    |v, b| v > b,
                    || format!("a={a}; high=[{hi_w}]; low=[{lo_w}]"),
                );
            }
        }
    }
    best.ok_or_else(|| Error::Conditioning {
        event: format!("every past of beta_{{{j},{k}}}"),
    })
}

/// `β_{j,k}` for `0 <= j <= k <= depth`, with the partial sums `Γ_{j,k}`.
#[derive(Debug, Clone)]
pub struct BetaTable<T> {
    depth: usize,
    entries: Vec<Vec<Extremum<T>>>,
}

/// Estimated cylinder visits of [`BetaTable::compute`] at `depth`.
pub fn beta_table_cost(alphabet_size: usize, order: usize, depth: usize) -> u128 {
    let a = alphabet_size as u128;
    let s = a * a;
    (0..=depth)
        .flat_map(|k| (0..=k).map(move |j| (j, k)))
        .fold(0u128, |acc, (j, k)| {
            let events = a
                .saturating_pow(j as u32)
                .saturating_mul(s.saturating_pow((k - j) as u32));
            let q = a
                .saturating_pow(j as u32)
                .saturating_mul(s.saturating_pow(order.saturating_sub(k) as u32 + 1));
            acc.saturating_add(events.saturating_mul(q))
        })
}

impl<T: Real> BetaTable<T> {
    /// Refuses with [`Error::Cost`] when [`beta_table_cost`] exceeds
    /// `budget.max_work`.
    pub fn compute(model: &Model<T>, depth: usize, budget: &Budget) -> Result<Self> {
        budget.check_work(beta_table_cost(
            model.alphabet().size(),
            model.order(),
            depth,
        ))?;
        let mut entries = Vec::with_capacity(depth);
        for k in 0..=depth {
            let row = (0..=k)
                .map(|j| compute_beta(model, j, k, budget))
                .collect::<Result<Vec<_>>>()?;
            entries.push(row);
        }
        Ok(Self { depth, entries })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self, j: usize, k: usize) -> &Extremum<T> {
        assert!(
            j <= k && k <= self.depth,
            "beta_{{{j},{k}}} outside the table"
        );
        &self.entries[k][j]
    }

    /// `Γ_{j,k} = Σ_{ℓ=1}^{j} β_{ℓ,k}`; zero for `j = 0`.
    pub fn gamma(&self, j: usize, k: usize) -> T {
        assert!(
            j <= k && k <= self.depth,
            "gamma_{{{j},{k}}} outside the table"
        );
        csum((1..=j).map(|l| self.beta(l, k).value))
    }
}

/// `Γ_{j,k}` computed from scratch.
pub fn compute_gamma<T: Real>(model: &Model<T>, j: usize, k: usize, budget: &Budget) -> Result<T> {
    if j > k {
        return Err(Error::Parameter(format!(
            "gamma needs k >= j, got j={j}, k={k}"
        )));
    }
    let terms = (1..=j)
        .map(|l| compute_beta(model, l, k, budget).map(|e| e.value))
        .collect::<Result<Vec<T>>>()?;
    Ok(csum(terms))
}

/// `R(α, k, ρ)` given `Γ = Γ_{k,k}`.
pub fn compute_r<T: Real>(alpha: T, rho: T, gamma_kk: T) -> Result<T> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1]")));
    }
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::Parameter(format!("rho {rho} outside [0, 1)")));
    }
    if !(gamma_kk >= T::zero()) {
        return Err(Error::Parameter(format!("gamma {gamma_kk} must be >= 0")));
    }
    let one = T::one();
    let two = T::of(2.0);
    let e1 = gamma_kk.exp();
    let e2 = (two * gamma_kk).exp();
    let gap = one - rho;
    let middle = e2 * (two * gamma_kk.exp_m1() + (two * gamma_kk).exp_m1()) / (alpha * gap * gap);
    Ok(two + middle + two * e1 * gamma_kk.exp_m1())
}

/// Outcome of testing the sufficient condition for `ρ < 1` based on the
/// conditional discrepancy probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCheck {
    /// `sup P(X₀ ≠ Y₀ | Z_{-k}^{-1}=η)` over `k <= m`.
    pub discrepancy: f64,
    pub discrepancy_witness: String,
    pub alpha: f64,
    pub rho: f64,
    pub premise: bool,
    pub conclusion: bool,
    pub implication_holds: bool,
}

pub fn check_discrepancy_implies_blurring<T: Real>(
    model: &Model<T>,
    budget: &Budget,
) -> Result<DiscrepancyCheck> {
    let alphabet = model.alphabet();
    let mut best: Option<Extremum<T>> = None;
    for k in 0..=model.order() {
        for eta in words(alphabet.pair_count(), k) {
            let past = ObservationPattern::pair_history(&pair_word(model, &eta));
            let Some(law) = positive(conditional_query(model, &past, Target::Z, None, budget))?
            else {
                continue;
            };
            let off = csum(
                law.probabilities
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| {
                        let pair = alphabet.pair(*p);
                        pair.x != pair.y
                    })
                    .map(|(_, &v)| v),
            );
            keep(
                &mut best,
                off,
                |v, b| v > b,
                || format!("k={k}; past=[{past}]"),
            );
        }
    }
    let s = best.expect("the empty past has mass one");
    let alpha = compute_alpha(model, budget)?.value.as_f64();
    let rho = compute_rho(model, budget)?.value.as_f64();
    let discrepancy = s.value.as_f64();
    let premise = discrepancy < alpha;
    let conclusion = rho < 1.0;
    Ok(DiscrepancyCheck {
        discrepancy,
        discrepancy_witness: s.witness,
        alpha,
        rho,
        premise,
        conclusion,
        implication_holds: !premise || conclusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witnessed {
    #[serde(with = "crate::json::nullable")]
    pub value: f64,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub j: usize,
    pub k: usize,
    #[serde(with = "crate::json::nullable")]
    pub value: f64,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub j: usize,
    pub k: usize,
    #[serde(with = "crate::json::nullable")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REntry {
    pub k: usize,
    #[serde(with = "crate::json::nullable")]
    pub gamma_kk: f64,
    #[serde(with = "crate::json::nullable")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    pub rho: Witnessed,
    pub alpha: Witnessed,
    pub beta: Vec<BetaEntry>,
    pub gamma: Vec<GammaEntry>,
    pub r: Vec<REntry>,
}

/// `ρ`, `α`, then `β_{ℓ,k'}` and `Γ_{ℓ,k'}` for `1 <= ℓ <= min(j, k')`,
/// `k' <= k`, and `R(α, k', ρ)` for `k' <= k`.
///
/// `R` is reported as NaN (`null`) when `ρ` or `α` fall outside its domain.
pub fn quantity_report<T: Real>(
    model: &Model<T>,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<QuantityReport> {
    if j > k {
        return Err(Error::Parameter(format!("need j <= k, got j={j}, k={k}")));
    }
    let rho = compute_rho(model, budget)?;
    let alpha = compute_alpha(model, budget)?;
    let table = BetaTable::compute(model, k, budget)?;
    let mut beta = Vec::new();
    let mut gamma = Vec::new();
    for kk in 1..=k {
        for l in 1..=j.min(kk) {
            let b = table.beta(l, kk);
            beta.push(BetaEntry {
                j: l,
                k: kk,
                value: b.value.as_f64(),
                witness: b.witness.clone(),
            });
            gamma.push(GammaEntry {
                j: l,
                k: kk,
                value: table.gamma(l, kk).as_f64(),
            });
        }
    }
    let r = (0..=k)
        .map(|kk| {
            let g = table.gamma(kk, kk);
            let value = compute_r(alpha.value, rho.value, g).map_or(f64::NAN, Real::as_f64);
            REntry {
                k: kk,
                gamma_kk: g.as_f64(),
                value,
            }
        })
        .collect();
    Ok(QuantityReport {
        rho: Witnessed {
            value: rho.value.as_f64(),
            witness: rho.witness,
        },
        alpha: Witnessed {
            value: alpha.value.as_f64(),
            witness: alpha.witness,
        },
        beta,
        gamma,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{binary_symmetric_channel, random_model, RandomModelSpec};

    fn star() -> Model<f64> {
        Model::new(binary_symmetric_channel(0.7f64, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn star_values() {
        let m = star();
        let b = Budget::default();
        assert!((compute_rho(&m, &b).unwrap().value - 0.1).abs() < 1e-12);
        let alpha = compute_alpha(&m, &b).unwrap();
        assert!((alpha.value - 0.3).abs() < 1e-12);
        assert!(compute_beta(&m, 1, 3, &b).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn beta_diagonal_is_zero() {
        let m = star();
        assert_eq!(
            compute_beta(&m, 2, 2, &Budget::default()).unwrap().value,
            0.0
        );
        assert!(compute_beta(&m, 3, 2, &Budget::default()).is_err());
        // Without a recent X past the deep pair past matters.
        let b0 = compute_beta(&m, 0, 1, &Budget::default()).unwrap().value;
        assert!((b0 - (0.7f64 / 0.3).ln()).abs() < 1e-12);
    }

    #[test]
    fn r_domain() {
        assert_eq!(compute_r(0.5, 0.1, 0.0).unwrap(), 2.0);
        assert!(compute_r(0.0, 0.1, 0.0).is_err());
        assert!(compute_r(0.5, 1.0, 0.0).is_err());
        assert!(compute_r(0.5, 0.1, -0.1).is_err());
    }

    #[test]
    fn gamma_matches_table() {
        let m = Model::new(random_model::<f64>(&RandomModelSpec::corpus(1)).unwrap()).unwrap();
        let b = Budget::default();
        let table = BetaTable::compute(&m, 3, &b).unwrap();
        let direct = compute_gamma(&m, 2, 3, &b).unwrap();
        assert!((table.gamma(2, 3) - direct).abs() < 1e-15);
        assert_eq!(table.gamma(0, 3), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let m = Model::new(binary_symmetric_channel(0.7f32, 0.1).unwrap()).unwrap();
        let b = Budget::default();
        assert!((compute_rho(&m, &b).unwrap().value - 0.1).abs() < 1e-6);
        assert!((compute_alpha(&m, &b).unwrap().value - 0.3).abs() < 1e-6);
    }
}
