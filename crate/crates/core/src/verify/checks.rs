use crate::engine::{
    conditional_query, event_probability, forward_predict, words, Budget, ObservationPattern, Slot,
    Target,
};
use crate::error::Result;
use crate::model::Model;
use crate::quantities::{pair_word, positive};
use crate::scalar::Real;

use super::{BoundCheck, Constants, Params, Relation};

/// Running extremum with the configuration that attained it.
pub(super) struct Track {
    best: Option<(f64, String)>,
    maximize: bool,
}

impl Track {
    pub(super) fn max() -> Self {
        Self {
            best: None,
            maximize: true,
        }
    }

    pub(super) fn min() -> Self {
        Self {
            best: None,
            maximize: false,
        }
    }

    pub(super) fn offer(&mut self, v: f64, witness: impl FnOnce() -> String) {
        let better = match &self.best {
            None => true,
            Some((b, _)) if self.maximize => v > *b,
            Some((b, _)) => v < *b,
        };
        if better {
            self.best = Some((v, witness()));
        }
    }

    pub(super) fn into_parts(self) -> Option<(f64, String)> {
        self.best
    }
}

/// Highest and lowest value per key, for log-ratio spreads.
struct Spread {
    hi: Track,
    lo: Track,
}

impl Spread {
    fn new() -> Self {
        Self {
            hi: Track::max(),
            lo: Track::min(),
        }
    }

    fn offer(&mut self, v: f64, witness: impl Fn() -> String) {
        self.hi.offer(v, &witness);
        self.lo.offer(v, &witness);
    }

    /// Feeds `hi - lo` into `into`, labelled with both configurations.
    fn close(self, label: &str, into: &mut Track) {
        if let (Some((hi, hi_w)), Some((lo, lo_w))) = (self.hi.into_parts(), self.lo.into_parts()) {
            let v = if hi == lo { 0.0 } else { hi - lo };
            into.offer(v, || format!("{label}; high=[{hi_w}]; low=[{lo_w}]"));
        }
    }
}

fn word_str(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn x_slots(w: &[usize]) -> Vec<Slot> {
    w.iter().map(|&a| Slot::X(a)).collect()
}

fn y_slots(w: &[usize]) -> Vec<Slot> {
    w.iter().map(|&b| Slot::Y(b)).collect()
}

fn law_f64<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
    target: Target,
    budget: &Budget,
) -> Result<Option<Vec<f64>>> {
    Ok(
        positive(conditional_query(model, pattern, target, None, budget))?
            .map(|l| l.probabilities.iter().map(|v| v.as_f64()).collect()),
    )
}

fn mass<T: Real>(model: &Model<T>, slots: Vec<Slot>, budget: &Budget) -> Result<f64> {
    Ok(event_probability(model, &ObservationPattern::new(slots), budget)?.as_f64())
}

/// `sup |P(Y₀=a | Y_{-j}^{-1}=w) - P(X₀=a | X_{-j}^{-1}=w)| <= ρ R(α,j,ρ)`,
/// and, when `ρR < α`, the ratio of the two within `1 ± ρR/α`.
pub fn check_blurred<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    budget: &Budget,
) -> Result<Vec<BoundCheck>> {
    let a_size = model.alphabet().size();
    let mut diff = Track::max();
    let mut ratio = Track::max();
    for w in words(a_size, j) {
        let Some(py) = law_f64(model, &ObservationPattern::y_history(&w), Target::Y, budget)?
        else {
            continue;
        };
        let Some(px) = law_f64(model, &ObservationPattern::x_history(&w), Target::X, budget)?
        else {
            continue;
        };
        for a in 0..a_size {
            let label = || format!("a={a}; w=[{}]", word_str(&w));
            diff.offer((py[a] - px[a]).abs(), label);
            ratio.offer((py[a] / px[a] - 1.0).abs(), label);
        }
    }
    let rr = c.rho * c.r(j);
    let params = Params::j(j);
    Ok(vec![
        BoundCheck::new("blurred_difference", params, Relation::Le, diff, rr, true),
        BoundCheck::new(
            "blurred_ratio",
            params,
            Relation::Le,
            ratio,
            rr / c.alpha,
            rr < c.alpha,
        ),
    ])
}

/// `sup |P(Y₀=a | Y-past) - P(X₀=a | Y-past)| <= ρ` by the forward sweep,
/// and the ratio `P(X₀=a | ·) / P(Y₀=a | ·)` within `1 ± ρ/(α - ρR)`.
pub fn check_predict<T: Real>(
    model: &Model<T>,
    c: &Constants,
    k: usize,
) -> Result<Vec<BoundCheck>> {
    let alphabet = model.alphabet();
    let mut diff = Track::max();
    let mut ratio = Track::max();
    for w in words(alphabet.size(), k) {
        let Some(law) = positive(forward_predict(model, &ObservationPattern::y_history(&w)))?
        else {
            continue;
        };
        let px = law.marginal(alphabet, Target::X);
        let py = law.marginal(alphabet, Target::Y);
        for a in 0..alphabet.size() {
            let (x, y) = (px.prob(a).as_f64(), py.prob(a).as_f64());
            let label = || format!("a={a}; w=[{}]", word_str(&w));
            diff.offer((y - x).abs(), label);
            ratio.offer((x / y - 1.0).abs(), label);
        }
    }
    let rr = c.rho * c.r(k);
    let params = Params::k(k);
    Ok(vec![
        BoundCheck::new(
            "predict_difference",
            params,
            Relation::Le,
            diff,
            c.rho,
            true,
        ),
        BoundCheck::new(
            "predict_ratio",
            params,
            Relation::Le,
            ratio,
            c.rho / (c.alpha - rr),
            rr < c.alpha,
        ),
    ])
}

/// The quantity of [`check_predict`]'s first part, by enumeration.
pub fn check_y_past_difference<T: Real>(
    model: &Model<T>,
    c: &Constants,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let a_size = model.alphabet().size();
    let mut diff = Track::max();
    for w in words(a_size, k) {
        let past = ObservationPattern::y_history(&w);
        let Some(py) = law_f64(model, &past, Target::Y, budget)? else {
            continue;
        };
        let Some(px) = law_f64(model, &past, Target::X, budget)? else {
            continue;
        };
        for a in 0..a_size {
            diff.offer((py[a] - px[a]).abs(), || {
                format!("a={a}; w=[{}]", word_str(&w))
            });
        }
    }
    Ok(BoundCheck::new(
        "y_past_difference",
        Params::k(k),
        Relation::Le,
        diff,
        c.rho,
        true,
    ))
}

/// `inf P(X₀=a | X_{-k}^{-1}=x) >= α`.
pub fn check_x_non_nullness<T: Real>(
    model: &Model<T>,
    c: &Constants,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let a_size = model.alphabet().size();
    let mut low = Track::min();
    for x in words(a_size, k) {
        let Some(p) = law_f64(model, &ObservationPattern::x_history(&x), Target::X, budget)? else {
            continue;
        };
        for (a, &v) in p.iter().enumerate() {
            low.offer(v, || format!("a={a}; x=[{}]", word_str(&x)));
        }
    }
    Ok(BoundCheck::new(
        "x_non_nullness",
        Params::k(k),
        Relation::Ge,
        low,
        c.alpha,
        true,
    ))
}

/// Log-ratio of `P(X₀=a | X_{-k}^{-1})` between two X pasts sharing their
/// last `j` symbols is at most `2 β_{j,k}`.
pub fn check_x_log_ratio<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let a_size = model.alphabet().size();
    let mut worst = Track::max();
    for recent in words(a_size, j) {
        let mut spreads: Vec<Spread> = (0..a_size).map(|_| Spread::new()).collect();
        for deep in words(a_size, k - j) {
            let x = [deep.as_slice(), recent.as_slice()].concat();
            let Some(p) = law_f64(model, &ObservationPattern::x_history(&x), Target::X, budget)?
            else {
                continue;
            };
            for (a, s) in spreads.iter_mut().enumerate() {
                s.offer(p[a].ln(), || word_str(&x));
            }
        }
        for (a, s) in spreads.into_iter().enumerate() {
            s.close(&format!("a={a}"), &mut worst);
        }
    }
    let rhs = 2.0 * c.beta(j, k);
    Ok(BoundCheck::new(
        "x_log_ratio",
        Params::jk(j, k),
        Relation::Le,
        worst,
        rhs,
        true,
    ))
}

/// Comparison bounds for the observed chain at depths `k > j >= 0`,
/// applicable when `ρ R(α,k,ρ) < α`:
/// the log-ratio of `P(Y₀=a | Y_{-k}^{-1})` between two pasts sharing their
/// last `j` symbols, and against `P(Y₀=a | Y_{-j}^{-1})`, are both at most
/// `2 ln((1+c)/(1-c)) + 2β_{j,k}` with `c = ρR/α`; and
/// `P(Y₀=a | Y_{-j}^{-1}) >= α - ρ R(α,j,ρ)`.
pub fn check_y_marginal<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<Vec<BoundCheck>> {
    let a_size = model.alphabet().size();
    let mut between = Track::max();
    let mut against = Track::max();
    let mut low = Track::min();
    for recent in words(a_size, j) {
        let Some(shallow) = law_f64(
            model,
            &ObservationPattern::y_history(&recent),
            Target::Y,
            budget,
        )?
        else {
            continue;
        };
        for (a, &v) in shallow.iter().enumerate() {
            low.offer(v, || format!("a={a}; w=[{}]", word_str(&recent)));
        }
        let mut spreads: Vec<Spread> = (0..a_size).map(|_| Spread::new()).collect();
        for deep in words(a_size, k - j) {
            let w = [deep.as_slice(), recent.as_slice()].concat();
            let Some(p) = law_f64(model, &ObservationPattern::y_history(&w), Target::Y, budget)?
            else {
                continue;
            };
            for a in 0..a_size {
                spreads[a].offer(p[a].ln(), || word_str(&w));
                against.offer((p[a].ln() - shallow[a].ln()).abs(), || {
                    format!(
                        "a={a}; w=[{}]; shallow=[{}]",
                        word_str(&w),
                        word_str(&recent)
                    )
                });
            }
        }
        for (a, s) in spreads.into_iter().enumerate() {
            s.close(&format!("a={a}"), &mut between);
        }
    }
    let cr = c.rho * c.r(k) / c.alpha;
    let applicable = cr < 1.0;
    let band = if applicable {
        2.0 * ((1.0 + cr) / (1.0 - cr)).ln() + 2.0 * c.beta(j, k)
    } else {
        f64::NAN
    };
    let floor = c.alpha - c.rho * c.r(j);
    let params = Params::jk(j, k);
    Ok(vec![
        BoundCheck::new(
            "y_deep_log_ratio",
            params,
            Relation::Le,
            between,
            band,
            applicable,
        ),
        BoundCheck::new(
            "y_shallow_log_ratio",
            params,
            Relation::Le,
            against,
            band,
            applicable,
        ),
        BoundCheck::new(
            "y_non_nullness",
            params,
            Relation::Ge,
            low,
            floor,
            applicable,
        ),
    ])
}

/// `inf P(X₀=a | Z_{-k}^{-j-1}=η, X_{-j}^{-1}=x) >= α` for `k >= j >= 1`.
pub fn check_mixed_non_nullness<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let alphabet = model.alphabet();
    let mut low = Track::min();
    for eta in words(alphabet.pair_count(), k - j) {
        for x in words(alphabet.size(), j) {
            let pattern =
                ObservationPattern::pair_history(&pair_word(model, &eta)).then(&x_slots(&x));
            let Some(p) = law_f64(model, &pattern, Target::X, budget)? else {
                continue;
            };
            for (a, &v) in p.iter().enumerate() {
                low.offer(v, || format!("a={a}; past=[{pattern}]"));
            }
        }
    }
    Ok(BoundCheck::new(
        "mixed_non_nullness",
        Params::jk(j, k),
        Relation::Ge,
        low,
        c.alpha,
        true,
    ))
}

/// Replacing the X past beyond depth `j + 1` by the Y past changes
/// `P(X₀=x₀ | ·)` by at most `e^{β_{j+1,k}} - 1`: once with `Y` observed on
/// `-k..-j-1`, once on `-k..-j-2`.
pub fn check_blurred_x_conditional<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<Vec<BoundCheck>> {
    let a_size = model.alphabet().size();
    let cut = k - j - 1; // slot index of time -j-1
    let mut with_pair = Track::max();
    let mut without = Track::max();
    for x in words(a_size, k) {
        let Some(reference) =
            law_f64(model, &ObservationPattern::x_history(&x), Target::X, budget)?
        else {
            continue;
        };
        for w in words(a_size, k - j) {
            let mut slots = y_slots(&w[..cut]);
            slots.push(Slot::pair(x[cut], w[cut]));
            slots.extend(x_slots(&x[cut + 1..]));
            let first = ObservationPattern::new(slots);
            if let Some(p) = law_f64(model, &first, Target::X, budget)? {
                for a in 0..a_size {
                    with_pair.offer((p[a] - reference[a]).abs(), || {
                        format!("a={a}; past=[{first}]; x=[{}]", word_str(&x))
                    });
                }
            }
            if w[cut] != 0 {
                // The second form does not read w[cut].
                continue;
            }
            let mut slots = y_slots(&w[..cut]);
            slots.extend(x_slots(&x[cut..]));
            let second = ObservationPattern::new(slots);
            if let Some(p) = law_f64(model, &second, Target::X, budget)? {
                for a in 0..a_size {
                    without.offer((p[a] - reference[a]).abs(), || {
                        format!("a={a}; past=[{second}]; x=[{}]", word_str(&x))
                    });
                }
            }
        }
    }
    let rhs = c.beta(j + 1, k).exp_m1();
    let params = Params::jk(j, k);
    Ok(vec![
        BoundCheck::new(
            "x_given_y_deep_past",
            params,
            Relation::Le,
            with_pair,
            rhs,
            true,
        ),
        BoundCheck::new(
            "x_given_y_deeper_past",
            params,
            Relation::Le,
            without,
            rhs,
            true,
        ),
    ])
}

/// `P(Y_{-j-1}=w_{-j-1} | X_{-j}^{-1}=w, Y_{-k}^{-j-2}=w) >= (1-ρ) α e^{-Γ_{j,k}}`
/// for `k > j + 1`.
pub fn check_hidden_y_lower<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let a_size = model.alphabet().size();
    let cut = k - j - 1;
    let mut low = Track::min();
    for deep in words(a_size, cut) {
        for recent in words(a_size, j) {
            let masses = (0..a_size)
                .map(|b| {
                    let mut slots = y_slots(&deep);
                    slots.push(Slot::Y(b));
                    slots.extend(x_slots(&recent));
                    mass(model, slots, budget)
                })
                .collect::<Result<Vec<f64>>>()?;
            let total: f64 = masses.iter().sum();
            if !(total > 0.0) {
                continue;
            }
            for (b, &m) in masses.iter().enumerate() {
                low.offer(m / total, || {
                    format!(
                        "y_deep=[{}]; y_hidden={b}; x_recent=[{}]",
                        word_str(&deep),
                        word_str(&recent)
                    )
                });
            }
        }
    }
    let rhs = (1.0 - c.rho) * c.alpha * (-c.gamma(j, k)).exp();
    Ok(BoundCheck::new(
        "hidden_y_lower",
        Params::jk(j, k),
        Relation::Ge,
        low,
        rhs,
        true,
    ))
}

/// Discrepancy at the hidden time `-j-1`, for `k > j >= 0`:
/// `P(X_{-j-1} ≠ w_{-j-1} | X_{-j}^{-1}=w, Y_{-k}^{-j-1}=w) <= ρ e^{2Γ_{j,k}} / (α (1-ρ)²)`
/// and `P(Y_{-j-1} ≠ w_{-j-1} | X_{-j-1}^{-1}=w, Y_{-k}^{-j-2}=w) <= ρ e^{Γ_{j,k}}`.
pub fn check_hidden_discrepancy<T: Real>(
    model: &Model<T>,
    c: &Constants,
    j: usize,
    k: usize,
    budget: &Budget,
) -> Result<Vec<BoundCheck>> {
    let a_size = model.alphabet().size();
    let cut = k - j - 1;
    let mut hidden_x = Track::max();
    let mut hidden_y = Track::max();
    for deep in words(a_size, cut) {
        for recent in words(a_size, j) {
            for v in 0..a_size {
                let at = |s: Slot| -> Result<f64> {
                    let mut slots = y_slots(&deep);
                    slots.push(s);
                    slots.extend(x_slots(&recent));
                    mass(model, slots, budget)
                };
                let label = || {
                    format!(
                        "y_deep=[{}]; w_hidden={v}; x_recent=[{}]",
                        word_str(&deep),
                        word_str(&recent)
                    )
                };
                let xs = (0..a_size)
                    .map(|x| at(Slot::pair(x, v)))
                    .collect::<Result<Vec<f64>>>()?;
                let total: f64 = xs.iter().sum();
                if total > 0.0 {
                    hidden_x.offer((total - xs[v]) / total, label);
                }
                let ys = (0..a_size)
                    .map(|y| at(Slot::pair(v, y)))
                    .collect::<Result<Vec<f64>>>()?;
                let total: f64 = ys.iter().sum();
                if total > 0.0 {
                    hidden_y.offer((total - ys[v]) / total, label);
                }
            }
        }
    }
    let g = c.gamma(j, k);
    let gap = 1.0 - c.rho;
    let params = Params::jk(j, k);
    Ok(vec![
        BoundCheck::new(
            "hidden_x_discrepancy",
            params,
            Relation::Le,
            hidden_x,
            c.rho * (2.0 * g).exp() / (c.alpha * gap * gap),
            true,
        ),
        BoundCheck::new(
            "hidden_y_discrepancy",
            params,
            Relation::Le,
            hidden_y,
            c.rho * g.exp(),
            true,
        ),
    ])
}

/// Diagnostic: `sup |P(X₀=a | Y_{-k}^{-1}=w) - P(X₀=a | X_{-k}^{-1}=w)|`
/// against the sum of the per-depth terms a telescoping argument over the
/// hidden times `-1..-k` produces.
pub fn telescoping_terms<T: Real>(
    model: &Model<T>,
    c: &Constants,
    k: usize,
    budget: &Budget,
) -> Result<BoundCheck> {
    let a_size = model.alphabet().size();
    let mut diff = Track::max();
    for w in words(a_size, k) {
        let Some(from_y) = law_f64(model, &ObservationPattern::y_history(&w), Target::X, budget)?
        else {
            continue;
        };
        let Some(from_x) = law_f64(model, &ObservationPattern::x_history(&w), Target::X, budget)?
        else {
            continue;
        };
        for a in 0..a_size {
            diff.offer((from_y[a] - from_x[a]).abs(), || {
                format!("a={a}; w=[{}]", word_str(&w))
            });
        }
    }
    let gap = 1.0 - c.rho;
    let sum: f64 = (0..k)
        .map(|j| {
            let g = c.gamma(j, k);
            let b = c.beta(j + 1, k);
            c.rho * (2.0 * g).exp() * (2.0 * b.exp_m1() + (2.0 * b).exp_m1())
                / (c.alpha * gap * gap)
                + 2.0 * c.rho * g.exp() * b.exp_m1()
        })
        .sum();
    Ok(BoundCheck::new(
        "x_given_y_telescoping",
        Params::k(k),
        Relation::Le,
        diff,
        sum,
        true,
    ))
}
