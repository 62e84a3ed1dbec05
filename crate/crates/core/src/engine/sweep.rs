use super::{ConditionalLaw, ObservationPattern, Slot, Target};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::{csum, CompensatedSum, Real};

/// Normalized joint law of the newest `m` pair symbols after absorbing the
/// pattern, plus the log of the pattern probability.
struct Filtered<T> {
    state: Vec<T>,
    log_mass: T,
}

fn run<T: Real>(model: &Model<T>, slots: &[Slot]) -> Result<Option<Filtered<T>>> {
    let alphabet = model.alphabet();
    let space = model.space();
    let m = model.order();
    let mut padded = vec![Slot::Free; m.saturating_sub(slots.len())];
    padded.extend_from_slice(slots);
    for s in &padded {
        s.check(alphabet)?;
    }
    let (head, tail) = padded.split_at(m);

    let mut state: Vec<T> = (0..space.count())
        .map(|c| {
            let pairs = space.unpack(c).slots;
            if pairs.iter().zip(head).all(|(p, s)| s.admits(*p)) {
                model.law().get(c)
            } else {
                T::zero()
            }
        })
        .collect();
    let mut log_mass = T::zero();
    let total = csum(state.iter().copied());
    if !(total > T::zero()) {
        return Ok(None);
    }
    state.iter_mut().for_each(|v| *v = *v / total);
    log_mass = log_mass + total.ln();

    let mut next = vec![CompensatedSum::new(); space.count()];
    for slot in tail {
        let options = slot.options(alphabet);
        next.iter_mut().for_each(|a| *a = CompensatedSum::new());
        for (c, &w) in state.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let row = model.kernel().row(c);
            for &p in &options {
                next[space.shift(c, p)].add(w * row[p]);
            }
        }
        for (s, a) in state.iter_mut().zip(&next) {
            *s = a.value();
        }
        let total = csum(state.iter().copied());
        if !(total > T::zero()) {
            return Ok(None);
        }
        state.iter_mut().for_each(|v| *v = *v / total);
        log_mass = log_mass + total.ln();
    }
    Ok(Some(Filtered { state, log_mass }))
}

/// Probability of the pattern event computed by the forward recursion.
pub fn sweep_event_probability<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
) -> Result<T> {
    if pattern.depth() == 0 {
        return Ok(T::one());
    }
    Ok(run(model, &pattern.slots)?.map_or(T::zero(), |f| f.log_mass.exp()))
}

/// Law of `Z₀` given an arbitrary pattern, by the forward recursion.
pub fn forward_predict<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
) -> Result<ConditionalLaw<T>> {
    let filtered = run(model, &pattern.slots)?.ok_or_else(|| Error::Conditioning {
        event: pattern.to_string(),
    })?;
    let width = model.alphabet().pair_count();
    let mut acc = vec![CompensatedSum::new(); width];
    for (c, &w) in filtered.state.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        for (p, &q) in model.kernel().row(c).iter().enumerate() {
            acc[p].add(w * q);
        }
    }
    let probs: Vec<T> = acc.iter().map(CompensatedSum::value).collect();
    let total = csum(probs.iter().copied());
    Ok(ConditionalLaw {
        target: Target::Z,
        probabilities: probs.into_iter().map(|v| v / total).collect(),
        event_mass: if pattern.depth() == 0 {
            T::one()
        } else {
            filtered.log_mass.exp()
        },
    })
}

/// `P(X₀ = · | Y_{-k} .. Y_{-1} = history)` by forward filtering.
pub fn forward_filter<T: Real>(model: &Model<T>, y_history: &[usize]) -> Result<ConditionalLaw<T>> {
    let law = forward_predict(model, &ObservationPattern::y_history(y_history))?;
    Ok(law.marginal(model.alphabet(), Target::X))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{conditional_query, event_probability, Budget};
    use crate::model::binary_symmetric_channel;

    fn star() -> Model<f64> {
        Model::new(binary_symmetric_channel(0.7f64, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn empty_history_gives_stationary_marginal() {
        let law = forward_filter(&star(), &[]).unwrap();
        assert!((law.prob(0) - 0.5).abs() < 1e-13);
        assert_eq!(law.event_mass, 1.0);
    }

    #[test]
    fn agrees_with_enumeration_on_star() {
        let m = star();
        let b = Budget::default();
        for hist in [vec![0], vec![0, 0, 0, 0, 0, 0], vec![1, 0, 1, 1]] {
            let fast = forward_filter(&m, &hist).unwrap();
            let slow = conditional_query(
                &m,
                &ObservationPattern::y_history(&hist),
                Target::X,
                None,
                &b,
            )
            .unwrap();
            for a in 0..2 {
                assert!((fast.prob(a) - slow.prob(a)).abs() < 1e-10);
            }
            assert!((fast.event_mass - slow.event_mass).abs() < 1e-13);
        }
    }

    #[test]
    fn sweep_event_matches_enumeration() {
        let m = star();
        let p: ObservationPattern = "x=0,*,xy=1,1,y=0".parse().unwrap();
        let a = sweep_event_probability(&m, &p).unwrap();
        let b = event_probability(&m, &p, &Budget::default()).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn long_histories_do_not_underflow() {
        let hist = vec![1; 2000];
        let law = forward_filter(&star(), &hist).unwrap();
        assert!((law.prob(0) + law.prob(1) - 1.0).abs() < 1e-12);
        assert!(law.prob(1) > 0.6 && law.prob(1) < 0.7);
    }
}
