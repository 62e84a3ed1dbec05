use super::{Budget, ConditionalLaw, ObservationPattern, Slot, Target};
use crate::error::{Error, Result};
use crate::model::{Model, PairSymbol};
use crate::scalar::{CompensatedSum, Real};

/// Probability of the cylinder `Z_{-k} .. Z_{-1} = z`.
///
/// For `k >= m` this is `π(first m-block)` times the kernel entries of the
/// remaining steps; for `k < m` it is the `π`-mass of the contexts whose
/// newest `k` symbols equal `z`.
pub fn cylinder_probability<T: Real>(model: &Model<T>, z: &[PairSymbol]) -> Result<T> {
    let alphabet = model.alphabet();
    for p in z {
        alphabet.check_symbol(p.x)?;
        alphabet.check_symbol(p.y)?;
    }
    let m = model.order();
    let space = model.space();
    let idx: Vec<usize> = z.iter().map(|&p| alphabet.pair_index(p)).collect();
    if z.is_empty() {
        return Ok(T::one());
    }
    if z.len() < m {
        let s = alphabet.pair_count();
        let suffix = space.pack_indices(&[vec![0; m - z.len()], idx.clone()].concat());
        let modulus = s.pow(z.len() as u32);
        let mut acc = CompensatedSum::new();
        for c in (0..space.count()).filter(|c| c % modulus == suffix) {
            acc.add(model.law().get(c));
        }
        return Ok(acc.value());
    }
    let mut ctx = space.pack_indices(&idx[..m]);
    let mut mass = model.law().get(ctx);
    for &p in &idx[m..] {
        mass = mass * model.kernel().prob(ctx, p);
        ctx = space.shift(ctx, p);
    }
    Ok(mass)
}

/// Visits every full cylinder consistent with `slots` (left-padded with free
/// slots up to the model order) and hands `(newest pair, mass)` to `leaf`.
fn for_each_cylinder<T: Real, F: FnMut(usize, T)>(
    model: &Model<T>,
    slots: &[Slot],
    budget: &Budget,
    mut leaf: F,
) -> Result<()> {
    let alphabet = model.alphabet();
    let m = model.order();
    let mut padded = vec![Slot::Free; m.saturating_sub(slots.len())];
    padded.extend_from_slice(slots);
    for s in &padded {
        s.check(alphabet)?;
    }
    let estimated = padded
        .iter()
        .try_fold(1u128, |acc, s| {
            acc.checked_mul(s.option_count(alphabet) as u128)
        })
        .unwrap_or(u128::MAX);
    budget.check_query(estimated)?;

    let options: Vec<Vec<usize>> = padded.iter().map(|s| s.options(alphabet)).collect();
    let space = model.space();
    let (head, tail) = options.split_at(m);

    // Odometer over contexts consistent with the first m slots.
    let mut digits = vec![0usize; m];
    let mut ctx_pairs = vec![0usize; m];
    'contexts: loop {
        for (i, d) in digits.iter().enumerate() {
            ctx_pairs[i] = head[i][*d];
        }
        let ctx = space.pack_indices(&ctx_pairs);
        let mass = model.law().get(ctx);
        if mass > T::zero() {
            if tail.is_empty() {
                leaf(ctx_pairs[m - 1], mass);
            } else {
                descend(model, tail, ctx, mass, &mut leaf);
            }
        }
        for i in (0..m).rev() {
            digits[i] += 1;
            if digits[i] < head[i].len() {
                continue 'contexts;
            }
            digits[i] = 0;
        }
        break;
    }
    Ok(())
}

fn descend<T: Real, F: FnMut(usize, T)>(
    model: &Model<T>,
    rest: &[Vec<usize>],
    ctx: usize,
    mass: T,
    leaf: &mut F,
) {
    let row = model.kernel().row(ctx);
    let (here, later) = rest.split_first().expect("non-empty remainder");
    for &p in here {
        let next = mass * row[p];
        if !(next > T::zero()) {
            continue;
        }
        if later.is_empty() {
            leaf(p, next);
        } else {
            descend(model, later, model.space().shift(ctx, p), next, leaf);
        }
    }
}

/// Probability of the event described by `pattern`, as the sum over every
/// consistent full pair cylinder.
pub fn event_probability<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
    budget: &Budget,
) -> Result<T> {
    if pattern.depth() == 0 {
        return Ok(T::one());
    }
    let mut acc = CompensatedSum::new();
    for_each_cylinder(model, &pattern.slots, budget, |_, mass| acc.add(mass))?;
    Ok(acc.value())
}

/// Unnormalized masses `P(pattern, extra, target = o)` for every outcome `o`.
pub fn joint_masses<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
    target: Target,
    extra: Option<Slot>,
    budget: &Budget,
) -> Result<Vec<T>> {
    let alphabet = model.alphabet();
    let mut slots = pattern.slots.clone();
    slots.push(extra.unwrap_or(Slot::Free));
    let mut bins = vec![CompensatedSum::new(); target.dimension(alphabet)];
    for_each_cylinder(model, &slots, budget, |p, mass| {
        bins[target.outcome(alphabet, alphabet.pair(p))].add(mass);
    })?;
    Ok(bins.iter().map(CompensatedSum::value).collect())
}

/// Exact law of `target` given the pattern on `Z_{-k} .. Z_{-1}` and the
/// optional constraint `extra` on `Z₀`.
pub fn conditional_query<T: Real>(
    model: &Model<T>,
    pattern: &ObservationPattern,
    target: Target,
    extra: Option<Slot>,
    budget: &Budget,
) -> Result<ConditionalLaw<T>> {
    let masses = joint_masses(model, pattern, target, extra, budget)?;
    let mut total = CompensatedSum::new();
    total.extend(masses.iter().copied());
    let event_mass = total.value();
    if !(event_mass > T::zero()) {
        let mut event = pattern.to_string();
        if let Some(e) = extra {
            event.push_str(&format!(" | Z0: {e}"));
        }
        return Err(Error::Conditioning { event });
    }
    Ok(ConditionalLaw {
        target,
        probabilities: masses.into_iter().map(|v| v / event_mass).collect(),
        event_mass,
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
    fn cylinder_examples() {
        let m = star();
        assert_eq!(cylinder_probability(&m, &[]).unwrap(), 1.0);
        let z00 = PairSymbol::new(0, 0);
        assert!((cylinder_probability(&m, &[z00]).unwrap() - 0.45).abs() < 1e-13);
        assert!((cylinder_probability(&m, &[z00, z00]).unwrap() - 0.2835).abs() < 1e-13);
    }

    #[test]
    fn event_examples() {
        let m = star();
        let b = Budget::default();
        let all = event_probability(&m, &ObservationPattern::free(3), &b).unwrap();
        assert!((all - 1.0).abs() < 1e-14);
        let x0 = event_probability(&m, &"x=0".parse().unwrap(), &b).unwrap();
        assert!((x0 - 0.5).abs() < 1e-13);
        let y1 = event_probability(&m, &"y=1".parse().unwrap(), &b).unwrap();
        assert!((y1 - 0.5).abs() < 1e-13);
    }

    #[test]
    fn conditional_examples() {
        let m = star();
        let b = Budget::default();
        for past in ["xy=0,0", "xy=0,1", "xy=1,0", "xy=1,1"] {
            let law =
                conditional_query(&m, &past.parse().unwrap(), Target::Y, Some(Slot::X(0)), &b)
                    .unwrap();
            assert!((law.prob(0) - 0.9).abs() < 1e-13);
            assert!((law.prob(1) - 0.1).abs() < 1e-13);
        }
        let law = conditional_query(&m, &"x=0".parse().unwrap(), Target::X, None, &b).unwrap();
        assert!((law.prob(0) - 0.7).abs() < 1e-13);
    }

    #[test]
    fn zero_mass_conditioning_is_an_error() {
        let m = Model::new(binary_symmetric_channel(0.7f64, 0.0).unwrap()).unwrap();
        let err = conditional_query(
            &m,
            &"xy=0,1".parse().unwrap(),
            Target::X,
            None,
            &Budget::default(),
        );
        assert!(matches!(err, Err(Error::Conditioning { .. })));
    }

    #[test]
    fn budget_refuses_deep_queries() {
        let m = star();
        let b = Budget::default();
        assert!(event_probability(&m, &ObservationPattern::free(8), &b).is_ok());
        assert!(matches!(
            conditional_query(&m, &ObservationPattern::free(9), Target::X, None, &b),
            Err(Error::Cost { .. })
        ));
        // Constrained slots are cheap.
        let deep = ObservationPattern::y_history(&[0; 12]);
        assert!(conditional_query(&m, &deep, Target::X, None, &b).is_ok());
    }

    #[test]
    fn higher_order_short_cylinders_marginalize_the_law() {
        let spec = RandomModelSpec {
            seed: 3,
            alphabet_size: 2,
            order: 2,
            floor: 0.02,
            fidelity: 0.7,
        };
        let m = Model::new(random_model::<f64>(&spec).unwrap()).unwrap();
        let z = [PairSymbol::new(1, 0)];
        let direct = cylinder_probability(&m, &z).unwrap();
        let summed = event_probability(
            &m,
            &ObservationPattern::pair_history(&z),
            &Budget::default(),
        )
        .unwrap();
        assert!((direct - summed).abs() < 1e-15);
    }
}
