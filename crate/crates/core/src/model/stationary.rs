use std::collections::VecDeque;

use super::kernel::{validate_kernel, CoupledKernel};
use crate::error::{Error, Result};
use crate::scalar::{csum, CompensatedSum, Real};

/// Stop once the L1 increment of an iteration falls below this.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-14;
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Invariance residual every returned law satisfies (for `f64`).
pub const INVARIANCE_TOLERANCE: f64 = 1e-12;

/// Invariant law of the context chain induced by a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw<T> {
    pi: Vec<T>,
    residual: T,
    iterations: usize,
}

impl<T: Real> StationaryLaw<T> {
    pub fn probabilities(&self) -> &[T] {
        &self.pi
    }

    pub fn get(&self, context: usize) -> T {
        self.pi[context]
    }

    /// `‖π·T − π‖₁` at the returned law.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// One application of the context-shift transition matrix, `π ↦ π·T`.
pub fn shift_step<T: Real>(kernel: &CoupledKernel<T>, pi: &[T]) -> Vec<T> {
    let space = kernel.space();
    let mut acc = vec![CompensatedSum::new(); space.count()];
    for (c, &mass) in pi.iter().enumerate() {
        if mass == T::zero() {
            continue;
        }
        for (p, &q) in kernel.row(c).iter().enumerate() {
            acc[space.shift(c, p)].add(mass * q);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// `‖π·T − π‖₁`.
pub fn invariance_residual<T: Real>(kernel: &CoupledKernel<T>, pi: &[T]) -> T {
    let next = shift_step(kernel, pi);
    csum(next.iter().zip(pi).map(|(&a, &b)| (a - b).abs()))
}

/// Computes the stationary law by power iteration from the uniform law.
///
/// Strictly positive kernels always have a unique invariant law. Kernels
/// with zero entries are accepted only when their support graph has a
/// single closed class and that class is aperiodic; otherwise the
/// invariant law is not unique (or power iteration does not converge) and
/// a parameter error is returned.
pub fn stationary_law<T: Real>(kernel: &CoupledKernel<T>) -> Result<StationaryLaw<T>> {
    let report = validate_kernel(kernel);
    if !report.is_valid() {
        return Err(Error::Parameter(format!(
            "kernel rows are not distributions ({} row-sum violations, {} negative entries)",
            report.row_violations.len(),
            report.negative_entries
        )));
    }
    if !kernel.is_strictly_positive() {
        check_unique_aperiodic(kernel)?;
    }

    let n = kernel.context_count();
    let threshold = T::of(CONVERGENCE_THRESHOLD).max(T::epsilon() * T::of(64.0));
    let mut pi = vec![T::one() / T::of(n as f64); n];
    let mut increment = T::infinity();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = shift_step(kernel, &pi);
        let total = csum(next.iter().copied());
        for v in &mut next {
            *v = *v / total;
        }
        increment = csum(next.iter().zip(&pi).map(|(&a, &b)| (a - b).abs()));
        pi = next;
        if increment < threshold {
            break;
        }
    }
    if !(increment < threshold) {
        return Err(Error::Numerical {
            message: format!("power iteration did not converge in {MAX_ITERATIONS} steps"),
            residual: increment.as_f64(),
        });
    }
    let residual = invariance_residual(kernel, &pi);
    Ok(StationaryLaw {
        pi,
        residual,
        iterations,
    })
}

fn check_unique_aperiodic<T: Real>(kernel: &CoupledKernel<T>) -> Result<()> {
    let space = kernel.space();
    let n = space.count();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|c| {
            let mut s: Vec<usize> = kernel
                .row(c)
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > T::zero())
                .map(|(p, _)| space.shift(c, p))
                .collect();
            s.dedup();
            s
        })
        .collect();
    let reach = |from: usize| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &succ[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    };

    // Any state reachable from state 0 that can return from everything it
    // reaches lies in a closed class.
    let from_zero = reach(0);
    let root = (0..n)
        .filter(|&v| from_zero[v])
        .find(|&v| {
            let r = reach(v);
            (0..n).filter(|&u| r[u]).all(|u| reach(u)[v])
        })
        .ok_or_else(|| Error::Parameter("support graph has no closed class".into()))?;

    // Unique closed class iff root is reachable from every state.
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, s) in succ.iter().enumerate() {
        for &v in s {
            pred[v].push(u);
        }
    }
    let mut back = vec![false; n];
    back[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &pred[u] {
            if !back[v] {
                back[v] = true;
                queue.push_back(v);
            }
        }
    }
    if back.iter().any(|&b| !b) {
        return Err(Error::Parameter(
            "kernel support has several closed classes; invariant law is not unique".into(),
        ));
    }

    // Period of the closed class via BFS levels.
    let class = reach(root);
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut period = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if !class[v] {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    if period != 1 {
        return Err(Error::Parameter(format!(
            "closed class of the kernel support is periodic (period {period})"
        )));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
