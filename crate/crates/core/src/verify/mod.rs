//! Exhaustive numerical certification of the comparison inequalities
//! between the reference chain `X` and the observed chain `Y`.
//!
//! Each check scans every positive-mass conditioning configuration at the
//! requested depths and reports the extremal left-hand side, the bound,
//! the slack and the configuration attaining the extremum. A check whose
//! side condition fails is reported with `applicable = false` and holds
//! vacuously.

mod checks;

pub use checks::{
    check_blurred, check_blurred_x_conditional, check_hidden_discrepancy, check_hidden_y_lower,
    check_mixed_non_nullness, check_predict, check_x_log_ratio, check_x_non_nullness,
    check_y_marginal, check_y_past_difference, telescoping_terms,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Budget;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quantities::{beta_table_cost, compute_alpha, compute_r, compute_rho, BetaTable};
use crate::scalar::Real;

use checks::Track;

/// Slack allowance for an inequality verdict.
pub const VERDICT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Params {
    pub fn j(j: usize) -> Self {
        Self {
            j: Some(j),
            k: None,
        }
    }

    pub fn k(k: usize) -> Self {
        Self {
            j: None,
            k: Some(k),
        }
    }

    pub fn jk(j: usize, k: usize) -> Self {
        Self {
            j: Some(j),
            k: Some(k),
        }
    }
}

/// One verified inequality `lhs <= rhs` (or `lhs >= rhs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub params: Params,
    pub relation: Relation,
    #[serde(with = "crate::json::nullable")]
    pub lhs: f64,
    #[serde(with = "crate::json::nullable")]
    pub rhs: f64,
    /// `rhs - lhs` for `<=`, `lhs - rhs` for `>=`; null when inapplicable.
    #[serde(with = "crate::json::nullable")]
    pub slack: f64,
    pub holds: bool,
    pub applicable: bool,
    pub witness: String,
}

impl BoundCheck {
    fn new(
        name: &str,
        params: Params,
        relation: Relation,
        lhs: Track,
        rhs: f64,
        applicable: bool,
    ) -> Self {
        let (lhs, witness) = lhs
            .into_parts()
            .unwrap_or((f64::NAN, "no positive-mass conditioning event".into()));
        let rhs = if rhs.is_finite() { rhs } else { f64::NAN };
        let slack = match (applicable, relation) {
            (false, _) => f64::NAN,
            (true, Relation::Le) => rhs - lhs,
            (true, Relation::Ge) => lhs - rhs,
        };
        let holds = !applicable || lhs.is_nan() || slack >= -VERDICT_TOLERANCE;
        Self {
            name: name.into(),
            params,
            relation,
            lhs,
            rhs,
            slack,
            holds,
            applicable,
            witness,
        }
    }

    pub fn violated(&self) -> bool {
        !self.holds
    }
}

/// `ρ`, `α` and the `β` table a suite run needs, in `f64`.
#[derive(Debug, Clone)]
pub struct Constants {
    pub rho: f64,
    pub alpha: f64,
    betas: Vec<Vec<f64>>,
}

impl Constants {
    /// Computes the constants up to `depth`, refusing models where `ρ >= 1`
    /// or `α = 0`.
    pub fn compute<T: Real>(model: &Model<T>, depth: usize, budget: &Budget) -> Result<Self> {
        let rho = compute_rho(model, budget)?.value.as_f64();
        let alpha = compute_alpha(model, budget)?.value.as_f64();
        if !(rho < 1.0 && alpha > 0.0) {
            return Err(Error::Parameter(format!(
                "hypotheses fail: need rho < 1 and alpha > 0, measured rho = {rho}, alpha = {alpha}"
            )));
        }
        let table = BetaTable::compute(model, depth, budget)?;
        let betas = (0..=depth)
            .map(|k| (0..=k).map(|j| table.beta(j, k).value.as_f64()).collect())
            .collect();
        Ok(Self { rho, alpha, betas })
    }

    pub fn depth(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn beta(&self, j: usize, k: usize) -> f64 {
        self.betas[k][j]
    }

    pub fn gamma(&self, j: usize, k: usize) -> f64 {
        (1..=j).map(|l| self.beta(l, k)).sum()
    }

    /// `R(α, k, ρ)`.
    pub fn r(&self, k: usize) -> f64 {
        compute_r(self.alpha, self.rho, self.gamma(k, k)).expect("constants were validated")
    }
}

/// One unit of suite work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Blurred(usize),
    Predict(usize),
    YPast(usize),
    XNonNull(usize),
    XLogRatio(usize, usize),
    YMarginal(usize, usize),
    Mixed(usize, usize),
    BlurredX(usize, usize),
    HiddenY(usize, usize),
    HiddenDiscrepancy(usize, usize),
    Telescoping(usize),
}

impl Task {
    fn all(depth: usize) -> Vec<Task> {
        let mut tasks = Vec::new();
        let pairs = |lo_gap: usize| -> Vec<(usize, usize)> {
            (0..=depth)
                .flat_map(|k| {
                    (0..=k)
                        .filter(move |j| j + lo_gap <= k)
                        .map(move |j| (j, k))
                })
                .collect()
        };
        tasks.extend((0..=depth).map(Task::Blurred));
        tasks.extend((0..=depth).map(Task::Predict));
        tasks.extend((0..=depth).map(Task::YPast));
        tasks.extend((0..=depth).map(Task::XNonNull));
        tasks.extend(
            pairs(0)
                .into_iter()
                .filter(|&(j, _)| j >= 1)
                .map(|(j, k)| Task::XLogRatio(j, k)),
        );
        tasks.extend(pairs(1).into_iter().map(|(j, k)| Task::YMarginal(j, k)));
        tasks.extend(
            pairs(0)
                .into_iter()
                .filter(|&(j, _)| j >= 1)
                .map(|(j, k)| Task::Mixed(j, k)),
        );
        tasks.extend(pairs(1).into_iter().map(|(j, k)| Task::BlurredX(j, k)));
        tasks.extend(pairs(2).into_iter().map(|(j, k)| Task::HiddenY(j, k)));
        tasks.extend(
            pairs(1)
                .into_iter()
                .map(|(j, k)| Task::HiddenDiscrepancy(j, k)),
        );
        tasks.extend((1..=depth).map(Task::Telescoping));
        tasks
    }

    fn is_diagnostic(&self) -> bool {
        matches!(self, Task::Telescoping(_))
    }

    fn run<T: Real>(
        &self,
        model: &Model<T>,
        c: &Constants,
        budget: &Budget,
    ) -> Result<Vec<BoundCheck>> {
        match *self {
            Task::Blurred(j) => check_blurred(model, c, j, budget),
            Task::Predict(k) => check_predict(model, c, k),
            Task::YPast(k) => check_y_past_difference(model, c, k, budget).map(|b| vec![b]),
            Task::XNonNull(k) => check_x_non_nullness(model, c, k, budget).map(|b| vec![b]),
            Task::XLogRatio(j, k) => check_x_log_ratio(model, c, j, k, budget).map(|b| vec![b]),
            Task::YMarginal(j, k) => check_y_marginal(model, c, j, k, budget),
            Task::Mixed(j, k) => check_mixed_non_nullness(model, c, j, k, budget).map(|b| vec![b]),
            Task::BlurredX(j, k) => check_blurred_x_conditional(model, c, j, k, budget),
            Task::HiddenY(j, k) => check_hidden_y_lower(model, c, j, k, budget).map(|b| vec![b]),
            Task::HiddenDiscrepancy(j, k) => check_hidden_discrepancy(model, c, j, k, budget),
            Task::Telescoping(k) => telescoping_terms(model, c, k, budget).map(|b| vec![b]),
        }
    }

    /// Rough count of cylinder visits.
    fn cost(&self, a: u128, s: u128, m: usize) -> u128 {
        let p = |e: usize| a.saturating_pow(e as u32);
        // One conditional query over a depth-`len` pattern with `free` cylinders.
        let q = |free: u128, len: usize| {
            free.saturating_mul(s.saturating_pow(m.saturating_sub(len) as u32 + 1))
        };
        let per = |events: u128, free: u128, len: usize| events.saturating_mul(q(free, len));
        match *self {
            Task::Blurred(k) | Task::YPast(k) | Task::Telescoping(k) => per(2 * p(k), p(k), k),
            Task::Predict(k) => {
                p(k).saturating_mul((k as u128 + 1) * s.saturating_pow(m as u32 + 1))
            }
            Task::XNonNull(k) | Task::XLogRatio(_, k) => per(p(k), p(k), k),
            Task::YMarginal(j, k) => per(p(k), p(k), k).saturating_add(per(p(j), p(j), j)),
            Task::Mixed(j, k) => per(
                p(j).saturating_mul(s.saturating_pow((k - j) as u32)),
                p(j),
                k,
            ),
            Task::BlurredX(j, k) => per(p(k).saturating_mul(p(k - j)).saturating_mul(2), p(k), k),
            Task::HiddenY(_, k) => per(p(k), p(k), k),
            Task::HiddenDiscrepancy(_, k) => per(p(k).saturating_mul(2 * a), p(k), k),
        }
    }
}

/// Estimated cylinder visits of a full suite run at `depth`, including the
/// `β` table.
pub fn suite_cost(alphabet_size: usize, order: usize, depth: usize) -> u128 {
    let a = alphabet_size as u128;
    let s = a * a;
    let tasks: u128 = Task::all(depth)
        .iter()
        .fold(0u128, |acc, t| acc.saturating_add(t.cost(a, s, order)));
    let betas = beta_table_cost(alphabet_size, order, depth);
    tasks.saturating_add(betas)
}

/// Worst case of one statement across its parameter range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementSummary {
    pub name: String,
    pub checks: usize,
    pub applicable: usize,
    pub failures: usize,
    #[serde(with = "crate::json::nullable")]
    pub min_slack: f64,
    pub min_slack_params: Option<Params>,
    pub min_slack_witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub max_depth: usize,
    pub rho: f64,
    pub alpha: f64,
    /// False when some task aborted; see `errors`.
    pub complete: bool,
    /// Complete and no applicable check fails.
    pub passed: bool,
    pub failures: usize,
    pub summary: Vec<StatementSummary>,
    pub checks: Vec<BoundCheck>,
    /// Intermediate estimates reported for information; never part of the
    /// verdict.
    pub diagnostics: Vec<BoundCheck>,
    pub errors: Vec<String>,
}

impl SuiteReport {
    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| c.violated())
    }
}

fn summarize(checks: &[BoundCheck]) -> Vec<StatementSummary> {
    let mut out: Vec<StatementSummary> = Vec::new();
    for c in checks {
        let idx = match out.iter().position(|s| s.name == c.name) {
            Some(i) => i,
            None => {
                out.push(StatementSummary {
                    name: c.name.clone(),
                    checks: 0,
                    applicable: 0,
                    failures: 0,
                    min_slack: f64::NAN,
                    min_slack_params: None,
                    min_slack_witness: None,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.checks += 1;
        if c.applicable {
            s.applicable += 1;
        }
        if c.violated() {
            s.failures += 1;
        }
        if c.applicable && !c.slack.is_nan() && (s.min_slack.is_nan() || c.slack < s.min_slack) {
            s.min_slack = c.slack;
            s.min_slack_params = Some(c.params);
            s.min_slack_witness = Some(c.witness.clone());
        }
    }
    out
}

/// Runs every check for all admissible `(j, k)` with `k <= max_depth`.
///
/// Checks run in parallel; the report order depends only on the depth.
/// Constants that cannot be computed, or a suite whose estimated cost
/// exceeds `budget.max_work`, abort with an error; failures of individual
/// checks are collected and mark the report incomplete.
pub fn run_suite<T: Real>(
    model: &Model<T>,
    max_depth: usize,
    budget: &Budget,
) -> Result<SuiteReport> {
    budget.check_work(suite_cost(
        model.alphabet().size(),
        model.order(),
        max_depth,
    ))?;
    let constants = Constants::compute(model, max_depth, budget)?;
    let tasks = Task::all(max_depth);
    let results: Vec<(Task, Result<Vec<BoundCheck>>)> = tasks
        .par_iter()
        .map(|t| (*t, t.run(model, &constants, budget)))
        .collect();

    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut errors = Vec::new();
    for (task, r) in results {
        match r {
            Ok(list) if task.is_diagnostic() => diagnostics.extend(list),
            Ok(list) => checks.extend(list),
            Err(e) => errors.push(format!("{task:?}: {e}")),
        }
    }
    let failures = checks.iter().filter(|c| c.violated()).count();
    let complete = errors.is_empty();
    Ok(SuiteReport {
        max_depth,
        rho: constants.rho,
        alpha: constants.alpha,
        complete,
        passed: complete && failures == 0,
        failures,
        summary: summarize(&checks),
        checks,
        diagnostics,
        errors,
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
    fn verdict_respects_relation() {
        let mut t = Track::max();
        t.offer(0.5, || "w".into());
        let le = BoundCheck::new("t", Params::k(1), Relation::Le, t, 0.4, true);
        assert!(!le.holds);
        assert!((le.slack + 0.1).abs() < 1e-15);
        let mut t = Track::min();
        t.offer(0.5, || "w".into());
        let ge = BoundCheck::new("t", Params::k(1), Relation::Ge, t, 0.4, true);
        assert!(ge.holds);
        let mut t = Track::max();
        t.offer(0.5, || "w".into());
        let off = BoundCheck::new("t", Params::k(1), Relation::Le, t, 0.4, false);
        assert!(off.holds && off.slack.is_nan());
    }

    #[test]
    fn star_suite_passes_at_depth_two() {
        let report = run_suite(&star(), 2, &Budget::default()).unwrap();
        let bad: Vec<_> = report.violations().collect();
        assert!(report.passed, "{bad:#?}");
    }

    #[test]
    fn star_hidden_y_lower_counterexample() {
        // P(Y_{-2}=1 | Y_{-3}=0, X_{-1}=0) = 0.0819.. + 0.1628.. by hand, below (1-ρ)α = 0.27.
        let report = run_suite(&star(), 3, &Budget::default()).unwrap();
        let bad: Vec<_> = report.violations().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].name, "hidden_y_lower");
        assert_eq!(bad[0].params, Params::jk(1, 3));
        let by_hand = {
            let x2 = 0.462 / 0.564;
            x2 * 0.1 + (1.0 - x2) * 0.9
        };
        assert!((bad[0].lhs - by_hand).abs() < 1e-12);
        assert!((bad[0].rhs - 0.27).abs() < 1e-12);
    }

    #[test]
    fn refuses_models_without_blurring_bound() {
        // Y is the complement of X, so ρ = 1.
        let m = Model::new(binary_symmetric_channel(0.7f64, 1.0).unwrap()).unwrap();
        assert!(matches!(
            run_suite(&m, 1, &Budget::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn cost_estimate_grows_with_depth() {
        assert!(suite_cost(2, 1, 4) > suite_cost(2, 1, 3));
        let tiny = Budget {
            max_cylinders: Budget::DEFAULT_MAX_CYLINDERS,
            max_work: 10,
        };
        assert!(matches!(
            run_suite(&star(), 2, &tiny),
            Err(Error::Cost { .. })
        ));
    }
}
