//! Task-set rewrites that never lower `dbf*(τ, d_n) / d_n`.
//!
//! Each transform re-checks the properties its construction promises and
//! aborts with [`TransformError::Verification`] if one fails. The pipeline
//! [`full_pipeline`] chains them into the regular form used by the
//! permutation search: unit-free equal execution times, deadlines
//! `δ, 2δ, …, nδ`, and an aligned choice of periods.

use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{
    default_horizon_cap, demand_checkpoints, edf_feasible, rho_ratio, FeasibilityStatus, FeasibilityVerdict,
};
use crate::model::{SporadicTask, TaskSet};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("{step}: precondition failed: {reason}")]
    Precondition { step: &'static str, reason: String },
    #[error("{step}: property `{property}` does not hold")]
    Verification { step: &'static str, property: String },
    #[error("{step}: feasibility horizon exceeds the cap")]
    Horizon { step: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

/// One transform application with the ratio on either side and the checks run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransformStep {
    pub name: &'static str,
    pub input: TaskSet,
    pub output: TaskSet,
    pub ratio_before: Rational,
    pub ratio_after: Rational,
    pub checks_passed: Vec<Check>,
}

impl TransformStep {
    pub fn is_identity(&self) -> bool {
        self.input == self.output
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TransformTrace {
    pub steps: Vec<TransformStep>,
}

/// Collects named checks and turns the first failure into an error.
struct Checks {
    step: &'static str,
    list: Vec<Check>,
}

impl Checks {
    fn new(step: &'static str) -> Self {
        Checks { step, list: Vec::new() }
    }

    fn record(&mut self, name: impl Into<String>, passed: bool) -> Result<(), TransformError> {
        let name = name.into();
        if !passed {
            return Err(TransformError::Verification { step: self.step, property: name });
        }
        self.list.push(Check { name, passed });
        Ok(())
    }

    fn finish(self, input: &TaskSet, output: TaskSet) -> TransformStep {
        TransformStep {
            name: self.step,
            ratio_before: rho_ratio(input),
            ratio_after: rho_ratio(&output),
            input: input.clone(),
            output,
            checks_passed: self.list,
        }
    }
}

fn verdict(step: &'static str, ts: &TaskSet) -> Result<FeasibilityVerdict, TransformError> {
    let v = edf_feasible(ts, default_horizon_cap());
    if v.status == FeasibilityStatus::HorizonOverflow {
        return Err(TransformError::Horizon { step });
    }
    Ok(v)
}

fn require_feasible(step: &'static str, ts: &TaskSet) -> Result<FeasibilityVerdict, TransformError> {
    if !ts.is_constrained() {
        return Err(TransformError::Precondition { step, reason: "input is not constrained-deadline".into() });
    }
    let v = verdict(step, ts)?;
    if !v.is_feasible() {
        let at = v.witness_t.map(|t| t.to_string()).unwrap_or_default();
        return Err(TransformError::Precondition {
            step,
            reason: format!("input is not EDF-feasible (dbf(t) > t at t = {at})"),
        });
    }
    Ok(v)
}

fn is_feasible(step: &'static str, ts: &TaskSet) -> Result<bool, TransformError> {
    Ok(verdict(step, ts)?.is_feasible())
}

fn rebuild(step: &'static str, tasks: Vec<SporadicTask>, constrained: bool) -> Result<TaskSet, TransformError> {
    let built = if constrained { TaskSet::new(tasks) } else { TaskSet::relaxed(tasks) };
    built.map_err(|e| TransformError::Verification { step, property: format!("well-formed output ({e})") })
}

/// `(t − d) / p`, the quantity whose ordering the rewrites below rely on:
/// for `d > d'` and `d + p = d' + p'`, `(t−d')/p' > (t−d)/p` iff `t < d + p`.
pub fn offset_ratio(t: Rational, d: Rational, p: Rational) -> Rational {
    (t - d) / p
}

/// Index of the first task with `d_i ≠ e_i + d_{i−1}` (taking `d_{−1} = 0`).
fn first_untight(tasks: &[SporadicTask]) -> Option<usize> {
    let mut prev = Rational::ZERO;
    for (i, t) in tasks.iter().enumerate() {
        if t.d != prev + t.e {
            return Some(i);
        }
        prev = t.d;
    }
    None
}

fn untight_count(tasks: &[SporadicTask]) -> usize {
    let mut prev = Rational::ZERO;
    tasks
        .iter()
        .filter(|t| {
            let bad = t.d != prev + t.e;
            prev = t.d;
            bad
        })
        .count()
}

/// Folds every job a task can release before `d_n` into one job: with
/// `q = ⌊(d_n − d_i)/p_i⌋`, the task becomes `((q+1)e_i, q·p_i + d_i, (q+1)p_i)`.
pub fn normalize_chen_step(ts: &TaskSet) -> Result<TransformStep, TransformError> {
    const STEP: &str = "normalize_chen";
    let before = require_feasible(STEP, ts)?;
    let d_n = ts.d_max();
    let tasks = ts
        .iter()
        .map(|t| {
            let q = offset_ratio(d_n, t.d, t.p).floor();
            let mult = Rational::from_integer(q + 1);
            SporadicTask { e: mult * t.e, d: Rational::from_integer(q) * t.p + t.d, p: mult * t.p }
        })
        .collect();
    let out = rebuild(STEP, tasks, true)?;

    let mut checks = Checks::new(STEP);
    checks.record("dbf_star(d_n) preserved", ts.dbf_star(d_n) == out.dbf_star(d_n))?;
    let after = verdict(STEP, &out)?;
    let horizon = before.horizon_used.max(after.horizon_used);
    let mut points = demand_checkpoints(ts, horizon);
    points.extend(demand_checkpoints(&out, horizon));
    checks.record("dbf never increases", points.iter().all(|&t| out.dbf(t) <= ts.dbf(t)))?;
    checks.record("d_n < d_i + p_i for all i", out.iter().all(|t| out.d_max() < t.d + t.p))?;
    checks.record("d_n unchanged", out.d_max() == d_n)?;
    checks.record("output EDF-feasible", after.is_feasible())?;
    Ok(checks.finish(ts, out))
}

pub fn normalize_chen(ts: &TaskSet) -> Result<TaskSet, TransformError> {
    normalize_chen_step(ts).map(|s| s.output)
}

/// Moves every parameter to the smallest-denominator rational in the open
/// windows `p' ∈ (p+ε/2, p+ε)`, `d'_i ∈ (d_i+(i−1)ε/2n, d_i+iε/2n)`,
/// `e' ∈ (e−ε, e)`.
pub fn rationalize_step(ts: &TaskSet, eps: Rational) -> Result<TransformStep, TransformError> {
    const STEP: &str = "rationalize";
    let min_e = ts.iter().map(|t| t.e).min().expect("non-empty");
    if !eps.is_positive() || eps >= min_e {
        return Err(TransformError::Precondition {
            step: STEP,
            reason: format!("need 0 < ε < min e = {min_e}, got ε = {eps}"),
        });
    }
    require_feasible(STEP, ts)?;
    let n = Rational::from(ts.len());
    let two = Rational::from_integer(2);
    let half = eps / two;
    let slot = eps / (two * n);
    let windows: Vec<_> = ts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let i = Rational::from(i);
            [(t.e - eps, t.e), (t.d + i * slot, t.d + (i + Rational::ONE) * slot), (t.p + half, t.p + eps)]
        })
        .collect();
    let tasks: Vec<_> = windows
        .iter()
        .map(|[e, d, p]| SporadicTask {
            e: Rational::simplest_between(e.0, e.1),
            d: Rational::simplest_between(d.0, d.1),
            p: Rational::simplest_between(p.0, p.1),
        })
        .collect();

    let mut checks = Checks::new(STEP);
    let inside = |x: Rational, w: (Rational, Rational)| w.0 < x && x < w.1;
    checks.record(
        "every parameter inside its window",
        tasks.iter().zip(&windows).all(|(t, [we, wd, wp])| inside(t.e, *we) && inside(t.d, *wd) && inside(t.p, *wp)),
    )?;
    checks.record("deadlines strictly increasing", tasks.windows(2).all(|w| w[0].d < w[1].d))?;
    let out = rebuild(STEP, tasks, true)?;
    checks.record("output constrained-deadline", out.is_constrained())?;
    checks.record("output EDF-feasible", is_feasible(STEP, &out)?)?;
    let crosses = |s: &TaskSet| s.iter().all(|t| t.d + t.p > s.d_max());
    if crosses(ts) {
        checks.record("d_i + p_i > d_n preserved", crosses(&out))?;
    }
    Ok(checks.finish(ts, out))
}

pub fn rationalize(ts: &TaskSet, eps: Rational) -> Result<TaskSet, TransformError> {
    rationalize_step(ts, eps).map(|s| s.output)
}

/// Repeatedly pulls the deadline of the first task with
/// `d_k ≠ e_k + d_{k−1}` down to `d_{k−1} + e_k`, keeping `d_k + p_k` fixed,
/// until `d_i = Σ_{j≤i} e_j` for every task.
///
/// Needs `d_i + p_i ≥ d_n` for every task, which [`normalize_chen`] output
/// always satisfies.
pub fn tighten_deadlines_step(ts: &TaskSet) -> Result<TransformStep, TransformError> {
    const STEP: &str = "tighten_deadlines";
    require_feasible(STEP, ts)?;
    if let Some(i) = ts.iter().position(|t| t.d + t.p < ts.d_max()) {
        return Err(TransformError::Precondition { step: STEP, reason: format!("task {} has d_i + p_i < d_n", i + 1) });
    }
    let mut checks = Checks::new(STEP);
    let mut current = ts.clone();
    let mut round = 0usize;
    while let Some(k) = first_untight(current.tasks()) {
        round += 1;
        let mut tasks = current.tasks().to_vec();
        let prev_d = if k == 0 { Rational::ZERO } else { tasks[k - 1].d };
        let old = tasks[k];
        let new_d = prev_d + old.e;
        tasks[k] = SporadicTask { e: old.e, d: new_d, p: old.d + old.p - new_d };
        let tag = |what: &str| format!("repair {round} (task {}): {what}", k + 1);
        checks.record(tag("deadline shortened"), new_d < old.d)?;
        let next = rebuild(STEP, tasks, true)?;
        checks.record(tag("tight prefix grows"), first_untight(next.tasks()).is_none_or(|j| j > k))?;
        checks.record(
            tag("untight count does not grow"),
            untight_count(next.tasks()) <= untight_count(current.tasks()),
        )?;
        checks.record(tag("output EDF-feasible"), is_feasible(STEP, &next)?)?;
        checks.record(tag("ratio not decreased"), rho_ratio(&next) >= rho_ratio(&current))?;
        current = next;
    }
    Ok(checks.finish(ts, current))
}

pub fn tighten_deadlines(ts: &TaskSet) -> Result<TaskSet, TransformError> {
    tighten_deadlines_step(ts).map(|s| s.output)
}

/// Largest task count [`split_equal_execution`] will produce.
pub const MAX_SPLIT_TASKS: u64 = 10_000;

/// Splits every task into `e_i / δ` unit tasks of execution `δ = gcd(e)`,
/// with deadlines `d_{i−1} + jδ` and periods keeping `d + p` fixed.
pub fn split_equal_execution_step(ts: &TaskSet) -> Result<TransformStep, TransformError> {
    const STEP: &str = "split_equal_execution";
    require_feasible(STEP, ts)?;
    if let Some(k) = first_untight(ts.tasks()) {
        return Err(TransformError::Precondition {
            step: STEP,
            reason: format!("task {} has d_i ≠ e_i + d_(i-1)", k + 1),
        });
    }
    let delta = ts.iter().map(|t| t.e).reduce(|a, b| a.gcd(&b)).expect("non-empty");
    let total = ts.iter().map(|t| t.e / delta).sum::<Rational>();
    if total > Rational::from(MAX_SPLIT_TASKS) {
        return Err(TransformError::Precondition {
            step: STEP,
            reason: format!("splitting would create {total} tasks (limit {MAX_SPLIT_TASKS})"),
        });
    }
    let mut tasks = Vec::new();
    let mut prev_d = Rational::ZERO;
    let mut expected_count = 0i128;
    for t in ts {
        let pieces = t.e / delta;
        debug_assert!(pieces.is_integer());
        expected_count += pieces.numer();
        for j in 1..=pieces.numer() {
            let d = prev_d + Rational::from_integer(j) * delta;
            tasks.push(SporadicTask { e: delta, d, p: t.p + t.d - d });
        }
        prev_d = t.d;
    }

    let mut checks = Checks::new(STEP);
    checks.record("task count equals Σ e_i/δ", tasks.len() as i128 == expected_count)?;
    let out = rebuild(STEP, tasks, true)?;
    checks.record("all execution times equal δ", out.iter().all(|t| t.e == delta))?;
    checks.record("output constrained-deadline", out.is_constrained())?;
    checks.record("d_n unchanged", out.d_max() == ts.d_max())?;
    checks.record("dbf_star(d_n) not decreased", out.dbf_star(out.d_max()) >= ts.dbf_star(ts.d_max()))?;
    checks.record("output EDF-feasible", is_feasible(STEP, &out)?)?;
    Ok(checks.finish(ts, out))
}

pub fn split_equal_execution(ts: &TaskSet) -> Result<TaskSet, TransformError> {
    split_equal_execution_step(ts).map(|s| s.output)
}

/// Aligning permutation of `ts`, if any: `pi[i] = j` with
/// `d_j + p_j = d_n + d_i` for every `i` (0-based).
pub fn is_aligned(ts: &TaskSet) -> Option<Vec<usize>> {
    let tasks = ts.tasks();
    let d_n = ts.d_max();
    let mut by_reach: Vec<usize> = (0..tasks.len()).collect();
    by_reach.sort_by_key(|&j| tasks[j].d + tasks[j].p);
    by_reach.iter().zip(tasks).all(|(&j, target)| tasks[j].d + tasks[j].p == d_n + target.d).then_some(by_reach)
}

/// Points where `f(τ, ·)` jumps: every `d_i` and every `d_i + p_i`.
pub fn f_jump_points(ts: &TaskSet) -> Vec<Rational> {
    let mut points: Vec<_> = ts.iter().flat_map(|t| [t.d, t.d + t.p]).collect();
    points.sort();
    points.dedup();
    points
}

/// `f(τ, t) ≤ t` at every jump of `f`, hence for all `t > 0`.
pub fn f_feasible(ts: &TaskSet) -> bool {
    f_jump_points(ts).into_iter().all(|t| ts.f(t) <= t)
}

/// Replaces each period so that the `d + p` values become exactly
/// `d_n + d_1, …, d_n + d_n`, assigned in the order of the original `d + p`.
pub fn align_step(ts: &TaskSet) -> Result<TransformStep, TransformError> {
    const STEP: &str = "align";
    require_feasible(STEP, ts)?;
    let n = ts.len();
    let d_n = ts.d_max();
    let unit = d_n / Rational::from(n);
    let equal_form = ts.iter().enumerate().all(|(i, t)| t.e == unit && t.d == Rational::from(i + 1) * unit);
    if !equal_form {
        return Err(TransformError::Precondition {
            step: STEP,
            reason: "expected e_i = d_n/n and d_i = i·d_n/n".into(),
        });
    }
    let tasks = ts.tasks();
    let mut by_reach: Vec<usize> = (0..n).collect();
    by_reach.sort_by_key(|&j| tasks[j].d + tasks[j].p);
    let mut rank = vec![0usize; n];
    for (pos, &j) in by_reach.iter().enumerate() {
        rank[j] = pos;
    }
    let aligned: Vec<_> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| SporadicTask { e: t.e, d: t.d, p: d_n + tasks[rank[i]].d - t.d })
        .collect();

    let mut checks = Checks::new(STEP);
    checks.record("periods not increased", aligned.iter().zip(tasks).all(|(a, t)| a.p <= t.p))?;
    let out = rebuild(STEP, aligned, false)?;
    checks.record("aligned", is_aligned(&out).is_some())?;
    checks.record("f(t) <= t at every jump of f", f_feasible(&out))?;
    checks.record("dbf_star(d_n) not decreased", out.dbf_star(d_n) >= ts.dbf_star(d_n))?;
    Ok(checks.finish(ts, out))
}

pub fn align(ts: &TaskSet) -> Result<TaskSet, TransformError> {
    align_step(ts).map(|s| s.output)
}

type StepFn = fn(&TaskSet) -> Result<TransformStep, TransformError>;

/// `normalize_chen → tighten_deadlines → split_equal_execution → align`.
///
/// Rational inputs need no perturbation, so [`rationalize`] is not part of
/// the chain.
pub fn full_pipeline(ts: &TaskSet) -> Result<(TaskSet, TransformTrace), TransformError> {
    const STEP: &str = "full_pipeline";
    let mut trace = TransformTrace::default();
    let stages: [StepFn; 4] = [normalize_chen_step, tighten_deadlines_step, split_equal_execution_step, align_step];
    let mut current = ts.clone();
    for stage in stages {
        let step = stage(&current)?;
        current = step.output.clone();
        trace.steps.push(step);
    }

    let ratio_in = rho_ratio(ts);
    let ratio_out = rho_ratio(&current);
    let e0 = current.tasks()[0].e;
    let ok = ratio_out >= ratio_in
        && is_aligned(&current).is_some()
        && current.iter().all(|t| t.e == e0)
        && first_untight(current.tasks()).is_none()
        && trace.steps.iter().all(|s| s.ratio_after >= s.ratio_before)
        && trace.steps.windows(2).all(|w| w[1].ratio_before == w[0].ratio_after);
    if !ok {
        return Err(TransformError::Verification { step: STEP, property: "final form and ratio monotonicity".into() });
    }
    Ok((current, trace))
}
