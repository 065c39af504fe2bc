//! Sporadic task model and the demand functions `dbf`, `dbf*` and `f`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{checked_integer_lcm, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("task parameter {param} must be positive, got {value}")]
    NonPositive { param: &'static str, value: Rational },
    #[error("task is not constrained-deadline: d = {d} > p = {p}")]
    NotConstrained { d: Rational, p: Rational },
    #[error("task set must contain at least one task")]
    Empty,
}

/// A sporadic task `(e, d, p)`: worst-case execution time, relative deadline
/// and minimum inter-arrival separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SporadicTask {
    pub e: Rational,
    pub d: Rational,
    pub p: Rational,
}

impl SporadicTask {
    /// Constrained-deadline task; rejects `d > p`.
    pub fn new(e: Rational, d: Rational, p: Rational) -> Result<Self, ModelError> {
        let task = Self::relaxed(e, d, p)?;
        if !task.is_constrained() {
            return Err(ModelError::NotConstrained { d, p });
        }
        Ok(task)
    }

    /// Task with positive parameters and no relation required between `d` and `p`.
    pub fn relaxed(e: Rational, d: Rational, p: Rational) -> Result<Self, ModelError> {
        for (param, value) in [("e", e), ("d", d), ("p", p)] {
            if !value.is_positive() {
                return Err(ModelError::NonPositive { param, value });
            }
        }
        Ok(SporadicTask { e, d, p })
    }

    pub fn is_constrained(&self) -> bool {
        self.d <= self.p
    }

    pub fn utilization(&self) -> Rational {
        self.e / self.p
    }

    /// Number of jobs of a synchronous release with deadline in `[0, t]`.
    fn jobs_due_by(&self, t: Rational) -> i128 {
        if t < self.d {
            0
        } else {
            ((t - self.d) / self.p).floor() + 1
        }
    }

    /// Demand bound function: `(⌊(t−d)/p⌋ + 1)·e` for `t ≥ d`, else 0.
    pub fn dbf(&self, t: Rational) -> Rational {
        Rational::from_integer(self.jobs_due_by(t)) * self.e
    }

    /// Linear upper approximation of `dbf`: `((t−d)/p + 1)·e` for `t ≥ d`.
    pub fn dbf_star(&self, t: Rational) -> Rational {
        if t < self.d {
            Rational::ZERO
        } else {
            ((t - self.d) / self.p + Rational::ONE) * self.e
        }
    }

    /// `dbf` up to `d + p`, frozen at `2e` from there on.
    pub fn f(&self, t: Rational) -> Rational {
        if t < self.d + self.p {
            self.dbf(t)
        } else {
            self.e + self.e
        }
    }

    /// Same task with execution time divided by `speed`.
    pub fn scaled(&self, speed: Rational) -> SporadicTask {
        SporadicTask { e: self.e / speed, ..*self }
    }
}

/// A non-empty task set kept sorted non-decreasingly by relative deadline.
///
/// Ties keep insertion order. Sets built through [`TaskSet::new`] are
/// constrained-deadline; [`TaskSet::relaxed`] skips that check.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSet {
    tasks: Vec<SporadicTask>,
    constrained: bool,
}

impl TaskSet {
    pub fn new(tasks: Vec<SporadicTask>) -> Result<Self, ModelError> {
        if let Some(bad) = tasks.iter().find(|t| !t.is_constrained()) {
            return Err(ModelError::NotConstrained { d: bad.d, p: bad.p });
        }
        Self::relaxed(tasks)
    }

    pub fn relaxed(mut tasks: Vec<SporadicTask>) -> Result<Self, ModelError> {
        if tasks.is_empty() {
            return Err(ModelError::Empty);
        }
        for t in &tasks {
            SporadicTask::relaxed(t.e, t.d, t.p)?;
        }
        // stable: equal deadlines keep their insertion order
        tasks.sort_by_key(|a| a.d);
        let constrained = tasks.iter().all(SporadicTask::is_constrained);
        Ok(TaskSet { tasks, constrained })
    }

    /// Builds a set from `(e, d, p)` triples.
    pub fn from_triples<I, R>(triples: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (R, R, R)>,
        R: Into<Rational>,
    {
        let tasks = triples
            .into_iter()
            .map(|(e, d, p)| SporadicTask::new(e.into(), d.into(), p.into()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tasks)
    }

    pub fn tasks(&self) -> &[SporadicTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SporadicTask> {
        self.tasks.iter()
    }

    pub fn into_tasks(self) -> Vec<SporadicTask> {
        self.tasks
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    /// Largest relative deadline.
    pub fn d_max(&self) -> Rational {
        self.tasks.last().expect("task set is non-empty").d
    }

    pub fn dbf(&self, t: Rational) -> Rational {
        self.tasks.iter().map(|task| task.dbf(t)).sum()
    }

    pub fn dbf_star(&self, t: Rational) -> Rational {
        self.tasks.iter().map(|task| task.dbf_star(t)).sum()
    }

    pub fn f(&self, t: Rational) -> Rational {
        self.tasks.iter().map(|task| task.f(t)).sum()
    }

    /// Total utilization `Σ e_i / p_i`.
    pub fn utilization(&self) -> Rational {
        self.tasks.iter().map(SporadicTask::utilization).sum()
    }

    /// Every execution time divided by `speed`.
    pub fn scaled(&self, speed: Rational) -> TaskSet {
        TaskSet { tasks: self.tasks.iter().map(|t| t.scaled(speed)).collect(), constrained: self.constrained }
    }

    /// Least common multiple of the (rational) periods.
    ///
    /// Panics if it does not fit; see [`TaskSet::checked_hyperperiod`].
    pub fn hyperperiod(&self) -> Rational {
        self.checked_hyperperiod().expect("hyperperiod overflows i128")
    }

    pub fn checked_hyperperiod(&self) -> Option<Rational> {
        let mut periods = self.tasks.iter().map(|t| t.p);
        let first = periods.next()?;
        periods.try_fold(first, |acc, p| acc.checked_lcm(&p))
    }

    /// Least common multiple of the denominators of every parameter.
    ///
    /// `None` if it overflows.
    pub fn common_denominator(&self) -> Option<i128> {
        self.tasks.iter().flat_map(|t| [t.e.denom(), t.d.denom(), t.p.denom()]).try_fold(1i128, checked_integer_lcm)
    }
}

/// Serialized as the plain list of tasks in deadline order.
impl Serialize for TaskSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.tasks.serialize(serializer)
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a SporadicTask;
    type IntoIter = std::slice::Iter<'a, SporadicTask>;

    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}
