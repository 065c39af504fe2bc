//! Event-driven preemptive EDF simulation on one processor.
//!
//! Every task releases synchronously at 0 and then strictly periodically,
//! the densest pattern a sporadic task may produce. All event times are exact
//! rationals.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{default_horizon_cap, edf_feasible, FeasibilityStatus};
use crate::model::TaskSet;
use crate::rational::Rational;

/// Upper limit on the number of jobs one simulation may release.
pub const DEFAULT_JOB_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(Rational),
    #[error("horizon {horizon} is shorter than the largest deadline {d_max}")]
    HorizonTooShort { horizon: Rational, d_max: Rational },
    #[error("simulation would release about {jobs} jobs, above the cap of {cap}")]
    TooManyJobs { jobs: Rational, cap: u64 },
    #[error("hyperperiod does not fit in 128-bit arithmetic")]
    HyperperiodOverflow,
    #[error("demand analysis was inconclusive (horizon overflow)")]
    AnalysisInconclusive,
}

/// A released job. Ordered by EDF priority: absolute deadline, then task
/// index, then release time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub task_index: usize,
    pub release: Rational,
    pub absolute_deadline: Rational,
    pub remaining: Rational,
}

impl Ord for Job {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.absolute_deadline, self.task_index, self.release).cmp(&(
            other.absolute_deadline,
            other.task_index,
            other.release,
        ))
    }
}

impl PartialOrd for Job {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    Completion,
    DeadlineMiss,
    Idle,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::Completion => "completion",
            EventKind::DeadlineMiss => "deadline_miss",
            EventKind::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleEvent {
    pub time: Rational,
    pub kind: EventKind,
    pub task: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    AllMet,
    Miss { time: Rational, task_index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleTrace {
    pub events: Vec<ScheduleEvent>,
    pub outcome: Outcome,
}

impl ScheduleTrace {
    pub fn all_met(&self) -> bool {
        self.outcome == Outcome::AllMet
    }

    /// `time,event,task` rows; idle rows leave the task column empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,event,task\n");
        for ev in &self.events {
            let task = ev.task.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", ev.time, ev.kind.as_str(), task);
        }
        out
    }
}

/// Simulates preemptive EDF through `horizon` with execution times divided
/// by `speed`. Stops at the first deadline miss.
pub fn simulate_edf(ts: &TaskSet, horizon: Rational, speed: Rational) -> Result<ScheduleTrace, SimError> {
    if !speed.is_positive() {
        return Err(SimError::NonPositiveSpeed(speed));
    }
    if horizon < ts.d_max() {
        return Err(SimError::HorizonTooShort { horizon, d_max: ts.d_max() });
    }
    let jobs: Rational = ts.iter().map(|t| horizon / t.p + Rational::ONE).sum();
    if jobs > Rational::from(DEFAULT_JOB_CAP) {
        return Err(SimError::TooManyJobs { jobs, cap: DEFAULT_JOB_CAP });
    }

    let tasks = ts.tasks();
    let mut next_release = vec![Rational::ZERO; tasks.len()];
    let mut ready: BinaryHeap<Reverse<Job>> = BinaryHeap::new();
    let mut events = Vec::new();
    let mut now = Rational::ZERO;

    let outcome = loop {
        for (i, task) in tasks.iter().enumerate() {
            while next_release[i] <= now && next_release[i] <= horizon {
                let release = next_release[i];
                ready.push(Reverse(Job {
                    task_index: i,
                    release,
                    absolute_deadline: release + task.d,
                    remaining: task.e / speed,
                }));
                events.push(ScheduleEvent { time: release, kind: EventKind::Release, task: Some(i) });
                next_release[i] = release + task.p;
            }
        }

        if let Some(Reverse(top)) = ready.peek() {
            if top.absolute_deadline <= now {
                events.push(ScheduleEvent { time: now, kind: EventKind::DeadlineMiss, task: Some(top.task_index) });
                break Outcome::Miss { time: now, task_index: top.task_index };
            }
        }

        let upcoming = next_release.iter().copied().filter(|&r| r <= horizon).min();
        let Some(Reverse(mut job)) = ready.pop() else {
            match upcoming {
                Some(r) => {
                    events.push(ScheduleEvent { time: now, kind: EventKind::Idle, task: None });
                    now = r;
                    continue;
                }
                None => break Outcome::AllMet,
            }
        };

        let finish = now + job.remaining;
        let mut until = finish.min(job.absolute_deadline);
        if let Some(r) = upcoming {
            until = until.min(r);
        }
        if until > horizon {
            break Outcome::AllMet;
        }
        job.remaining -= until - now;
        now = until;
        if job.remaining.is_zero() {
            events.push(ScheduleEvent { time: now, kind: EventKind::Completion, task: Some(job.task_index) });
        } else {
            ready.push(Reverse(job));
        }
    };

    Ok(ScheduleTrace { events, outcome })
}

/// Runs the simulator over `[0, H + d_max]` at unit speed and checks that it
/// agrees with [`edf_feasible`].
pub fn cross_validate(ts: &TaskSet) -> Result<bool, SimError> {
    let horizon =
        ts.checked_hyperperiod().and_then(|h| h.checked_add(&ts.d_max())).ok_or(SimError::HyperperiodOverflow)?;
    let verdict = edf_feasible(ts, default_horizon_cap());
    if verdict.status == FeasibilityStatus::HorizonOverflow {
        return Err(SimError::AnalysisInconclusive);
    }
    let trace = simulate_edf(ts, horizon, Rational::ONE)?;
    Ok(trace.all_met() == verdict.is_feasible())
}
