//! Deadline-monotonic first-fit partitioning onto `m` processors of a given
//! speed, with minimum-speed search and speedup experiments.
//!
//! Task `i` (in deadline order) goes to the first processor `k` with
//! `e_i/s + dbf*(τ(k), d_i) ≤ d_i`, where `τ(k)` holds the tasks already on
//! `k` with their execution times divided by the speed `s`.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::feasibility::{edf_feasible, DEFAULT_HORIZON_CAP};
use crate::generator::{gen, item_rng, GenError, GeneratorConfig};
use crate::model::{SporadicTask, TaskSet};
use crate::rational::Rational;

/// Doublings allowed while looking for a speed at which partitioning succeeds.
const MAX_DOUBLINGS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("need at least one processor")]
    NoProcessors,
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(Rational),
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(Rational),
    #[error("no successful speed found below {0}")]
    BracketOverflow(Rational),
    #[error(transparent)]
    Generator(#[from] GenError),
}

/// One admission decision: `value = e_i/s + dbf*(τ(k), d_i)` against `deadline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub task: usize,
    pub processor: usize,
    pub value: Rational,
    pub deadline: Rational,
}

/// A successful assignment. Indices are 0-based; JSON output is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub m: usize,
    pub speed: Rational,
    /// `assignment[i]` is the processor of task `i`.
    pub assignment: Vec<usize>,
    pub admission_log: Vec<Admission>,
}

impl Partition {
    /// Task indices on processor `k`, in deadline order.
    pub fn processor_tasks(&self, k: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionOutcome {
    Assigned(Partition),
    /// First task (0-based) that fits on no processor.
    Fail(usize),
}

impl PartitionOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, PartitionOutcome::Assigned(_))
    }
}

#[derive(Serialize)]
struct AdmissionJson {
    task: usize,
    processor: usize,
    value: Rational,
    deadline: Rational,
}

#[derive(Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
enum OutcomeJson {
    Assigned { m: usize, speed: Rational, assignment: Vec<usize>, admission_log: Vec<AdmissionJson> },
    Fail { task: usize },
}

impl Serialize for PartitionOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let json = match self {
            PartitionOutcome::Assigned(p) => OutcomeJson::Assigned {
                m: p.m,
                speed: p.speed,
                assignment: p.assignment.iter().map(|k| k + 1).collect(),
                admission_log: p
                    .admission_log
                    .iter()
                    .map(|a| AdmissionJson {
                        task: a.task + 1,
                        processor: a.processor + 1,
                        value: a.value,
                        deadline: a.deadline,
                    })
                    .collect(),
            },
            PartitionOutcome::Fail(i) => OutcomeJson::Fail { task: i + 1 },
        };
        json.serialize(s)
    }
}

/// First-fit deadline-monotonic partitioning at `speed`.
///
/// Tasks are taken in the set's (stable, deadline-sorted) order.
pub fn dm_partition(ts: &TaskSet, m: usize, speed: Rational) -> Result<PartitionOutcome, PartitionError> {
    if m == 0 {
        return Err(PartitionError::NoProcessors);
    }
    if !speed.is_positive() {
        return Err(PartitionError::NonPositiveSpeed(speed));
    }
    let tasks = ts.tasks();
    // unscaled dbf* load per processor is recomputed per task: d_i changes
    let mut bins: Vec<Vec<SporadicTask>> = vec![Vec::new(); m];
    let mut assignment = Vec::with_capacity(tasks.len());
    let mut admission_log = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let limit = task.d * speed;
        let chosen = bins.iter().enumerate().find_map(|(k, bin)| {
            let work: Rational = task.e + bin.iter().map(|t| t.dbf_star(task.d)).sum::<Rational>();
            (work <= limit).then_some((k, work))
        });
        let Some((k, work)) = chosen else {
            return Ok(PartitionOutcome::Fail(i));
        };
        bins[k].push(*task);
        assignment.push(k);
        admission_log.push(Admission { task: i, processor: k, value: work / speed, deadline: task.d });
    }
    Ok(PartitionOutcome::Assigned(Partition { m, speed, assignment, admission_log }))
}

/// Re-checks every processor with the exact EDF test on its scaled tasks.
/// An inconclusive test counts as a failure.
pub fn verify_partition(p: &Partition, ts: &TaskSet, speed: Rational) -> bool {
    if p.assignment.len() != ts.len() || p.assignment.iter().any(|&k| k >= p.m) {
        return false;
    }
    (0..p.m).all(|k| {
        let subset: Vec<_> = p.processor_tasks(k).into_iter().map(|i| ts.tasks()[i].scaled(speed)).collect();
        subset.is_empty() || TaskSet::new(subset).is_ok_and(|sub| edf_feasible(&sub, DEFAULT_HORIZON_CAP).is_feasible())
    })
}

fn succeeds(ts: &TaskSet, m: usize, speed: Rational) -> Result<bool, PartitionError> {
    Ok(dm_partition(ts, m, speed)?.is_success())
}

/// Smallest speed (within `tol`) at which [`dm_partition`] succeeds, found
/// by bisection. The returned speed is always one at which it succeeded.
pub fn min_speed_success(ts: &TaskSet, m: usize, tol: Rational) -> Result<Rational, PartitionError> {
    if !tol.is_positive() {
        return Err(PartitionError::NonPositiveTolerance(tol));
    }
    // no speed below the largest density can admit that task anywhere
    let mut lo = ts.iter().map(|t| t.e / t.d).max().expect("non-empty");
    if succeeds(ts, m, lo)? {
        return Ok(lo);
    }
    let min_d = ts.iter().map(|t| t.d).min().expect("non-empty");
    let total_e: Rational = ts.iter().map(|t| t.e).sum();
    let mut hi = (total_e / min_d).max(lo);
    let mut doublings = 0;
    while !succeeds(ts, m, hi)? {
        if doublings == MAX_DOUBLINGS {
            return Err(PartitionError::BracketOverflow(hi));
        }
        lo = hi;
        hi = hi + hi;
        doublings += 1;
    }
    while hi - lo > tol {
        let mid = Rational::simplest_between(lo + (hi - lo) / Rational::from(4), hi - (hi - lo) / Rational::from(4));
        if succeeds(ts, m, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `23/9 − 1/m`.
pub fn speedup_bound(m: usize) -> Rational {
    Rational::new(23, 9) - Rational::new(1, m as i128)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpeedupRow {
    pub taskset_id: usize,
    pub m: usize,
    pub min_speed: Rational,
    pub bound: Rational,
    /// `bound − min_speed`
    pub margin: Rational,
}

impl SpeedupRow {
    pub const CSV_HEADER: &'static str = "taskset_id,m,min_speed,bound,margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.9},{:.9},{:.9}",
            self.taskset_id,
            self.m,
            self.min_speed.to_f64(),
            self.bound.to_f64(),
            self.margin.to_f64()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpeedupConfig {
    pub m: usize,
    pub count: usize,
    pub seed: u64,
    /// Tasks per processor are drawn from `1..=max_tasks_per_processor`.
    pub max_tasks_per_processor: usize,
    pub period_range: (i128, i128),
    pub tol: Rational,
}

impl SpeedupConfig {
    pub fn new(m: usize, count: usize, seed: u64) -> Self {
        SpeedupConfig {
            m,
            count,
            seed,
            max_tasks_per_processor: 4,
            period_range: (2, 50),
            tol: Rational::new(1, 1_000_000),
        }
    }
}

/// Generator attempts per processor before giving up on a set.
const SUBSET_RETRIES: usize = 200;

/// A set feasible on `m` unit-speed processors by construction: `m`
/// independently drawn uniprocessor-feasible subsets, merged in shuffled order.
pub fn feasible_by_construction(config: &SpeedupConfig, id: usize) -> Result<TaskSet, PartitionError> {
    if config.m == 0 {
        return Err(PartitionError::NoProcessors);
    }
    // distinct streams per processor count, so batches for different m are independent
    let mut rng = item_rng(config.seed ^ ((config.m as u64) << 32), id as u64);
    let mut tasks = Vec::new();
    for _ in 0..config.m {
        let subset = (0..SUBSET_RETRIES)
            .find_map(|_| {
                let gc = GeneratorConfig {
                    n: rng.gen_range(1..=config.max_tasks_per_processor.max(1)),
                    target_utilization: Rational::new(rng.gen_range(30..=100), 100),
                    period_range: config.period_range,
                    seed: rng.gen(),
                    constrained: true,
                };
                gen(&gc).ok().filter(|ts| edf_feasible(ts, DEFAULT_HORIZON_CAP).is_feasible())
            })
            .ok_or(GenError::Exhausted(SUBSET_RETRIES))?;
        tasks.extend(subset.into_tasks());
    }
    tasks.shuffle(&mut rng);
    TaskSet::new(tasks).map_err(|e| PartitionError::Generator(GenError::Config(e.to_string())))
}

/// Minimum partitioning speed for `count` feasible-by-construction sets.
/// Rows come back in `taskset_id` order whatever the thread count.
pub fn speedup_experiment(config: &SpeedupConfig) -> Result<Vec<SpeedupRow>, PartitionError> {
    let bound = speedup_bound(config.m.max(1));
    (0..config.count)
        .into_par_iter()
        .map(|id| {
            let ts = feasible_by_construction(config, id)?;
            let min_speed = min_speed_success(&ts, config.m, config.tol)?;
            Ok(SpeedupRow { taskset_id: id, m: config.m, min_speed, bound, margin: bound - min_speed })
        })
        .collect()
}
