//! Random task-set generation.
//!
//! [`gen`] draws utilizations with UUniFast, periods uniformly from an
//! integer range and deadlines uniformly on a grid in `[e, p]`. The small
//! integer generators back the randomized experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{edf_feasible, DEFAULT_HORIZON_CAP};
use crate::model::{SporadicTask, TaskSet};
use crate::rational::Rational;

/// Utilizations are multiples of `target / UTIL_STEPS`.
const UTIL_STEPS: i128 = 1000;
/// Deadlines are placed on `DEADLINE_STEPS` equal steps between `e` and the upper end.
const DEADLINE_STEPS: i128 = 1000;
const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("no valid task set after {0} attempts")]
    Exhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub target_utilization: Rational,
    pub period_range: (i128, i128),
    pub seed: u64,
    pub constrained: bool,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), GenError> {
        let (lo, hi) = self.period_range;
        if self.n == 0 {
            return Err(GenError::Config("n must be positive".into()));
        }
        if !self.target_utilization.is_positive() || self.target_utilization > Rational::ONE {
            return Err(GenError::Config(format!("utilization {} outside (0, 1]", self.target_utilization)));
        }
        if lo < 1 || lo > hi {
            return Err(GenError::Config(format!("bad period range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Deterministic RNG for the `index`-th item of a batch seeded with `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// UUniFast: `n` utilizations uniform on the simplex summing to 1.
fn uunifast(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut sum = 1.0f64;
    for i in 1..n {
        let next = sum * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    out.push(sum);
    out
}

/// Splits `UTIL_STEPS` into `n` positive integer parts by rounding the
/// cumulative sums of `shares`; `None` if some part rounds to zero.
fn integer_shares(shares: &[f64]) -> Option<Vec<i128>> {
    let mut parts = Vec::with_capacity(shares.len());
    let mut acc = 0.0;
    let mut prev = 0i128;
    for (i, s) in shares.iter().enumerate() {
        acc += s;
        let cut = if i + 1 == shares.len() { UTIL_STEPS } else { (acc * UTIL_STEPS as f64).round() as i128 };
        if cut <= prev {
            return None;
        }
        parts.push(cut - prev);
        prev = cut;
    }
    Some(parts)
}

/// Draws a task set per `config`; its total utilization equals the target exactly.
pub fn gen(config: &GeneratorConfig) -> Result<TaskSet, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.period_range;
    for _ in 0..MAX_RETRIES {
        let Some(parts) = integer_shares(&uunifast(&mut rng, config.n)) else { continue };
        let tasks: Vec<SporadicTask> = parts
            .into_iter()
            .map(|k| {
                let u = config.target_utilization * Rational::new(k, UTIL_STEPS);
                let p = Rational::from_integer(rng.gen_range(lo..=hi));
                let e = u * p;
                let top = if config.constrained { p } else { p + p };
                let step = rng.gen_range(0..=DEADLINE_STEPS);
                let d = e + (top - e) * Rational::new(step, DEADLINE_STEPS);
                SporadicTask::relaxed(e, d, p).expect("positive parameters")
            })
            .collect();
        let set = if config.constrained { TaskSet::new(tasks) } else { TaskSet::relaxed(tasks) };
        return set.map_err(|e| GenError::Config(e.to_string()));
    }
    Err(GenError::Exhausted(MAX_RETRIES))
}

/// `n` tasks with integer `1 ≤ e ≤ d ≤ p ≤ max_param`.
pub fn random_integer_set(rng: &mut impl Rng, n: usize, max_param: i128) -> TaskSet {
    let tasks = (0..n)
        .map(|_| {
            let p = rng.gen_range(1..=max_param);
            let d = rng.gen_range(1..=p);
            let e = rng.gen_range(1..=d);
            SporadicTask::new(e.into(), d.into(), p.into()).expect("valid by construction")
        })
        .collect();
    TaskSet::new(tasks).expect("non-empty")
}

/// Rejection-samples an EDF-feasible integer set with `1..=n_max` tasks.
pub fn random_feasible_integer_set(rng: &mut impl Rng, n_max: usize, max_param: i128) -> Result<TaskSet, GenError> {
    if n_max == 0 || max_param < 1 {
        return Err(GenError::Config("need n_max ≥ 1 and max_param ≥ 1".into()));
    }
    for _ in 0..MAX_RETRIES {
        let n = rng.gen_range(1..=n_max);
        let ts = random_integer_set(rng, n, max_param);
        if edf_feasible(&ts, DEFAULT_HORIZON_CAP).is_feasible() {
            return Ok(ts);
        }
    }
    Err(GenError::Exhausted(MAX_RETRIES))
}
