//! Aligned unit instances and bounds on the `dbf*(τ, d_max)/d_max` ratio.
//!
//! An aligned unit instance of size `n` is fixed by a permutation `π` of
//! `1..=n`: task `j` has `e_j = 1`, `d_j = j`, and `p_{π(i)} = n + i − π(i)`,
//! so that `d_{π(i)} + p_{π(i)} = n + i`. Its ratio at `t = n` is
//! `2 − (1/n)·Σ_i i/(n + i − π(i))`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{edf_feasible, rho_ratio, DEFAULT_HORIZON_CAP};
use crate::generator::{item_rng, random_feasible_integer_set};
use crate::model::{SporadicTask, TaskSet};
use crate::rational::Rational;
use crate::transform::{f_feasible, normalize_chen, split_equal_execution, tighten_deadlines};

/// Largest `n` accepted by [`mp4_brute_force`] (10! permutations).
pub const MAX_BRUTE_N: usize = 10;

pub fn fourteen_ninths() -> Rational {
    Rational::new(14, 9)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RhoError {
    #[error("not a permutation of 1..={n}: {pi:?}")]
    NotPermutation { n: usize, pi: Vec<usize> },
    #[error("n = {0} is outside 1..={MAX_BRUTE_N}")]
    OutOfRange(usize),
    #[error("n must be positive")]
    Empty,
}

/// `n` and a permutation `pi` of `1..=n` (stored 1-based, `pi[i-1] = π(i)`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AlignedInstance {
    n: usize,
    pi: Vec<usize>,
}

impl AlignedInstance {
    pub fn new(pi: Vec<usize>) -> Result<Self, RhoError> {
        let n = pi.len();
        if n == 0 {
            return Err(RhoError::Empty);
        }
        let mut seen = vec![false; n];
        for &v in &pi {
            if v == 0 || v > n || std::mem::replace(&mut seen[v - 1], true) {
                return Err(RhoError::NotPermutation { n, pi });
            }
        }
        Ok(AlignedInstance { n, pi })
    }

    pub fn identity(n: usize) -> Result<Self, RhoError> {
        Self::new((1..=n).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    /// `p_j` for `j = 1..=n`, as integers.
    pub fn periods(&self) -> Vec<usize> {
        let mut p = vec![0; self.n];
        for (i, &j) in (1..).zip(&self.pi) {
            p[j - 1] = self.n + i - j;
        }
        p
    }
}

/// The tasks of an aligned instance. Deadlines may exceed periods.
pub fn instance_taskset(inst: &AlignedInstance) -> TaskSet {
    let tasks = (1..)
        .zip(inst.periods())
        .map(|(j, p): (i128, usize)| {
            SporadicTask::relaxed(Rational::ONE, Rational::from(j), Rational::from(p)).expect("positive")
        })
        .collect();
    TaskSet::relaxed(tasks).expect("non-empty")
}

/// `2 − (1/n)·Σ_i i/(n + i − π(i))`, exact.
pub fn mp4_objective(inst: &AlignedInstance) -> Rational {
    let n = inst.n;
    let sum: Rational = (1..).zip(&inst.pi).map(|(i, &j)| Rational::new(i as i128, (n + i - j) as i128)).sum();
    Rational::from_integer(2) - sum / Rational::from(n)
}

/// `f(τ, t) ≤ t` for all `t > 0`, checked at every jump point of `f`.
pub fn verify_f_feasibility(inst: &AlignedInstance) -> bool {
    f_feasible(&instance_taskset(inst))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchReport {
    pub n: usize,
    pub best_pi: Vec<usize>,
    pub best_value: Rational,
    pub feasible_count: u64,
    /// `best_value ≤ 14/9`; a `false` here is a counterexample to the bound.
    pub bound_14_9_ok: bool,
}

impl SearchReport {
    pub const CSV_HEADER: &'static str = "n,best_value_num,best_value_den,best_value_float,margin_14_9";

    pub fn csv_row(&self) -> String {
        let v = self.best_value;
        let margin = fourteen_ninths() - v;
        format!("{},{},{},{:.12},{:.12}", self.n, v.numer(), v.denom(), v.to_f64(), margin.to_f64())
    }
}

/// Integer form of the f-feasibility check for a permutation given as
/// 1-based `pi`. Rebuilds the jump points from the periods rather than
/// relying on the aligned structure.
fn f_feasible_fast(pi: &[usize], periods: &mut [usize], reach_count: &mut [usize]) -> bool {
    let n = pi.len();
    for (i, &j) in (1..).zip(pi) {
        periods[j - 1] = n + i - j;
    }
    reach_count.iter_mut().for_each(|c| *c = 0);
    for (j, &p) in (1..).zip(periods.iter()) {
        reach_count[j + p] += 1;
    }
    // f(t) = #{j ≤ t} + #{j : j + p_j ≤ t}; every jump is an integer in 1..2n
    let mut reached = 0;
    for (t, &count) in reach_count.iter().enumerate().skip(1) {
        reached += count;
        if t.min(n) + reached > t {
            return false;
        }
    }
    true
}

/// Lexicographic successor in place; `false` when `v` was the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else { return false };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn lcm_up_to(k: u64) -> u64 {
    (1..=k).fold(1, num_integer::lcm)
}

/// Best (smallest) scaled sum, its permutation and the feasible count, for
/// all permutations starting with `first`.
fn search_shard(n: usize, first: usize, scale: u64) -> (Option<(u64, Vec<usize>)>, u64) {
    let mut pi: Vec<usize> = std::iter::once(first).chain((1..=n).filter(|&v| v != first)).collect();
    let mut periods = vec![0; n];
    let mut reach_count = vec![0; 2 * n + 1];
    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut feasible = 0;
    loop {
        if f_feasible_fast(&pi, &mut periods, &mut reach_count) {
            feasible += 1;
            let sum: u64 = (1..).zip(&pi).map(|(i, &j)| i as u64 * (scale / (n + i - j) as u64)).sum();
            // enumeration order is lexicographic, so keeping the first minimum breaks ties
            if best.as_ref().is_none_or(|(s, _)| sum < *s) {
                best = Some((sum, pi.clone()));
            }
        }
        if !next_permutation(&mut pi[1..]) {
            break;
        }
    }
    (best, feasible)
}

/// Maximizes the aligned objective over every f-feasible permutation of
/// `1..=n`. Ties go to the lexicographically smallest permutation.
pub fn mp4_brute_force(n: usize) -> Result<SearchReport, RhoError> {
    if n == 0 || n > MAX_BRUTE_N {
        return Err(RhoError::OutOfRange(n));
    }
    // Σ i/(n+i−π(i)) scaled by the lcm of every possible period 1..2n−1
    let scale = lcm_up_to(2 * n as u64 - 1);
    let shards: Vec<_> = (1..=n).into_par_iter().map(|first| search_shard(n, first, scale)).collect();

    let feasible_count = shards.iter().map(|(_, c)| c).sum();
    let (best_sum, best_pi) = shards
        .into_iter()
        .filter_map(|(best, _)| best)
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .expect("the identity permutation is always f-feasible");

    let inst = AlignedInstance::new(best_pi).expect("enumerated permutation");
    let best_value = mp4_objective(&inst);
    debug_assert_eq!(
        best_value,
        Rational::from_integer(2) - Rational::new(best_sum as i128, scale as i128 * n as i128)
    );
    Ok(SearchReport { n, best_pi: inst.pi, best_value, feasible_count, bound_14_9_ok: best_value <= fourteen_ninths() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchyReport {
    pub n: usize,
    /// `(Σ √i)² / n²`
    pub closed_form: f64,
    /// Minimum of `Σ i/x_i` over `Σ x_i = n²` found by solving the
    /// stationarity condition numerically.
    pub numeric: f64,
    pub bound: f64,
    pub bound_ok: bool,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

/// Minimum of `Σ_{i≤n} i/x_i` subject to `Σ x_i = n²`, `x_i > 0`.
///
/// The numeric value bisects on the multiplier `λ` of `i/x_i² = λ`
/// until `Σ √(i/λ) = n²`, independently of the closed form.
pub fn cauchy_min(n: usize) -> Result<CauchyReport, RhoError> {
    if n == 0 {
        return Err(RhoError::Empty);
    }
    let nf = n as f64;
    let target = nf * nf;
    let root_sum = compensated_sum((1..=n).map(|i| (i as f64).sqrt()));
    let closed_form = root_sum * root_sum / target;

    // Σ x_i(λ) is decreasing in λ; bisect log λ
    let total = |log_lambda: f64| compensated_sum((1..=n).map(|i| (i as f64 / log_lambda.exp()).sqrt()));
    let (mut lo, mut hi) = (-200.0f64, 200.0f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (0.5 * (lo + hi)).exp();
    let xs: Vec<f64> = (1..=n).map(|i| (i as f64 / lambda).sqrt()).collect();
    // project back onto the constraint before evaluating
    let scale = target / compensated_sum(xs.iter().copied());
    let numeric = compensated_sum(xs.iter().zip(1..).map(|(x, i)| i as f64 / (x * scale)));

    let bound = 4.0 * nf / 9.0;
    Ok(CauchyReport { n, closed_form, numeric, bound, bound_ok: closed_form >= bound })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeConfig {
    pub n_max: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest integer parameter drawn.
    pub max_param: i128,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { n_max: 6, samples: 10_000, seed: 0, max_param: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeResult {
    pub best_ratio: Rational,
    pub best: TaskSet,
    /// Feasible sets whose ratio was evaluated, pipeline stages included.
    pub evaluated: usize,
    /// Evaluated sets whose ratio exceeded 14/9.
    pub above_14_9: usize,
}

/// Ratios of `ts` and of its feasible intermediate pipeline stages.
fn probe_candidates(ts: TaskSet) -> Vec<TaskSet> {
    let mut out = vec![ts];
    let Ok(normalized) = normalize_chen(&out[0]) else { return out };
    out.push(normalized);
    let Ok(tight) = tighten_deadlines(&out[1]) else { return out };
    out.push(tight);
    if let Ok(split) = split_equal_execution(&out[2]) {
        out.push(split);
    }
    out
}

/// Largest ratio over random feasible integer sets and their
/// constrained-deadline pipeline stages. Reproducible for a fixed seed
/// regardless of thread count.
pub fn probe_rho_lower(config: &ProbeConfig) -> Result<ProbeResult, crate::generator::GenError> {
    let per_sample: Vec<(usize, Vec<TaskSet>)> = (0..config.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = item_rng(config.seed, k as u64);
            random_feasible_integer_set(&mut rng, config.n_max, config.max_param).map(|ts| (k, probe_candidates(ts)))
        })
        .collect::<Result<_, _>>()?;

    let bound = fourteen_ninths();
    let mut evaluated = 0;
    let mut above = 0;
    let mut best: Option<(Rational, TaskSet)> = None;
    for (_, candidates) in per_sample {
        for ts in candidates {
            debug_assert!(ts.is_constrained() && edf_feasible(&ts, DEFAULT_HORIZON_CAP).is_feasible());
            let r = rho_ratio(&ts);
            evaluated += 1;
            above += usize::from(r > bound);
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, ts));
            }
        }
    }
    let (best_ratio, best) = best.ok_or(crate::generator::GenError::Config("samples must be positive".into()))?;
    Ok(ProbeResult { best_ratio, best, evaluated, above_14_9: above })
}
