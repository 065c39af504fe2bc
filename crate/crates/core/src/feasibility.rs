//! Uniprocessor EDF feasibility through the processor-demand criterion
//! `dbf(τ, t) ≤ t` for all `t > 0`, and the `dbf*(τ, d_max) / d_max` ratio.
//!
//! `dbf` is a right-continuous step function whose jumps sit at the absolute
//! deadlines `d_i + k·p_i` of a synchronous release, so the criterion only
//! has to be checked at those points up to a sufficient horizon `L`:
//!
//! * `U < 1`: `L = max(d_max, Σ U_i (p_i − d_i) / (1 − U))`;
//! * `U = 1`: `L = H + d_max` with `H` the hyperperiod, falling back to the
//!   length of the synchronous busy period when `H` is out of reach;
//! * `U > 1`: the set is infeasible; the earliest violating checkpoint is
//!   searched up to `max(d_max, Σ U_i d_i / (U − 1))`, a point that is itself
//!   always a violation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::model::TaskSet;
use crate::rational::Rational;

/// Upper limit on the number of demand checkpoints a single test may visit.
pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;

/// Environment variable overriding [`DEFAULT_HORIZON_CAP`].
pub const HORIZON_CAP_ENV: &str = "DEMANDKIT_HORIZON_CAP";

/// Horizon cap from `DEMANDKIT_HORIZON_CAP`, or the default. Read once.
pub fn default_horizon_cap() -> u64 {
    static CAP: OnceLock<u64> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(HORIZON_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&cap| cap > 0)
            .unwrap_or(DEFAULT_HORIZON_CAP)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    HorizonOverflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    /// A `t` with `dbf(τ, t) > t`; present exactly when infeasible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_t: Option<Rational>,
    /// Horizon the criterion was (or would have to be) checked up to.
    #[serde(rename = "horizon")]
    pub horizon_used: Rational,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }

    pub fn is_infeasible(&self) -> bool {
        self.status == FeasibilityStatus::Infeasible
    }

    fn feasible(horizon: Rational) -> Self {
        FeasibilityVerdict { status: FeasibilityStatus::Feasible, witness_t: None, horizon_used: horizon }
    }

    fn infeasible(witness: Rational, horizon: Rational) -> Self {
        FeasibilityVerdict { status: FeasibilityStatus::Infeasible, witness_t: Some(witness), horizon_used: horizon }
    }

    fn overflow(horizon: Rational) -> Self {
        FeasibilityVerdict { status: FeasibilityStatus::HorizonOverflow, witness_t: None, horizon_used: horizon }
    }
}

/// Walks the absolute deadlines of a synchronous release in increasing
/// order, yielding each distinct point with the cumulative demand there.
pub struct Checkpoints<'a> {
    ts: &'a TaskSet,
    horizon: Rational,
    heap: BinaryHeap<Reverse<(Rational, usize)>>,
    demand: Rational,
}

impl<'a> Checkpoints<'a> {
    pub fn new(ts: &'a TaskSet, horizon: Rational) -> Self {
        let heap = ts.iter().enumerate().filter(|(_, t)| t.d <= horizon).map(|(i, t)| Reverse((t.d, i))).collect();
        Checkpoints { ts, horizon, heap, demand: Rational::ZERO }
    }
}

impl Iterator for Checkpoints<'_> {
    /// `(t, dbf(τ, t))`
    type Item = (Rational, Rational);

    fn next(&mut self) -> Option<Self::Item> {
        let Reverse((t, _)) = *self.heap.peek()?;
        while let Some(&Reverse((at, i))) = self.heap.peek() {
            if at != t {
                break;
            }
            self.heap.pop();
            let task = &self.ts.tasks()[i];
            self.demand += task.e;
            let next = at + task.p;
            if next <= self.horizon {
                self.heap.push(Reverse((next, i)));
            }
        }
        Some((t, self.demand))
    }
}

/// Every `d_i + k·p_i ≤ horizon`, sorted and deduplicated.
pub fn demand_checkpoints(ts: &TaskSet, horizon: Rational) -> Vec<Rational> {
    if !horizon.is_positive() {
        return Vec::new();
    }
    Checkpoints::new(ts, horizon).map(|(t, _)| t).collect()
}

/// Number of checkpoints `d_i + k·p_i ≤ horizon`, counted with multiplicity.
pub fn checkpoint_count(ts: &TaskSet, horizon: Rational) -> Rational {
    ts.iter().filter(|t| t.d <= horizon).map(|t| Rational::from_integer(((horizon - t.d) / t.p).floor() + 1)).sum()
}

/// Exact processor-demand test for EDF on a unit-speed uniprocessor.
///
/// Intended for constrained-deadline sets. `horizon_cap` bounds the number
/// of checkpoints the scan may need; a larger requirement is reported as
/// [`FeasibilityStatus::HorizonOverflow`], never truncated.
pub fn edf_feasible(ts: &TaskSet, horizon_cap: u64) -> FeasibilityVerdict {
    let cap = Rational::from(horizon_cap);
    let d_max = ts.d_max();
    let u = ts.utilization();
    let within_cap = |horizon: Rational| checkpoint_count(ts, horizon) <= cap;
    // t with at most `cap` checkpoints in (0, t]: the densest task alone would fill it
    let min_p = ts.iter().map(|t| t.p).min().expect("non-empty");
    let reach = cap * min_p / Rational::from(ts.len());

    if u > Rational::ONE {
        let weighted: Rational = ts.iter().map(|t| t.utilization() * t.d).sum();
        let bound = d_max.max(weighted / (u - Rational::ONE));
        let scan_to = if within_cap(bound) { bound } else { reach };
        let witness = first_violation(ts, scan_to).unwrap_or(bound);
        return FeasibilityVerdict::infeasible(witness, bound);
    }

    let horizon = if u < Rational::ONE {
        let slack: Rational = ts.iter().map(|t| t.utilization() * (t.p - t.d)).sum();
        d_max.max(slack / (Rational::ONE - u))
    } else {
        match ts.checked_hyperperiod().and_then(|h| h.checked_add(&d_max)) {
            Some(h) if within_cap(h) => h,
            other => match synchronous_busy_period(ts, reach) {
                Some(busy) => busy.max(d_max),
                None => return FeasibilityVerdict::overflow(other.unwrap_or(reach)),
            },
        }
    };
    if !within_cap(horizon) {
        return FeasibilityVerdict::overflow(horizon);
    }
    match first_violation(ts, horizon) {
        Some(witness) => FeasibilityVerdict::infeasible(witness, horizon),
        None => FeasibilityVerdict::feasible(horizon),
    }
}

/// [`edf_feasible`] with [`default_horizon_cap`].
pub fn is_edf_feasible(ts: &TaskSet) -> bool {
    edf_feasible(ts, default_horizon_cap()).is_feasible()
}

/// Earliest checkpoint `t ≤ horizon` with `dbf(τ, t) > t`.
fn first_violation(ts: &TaskSet, horizon: Rational) -> Option<Rational> {
    Checkpoints::new(ts, horizon).find(|&(t, demand)| demand > t).map(|(t, _)| t)
}

/// Smallest `t > 0` with `Σ ⌈t / p_i⌉ e_i = t`, or `None` past `limit`.
fn synchronous_busy_period(ts: &TaskSet, limit: Rational) -> Option<Rational> {
    let mut w: Rational = ts.iter().map(|t| t.e).sum();
    loop {
        if w > limit {
            return None;
        }
        let next: Rational = ts.iter().map(|t| Rational::from_integer((w / t.p).ceil()) * t.e).sum();
        if next == w {
            return Some(w);
        }
        w = next;
    }
}

/// `dbf*(τ, d_max) / d_max`.
pub fn rho_ratio(ts: &TaskSet) -> Rational {
    let d_max = ts.d_max();
    ts.dbf_star(d_max) / d_max
}
