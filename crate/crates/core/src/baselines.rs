//! Reference algorithms: exhaustive oracles for small instances, the
//! multi-start relative greedy (RG) and a sort-by-cost greedy.

use std::time::{Duration, Instant};

use crate::qkbp::greedy_left;
use crate::{Budget, Error, NodeSet, QkpInstance, Rational, Result};

pub const BRUTE_FORCE_LIMIT: usize = 24;
pub const S_EXCESS_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub objective: i64,
    pub set: NodeSet,
    pub enumerated: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicResult {
    pub set: NodeSet,
    pub objective: i64,
    pub cost: i64,
    pub timed_out: bool,
}

impl HeuristicResult {
    fn of(inst: &QkpInstance, set: NodeSet, timed_out: bool) -> Self {
        Self {
            objective: inst.objective_of(set.as_mask()),
            cost: inst.cost_of(set.as_mask()),
            set,
            timed_out,
        }
    }
}

/// Walks all 2ⁿ subsets in Gray-code order, calling `visit` with the
/// current mask, its objective and its cost.
fn enumerate(inst: &QkpInstance, mut visit: impl FnMut(&[bool], i64, i64)) -> u64 {
    let n = inst.n();
    let mut mask = vec![false; n];
    let mut link = vec![0i64; n];
    let (mut objective, mut cost) = (0i64, 0i64);
    visit(&mask, objective, cost);
    let total = 1u64 << n;
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        let sign = if mask[i] { -1 } else { 1 };
        objective += sign * (inst.singletons()[i] + link[i]);
        cost += sign * inst.costs()[i];
        mask[i] = !mask[i];
        for &(j, u) in inst.neighbors(i) {
            link[j] += sign * u;
        }
        visit(&mask, objective, cost);
    }
    total
}

fn indices(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

/// Exact optimum by exhaustive enumeration. Among optimal sets the one
/// whose sorted index list is lexicographically smallest is returned.
pub fn brute_force(inst: &QkpInstance, budget: Budget) -> Result<OracleResult> {
    if inst.n() > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n: inst.n(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best = 0i64;
    let mut best_set: Vec<usize> = Vec::new();
    let enumerated = enumerate(inst, |mask, obj, cost| {
        if cost > budget.value || obj < best {
            return;
        }
        let idx = indices(mask);
        if obj > best || idx < best_set {
            best = obj;
            best_set = idx;
        }
    });
    Ok(OracleResult {
        objective: best,
        set: NodeSet::from_indices(inst.n(), best_set)?,
        enumerated,
    })
}

/// Exact maximum of `U(S) − λ q(S)` over all subsets including ∅, with the
/// union of all maximizers as the returned set.
pub fn brute_force_s_excess(inst: &QkpInstance, lambda: Rational) -> Result<(Rational, NodeSet)> {
    if inst.n() > S_EXCESS_LIMIT {
        return Err(Error::TooLarge {
            n: inst.n(),
            limit: S_EXCESS_LIMIT,
        });
    }
    let mut best = Rational::from_integer(0);
    let mut union = vec![false; inst.n()];
    enumerate(inst, |mask, obj, cost| {
        let value = Rational::from_integer(obj as i128) - lambda * cost as i128;
        if value > best {
            best = value;
            union.copy_from_slice(mask);
        } else if value == best {
            union.iter_mut().zip(mask).for_each(|(u, &m)| *u |= m);
        }
    });
    Ok((best, NodeSet::from_mask(union)))
}

/// Greedy-left restarted from every single node that fits, in index order.
/// The time limit is checked before each restart after the first.
pub fn rg_heuristic(inst: &QkpInstance, budget: Budget, time_limit: Option<Duration>) -> Result<HeuristicResult> {
    let started = Instant::now();
    let mut best: Option<NodeSet> = None;
    let mut best_obj = i64::MIN;
    let mut timed_out = false;
    for i in 0..inst.n() {
        if inst.costs()[i] > budget.value {
            continue;
        }
        if best.is_some() && time_limit.is_some_and(|t| started.elapsed() >= t) {
            timed_out = true;
            break;
        }
        let set = greedy_left(inst, &NodeSet::from_indices(inst.n(), [i])?, budget)?;
        let obj = inst.objective_of(set.as_mask());
        if obj > best_obj {
            best_obj = obj;
            best = Some(set);
        }
    }
    let set = match best {
        Some(s) => s,
        None => greedy_left(inst, &NodeSet::empty(inst.n()), budget)?,
    };
    Ok(HeuristicResult::of(inst, set, timed_out))
}

/// Takes nodes in nondecreasing cost order (ties by index) while they fit.
pub fn weight_sort_greedy(inst: &QkpInstance, budget: Budget) -> HeuristicResult {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by_key(|&i| inst.costs()[i]);
    let mut set = NodeSet::empty(inst.n());
    let mut spent = 0;
    for i in order {
        if spent + inst.costs()[i] > budget.value {
            break;
        }
        spent += inst.costs()[i];
        set.insert(i);
    }
    HeuristicResult::of(inst, set, false)
}
