//! Budget repair between breakpoints.
//!
//! A budget that hits a breakpoint is answered by that breakpoint's set.
//! Otherwise greedy-left grows the lower neighbour by best utility-per-cost
//! and greedy-right shrinks the upper neighbour by smallest loss-per-cost;
//! the better of the two is returned.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::envelope::{build_envelope, Envelope};
use crate::{Budget, Error, NodeSet, QkpInstance, Rational, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BreakpointExact,
    GreedyLeft,
    GreedyRight,
    BelowFirstBreakpoint,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::BreakpointExact => "breakpoint-exact",
            Method::GreedyLeft => "greedy-left",
            Method::GreedyRight => "greedy-right",
            Method::BelowFirstBreakpoint => "below-first-breakpoint",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub budget: Budget,
    pub set: NodeSet,
    pub objective: i64,
    pub cost: i64,
    pub method: Method,
    /// Interpolated envelope value at the budget.
    pub envelope_value: Rational,
    /// Lagrangian bound at the budget; never below the optimum.
    pub upper_bound: Rational,
    pub sweep_time: Duration,
    pub repair_time: Duration,
}

/// Utility-per-cost ratio `gain / cost`, with zero cost ranking above every
/// finite ratio. Higher ratios order greater, equal ratios prefer the lower
/// node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio {
    gain: i64,
    cost: i64,
    node: usize,
}

impl Ratio {
    fn cmp_value(&self, other: &Self) -> Ordering {
        match (self.cost == 0, other.cost == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => {
                (self.gain as i128 * other.cost as i128).cmp(&(other.gain as i128 * self.cost as i128))
            }
        }
    }
}

/// Max-heap entry for greedy-left: best ratio first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Best(Ratio);

impl Ord for Best {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .cmp_value(&other.0)
            .then_with(|| other.0.node.cmp(&self.0.node))
    }
}

impl PartialOrd for Best {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Max-heap entry for greedy-right: smallest ratio first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Least(Ratio);

impl Ord for Least {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .cmp_value(&self.0)
            .then_with(|| other.0.node.cmp(&self.0.node))
    }
}

impl PartialOrd for Least {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incremental greedy-left state. `gain[i]` is uᵢᵢ + Σ_{j∈S} uᵢⱼ for every
/// node outside the current set; only positive gains are candidates.
#[derive(Clone)]
struct GreedyLeft<'a> {
    inst: &'a QkpInstance,
    members: Vec<bool>,
    gain: Vec<i64>,
    spent: i64,
    heap: BinaryHeap<Best>,
    order: Vec<usize>,
}

impl<'a> GreedyLeft<'a> {
    fn new(inst: &'a QkpInstance, start: &NodeSet) -> Self {
        let members = start.as_mask().to_vec();
        let mut gain = inst.singletons().to_vec();
        for i in start.iter() {
            for &(j, u) in inst.neighbors(i) {
                gain[j] += u;
            }
        }
        let mut heap = BinaryHeap::new();
        for i in 0..inst.n() {
            if !members[i] && gain[i] > 0 {
                heap.push(Best(Ratio {
                    gain: gain[i],
                    cost: inst.costs()[i],
                    node: i,
                }));
            }
        }
        Self {
            inst,
            spent: inst.cost_of(&members),
            members,
            gain,
            heap,
            order: Vec::new(),
        }
    }

    fn insert(&mut self, i: usize) {
        self.members[i] = true;
        self.spent += self.inst.costs()[i];
        self.order.push(i);
        for &(j, u) in self.inst.neighbors(i) {
            if !self.members[j] {
                self.gain[j] += u;
                if self.gain[j] > 0 {
                    self.heap.push(Best(Ratio {
                        gain: self.gain[j],
                        cost: self.inst.costs()[j],
                        node: j,
                    }));
                }
            }
        }
    }

    /// Adds the best fitting candidate until none is left.
    fn run(&mut self, budget: i64) {
        while let Some(Best(top)) = self.heap.pop() {
            let i = top.node;
            if self.members[i] || self.gain[i] != top.gain {
                continue;
            }
            // spending only grows, so a node that misses now never fits
            if self.spent + self.inst.costs()[i] > budget {
                continue;
            }
            self.insert(i);
        }
    }

    fn into_set(self) -> NodeSet {
        NodeSet::from_mask(self.members)
    }
}

/// Adds nodes to `start` by largest utility gain per unit cost while the
/// budget allows. Nodes whose gain is not positive are never added.
pub fn greedy_left(inst: &QkpInstance, start: &NodeSet, budget: Budget) -> Result<NodeSet> {
    inst.check_set(start)?;
    let cost = inst.cost(start)?;
    if cost > budget.value {
        return Err(Error::InfeasibleStart {
            cost,
            budget: budget.value,
        });
    }
    let mut state = GreedyLeft::new(inst, start);
    state.run(budget.value);
    Ok(state.into_set())
}

/// Removal sequence of greedy-right from a start set, independent of the
/// budget. `loss[i]` is Σ_{j∈S} uᵢⱼ with j = i included, i.e. the utility
/// lost by removing i; zero-cost members are never removed.
struct RemovalTrail {
    removed: Vec<usize>,
    /// Cost of the set after each removal.
    spent_after: Vec<i64>,
    start_cost: i64,
}

impl RemovalTrail {
    fn record(inst: &QkpInstance, start: &NodeSet, floor: i64) -> Self {
        let mut members = start.as_mask().to_vec();
        let mut loss = inst.singletons().to_vec();
        for i in start.iter() {
            for &(j, u) in inst.neighbors(i) {
                if members[j] {
                    loss[i] += u;
                }
            }
        }
        let mut heap: BinaryHeap<Least> = start
            .iter()
            .filter(|&i| inst.costs()[i] > 0)
            .map(|i| {
                Least(Ratio {
                    gain: loss[i],
                    cost: inst.costs()[i],
                    node: i,
                })
            })
            .collect();
        let start_cost = inst.cost_of(&members);
        let mut spent = start_cost;
        let mut removed = Vec::new();
        let mut spent_after = Vec::new();
        while spent > floor {
            let Some(Least(top)) = heap.pop() else { break };
            let i = top.node;
            if !members[i] || loss[i] != top.gain {
                continue;
            }
            members[i] = false;
            spent -= inst.costs()[i];
            removed.push(i);
            spent_after.push(spent);
            for &(j, u) in inst.neighbors(i) {
                if members[j] {
                    loss[j] -= u;
                    if inst.costs()[j] > 0 {
                        heap.push(Least(Ratio {
                            gain: loss[j],
                            cost: inst.costs()[j],
                            node: j,
                        }));
                    }
                }
            }
        }
        Self {
            removed,
            spent_after,
            start_cost,
        }
    }

    /// Start set minus the shortest removal prefix that fits the budget.
    fn truncate(&self, start: &NodeSet, budget: i64) -> NodeSet {
        let mut set = start.clone();
        if self.start_cost <= budget {
            return set;
        }
        for (&i, &spent) in self.removed.iter().zip(&self.spent_after) {
            set.remove(i);
            if spent <= budget {
                break;
            }
        }
        set
    }
}

/// Removes members of `start` by smallest utility loss per unit
/// cost until the set fits, then tops up with greedy-left.
pub fn greedy_right(inst: &QkpInstance, start: &NodeSet, budget: Budget) -> Result<NodeSet> {
    inst.check_set(start)?;
    let trail = RemovalTrail::record(inst, start, budget.value);
    let trimmed = trail.truncate(start, budget.value);
    greedy_left(inst, &trimmed, budget)
}

/// Builds the envelope once and answers every budget from it.
pub fn solve_budgets(inst: &QkpInstance, budgets: &[Budget], p: usize) -> Result<(Envelope, Vec<SolveResult>)> {
    let env = build_envelope(inst, p)?;
    let results = solve(inst, &env, budgets)?;
    Ok((env, results))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Bracket {
    Exact(usize),
    /// Strictly between breakpoints `l` and `l + 1`.
    Between(usize),
    Beyond,
}

/// Answers each budget from a prebuilt envelope.
///
/// Budgets sharing a bracket share greedy work: greedy-left follows one
/// insertion trajectory and branches off where a budget can no longer
/// afford the next pick, greedy-right follows one removal trajectory and
/// truncates it. Results are made monotone in the budget by carrying a
/// better answer found for a smaller budget forward.
pub fn solve(inst: &QkpInstance, env: &Envelope, budgets: &[Budget]) -> Result<Vec<SolveResult>> {
    if env.fingerprint() != inst.fingerprint() {
        return Err(Error::EnvelopeMismatch);
    }
    let pts = env.breakpoints();
    let bracket_of = |b: i64| -> Bracket {
        match pts.binary_search_by_key(&b, |p| p.budget) {
            Ok(j) => Bracket::Exact(j),
            Err(j) if j >= pts.len() => Bracket::Beyond,
            Err(j) => Bracket::Between(j - 1),
        }
    };

    let mut order: Vec<usize> = (0..budgets.len()).collect();
    order.sort_by_key(|&k| (budgets[k].value, k));

    let mut answers: Vec<Option<(NodeSet, Method, Duration)>> = vec![None; budgets.len()];
    let mut k = 0;
    while k < order.len() {
        let bracket = bracket_of(budgets[order[k]].value);
        let mut end = k;
        while end < order.len() && bracket_of(budgets[order[end]].value) == bracket {
            end += 1;
        }
        let group = &order[k..end];
        let started = Instant::now();
        let sets = match bracket {
            Bracket::Exact(j) => group
                .iter()
                .map(|_| (pts[j].set.clone(), Method::BreakpointExact))
                .collect(),
            Bracket::Beyond => left_branches(inst, &env.last().set, budgets, group)
                .into_iter()
                .map(|s| (s, Method::GreedyLeft))
                .collect(),
            Bracket::Between(l) => between(inst, env, l, budgets, group),
        };
        let per = started.elapsed() / group.len().max(1) as u32;
        for (&idx, (set, method)) in group.iter().zip(sets) {
            answers[idx] = Some((set, method, per));
        }
        k = end;
    }

    let mut results: Vec<Option<SolveResult>> = vec![None; budgets.len()];
    let mut carried: Option<(NodeSet, i64, i64, Method)> = None;
    for &idx in &order {
        let (set, method, repair_time) = answers[idx].take().expect("every budget answered");
        let budget = budgets[idx];
        let mut pick = (inst.objective(&set)?, inst.cost(&set)?, set, method);
        if let Some((cset, cobj, ccost, cmethod)) = &carried {
            if *cobj > pick.0 {
                pick = (*cobj, *ccost, cset.clone(), *cmethod);
            }
        }
        let (objective, cost, set, method) = pick;
        carried = Some((set.clone(), objective, cost, method));

        let at = Rational::from_integer(budget.value as i128);
        let result = SolveResult {
            budget,
            objective,
            cost,
            method,
            envelope_value: env.upper_bound_at(at),
            upper_bound: env.lagrangian_bound_at(at),
            sweep_time: env.stats.sweep_time,
            repair_time,
            set,
        };
        if result.cost > budget.value {
            return Err(Error::Invariant(format!(
                "solution costs {} over budget {}",
                result.cost, budget.value
            )));
        }
        if Rational::from_integer(result.objective as i128) > result.upper_bound {
            return Err(Error::Invariant(format!(
                "objective {} exceeds the bound {} at budget {}",
                result.objective, result.upper_bound, budget.value
            )));
        }
        results[idx] = Some(result);
    }
    Ok(results.into_iter().map(|r| r.expect("filled")).collect())
}

/// Greedy-left from one start for several budgets (all at least the start
/// cost), sharing the common insertion prefix.
fn left_branches(inst: &QkpInstance, start: &NodeSet, budgets: &[Budget], group: &[usize]) -> Vec<NodeSet> {
    let top = group.iter().map(|&k| budgets[k].value).max().unwrap_or(0);
    let trunk_start = GreedyLeft::new(inst, start);
    let mut probe = trunk_start.clone();
    probe.run(top);
    let trajectory = probe.order;

    let mut trunk = trunk_start;
    let mut taken = 0;
    let mut spent = inst.cost_of(start.as_mask());
    let mut out = Vec::with_capacity(group.len());
    // group is sorted by budget, so the shared prefix only grows
    for &k in group {
        let b = budgets[k].value;
        while taken < trajectory.len() && spent + inst.costs()[trajectory[taken]] <= b {
            spent += inst.costs()[trajectory[taken]];
            trunk.insert(trajectory[taken]);
            taken += 1;
        }
        let mut branch = trunk.clone();
        branch.run(b);
        out.push(branch.into_set());
    }
    out
}

fn between(
    inst: &QkpInstance,
    env: &Envelope,
    l: usize,
    budgets: &[Budget],
    group: &[usize],
) -> Vec<(NodeSet, Method)> {
    let pts = env.breakpoints();
    let lower = &pts[l].set;
    let upper = &pts[l + 1].set;

    let lefts: Vec<(NodeSet, Method)> = if l == 0 {
        // seed with the best-connected node that fits, one seed per budget
        let score: Vec<i64> = inst
            .weighted_degrees()
            .iter()
            .zip(inst.singletons())
            .map(|(d, u)| d + u)
            .collect();
        let base = inst.cost_of(lower.as_mask());
        let mut seeded: Vec<(usize, NodeSet)> = Vec::with_capacity(group.len());
        for &k in group {
            let b = budgets[k].value;
            let seed = (0..inst.n())
                .filter(|&i| !lower.contains(i) && base + inst.costs()[i] <= b)
                .max_by(|&x, &y| score[x].cmp(&score[y]).then_with(|| y.cmp(&x)));
            let mut start = lower.clone();
            if let Some(s) = seed {
                start.insert(s);
            }
            seeded.push((k, start));
        }
        let mut out = Vec::with_capacity(group.len());
        let mut i = 0;
        while i < seeded.len() {
            let mut j = i;
            while j < seeded.len() && seeded[j].1 == seeded[i].1 {
                j += 1;
            }
            let ks: Vec<usize> = seeded[i..j].iter().map(|(k, _)| *k).collect();
            for set in left_branches(inst, &seeded[i].1, budgets, &ks) {
                out.push((set, Method::BelowFirstBreakpoint));
            }
            i = j;
        }
        out
    } else {
        left_branches(inst, lower, budgets, group)
            .into_iter()
            .map(|s| (s, Method::GreedyLeft))
            .collect()
    };

    let smallest = group.iter().map(|&k| budgets[k].value).min().unwrap_or(0);
    let trail = RemovalTrail::record(inst, upper, smallest);
    let rights: Vec<NodeSet> = group
        .iter()
        .map(|&k| {
            let b = budgets[k].value;
            let trimmed = trail.truncate(upper, b);
            let mut state = GreedyLeft::new(inst, &trimmed);
            state.run(b);
            state.into_set()
        })
        .collect();

    lefts
        .into_iter()
        .zip(rights)
        .map(|((left, method), right)| {
            if inst.objective_of(right.as_mask()) > inst.objective_of(left.as_mask()) {
                (right, Method::GreedyRight)
            } else {
                (left, method)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::DEFAULT_GRID_SIZE;
    use crate::instance::tests::{random_instance, t1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize, idx: &[usize]) -> NodeSet {
        NodeSet::from_indices(n, idx.iter().copied()).unwrap()
    }

    fn budget(b: i64) -> Budget {
        Budget::new(b).unwrap()
    }

    fn best_feasible(inst: &QkpInstance, b: i64) -> i64 {
        let n = inst.n();
        (0u32..1 << n)
            .map(|bits| (0..n).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>())
            .filter(|m| inst.cost_of(m) <= b)
            .map(|m| inst.objective_of(&m))
            .max()
            .unwrap()
    }

    #[test]
    fn greedy_left_examples() {
        let t = t1();
        assert_eq!(greedy_left(&t, &NodeSet::empty(2), budget(2)).unwrap(), set(2, &[0]));
        assert_eq!(greedy_left(&t, &NodeSet::empty(2), budget(5)).unwrap(), set(2, &[0, 1]));
        assert_eq!(greedy_left(&t, &set(2, &[0, 1]), budget(5)).unwrap(), set(2, &[0, 1]));
        assert_eq!(
            greedy_left(&t, &set(2, &[1]), budget(2)),
            Err(Error::InfeasibleStart { cost: 3, budget: 2 })
        );
    }

    #[test]
    fn greedy_left_skips_unprofitable_nodes() {
        let inst = QkpInstance::new("x", vec![1, 1], vec![2, -1], []).unwrap();
        assert_eq!(greedy_left(&inst, &NodeSet::empty(2), budget(10)).unwrap(), set(2, &[0]));
    }

    #[test]
    fn greedy_left_takes_free_nodes_first() {
        // node 2 is free but only pays off once node 0 is in
        let inst = QkpInstance::new("x", vec![1, 3, 0], vec![1, 2, -1], [(0, 2, 4)]).unwrap();
        let got = greedy_left(&inst, &NodeSet::empty(3), budget(1)).unwrap();
        assert_eq!(got, set(3, &[0, 2]));
    }

    #[test]
    fn greedy_right_examples() {
        let t = t1();
        assert_eq!(greedy_right(&t, &set(2, &[0, 1]), budget(2)).unwrap(), set(2, &[0]));
        // already feasible: only the top-up runs
        assert_eq!(greedy_right(&t, &set(2, &[0]), budget(5)).unwrap(), set(2, &[0, 1]));
    }

    #[test]
    fn greedy_right_breaks_ties_by_index() {
        // a path 0-1-2 with equal costs: 0 and 2 both lose 3, node 0 goes first
        let inst = QkpInstance::new("p", vec![2, 2, 2], vec![0, 0, 0], [(0, 1, 3), (1, 2, 3)]).unwrap();
        let got = greedy_right(&inst, &NodeSet::full(3), budget(4)).unwrap();
        assert_eq!(got, set(3, &[1, 2]));
    }

    #[test]
    fn solve_t1() {
        let t = t1();
        let (env, res) = solve_budgets(&t, &[budget(5)], DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(res[0].objective, 13);
        assert_eq!(res[0].method, Method::BreakpointExact);
        assert_eq!(res[0].upper_bound, Rational::from_integer(13));

        let res = solve(&t, &env, &[budget(2)]).unwrap();
        assert_eq!(res[0].set, set(2, &[0]));
        assert_eq!(res[0].objective, 3);

        let before = crate::flownet::sweeps_started();
        let (_, res) = solve_budgets(&t, &[budget(2), budget(5)], DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(crate::flownet::sweeps_started(), before + 1);
        assert_eq!(res.iter().map(|r| r.objective).collect::<Vec<_>>(), vec![3, 13]);
    }

    #[test]
    fn solve_rejects_foreign_envelope() {
        let env = build_envelope(&t1(), 10).unwrap();
        let other = QkpInstance::new("o", vec![1, 1], vec![1, 1], []).unwrap();
        assert!(matches!(solve(&other, &env, &[budget(1)]), Err(Error::EnvelopeMismatch)));
    }

    #[test]
    fn shared_trajectories_match_independent_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for round in 0..40 {
            let inst = random_instance(&mut rng, 6 + round % 10, 0.5);
            if inst.total_cost() == 0 {
                continue;
            }
            let start = NodeSet::from_mask((0..inst.n()).map(|_| rng.random_bool(0.2)).collect());
            let base = inst.cost(&start).unwrap();
            let mut bs: Vec<Budget> = (0..6).map(|_| budget(base + rng.random_range(0..20))).collect();
            bs.sort_by_key(|b| b.value);
            let group: Vec<usize> = (0..bs.len()).collect();
            let shared = left_branches(&inst, &start, &bs, &group);
            for (b, got) in bs.iter().zip(shared) {
                assert_eq!(got, greedy_left(&inst, &start, *b).unwrap());
            }
        }
    }

    #[test]
    fn solve_properties_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for round in 0..40 {
            let inst = random_instance(&mut rng, 4 + round % 9, [0.3, 0.7][round % 2]);
            if inst.total_cost() == 0 {
                continue;
            }
            let total = inst.total_cost();
            let bs: Vec<Budget> = (0..8).map(|_| budget(rng.random_range(0..=total + 2))).collect();
            let (env, res) = solve_budgets(&inst, &bs, 300).unwrap();
            let again = solve(&inst, &env, &bs).unwrap();
            for (r, a) in res.iter().zip(&again) {
                assert_eq!(r.set, a.set);
                assert!(r.cost <= r.budget.value);
                assert_eq!(r.objective, inst.objective(&r.set).unwrap());
                assert!(r.objective <= best_feasible(&inst, r.budget.value));
                assert!(Rational::from_integer(r.objective as i128) <= r.upper_bound);
                if env.breakpoints().iter().any(|b| b.budget == r.budget.value) {
                    assert_eq!(r.method, Method::BreakpointExact);
                    assert_eq!(Rational::from_integer(r.objective as i128), r.upper_bound);
                }
            }
            for x in &res {
                for y in &res {
                    if x.budget.value <= y.budget.value {
                        assert!(x.objective <= y.objective);
                    }
                }
            }
        }
    }
}
