//! Concave envelope of the relaxation over a grid of multipliers.

use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};

use crate::flownet::{build_qkp2_network, parametric_sweep_with_stats, PreflowStats};
use crate::instance::{format_rational, rational_to_f64};
use crate::{Error, NodeSet, QkpInstance, Rational, Result};

/// Default number of grid multipliers.
pub const DEFAULT_GRID_SIZE: usize = 1600;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakpoint {
    /// Grid multiplier at which the set first appeared.
    pub lambda: Rational,
    /// Smallest grid multiplier at which the set was still optimal.
    pub lowest_lambda: Rational,
    pub set: NodeSet,
    pub budget: i64,
    pub utility: i64,
}

#[derive(Debug, Clone)]
pub struct Envelope {
    breakpoints: Vec<Breakpoint>,
    ub_lambda: Rational,
    grid_size: usize,
    fingerprint: u64,
    pub stats: EnvelopeStats,
}

#[derive(Debug, Clone, Default)]
pub struct EnvelopeStats {
    pub sweeps: usize,
    pub lambdas_solved: usize,
    pub solver: PreflowStats,
    pub sweep_time: Duration,
}

impl Envelope {
    /// Ordered by budget; the first entry is the budget-zero origin.
    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn ub_lambda(&self) -> Rational {
        self.ub_lambda
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn origin(&self) -> &Breakpoint {
        &self.breakpoints[0]
    }

    pub fn last(&self) -> &Breakpoint {
        self.breakpoints.last().expect("origin always present")
    }

    /// Piecewise-linear interpolation of the breakpoints, constant past the
    /// last one.
    pub fn upper_bound_at(&self, budget: Rational) -> Rational {
        let pts = &self.breakpoints;
        let last = self.last();
        if budget >= Rational::from_integer(last.budget as i128) {
            return Rational::from_integer(last.utility as i128);
        }
        let idx = pts.partition_point(|b| Rational::from_integer(b.budget as i128) <= budget);
        if idx == 0 {
            // below the origin only for negative budgets
            return Rational::from_integer(pts[0].utility as i128);
        }
        let (a, b) = (&pts[idx - 1], &pts[idx]);
        let (ax, ay) = (a.budget as i128, a.utility as i128);
        let (bx, by) = (b.budget as i128, b.utility as i128);
        Rational::from_integer(ay) + (budget - ax) * Rational::new(by - ay, bx - ax)
    }

    /// Lagrangian dual bound `min_λ max_S [U(S) − λq(S)] + λB` over the grid
    /// multipliers actually solved. Valid whether or not the grid caught
    /// every breakpoint, and exact at breakpoint budgets.
    pub fn lagrangian_bound_at(&self, budget: Rational) -> Rational {
        self.breakpoints
            .iter()
            .flat_map(|b| {
                let slack = budget - b.budget as i128;
                let utility = Rational::from_integer(b.utility as i128);
                [
                    utility + b.lambda * slack,
                    utility + b.lowest_lambda * slack,
                ]
            })
            .min()
            .expect("origin always present")
    }

    /// `lambda,budget,utility,set_size` rows, one per breakpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,budget,utility,set_size\n");
        for b in &self.breakpoints {
            out.push_str(&format!(
                "{},{},{},{}\n",
                rational_to_f64(&b.lambda),
                b.budget,
                b.utility,
                b.set.len()
            ));
        }
        out
    }

    /// Checks ordering, nesting, concavity and the breakpoint count.
    pub fn validate(&self, inst: &QkpInstance) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let pts = &self.breakpoints;
        if pts.is_empty() || pts[0].budget != 0 {
            return fail("envelope must start at a zero-budget origin".into());
        }
        if pts.len() > inst.n() + 1 {
            return fail(format!("{} breakpoints for {} nodes", pts.len(), inst.n()));
        }
        for b in pts {
            if inst.cost(&b.set)? != b.budget || inst.objective(&b.set)? != b.utility {
                return fail(format!("breakpoint at budget {} has stale totals", b.budget));
            }
        }
        for w in pts.windows(2) {
            if w[1].budget <= w[0].budget || w[1].utility <= w[0].utility {
                return fail(format!(
                    "breakpoints ({}, {}) and ({}, {}) are not strictly increasing",
                    w[0].budget, w[0].utility, w[1].budget, w[1].utility
                ));
            }
            if !w[0].set.is_strict_subset(&w[1].set) {
                return fail(format!("sets at budgets {} and {} are not nested", w[0].budget, w[1].budget));
            }
        }
        for w in pts.windows(3) {
            let left = Rational::new(
                (w[1].utility - w[0].utility) as i128,
                (w[1].budget - w[0].budget) as i128,
            );
            let right = Rational::new(
                (w[2].utility - w[1].utility) as i128,
                (w[2].budget - w[1].budget) as i128,
            );
            if right >= left {
                return fail(format!(
                    "slope {} after {} at budget {} breaks concavity",
                    format_rational(&right),
                    format_rational(&left),
                    w[1].budget
                ));
            }
        }
        Ok(())
    }
}

/// Multiplier above which no positive-cost node is worth selecting.
///
/// Without zero-cost nodes this is `max (d⁺ᵢ + uᵢᵢ) / qᵢ`. Zero-cost nodes can
/// drag positive-cost neighbours into the s-excess optimum through their
/// out-arcs, so when any exist the full weighted degree is used instead.
/// Negative values are clamped to zero.
pub fn lambda_upper_bound(inst: &QkpInstance) -> Result<Rational> {
    let costs = inst.costs();
    if costs.iter().all(|&q| q == 0) {
        return Err(Error::DegenerateInstance);
    }
    let gains = if costs.contains(&0) {
        inst.weighted_degrees()
    } else {
        inst.weighted_out_degrees()
    };
    let best = (0..inst.n())
        .filter(|&i| costs[i] > 0)
        .map(|i| Rational::new((gains[i] + inst.singletons()[i]) as i128, costs[i] as i128))
        .max()
        .expect("some node has positive cost");
    Ok(best.max(Rational::zero()))
}

/// `p` equidistant multipliers from `ub` down to zero, both ends included.
pub fn lambda_grid(ub: Rational, p: usize) -> Result<Vec<Rational>> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("grid size {p} must be at least 2")));
    }
    if ub.is_negative() {
        return Err(Error::InvalidParameter(format!("negative multiplier bound {ub}")));
    }
    if ub.is_zero() {
        return Ok(vec![Rational::zero()]);
    }
    let steps = (p - 1) as i128;
    Ok((0..p as i128).map(|k| ub * Rational::new(steps - k, steps)).collect())
}

/// Sweeps the compact network once over the grid and keeps every set change
/// as a breakpoint.
pub fn build_envelope(inst: &QkpInstance, p: usize) -> Result<Envelope> {
    let ub = lambda_upper_bound(inst)?;
    let grid = lambda_grid(ub, p)?;
    let has_free = inst.costs().contains(&0);

    let mut lambdas = Vec::with_capacity(grid.len() + 1);
    if has_free {
        // above ub only zero-cost nodes remain; that set is the origin
        lambdas.push(ub + 1);
    }
    lambdas.extend_from_slice(&grid);

    let net = build_qkp2_network(inst);
    let started = Instant::now();
    let outcome = parametric_sweep_with_stats(&net, &lambdas)?;
    let sweep_time = started.elapsed();

    // lowest multiplier of each step: the grid value just before the next change
    let mut lows = Vec::with_capacity(outcome.steps.len());
    let mut pos = 0;
    for step in outcome.steps.iter().skip(1) {
        while lambdas[pos + 1] != step.lambda {
            pos += 1;
        }
        lows.push(lambdas[pos]);
        pos += 1;
    }
    lows.push(*lambdas.last().expect("grid is never empty"));

    let mut breakpoints: Vec<Breakpoint> = Vec::new();
    if !has_free {
        breakpoints.push(Breakpoint {
            lambda: ub,
            lowest_lambda: ub,
            set: NodeSet::empty(inst.n()),
            budget: 0,
            utility: 0,
        });
    }
    for (step, low) in outcome.steps.iter().zip(lows) {
        let set = step.source_set.clone();
        let budget = inst.cost_of(set.as_mask());
        let utility = inst.objective_of(set.as_mask());
        let lambda = if has_free && breakpoints.is_empty() { ub } else { step.lambda };
        match breakpoints.last_mut() {
            // the sweep's first set may coincide with the origin, and a change
            // at λ = 0 may add only zero-gain nodes; neither bends the envelope
            Some(prev) if budget == prev.budget || utility <= prev.utility => {
                if budget == prev.budget && set != prev.set {
                    return Err(Error::Invariant(format!(
                        "two different sets share budget {budget}"
                    )));
                }
                prev.lowest_lambda = low;
            }
            _ => breakpoints.push(Breakpoint {
                lambda,
                lowest_lambda: low,
                set,
                budget,
                utility,
            }),
        }
    }

    let env = Envelope {
        breakpoints,
        ub_lambda: ub,
        grid_size: p,
        fingerprint: inst.fingerprint(),
        stats: EnvelopeStats {
            sweeps: 1,
            lambdas_solved: outcome.lambdas_solved,
            solver: outcome.solver,
            sweep_time,
        },
    };
    env.validate(inst)?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::{random_instance, t1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(a: i128, b: i128) -> Rational {
        Rational::new(a, b)
    }

    /// Upper concave hull of (q(S), U(S)) over all subsets, from enumeration.
    fn hull_vertices(inst: &QkpInstance) -> Vec<(i64, i64)> {
        let n = inst.n();
        let mut best = std::collections::BTreeMap::<i64, i64>::new();
        for bits in 0u32..1 << n {
            let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let c = inst.cost_of(&mask);
            let u = inst.objective_of(&mask);
            let e = best.entry(c).or_insert(u);
            *e = (*e).max(u);
        }
        let mut hull: Vec<(i64, i64)> = Vec::new();
        let mut running = i64::MIN;
        for (c, u) in best {
            if u <= running {
                continue;
            }
            running = u;
            while hull.len() >= 2 {
                let (ax, ay) = hull[hull.len() - 2];
                let (bx, by) = hull[hull.len() - 1];
                // drop b when it lies on or below the chord a → (c, u)
                if (by - ay) as i128 * (c - ax) as i128 <= (u - ay) as i128 * (bx - ax) as i128 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((c, u));
        }
        hull
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(lambda_upper_bound(&t1()).unwrap(), r(13, 2));
        let single = QkpInstance::new("s", vec![1], vec![5], []).unwrap();
        assert_eq!(lambda_upper_bound(&single).unwrap(), r(5, 1));
        let hopeless = QkpInstance::new("h", vec![1, 2], vec![-3, 0], []).unwrap();
        assert_eq!(lambda_upper_bound(&hopeless).unwrap(), r(0, 1));
        let free = QkpInstance::new("f", vec![0, 0], vec![1, 1], []).unwrap();
        assert_eq!(lambda_upper_bound(&free), Err(Error::DegenerateInstance));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(
            lambda_grid(r(13, 2), 4).unwrap(),
            vec![r(13, 2), r(13, 3), r(13, 6), r(0, 1)]
        );
        assert_eq!(lambda_grid(r(0, 1), 7).unwrap(), vec![r(0, 1)]);
        assert_eq!(lambda_grid(r(1, 1), 2).unwrap(), vec![r(1, 1), r(0, 1)]);
        assert!(lambda_grid(r(1, 1), 1).is_err());
    }

    #[test]
    fn t1_envelope() {
        let inst = t1();
        let env = build_envelope(&inst, DEFAULT_GRID_SIZE).unwrap();
        let pts = env.breakpoints();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].budget, pts[0].utility), (0, 0));
        assert!(pts[0].set.is_empty());
        assert_eq!((pts[1].budget, pts[1].utility), (5, 13));
        // first grid value below 13/5
        assert!(pts[1].lambda < r(13, 5));
        assert!(pts[1].lambda > r(13, 5) - r(13, 2) / 1599);

        assert_eq!(env.upper_bound_at(r(5, 1)), r(13, 1));
        assert_eq!(env.upper_bound_at(r(5, 2)), r(13, 2));
        assert_eq!(env.upper_bound_at(r(0, 1)), r(0, 1));
        assert_eq!(env.upper_bound_at(r(40, 1)), r(13, 1));
    }

    #[test]
    fn arcless_envelope_enters_nodes_by_ratio() {
        let inst = QkpInstance::new("a", vec![1, 1], vec![4, 1], []).unwrap();
        let env = build_envelope(&inst, DEFAULT_GRID_SIZE).unwrap();
        let got: Vec<_> = env
            .breakpoints()
            .iter()
            .map(|b| (b.budget, b.utility, b.set.to_vec()))
            .collect();
        assert_eq!(got, vec![(0, 0, vec![]), (1, 4, vec![0]), (2, 5, vec![0, 1])]);
    }

    #[test]
    fn unprofitable_instance_is_origin_only() {
        let inst = QkpInstance::new("n", vec![1, 2, 3], vec![-1, -5, -2], []).unwrap();
        let env = build_envelope(&inst, DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(env.breakpoints().len(), 1);
        // zero-gain nodes join at λ = 0 but add no utility
        let flat = QkpInstance::new("z", vec![1, 1], vec![4, 0], []).unwrap();
        let env = build_envelope(&flat, 10).unwrap();
        assert_eq!(env.breakpoints().len(), 2);
        assert_eq!(env.last().lowest_lambda, r(0, 1));
    }

    #[test]
    fn zero_cost_nodes_form_the_origin() {
        // node 0 is free and worth 10 only together with node 1
        let inst = QkpInstance::new("f", vec![0, 1], vec![0, 0], [(0, 1, 10)]).unwrap();
        assert_eq!(lambda_upper_bound(&inst).unwrap(), r(10, 1));
        let env = build_envelope(&inst, 50).unwrap();
        let got: Vec<_> = env.breakpoints().iter().map(|b| (b.budget, b.utility)).collect();
        assert_eq!(got, vec![(0, 0), (1, 10)]);
        assert_eq!(env.origin().set.to_vec(), vec![0]);

        let free_bonus = QkpInstance::new("g", vec![0, 2], vec![3, 1], []).unwrap();
        let env = build_envelope(&free_bonus, 50).unwrap();
        assert_eq!(env.origin().utility, 3);
        assert_eq!(env.last().set.to_vec(), vec![0, 1]);
    }

    #[test]
    fn breakpoints_lie_on_the_true_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..40 {
            let inst = random_instance(&mut rng, 3 + round % 10, [0.3, 0.6, 1.0][round % 3]);
            if inst.costs().iter().all(|&q| q == 0) {
                continue;
            }
            let env = build_envelope(&inst, 200).unwrap();
            let hull = hull_vertices(&inst);
            for b in env.breakpoints() {
                assert!(
                    hull.contains(&(b.budget, b.utility)),
                    "({}, {}) not on hull {:?}",
                    b.budget,
                    b.utility,
                    hull
                );
            }
            let complete = hull.len() == env.breakpoints().len();
            for (c, _) in &hull {
                for delta in [0, 1] {
                    let budget = Rational::from_integer((c + delta) as i128);
                    let optimum = hull_value(&hull, budget);
                    assert!(env.lagrangian_bound_at(budget) >= optimum);
                    assert!(env.upper_bound_at(budget) <= optimum);
                    if complete {
                        assert_eq!(env.upper_bound_at(budget), optimum);
                    }
                }
            }
        }
    }

    fn hull_value(hull: &[(i64, i64)], budget: Rational) -> Rational {
        let last = hull.last().unwrap();
        if budget >= Rational::from_integer(last.0 as i128) {
            return Rational::from_integer(last.1 as i128);
        }
        let k = hull.partition_point(|&(c, _)| Rational::from_integer(c as i128) <= budget);
        let (a, b) = (hull[k - 1], hull[k]);
        Rational::from_integer(a.1 as i128)
            + (budget - a.0 as i128) * Rational::new((b.1 - a.1) as i128, (b.0 - a.0) as i128)
    }

    #[test]
    fn lagrangian_bound_is_exact_at_breakpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 9, 0.5);
            if inst.costs().iter().all(|&q| q == 0) {
                continue;
            }
            let env = build_envelope(&inst, 400).unwrap();
            for b in env.breakpoints() {
                let at = Rational::from_integer(b.budget as i128);
                assert_eq!(env.lagrangian_bound_at(at), Rational::from_integer(b.utility as i128));
            }
        }
    }

    #[test]
    fn csv_rows() {
        let env = build_envelope(&t1(), DEFAULT_GRID_SIZE).unwrap();
        let csv = env.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,budget,utility,set_size");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("6.5,0,0,0"));
        assert!(lines[2].ends_with(",5,13,2"));
    }
}
