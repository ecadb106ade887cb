//! s,t-networks for the Lagrangian relaxation and their minimum cuts.
//!
//! Two constructions are provided. The compact one (`Qkp2`) has one interior
//! node per item and one interior arc per pairwise utility; it is the one the
//! solver uses. The bipartite one (`Qkp1`) adds a node per pair and serves as
//! an independent cross-check.
//!
//! Terminal arcs are affine in the multiplier: node `v` gets a source arc of
//! capacity `max(a − bλ, 0)` and a sink arc of capacity `max(bλ − a, 0)` with
//! `b ≥ 0`. Capacities are made integral by scaling with the common
//! denominator of the multipliers, so every comparison is exact.

mod preflow;

use std::cell::Cell;
use std::fmt::Write as _;

use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::{Error, NodeSet, QkpInstance, Rational, Result};

pub use preflow::PreflowStats;
use preflow::Preflow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Bipartite graph with a node per pair.
    Qkp1,
    /// Compact s-excess graph on the item nodes.
    Qkp2,
}

/// Terminal arcs of one interior node: source `max(constant − slope·λ, 0)`,
/// sink `max(slope·λ − constant, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminalCaps {
    pub constant: i64,
    pub slope: i64,
}

impl TerminalCaps {
    fn level(&self, lambda: Rational) -> Rational {
        Rational::from_integer(self.constant as i128) - lambda * self.slope as i128
    }
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    formulation: Formulation,
    interior_arcs: Vec<(usize, usize, i64)>,
    terminals: Vec<TerminalCaps>,
    // interior node holding each item's selection variable
    selection: Vec<usize>,
}

impl FlowNetwork {
    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn interior_count(&self) -> usize {
        self.terminals.len()
    }

    /// Interior nodes plus source and sink.
    pub fn node_count(&self) -> usize {
        self.interior_count() + 2
    }

    pub fn interior_arcs(&self) -> &[(usize, usize, i64)] {
        &self.interior_arcs
    }

    pub fn terminals(&self) -> &[TerminalCaps] {
        &self.terminals
    }

    pub fn source_capacity(&self, v: usize, lambda: Rational) -> Rational {
        self.terminals[v].level(lambda).max(Rational::zero())
    }

    pub fn sink_capacity(&self, v: usize, lambda: Rational) -> Rational {
        (-self.terminals[v].level(lambda)).max(Rational::zero())
    }

    /// Capacity of the cut `(s ∪ S, t ∪ T)` evaluated directly from the
    /// network data.
    pub fn cut_capacity(&self, source_set: &NodeSet, lambda: Rational) -> Result<Rational> {
        if source_set.universe() != self.interior_count() {
            return Err(Error::UniverseMismatch {
                expected: self.interior_count(),
                got: source_set.universe(),
            });
        }
        let mut total = Rational::zero();
        for v in 0..self.interior_count() {
            total += if source_set.contains(v) {
                self.sink_capacity(v, lambda)
            } else {
                self.source_capacity(v, lambda)
            };
        }
        let crossing: i128 = self
            .interior_arcs
            .iter()
            .filter(|&&(u, v, _)| source_set.contains(u) && !source_set.contains(v))
            .map(|&(_, _, c)| c as i128)
            .sum();
        Ok(total + crossing)
    }

    /// Items selected by a cut of this network.
    pub fn selected_items(&self, source_set: &NodeSet) -> NodeSet {
        NodeSet::from_mask(self.selection.iter().map(|&v| source_set.contains(v)).collect())
    }

    /// DIMACS max-flow text at a fixed multiplier. Capacities are multiplied
    /// by the denominator of `lambda` so they stay integral. Node 1 is the
    /// source, interior node `v` is `v + 2` and the sink is last.
    pub fn to_dimacs(&self, lambda: Rational) -> String {
        let scale = *lambda.denom();
        let sink = self.node_count();
        let mut lines = Vec::new();
        for v in 0..self.interior_count() {
            let src = self.source_capacity(v, lambda) * scale;
            let snk = self.sink_capacity(v, lambda) * scale;
            if src.is_positive() {
                lines.push(format!("a 1 {} {}", v + 2, src.to_integer()));
            }
            if snk.is_positive() {
                lines.push(format!("a {} {} {}", v + 2, sink, snk.to_integer()));
            }
        }
        for &(u, v, c) in &self.interior_arcs {
            lines.push(format!("a {} {} {}", u + 2, v + 2, c as i128 * scale));
        }
        let mut out = String::new();
        let _ = writeln!(out, "c lambda {lambda}, capacities scaled by {scale}");
        let _ = writeln!(out, "p max {} {}", sink, lines.len());
        let _ = writeln!(out, "n 1 s");
        let _ = writeln!(out, "n {sink} t");
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// Compact network: arc `(i, j)` with capacity uᵢⱼ, terminal pair
/// `a = d⁺ᵢ + uᵢᵢ`, `b = qᵢ`, so the source capacity is `max(wᵢ, 0)`.
pub fn build_qkp2_network(inst: &QkpInstance) -> FlowNetwork {
    let out = inst.weighted_out_degrees();
    let terminals = (0..inst.n())
        .map(|i| TerminalCaps {
            constant: out[i] + inst.singletons()[i],
            slope: inst.costs()[i],
        })
        .collect();
    FlowNetwork {
        formulation: Formulation::Qkp2,
        interior_arcs: inst.arcs().iter().map(|a| (a.tail, a.head, a.utility)).collect(),
        terminals,
        selection: (0..inst.n()).collect(),
    }
}

/// Bipartite network at a fixed multiplier: pair nodes `0..m` followed by
/// item nodes `m..m+n`. Pair nodes feed both endpoints through arcs whose
/// capacity exceeds any finite cut.
pub fn build_qkp1_network(inst: &QkpInstance, lambda: Rational) -> Result<FlowNetwork> {
    if lambda.is_negative() {
        return Err(Error::InvalidParameter(format!("negative multiplier {lambda}")));
    }
    let m = inst.m();
    let pair_total: i128 = inst.arcs().iter().map(|a| a.utility as i128).sum();
    let single_total: i128 = inst.singletons().iter().map(|u| u.abs() as i128).sum();
    let cost_total = Rational::from_integer(inst.total_cost() as i128);
    let unsaturable = (lambda * cost_total).ceil().to_integer() + pair_total + single_total + 1;
    let unsaturable = i64::try_from(unsaturable).map_err(|_| Error::Overflow { denominator: 1 })?;

    let mut terminals = Vec::with_capacity(m + inst.n());
    let mut interior_arcs = Vec::with_capacity(2 * m);
    for (e, a) in inst.arcs().iter().enumerate() {
        terminals.push(TerminalCaps {
            constant: a.utility,
            slope: 0,
        });
        interior_arcs.push((e, m + a.tail, unsaturable));
        interior_arcs.push((e, m + a.head, unsaturable));
    }
    for i in 0..inst.n() {
        terminals.push(TerminalCaps {
            constant: inst.singletons()[i],
            slope: inst.costs()[i],
        });
    }
    Ok(FlowNetwork {
        formulation: Formulation::Qkp1,
        interior_arcs,
        terminals,
        selection: (m..m + inst.n()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSolution {
    /// Interior nodes on the source side; the maximal one among all minimum cuts.
    pub source_set: NodeSet,
    pub cut_value: Rational,
    pub max_flow_value: Rational,
}

/// Minimum s,t-cut at one multiplier, returning the maximal source set.
pub fn min_cut(net: &FlowNetwork, lambda: Rational) -> Result<CutSolution> {
    if lambda.is_negative() {
        return Err(Error::InvalidParameter(format!("negative multiplier {lambda}")));
    }
    let scale = scale_for(net, std::slice::from_ref(&lambda))?;
    let mut solver = Preflow::new(net, scale)?;
    solver.advance(scaled(lambda, scale))?;
    let source_set = dormant_set(&solver, net.interior_count());
    let max_flow_value = Rational::new(solver.flow_value(), scale as i128);
    let cut_value = net.cut_capacity(&source_set, lambda)?;
    if cut_value != max_flow_value {
        return Err(Error::Invariant(format!(
            "flow value {max_flow_value} differs from cut capacity {cut_value}"
        )));
    }
    Ok(CutSolution {
        source_set,
        cut_value,
        max_flow_value,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepStep {
    pub lambda: Rational,
    pub source_set: NodeSet,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// The first multiplier with its source set, then every multiplier at
    /// which the maximal source set grew.
    pub steps: Vec<SweepStep>,
    pub lambdas_solved: usize,
    pub solver: PreflowStats,
}

thread_local! {
    static SWEEPS: Cell<u64> = const { Cell::new(0) };
}

/// Number of parametric sweeps started on the calling thread.
pub fn sweeps_started() -> u64 {
    SWEEPS.with(Cell::get)
}

/// Solves the cut for every multiplier of a strictly decreasing sequence,
/// reusing the preflow between consecutive values, and reports the
/// multipliers at which the maximal source set changed.
pub fn parametric_sweep(net: &FlowNetwork, lambdas: &[Rational]) -> Result<Vec<SweepStep>> {
    parametric_sweep_with_stats(net, lambdas).map(|o| o.steps)
}

pub fn parametric_sweep_with_stats(net: &FlowNetwork, lambdas: &[Rational]) -> Result<SweepOutcome> {
    for (k, l) in lambdas.iter().enumerate() {
        if l.is_negative() || (k > 0 && *l >= lambdas[k - 1]) {
            return Err(Error::NonMonotoneLambdas { position: k });
        }
    }
    if net.terminals.iter().any(|t| t.slope < 0) {
        return Err(Error::InvalidParameter(
            "terminal slopes must be nonnegative for a monotone sweep".into(),
        ));
    }
    SWEEPS.with(|c| c.set(c.get() + 1));
    if lambdas.is_empty() {
        return Ok(SweepOutcome::default());
    }

    let scale = scale_for(net, lambdas)?;
    let mut solver = Preflow::new(net, scale)?;
    let n = net.interior_count();
    let mut steps: Vec<SweepStep> = Vec::new();
    let mut members = 0usize;
    for &lambda in lambdas {
        solver.advance(scaled(lambda, scale))?;
        let count = (0..n).filter(|&v| solver.is_source_side(v)).count();
        if steps.is_empty() || count != members {
            // source sets only grow, so a change shows up in the size
            members = count;
            steps.push(SweepStep {
                lambda,
                source_set: dormant_set(&solver, n),
            });
        }
    }
    debug_assert!(steps
        .windows(2)
        .all(|w| w[0].source_set.is_strict_subset(&w[1].source_set)));
    Ok(SweepOutcome {
        steps,
        lambdas_solved: lambdas.len(),
        solver: solver.stats,
    })
}

fn dormant_set(solver: &Preflow, n: usize) -> NodeSet {
    NodeSet::from_mask((0..n).map(|v| solver.is_source_side(v)).collect())
}

fn scaled(lambda: Rational, scale: i64) -> i64 {
    (lambda * scale as i128).to_integer() as i64
}

/// Common denominator of the multipliers, checked so that every scaled
/// capacity and every flow total fits in an `i64`.
fn scale_for(net: &FlowNetwork, lambdas: &[Rational]) -> Result<i64> {
    let mut den: i128 = 1;
    for l in lambdas {
        den = den.lcm(l.denom());
        if den > i64::MAX as i128 {
            return Err(Error::Overflow { denominator: den });
        }
    }
    let top = lambdas
        .iter()
        .map(|l| (*l * den).abs().to_integer())
        .max()
        .unwrap_or(0);
    let mut total: i128 = 0;
    for t in &net.terminals {
        total = total.saturating_add((t.constant as i128).abs().saturating_mul(den));
        total = total.saturating_add((t.slope as i128).saturating_mul(top));
    }
    for &(_, _, c) in &net.interior_arcs {
        total = total.saturating_add((c as i128).saturating_mul(den));
    }
    if total >= (i64::MAX / 4) as i128 {
        return Err(Error::Overflow { denominator: den });
    }
    Ok(den as i64)
}
