//! FIFO push-relabel on a maximum *preflow*, kept alive
//! across a decreasing sequence of multipliers.
//!
//! Source and sink arcs are not materialized. Source arcs are kept
//! saturated, so an increase of a source capacity simply adds excess; a
//! decrease of a sink capacity below its flow returns the difference as
//! excess. Both moves keep the distance labels valid, so labels only grow
//! over the whole sweep.
//!
//! A node whose label reaches `bound` (interior + 2) can no longer reach the
//! sink and never will again; those "dormant" nodes form the maximal source
//! set of the current minimum cut.

use std::collections::VecDeque;

use crate::Error;

use super::{FlowNetwork, TerminalCaps};

pub(crate) struct Preflow {
    bound: u32,
    scale: i64,

    first: Vec<usize>,
    to: Vec<u32>,
    mate: Vec<usize>,
    residual: Vec<i64>,

    terminals: Vec<TerminalCaps>,
    source_cap: Vec<i64>,
    sink_cap: Vec<i64>,
    sink_flow: Vec<i64>,
    excess: Vec<i64>,

    label: Vec<u32>,
    current: Vec<usize>,
    label_count: Vec<u32>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    primed: bool,

    pub(crate) stats: PreflowStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreflowStats {
    pub pushes: u64,
    pub relabels: u64,
    pub global_relabels: u64,
    pub gaps: u64,
}

impl Preflow {
    /// `scale` is the common denominator of every multiplier that will be
    /// passed to [`Preflow::advance`].
    pub(crate) fn new(net: &FlowNetwork, scale: i64) -> Result<Self, Error> {
        let n = net.interior_count();
        let bound = u32::try_from(n + 2).map_err(|_| Error::InvalidParameter("network too large".into()))?;

        let mut degree = vec![0usize; n + 1];
        for &(u, v, _) in net.interior_arcs() {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut first = vec![0usize; n + 1];
        for v in 0..n {
            first[v + 1] = first[v] + degree[v];
        }
        let total = first[n];
        let mut fill = first.clone();
        let mut to = vec![0u32; total];
        let mut mate = vec![0usize; total];
        let mut residual = vec![0i64; total];
        for &(u, v, cap) in net.interior_arcs() {
            let fwd = fill[u];
            let bwd = fill[v];
            fill[u] += 1;
            fill[v] += 1;
            to[fwd] = v as u32;
            to[bwd] = u as u32;
            mate[fwd] = bwd;
            mate[bwd] = fwd;
            residual[fwd] = cap.checked_mul(scale).ok_or(Error::Overflow {
                denominator: scale as i128,
            })?;
        }

        Ok(Self {
            bound,
            scale,
            current: first[..n].to_vec(),
            first,
            to,
            mate,
            residual,
            terminals: net.terminals().to_vec(),
            source_cap: vec![0; n],
            sink_cap: vec![0; n],
            sink_flow: vec![0; n],
            excess: vec![0; n],
            label: vec![0; n],
            label_count: vec![0; bound as usize + 1],
            queue: VecDeque::new(),
            queued: vec![false; n],
            primed: false,
            stats: PreflowStats::default(),
        })
    }

    fn len(&self) -> usize {
        self.excess.len()
    }

    /// Resolves the cut for the multiplier `scaled_lambda / scale`, which
    /// must not exceed the previous one.
    pub(crate) fn advance(&mut self, scaled_lambda: i64) -> Result<(), Error> {
        for v in 0..self.len() {
            let t = self.terminals[v];
            let level = t.constant as i128 * self.scale as i128 - t.slope as i128 * scaled_lambda as i128;
            let level = i64::try_from(level).map_err(|_| Error::Overflow {
                denominator: self.scale as i128,
            })?;
            let src = level.max(0);
            let sink = (-level).max(0);
            if self.primed && (src < self.source_cap[v] || sink > self.sink_cap[v]) {
                return Err(Error::Invariant(
                    "terminal capacities moved against the sweep direction".into(),
                ));
            }
            self.excess[v] += src - self.source_cap[v];
            self.source_cap[v] = src;
            if self.sink_flow[v] > sink {
                self.excess[v] += self.sink_flow[v] - sink;
                self.sink_flow[v] = sink;
            }
            self.sink_cap[v] = sink;
        }

        if self.primed {
            // labels from the last exact relabel are still valid
            for v in 0..self.len() {
                self.enqueue(v);
            }
        } else {
            self.primed = true;
            self.global_relabel();
        }
        self.discharge_all();
        self.global_relabel();
        Ok(())
    }

    pub(crate) fn is_source_side(&self, v: usize) -> bool {
        self.label[v] >= self.bound
    }

    /// Scaled flow value into the sink.
    pub(crate) fn flow_value(&self) -> i128 {
        self.sink_flow.iter().map(|&f| f as i128).sum()
    }

    fn discharge_all(&mut self) {
        let budget = 6 * self.len() + self.to.len() / 2 + 16;
        let mut work = 0usize;
        while let Some(v) = self.queue.pop_front() {
            let v = v as usize;
            self.queued[v] = false;
            work += self.discharge(v);
            if work > budget {
                work = 0;
                self.global_relabel();
            }
        }
    }

    fn enqueue(&mut self, v: usize) {
        if !self.queued[v] && self.excess[v] > 0 && self.label[v] < self.bound {
            self.queued[v] = true;
            self.queue.push_back(v as u32);
        }
    }

    /// Returns the number of arc scans spent relabeling.
    fn discharge(&mut self, v: usize) -> usize {
        let mut work = 0;
        while self.excess[v] > 0 && self.label[v] < self.bound {
            if self.label[v] == 1 {
                let room = self.sink_cap[v] - self.sink_flow[v];
                if room > 0 {
                    let delta = room.min(self.excess[v]);
                    self.sink_flow[v] += delta;
                    self.excess[v] -= delta;
                    self.stats.pushes += 1;
                    continue;
                }
            }
            let end = self.first[v + 1];
            let mut e = self.current[v];
            while e < end && self.excess[v] > 0 {
                let w = self.to[e] as usize;
                if self.residual[e] > 0 && self.label[v] == self.label[w] + 1 {
                    let delta = self.residual[e].min(self.excess[v]);
                    self.residual[e] -= delta;
                    self.residual[self.mate[e]] += delta;
                    self.excess[v] -= delta;
                    self.excess[w] += delta;
                    self.stats.pushes += 1;
                    self.enqueue(w);
                    if self.excess[v] == 0 {
                        break;
                    }
                }
                e += 1;
            }
            self.current[v] = e.min(end);
            if self.excess[v] > 0 {
                work += self.relabel(v);
            }
        }
        work
    }

    fn relabel(&mut self, v: usize) -> usize {
        self.stats.relabels += 1;
        let old = self.label[v];
        let mut lowest = self.bound;
        if self.sink_cap[v] > self.sink_flow[v] {
            lowest = 1;
        }
        let (start, end) = (self.first[v], self.first[v + 1]);
        for e in start..end {
            if self.residual[e] > 0 {
                let w = self.to[e] as usize;
                lowest = lowest.min(self.label[w].saturating_add(1));
            }
        }
        let new = lowest.min(self.bound);
        self.current[v] = start;

        self.label_count[old as usize] -= 1;
        if self.label_count[old as usize] == 0 && old < self.bound {
            // nothing left at `old`: everything above it is cut off from the sink
            self.stats.gaps += 1;
            for u in 0..self.len() {
                let l = self.label[u];
                if l > old && l < self.bound {
                    self.label_count[l as usize] -= 1;
                    self.label[u] = self.bound;
                    self.label_count[self.bound as usize] += 1;
                }
            }
            self.label[v] = self.bound;
            self.label_count[self.bound as usize] += 1;
        } else {
            self.label[v] = new;
            self.label_count[new as usize] += 1;
        }
        end - start + 1
    }

    /// Exact distances to the sink in the residual graph; unreachable nodes
    /// become dormant. Rebuilds the active queue.
    fn global_relabel(&mut self) {
        self.stats.global_relabels += 1;
        let n = self.len();
        let bound = self.bound;
        let mut order: Vec<u32> = Vec::with_capacity(n);
        for v in 0..n {
            if self.label[v] < bound {
                self.label[v] = u32::MAX;
            }
        }
        for v in 0..n {
            if self.label[v] == u32::MAX && self.sink_cap[v] > self.sink_flow[v] {
                self.label[v] = 1;
                order.push(v as u32);
            }
        }
        let mut head = 0;
        while head < order.len() {
            let v = order[head] as usize;
            head += 1;
            let next = self.label[v] + 1;
            for e in self.first[v]..self.first[v + 1] {
                let u = self.to[e] as usize;
                if self.label[u] == u32::MAX && self.residual[self.mate[e]] > 0 {
                    self.label[u] = next;
                    order.push(u as u32);
                }
            }
        }
        self.label_count.iter_mut().for_each(|c| *c = 0);
        self.queue.clear();
        for v in 0..n {
            if self.label[v] == u32::MAX {
                self.label[v] = bound;
            }
            self.label_count[self.label[v] as usize] += 1;
            self.current[v] = self.first[v];
            self.queued[v] = false;
        }
        // lowest labels first tends to finish the preflow faster
        for &v in &order {
            self.enqueue(v as usize);
        }
    }
}
