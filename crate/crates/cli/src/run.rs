use std::cmp::Ordering;
use std::time::{Duration, Instant};

use anyhow::Result;
use clap::ValueEnum;
use qkbp::baselines::{brute_force, rg_heuristic, weight_sort_greedy};
use qkbp::envelope::build_envelope;
use qkbp::instance::format_rational;
use qkbp::qkbp::solve;
use qkbp::{Budget, QkpInstance, Rational};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum Algo {
    Qkbp,
    Rg,
    Wsort,
    Brute,
}

impl Algo {
    pub fn tag(&self) -> &'static str {
        match self {
            Algo::Qkbp => "qkbp",
            Algo::Rg => "rg",
            Algo::Wsort => "wsort",
            Algo::Brute => "brute",
        }
    }
}

pub struct RunContext {
    pub p: usize,
    pub time_limit: Option<Duration>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub instance: String,
    pub n: usize,
    /// Realized density in percent.
    pub density: f64,
    pub gamma: Option<Rational>,
    pub budget: i64,
    pub algo: Algo,
    /// `None` when the algorithm produced no solution.
    pub objective: Option<i64>,
    pub set: Option<Vec<usize>>,
    pub method: Option<&'static str>,
    pub deviation_pct: Option<f64>,
    pub wall: Duration,
    pub sweep: Option<Duration>,
    pub seed: Option<u64>,
    pub timed_out: bool,
}

impl RunRecord {
    pub fn missing(inst: &QkpInstance, budget: Budget, algo: Algo, seed: Option<u64>) -> Self {
        Self {
            instance: inst.name().to_string(),
            n: inst.n(),
            density: inst.density() * 100.0,
            gamma: budget.fraction,
            budget: budget.value,
            algo,
            objective: None,
            set: None,
            method: None,
            deviation_pct: None,
            wall: Duration::ZERO,
            sweep: None,
            seed,
            timed_out: false,
        }
    }
}

/// Runs one algorithm on every budget. QKBP builds its envelope once; its
/// per-budget wall time charges an equal share of that sweep.
pub fn run_algo(inst: &QkpInstance, budgets: &[Budget], algo: Algo, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    let base = |b: Budget| RunRecord::missing(inst, b, algo, ctx.seed);
    let mut out = Vec::with_capacity(budgets.len());
    match algo {
        Algo::Qkbp => {
            let started = Instant::now();
            let env = build_envelope(inst, ctx.p)?;
            let sweep = started.elapsed();
            let share = sweep / budgets.len().max(1) as u32;
            for r in solve(inst, &env, budgets)? {
                out.push(RunRecord {
                    objective: Some(r.objective),
                    set: Some(r.set.to_vec()),
                    method: Some(r.method.tag()),
                    wall: share + r.repair_time,
                    sweep: Some(sweep),
                    ..base(r.budget)
                });
            }
        }
        Algo::Rg => {
            for &b in budgets {
                let started = Instant::now();
                let r = rg_heuristic(inst, b, ctx.time_limit)?;
                out.push(RunRecord {
                    objective: Some(r.objective),
                    set: Some(r.set.to_vec()),
                    wall: started.elapsed(),
                    timed_out: r.timed_out,
                    ..base(b)
                });
            }
        }
        Algo::Wsort => {
            for &b in budgets {
                let started = Instant::now();
                let r = weight_sort_greedy(inst, b);
                out.push(RunRecord {
                    objective: Some(r.objective),
                    set: Some(r.set.to_vec()),
                    wall: started.elapsed(),
                    ..base(b)
                });
            }
        }
        Algo::Brute => {
            for &b in budgets {
                let started = Instant::now();
                let r = brute_force(inst, b)?;
                out.push(RunRecord {
                    objective: Some(r.objective),
                    set: Some(r.set.to_vec()),
                    wall: started.elapsed(),
                    ..base(b)
                });
            }
        }
    }
    Ok(out)
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        a.instance
            .cmp(&b.instance)
            .then(a.budget.cmp(&b.budget))
            .then(a.algo.cmp(&b.algo))
    });
}

/// Deviation from the best objective among records of the same instance
/// and budget, in percent. A zero best gives zero deviation.
pub fn fill_deviation(records: &mut [RunRecord]) {
    sort_records(records);
    let mut start = 0;
    while start < records.len() {
        let mut end = start;
        while end < records.len()
            && records[end].instance == records[start].instance
            && records[end].budget == records[start].budget
        {
            end += 1;
        }
        let best = records[start..end].iter().filter_map(|r| r.objective).max();
        for r in &mut records[start..end] {
            r.deviation_pct = match (best, r.objective) {
                (Some(best), Some(obj)) => Some(deviation(best, obj)),
                _ => None,
            };
        }
        start = end;
    }
}

fn deviation(best: i64, obj: i64) -> f64 {
    match best.cmp(&0) {
        Ordering::Equal if obj == 0 => 0.0,
        Ordering::Equal => 100.0,
        _ => 100.0 * (best - obj) as f64 / best.abs() as f64,
    }
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1000.0)
}

pub fn records_to_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance",
        "n",
        "density",
        "gamma",
        "budget",
        "algo",
        "objective",
        "deviation_pct",
        "wall_ms",
        "sweep_ms",
        "seed",
        "timed_out",
    ])?;
    for r in records {
        w.write_record([
            r.instance.clone(),
            r.n.to_string(),
            format!("{:.2}", r.density),
            r.gamma.map(|g| format_rational(&g)).unwrap_or_default(),
            r.budget.to_string(),
            r.algo.tag().to_string(),
            r.objective.map_or("--".into(), |o| o.to_string()),
            r.deviation_pct.map_or("--".into(), |d| format!("{d:.4}")),
            ms(r.wall),
            r.sweep.map(ms).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.timed_out.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn solutions_json(records: &[RunRecord]) -> Value {
    Value::Array(
        records
            .iter()
            .map(|r| {
                json!({
                    "instance": r.instance,
                    "budget": r.budget,
                    "gamma": r.gamma.map(|g| format_rational(&g)),
                    "algo": r.algo.tag(),
                    "objective": r.objective,
                    "method": r.method,
                    "timed_out": r.timed_out,
                    "set": r.set,
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_conventions() {
        assert_eq!(deviation(0, 0), 0.0);
        assert_eq!(deviation(200, 150), 25.0);
        assert_eq!(deviation(10, 10), 0.0);
    }
}
