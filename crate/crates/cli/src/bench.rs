use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use qkbp::QkpInstance;
use qkbp::{Budget, Error};
use rayon::prelude::*;

use crate::io::{load_instance, write_output, InstanceFormat, Manifest};
use crate::run::{fill_deviation, records_to_csv, run_algo, Algo, RunContext, RunRecord};
use crate::{time_limit, BenchArgs};

struct Job {
    instance: QkpInstance,
    budgets: Vec<Budget>,
    seed: u64,
}

fn load_jobs(pattern: &str) -> Result<Vec<Job>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::InvalidParameter(format!("bad glob {pattern:?}: {e}")))?
        .collect::<Result<_, _>>()
        .context("listing manifests")?;
    paths.sort();
    if paths.is_empty() {
        bail!(Error::InvalidParameter(format!("no manifest matches {pattern:?}")));
    }
    paths
        .iter()
        .map(|path| {
            let manifest = Manifest::read(path)?;
            let mut file = load_instance(&manifest.instance_path(path), InstanceFormat::Canonical)?;
            file.instance.set_name(manifest.spec.name());
            Ok(Job {
                instance: file.instance,
                budgets: manifest.budgets,
                seed: manifest.spec.seed,
            })
        })
        .collect()
}

fn run_cell(job: &Job, algo: Algo, p: usize, limit: Option<std::time::Duration>) -> Vec<RunRecord> {
    let ctx = RunContext {
        p,
        time_limit: limit,
        seed: Some(job.seed),
    };
    match run_algo(&job.instance, &job.budgets, algo, &ctx) {
        Ok(records) => records,
        Err(e) => {
            log::warn!("{} on {}: {e:#}", algo.tag(), job.instance.name());
            job.budgets
                .iter()
                .map(|&b| RunRecord::missing(&job.instance, b, algo, Some(job.seed)))
                .collect()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("QKBP_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("QKBP_THREADS={raw:?} is not a count")))?;
        builder = builder.num_threads(threads);
    }
    Ok(builder.build()?)
}

pub fn cmd_bench(args: BenchArgs) -> Result<()> {
    let limit = time_limit(args.time_limit)?;
    let jobs = load_jobs(&args.manifests)?;
    let cells: Vec<(usize, Algo)> = (0..jobs.len())
        .flat_map(|j| args.algos.iter().map(move |&a| (j, a)))
        .collect();
    // time-limited rg cells run alone so their clocks are not shared
    let (sequential, parallel): (Vec<_>, Vec<_>) = cells
        .into_iter()
        .partition(|&(_, a)| a == Algo::Rg && limit.is_some());

    let pool = thread_pool()?;
    let mut records: Vec<RunRecord> = pool.install(|| {
        parallel
            .par_iter()
            .flat_map_iter(|&(j, a)| run_cell(&jobs[j], a, args.p, limit))
            .collect()
    });
    for (j, a) in sequential {
        records.extend(run_cell(&jobs[j], a, args.p, limit));
    }
    fill_deviation(&mut records);

    if let Some(path) = &args.records {
        write_output(Some(path), &records_to_csv(&records)?)?;
    }
    write_output(args.out.as_deref(), &summary_csv(&records)?)
}

/// Instance names end in `-s<seed>`; dropping it groups the replicas of
/// one configuration.
pub fn group_of(instance: &str) -> &str {
    match instance.rfind("-s") {
        Some(i) if instance[i + 2..].bytes().all(|b| b.is_ascii_digit()) && i + 2 < instance.len() => {
            &instance[..i]
        }
        _ => instance,
    }
}

struct Stats {
    values: Vec<f64>,
}

impl Stats {
    fn avg(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    fn min(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    fn max(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

pub fn summary_csv(records: &[RunRecord]) -> Result<String> {
    let mut groups: BTreeMap<(&str, Algo), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((group_of(&r.instance), r.algo)).or_default().push(r);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "group",
        "algo",
        "stat",
        "deviation_pct",
        "wall_ms",
        "total_wall_ms",
        "runs",
        "missing",
    ])?;
    for ((group, algo), rows) in groups {
        let present: Vec<&&RunRecord> = rows.iter().filter(|r| r.objective.is_some()).collect();
        let dev = Stats {
            values: present.iter().filter_map(|r| r.deviation_pct).collect(),
        };
        let wall = Stats {
            values: present.iter().map(|r| r.wall.as_secs_f64() * 1000.0).collect(),
        };
        let total = wall.values.iter().fold(0.0, |a, b| a + b);
        let fmt = |v: Option<f64>, digits: usize| v.map_or("--".to_string(), |x| format!("{x:.digits$}"));
        for (stat, d, t) in [
            ("avg", dev.avg(), wall.avg()),
            ("min", dev.min(), wall.min()),
            ("max", dev.max(), wall.max()),
        ] {
            w.write_record([
                group.to_string(),
                algo.tag().to_string(),
                stat.to_string(),
                fmt(d, 4),
                fmt(t, 3),
                format!("{total:.3}"),
                rows.len().to_string(),
                (rows.len() - present.len()).to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_strip_the_seed() {
        assert_eq!(group_of("large-n500-d5-s12"), "large-n500-d5");
        assert_eq!(group_of("dispersion-n50-d10-geo-s3"), "dispersion-n50-d10-geo");
        assert_eq!(group_of("t1"), "t1");
        assert_eq!(group_of("odd-s"), "odd-s");
    }
}
