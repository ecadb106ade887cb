//! Seeded generators for the benchmark families.
//!
//! Every generator draws from a single `ChaCha8Rng` stream in a fixed order,
//! so a [`GeneratorSpec`] fully determines its instance.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::instance::ratio_vec;
use crate::{Budget, Error, QkpInstance, Rational, Result};

pub const JACCARD_SCALE: f64 = 1000.0;
pub const TF1_PROJECTS: usize = 70_000;
pub const TF2_PROJECTS: usize = 30_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Standard,
    Large,
    Dispersion,
    #[serde(rename = "teamformation1-synthetic")]
    TeamFormation1,
    #[serde(rename = "teamformation2-synthetic")]
    TeamFormation2,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Standard => "standard",
            Family::Large => "large",
            Family::Dispersion => "dispersion",
            Family::TeamFormation1 => "teamformation1-synthetic",
            Family::TeamFormation2 => "teamformation2-synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Geo,
    Wgeo,
    Expo,
    Ran,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geo" => Ok(Strategy::Geo),
            "wgeo" => Ok(Strategy::Wgeo),
            "expo" => Ok(Strategy::Expo),
            "ran" => Ok(Strategy::Ran),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Geo => "geo",
            Strategy::Wgeo => "wgeo",
            Strategy::Expo => "expo",
            Strategy::Ran => "ran",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    /// Percent of node pairs carrying a utility. Ignored by team formation.
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projects: Option<usize>,
    /// Budget fractions; empty for the standard family's single random budget.
    #[serde(default, with = "ratio_vec")]
    pub gammas: Vec<Rational>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Instance name encoding the generator settings, e.g. `standard-n100-d25-s7`.
    pub fn name(&self) -> String {
        let mut name = format!("{}-n{}", self.family.tag(), self.n);
        match self.family {
            Family::TeamFormation1 | Family::TeamFormation2 => {
                name.push_str(&format!("-p{}", self.projects()));
            }
            _ => name.push_str(&format!("-d{}", self.density)),
        }
        if let Some(s) = self.strategy {
            name.push_str(&format!("-{}", s.tag()));
        }
        name.push_str(&format!("-s{}", self.seed));
        name
    }

    pub fn projects(&self) -> usize {
        self.projects.unwrap_or(match self.family {
            Family::TeamFormation1 => TF1_PROJECTS,
            _ => TF2_PROJECTS,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub instance: QkpInstance,
    pub budgets: Vec<Budget>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    let (mut instance, budgets) = match spec.family {
        Family::Standard => {
            if !spec.gammas.is_empty() {
                return Err(Error::InvalidParameter(
                    "the standard family draws its own budget".into(),
                ));
            }
            let (inst, b) = gen_standard(spec.n, spec.density, spec.seed)?;
            (inst, vec![b])
        }
        Family::Large => gen_large(spec.n, spec.density, &spec.gammas, spec.seed)?,
        Family::Dispersion => {
            let strategy = spec
                .strategy
                .ok_or_else(|| Error::InvalidParameter("dispersion needs a strategy".into()))?;
            gen_dispersion(spec.n, spec.density, strategy, &spec.gammas, spec.seed)?
        }
        Family::TeamFormation1 | Family::TeamFormation2 => {
            gen_teamformation(spec.n, spec.projects(), &spec.gammas, spec.seed)?
        }
    };
    instance.set_name(spec.name());
    Ok(Generated { instance, budgets })
}

fn check_common(n: usize, density: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if !(density > 0.0 && density <= 100.0) {
        return Err(Error::InvalidParameter(format!("density {density} outside (0, 100]")));
    }
    Ok(density / 100.0)
}

fn budgets_for(total: i64, gammas: &[Rational]) -> Result<Vec<Budget>> {
    gammas.iter().map(|&g| Budget::from_fraction(total, g)).collect()
}

/// Costs in [1, 50]; each pair i ≤ j gets a utility in [1, 100] with
/// probability Δ, the diagonal being the singleton utilities.
fn standard_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Result<QkpInstance> {
    let costs: Vec<i64> = (0..n).map(|_| rng.random_range(1..=50)).collect();
    let mut singletons = vec![0i64; n];
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.random_bool(p) {
                let u = rng.random_range(1..=100);
                if i == j {
                    singletons[i] = u;
                } else {
                    pairs.push((i, j, u));
                }
            }
        }
    }
    QkpInstance::new("", costs, singletons, pairs)
}

pub fn gen_standard(n: usize, density: f64, seed: u64) -> Result<(QkpInstance, Budget)> {
    let p = check_common(n, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = standard_graph(&mut rng, n, p)?;
    let total = inst.total_cost();
    let low = if total < 50 {
        log::warn!("total cost {total} below 50, drawing the budget from [1, {total}]");
        1
    } else {
        50
    };
    let budget = Budget::new(rng.random_range(low..=total))?;
    Ok((inst, budget))
}

pub fn gen_large(n: usize, density: f64, gammas: &[Rational], seed: u64) -> Result<(QkpInstance, Vec<Budget>)> {
    let p = check_common(n, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = standard_graph(&mut rng, n, p)?;
    let budgets = budgets_for(inst.total_cost(), gammas)?;
    Ok((inst, budgets))
}

fn round_positive(x: f64) -> Option<i64> {
    (x > 0.0).then(|| (x.round() as i64).max(1))
}

pub fn gen_dispersion(
    n: usize,
    density: f64,
    strategy: Strategy,
    gammas: &[Rational],
    seed: u64,
) -> Result<(QkpInstance, Vec<Budget>)> {
    let p = check_common(n, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<i64> = (0..n).map(|_| rng.random_range(1..=100)).collect();
    let points: Vec<(f64, f64)> = match strategy {
        Strategy::Geo | Strategy::Wgeo => (0..n)
            .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect(),
        _ => Vec::new(),
    };
    let alpha: Vec<f64> = match strategy {
        Strategy::Wgeo => (0..n).map(|_| rng.random_range(5.0..=10.0)).collect(),
        _ => Vec::new(),
    };
    let expo: Exp<f64> = Exp::new(1.0 / 50.0).expect("positive rate");
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        dx.hypot(dy)
    };
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !rng.random_bool(p) {
                continue;
            }
            let u = match strategy {
                Strategy::Geo => round_positive(dist(i, j)),
                Strategy::Wgeo => round_positive(alpha[i] * alpha[j] * dist(i, j)),
                Strategy::Expo => Some((expo.sample(&mut rng).round() as i64).max(1)),
                Strategy::Ran => Some(rng.random_range(1..=100)),
            };
            if let Some(u) = u {
                pairs.push((i, j, u));
            }
        }
    }
    let inst = QkpInstance::new("", costs, vec![0; n], pairs)?;
    let budgets = budgets_for(inst.total_cost(), gammas)?;
    Ok((inst, budgets))
}

/// Experts hold random project sets whose sizes follow a lognormal law with
/// log-space mean 4 and deviation 1; utilities are scaled Jaccard
/// similarities of those sets.
pub fn gen_teamformation(
    n: usize,
    projects: usize,
    gammas: &[Rational],
    seed: u64,
) -> Result<(QkpInstance, Vec<Budget>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if projects == 0 {
        return Err(Error::InvalidParameter("need at least one project".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: LogNormal<f64> = LogNormal::new(4.0, 1.0).expect("valid lognormal");
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); projects];
    let mut counts = vec![0usize; n];
    for (i, count) in counts.iter_mut().enumerate() {
        let k = (sizes.sample(&mut rng).round() as usize).clamp(1, projects);
        *count = k;
        let mut chosen = sample(&mut rng, projects, k).into_vec();
        chosen.sort_unstable();
        for p in chosen {
            members[p].push(i as u32);
        }
    }
    let costs: Vec<i64> = (0..n).map(|_| rng.random_range(1..=10)).collect();
    let pairs = jaccard_pairs(&members, &counts);
    let inst = QkpInstance::new("", costs, vec![0; n], pairs)?;
    let budgets = budgets_for(inst.total_cost(), gammas)?;
    Ok((inst, budgets))
}

/// Scaled Jaccard utility for every pair of experts sharing a project.
fn jaccard_pairs(members: &[Vec<u32>], counts: &[usize]) -> Vec<(usize, usize, i64)> {
    let mut shared: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for experts in members {
        for (a, &i) in experts.iter().enumerate() {
            for &j in &experts[a + 1..] {
                *shared.entry((i, j)).or_insert(0) += 1;
            }
        }
    }
    shared
        .into_iter()
        .filter_map(|((i, j), common)| {
            let (i, j) = (i as usize, j as usize);
            let union = counts[i] + counts[j] - common as usize;
            let jaccard = common as f64 / union as f64;
            round_positive(jaccard * JACCARD_SCALE).map(|u| (i, j, u))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::build_envelope;

    fn gammas() -> Vec<Rational> {
        ["0.025", "0.05", "0.1", "0.25", "0.5", "0.75"]
            .iter()
            .map(|g| crate::instance::parse_rational(g).unwrap())
            .collect()
    }

    fn within_4_sigma(m: usize, pairs: usize, p: f64) {
        let mean = pairs as f64 * p;
        let sigma = (pairs as f64 * p * (1.0 - p)).sqrt();
        assert!((m as f64 - mean).abs() <= 4.0 * sigma, "m={m} mean={mean} sigma={sigma}");
    }

    #[test]
    fn standard_density_concentrates() {
        for seed in 0..5 {
            let (inst, b) = gen_standard(100, 25.0, seed).unwrap();
            within_4_sigma(inst.m(), 4950, 0.25);
            assert!(inst.costs().iter().all(|&q| (1..=50).contains(&q)));
            assert!(inst.arcs().iter().all(|a| (1..=100).contains(&a.utility)));
            assert!((50..=inst.total_cost()).contains(&b.value));
        }
    }

    #[test]
    fn complete_standard_graph() {
        let (inst, _) = gen_standard(30, 100.0, 3).unwrap();
        assert_eq!(inst.m(), 30 * 29 / 2);
        assert!(inst.singletons().iter().all(|&u| u >= 1));
    }

    #[test]
    fn tiny_standard_clamps_budget_range() {
        let (inst, b) = gen_standard(2, 50.0, 1).unwrap();
        assert!(inst.total_cost() < 50);
        assert!((1..=inst.total_cost()).contains(&b.value));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec {
            family: Family::Dispersion,
            n: 60,
            density: 30.0,
            strategy: Some(Strategy::Wgeo),
            projects: None,
            gammas: gammas(),
            seed: 11,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.budgets, b.budgets);
        let other = generate(&GeneratorSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.instance, other.instance);
    }

    #[test]
    fn large_budgets_follow_fractions() {
        let (inst, budgets) = gen_large(500, 5.0, &gammas(), 4).unwrap();
        within_4_sigma(inst.m(), 500 * 499 / 2, 0.05);
        assert_eq!(budgets.len(), 6);
        assert!(budgets.windows(2).all(|w| w[0].value <= w[1].value));
        let total = inst.total_cost();
        assert_eq!(budgets[0].value, total * 25 / 1000);
        assert_eq!(Budget::from_fraction(1000, gammas()[0]).unwrap().value, 25);
    }

    #[test]
    fn dispersion_ranges() {
        for strategy in [Strategy::Geo, Strategy::Wgeo, Strategy::Expo, Strategy::Ran] {
            let (inst, _) = gen_dispersion(80, 40.0, strategy, &[], 2).unwrap();
            assert!(inst.singletons().iter().all(|&u| u == 0));
            assert!(inst.costs().iter().all(|&q| (1..=100).contains(&q)));
            let max = inst.arcs().iter().map(|a| a.utility).max().unwrap();
            let min = inst.arcs().iter().map(|a| a.utility).min().unwrap();
            assert!(min >= 1);
            let cap = match strategy {
                Strategy::Geo => 142,
                Strategy::Wgeo => (100.0 * 2f64.sqrt() * 100.0).round() as i64,
                Strategy::Expo => i64::MAX,
                Strategy::Ran => 100,
            };
            assert!(max <= cap, "{strategy:?} max {max}");
        }
        assert!("manhattan".parse::<Strategy>().is_err());
    }

    #[test]
    fn jaccard_edge_cases() {
        // experts 0 and 1 share everything, expert 2 is disjoint
        let members = vec![vec![0, 1], vec![0, 1], vec![2]];
        let counts = vec![2, 2, 1];
        assert_eq!(jaccard_pairs(&members, &counts), vec![(0, 1, 1000)]);

        let members = vec![vec![0], vec![1], vec![2]];
        let pairs = jaccard_pairs(&members, &[1, 1, 1]);
        assert!(pairs.is_empty());
        let inst = QkpInstance::new("d", vec![1, 1, 1], vec![0; 3], pairs).unwrap();
        assert_eq!(build_envelope(&inst, 50).unwrap().breakpoints().len(), 1);
    }

    #[test]
    fn teamformation_shape() {
        let (inst, budgets) = gen_teamformation(300, TF2_PROJECTS, &gammas(), 5).unwrap();
        assert!(inst.costs().iter().all(|&q| (1..=10).contains(&q)));
        assert!(inst.singletons().iter().all(|&u| u == 0));
        assert!(inst.arcs().iter().all(|a| (1..=1000).contains(&a.utility)));
        assert_eq!(budgets.len(), 6);
        // fewer projects means more overlap
        let (dense, _) = gen_teamformation(300, 5_000, &[], 5).unwrap();
        assert!(dense.density() > inst.density());
    }

    #[test]
    fn spec_round_trips_through_json_names() {
        let spec = GeneratorSpec {
            family: Family::TeamFormation2,
            n: 10,
            density: 0.0,
            strategy: None,
            projects: None,
            gammas: gammas(),
            seed: 1,
        };
        assert_eq!(spec.projects(), TF2_PROJECTS);
        assert_eq!(spec.name(), "teamformation2-synthetic-n10-p30000-s1");
    }
}
