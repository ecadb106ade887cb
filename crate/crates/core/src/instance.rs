//! Problem data for the quadratic knapsack problem.
//!
//! Pairwise utilities live on arcs `(i, j)` with `i < j`. Every formula in
//! the crate (objective, weighted out-degree, s-excess weights) is written
//! against that orientation.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::{Error, Rational, Result};

/// Pairwise utility between `tail < head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub utility: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QkpInstance {
    name: String,
    costs: Vec<i64>,
    singletons: Vec<i64>,
    arcs: Vec<Arc>,
    // undirected CSR over the arcs
    offsets: Vec<usize>,
    neighbors: Vec<(usize, i64)>,
}

impl QkpInstance {
    /// Builds an instance from raw data.
    ///
    /// Pairs are canonicalized to `i < j` and sorted; zero utilities are
    /// dropped. Self-loops, duplicate pairs, negative utilities and negative
    /// costs are rejected.
    pub fn new(
        name: impl Into<String>,
        costs: Vec<i64>,
        singletons: Vec<i64>,
        pairs: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        let n = costs.len();
        if singletons.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} costs but {} singleton utilities",
                n,
                singletons.len()
            )));
        }
        if let Some(i) = costs.iter().position(|&q| q < 0) {
            return Err(Error::InvalidInstance(format!("node {i} has negative cost")));
        }
        let mut arcs = Vec::new();
        for (a, b, u) in pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidInstance(format!(
                    "pair ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidInstance(format!("self-loop on node {a}")));
            }
            if u < 0 {
                return Err(Error::InvalidInstance(format!(
                    "pair ({a}, {b}) has negative utility {u}"
                )));
            }
            if u == 0 {
                continue;
            }
            let (tail, head) = if a < b { (a, b) } else { (b, a) };
            arcs.push(Arc { tail, head, utility: u });
        }
        arcs.sort_unstable_by_key(|a| (a.tail, a.head));
        if let Some(w) = arcs
            .windows(2)
            .find(|w| (w[0].tail, w[0].head) == (w[1].tail, w[1].head))
        {
            return Err(Error::InvalidInstance(format!(
                "duplicate pair ({}, {})",
                w[0].tail, w[0].head
            )));
        }

        let mut degree = vec![0usize; n + 1];
        for a in &arcs {
            degree[a.tail] += 1;
            degree[a.head] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![(0usize, 0i64); offsets[n]];
        for a in &arcs {
            neighbors[fill[a.tail]] = (a.head, a.utility);
            fill[a.tail] += 1;
            neighbors[fill[a.head]] = (a.tail, a.utility);
            fill[a.head] += 1;
        }

        Ok(Self {
            name: name.into(),
            costs,
            singletons,
            arcs,
            offsets,
            neighbors,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn m(&self) -> usize {
        self.arcs.len()
    }

    pub fn costs(&self) -> &[i64] {
        &self.costs
    }

    pub fn singletons(&self) -> &[i64] {
        &self.singletons
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Neighbors of `i` in either direction, with the pair utility.
    pub fn neighbors(&self, i: usize) -> &[(usize, i64)] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn total_cost(&self) -> i64 {
        self.costs.iter().sum()
    }

    /// Fraction of node pairs carrying a pairwise utility.
    pub fn density(&self) -> f64 {
        let n = self.n() as f64;
        if self.n() < 2 {
            return 0.0;
        }
        self.m() as f64 / (n * (n - 1.0) / 2.0)
    }

    pub fn check_set(&self, s: &NodeSet) -> Result<()> {
        if s.universe() != self.n() {
            return Err(Error::UniverseMismatch {
                expected: self.n(),
                got: s.universe(),
            });
        }
        Ok(())
    }

    /// C(S,S) + U(S).
    pub fn objective(&self, s: &NodeSet) -> Result<i64> {
        self.check_set(s)?;
        Ok(self.objective_of(s.as_mask()))
    }

    /// q(S).
    pub fn cost(&self, s: &NodeSet) -> Result<i64> {
        self.check_set(s)?;
        Ok(self.cost_of(s.as_mask()))
    }

    pub(crate) fn objective_of(&self, mask: &[bool]) -> i64 {
        let pairs: i64 = self
            .arcs
            .iter()
            .filter(|a| mask[a.tail] && mask[a.head])
            .map(|a| a.utility)
            .sum();
        let singles: i64 = (0..self.n())
            .filter(|&i| mask[i])
            .map(|i| self.singletons[i])
            .sum();
        pairs + singles
    }

    pub(crate) fn cost_of(&self, mask: &[bool]) -> i64 {
        (0..self.n()).filter(|&i| mask[i]).map(|i| self.costs[i]).sum()
    }

    /// C(A, B): utility on arcs leaving `a` into `b`.
    pub fn arc_weight_between(&self, a: &NodeSet, b: &NodeSet) -> Result<i64> {
        self.check_set(a)?;
        self.check_set(b)?;
        Ok(self
            .arcs
            .iter()
            .filter(|arc| a.contains(arc.tail) && b.contains(arc.head))
            .map(|arc| arc.utility)
            .sum())
    }

    /// d⁺ᵢ = sum of utilities on arcs leaving node `i`.
    pub fn weighted_out_degrees(&self) -> Vec<i64> {
        let mut d = vec![0i64; self.n()];
        for a in &self.arcs {
            d[a.tail] += a.utility;
        }
        d
    }

    /// Total weighted degree in both directions.
    pub fn weighted_degrees(&self) -> Vec<i64> {
        (0..self.n())
            .map(|i| self.neighbors(i).iter().map(|&(_, u)| u).sum())
            .collect()
    }

    /// s-excess node weights wᵢ = d⁺ᵢ + uᵢᵢ − λqᵢ.
    pub fn s_excess_weights(&self, lambda: Rational) -> Vec<Rational> {
        self.weighted_out_degrees()
            .iter()
            .zip(&self.singletons)
            .zip(&self.costs)
            .map(|((&d, &u), &q)| Ratio::from_integer((d + u) as i128) - lambda * q as i128)
            .collect()
    }

    /// Stable 64-bit digest of the problem data (name excluded).
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.costs.hash(&mut h);
        self.singletons.hash(&mut h);
        self.arcs.hash(&mut h);
        h.finish()
    }
}

/// Subset of the nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeSet {
    mask: Vec<bool>,
}

impl NodeSet {
    pub fn empty(n: usize) -> Self {
        Self {
            mask: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(n);
        for i in indices {
            if i >= n {
                return Err(Error::InvalidSet { index: i, n });
            }
            s.mask[i] = true;
        }
        Ok(s)
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, i: usize) {
        self.mask[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.mask[i] = false;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn as_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.universe() == other.universe()
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn is_strict_subset(&self, other: &NodeSet) -> bool {
        self.is_subset(other) && self != other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub value: i64,
    /// Fraction γ of the total node cost this budget was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ratio_opt")]
    pub fraction: Option<Rational>,
}

impl Budget {
    pub fn new(value: i64) -> Result<Self> {
        if value < 0 {
            return Err(Error::InvalidParameter(format!("negative budget {value}")));
        }
        Ok(Self {
            value,
            fraction: None,
        })
    }

    /// B = ⌊γ · total_cost⌋.
    pub fn from_fraction(total_cost: i64, gamma: Rational) -> Result<Self> {
        if gamma <= Rational::zero() || gamma >= Rational::from_integer(1) {
            return Err(Error::InvalidParameter(format!(
                "budget fraction {gamma} must lie in (0, 1)"
            )));
        }
        let value = (gamma * total_cost as i128).floor().to_integer() as i64;
        Ok(Self {
            value,
            fraction: Some(gamma),
        })
    }
}

/// Parses a decimal (`0.025`) or fraction (`1/40`) literal exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::InvalidParameter(format!("not a rational number: {text:?}"));
    if let Some((a, b)) = t.split_once('/') {
        let num: i128 = a.trim().parse().map_err(|_| bad())?;
        let den: i128 = b.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    if frac_part.len() > 18 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let den = 10i128.pow(frac_part.len() as u32);
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Renders a rational as `p` or `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

mod ratio_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rational, parse_rational};
    use crate::Rational;

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| parse_rational(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub(crate) mod ratio_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rational, parse_rational};
    use crate::Rational;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let text: Vec<String> = Vec::deserialize(d)?;
        text.iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn t1() -> QkpInstance {
        QkpInstance::new("T1", vec![2, 3], vec![3, 0], [(0, 1, 10)]).unwrap()
    }

    /// Small random instance with mixed-sign singletons and some zero costs.
    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, n: usize, density: f64) -> QkpInstance {
        let costs = (0..n).map(|_| rng.random_range(0..=6)).collect();
        let singles = (0..n).map(|_| rng.random_range(-8..=8)).collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    pairs.push((i, j, rng.random_range(1..=9)));
                }
            }
        }
        QkpInstance::new("rand", costs, singles, pairs).unwrap()
    }

    fn all_subsets(n: usize) -> impl Iterator<Item = NodeSet> {
        (0u32..1 << n).map(move |bits| NodeSet::from_mask((0..n).map(|i| bits >> i & 1 == 1).collect()))
    }

    fn set(n: usize, idx: &[usize]) -> NodeSet {
        NodeSet::from_indices(n, idx.iter().copied()).unwrap()
    }

    #[test]
    fn t1_objective_and_cost() {
        let t = t1();
        assert_eq!(t.objective(&set(2, &[0, 1])).unwrap(), 13);
        assert_eq!(t.objective(&set(2, &[])).unwrap(), 0);
        assert_eq!(t.objective(&set(2, &[0])).unwrap(), 3);
        assert_eq!(t.cost(&set(2, &[0, 1])).unwrap(), 5);
        assert_eq!(t.cost(&set(2, &[])).unwrap(), 0);
        assert_eq!(t.cost(&set(2, &[1])).unwrap(), 3);
    }

    #[test]
    fn out_of_range_sets_are_rejected() {
        assert_eq!(
            NodeSet::from_indices(2, [0, 2]),
            Err(Error::InvalidSet { index: 2, n: 2 })
        );
        let t = t1();
        assert!(matches!(
            t.objective(&NodeSet::empty(3)),
            Err(Error::UniverseMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn out_degrees() {
        assert_eq!(t1().weighted_out_degrees(), vec![10, 0]);
        let bare = QkpInstance::new("bare", vec![1; 4], vec![0; 4], []).unwrap();
        assert_eq!(bare.weighted_out_degrees(), vec![0; 4]);
        let path = QkpInstance::new("path", vec![1; 3], vec![0; 3], [(0, 1, 5), (1, 2, 7)]).unwrap();
        assert_eq!(path.weighted_out_degrees(), vec![5, 7, 0]);
    }

    #[test]
    fn s_excess_weights_t1() {
        let t = t1();
        let r = |a: i128, b: i128| Rational::new(a, b);
        assert_eq!(t.s_excess_weights(r(0, 1)), vec![r(13, 1), r(0, 1)]);
        assert_eq!(t.s_excess_weights(r(1, 1)), vec![r(11, 1), r(-3, 1)]);
        assert_eq!(t.s_excess_weights(r(13, 2)), vec![r(0, 1), r(-39, 2)]);
    }

    #[test]
    fn construction_normalizes_and_rejects() {
        let inst = QkpInstance::new("x", vec![1, 1, 1], vec![0; 3], [(2, 0, 4), (1, 2, 0)]).unwrap();
        assert_eq!(inst.arcs(), &[Arc { tail: 0, head: 2, utility: 4 }]);
        assert!(QkpInstance::new("x", vec![1, 1], vec![0; 2], [(0, 1, 1), (1, 0, 2)]).is_err());
        assert!(QkpInstance::new("x", vec![1, 1], vec![0; 2], [(1, 1, 1)]).is_err());
        assert!(QkpInstance::new("x", vec![1, -1], vec![0; 2], []).is_err());
        assert!(QkpInstance::new("x", vec![1, 1], vec![0; 2], [(0, 1, -3)]).is_err());
        assert!(QkpInstance::new("x", vec![1, 1], vec![0; 3], []).is_err());
    }

    #[test]
    fn degree_identity_by_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for round in 0..40 {
            let n = 2 + round % 9;
            let inst = random_instance(&mut rng, n, 0.5);
            let d = inst.weighted_out_degrees();
            for s in all_subsets(n) {
                let ds: i64 = s.iter().map(|i| d[i]).sum();
                let inner = inst.arc_weight_between(&s, &s).unwrap();
                let outer = inst.arc_weight_between(&s, &s.complement()).unwrap();
                assert_eq!(ds, inner + outer);
            }
        }
    }

    #[test]
    fn relaxed_objective_matches_s_excess_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..30 {
            let n = 2 + round % 8;
            let inst = random_instance(&mut rng, n, 0.6);
            let lambda = Rational::new(rng.random_range(0..60), rng.random_range(1..7));
            let w = inst.s_excess_weights(lambda);
            for s in all_subsets(n) {
                let lhs = Rational::from_integer(inst.objective(&s).unwrap() as i128)
                    - lambda * inst.cost(&s).unwrap() as i128;
                let sw: Rational = s.iter().map(|i| w[i]).sum();
                let rhs = sw - inst.arc_weight_between(&s, &s.complement()).unwrap() as i128;
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn additive_over_disjoint_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_instance(&mut rng, 5, 0.5);
        let b = random_instance(&mut rng, 4, 0.5);
        let shift = a.n();
        let pairs = a
            .arcs()
            .iter()
            .map(|x| (x.tail, x.head, x.utility))
            .chain(b.arcs().iter().map(|x| (x.tail + shift, x.head + shift, x.utility)));
        let joined = QkpInstance::new(
            "ab",
            [a.costs(), b.costs()].concat(),
            [a.singletons(), b.singletons()].concat(),
            pairs,
        )
        .unwrap();
        for sa in all_subsets(a.n()) {
            for sb in all_subsets(b.n()).step_by(3) {
                let joint = NodeSet::from_mask([sa.as_mask(), sb.as_mask()].concat());
                assert_eq!(
                    joined.objective(&joint).unwrap(),
                    a.objective(&sa).unwrap() + b.objective(&sb).unwrap()
                );
                assert_eq!(
                    joined.cost(&joint).unwrap(),
                    a.cost(&sa).unwrap() + b.cost(&sb).unwrap()
                );
            }
        }
    }

    #[test]
    fn budget_from_fraction_floors() {
        let b = Budget::from_fraction(1000, parse_rational("0.025").unwrap()).unwrap();
        assert_eq!(b.value, 25);
        let b = Budget::from_fraction(100, parse_rational("0.29").unwrap()).unwrap();
        assert_eq!(b.value, 29);
        assert!(Budget::from_fraction(100, Rational::from_integer(1)).is_err());
        assert!(Budget::new(-1).is_err());
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("6.5").unwrap(), Rational::new(13, 2));
        assert_eq!(parse_rational("13/6").unwrap(), Rational::new(13, 6));
        assert_eq!(parse_rational("-0.5").unwrap(), Rational::new(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), Rational::from_integer(7));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert_eq!(format_rational(&Rational::new(26, 4)), "13/2");
    }
}
