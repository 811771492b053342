//! Sampled hypothesis sets for the planning oracle.
//!
//! A hypothesis is one full realization of the (binarized) features. Each
//! distinct pattern is assigned to the decision region of its MAP class under
//! the epoch's table and carries its analytic naive-Bayes mass, renormalized
//! over the sampled set. Conditioning on an observed bit kills inconsistent
//! members; the epoch-start masses stay fixed and serve as edge weights.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::belief::{argmax, log_sum_exp, ThetaTable};
use crate::error::{check_index, Error, Result};

/// Largest feature count accepted for exhaustive enumeration.
pub const MAX_ENUMERATION_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    pub bits: Vec<bool>,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    members: Vec<Hypothesis>,
    prior_masses: Vec<f64>,
    masses: Vec<f64>,
    alive: Vec<bool>,
    observed: Vec<usize>,
    n_bits: usize,
    m: usize,
    draws: usize,
}

impl HypothesisSet {
    /// Builds a set from raw patterns: deduplicates (first occurrence wins),
    /// assigns MAP regions and analytic masses under `theta`.
    pub fn from_patterns(theta: &ThetaTable, patterns: Vec<Vec<bool>>, draws: usize) -> Result<Self> {
        let n_bits = theta.n();
        let mut seen = HashMap::with_capacity(patterns.len());
        let mut members = Vec::new();
        let mut log_masses = Vec::new();
        for bits in patterns {
            if bits.len() != n_bits {
                return Err(Error::Dimension(format!(
                    "pattern has {} bits, table has {n_bits}",
                    bits.len()
                )));
            }
            if seen.contains_key(&bits) {
                continue;
            }
            seen.insert(bits.clone(), members.len());
            let scores = theta.class_log_scores(bits.iter().copied().enumerate());
            log_masses.push(log_sum_exp(&scores));
            members.push(Hypothesis {
                region: argmax(&scores),
                bits,
            });
        }
        let total = log_sum_exp(&log_masses);
        if total == f64::NEG_INFINITY {
            return Err(Error::DegenerateEvidence);
        }
        let prior_masses: Vec<f64> = log_masses.iter().map(|l| (l - total).exp()).collect();
        let alive = vec![true; members.len()];
        Ok(Self {
            masses: prior_masses.clone(),
            prior_masses,
            alive,
            members,
            observed: Vec::new(),
            n_bits,
            m: theta.m(),
            draws,
        })
    }

    /// Every pattern with positive probability under `theta` (`n <= 20`).
    pub fn enumerate(theta: &ThetaTable) -> Result<Self> {
        let n = theta.n();
        if n > MAX_ENUMERATION_BITS {
            return Err(Error::InvalidParameter(format!(
                "cannot enumerate 2^{n} hypotheses"
            )));
        }
        let patterns: Vec<Vec<bool>> = (0u64..1 << n)
            .map(|code| (0..n).map(|i| code >> i & 1 == 1).collect::<Vec<bool>>())
            .filter(|bits| theta.log_marginal(bits) > f64::NEG_INFINITY)
            .collect();
        let draws = patterns.len();
        Self::from_patterns(theta, patterns, draws)
    }

    /// Restricts every member to the given bit columns and rebuilds the set
    /// under `theta` (whose rows correspond to `columns`).
    pub fn project(&self, columns: &[usize], theta: &ThetaTable) -> Result<Self> {
        for &c in columns {
            check_index("column", c, self.n_bits)?;
        }
        let patterns = self
            .members
            .iter()
            .map(|h| columns.iter().map(|&c| h.bits[c]).collect())
            .collect();
        Self::from_patterns(theta, patterns, self.draws)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.alive.iter().any(|&a| a)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of region draws that produced this set.
    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    /// Current mass, renormalized over alive members (zero when dead).
    pub fn mass(&self, k: usize) -> f64 {
        self.masses[k]
    }

    /// Epoch-start mass; edge weights are products of these.
    pub fn prior_mass(&self, k: usize) -> f64 {
        self.prior_masses[k]
    }

    pub fn is_alive(&self, k: usize) -> bool {
        self.alive[k]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive.iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| k)
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn is_observed(&self, feature: usize) -> bool {
        self.observed.contains(&feature)
    }

    /// Kills members whose bit at `feature` differs from `value`.
    pub fn condition(&self, feature: usize, value: bool) -> Result<Self> {
        check_index("feature", feature, self.n_bits)?;
        if self.is_observed(feature) {
            return Err(Error::DuplicateObservation(feature));
        }
        let mut next = self.clone();
        next.observed.push(feature);
        for (k, h) in next.members.iter().enumerate() {
            if h.bits[feature] != value {
                next.alive[k] = false;
            }
        }
        next.renormalize();
        Ok(next)
    }

    fn renormalize(&mut self) {
        let total: f64 = self.alive_indices().map(|k| self.prior_masses[k]).sum();
        if total > 0.0 {
            for k in 0..self.members.len() {
                self.masses[k] = if self.alive[k] { self.prior_masses[k] / total } else { 0.0 };
            }
        } else {
            self.alive.iter_mut().for_each(|a| *a = false);
            self.masses.iter_mut().for_each(|w| *w = 0.0);
        }
    }

    /// Alive epoch-start mass per region, optionally restricted to members
    /// whose bit at `split.0` equals `split.1`. Indexed by class.
    pub(crate) fn region_prior_masses(&self, split: Option<(usize, bool)>) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for k in self.alive_indices() {
            let h = &self.members[k];
            if split.is_none_or(|(f, v)| h.bits[f] == v) {
                out[h.region] += self.prior_masses[k];
            }
        }
        out
    }

    /// Alive (renormalized) mass per region.
    pub fn region_census(&self) -> BTreeMap<usize, f64> {
        let mut census = BTreeMap::new();
        for k in self.alive_indices() {
            *census.entry(self.members[k].region).or_insert(0.0) += self.masses[k];
        }
        census
    }

    pub fn positive_regions(&self) -> usize {
        self.region_census().values().filter(|&&w| w > 0.0).count()
    }

    /// The unique positive-mass region, if exactly one remains.
    pub fn sole_region(&self) -> Option<usize> {
        let mut positive = self.region_census().into_iter().filter(|(_, w)| *w > 0.0);
        match (positive.next(), positive.next()) {
            (Some((r, _)), None) => Some(r),
            _ => None,
        }
    }
}

fn draw_class<R: Rng + ?Sized>(prior: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in prior.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    prior.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `count` regions from the class prior and one feature vector per
/// region from `Ber(theta_ij)`, then builds the deduplicated set.
pub fn sample_hypotheses<R: Rng + ?Sized>(theta: &ThetaTable, count: usize, rng: &mut R) -> Result<HypothesisSet> {
    if count == 0 {
        return Err(Error::InvalidParameter("hypothesis count must be at least 1".into()));
    }
    let patterns = (0..count)
        .map(|_| {
            let j = draw_class(theta.class_prior(), rng);
            (0..theta.n())
                .map(|i| rng.random::<f64>() < theta.get(i, j))
                .collect()
        })
        .collect();
    HypothesisSet::from_patterns(theta, patterns, count)
}
