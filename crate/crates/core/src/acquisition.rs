//! Feature-acquisition scores, the cost-ratio greedy selector and the
//! session stopping rule.
//!
//! EC2 treats every pair of hypotheses in different decision regions as an
//! edge weighted by the product of their epoch-start masses; querying a
//! feature cuts every edge touching a hypothesis inconsistent with the answer.
//! Because edge weights factor through region masses, the remaining weight is
//! computed from a region census in `O(m^2)` instead of a pair sum.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{class_posterior, ThetaTable};
use crate::error::{check_index, Error, Result};
use crate::hypotheses::HypothesisSet;

/// Gains or ratios at or below this are treated as zero.
pub const ZERO_GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    entries: Vec<(usize, bool)>,
    total_cost: f64,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, feature: usize, value: bool, cost: f64) -> Result<()> {
        if self.contains(feature) {
            return Err(Error::DuplicateObservation(feature));
        }
        self.entries.push((feature, value));
        self.total_cost += cost;
        Ok(())
    }

    pub fn entries(&self) -> &[(usize, bool)] {
        &self.entries
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.entries.iter().any(|&(i, _)| i == feature)
    }

    pub fn value(&self, feature: usize) -> Option<bool> {
        self.entries.iter().find(|&&(i, _)| i == feature).map(|&(_, v)| v)
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    costs: Vec<f64>,
}

impl CostModel {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if let Some(i) = costs.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidParameter(format!("cost of feature {i} must be positive")));
        }
        Ok(Self { costs })
    }

    pub fn uniform(n: usize) -> Self {
        Self { costs: vec![1.0; n] }
    }

    pub fn cost(&self, feature: usize) -> f64 {
        self.costs[feature]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainScore {
    pub feature: usize,
    pub gain: f64,
    pub ratio: f64,
}

impl GainScore {
    pub fn new(feature: usize, gain: f64, cost: f64) -> Self {
        Self {
            feature,
            gain,
            ratio: gain / cost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Ec2,
    InfoGain,
    Uncertainty,
    Random,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ec2" => Ok(Criterion::Ec2),
            "ig" | "infogain" => Ok(Criterion::InfoGain),
            "us" | "uncertainty" => Ok(Criterion::Uncertainty),
            "random" => Ok(Criterion::Random),
            other => Err(Error::Config(format!("unknown criterion {other:?}"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Ec2 => "ec2",
            Criterion::InfoGain => "ig",
            Criterion::Uncertainty => "us",
            Criterion::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    OneRegion,
    Exhausted,
    NoGain,
    Empty,
    Budget,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::OneRegion => "ONE_REGION",
            StopReason::Exhausted => "EXHAUSTED",
            StopReason::NoGain => "NO_GAIN",
            StopReason::Empty => "EMPTY",
            StopReason::Budget => "BUDGET",
        })
    }
}

fn cross_weight(region_masses: &[f64]) -> f64 {
    let mut w = 0.0;
    for (a, ma) in region_masses.iter().enumerate() {
        for mb in &region_masses[a + 1..] {
            w += ma * mb;
        }
    }
    w
}

/// Total weight of edges still uncut: `sum_{y < y'} M_y M_y'` over alive
/// epoch-start region masses. Zero iff at most one region remains.
pub fn ec2_objective(set: &HypothesisSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::DegenerateSet);
    }
    Ok(cross_weight(&set.region_prior_masses(None)))
}

/// Weight of all edges cut so far, measured against the epoch-start graph.
pub fn ec2_cut_weight(set: &HypothesisSet) -> f64 {
    let mut full = vec![0.0; set.m()];
    for (k, h) in set.members().iter().enumerate() {
        full[h.region] += set.prior_mass(k);
    }
    cross_weight(&full) - cross_weight(&set.region_prior_masses(None))
}

fn check_candidate(set: &HypothesisSet, candidate: usize) -> Result<()> {
    check_index("feature", candidate, set.n_bits())?;
    if set.is_observed(candidate) {
        return Err(Error::DuplicateObservation(candidate));
    }
    if set.is_empty() {
        return Err(Error::DegenerateSet);
    }
    Ok(())
}

/// Probability of each outcome of `candidate` under the current alive masses.
fn outcome_split(set: &HypothesisSet, candidate: usize) -> [f64; 2] {
    let mut p = [0.0; 2];
    for k in set.alive_indices() {
        p[set.members()[k].bits[candidate] as usize] += set.mass(k);
    }
    p
}

/// Expected weight of newly cut edges when querying `candidate`.
pub fn ec2_gain(set: &HypothesisSet, candidate: usize) -> Result<f64> {
    check_candidate(set, candidate)?;
    let before = cross_weight(&set.region_prior_masses(None));
    let p = outcome_split(set, candidate);
    let mut after = 0.0;
    for v in [false, true] {
        if p[v as usize] > 0.0 {
            after += p[v as usize] * cross_weight(&set.region_prior_masses(Some((candidate, v))));
        }
    }
    Ok((before - after).max(0.0))
}

pub(crate) fn entropy_bits(dist: &[f64]) -> f64 {
    dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Expected reduction of label entropy from querying `candidate`.
pub fn ig_gain(theta: &ThetaTable, observations: &ObservationSet, candidate: usize) -> Result<f64> {
    check_index("feature", candidate, theta.n())?;
    if observations.contains(candidate) {
        return Err(Error::DuplicateObservation(candidate));
    }
    let posterior = match class_posterior(theta, observations) {
        Ok(p) => p,
        Err(Error::DegenerateEvidence) => theta.class_prior().to_vec(),
        Err(e) => return Err(e),
    };
    let before = entropy_bits(&posterior);
    let mut expected_after = 0.0;
    for v in [false, true] {
        let joint: Vec<f64> = posterior
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let t = theta.get(candidate, j);
                p * if v { t } else { 1.0 - t }
            })
            .collect();
        let pv: f64 = joint.iter().sum();
        if pv > 0.0 {
            let cond: Vec<f64> = joint.iter().map(|q| q / pv).collect();
            expected_after += pv * entropy_bits(&cond);
        }
    }
    Ok((before - expected_after).max(0.0))
}

/// Expected reduction of hypothesis entropy from querying `candidate`.
///
/// Conditioning partitions the alive set, so the reduction equals the binary
/// entropy of the outcome split.
pub fn us_gain(set: &HypothesisSet, candidate: usize) -> Result<f64> {
    check_candidate(set, candidate)?;
    Ok(entropy_bits(&outcome_split(set, candidate)))
}

/// Scores every candidate under `criterion`. Random has no score: every
/// candidate gets gain 1.
pub fn score_candidates(
    criterion: Criterion,
    set: &HypothesisSet,
    theta: &ThetaTable,
    observations: &ObservationSet,
    candidates: &[usize],
    costs: &CostModel,
) -> Result<Vec<GainScore>> {
    candidates
        .iter()
        .map(|&u| {
            let gain = match criterion {
                Criterion::Ec2 => ec2_gain(set, u)?,
                Criterion::InfoGain => ig_gain(theta, observations, u)?,
                Criterion::Uncertainty => us_gain(set, u)?,
                Criterion::Random => 1.0,
            };
            Ok(GainScore::new(u, gain, costs.cost(u)))
        })
        .collect()
}

/// Greedy cost-ratio choice; ties go to the lowest feature index.
///
/// Returns `None` when nothing clears the zero-gain tolerance. Random picks
/// uniformly among the unqueried features and ignores costs.
pub fn select_query<R: Rng + ?Sized>(
    scores: &[GainScore],
    already_queried: &[usize],
    rng: &mut R,
    criterion: Criterion,
) -> Option<usize> {
    let open: Vec<&GainScore> = scores
        .iter()
        .filter(|s| !already_queried.contains(&s.feature))
        .collect();
    if criterion == Criterion::Random {
        if open.is_empty() {
            return None;
        }
        return Some(open[rng.random_range(0..open.len())].feature);
    }
    let mut best: Option<&GainScore> = None;
    for s in open {
        best = match best {
            Some(b) if s.ratio < b.ratio || (s.ratio == b.ratio && s.feature > b.feature) => Some(b),
            _ => Some(s),
        };
    }
    best.filter(|b| b.ratio > ZERO_GAIN_TOLERANCE).map(|b| b.feature)
}

/// Stop check, in priority order EMPTY, ONE_REGION, EXHAUSTED, NO_GAIN.
///
/// `best_gain` is `None` for criteria without scores (Random).
pub fn should_stop(set: &HypothesisSet, remaining_features: usize, best_gain: Option<f64>) -> Option<StopReason> {
    if set.is_empty() {
        Some(StopReason::Empty)
    } else if set.positive_regions() <= 1 {
        Some(StopReason::OneRegion)
    } else if remaining_features == 0 {
        Some(StopReason::Exhausted)
    } else if best_gain.is_some_and(|g| g <= ZERO_GAIN_TOLERANCE) {
        Some(StopReason::NoGain)
    } else {
        None
    }
}
