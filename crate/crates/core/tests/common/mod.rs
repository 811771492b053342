//! Brute-force reference computations shared by the integration tests.
//!
//! Everything here works from raw probability tables and explicit bit
//! patterns, without going through the crate's log-space or region-sum code.

#![allow(dead_code)]

use std::collections::HashMap;

use activetree::belief::ThetaTable;
use rand::Rng;

pub const TOL: f64 = 1e-12;

/// `pi_y prod_i theta_iy^b (1 - theta_iy)^(1 - b)` by direct multiplication.
pub fn joint(theta: &ThetaTable, bits: &[bool], y: usize) -> f64 {
    let mut p = theta.class_prior()[y];
    for (i, &b) in bits.iter().enumerate() {
        let t = theta.get(i, y);
        p *= if b { t } else { 1.0 - t };
    }
    p
}

pub fn marginal(theta: &ThetaTable, bits: &[bool]) -> f64 {
    (0..theta.m()).map(|y| joint(theta, bits, y)).sum()
}

/// MAP label of a full pattern, lowest index on ties.
pub fn map_label(theta: &ThetaTable, bits: &[bool]) -> usize {
    let mut best = 0;
    for y in 1..theta.m() {
        if joint(theta, bits, y) > joint(theta, bits, best) {
            best = y;
        }
    }
    best
}

pub fn all_patterns(n: usize) -> Vec<Vec<bool>> {
    (0u32..1 << n).map(|c| (0..n).map(|i| c >> i & 1 == 1).collect()).collect()
}

/// A pattern with its region and (unnormalized) probability.
#[derive(Debug, Clone)]
pub struct RefHyp {
    pub bits: Vec<bool>,
    pub region: usize,
    pub weight: f64,
}

/// Reference hypotheses for explicit patterns, weights normalized over the list.
pub fn reference_set(theta: &ThetaTable, patterns: &[Vec<bool>]) -> Vec<RefHyp> {
    let raw: Vec<f64> = patterns.iter().map(|b| marginal(theta, b)).collect();
    let total: f64 = raw.iter().sum();
    patterns
        .iter()
        .zip(raw)
        .map(|(b, w)| RefHyp {
            bits: b.clone(),
            region: map_label(theta, b),
            weight: w / total,
        })
        .collect()
}

fn consistent(h: &RefHyp, evidence: &[(usize, bool)]) -> bool {
    evidence.iter().all(|&(i, v)| h.bits[i] == v)
}

/// Edge-cut objective: total weight of cross-region pairs with at least one
/// endpoint ruled out by the evidence. Enumerates pairs explicitly.
pub fn ec2_cut(set: &[RefHyp], evidence: &[(usize, bool)]) -> f64 {
    let mut cut = 0.0;
    for a in 0..set.len() {
        for b in a + 1..set.len() {
            if set[a].region != set[b].region && (!consistent(&set[a], evidence) || !consistent(&set[b], evidence)) {
                cut += set[a].weight * set[b].weight;
            }
        }
    }
    cut
}

/// Posterior probability of `X_u = v` given the evidence, over the set.
pub fn outcome_prob(set: &[RefHyp], evidence: &[(usize, bool)], u: usize, v: bool) -> f64 {
    let alive: f64 = set.iter().filter(|h| consistent(h, evidence)).map(|h| h.weight).sum();
    let hit: f64 = set
        .iter()
        .filter(|h| consistent(h, evidence) && h.bits[u] == v)
        .map(|h| h.weight)
        .sum();
    hit / alive
}

/// Expected marginal gain of the edge-cut objective.
pub fn ec2_gain_ref(set: &[RefHyp], evidence: &[(usize, bool)], u: usize) -> f64 {
    let base = ec2_cut(set, evidence);
    [false, true]
        .iter()
        .map(|&v| {
            let p = outcome_prob(set, evidence, u, v);
            if p == 0.0 {
                return 0.0;
            }
            let mut e = evidence.to_vec();
            e.push((u, v));
            p * (ec2_cut(set, &e) - base)
        })
        .sum()
}

fn entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    p.iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| {
            let r = q / total;
            -r * r.log2()
        })
        .sum()
}

/// Expected drop in hypothesis entropy, computed from the full conditional
/// distributions (not the partition shortcut).
pub fn us_gain_ref(set: &[RefHyp], evidence: &[(usize, bool)], u: usize) -> f64 {
    let alive: Vec<f64> = set.iter().map(|h| if consistent(h, evidence) { h.weight } else { 0.0 }).collect();
    let before = entropy(&alive);
    let after: f64 = [false, true]
        .iter()
        .map(|&v| {
            let p = outcome_prob(set, evidence, u, v);
            if p == 0.0 {
                return 0.0;
            }
            let branch: Vec<f64> = set
                .iter()
                .zip(&alive)
                .map(|(h, &w)| if h.bits[u] == v { w } else { 0.0 })
                .collect();
            p * entropy(&branch)
        })
        .sum();
    before - after
}

/// Label-entropy reduction from querying `u`, by summing the naive-Bayes joint
/// over the class and the candidate's value.
pub fn ig_gain_ref(theta: &ThetaTable, evidence: &[(usize, bool)], u: usize) -> f64 {
    let m = theta.m();
    let weight = |y: usize, extra: Option<bool>| {
        let mut p = theta.class_prior()[y];
        for &(i, v) in evidence {
            let t = theta.get(i, y);
            p *= if v { t } else { 1.0 - t };
        }
        if let Some(v) = extra {
            let t = theta.get(u, y);
            p *= if v { t } else { 1.0 - t };
        }
        p
    };
    let mut prior: Vec<f64> = (0..m).map(|y| weight(y, None)).collect();
    if prior.iter().sum::<f64>() == 0.0 {
        prior = theta.class_prior().to_vec();
    }
    let z: f64 = prior.iter().sum();
    let before = entropy(&prior);
    let after: f64 = [false, true]
        .iter()
        .map(|&v| {
            let joint: Vec<f64> = (0..m)
                .map(|y| {
                    let t = theta.get(u, y);
                    prior[y] * if v { t } else { 1.0 - t }
                })
                .collect();
            let pv = joint.iter().sum::<f64>() / z;
            if pv == 0.0 {
                0.0
            } else {
                pv * entropy(&joint)
            }
        })
        .sum();
    before - after
}

/// Minimum expected number of unit-cost queries needed to pin down the
/// decision region, by exhaustive recursion over partial assignments.
pub fn optimal_identification_cost(set: &[RefHyp], n: usize) -> f64 {
    fn solve(set: &[RefHyp], n: usize, evidence: &mut Vec<(usize, bool)>, memo: &mut HashMap<Vec<(usize, bool)>, f64>) -> f64 {
        let mut key = evidence.clone();
        key.sort_unstable();
        if let Some(&c) = memo.get(&key) {
            return c;
        }
        let alive: Vec<&RefHyp> = set.iter().filter(|h| consistent(h, evidence)).collect();
        let first = alive[0].region;
        let cost = if alive.iter().all(|h| h.region == first) {
            0.0
        } else {
            let total: f64 = alive.iter().map(|h| h.weight).sum();
            let mut best = f64::INFINITY;
            for u in 0..n {
                if evidence.iter().any(|&(i, _)| i == u) {
                    continue;
                }
                let mut expected = 1.0;
                for v in [false, true] {
                    let p: f64 = alive.iter().filter(|h| h.bits[u] == v).map(|h| h.weight).sum::<f64>() / total;
                    if p > 0.0 {
                        evidence.push((u, v));
                        expected += p * solve(set, n, evidence, memo);
                        evidence.pop();
                    }
                }
                best = best.min(expected);
            }
            best
        };
        memo.insert(key, cost);
        cost
    }
    solve(set, n, &mut Vec::new(), &mut HashMap::new())
}

/// Random table with entries in `[0.05, 0.95]` and a random strictly positive prior.
pub fn random_instance<R: Rng>(n: usize, m: usize, rng: &mut R) -> ThetaTable {
    let theta = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.05..0.95)).collect()).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ThetaTable::new(theta, raw.iter().map(|p| p / total).collect()).unwrap()
}
