//! Real-valued features through per-feature threshold grids.
//!
//! Each feature `i` has thresholds `tau_i1 < ... < tau_iK`, and each threshold
//! defines a latent bit `Z_ik = 1{x_i >= tau_ik}` with its own Beta belief per
//! class. Latent parameters are stored in one [`BeliefState`] whose rows are
//! the flattened `(feature, threshold)` pairs. Every epoch picks one threshold
//! per feature, either by exhaustive gain maximization or by an Exp3 bandit
//! over the thresholds, and plans on the binary problem those thresholds induce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ec2_gain, ec2_objective, ig_gain, us_gain, Criterion, ObservationSet};
use crate::belief::{argmax, log_sum_exp, BeliefState, DriftConfig, ThetaTable};
use crate::datastream::{DataPoint, FeatureKind, FeatureLayout, Predictor};
use crate::error::{check_index, Error, Result};
use crate::hypotheses::HypothesisSet;
use crate::session::HypothesisMode;

pub const DEFAULT_THRESHOLDS: usize = 5;
pub const DEFAULT_WARMUP: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    thresholds: Vec<Vec<f64>>,
}

impl ThresholdGrid {
    pub fn new(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        for (i, t) in thresholds.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::InvalidParameter(format!("feature {i} has no threshold")));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) || t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("thresholds of feature {i} are not strictly increasing")));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.thresholds[feature]
    }

    pub fn k(&self, feature: usize) -> usize {
        self.thresholds[feature].len()
    }

    /// Start of each feature's block of flattened rows, plus the total at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n() + 1);
        let mut acc = 0;
        offsets.push(0);
        for t in &self.thresholds {
            acc += t.len();
            offsets.push(acc);
        }
        offsets
    }

    pub fn total(&self) -> usize {
        self.thresholds.iter().map(Vec::len).sum()
    }
}

/// Linear-interpolation quantile of sorted data (`h = (N - 1) p`).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Places `k` thresholds at the `1/(k+1), ..., k/(k+1)` empirical quantiles of
/// each feature's warmup values. Coinciding quantiles merge, so constant
/// features end up with a single threshold at their value.
pub fn build_threshold_grid(warmup_values: &[Vec<f64>], k: usize) -> Result<ThresholdGrid> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one threshold per feature".into()));
    }
    let thresholds = warmup_values
        .iter()
        .enumerate()
        .map(|(i, values)| {
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!("feature {i} has no warmup values")));
            }
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mut grid: Vec<f64> = (1..=k).map(|q| quantile(&sorted, q as f64 / (k + 1) as f64)).collect();
            grid.dedup();
            Ok(grid)
        })
        .collect::<Result<Vec<_>>>()?;
    ThresholdGrid::new(thresholds)
}

/// Grid for a mixed layout: quantile grids for continuous features, a single
/// 0.5 cut for binary ones.
pub fn grid_for_layout(layout: &FeatureLayout, warmup: &[DataPoint], k: usize) -> Result<ThresholdGrid> {
    let columns: Vec<Vec<f64>> = (0..layout.n())
        .map(|i| warmup.iter().map(|p| p.features[i]).collect())
        .collect();
    let quantiles = build_threshold_grid(&columns, k)?;
    let thresholds = layout
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| match f.kind {
            FeatureKind::Binary => vec![0.5],
            FeatureKind::Continuous => quantiles.thresholds(i).to_vec(),
        })
        .collect();
    ThresholdGrid::new(thresholds)
}

/// `1{x >= tau}`.
pub fn binarize(x: f64, tau: f64) -> bool {
    x >= tau
}

/// Per-threshold Beta beliefs and per-label usage counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentBelief {
    belief: BeliefState,
    usage: Vec<Vec<Vec<f64>>>,
    offsets: Vec<usize>,
}

impl LatentBelief {
    pub fn uniform(grid: &ThresholdGrid, m: usize) -> Self {
        Self {
            belief: BeliefState::uniform(grid.total(), m),
            usage: (0..grid.n()).map(|i| vec![vec![0.0; grid.k(i)]; m]).collect(),
            offsets: grid.offsets(),
        }
    }

    pub fn n(&self) -> usize {
        self.usage.len()
    }

    pub fn m(&self) -> usize {
        self.belief.m()
    }

    pub fn k(&self, feature: usize) -> usize {
        self.offsets[feature + 1] - self.offsets[feature]
    }

    pub fn row(&self, feature: usize, k: usize) -> usize {
        self.offsets[feature] + k
    }

    /// The flattened `(feature, threshold) x class` belief.
    pub fn flat(&self) -> &BeliefState {
        &self.belief
    }

    pub fn usage(&self, feature: usize, class: usize, k: usize) -> f64 {
        self.usage[feature][class][k]
    }

    pub fn set_usage(&mut self, feature: usize, class: usize, k: usize, count: f64) {
        self.usage[feature][class][k] = count;
    }

    pub fn class_prior(&self) -> Vec<f64> {
        self.belief.class_prior()
    }

    /// Posterior mean of `theta_ij^(k)`.
    pub fn threshold_mean(&self, feature: usize, class: usize, k: usize) -> f64 {
        let r = self.row(feature, k);
        let (a, b) = (self.belief.alpha(r, class), self.belief.beta(r, class));
        a / (a + b)
    }

    /// Normalized `usage + 1` weights over one feature's thresholds.
    pub fn usage_weights(&self, feature: usize, class: usize) -> Vec<f64> {
        let raw: Vec<f64> = self.usage[feature][class].iter().map(|u| u + 1.0).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Folds one epoch: observed `(feature, threshold, bit)` triples under the
    /// revealed label. Drift (sized to the flattened rows) discounts every entry first.
    pub fn update(&mut self, observed: &[(usize, usize, bool)], label: usize, drift: Option<&DriftConfig>) -> Result<()> {
        let mut flat = ObservationSet::new();
        for &(i, k, bit) in observed {
            check_index("feature", i, self.n())?;
            check_index("threshold", k, self.k(i))?;
            flat.push(self.row(i, k), bit, 0.0)?;
        }
        self.belief.update(&flat, label, drift)?;
        for &(i, k, _) in observed {
            self.usage[i][label][k] += 1.0;
        }
        Ok(())
    }
}

/// Usage-weighted average of the per-threshold posterior means.
pub fn aggregate_theta(latent: &LatentBelief, feature: usize, class: usize) -> f64 {
    latent
        .usage_weights(feature, class)
        .iter()
        .enumerate()
        .map(|(k, w)| w * latent.threshold_mean(feature, class, k))
        .sum()
}

/// Exp3 state: importance-weighted gain sums per (feature, threshold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBandit {
    sums: Vec<Vec<f64>>,
    eta: f64,
}

impl ThresholdBandit {
    pub fn new(grid: &ThresholdGrid, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta {eta} must be positive")));
        }
        Ok(Self {
            sums: (0..grid.n()).map(|i| vec![0.0; grid.k(i)]).collect(),
            eta,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sums(&self, feature: usize) -> &[f64] {
        &self.sums[feature]
    }

    pub fn distribution(&self, feature: usize) -> Vec<f64> {
        exp3_distribution(&self.sums[feature], self.eta)
    }

    /// Adds `gain / pi_k` to the sampled arm only.
    pub fn update(&mut self, feature: usize, sampled_k: usize, pi_k: f64, gain: f64) -> Result<()> {
        check_index("feature", feature, self.sums.len())?;
        check_index("threshold", sampled_k, self.sums[feature].len())?;
        if !(pi_k > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling probability {pi_k} must be positive")));
        }
        self.sums[feature][sampled_k] += gain / pi_k;
        Ok(())
    }
}

/// Softmax of `eta * S` with max-subtraction.
pub fn exp3_distribution(sums: &[f64], eta: f64) -> Vec<f64> {
    let scaled: Vec<f64> = sums.iter().map(|s| eta * s).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

pub fn exp3_update(bandit: &mut ThresholdBandit, feature: usize, sampled_k: usize, pi_k: f64, gain: f64) -> Result<()> {
    bandit.update(feature, sampled_k, pi_k, gain)
}

pub fn select_threshold_exhaustive(gains: &[f64]) -> usize {
    argmax(gains)
}

fn draw_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdSelection {
    Exhaustive,
    Exp3 { eta: f64 },
}

/// Gain of one latent column, scaled into `[0, 1]`.
///
/// EC2 is divided by the remaining edge weight, IG by `log2 m`; the US gain is
/// the entropy of a binary split and already lies in `[0, 1]`. Random has no
/// gain of its own and borrows EC2's.
pub fn normalized_gain(
    criterion: Criterion,
    set: &HypothesisSet,
    theta: &ThetaTable,
    column: usize,
) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let g = match criterion {
        Criterion::Ec2 | Criterion::Random => {
            let total = ec2_objective(set)?;
            if total > 0.0 {
                ec2_gain(set, column)? / total
            } else {
                0.0
            }
        }
        Criterion::InfoGain => {
            let m = theta.m();
            if m > 1 {
                ig_gain(theta, &ObservationSet::new(), column)? / (m as f64).log2()
            } else {
                0.0
            }
        }
        Criterion::Uncertainty => us_gain(set, column)?,
    };
    Ok(g.clamp(0.0, 1.0))
}

/// What an epoch plans on after thresholds are fixed.
#[derive(Debug, Clone)]
pub struct EpochPlan {
    pub theta: ThetaTable,
    pub set: HypothesisSet,
    pub thresholds: Vec<usize>,
}

/// Grid, latent belief and (optionally) the Exp3 bandit of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub grid: ThresholdGrid,
    pub belief: LatentBelief,
    pub selection: ThresholdSelection,
    pub bandit: Option<ThresholdBandit>,
}

impl LatentModel {
    pub fn new(grid: ThresholdGrid, m: usize, selection: ThresholdSelection) -> Result<Self> {
        let bandit = match selection {
            ThresholdSelection::Exp3 { eta } => Some(ThresholdBandit::new(&grid, eta)?),
            ThresholdSelection::Exhaustive => None,
        };
        Ok(Self {
            belief: LatentBelief::uniform(&grid, m),
            grid,
            selection,
            bandit,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn m(&self) -> usize {
        self.belief.m()
    }

    /// Samples every `theta_ij^(k)`, samples hypotheses over all latent bits,
    /// fixes one threshold per feature and projects onto those thresholds.
    ///
    /// Features with `queryable[i] == false` keep their most probable (Exp3)
    /// or best-scoring threshold without a bandit update.
    pub fn prepare_epoch<R1, R2, R3>(
        &mut self,
        criterion: Criterion,
        hypotheses: HypothesisMode,
        queryable: &[bool],
        theta_rng: &mut R1,
        hyp_rng: &mut R2,
        exp3_rng: &mut R3,
    ) -> Result<EpochPlan>
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
        R3: Rng + ?Sized,
    {
        let flat_theta = self.belief.flat().sample_theta(theta_rng);
        let flat_set = hypotheses.build(&flat_theta, hyp_rng)?;
        let mut thresholds = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let k_i = self.belief.k(i);
            let choice = if k_i == 1 {
                0
            } else {
                match self.bandit.as_mut() {
                    None => {
                        let gains = (0..k_i)
                            .map(|k| normalized_gain(criterion, &flat_set, &flat_theta, self.belief.row(i, k)))
                            .collect::<Result<Vec<_>>>()?;
                        select_threshold_exhaustive(&gains)
                    }
                    Some(bandit) => {
                        let dist = bandit.distribution(i);
                        if queryable[i] {
                            let k = draw_index(&dist, exp3_rng);
                            let gain = normalized_gain(criterion, &flat_set, &flat_theta, self.belief.row(i, k))?;
                            bandit.update(i, k, dist[k], gain)?;
                            k
                        } else {
                            argmax(&dist)
                        }
                    }
                }
            };
            thresholds.push(choice);
        }
        let rows: Vec<usize> = thresholds.iter().enumerate().map(|(i, &k)| self.belief.row(i, k)).collect();
        let theta = flat_theta.select_rows(&rows);
        let set = flat_set.project(&rows, &theta)?;
        Ok(EpochPlan { theta, set, thresholds })
    }

    pub fn bit(&self, feature: usize, k: usize, x: f64) -> bool {
        binarize(x, self.grid.thresholds(feature)[k])
    }

    /// Drift sized to the flattened latent rows.
    pub fn drift_config(&self, gamma: f64, alpha_bar: f64, beta_bar: f64) -> Result<DriftConfig> {
        DriftConfig::constant(self.grid.total(), self.m(), gamma, alpha_bar, beta_bar)
    }

    /// Usage-weighted summary table, `aggregate_theta` per entry.
    pub fn aggregate_table(&self) -> Result<ThetaTable> {
        let theta = (0..self.n())
            .map(|i| (0..self.m()).map(|j| aggregate_theta(&self.belief, i, j)).collect())
            .collect();
        ThetaTable::new(theta, self.belief.class_prior())
    }
}

/// Full-feature prediction in continuous mode: each feature contributes the
/// usage-weighted mixture of its per-threshold Bernoulli likelihoods.
impl Predictor for LatentModel {
    fn predict(&self, point: &DataPoint) -> usize {
        let mut scores: Vec<f64> = self.belief.class_prior().iter().map(|p| p.ln()).collect();
        for i in 0..self.n() {
            let x = point.features[i];
            for (j, s) in scores.iter_mut().enumerate() {
                let weights = self.belief.usage_weights(i, j);
                let lik: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| {
                        let t = self.belief.threshold_mean(i, j, k);
                        w.ln() + if self.bit(i, k, x) { t.ln() } else { (1.0 - t).ln() }
                    })
                    .collect();
                *s += log_sum_exp(&lik);
            }
        }
        argmax(&scores)
    }
}
