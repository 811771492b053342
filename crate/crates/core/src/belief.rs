//! Beta-Bernoulli naive-Bayes belief over the class-conditional feature table.
//!
//! The learner's whole epistemic state is a pair of `n x m` matrices of Beta
//! parameters, one Beta per `P[X_i = 1 | Y = j]`, plus smoothed class tallies
//! that define the class prior. Likelihood products are accumulated in
//! log-space and normalized by max-subtraction.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::acquisition::ObservationSet;
use crate::error::{check_index, Error, Result};

const PRIOR_SUM_TOL: f64 = 1e-9;
const THETA_FLOOR: f64 = 1e-12;

/// Beta parameters per (feature, class) and smoothed class tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    class_counts: Vec<f64>,
}

impl BeliefState {
    /// Uniform Beta(1, 1) on every entry and one pseudo-count per class.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            alpha: vec![vec![1.0; m]; n],
            beta: vec![vec![1.0; m]; n],
            class_counts: vec![1.0; m],
        }
    }

    pub fn new(alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>>, class_counts: Vec<f64>) -> Result<Self> {
        let m = class_counts.len();
        if m == 0 {
            return Err(Error::Dimension("belief needs at least one class".into()));
        }
        if alpha.len() != beta.len() {
            return Err(Error::Dimension(format!(
                "alpha has {} rows, beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        for (i, (a_row, b_row)) in alpha.iter().zip(&beta).enumerate() {
            if a_row.len() != m || b_row.len() != m {
                return Err(Error::Dimension(format!("row {i} does not have {m} classes")));
            }
            if a_row.iter().chain(b_row).any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has a non-positive Beta parameter"
                )));
            }
        }
        if class_counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || class_counts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("class counts must be nonnegative with positive total".into()));
        }
        Ok(Self {
            alpha,
            beta,
            class_counts,
        })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn m(&self) -> usize {
        self.class_counts.len()
    }

    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i][j]
    }

    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[i][j]
    }

    pub fn class_counts(&self) -> &[f64] {
        &self.class_counts
    }

    pub fn class_prior(&self) -> Vec<f64> {
        let total: f64 = self.class_counts.iter().sum();
        self.class_counts.iter().map(|c| c / total).collect()
    }

    /// Posterior mean `alpha / (alpha + beta)` per entry, with the current class prior.
    pub fn posterior_mean(&self) -> ThetaTable {
        let theta = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a / (a + b)).collect())
            .collect();
        ThetaTable {
            theta,
            class_prior: self.class_prior(),
        }
    }

    /// Draws one table `theta[i][j] ~ Beta(alpha_ij, beta_ij)`, row-major.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> ThetaTable {
        let theta = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(a_row, b_row)| {
                a_row
                    .iter()
                    .zip(b_row)
                    .map(|(&a, &b)| {
                        let draw = Beta::new(a, b)
                            .expect("Beta parameters are positive by construction")
                            .sample(rng);
                        draw.clamp(THETA_FLOOR, 1.0 - THETA_FLOOR)
                    })
                    .collect()
            })
            .collect();
        ThetaTable {
            theta,
            class_prior: self.class_prior(),
        }
    }

    /// Folds one epoch of evidence into the belief.
    ///
    /// With drift enabled every entry is first pulled toward the injected
    /// prior, `alpha <- (1 - gamma) alpha + gamma alpha_bar`, before the
    /// observed counts are added. The update is validated up front, so an
    /// error leaves the belief untouched.
    pub fn update(
        &mut self,
        observations: &ObservationSet,
        true_label: usize,
        drift: Option<&DriftConfig>,
    ) -> Result<()> {
        check_index("label", true_label, self.m())?;
        for &(i, _) in observations.entries() {
            check_index("feature", i, self.n())?;
        }
        if let Some(drift) = drift.filter(|d| d.enabled) {
            drift.check_dims(self.n(), self.m())?;
            let g = drift.gamma;
            for i in 0..self.n() {
                for j in 0..self.m() {
                    self.alpha[i][j] = (1.0 - g) * self.alpha[i][j] + g * drift.alpha_bar[i][j];
                    self.beta[i][j] = (1.0 - g) * self.beta[i][j] + g * drift.beta_bar[i][j];
                }
            }
        }
        for &(i, value) in observations.entries() {
            if value {
                self.alpha[i][true_label] += 1.0;
            } else {
                self.beta[i][true_label] += 1.0;
            }
        }
        self.class_counts[true_label] += 1.0;
        Ok(())
    }
}

/// Discount-and-inject configuration for non-stationary streams.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    pub gamma: f64,
    pub alpha_bar: Vec<Vec<f64>>,
    pub beta_bar: Vec<Vec<f64>>,
    pub enabled: bool,
}

impl DriftConfig {
    pub fn new(gamma: f64, alpha_bar: Vec<Vec<f64>>, beta_bar: Vec<Vec<f64>>) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside [0, 1]")));
        }
        if alpha_bar.len() != beta_bar.len()
            || alpha_bar.iter().zip(&beta_bar).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Dimension("alpha_bar and beta_bar differ in shape".into()));
        }
        if alpha_bar.iter().chain(&beta_bar).flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("injected Beta parameters must be positive".into()));
        }
        Ok(Self {
            gamma,
            alpha_bar,
            beta_bar,
            enabled: true,
        })
    }

    /// Injects `Beta(alpha_bar, beta_bar)` with the same scalars everywhere.
    pub fn constant(n: usize, m: usize, gamma: f64, alpha_bar: f64, beta_bar: f64) -> Result<Self> {
        Self::new(gamma, vec![vec![alpha_bar; m]; n], vec![vec![beta_bar; m]; n])
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.alpha_bar.len() != n || self.alpha_bar.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("drift matrices are not {n}x{m}")));
        }
        Ok(())
    }
}

/// One concrete table `theta[i][j] = P[X_i = 1 | Y = j]` and a class prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaTable {
    theta: Vec<Vec<f64>>,
    class_prior: Vec<f64>,
}

impl ThetaTable {
    /// Accepts the closed interval so degenerate (deterministic) tables can be
    /// expressed; sampled tables always lie strictly inside (0, 1).
    pub fn new(theta: Vec<Vec<f64>>, class_prior: Vec<f64>) -> Result<Self> {
        let m = class_prior.len();
        if m == 0 {
            return Err(Error::Dimension("theta table needs at least one class".into()));
        }
        if class_prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("class prior has a negative entry".into()));
        }
        let sum: f64 = class_prior.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidParameter(format!("class prior sums to {sum}")));
        }
        for (i, row) in theta.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!("theta row {i} does not have {m} classes")));
            }
            if row.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::InvalidParameter(format!("theta row {i} leaves [0, 1]")));
            }
        }
        Ok(Self { theta, class_prior })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn m(&self) -> usize {
        self.class_prior.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.theta[i]
    }

    pub fn class_prior(&self) -> &[f64] {
        &self.class_prior
    }

    /// A table whose rows are the given rows of `self`, in order.
    pub fn select_rows(&self, rows: &[usize]) -> ThetaTable {
        ThetaTable {
            theta: rows.iter().map(|&r| self.theta[r].clone()).collect(),
            class_prior: self.class_prior.clone(),
        }
    }

    #[inline]
    pub fn log_likelihood(&self, i: usize, j: usize, value: bool) -> f64 {
        let t = self.theta[i][j];
        if value {
            t.ln()
        } else {
            (1.0 - t).ln()
        }
    }

    /// Unnormalized `ln P[Y_j] + sum_i ln P[x_i | Y_j]` for every class.
    pub fn class_log_scores<I>(&self, evidence: I) -> Vec<f64>
    where
        I: IntoIterator<Item = (usize, bool)>,
    {
        let mut scores: Vec<f64> = self.class_prior.iter().map(|p| p.ln()).collect();
        for (i, value) in evidence {
            for (j, s) in scores.iter_mut().enumerate() {
                *s += self.log_likelihood(i, j, value);
            }
        }
        scores
    }

    /// `ln P[h]` for a full realization under the naive-Bayes mixture.
    pub fn log_marginal(&self, bits: &[bool]) -> f64 {
        log_sum_exp(&self.class_log_scores(bits.iter().copied().enumerate()))
    }
}

/// Normalizes log-scores into a probability vector.
///
/// Fails when every score is `-inf`, i.e. no class can explain the evidence.
pub fn normalize_log_scores(scores: &[f64]) -> Result<Vec<f64>> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegenerateEvidence);
    }
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// `P[Y | x_F]` under the naive-Bayes model. Empty evidence yields the prior.
pub fn class_posterior(theta: &ThetaTable, observations: &ObservationSet) -> Result<Vec<f64>> {
    for &(i, _) in observations.entries() {
        check_index("feature", i, theta.n())?;
    }
    normalize_log_scores(&theta.class_log_scores(observations.entries().iter().copied()))
}

/// `P[h] = sum_j P[Y_j] prod_i theta_ij^h_i (1 - theta_ij)^(1 - h_i)`.
pub fn hypothesis_marginal(theta: &ThetaTable, bits: &[bool]) -> Result<f64> {
    if bits.len() != theta.n() {
        return Err(Error::Dimension(format!(
            "hypothesis has {} bits, table has {} features",
            bits.len(),
            theta.n()
        )));
    }
    Ok(theta.log_marginal(bits).exp())
}

/// Prior that slides from uniform Beta(1, 1) at `lambda = 0` to a
/// `kappa`-pseudo-count prior centred on `theta_star` at `lambda = 1`.
pub fn interpolate_prior(theta_star: &ThetaTable, lambda: f64, kappa: f64) -> Result<BeliefState> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa {kappa} must be positive")));
    }
    let (n, m) = (theta_star.n(), theta_star.m());
    let mut alpha = vec![vec![0.0; m]; n];
    let mut beta = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let t = theta_star.get(i, j);
            alpha[i][j] = (1.0 - lambda) + lambda * kappa * t;
            beta[i][j] = (1.0 - lambda) + lambda * kappa * (1.0 - t);
        }
    }
    BeliefState::new(alpha, beta, vec![1.0; m])
}
