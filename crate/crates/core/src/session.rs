//! One planning epoch: sample hypotheses once, then query, observe and
//! condition greedily until the stopping rule fires.

use rand::Rng;

use crate::acquisition::{
    score_candidates, select_query, should_stop, CostModel, Criterion, ObservationSet, StopReason,
};
use crate::belief::{argmax, class_posterior, ThetaTable};
use crate::error::{Error, Result};
use crate::hypotheses::{sample_hypotheses, HypothesisSet};

/// Answers feature queries about the current (hidden) data point.
pub trait FeatureOracle {
    fn reveal(&self, feature: usize) -> Result<bool>;
}

impl FeatureOracle for [bool] {
    fn reveal(&self, feature: usize) -> Result<bool> {
        self.get(feature)
            .copied()
            .ok_or_else(|| Error::Data(format!("point has no feature {feature}")))
    }
}

impl FeatureOracle for Vec<bool> {
    fn reveal(&self, feature: usize) -> Result<bool> {
        self.as_slice().reveal(feature)
    }
}

/// Adapts a closure into an oracle.
pub struct OracleFn<F>(pub F);

impl<F: Fn(usize) -> Result<bool>> FeatureOracle for OracleFn<F> {
    fn reveal(&self, feature: usize) -> Result<bool> {
        (self.0)(feature)
    }
}

/// How the epoch's hypothesis set is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisMode {
    /// Number of region draws.
    Sample(usize),
    /// Every positive-probability pattern.
    Enumerate,
}

impl HypothesisMode {
    pub fn build<R: Rng + ?Sized>(self, theta: &ThetaTable, rng: &mut R) -> Result<HypothesisSet> {
        match self {
            HypothesisMode::Sample(count) => sample_hypotheses(theta, count, rng),
            HypothesisMode::Enumerate => HypothesisSet::enumerate(theta),
        }
    }
}

/// `u(y_true, y)`, indexed `[true][predicted]`. Defaults to 0-1 utility.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    values: Vec<Vec<f64>>,
}

impl UtilityMatrix {
    pub fn zero_one(m: usize) -> Self {
        Self {
            values: (0..m).map(|t| (0..m).map(|p| (t == p) as u8 as f64).collect()).collect(),
        }
    }

    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values.len();
        if values.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("utility matrix must be square".into()));
        }
        Ok(Self { values })
    }

    pub fn utility(&self, true_label: usize, predicted: usize) -> f64 {
        self.values[true_label][predicted]
    }

    fn is_zero_one(&self) -> bool {
        *self == Self::zero_one(self.values.len())
    }
}

#[derive(Debug, Clone)]
pub struct SessionParams {
    pub criterion: Criterion,
    pub costs: CostModel,
    pub hypotheses: HypothesisMode,
    pub budget: Option<f64>,
    /// Restricts queries to these features (online feature selection).
    pub candidates: Option<Vec<usize>>,
    pub utilities: Option<UtilityMatrix>,
}

impl SessionParams {
    pub fn new(criterion: Criterion, costs: CostModel, hypotheses: HypothesisMode) -> Self {
        Self {
            criterion,
            costs,
            hypotheses,
            budget: None,
            candidates: None,
            utilities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub prediction: usize,
    pub observations: ObservationSet,
    pub stop_reason: StopReason,
    pub queries_made: usize,
    pub distinct_hypotheses: usize,
}

impl SessionResult {
    pub fn total_cost(&self) -> f64 {
        self.observations.total_cost()
    }

    /// Utility of the prediction once the label is known.
    pub fn utility(&self, true_label: usize, utilities: Option<&UtilityMatrix>) -> f64 {
        match utilities {
            Some(u) => u.utility(true_label, self.prediction),
            None => (true_label == self.prediction) as u8 as f64,
        }
    }
}

/// `argmax_j P[Y_j | x_F]`, lowest index on ties; the prior when evidence is degenerate.
pub fn predict_fallback(theta: &ThetaTable, observations: &ObservationSet) -> Result<usize> {
    predict_with_utility(theta, observations, None)
}

/// Bayes action under an arbitrary utility matrix.
pub fn predict_with_utility(
    theta: &ThetaTable,
    observations: &ObservationSet,
    utilities: Option<&UtilityMatrix>,
) -> Result<usize> {
    let posterior = match class_posterior(theta, observations) {
        Ok(p) => p,
        Err(Error::DegenerateEvidence) => theta.class_prior().to_vec(),
        Err(e) => return Err(e),
    };
    match utilities.filter(|u| !u.is_zero_one()) {
        None => Ok(argmax(&posterior)),
        Some(u) => {
            let expected: Vec<f64> = (0..theta.m())
                .map(|y| posterior.iter().enumerate().map(|(t, p)| p * u.utility(t, y)).sum())
                .collect();
            Ok(argmax(&expected))
        }
    }
}

/// Samples the epoch's hypotheses from `hyp_rng` and plans on them.
pub fn run_session<O, R1, R2>(
    theta: &ThetaTable,
    oracle: &O,
    params: &SessionParams,
    hyp_rng: &mut R1,
    query_rng: &mut R2,
) -> Result<SessionResult>
where
    O: FeatureOracle + ?Sized,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let set = params.hypotheses.build(theta, hyp_rng)?;
    plan_session(theta, set, oracle, params, query_rng)
}

/// The greedy query loop over an already-built hypothesis set.
pub fn plan_session<O, R>(
    theta: &ThetaTable,
    mut set: HypothesisSet,
    oracle: &O,
    params: &SessionParams,
    query_rng: &mut R,
) -> Result<SessionResult>
where
    O: FeatureOracle + ?Sized,
    R: Rng + ?Sized,
{
    let n = theta.n();
    if params.costs.len() != n {
        return Err(Error::Dimension(format!(
            "cost model covers {} features, table has {n}",
            params.costs.len()
        )));
    }
    let distinct_hypotheses = set.len();
    let mut candidates: Vec<usize> = match &params.candidates {
        Some(c) => c.iter().copied().filter(|&i| i < n).collect(),
        None => (0..n).collect(),
    };
    candidates.sort_unstable();
    candidates.dedup();

    let mut observations = ObservationSet::new();
    let stop_reason = loop {
        let open: Vec<usize> = candidates.iter().copied().filter(|&i| !observations.contains(i)).collect();
        if let Some(reason) = should_stop(&set, open.len(), None) {
            break reason;
        }
        let scores = score_candidates(params.criterion, &set, theta, &observations, &open, &params.costs)?;
        let queried: Vec<usize> = observations.features().collect();
        let Some(feature) = select_query(&scores, &queried, query_rng, params.criterion) else {
            break StopReason::NoGain;
        };
        let cost = params.costs.cost(feature);
        if let Some(budget) = params.budget {
            if observations.total_cost() + cost > budget {
                break StopReason::Budget;
            }
        }
        let value = oracle.reveal(feature)?;
        observations.push(feature, value, cost)?;
        set = set.condition(feature, value)?;
    };

    let prediction = match (stop_reason, set.sole_region()) {
        (StopReason::OneRegion, Some(region)) => region,
        _ => predict_with_utility(theta, &observations, params.utilities.as_ref())?,
    };
    Ok(SessionResult {
        prediction,
        queries_made: observations.len(),
        observations,
        stop_reason,
        distinct_hypotheses,
    })
}
