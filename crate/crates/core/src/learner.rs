//! The fully online loop: sample a table, plan a session on the hidden point,
//! predict, read the label, update. Optional drift discounting and optional
//! epsilon-greedy online feature selection (OFS) ride along.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{CostModel, Criterion, ObservationSet, StopReason};
use crate::belief::{argmax, BeliefState, DriftConfig};
use crate::continuous::{binarize, LatentModel, ThresholdSelection};
use crate::datastream::{DataPoint, NaiveBayesMap, Predictor};
use crate::error::{Error, Result};
use crate::seed::{stream_rng, Rng as SeedRng, Stream};
use crate::session::{plan_session, HypothesisMode, OracleFn, SessionParams, SessionResult, UtilityMatrix};

/// Cut used for features that are already 0/1.
pub const BINARY_CUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSettings {
    pub gamma: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
}

impl Default for DriftSettings {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            alpha_bar: 1.0,
            beta_bar: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfsConfig {
    pub epsilon: f64,
    pub budget: usize,
    pub learning_rate: f64,
}

impl OfsConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            epsilon: 0.2,
            budget,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSettings {
    pub thresholds: usize,
    pub warmup: usize,
    pub selection: ThresholdSelection,
}

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub criterion: Criterion,
    pub hypotheses: HypothesisMode,
    pub drift: Option<DriftSettings>,
    pub feature_selection: Option<OfsConfig>,
    pub budget: Option<f64>,
    pub seed: u64,
    /// Uniform unit costs when absent.
    pub costs: Option<CostModel>,
    pub utilities: Option<UtilityMatrix>,
}

impl LearnerConfig {
    pub fn new(criterion: Criterion, hypotheses: HypothesisMode, seed: u64) -> Self {
        Self {
            criterion,
            hypotheses,
            drift: None,
            feature_selection: None,
            budget: None,
            seed,
            costs: None,
            utilities: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let HypothesisMode::Sample(0) = self.hypotheses {
            return Err(Error::InvalidParameter("hypothesis count must be at least 1".into()));
        }
        if let Some(d) = &self.drift {
            if !(0.0..=1.0).contains(&d.gamma) || !(d.alpha_bar > 0.0 && d.beta_bar > 0.0) {
                return Err(Error::InvalidParameter("drift needs gamma in [0, 1] and positive injected parameters".into()));
            }
        }
        if let Some(o) = &self.feature_selection {
            if !(0.0..=1.0).contains(&o.epsilon) {
                return Err(Error::InvalidParameter(format!("ofs epsilon {} outside [0, 1]", o.epsilon)));
            }
            if !(o.learning_rate > 0.0) {
                return Err(Error::InvalidParameter("ofs learning rate must be positive".into()));
            }
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0) {
                return Err(Error::InvalidParameter(format!("budget {b} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Per-class linear weights driving epsilon-greedy feature restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfsState {
    weights: Vec<Vec<f64>>,
    epsilon: f64,
    budget: usize,
    learning_rate: f64,
    selected: Vec<usize>,
}

impl OfsState {
    pub fn new(n: usize, m: usize, config: &OfsConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1]", config.epsilon)));
        }
        if !(config.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        let budget = config.budget.min(n);
        Ok(Self {
            weights: vec![vec![0.0; n]; m],
            epsilon: config.epsilon,
            budget,
            learning_rate: config.learning_rate,
            selected: (0..budget).collect(),
        })
    }

    pub fn with_weights(weights: Vec<Vec<f64>>, config: &OfsConfig) -> Result<Self> {
        let n = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|w| w.len() != n) {
            return Err(Error::Dimension("ragged OFS weight matrix".into()));
        }
        let mut state = Self::new(n, weights.len(), config)?;
        state.weights = weights;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// L2 norm of each feature's weight column.
    pub fn importance(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.weights.iter().map(|row| row[i] * row[i]).sum::<f64>().sqrt())
            .collect()
    }

    pub fn predict(&self, estimates: &[f64]) -> usize {
        let scores: Vec<f64> = self
            .weights
            .iter()
            .map(|row| row.iter().zip(estimates).map(|(w, x)| w * x).sum())
            .collect();
        argmax(&scores)
    }
}

/// Top-`B` by importance with probability `1 - epsilon`, else a uniform
/// `B`-subset. Returned sorted; also stored as the state's current selection.
pub fn ofs_select<R: Rng + ?Sized>(state: &mut OfsState, rng: &mut R) -> Vec<usize> {
    let n = state.n();
    let b = state.budget;
    let u: f64 = rng.random();
    let mut chosen: Vec<usize> = if u < 1.0 - state.epsilon {
        let importance = state.importance();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| importance[c].total_cmp(&importance[a]).then(a.cmp(&c)));
        order.truncate(b);
        order
    } else {
        sample(rng, n, b).into_vec()
    };
    chosen.sort_unstable();
    state.selected = chosen.clone();
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfsEstimate {
    pub value: f64,
    /// The denominator vanished (epsilon = 0 and the feature was not both
    /// selected and queried); `value` is 0.
    pub degenerate: bool,
}

/// `1{i in F and i in C_t} x_i / (B/n * eps + 1{i in F and i in C_t} (1 - eps))`.
pub fn ofs_estimate(x: bool, queried: bool, selected: bool, b: usize, n: usize, epsilon: f64) -> OfsEstimate {
    let hit = queried && selected;
    let indicator = if hit { 1.0 } else { 0.0 };
    let denominator = b as f64 / n as f64 * epsilon + indicator * (1.0 - epsilon);
    if denominator <= 0.0 {
        return OfsEstimate {
            value: 0.0,
            degenerate: true,
        };
    }
    let numerator = if hit && x { 1.0 } else { 0.0 };
    OfsEstimate {
        value: numerator / denominator,
        degenerate: false,
    }
}

/// Multiclass perceptron step: on a mistake, move the true row toward the
/// estimate and the predicted row away from it.
pub fn ofs_update(state: &mut OfsState, estimates: &[f64], true_label: usize, predicted_label: usize) -> Result<()> {
    if estimates.len() != state.n() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} features",
            estimates.len(),
            state.n()
        )));
    }
    let m = state.weights.len();
    if true_label >= m || predicted_label >= m {
        return Err(Error::Bounds {
            what: "label",
            index: true_label.max(predicted_label),
            bound: m,
        });
    }
    if true_label == predicted_label {
        return Ok(());
    }
    let lr = state.learning_rate;
    for (i, x) in estimates.iter().enumerate() {
        state.weights[true_label][i] += lr * x;
        state.weights[predicted_label][i] -= lr * x;
    }
    Ok(())
}

/// Binary belief or flattened threshold belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Binary(BeliefState),
    Latent(LatentModel),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Binary(b) => b.n(),
            Model::Latent(l) => l.n(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Model::Binary(b) => b.m(),
            Model::Latent(l) => l.m(),
        }
    }
}

impl Predictor for Model {
    fn predict(&self, point: &DataPoint) -> usize {
        match self {
            Model::Binary(b) => NaiveBayesMap(&b.posterior_mean()).predict(point),
            Model::Latent(l) => l.predict(point),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub t: usize,
    pub prediction: usize,
    pub truth: usize,
    pub cost: f64,
    pub stop_reason: StopReason,
    pub queries: usize,
    pub queried: Vec<usize>,
    /// OFS selection for the epoch.
    pub candidates: Option<Vec<usize>>,
    /// Training utility of the prediction.
    pub utility: f64,
    pub distinct_hypotheses: usize,
    /// Threshold index per feature (continuous mode).
    pub thresholds: Option<Vec<usize>>,
}

struct Streams {
    theta: SeedRng,
    hypotheses: SeedRng,
    query: SeedRng,
    exp3: SeedRng,
    ofs: SeedRng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            theta: stream_rng(seed, Stream::Theta),
            hypotheses: stream_rng(seed, Stream::Hypotheses),
            query: stream_rng(seed, Stream::Query),
            exp3: stream_rng(seed, Stream::Exp3),
            ofs: stream_rng(seed, Stream::Ofs),
        }
    }
}

pub struct OnlineLearner {
    model: Model,
    params: SessionParams,
    drift: Option<DriftConfig>,
    ofs: Option<OfsState>,
    streams: Streams,
    t: usize,
}

impl OnlineLearner {
    pub fn new(config: &LearnerConfig, model: Model) -> Result<Self> {
        config.validate()?;
        let (n, m) = (model.n(), model.m());
        let costs = match &config.costs {
            Some(c) if c.len() != n => {
                return Err(Error::Dimension(format!("{} costs for {n} features", c.len())));
            }
            Some(c) => c.clone(),
            None => CostModel::uniform(n),
        };
        let drift = match (&config.drift, &model) {
            (None, _) => None,
            (Some(d), Model::Binary(_)) => Some(DriftConfig::constant(n, m, d.gamma, d.alpha_bar, d.beta_bar)?),
            (Some(d), Model::Latent(l)) => Some(l.drift_config(d.gamma, d.alpha_bar, d.beta_bar)?),
        };
        let ofs = config.feature_selection.as_ref().map(|o| OfsState::new(n, m, o)).transpose()?;
        let mut params = SessionParams::new(config.criterion, costs, config.hypotheses);
        params.budget = config.budget;
        params.utilities = config.utilities.clone();
        Ok(Self {
            model,
            params,
            drift,
            ofs,
            streams: Streams::new(config.seed),
            t: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn ofs(&self) -> Option<&OfsState> {
        self.ofs.as_ref()
    }

    pub fn epoch(&self) -> usize {
        self.t
    }

    fn check_point(&self, point: &DataPoint) -> Result<()> {
        if point.features.len() != self.model.n() {
            return Err(Error::Data(format!(
                "epoch {}: point has {} features, learner expects {}",
                self.t,
                point.features.len(),
                self.model.n()
            )));
        }
        if point.label >= self.model.m() {
            return Err(Error::Data(format!(
                "epoch {}: label {} outside {} classes",
                self.t,
                point.label,
                self.model.m()
            )));
        }
        Ok(())
    }

    /// Plans on the features alone; the label is not visible here.
    fn plan(&mut self, features: &[f64], candidates: Option<&[usize]>) -> Result<(SessionResult, Option<Vec<usize>>)> {
        self.params.candidates = candidates.map(<[usize]>::to_vec);
        match &mut self.model {
            Model::Binary(belief) => {
                let theta = belief.sample_theta(&mut self.streams.theta);
                let set = self.params.hypotheses.build(&theta, &mut self.streams.hypotheses)?;
                let oracle = OracleFn(|i: usize| Ok(binarize(features[i], BINARY_CUT)));
                let result = plan_session(&theta, set, &oracle, &self.params, &mut self.streams.query)?;
                Ok((result, None))
            }
            Model::Latent(latent) => {
                let n = latent.n();
                let queryable: Vec<bool> = match candidates {
                    Some(c) => {
                        let mut mask = vec![false; n];
                        c.iter().for_each(|&i| mask[i] = true);
                        mask
                    }
                    None => vec![true; n],
                };
                let plan = latent.prepare_epoch(
                    self.params.criterion,
                    self.params.hypotheses,
                    &queryable,
                    &mut self.streams.theta,
                    &mut self.streams.hypotheses,
                    &mut self.streams.exp3,
                )?;
                let latent = &*latent;
                let thresholds = plan.thresholds;
                let oracle = OracleFn(|i: usize| Ok(latent.bit(i, thresholds[i], features[i])));
                let result = plan_session(&plan.theta, plan.set, &oracle, &self.params, &mut self.streams.query)?;
                Ok((result, Some(thresholds)))
            }
        }
    }

    /// One epoch on `point`. Its label is read only after the prediction.
    pub fn step(&mut self, point: &DataPoint) -> Result<EpochRecord> {
        self.check_point(point)?;
        let candidates = match &mut self.ofs {
            Some(state) => Some(ofs_select(state, &mut self.streams.ofs)),
            None => None,
        };
        let (session, thresholds) = self.plan(&point.features, candidates.as_deref())?;

        let truth = point.label;
        match (&mut self.model, &thresholds) {
            (Model::Binary(belief), _) => belief.update(&session.observations, truth, self.drift.as_ref())?,
            (Model::Latent(latent), Some(th)) => {
                let observed: Vec<(usize, usize, bool)> =
                    session.observations.entries().iter().map(|&(i, v)| (i, th[i], v)).collect();
                latent.belief.update(&observed, truth, self.drift.as_ref())?;
            }
            (Model::Latent(_), None) => unreachable!("latent plans always carry thresholds"),
        }
        if let (Some(state), Some(selected)) = (&mut self.ofs, &candidates) {
            let estimates = ofs_estimates(state, selected, &session.observations);
            let predicted = state.predict(&estimates);
            ofs_update(state, &estimates, truth, predicted)?;
        }

        let record = EpochRecord {
            t: self.t,
            prediction: session.prediction,
            truth,
            cost: session.total_cost(),
            stop_reason: session.stop_reason,
            queries: session.queries_made,
            queried: session.observations.features().collect(),
            candidates,
            utility: session.utility(truth, self.params.utilities.as_ref()),
            distinct_hypotheses: session.distinct_hypotheses,
            thresholds,
        };
        self.t += 1;
        Ok(record)
    }
}

fn ofs_estimates(state: &OfsState, selected: &[usize], observations: &ObservationSet) -> Vec<f64> {
    let n = state.n();
    (0..n)
        .map(|i| {
            let x = observations.value(i);
            ofs_estimate(
                x.unwrap_or(false),
                x.is_some(),
                selected.binary_search(&i).is_ok(),
                state.budget(),
                n,
                state.epsilon(),
            )
            .value
        })
        .collect()
}

/// Runs the binary learner over a whole stream.
pub fn run_online(
    config: &LearnerConfig,
    stream: &[DataPoint],
    initial_belief: BeliefState,
) -> Result<(Vec<EpochRecord>, BeliefState)> {
    let (records, model) = run_online_model(config, stream, Model::Binary(initial_belief))?;
    match model {
        Model::Binary(b) => Ok((records, b)),
        Model::Latent(_) => unreachable!("model kind is preserved"),
    }
}

pub fn run_online_model(config: &LearnerConfig, stream: &[DataPoint], model: Model) -> Result<(Vec<EpochRecord>, Model)> {
    if stream.is_empty() {
        return Ok((Vec::new(), model));
    }
    let mut learner = OnlineLearner::new(config, model)?;
    let records = stream.iter().map(|p| learner.step(p)).collect::<Result<Vec<_>>>()?;
    Ok((records, learner.into_model()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::ThetaTable;
    use crate::continuous::{grid_for_layout, ThresholdGrid};
    use crate::datastream::{sample_from_theta, FeatureLayout};
    use rand::SeedableRng;

    fn ofs_config(epsilon: f64, budget: usize) -> OfsConfig {
        OfsConfig {
            epsilon,
            budget,
            learning_rate: 0.1,
        }
    }

    #[test]
    fn ofs_select_top_b() {
        let mut state = OfsState::with_weights(vec![vec![3.0, 1.0, 2.0]], &ofs_config(0.0, 2)).unwrap();
        let mut rng = SeedRng::seed_from_u64(0);
        assert_eq!(ofs_select(&mut state, &mut rng), vec![0, 2]);
        assert_eq!(state.selected(), &[0, 2]);
    }

    #[test]
    fn ofs_select_mixture_frequency() {
        let mut state = OfsState::with_weights(vec![vec![2.0, 1.0]], &ofs_config(0.5, 1)).unwrap();
        let mut rng = SeedRng::seed_from_u64(11);
        let trials = 100_000;
        let hits = (0..trials).filter(|_| ofs_select(&mut state, &mut rng) == [0]).count();
        assert!((hits as f64 / trials as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn ofs_select_uniform_when_exploring() {
        let mut state = OfsState::new(5, 2, &ofs_config(1.0, 2)).unwrap();
        let mut rng = SeedRng::seed_from_u64(3);
        let trials = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..trials {
            for i in ofs_select(&mut state, &mut rng) {
                counts[i] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / trials as f64 - 0.4).abs() < 0.02);
        }
    }

    #[test]
    fn ofs_estimate_examples() {
        assert_eq!(ofs_estimate(true, false, true, 2, 4, 0.5).value, 0.0);
        assert_eq!(ofs_estimate(true, true, false, 2, 4, 0.5).value, 0.0);
        assert!((ofs_estimate(true, true, true, 2, 4, 0.5).value - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(ofs_estimate(true, true, true, 4, 4, 1.0).value, 1.0);
        assert_eq!(ofs_estimate(false, true, true, 4, 4, 1.0).value, 0.0);
        let degenerate = ofs_estimate(true, false, true, 2, 4, 0.0);
        assert!(degenerate.degenerate && degenerate.value == 0.0);
    }

    #[test]
    fn ofs_update_examples() {
        let mut state = OfsState::new(2, 2, &ofs_config(0.2, 1)).unwrap();
        ofs_update(&mut state, &[4.0 / 3.0, 0.0], 1, 1).unwrap();
        assert_eq!(state.weights(), &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        ofs_update(&mut state, &[4.0 / 3.0, 0.0], 1, 0).unwrap();
        assert!((state.weights()[1][0] - 0.4 / 3.0).abs() < 1e-12);
        assert!((state.weights()[0][0] + 0.4 / 3.0).abs() < 1e-12);
        assert_eq!(state.weights()[0][1], 0.0);
        assert!(ofs_update(&mut state, &[1.0], 0, 1).is_err());
    }

    #[test]
    fn empty_stream_returns_belief_unchanged() {
        let config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Sample(10), 0);
        let belief = BeliefState::uniform(3, 2);
        let (records, out) = run_online(&config, &[], belief.clone()).unwrap();
        assert!(records.is_empty());
        assert_eq!(out, belief);
    }

    #[test]
    fn schema_mismatch_is_a_data_error() {
        let config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Sample(10), 0);
        let stream = vec![DataPoint::new(vec![1.0, 0.0], 0)];
        let err = run_online(&config, &stream, BeliefState::uniform(3, 2)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn cost_equals_queries_under_unit_costs() {
        let theta = ThetaTable::new(vec![vec![0.9, 0.1], vec![0.2, 0.7], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap();
        let stream = sample_from_theta(&theta, 50, &mut SeedRng::seed_from_u64(1));
        let config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Sample(20), 4);
        let (records, belief) = run_online(&config, &stream, BeliefState::uniform(3, 2)).unwrap();
        assert_eq!(records.len(), 50);
        for r in &records {
            assert_eq!(r.cost, r.queries as f64);
            assert_eq!(r.queried.len(), r.queries);
        }
        let observed: usize = records.iter().map(|r| r.queries).sum();
        let counted: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| belief.alpha(i, j) + belief.beta(i, j) - 2.0)
            .sum();
        assert_eq!(counted, observed as f64);
    }

    #[test]
    fn sessions_stay_inside_ofs_selection() {
        let theta = ThetaTable::new(vec![vec![0.8, 0.3]; 6], vec![0.5, 0.5]).unwrap();
        let stream = sample_from_theta(&theta, 200, &mut SeedRng::seed_from_u64(5));
        let mut config = LearnerConfig::new(Criterion::InfoGain, HypothesisMode::Sample(20), 9);
        config.feature_selection = Some(ofs_config(0.3, 2));
        let (records, _) = run_online(&config, &stream, BeliefState::uniform(6, 2)).unwrap();
        for r in records {
            let c = r.candidates.unwrap();
            assert_eq!(c.len(), 2);
            assert!(r.queried.iter().all(|q| c.contains(q)));
        }
    }

    #[test]
    fn single_cut_continuous_mode_matches_binary_mode() {
        let theta = ThetaTable::new(vec![vec![0.9, 0.2], vec![0.3, 0.6], vec![0.5, 0.1]], vec![0.4, 0.6]).unwrap();
        let stream = sample_from_theta(&theta, 60, &mut SeedRng::seed_from_u64(2));
        let mut config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Sample(25), 17);
        config.drift = Some(DriftSettings::default());
        let (binary, _) = run_online(&config, &stream, BeliefState::uniform(3, 2)).unwrap();

        let layout = FeatureLayout::binary(3, 2);
        let grid = grid_for_layout(&layout, &stream[..30], 5).unwrap();
        assert_eq!(grid, ThresholdGrid::new(vec![vec![0.5]; 3]).unwrap());
        let model = LatentModel::new(grid, 2, ThresholdSelection::Exp3 { eta: 0.01 }).unwrap();
        let (latent, _) = run_online_model(&config, &stream, Model::Latent(model)).unwrap();
        assert_eq!(binary.len(), latent.len());
        for (b, l) in binary.iter().zip(&latent) {
            let mut l = l.clone();
            assert_eq!(l.thresholds.take(), Some(vec![0; 3]));
            assert_eq!(*b, l);
        }
    }
}
