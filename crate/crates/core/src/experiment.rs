//! Experiment configs, replicate orchestration and result files.
//!
//! Configs are flat `key = value` text with dotted section names; `#` starts a
//! comment. See the README for the key reference.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::acquisition::{CostModel, Criterion, StopReason};
use crate::belief::{interpolate_prior, BeliefState, ThetaTable};
use crate::continuous::{grid_for_layout, LatentModel, ThresholdSelection, DEFAULT_THRESHOLDS, DEFAULT_WARMUP};
use crate::datastream::{
    choose_metric, empirical_theta, evaluate_predictor, gaussian_stream, led_stream, led_theta_star, load_costs,
    load_dataset, random_theta, sample_from_theta, split_dataset, stagger_concept_at, stagger_layout, stagger_stream,
    stagger_theta_star, continuous_layout, DataPoint, Dataset, FeatureLayout, Metrics, Schema, StaggerObject,
    UtilityMetric,
};
use crate::error::{Error, Result};
use crate::learner::{ContinuousSettings, DriftSettings, EpochRecord, LearnerConfig, Model, OfsConfig, OnlineLearner};
use crate::seed::{stream_rng, Stream};
use crate::session::HypothesisMode;

/// Parsed but untyped `key -> value` pairs.
pub type RawConfig = BTreeMap<String, String>;

pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if raw.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("{key}: set twice")));
        }
    }
    Ok(raw)
}

pub fn read_config(path: &Path) -> Result<RawConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text)
}

/// Applies `(dotted key, value)` overrides on top of a parsed config.
pub fn apply_overrides<'a>(raw: &mut RawConfig, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) {
    for (k, v) in overrides {
        raw.insert(k.to_string(), v.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Stagger,
    Led,
    Synthetic,
    Gaussian,
    File,
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stagger" => Ok(SourceKind::Stagger),
            "led" => Ok(SourceKind::Led),
            "synthetic" => Ok(SourceKind::Synthetic),
            "gaussian" => Ok(SourceKind::Gaussian),
            "file" => Ok(SourceKind::File),
            other => Err(Error::Config(format!("stream.source: unknown source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub source: SourceKind,
    pub length: usize,
    pub drift_points: Vec<usize>,
    /// Held-out points per test set (one test set per Stagger concept).
    pub test_size: usize,
    pub irrelevant: usize,
    pub noise: f64,
    pub features: usize,
    pub classes: usize,
    pub theta_low: f64,
    pub theta_high: f64,
    pub separation: f64,
    pub path: Option<PathBuf>,
    pub schema: Schema,
    pub test_fraction: f64,
    pub costs: Option<PathBuf>,
}

impl Default for StreamSpec {
    fn default() -> Self {
        Self {
            source: SourceKind::Stagger,
            length: 180,
            drift_points: Vec::new(),
            test_size: 200,
            irrelevant: 17,
            noise: 0.1,
            features: 8,
            classes: 2,
            theta_low: 0.05,
            theta_high: 0.95,
            separation: 3.0,
            path: None,
            schema: Schema::Auto,
            test_fraction: 0.2,
            costs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Uniform,
    /// `interpolate_prior` toward the source's true table.
    Oracle { lambda: f64, kappa: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub criterion: Criterion,
    pub hypotheses: HypothesisMode,
    pub drift: Option<DriftSettings>,
    pub ofs: Option<OfsConfig>,
    pub budget: Option<f64>,
    pub continuous: Option<ContinuousSettings>,
    pub prior: PriorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub learner: LearnerSpec,
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    /// Forced test metric; chosen per test set by the imbalance rule when absent.
    pub metric: Option<UtilityMetric>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// `a..b` (exclusive), `a..=b`, or a comma list.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let key = "run.seeds";
    if let Some((a, b)) = value.split_once("..=") {
        let (a, b): (u64, u64) = (parse_value(key, a.trim())?, parse_value(key, b.trim())?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (parse_value(key, a.trim())?, parse_value(key, b.trim())?);
        return Ok((a..b).collect());
    }
    parse_list(key, value)
}

fn parse_metric(value: &str) -> Result<Option<UtilityMetric>> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        value.parse().map(Some).map_err(|_| Error::Config(format!("eval.metric: unknown metric {value:?}")))
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut stream = StreamSpec::default();
        let mut criterion = Criterion::Ec2;
        let mut hypotheses = HypothesisMode::Sample(50);
        let mut drift_on = false;
        let mut drift = DriftSettings::default();
        let mut ofs_on = false;
        let mut ofs = OfsConfig::new(usize::MAX);
        let mut ofs_budget = None;
        let mut budget = None;
        let mut continuous_on = false;
        let mut thresholds = DEFAULT_THRESHOLDS;
        let mut warmup = DEFAULT_WARMUP;
        let mut selection = "exp3".to_string();
        let mut eta = 0.01;
        let mut prior = "uniform".to_string();
        let mut lambda = 1.0;
        let mut kappa = 10.0;
        let mut seeds = vec![0];
        let mut parallelism = 1;
        let mut output_dir = PathBuf::from("results");
        let mut metric = None;
        let mut length_set = false;

        for (key, value) in raw {
            let k = key.as_str();
            let v = value.as_str();
            match k {
                "stream.source" => stream.source = v.parse()?,
                "stream.length" => {
                    stream.length = parse_value(k, v)?;
                    length_set = true;
                }
                "stream.drift" => stream.drift_points = parse_list(k, v)?,
                "stream.test_size" => stream.test_size = parse_value(k, v)?,
                "stream.irrelevant" => stream.irrelevant = parse_value(k, v)?,
                "stream.noise" => stream.noise = parse_value(k, v)?,
                "stream.features" => stream.features = parse_value(k, v)?,
                "stream.classes" => stream.classes = parse_value(k, v)?,
                "stream.theta_low" => stream.theta_low = parse_value(k, v)?,
                "stream.theta_high" => stream.theta_high = parse_value(k, v)?,
                "stream.separation" => stream.separation = parse_value(k, v)?,
                "stream.path" => stream.path = Some(PathBuf::from(v)),
                "stream.schema" => {
                    stream.schema = v.parse().map_err(|e: Error| Error::Config(format!("stream.schema: {e}")))?
                }
                "stream.test_fraction" => stream.test_fraction = parse_value(k, v)?,
                "stream.costs" => stream.costs = Some(PathBuf::from(v)),
                "learner.criterion" => {
                    criterion = v.parse().map_err(|_| Error::Config(format!("learner.criterion: unknown criterion {v:?}")))?
                }
                "learner.hypotheses" => {
                    hypotheses = if v.eq_ignore_ascii_case("all") {
                        HypothesisMode::Enumerate
                    } else {
                        HypothesisMode::Sample(parse_value(k, v)?)
                    }
                }
                "learner.drift" => drift_on = parse_bool(k, v)?,
                "learner.drift.gamma" => drift.gamma = parse_value(k, v)?,
                "learner.drift.alpha_bar" => drift.alpha_bar = parse_value(k, v)?,
                "learner.drift.beta_bar" => drift.beta_bar = parse_value(k, v)?,
                "learner.ofs" => ofs_on = parse_bool(k, v)?,
                "learner.ofs.epsilon" => ofs.epsilon = parse_value(k, v)?,
                "learner.ofs.budget" => ofs_budget = Some(parse_value(k, v)?),
                "learner.ofs.learning_rate" => ofs.learning_rate = parse_value(k, v)?,
                "learner.budget" => budget = Some(parse_value(k, v)?),
                "learner.continuous" => continuous_on = parse_bool(k, v)?,
                "learner.continuous.thresholds" => thresholds = parse_value(k, v)?,
                "learner.continuous.warmup" => warmup = parse_value(k, v)?,
                "learner.continuous.selection" => selection = v.to_ascii_lowercase(),
                "learner.continuous.eta" => eta = parse_value(k, v)?,
                "learner.prior" => prior = v.to_ascii_lowercase(),
                "learner.prior.lambda" => lambda = parse_value(k, v)?,
                "learner.prior.kappa" => kappa = parse_value(k, v)?,
                "run.seeds" => seeds = parse_seeds(v)?,
                "run.parallelism" => parallelism = parse_value(k, v)?,
                "output.dir" => output_dir = PathBuf::from(v),
                "eval.metric" => metric = parse_metric(v)?,
                _ => return Err(Error::Config(format!("{k}: unknown key"))),
            }
        }

        if stream.source == SourceKind::File && !length_set {
            stream.length = 0;
        }
        if ofs_on {
            ofs.budget = ofs_budget.ok_or_else(|| Error::Config("learner.ofs.budget: required when learner.ofs is on".into()))?;
        }
        let selection = match selection.as_str() {
            "exp3" => ThresholdSelection::Exp3 { eta },
            "exhaustive" => ThresholdSelection::Exhaustive,
            other => return Err(Error::Config(format!("learner.continuous.selection: unknown selection {other:?}"))),
        };
        let prior = match prior.as_str() {
            "uniform" => PriorSpec::Uniform,
            "oracle" => PriorSpec::Oracle { lambda, kappa },
            other => return Err(Error::Config(format!("learner.prior: unknown prior {other:?}"))),
        };
        let config = Self {
            stream,
            learner: LearnerSpec {
                criterion,
                hypotheses,
                drift: drift_on.then_some(drift),
                ofs: ofs_on.then_some(ofs),
                budget,
                continuous: continuous_on.then_some(ContinuousSettings {
                    thresholds,
                    warmup,
                    selection,
                }),
                prior,
            },
            seeds,
            parallelism,
            output_dir,
            metric,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut raw = read_config(path)?;
        apply_overrides(&mut raw, overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        Self::from_raw(&raw)
    }

    /// Range and consistency checks; each error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let s = &self.stream;
        let l = &self.learner;
        let fail = |key: &str, msg: &str| Err(Error::Config(format!("{key}: {msg}")));
        if self.seeds.is_empty() {
            return fail("run.seeds", "at least one seed is required");
        }
        if self.parallelism == 0 {
            return fail("run.parallelism", "must be at least 1");
        }
        if let HypothesisMode::Sample(0) = l.hypotheses {
            return fail("learner.hypotheses", "must be at least 1");
        }
        if s.drift_points.windows(2).any(|w| w[0] >= w[1]) {
            return fail("stream.drift", "drift points must be strictly increasing");
        }
        if s.source != SourceKind::File && s.drift_points.iter().any(|&d| d >= s.length) {
            return fail("stream.drift", "drift point beyond the stream length");
        }
        if !s.drift_points.is_empty() && s.source != SourceKind::Stagger {
            return fail("stream.drift", "only the stagger source supports drift points");
        }
        if s.source != SourceKind::File && s.test_size == 0 {
            return fail("stream.test_size", "must be at least 1");
        }
        if !(0.0..=0.5).contains(&s.noise) {
            return fail("stream.noise", "must lie in [0, 0.5]");
        }
        if !(0.0 <= s.theta_low && s.theta_low <= s.theta_high && s.theta_high <= 1.0) {
            return fail("stream.theta_low", "need 0 <= theta_low <= theta_high <= 1");
        }
        if matches!(s.source, SourceKind::Synthetic | SourceKind::Gaussian) && (s.features == 0 || s.classes < 2) {
            return fail("stream.features", "need at least one feature and two classes");
        }
        if !(0.0..1.0).contains(&s.test_fraction) {
            return fail("stream.test_fraction", "must lie in [0, 1)");
        }
        if s.source == SourceKind::File {
            match &s.path {
                None => return fail("stream.path", "required for the file source"),
                Some(p) if !p.is_file() => return fail("stream.path", &format!("{} does not exist", p.display())),
                _ => {}
            }
        }
        if let Some(c) = &s.costs {
            if s.source != SourceKind::File {
                return fail("stream.costs", "cost files apply to the file source only");
            }
            if !c.is_file() {
                return fail("stream.costs", &format!("{} does not exist", c.display()));
            }
        }
        if let Some(d) = &l.drift {
            if !(0.0..=1.0).contains(&d.gamma) {
                return fail("learner.drift.gamma", "must lie in [0, 1]");
            }
            if !(d.alpha_bar > 0.0 && d.beta_bar > 0.0) {
                return fail("learner.drift.alpha_bar", "injected parameters must be positive");
            }
        }
        if let Some(o) = &l.ofs {
            if !(0.0..=1.0).contains(&o.epsilon) {
                return fail("learner.ofs.epsilon", "must lie in [0, 1]");
            }
            if o.budget == 0 {
                return fail("learner.ofs.budget", "must be at least 1");
            }
            if !(o.learning_rate > 0.0) {
                return fail("learner.ofs.learning_rate", "must be positive");
            }
        }
        if let Some(b) = l.budget {
            if !(b >= 0.0) {
                return fail("learner.budget", "must be nonnegative");
            }
        }
        if let Some(c) = &l.continuous {
            if c.thresholds == 0 {
                return fail("learner.continuous.thresholds", "must be at least 1");
            }
            if c.warmup == 0 {
                return fail("learner.continuous.warmup", "must be at least 1");
            }
            if let ThresholdSelection::Exp3 { eta } = c.selection {
                if !(eta > 0.0) {
                    return fail("learner.continuous.eta", "must be positive");
                }
            }
        } else if s.source == SourceKind::Gaussian {
            return fail("learner.continuous", "the gaussian source needs continuous mode");
        }
        if let PriorSpec::Oracle { lambda, kappa } = l.prior {
            if !(0.0..=1.0).contains(&lambda) {
                return fail("learner.prior.lambda", "must lie in [0, 1]");
            }
            if !(kappa > 0.0) {
                return fail("learner.prior.kappa", "must be positive");
            }
            if matches!(s.source, SourceKind::Gaussian) || l.continuous.is_some() {
                return fail("learner.prior", "oracle priors need a binary source");
            }
        }
        Ok(())
    }
}

/// One replicate's training stream, test sets and costs.
pub struct Replicate {
    pub layout: FeatureLayout,
    pub train: Vec<DataPoint>,
    /// Test sets; `test_index(t)` picks the one that applies at epoch `t`.
    pub tests: Vec<Vec<DataPoint>>,
    pub drift_points: Vec<usize>,
    pub costs: Option<CostModel>,
    pub theta_star: Option<ThetaTable>,
}

impl Replicate {
    pub fn test_index(&self, t: usize) -> usize {
        if self.tests.len() > 1 {
            stagger_concept_at(t, &self.drift_points)
        } else {
            0
        }
    }
}

/// Clamps a table into `[eps, 1 - eps]` so it can centre a Beta prior.
fn smoothed(theta: &ThetaTable, eps: f64) -> Result<ThetaTable> {
    let rows = (0..theta.n())
        .map(|i| theta.row(i).iter().map(|t| t.clamp(eps, 1.0 - eps)).collect())
        .collect();
    ThetaTable::new(rows, theta.class_prior().to_vec())
}

/// Loads file-backed data once for all replicates.
pub fn load_source(spec: &StreamSpec) -> Result<Option<(Dataset, Option<CostModel>)>> {
    if spec.source != SourceKind::File {
        return Ok(None);
    }
    let path = spec.path.as_deref().ok_or_else(|| Error::Config("stream.path: required".into()))?;
    let data = load_dataset(path, &spec.schema)?;
    let costs = spec.costs.as_deref().map(|c| load_costs(c, data.layout.n())).transpose()?;
    Ok(Some((data, costs)))
}

pub fn build_replicate(spec: &StreamSpec, seed: u64, file: Option<&(Dataset, Option<CostModel>)>) -> Result<Replicate> {
    let mut data_rng = stream_rng(seed, Stream::Data);
    let mut split_rng = stream_rng(seed, Stream::Split);
    let single = |layout, train, test, theta_star| Replicate {
        layout,
        train,
        tests: vec![test],
        drift_points: Vec::new(),
        costs: None,
        theta_star,
    };
    Ok(match spec.source {
        SourceKind::Stagger => {
            let train = stagger_stream(spec.length, &spec.drift_points, &mut data_rng)?;
            let tests = (0..3)
                .map(|c| (0..spec.test_size).map(|_| StaggerObject::random(&mut split_rng).point(c)).collect())
                .collect();
            Replicate {
                layout: stagger_layout(),
                train,
                tests,
                drift_points: spec.drift_points.clone(),
                costs: None,
                theta_star: Some(stagger_theta_star(0)),
            }
        }
        SourceKind::Led => {
            let train = led_stream(spec.length, spec.irrelevant, spec.noise, &mut data_rng);
            let test = led_stream(spec.test_size, spec.irrelevant, spec.noise, &mut split_rng);
            let mut layout = FeatureLayout::binary(7 + spec.irrelevant, 10);
            layout.classes = (0..10).map(|d| d.to_string()).collect();
            single(layout, train, test, Some(led_theta_star(spec.irrelevant, spec.noise)))
        }
        SourceKind::Synthetic => {
            let theta = random_theta(spec.features, spec.classes, spec.theta_low, spec.theta_high, &mut data_rng);
            let train = sample_from_theta(&theta, spec.length, &mut data_rng);
            let test = sample_from_theta(&theta, spec.test_size, &mut split_rng);
            single(FeatureLayout::binary(spec.features, spec.classes), train, test, Some(theta))
        }
        SourceKind::Gaussian => {
            let means_rng = data_rng.clone();
            let train = gaussian_stream(
                spec.features,
                spec.classes,
                spec.length,
                spec.separation,
                &mut means_rng.clone(),
                &mut data_rng,
            );
            let test = gaussian_stream(
                spec.features,
                spec.classes,
                spec.test_size,
                spec.separation,
                &mut means_rng.clone(),
                &mut split_rng,
            );
            single(continuous_layout(spec.features, spec.classes), train, test, None)
        }
        SourceKind::File => {
            let (data, costs) = file.ok_or_else(|| Error::Config("stream.path: dataset not loaded".into()))?;
            let (mut train, test) = split_dataset(data.points.clone(), spec.test_fraction, &mut split_rng)?;
            if test.is_empty() {
                return Err(Error::Config("stream.test_fraction: leaves an empty test set".into()));
            }
            if spec.length > 0 && spec.length < train.len() {
                train.truncate(spec.length);
            }
            let theta_star = if data.layout.is_binary() {
                Some(empirical_theta(&train, data.layout.n(), data.layout.m())?)
            } else {
                None
            };
            let mut r = single(data.layout.clone(), train, test, theta_star);
            r.costs = costs.clone();
            r
        }
    })
}

/// Initial model for a replicate.
pub fn initial_model(learner: &LearnerSpec, replicate: &Replicate) -> Result<Model> {
    let (n, m) = (replicate.layout.n(), replicate.layout.m());
    if let Some(c) = &learner.continuous {
        let warmup = &replicate.train[..c.warmup.min(replicate.train.len())];
        if warmup.is_empty() {
            return Err(Error::Data("continuous mode needs at least one warmup point".into()));
        }
        let grid = grid_for_layout(&replicate.layout, warmup, c.thresholds)?;
        return Ok(Model::Latent(LatentModel::new(grid, m, c.selection)?));
    }
    if !replicate.layout.is_binary() {
        return Err(Error::Config(
            "learner.continuous: the stream has real-valued features; enable continuous mode".into(),
        ));
    }
    let belief = match learner.prior {
        PriorSpec::Uniform => BeliefState::uniform(n, m),
        PriorSpec::Oracle { lambda, kappa } => {
            let star = replicate
                .theta_star
                .as_ref()
                .ok_or_else(|| Error::Config("learner.prior: source has no reference table".into()))?;
            interpolate_prior(&smoothed(star, 0.01)?, lambda, kappa)?
        }
    };
    Ok(Model::Binary(belief))
}

pub fn learner_config(learner: &LearnerSpec, seed: u64, costs: Option<CostModel>) -> LearnerConfig {
    let mut config = LearnerConfig::new(learner.criterion, learner.hypotheses, seed);
    config.drift = learner.drift;
    config.feature_selection = learner.ofs;
    config.budget = learner.budget;
    config.costs = costs;
    config
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub seed: u64,
    pub t: usize,
    pub cost: f64,
    pub correct: bool,
    pub train_utility: f64,
    pub test_utility: f64,
    pub stop_reason: StopReason,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub records: Vec<ResultRecord>,
    pub epochs: Vec<EpochRecord>,
    pub model: Option<Model>,
    pub error: Option<String>,
}

impl ReplicateOutcome {
    pub fn total_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost).sum()
    }

    pub fn final_test_utility(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_utility)
    }
}

fn test_metric(forced: Option<UtilityMetric>, test: &[DataPoint], m: usize) -> UtilityMetric {
    forced.unwrap_or_else(|| choose_metric(test.iter().map(|p| p.label), m))
}

/// Trains one seed, evaluating on the applicable test set after every epoch.
/// A mid-stream failure keeps the records produced so far.
pub fn run_replicate(config: &ExperimentConfig, seed: u64, file: Option<&(Dataset, Option<CostModel>)>) -> ReplicateOutcome {
    let mut outcome = ReplicateOutcome {
        seed,
        records: Vec::new(),
        epochs: Vec::new(),
        model: None,
        error: None,
    };
    let prepared = build_replicate(&config.stream, seed, file).and_then(|r| {
        let model = initial_model(&config.learner, &r)?;
        let learner = OnlineLearner::new(&learner_config(&config.learner, seed, r.costs.clone()), model)?;
        Ok((r, learner))
    });
    let (replicate, mut learner) = match prepared {
        Ok(v) => v,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    let m = replicate.layout.m();
    let metrics_for: Vec<UtilityMetric> = replicate.tests.iter().map(|t| test_metric(config.metric, t, m)).collect();
    let mut metrics = Metrics::new(m);
    for point in &replicate.train {
        let epoch = match learner.step(point) {
            Ok(e) => e,
            Err(e) => {
                outcome.error = Some(e.to_string());
                break;
            }
        };
        let train_utility = metrics.update(epoch.t, epoch.cost, epoch.truth, epoch.prediction);
        let k = replicate.test_index(epoch.t);
        let test_utility = evaluate_predictor(learner.model(), &replicate.tests[k], m, metrics_for[k]);
        metrics.record_test(epoch.t, test_utility);
        outcome.records.push(ResultRecord {
            seed,
            t: epoch.t,
            cost: epoch.cost,
            correct: epoch.prediction == epoch.truth,
            train_utility,
            test_utility,
            stop_reason: epoch.stop_reason,
            queries: epoch.queries,
        });
        outcome.epochs.push(epoch);
    }
    outcome.model = Some(learner.into_model());
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error (sample standard deviation over `sqrt(k)`).
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let k = values.len();
    if k == 0 {
        return MeanStderr { mean: 0.0, stderr: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let stderr = if k > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    MeanStderr { mean, stderr }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub epochs: usize,
    pub total_cost: f64,
    pub final_test_utility: Option<f64>,
    pub mean_distinct_hypotheses: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seeds: usize,
    pub records: usize,
    pub cost_sum: f64,
    pub total_cost: MeanStderr,
    pub final_test_utility: MeanStderr,
    pub mean_distinct_hypotheses: f64,
    pub per_seed: Vec<SeedSummary>,
}

pub fn summarize(outcomes: &[ReplicateOutcome]) -> Summary {
    let per_seed: Vec<SeedSummary> = outcomes
        .iter()
        .map(|o| SeedSummary {
            seed: o.seed,
            epochs: o.records.len(),
            total_cost: o.total_cost(),
            final_test_utility: o.final_test_utility(),
            mean_distinct_hypotheses: if o.epochs.is_empty() {
                0.0
            } else {
                o.epochs.iter().map(|e| e.distinct_hypotheses as f64).sum::<f64>() / o.epochs.len() as f64
            },
            error: o.error.clone(),
        })
        .collect();
    let with_records: Vec<&SeedSummary> = per_seed.iter().filter(|s| s.epochs > 0).collect();
    let costs: Vec<f64> = with_records.iter().map(|s| s.total_cost).collect();
    let utilities: Vec<f64> = with_records.iter().filter_map(|s| s.final_test_utility).collect();
    let hyp: Vec<f64> = with_records.iter().map(|s| s.mean_distinct_hypotheses).collect();
    Summary {
        seeds: with_records.len(),
        records: outcomes.iter().map(|o| o.records.len()).sum(),
        cost_sum: outcomes.iter().flat_map(|o| &o.records).map(|r| r.cost).sum(),
        total_cost: mean_stderr(&costs),
        final_test_utility: mean_stderr(&utilities),
        mean_distinct_hypotheses: mean_stderr(&hyp).mean,
        per_seed,
    }
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MODELS_DIR: &str = "models";

/// Writes `records.jsonl` (one object per line) and `summary.json` under `dir`.
pub fn emit_results(records: &[ResultRecord], summary: &Summary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RECORDS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_models(outcomes: &[ReplicateOutcome], dir: &Path) -> Result<()> {
    let models = dir.join(MODELS_DIR);
    fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
    for o in outcomes {
        if let Some(model) = &o.model {
            let path = models.join(format!("seed_{}.json", o.seed));
            let mut text = serde_json::to_string(model)?;
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Runs every seed (up to `parallelism` at once) and collects outcomes in seed order.
pub fn run_replicates(config: &ExperimentConfig) -> Result<Vec<ReplicateOutcome>> {
    config.validate()?;
    let file = load_source(&config.stream)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("run.parallelism: {e}")))?;
    Ok(pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_replicate(config, seed, file.as_ref()))
            .collect()
    }))
}

/// Runs the experiment and writes its result files. Partial results are
/// written before a replicate failure is reported.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    let outcomes = run_replicates(config)?;
    let records: Vec<ResultRecord> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    let summary = summarize(&outcomes);
    emit_results(&records, &summary, &config.output_dir)?;
    write_models(&outcomes, &config.output_dir)?;
    if let Some(o) = outcomes.iter().find(|o| o.error.is_some()) {
        return Err(Error::Data(format!("seed {}: {}", o.seed, o.error.as_deref().unwrap_or_default())));
    }
    Ok(summary)
}
