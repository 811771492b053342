//! Datasets, synthetic streams and evaluation metrics.

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::{argmax, BeliefState, ThetaTable};
use crate::acquisition::CostModel;
use crate::error::{Error, Result};

/// A stream element. Binary features hold 0.0 / 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: usize,
}

impl DataPoint {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }

    pub fn bits(&self) -> Vec<bool> {
        self.features.iter().map(|&v| v != 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Binary,
    Categorical,
    Continuous,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(ColumnKind::Binary),
            "categorical" | "nominal" => Ok(ColumnKind::Categorical),
            "continuous" | "real" => Ok(ColumnKind::Continuous),
            other => Err(Error::Config(format!("unknown schema type {other:?}"))),
        }
    }
}

/// Column typing for [`load_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    /// Binary if every value is 0/1, continuous if numeric, else categorical.
    Auto,
    All(ColumnKind),
    PerColumn(Vec<ColumnKind>),
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Schema::Auto);
        }
        let kinds = s.split(',').map(ColumnKind::from_str).collect::<Result<Vec<_>>>()?;
        Ok(if kinds.len() == 1 {
            Schema::All(kinds[0])
        } else {
            Schema::PerColumn(kinds)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
    pub source_column: usize,
}

/// Encoded feature list and class names, in dense index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub features: Vec<FeatureInfo>,
    pub classes: Vec<String>,
}

impl FeatureLayout {
    pub fn binary(n: usize, m: usize) -> Self {
        Self {
            features: (0..n)
                .map(|i| FeatureInfo {
                    name: format!("x{i}"),
                    kind: FeatureKind::Binary,
                    source_column: i,
                })
                .collect(),
            classes: (0..m).map(|j| j.to_string()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn m(&self) -> usize {
        self.classes.len()
    }

    pub fn is_binary(&self) -> bool {
        self.features.iter().all(|f| f.kind == FeatureKind::Binary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    pub layout: FeatureLayout,
}

impl Dataset {
    /// Checks every point against the layout.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.layout.n(), self.layout.m());
        for (t, p) in self.points.iter().enumerate() {
            if p.features.len() != n {
                return Err(Error::Data(format!("point {t} has {} features, expected {n}", p.features.len())));
            }
            if p.label >= m {
                return Err(Error::Data(format!("point {t} has label {} >= {m}", p.label)));
            }
        }
        Ok(())
    }
}

fn parse_binary(cell: &str) -> Option<f64> {
    match cell {
        "0" | "false" | "False" | "FALSE" => Some(0.0),
        "1" | "true" | "True" | "TRUE" => Some(1.0),
        _ => cell.parse::<f64>().ok().filter(|v| *v == 0.0 || *v == 1.0),
    }
}

fn infer_kind(cells: &[&str]) -> ColumnKind {
    if cells.iter().all(|c| parse_binary(c).is_some()) {
        ColumnKind::Binary
    } else if cells.iter().all(|c| c.parse::<f64>().is_ok()) {
        ColumnKind::Continuous
    } else {
        ColumnKind::Categorical
    }
}

/// Reads a comma-separated file with a header row; the last column is the label.
///
/// Binary columns pass through, categorical columns expand to one indicator
/// per value (first-appearance order), continuous columns stay real-valued.
/// Class labels get dense indices in first-appearance order.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(Error::Data(format!("{}: need at least one feature and a label column", path.display())));
    }
    let n_cols = headers.len() - 1;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Load {
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        let row: Vec<String> = record.iter().map(str::to_string).collect();
        for (c, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Load {
                    row: r + 1,
                    column: headers[c].clone(),
                    message: "empty cell".into(),
                });
            }
        }
        rows.push(row);
    }

    let kinds: Vec<ColumnKind> = match schema {
        Schema::All(kind) => vec![*kind; n_cols],
        Schema::PerColumn(kinds) => {
            if kinds.len() != n_cols {
                return Err(Error::Config(format!(
                    "schema lists {} columns, file has {n_cols} feature columns",
                    kinds.len()
                )));
            }
            kinds.clone()
        }
        Schema::Auto => (0..n_cols)
            .map(|c| infer_kind(&rows.iter().map(|r| r[c].as_str()).collect::<Vec<_>>()))
            .collect(),
    };

    let mut categories: Vec<Vec<String>> = vec![Vec::new(); n_cols];
    for (c, kind) in kinds.iter().enumerate() {
        if *kind == ColumnKind::Categorical {
            for row in &rows {
                if !categories[c].contains(&row[c]) {
                    categories[c].push(row[c].clone());
                }
            }
        }
    }

    let mut features = Vec::new();
    for (c, kind) in kinds.iter().enumerate() {
        match kind {
            ColumnKind::Binary => features.push(FeatureInfo {
                name: headers[c].clone(),
                kind: FeatureKind::Binary,
                source_column: c,
            }),
            ColumnKind::Continuous => features.push(FeatureInfo {
                name: headers[c].clone(),
                kind: FeatureKind::Continuous,
                source_column: c,
            }),
            ColumnKind::Categorical => features.extend(categories[c].iter().map(|v| FeatureInfo {
                name: format!("{}={v}", headers[c]),
                kind: FeatureKind::Binary,
                source_column: c,
            })),
        }
    }

    let mut classes: Vec<String> = Vec::new();
    let mut points = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let mut values = Vec::with_capacity(features.len());
        for (c, kind) in kinds.iter().enumerate() {
            let cell = row[c].as_str();
            let bad = |what: &str| Error::Load {
                row: r + 1,
                column: headers[c].clone(),
                message: format!("cannot parse {cell:?} as {what}"),
            };
            match kind {
                ColumnKind::Binary => values.push(parse_binary(cell).ok_or_else(|| bad("binary"))?),
                ColumnKind::Continuous => values.push(cell.parse::<f64>().map_err(|_| bad("a real number"))?),
                ColumnKind::Categorical => {
                    values.extend(categories[c].iter().map(|v| (v == cell) as u8 as f64));
                }
            }
        }
        let label_cell = &row[n_cols];
        let label = match classes.iter().position(|c| c == label_cell) {
            Some(j) => j,
            None => {
                classes.push(label_cell.clone());
                classes.len() - 1
            }
        };
        points.push(DataPoint::new(values, label));
    }
    Ok(Dataset {
        points,
        layout: FeatureLayout { features, classes },
    })
}

/// One positive real per non-blank line, `n` lines expected.
pub fn load_costs(path: &Path, n: usize) -> Result<CostModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let costs = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::Load { row: k + 1, column: "cost".into(), message: format!("cannot parse {l:?}") })
        })
        .collect::<Result<Vec<_>>>()?;
    if costs.len() != n {
        return Err(Error::Dimension(format!("cost file has {} entries, dataset has {n} features", costs.len())));
    }
    CostModel::new(costs)
}

/// Shuffles and holds out `test_fraction` of the points.
pub fn split_dataset<R: Rng + ?Sized>(
    mut points: Vec<DataPoint>,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<DataPoint>, Vec<DataPoint>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    points.shuffle(rng);
    let n_test = (points.len() as f64 * test_fraction).round() as usize;
    let train = points.split_off(n_test);
    Ok((train, points))
}

// ---------------------------------------------------------------------------
// Stagger

pub const STAGGER_SIZES: [&str; 3] = ["small", "medium", "large"];
pub const STAGGER_COLORS: [&str; 3] = ["red", "green", "blue"];
pub const STAGGER_SHAPES: [&str; 3] = ["circle", "triangle", "rectangle"];

/// Nominal Stagger attributes, each an index into the arrays above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaggerObject {
    pub size: usize,
    pub color: usize,
    pub shape: usize,
}

impl StaggerObject {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            size: rng.random_range(0..3),
            color: rng.random_range(0..3),
            shape: rng.random_range(0..3),
        }
    }

    /// Concept 0: small and red. Concept 1: green or circle. Concept 2: medium or large.
    pub fn label(&self, concept: usize) -> bool {
        match concept % 3 {
            0 => self.size == 0 && self.color == 0,
            1 => self.color == 1 || self.shape == 0,
            _ => self.size == 1 || self.size == 2,
        }
    }

    /// Nine indicators: sizes, then colors, then shapes.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; 9];
        v[self.size] = 1.0;
        v[3 + self.color] = 1.0;
        v[6 + self.shape] = 1.0;
        v
    }

    pub fn point(&self, concept: usize) -> DataPoint {
        DataPoint::new(self.one_hot(), self.label(concept) as usize)
    }
}

pub fn stagger_layout() -> FeatureLayout {
    let features = [("size", &STAGGER_SIZES), ("color", &STAGGER_COLORS), ("shape", &STAGGER_SHAPES)]
        .iter()
        .enumerate()
        .flat_map(|(c, (name, values))| {
            values.iter().map(move |v| FeatureInfo {
                name: format!("{name}={v}"),
                kind: FeatureKind::Binary,
                source_column: c,
            })
        })
        .collect();
    FeatureLayout {
        features,
        classes: vec!["negative".into(), "positive".into()],
    }
}

/// Index of the concept active at epoch `t`: the number of drift points at or before `t`.
pub fn stagger_concept_at(t: usize, drift_points: &[usize]) -> usize {
    drift_points.iter().filter(|&&d| d <= t).count() % 3
}

/// `T` uniform objects labelled by the concept active at each epoch.
pub fn stagger_stream<R: Rng + ?Sized>(length: usize, drift_points: &[usize], rng: &mut R) -> Result<Vec<DataPoint>> {
    if drift_points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("drift points must be strictly increasing".into()));
    }
    if let Some(&d) = drift_points.iter().find(|&&d| d >= length.max(1)) {
        return Err(Error::InvalidParameter(format!("drift point {d} outside [0, {length})")));
    }
    Ok((0..length)
        .map(|t| StaggerObject::random(rng).point(stagger_concept_at(t, drift_points)))
        .collect())
}

/// Exact class-conditional table of one concept, by enumerating the 27 objects.
pub fn stagger_theta_star(concept: usize) -> ThetaTable {
    let mut ones = [[0.0f64; 2]; 9];
    let mut totals = [0.0f64; 2];
    for size in 0..3 {
        for color in 0..3 {
            for shape in 0..3 {
                let obj = StaggerObject { size, color, shape };
                let y = obj.label(concept) as usize;
                totals[y] += 1.0;
                for (i, v) in obj.one_hot().iter().enumerate() {
                    ones[i][y] += v;
                }
            }
        }
    }
    let theta = ones
        .iter()
        .map(|o| (0..2).map(|y| o[y] / totals[y]).collect())
        .collect();
    let prior = totals.iter().map(|t| t / 27.0).collect();
    ThetaTable::new(theta, prior).expect("enumerated table is valid")
}

// ---------------------------------------------------------------------------
// Other generators

/// Seven-segment patterns for digits 0-9 (top, upper-left, upper-right,
/// middle, lower-left, lower-right, bottom).
pub const LED_SEGMENTS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1, 0],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

/// LED display digits: 7 segments each flipped with probability `noise`,
/// followed by `irrelevant` fair coin features.
pub fn led_stream<R: Rng + ?Sized>(length: usize, irrelevant: usize, noise: f64, rng: &mut R) -> Vec<DataPoint> {
    (0..length)
        .map(|_| {
            let digit = rng.random_range(0..10);
            let mut features: Vec<f64> = LED_SEGMENTS[digit]
                .iter()
                .map(|&s| ((s == 1) ^ (rng.random::<f64>() < noise)) as u8 as f64)
                .collect();
            features.extend((0..irrelevant).map(|_| rng.random_bool(0.5) as u8 as f64));
            DataPoint::new(features, digit)
        })
        .collect()
}

/// The exact class-conditional table of [`led_stream`].
pub fn led_theta_star(irrelevant: usize, noise: f64) -> ThetaTable {
    let mut theta: Vec<Vec<f64>> = (0..7)
        .map(|s| (0..10).map(|d| if LED_SEGMENTS[d][s] == 1 { 1.0 - noise } else { noise }).collect())
        .collect();
    theta.extend((0..irrelevant).map(|_| vec![0.5; 10]));
    ThetaTable::new(theta, vec![0.1; 10]).expect("LED table is valid")
}

/// Points drawn from a naive-Bayes model: label from the prior, bits from `theta`.
pub fn sample_from_theta<R: Rng + ?Sized>(theta: &ThetaTable, length: usize, rng: &mut R) -> Vec<DataPoint> {
    (0..length)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut label = theta.m() - 1;
            for (j, p) in theta.class_prior().iter().enumerate() {
                acc += p;
                if u < acc {
                    label = j;
                    break;
                }
            }
            let features = (0..theta.n())
                .map(|i| (rng.random::<f64>() < theta.get(i, label)) as u8 as f64)
                .collect();
            DataPoint::new(features, label)
        })
        .collect()
}

/// A random table with entries uniform in `[lo, hi]` and a uniform class prior.
pub fn random_theta<R: Rng + ?Sized>(n: usize, m: usize, lo: f64, hi: f64, rng: &mut R) -> ThetaTable {
    let theta = (0..n).map(|_| (0..m).map(|_| rng.random_range(lo..=hi)).collect()).collect();
    ThetaTable::new(theta, vec![1.0 / m as f64; m]).expect("random table is valid")
}

/// Real-valued features `x_i ~ N(mu_ij, 1)` with class means drawn once
/// (from `means_rng`) uniformly in `[0, separation]`.
pub fn gaussian_stream<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    length: usize,
    separation: f64,
    means_rng: &mut R,
    rng: &mut R,
) -> Vec<DataPoint> {
    let means: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| means_rng.random_range(0.0..=separation)).collect())
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    (0..length)
        .map(|_| {
            let label = rng.random_range(0..m);
            let features = means[label].iter().map(|mu| mu + unit.sample(rng)).collect();
            DataPoint::new(features, label)
        })
        .collect()
}

pub fn continuous_layout(n: usize, m: usize) -> FeatureLayout {
    let mut layout = FeatureLayout::binary(n, m);
    layout.features.iter_mut().for_each(|f| f.kind = FeatureKind::Continuous);
    layout
}

/// Smoothed empirical `P[X_i = 1 | Y_j]` and class frequencies from labelled binary points.
pub fn empirical_theta(points: &[DataPoint], n: usize, m: usize) -> Result<ThetaTable> {
    let mut ones = vec![vec![1.0; m]; n];
    let mut counts = vec![2.0; m];
    let mut class_counts = vec![1.0; m];
    for p in points {
        for (i, &v) in p.features.iter().enumerate().take(n) {
            ones[i][p.label] += (v != 0.0) as u8 as f64;
        }
        counts[p.label] += 1.0;
        class_counts[p.label] += 1.0;
    }
    let total: f64 = class_counts.iter().sum();
    let theta = ones.iter().map(|row| row.iter().zip(&counts).map(|(o, c)| o / c).collect()).collect();
    ThetaTable::new(theta, class_counts.iter().map(|c| c / total).collect())
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UtilityMetric {
    Accuracy,
    MacroF1,
}

impl FromStr for UtilityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(UtilityMetric::Accuracy),
            "f1" | "macro_f1" | "f-measure" => Ok(UtilityMetric::MacroF1),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Majority share above which a label set counts as imbalanced.
pub const IMBALANCE_THRESHOLD: f64 = 0.6;

/// F-measure for imbalanced label sets, accuracy otherwise.
pub fn choose_metric(labels: impl IntoIterator<Item = usize>, m: usize) -> UtilityMetric {
    let mut counts = vec![0usize; m.max(1)];
    let mut total = 0usize;
    for y in labels {
        if y < counts.len() {
            counts[y] += 1;
            total += 1;
        }
    }
    let majority = counts.iter().copied().max().unwrap_or(0);
    if total > 0 && majority as f64 / total as f64 > IMBALANCE_THRESHOLD {
        UtilityMetric::MacroF1
    } else {
        UtilityMetric::Accuracy
    }
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(m: usize) -> Self {
        Self { counts: vec![vec![0; m]; m] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let m = counts.len();
        if counts.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn record(&mut self, true_label: usize, predicted: usize) {
        self.counts[true_label][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.counts.len()).map(|j| self.counts[j][j]).sum::<u64>() as f64 / total as f64
    }

    /// `2PR / (P + R)` for one class, 0 when undefined.
    pub fn class_f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted: u64 = self.counts.iter().map(|r| r[class]).sum();
        let actual: u64 = self.counts[class].iter().sum();
        if tp == 0.0 || predicted == 0 || actual == 0 {
            return 0.0;
        }
        let (p, r) = (tp / predicted as f64, tp / actual as f64);
        2.0 * p * r / (p + r)
    }

    pub fn utility(&self, metric: UtilityMetric) -> f64 {
        match metric {
            UtilityMetric::Accuracy => self.accuracy(),
            UtilityMetric::MacroF1 => f_measure(self),
        }
    }
}

/// Macro-averaged F-measure.
pub fn f_measure(confusion: &Confusion) -> f64 {
    let m = confusion.counts.len();
    if m == 0 {
        return 0.0;
    }
    (0..m).map(|j| confusion.class_f1(j)).sum::<f64>() / m as f64
}

/// Anything that labels a full point without buying features.
pub trait Predictor {
    fn predict(&self, point: &DataPoint) -> usize;
}

/// Full-feature MAP naive Bayes under a fixed table.
pub struct NaiveBayesMap<'a>(pub &'a ThetaTable);

impl Predictor for NaiveBayesMap<'_> {
    fn predict(&self, point: &DataPoint) -> usize {
        let scores = self.0.class_log_scores(point.features.iter().map(|&v| v != 0.0).enumerate());
        if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
            return argmax(self.0.class_prior());
        }
        argmax(&scores)
    }
}

pub fn evaluate_predictor<P: Predictor + ?Sized>(
    predictor: &P,
    test_points: &[DataPoint],
    m: usize,
    metric: UtilityMetric,
) -> f64 {
    let mut confusion = Confusion::new(m);
    for p in test_points {
        confusion.record(p.label, predictor.predict(p));
    }
    confusion.utility(metric)
}

/// Test utility of the posterior-mean table, predicting from all features.
pub fn evaluate_test(belief: &BeliefState, test_points: &[DataPoint], metric: UtilityMetric) -> f64 {
    let theta = belief.posterior_mean();
    evaluate_predictor(&NaiveBayesMap(&theta), test_points, belief.m(), metric)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetric {
    pub t: usize,
    pub cost: f64,
    pub correct: bool,
    pub train_utility: f64,
}

/// Running per-epoch and cumulative statistics of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_epoch: Vec<EpochMetric>,
    pub test_curve: Vec<(usize, f64)>,
    pub cumulative_cost: f64,
    pub train_confusion: Confusion,
}

impl Metrics {
    pub fn new(m: usize) -> Self {
        Self {
            per_epoch: Vec::new(),
            test_curve: Vec::new(),
            cumulative_cost: 0.0,
            train_confusion: Confusion::new(m),
        }
    }

    /// Appends one epoch and returns its running train accuracy.
    pub fn update(&mut self, t: usize, cost: f64, true_label: usize, predicted: usize) -> f64 {
        self.cumulative_cost += cost;
        self.train_confusion.record(true_label, predicted);
        let train_utility = self.train_confusion.accuracy();
        self.per_epoch.push(EpochMetric {
            t,
            cost,
            correct: true_label == predicted,
            train_utility,
        });
        train_utility
    }

    pub fn record_test(&mut self, t: usize, utility: f64) {
        self.test_curve.push((t, utility));
    }

    pub fn accuracy(&self) -> f64 {
        self.train_confusion.accuracy()
    }

    pub fn macro_f(&self) -> f64 {
        f_measure(&self.train_confusion)
    }
}

/// Shorthand for folding one epoch into `metrics`.
pub fn update_metrics(metrics: &mut Metrics, t: usize, cost: f64, true_label: usize, predicted: usize) -> f64 {
    metrics.update(t, cost, true_label, predicted)
}
