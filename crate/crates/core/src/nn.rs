//! Multi-input feedforward classifier.
//!
//! Three subnetworks compress the character, word and paragraph feature
//! families to one logit per type. Their outputs, concatenated with the 27
//! global statistics, feed a primary network that ends in a softmax. The whole
//! graph is trained jointly with Adam, dropout after every hidden layer, and an
//! L2 penalty on the weight matrices.

use std::ops::Range;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{CHARS_RANGE, NUM_FEATURES, PARAGRAPH_RANGE, STATS_RANGE, WORDS_WITH_FLAG_RANGE};
use crate::types::{Prediction, SemanticType, NUM_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub chars_hidden: usize,
    pub words_hidden: usize,
    pub paragraph_hidden: usize,
    pub primary_hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 256,
            dropout: 0.3,
            weight_decay: 1e-4,
            patience: 5,
            seed: 0,
            chars_hidden: 300,
            words_hidden: 200,
            paragraph_hidden: 400,
            primary_hidden: 500,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.epochs > 0
            && self.batch_size > 0
            && self.patience > 0
            && self.weight_decay >= 0.0
            && [self.chars_hidden, self.words_hidden, self.paragraph_hidden, self.primary_hidden]
                .iter()
                .all(|&h| h > 0);
        if !positive {
            return Err(Error::InvalidArgument(format!("invalid training config {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Applies one `key=value` setting; used by config files and flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
        }
        match key.trim() {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "chars_hidden" => self.chars_hidden = parse(key, value)?,
            "words_hidden" => self.words_hidden = parse(key, value)?,
            "paragraph_hidden" => self.paragraph_hidden = parse(key, value)?,
            "primary_hidden" => self.primary_hidden = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown training key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }
}

/// Fully connected layer: `y = x W + b`, with `W` shaped (inputs, outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-limit..limit));
        Dense {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Stack of dense layers with ReLU (and dropout while training) between them;
/// the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    /// Per hidden layer: ReLU derivative times the inverted-dropout scale.
    gates: Vec<Array2<f64>>,
}

impl Mlp {
    fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
        }
    }

    fn zeros(sizes: &[usize]) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").weights.ncols()
    }

    fn infer(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            a.mapv_inplace(|v| v.max(0.0));
            a = layer.forward(a.view());
        }
        a
    }

    fn forward(&self, x: ArrayView2<'_, f64>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> (Array2<f64>, MlpCache) {
        let mut dropout = dropout;
        let last = self.layers.len() - 1;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            gates: Vec::with_capacity(last),
        };
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(a.view());
            cache.inputs.push(a);
            if i == last {
                return (z, cache);
            }
            let gate = match dropout.as_mut() {
                Some((p, rng)) if *p > 0.0 => {
                    let keep = 1.0 / (1.0 - *p);
                    z.mapv(|v| {
                        let kept = rng.random::<f64>() >= *p;
                        if v > 0.0 && kept {
                            keep
                        } else {
                            0.0
                        }
                    })
                }
                _ => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            };
            a = &z * &gate;
            cache.gates.push(gate);
        }
        unreachable!("loop returns at the last layer")
    }

    /// Backpropagates `d_out` and returns per-layer gradients plus the
    /// gradient with respect to the input.
    fn backward(&self, cache: &MlpCache, d_out: Array2<f64>) -> (Vec<DenseGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_out;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            grads.push(DenseGrad {
                weights: cache.inputs[i].t().dot(&d),
                bias: d.sum_axis(Axis(0)),
            });
            d = d.dot(&layer.weights.t());
            if i > 0 {
                d *= &cache.gates[i - 1];
            }
        }
        grads.reverse();
        (grads, d)
    }
}

/// Feature family used by the isolated ablation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Chars,
    Words,
    Paragraph,
    Stats,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 4] = [
        FeatureFamily::Words,
        FeatureFamily::Chars,
        FeatureFamily::Paragraph,
        FeatureFamily::Stats,
    ];

    /// Columns of the full feature vector the family reads. The word family
    /// includes the extraction flag.
    pub fn range(self) -> Range<usize> {
        match self {
            FeatureFamily::Chars => CHARS_RANGE,
            FeatureFamily::Words => WORDS_WITH_FLAG_RANGE,
            FeatureFamily::Paragraph => PARAGRAPH_RANGE,
            FeatureFamily::Stats => STATS_RANGE,
        }
    }

    pub fn width(self) -> usize {
        self.range().len()
    }

    fn hidden(self, config: &TrainingConfig) -> usize {
        match self {
            FeatureFamily::Chars => config.chars_hidden,
            FeatureFamily::Words => config.words_hidden,
            FeatureFamily::Paragraph => config.paragraph_hidden,
            FeatureFamily::Stats => config.primary_hidden,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Chars => "chars",
            FeatureFamily::Words => "words",
            FeatureFamily::Paragraph => "paragraph",
            FeatureFamily::Stats => "stats",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chars" => Ok(FeatureFamily::Chars),
            "words" => Ok(FeatureFamily::Words),
            "paragraph" => Ok(FeatureFamily::Paragraph),
            "stats" => Ok(FeatureFamily::Stats),
            _ => Err(Error::InvalidArgument(format!("unknown feature family `{s}`"))),
        }
    }
}

/// Anything trainable by [`fit`]: maps full feature rows to type logits.
pub trait Network: Clone {
    type Cache;
    fn forward(&self, x: ArrayView2<'_, f64>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> (Array2<f64>, Self::Cache);
    fn backward(&self, cache: &Self::Cache, d_logits: Array2<f64>) -> Vec<DenseGrad>;
    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;
    fn layers(&self) -> Vec<&Dense>;
    fn layers_mut(&mut self) -> Vec<&mut Dense>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SherlockModel {
    pub chars: Mlp,
    pub words: Mlp,
    pub paragraph: Mlp,
    pub primary: Mlp,
}

pub struct SherlockCache {
    chars: MlpCache,
    words: MlpCache,
    paragraph: MlpCache,
    primary: MlpCache,
}

fn subnet_sizes(input: usize, hidden: usize) -> [usize; 4] {
    [input, hidden, hidden, NUM_TYPES]
}

pub const PRIMARY_INPUT: usize = 3 * NUM_TYPES + STATS_RANGE.end - STATS_RANGE.start;

impl SherlockModel {
    pub fn new(config: &TrainingConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        SherlockModel {
            chars: Mlp::new(&subnet_sizes(CHARS_RANGE.len(), config.chars_hidden), &mut rng),
            words: Mlp::new(&subnet_sizes(WORDS_WITH_FLAG_RANGE.len(), config.words_hidden), &mut rng),
            paragraph: Mlp::new(&subnet_sizes(PARAGRAPH_RANGE.len(), config.paragraph_hidden), &mut rng),
            primary: Mlp::new(&subnet_sizes(PRIMARY_INPUT, config.primary_hidden), &mut rng),
        }
    }

    /// All weights and biases zero; predicts the uniform distribution.
    pub fn zeros(config: &TrainingConfig) -> Self {
        SherlockModel {
            chars: Mlp::zeros(&subnet_sizes(CHARS_RANGE.len(), config.chars_hidden)),
            words: Mlp::zeros(&subnet_sizes(WORDS_WITH_FLAG_RANGE.len(), config.words_hidden)),
            paragraph: Mlp::zeros(&subnet_sizes(PARAGRAPH_RANGE.len(), config.paragraph_hidden)),
            primary: Mlp::zeros(&subnet_sizes(PRIMARY_INPUT, config.primary_hidden)),
        }
    }

    pub fn subnets(&self) -> [(&'static str, &Mlp); 4] {
        [
            ("chars", &self.chars),
            ("words", &self.words),
            ("paragraph", &self.paragraph),
            ("primary", &self.primary),
        ]
    }

    pub fn predict_proba(&self, vector: &[f64]) -> Result<Vec<f64>> {
        check_input(vector)?;
        let x = ArrayView2::from_shape((1, NUM_FEATURES), vector).expect("length checked");
        Ok(softmax_rows(self.logits(x)).row(0).to_vec())
    }

    pub fn predict(&self, vector: &[f64], reject_below: Option<f64>) -> Result<Prediction> {
        Ok(decide(&self.predict_proba(vector)?, reject_below))
    }
}

impl Network for SherlockModel {
    type Cache = SherlockCache;

    fn forward(&self, x: ArrayView2<'_, f64>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> (Array2<f64>, SherlockCache) {
        let mut dropout = dropout;
        macro_rules! drop {
            () => {
                dropout.as_mut().map(|(p, r)| (*p, &mut **r))
            };
        }
        let (oc, chars) = self.chars.forward(x.slice(s![.., CHARS_RANGE]), drop!());
        let (ow, words) = self.words.forward(x.slice(s![.., WORDS_WITH_FLAG_RANGE]), drop!());
        let (op, paragraph) = self.paragraph.forward(x.slice(s![.., PARAGRAPH_RANGE]), drop!());
        let merged = concatenate(Axis(1), &[oc.view(), ow.view(), op.view(), x.slice(s![.., STATS_RANGE])])
            .expect("row counts agree");
        let (logits, primary) = self.primary.forward(merged.view(), drop!());
        (
            logits,
            SherlockCache {
                chars,
                words,
                paragraph,
                primary,
            },
        )
    }

    fn backward(&self, cache: &SherlockCache, d_logits: Array2<f64>) -> Vec<DenseGrad> {
        let (g_primary, d_merged) = self.primary.backward(&cache.primary, d_logits);
        let k = NUM_TYPES;
        let (g_chars, _) = self.chars.backward(&cache.chars, d_merged.slice(s![.., 0..k]).to_owned());
        let (g_words, _) = self.words.backward(&cache.words, d_merged.slice(s![.., k..2 * k]).to_owned());
        let (g_par, _) = self.paragraph.backward(&cache.paragraph, d_merged.slice(s![.., 2 * k..3 * k]).to_owned());
        g_chars.into_iter().chain(g_words).chain(g_par).chain(g_primary).collect()
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let oc = self.chars.infer(x.slice(s![.., CHARS_RANGE]));
        let ow = self.words.infer(x.slice(s![.., WORDS_WITH_FLAG_RANGE]));
        let op = self.paragraph.infer(x.slice(s![.., PARAGRAPH_RANGE]));
        let merged = concatenate(Axis(1), &[oc.view(), ow.view(), op.view(), x.slice(s![.., STATS_RANGE])])
            .expect("row counts agree");
        self.primary.infer(merged.view())
    }

    fn layers(&self) -> Vec<&Dense> {
        [&self.chars, &self.words, &self.paragraph, &self.primary]
            .into_iter()
            .flat_map(|m| m.layers.iter())
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        [&mut self.chars, &mut self.words, &mut self.paragraph, &mut self.primary]
            .into_iter()
            .flat_map(|m| m.layers.iter_mut())
            .collect()
    }
}

/// A single feature family trained on its own, with a softmax head on the
/// 78 outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedModel {
    pub family: FeatureFamily,
    pub net: Mlp,
}

impl IsolatedModel {
    pub fn new(family: FeatureFamily, config: &TrainingConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        IsolatedModel {
            family,
            net: Mlp::new(&subnet_sizes(family.width(), family.hidden(config)), &mut rng),
        }
    }

    pub fn predict_proba(&self, vector: &[f64]) -> Result<Vec<f64>> {
        check_input(vector)?;
        let x = ArrayView2::from_shape((1, NUM_FEATURES), vector).expect("length checked");
        Ok(softmax_rows(self.logits(x)).row(0).to_vec())
    }
}

impl Network for IsolatedModel {
    type Cache = MlpCache;

    fn forward(&self, x: ArrayView2<'_, f64>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> (Array2<f64>, MlpCache) {
        self.net.forward(x.slice(s![.., self.family.range()]), dropout)
    }

    fn backward(&self, cache: &MlpCache, d_logits: Array2<f64>) -> Vec<DenseGrad> {
        self.net.backward(cache, d_logits).0
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.net.infer(x.slice(s![.., self.family.range()]))
    }

    fn layers(&self) -> Vec<&Dense> {
        self.net.layers.iter().collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        self.net.layers.iter_mut().collect()
    }
}

fn check_input(vector: &[f64]) -> Result<()> {
    if vector.len() != NUM_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: NUM_FEATURES,
            found: vector.len(),
        });
    }
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("feature vector has non-finite values; impute first".into()));
    }
    Ok(())
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

/// Index of the largest value; the first index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Turns a probability row into a prediction, rejecting when the top
/// probability is below `reject_below`.
pub fn decide(probabilities: &[f64], reject_below: Option<f64>) -> Prediction {
    let best = argmax(probabilities);
    match reject_below {
        Some(threshold) if probabilities[best] < threshold => Prediction::Rejected,
        _ => Prediction::Type(SemanticType::from_index(best).expect("class index within vocabulary")),
    }
}

/// Mean cross-entropy over the batch plus `0.5 * weight_decay * sum(W^2)`.
pub fn loss_and_gradient<N: Network>(
    net: &N,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    weight_decay: f64,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (f64, Vec<DenseGrad>) {
    let (logits, cache) = net.forward(x, dropout);
    let probs = softmax_rows(logits);
    let n = labels.len() as f64;
    let mut ce = 0.0;
    let mut d = probs;
    for (mut row, &y) in d.axis_iter_mut(Axis(0)).zip(labels) {
        ce -= row[y].max(1e-300).ln();
        row[y] -= 1.0;
    }
    d /= n;
    let mut grads = net.backward(&cache, d);
    let mut penalty = 0.0;
    for (g, layer) in grads.iter_mut().zip(net.layers()) {
        penalty += layer.weights.iter().map(|w| w * w).sum::<f64>();
        g.weights.scaled_add(weight_decay, &layer.weights);
    }
    (ce / n + 0.5 * weight_decay * penalty, grads)
}

/// Loss without dropout, as used for validation and gradient checking.
pub fn batch_loss<N: Network>(net: &N, x: ArrayView2<'_, f64>, labels: &[usize], weight_decay: f64) -> f64 {
    let probs = softmax_rows(net.logits(x));
    let ce: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[(i, y)].max(1e-300).ln())
        .sum();
    let penalty: f64 = net
        .layers()
        .iter()
        .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
        .sum();
    ce / labels.len() as f64 + 0.5 * weight_decay * penalty
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

impl TrainingLog {
    /// One JSON object per epoch, newline separated.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("metrics serialize") + "\n")
            .collect()
    }
}

/// Labeled rows borrowed from a feature matrix.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
}

impl<'a> Dataset<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [usize]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.ncols() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                found: x.ncols(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= NUM_TYPES) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

struct Adam {
    m: Vec<DenseGrad>,
    v: Vec<DenseGrad>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(layers: &[&Dense]) -> Self {
        let zeros = |l: &&Dense| DenseGrad {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.raw_dim()),
        };
        Adam {
            m: layers.iter().map(zeros).collect(),
            v: layers.iter().map(zeros).collect(),
            t: 0,
        }
    }

    fn step(&mut self, layers: Vec<&mut Dense>, grads: &[DenseGrad], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (((layer, g), m), v) in layers.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

fn accuracy<N: Network>(net: &N, data: Dataset<'_>) -> f64 {
    let logits = net.logits(data.x);
    let correct = logits
        .axis_iter(Axis(0))
        .zip(data.y)
        .filter(|(row, &y)| argmax(row.as_slice().expect("standard layout")) == y)
        .count();
    correct as f64 / data.len().max(1) as f64
}

/// Mini-batch training with Adam and early stopping on validation loss. The
/// parameters from the best validation epoch are returned.
pub fn fit<N: Network>(mut net: N, train: Dataset<'_>, val: Dataset<'_>, config: &TrainingConfig) -> Result<(N, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::corpus::derive_seed(config.seed, 1));
    let mut adam = Adam::new(&net.layers());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best = (f64::INFINITY, net.clone());
    let mut since_best = 0;
    let (monitor_x, monitor_y) = if val.is_empty() { (train.x, train.y) } else { (val.x, val.y) };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = train.x.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train.y[i]).collect();
            let (loss, grads) = loss_and_gradient(&net, x.view(), &y, config.weight_decay, Some((config.dropout, &mut rng)));
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(net.layers_mut(), &grads, config.learning_rate);
        }
        let val_loss = batch_loss(&net, monitor_x, monitor_y, config.weight_decay);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        log.epochs.push(EpochMetrics {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
            val_accuracy: accuracy(&net, Dataset { x: monitor_x, y: monitor_y }),
        });
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok((best.1, log))
}

pub fn train_sherlock(train: Dataset<'_>, val: Dataset<'_>, config: &TrainingConfig) -> Result<(SherlockModel, TrainingLog)> {
    fit(SherlockModel::new(config), train, val, config)
}

pub fn train_subnet_isolated(
    family: FeatureFamily,
    train: Dataset<'_>,
    val: Dataset<'_>,
    config: &TrainingConfig,
) -> Result<(IsolatedModel, TrainingLog)> {
    fit(IsolatedModel::new(family, config), train, val, config)
}

/// Class probabilities for every row of a matrix.
pub fn predict_proba_matrix<N: Network>(net: &N, x: ArrayView2<'_, f64>) -> Array2<f64> {
    softmax_rows(net.logits(x))
}

/// Sum of squared weights (biases excluded).
pub fn weight_norm_sq<N: Network>(net: &N) -> f64 {
    net.layers().iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter, with dropout disabled.
///
/// The relative error of one parameter is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check<N: Network>(
    net: &N,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    weight_decay: f64,
    step: f64,
    floor: f64,
) -> GradientCheck {
    let (_, analytic) = loss_and_gradient(net, x, labels, weight_decay, None);
    let mut probe = net.clone();
    let mut report = GradientCheck::default();
    for (li, grad) in analytic.iter().enumerate() {
        let (rows, cols) = grad.weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                let numeric = central_difference(&mut probe, x, labels, weight_decay, step, li, Slot::Weight(r, c));
                report.record(grad.weights[(r, c)], numeric, floor);
            }
        }
        for (b, &g) in grad.bias.iter().enumerate() {
            let numeric = central_difference(&mut probe, x, labels, weight_decay, step, li, Slot::Bias(b));
            report.record(g, numeric, floor);
        }
    }
    report
}

/// Like [`gradient_check`], but probes only `per_layer` randomly chosen
/// weights and biases of each layer.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check_sampled<N: Network>(
    net: &N,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    weight_decay: f64,
    step: f64,
    floor: f64,
    per_layer: usize,
    seed: u64,
) -> GradientCheck {
    let (_, analytic) = loss_and_gradient(net, x, labels, weight_decay, None);
    let mut probe = net.clone();
    let mut report = GradientCheck::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (li, grad) in analytic.iter().enumerate() {
        let (rows, cols) = grad.weights.dim();
        for _ in 0..per_layer {
            let (r, c) = (rng.random_range(0..rows), rng.random_range(0..cols));
            let numeric = central_difference(&mut probe, x, labels, weight_decay, step, li, Slot::Weight(r, c));
            report.record(grad.weights[(r, c)], numeric, floor);
        }
        for _ in 0..per_layer.min(grad.bias.len()) {
            let b = rng.random_range(0..grad.bias.len());
            let numeric = central_difference(&mut probe, x, labels, weight_decay, step, li, Slot::Bias(b));
            report.record(grad.bias[b], numeric, floor);
        }
    }
    report
}

#[derive(Clone, Copy)]
enum Slot {
    Weight(usize, usize),
    Bias(usize),
}

fn param<N: Network>(net: &mut N, layer: usize, slot: Slot) -> &mut f64 {
    let dense = net.layers_mut().swap_remove(layer);
    match slot {
        Slot::Weight(r, c) => &mut dense.weights[(r, c)],
        Slot::Bias(b) => &mut dense.bias[b],
    }
}

#[allow(clippy::too_many_arguments)]
fn central_difference<N: Network>(
    net: &mut N,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    weight_decay: f64,
    step: f64,
    layer: usize,
    slot: Slot,
) -> f64 {
    let original = *param(net, layer, slot);
    *param(net, layer, slot) = original + step;
    let plus = batch_loss(net, x, labels, weight_decay);
    *param(net, layer, slot) = original - step;
    let minus = batch_loss(net, x, labels, weight_decay);
    *param(net, layer, slot) = original;
    (plus - minus) / (2.0 * step)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientCheck {
    pub parameters: usize,
    pub max_relative_error: f64,
}

impl GradientCheck {
    fn record(&mut self, analytic: f64, numeric: f64, floor: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        let err = (analytic - numeric).abs() / denom;
        self.parameters += 1;
        if err > self.max_relative_error || err.is_nan() {
            self.max_relative_error = err;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(seed: u64) -> TrainingConfig {
        TrainingConfig {
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 16,
            dropout: 0.0,
            weight_decay: 0.0,
            patience: 200,
            seed,
            chars_hidden: 6,
            words_hidden: 5,
            paragraph_hidden: 4,
            primary_hidden: 8,
        }
    }

    /// Three classes, each with its own indicator feature in the stats block
    /// and in the character block.
    fn separable(n_per_class: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3 * n_per_class;
        let mut x = Array2::from_shape_fn((n, NUM_FEATURES), |_| rng.random_range(-0.1..0.1));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 3;
            x[(i, class)] = 1.0;
            x[(i, CHARS_RANGE.start + 10 * class)] = 1.0;
            y.push(class);
        }
        (x, y)
    }

    #[test]
    fn learns_separable_data() {
        let (x, y) = separable(20, 1);
        let data = Dataset::new(x.view(), &y).unwrap();
        let (model, log) = train_sherlock(data, data, &tiny_config(3)).unwrap();
        assert!(log.epochs.iter().all(|e| e.val_loss.is_finite()));
        assert_eq!(accuracy(&model, data), 1.0);
    }

    #[test]
    fn deterministic_training() {
        let (x, y) = separable(10, 2);
        let data = Dataset::new(x.view(), &y).unwrap();
        let cfg = TrainingConfig { epochs: 5, dropout: 0.3, ..tiny_config(4) };
        let a = train_sherlock(data, data, &cfg).unwrap().0;
        let b = train_sherlock(data, data, &cfg).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = SherlockModel::zeros(&TrainingConfig::default());
        let p = model.predict_proba(&vec![0.3; NUM_FEATURES]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 78.0).abs() < 1e-15));
        assert!(model.predict_proba(&[0.0; 3]).is_err());
    }

    #[test]
    fn decisions() {
        let mut p = vec![0.0; NUM_TYPES];
        p[7] = 0.6;
        p[2] = 0.4;
        assert_eq!(decide(&p, None), Prediction::Type(SemanticType::from_index(7).unwrap()));
        let mut q = vec![0.0; NUM_TYPES];
        q[3] = 0.4;
        q[5] = 0.4;
        q[9] = 0.2;
        assert_eq!(decide(&q, None), Prediction::Type(SemanticType::from_index(3).unwrap()));
        assert_eq!(decide(&q, Some(0.5)), Prediction::Rejected);
    }

    #[test]
    fn small_gradient_check() {
        let (x, y) = separable(4, 5);
        let cfg = TrainingConfig { chars_hidden: 3, words_hidden: 3, paragraph_hidden: 3, primary_hidden: 4, ..tiny_config(6) };
        let mut model = SherlockModel::new(&cfg);
        // Zero biases behind dead units put pre-activations exactly on the
        // ReLU kink, where finite differences are one-sided.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for layer in model.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
        let check = gradient_check(&model, x.view(), &y, 1e-3, 1e-5, 1e-5);
        assert!(check.max_relative_error < 1e-4, "{check:?}");
    }

    #[test]
    fn weight_decay_shrinks_weights() {
        let (x, y) = separable(10, 7);
        let data = Dataset::new(x.view(), &y).unwrap();
        let base = TrainingConfig { epochs: 40, ..tiny_config(8) };
        let plain = train_sherlock(data, data, &base).unwrap().0;
        let decayed = train_sherlock(data, data, &TrainingConfig { weight_decay: 0.05, ..base }).unwrap().0;
        assert!(weight_norm_sq(&decayed) < weight_norm_sq(&plain));
    }

    #[test]
    fn isolated_widths() {
        assert_eq!(FeatureFamily::Words.width(), 201);
        assert_eq!(FeatureFamily::Chars.width(), 960);
        assert_eq!(FeatureFamily::Paragraph.width(), 400);
        assert_eq!(FeatureFamily::Stats.width(), 27);
        let m = IsolatedModel::new(FeatureFamily::Words, &tiny_config(0));
        assert_eq!(m.net.input_dim(), 201);
        assert_eq!(m.net.output_dim(), NUM_TYPES);
    }

    #[test]
    fn config_text() {
        let mut cfg = TrainingConfig::default();
        cfg.apply_config_text("# comment\nlearning_rate = 0.01\nepochs=3\n\n").unwrap();
        assert_eq!((cfg.learning_rate, cfg.epochs), (0.01, 3));
        assert!(cfg.apply_config_text("nope=1").is_err());
        assert!(cfg.apply_config_text("epochs").is_err());
        assert!(TrainingConfig { dropout: 1.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let (mut x, y) = separable(4, 9);
        x[(0, 0)] = f64::NAN;
        let data = Dataset::new(x.view(), &y).unwrap();
        let err = train_sherlock(data, data, &tiny_config(1)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }));
    }
}
