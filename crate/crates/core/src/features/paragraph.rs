//! Distributed bag-of-words paragraph vectors (PV-DBOW) over columns.
//!
//! Each column is a document and each normalized cell value is one token.
//! A column's vector is trained to predict the tokens it contains, using
//! negative sampling against a unigram^0.75 noise distribution.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::derive_seed;
use crate::error::{Error, Result};

pub const PARAGRAPH_DIM: usize = 400;

const INFER_STREAM: u64 = 0x1f3d_5b79;
const NOISE_EXPONENT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParagraphConfig {
    pub dimension: usize,
    pub epochs: usize,
    pub window: usize,
    pub negative: usize,
    pub alpha: f64,
    pub min_alpha: f64,
    /// Tokens seen fewer times than this across the training columns are ignored.
    pub min_count: u64,
    pub seed: u64,
}

impl Default for ParagraphConfig {
    fn default() -> Self {
        ParagraphConfig {
            dimension: PARAGRAPH_DIM,
            epochs: 20,
            window: 5,
            negative: 5,
            alpha: 0.025,
            min_alpha: 0.0001,
            min_count: 2,
            seed: 0,
        }
    }
}

/// Normalized form of a cell used as a paragraph token.
pub fn value_token(value: &str) -> String {
    value.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphVectorModel {
    pub config: ParagraphConfig,
    vocab: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// `vocab.len() x dimension`, row-major.
    output: Vec<f64>,
    /// `training columns x dimension`, row-major.
    paragraphs: Vec<f64>,
    noise_cdf: Vec<f64>,
    /// Mean negative-sampling loss of each training epoch.
    pub epoch_losses: Vec<f64>,
}

fn noise_cdf(counts: &[u64]) -> Vec<f64> {
    let mut acc = 0.0;
    counts
        .iter()
        .map(|&c| {
            acc += (c as f64).powf(NOISE_EXPONENT);
            acc
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn init_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let bound = 0.5 / dim as f64;
    (0..dim).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Splits token positions into windows of `window` consecutive positions
/// starting at a random offset, and returns them in shuffled order.
fn sample_windows(len: usize, window: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let window = window.max(1);
    let offset = rng.random_range(0..window.min(len.max(1)));
    let mut spans = Vec::with_capacity(len / window + 2);
    if offset > 0 {
        spans.push((0, offset));
    }
    let mut start = offset;
    while start < len {
        let end = (start + window).min(len);
        spans.push((start, end));
        start = end;
    }
    spans.shuffle(rng);
    spans
}

enum OutputWeights<'a> {
    Trainable(&'a mut [f64]),
    Frozen(&'a [f64]),
}

struct Step<'a> {
    output: OutputWeights<'a>,
    noise_cdf: &'a [f64],
    dim: usize,
    negative: usize,
}

impl Step<'_> {
    /// One negative-sampling update of `doc` towards `target`. Returns the loss
    /// before the update.
    fn apply(&mut self, doc: &mut [f64], grad: &mut [f64], target: usize, lr: f64, rng: &mut ChaCha8Rng) -> f64 {
        let dim = self.dim;
        let total = *self.noise_cdf.last().expect("non-empty vocabulary");
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for k in 0..=self.negative {
            let (word, label) = if k == 0 {
                (target, 1.0)
            } else {
                let u = rng.random_range(0.0..total);
                let w = self.noise_cdf.partition_point(|&c| c <= u).min(self.noise_cdf.len() - 1);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let span = word * dim..(word + 1) * dim;
            let row: &[f64] = match &self.output {
                OutputWeights::Trainable(w) => &w[span.clone()],
                OutputWeights::Frozen(w) => &w[span.clone()],
            };
            let p = sigmoid(dot(doc, row));
            loss -= if label == 1.0 { p.max(1e-300).ln() } else { (1.0 - p).max(1e-300).ln() };
            let g = (label - p) * lr;
            for (gd, r) in grad.iter_mut().zip(row) {
                *gd += g * r;
            }
            if let OutputWeights::Trainable(w) = &mut self.output {
                for (r, d) in w[span].iter_mut().zip(doc.iter()) {
                    *r += g * d;
                }
            }
        }
        for (d, g) in doc.iter_mut().zip(grad.iter()) {
            *d += g;
        }
        loss
    }
}

/// Trains paragraph vectors for `columns`. Single threaded and deterministic
/// for a given seed.
pub fn train_pvdbow(columns: &[&[String]], config: &ParagraphConfig) -> Result<ParagraphVectorModel> {
    if columns.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "paragraph vectors need at least 2 training columns, got {}",
            columns.len()
        )));
    }
    if config.dimension == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument("paragraph dimension and epochs must be positive".into()));
    }
    let dim = config.dimension;

    let mut raw_counts: HashMap<String, u64> = HashMap::new();
    for column in columns {
        for v in column.iter() {
            *raw_counts.entry(value_token(v)).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(String, u64)> = raw_counts
        .into_iter()
        .filter(|(_, c)| *c >= config.min_count)
        .collect();
    // Frequency-descending with lexical tie-break keeps indices reproducible.
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if vocab.is_empty() {
        return Err(Error::Empty("paragraph vector vocabulary".into()));
    }
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, (t, _))| (t.clone(), i)).collect();
    let (vocab, counts): (Vec<String>, Vec<u64>) = vocab.into_iter().unzip();
    let noise = noise_cdf(&counts);

    let docs: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| c.iter().filter_map(|v| index.get(&value_token(v)).copied()).collect())
        .collect();
    let total_steps = (docs.iter().map(Vec::len).sum::<usize>() * config.epochs).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut paragraphs = Vec::with_capacity(columns.len() * dim);
    for _ in 0..columns.len() {
        paragraphs.extend(init_vector(&mut rng, dim));
    }
    let mut output = vec![0.0; vocab.len() * dim];
    let mut grad = vec![0.0; dim];
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step_count = 0usize;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_steps) = (0.0, 0usize);
        for &doc_id in &order {
            let tokens = &docs[doc_id];
            if tokens.is_empty() {
                continue;
            }
            let doc = &mut paragraphs[doc_id * dim..(doc_id + 1) * dim];
            let mut step = Step {
                output: OutputWeights::Trainable(&mut output),
                noise_cdf: &noise,
                dim,
                negative: config.negative,
            };
            for (start, end) in sample_windows(tokens.len(), config.window, &mut rng) {
                for &target in &tokens[start..end] {
                    let progress = step_count as f64 / total_steps as f64;
                    let lr = config.alpha - (config.alpha - config.min_alpha) * progress;
                    epoch_loss += step.apply(doc, &mut grad, target, lr, &mut rng);
                    epoch_steps += 1;
                    step_count += 1;
                }
            }
        }
        epoch_losses.push(if epoch_steps > 0 { epoch_loss / epoch_steps as f64 } else { 0.0 });
    }

    Ok(ParagraphVectorModel {
        config: *config,
        vocab,
        counts,
        index,
        output,
        paragraphs,
        noise_cdf: noise,
        epoch_losses,
    })
}

impl ParagraphVectorModel {
    /// Reassembles a model from persisted parts.
    pub fn from_parts(
        config: ParagraphConfig,
        vocab: Vec<String>,
        counts: Vec<u64>,
        output: Vec<f64>,
        paragraphs: Vec<f64>,
        epoch_losses: Vec<f64>,
    ) -> Result<Self> {
        let dim = config.dimension;
        if vocab.is_empty() || vocab.len() != counts.len() {
            return Err(Error::Container("paragraph vocabulary and counts disagree".into()));
        }
        if output.len() != vocab.len() * dim || !paragraphs.len().is_multiple_of(dim.max(1)) {
            return Err(Error::Container("paragraph matrices have the wrong shape".into()));
        }
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let noise_cdf = noise_cdf(&counts);
        Ok(ParagraphVectorModel {
            config,
            vocab,
            counts,
            index,
            output,
            paragraphs,
            noise_cdf,
            epoch_losses,
        })
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output
    }

    pub fn paragraph_matrix(&self) -> &[f64] {
        &self.paragraphs
    }

    pub fn num_paragraphs(&self) -> usize {
        self.paragraphs.len() / self.dimension()
    }

    pub fn paragraph(&self, i: usize) -> &[f64] {
        let dim = self.dimension();
        &self.paragraphs[i * dim..(i + 1) * dim]
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// The starting point of every inference: what a column with no known
    /// tokens maps to.
    pub fn initial_inference_vector(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, INFER_STREAM));
        init_vector(&mut rng, self.dimension())
    }

    /// Infers a vector for an unseen column with the token weights frozen.
    pub fn infer(&self, values: &[String]) -> Vec<f64> {
        let dim = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, INFER_STREAM));
        let mut doc = init_vector(&mut rng, dim);
        let tokens: Vec<usize> = values.iter().filter_map(|v| self.token_index(&value_token(v))).collect();
        if tokens.is_empty() {
            return doc;
        }
        let mut step = Step {
            output: OutputWeights::Frozen(&self.output),
            noise_cdf: &self.noise_cdf,
            dim,
            negative: self.config.negative,
        };
        let mut grad = vec![0.0; dim];
        let total_steps = tokens.len() * self.config.epochs;
        let mut step_count = 0usize;
        for _ in 0..self.config.epochs {
            for (start, end) in sample_windows(tokens.len(), self.config.window, &mut rng) {
                for &target in &tokens[start..end] {
                    let progress = step_count as f64 / total_steps as f64;
                    let lr = self.config.alpha - (self.config.alpha - self.config.min_alpha) * progress;
                    step.apply(&mut doc, &mut grad, target, lr, &mut rng);
                    step_count += 1;
                }
            }
        }
        doc
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}
