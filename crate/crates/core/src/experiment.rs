//! End-to-end runs: split a labeled corpus, fit the paragraph model and
//! imputer on the training part, train every model and compare them on the
//! test part.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{split, Corpus, SplitSpec, Splits};
use crate::detector::{Classifier, ColumnPrediction, Detector};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvaluationReport};
use crate::features::paragraph::{train_pvdbow, ParagraphConfig, ParagraphVectorModel};
use crate::features::words::WordVectorTable;
use crate::matching::{build_dictionary, RegexRuleSet, DEFAULT_DICTIONARY_SIZE, DEFAULT_SAMPLE_SIZE};
use crate::nn::{train_sherlock, Dataset, TrainingConfig, TrainingLog};
use crate::pipeline::{extract_matrix, fit_imputer, FeatureMatrix, Imputer};
use crate::trees::{train_decision_tree, train_random_forest, ForestParams, TreeParams};
use crate::types::{Prediction, SemanticType, NUM_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub training: TrainingConfig,
    pub paragraph: ParagraphConfig,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub dictionary_size: usize,
    pub sample_size: usize,
    pub split_ratios: [f64; 3],
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            training: TrainingConfig::default(),
            paragraph: ParagraphConfig::default(),
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            dictionary_size: DEFAULT_DICTIONARY_SIZE,
            sample_size: DEFAULT_SAMPLE_SIZE,
            split_ratios: SplitSpec::default().ratios,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Copies `seed` into every component that takes one.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self.paragraph.seed = seed;
        self
    }
}

/// Imputed feature matrices for the three splits.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub splits: Splits,
    pub paragraph: ParagraphVectorModel,
    pub imputer: Imputer,
    pub train: FeatureMatrix,
    pub val: FeatureMatrix,
    pub test: FeatureMatrix,
}

pub fn prepare(corpus: &Corpus, words: &WordVectorTable, config: &ExperimentConfig) -> Result<Prepared> {
    let splits = split(
        corpus,
        &SplitSpec {
            ratios: config.split_ratios,
            seed: config.seed,
        },
    )?;
    let train_values: Vec<&[String]> = splits.train.columns.iter().map(|c| c.values.as_slice()).collect();
    let paragraph = train_pvdbow(&train_values, &config.paragraph)?;
    let mut train = extract_matrix(&splits.train, words, &paragraph)?;
    let mut val = extract_matrix(&splits.val, words, &paragraph)?;
    let mut test = extract_matrix(&splits.test, words, &paragraph)?;
    let imputer = fit_imputer(train.features.view())?;
    for m in [&mut train, &mut val, &mut test] {
        imputer.apply_matrix(&mut m.features)?;
    }
    Ok(Prepared {
        splits,
        paragraph,
        imputer,
        train,
        val,
        test,
    })
}

pub fn truths(corpus: &Corpus) -> Result<Vec<SemanticType>> {
    corpus
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| c.label.ok_or_else(|| Error::InvalidArgument(format!("column {i} has no label"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkModel {
    Nn,
    Tree,
    Forest,
    Dictionary,
    Regex,
}

impl BenchmarkModel {
    pub const ALL: [BenchmarkModel; 5] = [
        BenchmarkModel::Nn,
        BenchmarkModel::Tree,
        BenchmarkModel::Forest,
        BenchmarkModel::Dictionary,
        BenchmarkModel::Regex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkModel::Nn => "nn",
            BenchmarkModel::Tree => "tree",
            BenchmarkModel::Forest => "forest",
            BenchmarkModel::Dictionary => "dictionary",
            BenchmarkModel::Regex => "regex",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}` (expected nn, tree, forest, dictionary or regex)")))
    }
}

/// Trains one model on prepared data. The network also returns its
/// training log.
pub fn train_model(
    model: BenchmarkModel,
    prepared: &Prepared,
    rules: Option<&RegexRuleSet>,
    config: &ExperimentConfig,
) -> Result<(Detector, Option<TrainingLog>)> {
    let feature_detector = |classifier: Classifier, hyper: serde_json::Value| {
        Detector::feature_based(classifier, prepared.imputer.clone(), prepared.paragraph.clone(), config.seed, hyper)
    };
    let y_train = prepared.train.label_indices()?;
    let x_train = prepared.train.features.view();
    match model {
        BenchmarkModel::Nn => {
            let y_val = prepared.val.label_indices()?;
            let (net, log) = train_sherlock(
                Dataset::new(x_train, &y_train)?,
                Dataset::new(prepared.val.features.view(), &y_val)?,
                &config.training,
            )?;
            let hyper = serde_json::to_value(config.training).expect("config serializes");
            Ok((feature_detector(Classifier::Nn(net), hyper)?, Some(log)))
        }
        BenchmarkModel::Tree => {
            let tree = train_decision_tree(x_train, &y_train, NUM_TYPES, &config.tree, config.seed)?;
            let hyper = serde_json::to_value(config.tree).expect("params serialize");
            Ok((feature_detector(Classifier::Tree(tree), hyper)?, None))
        }
        BenchmarkModel::Forest => {
            let forest = train_random_forest(x_train, &y_train, NUM_TYPES, &config.forest, config.seed)?;
            let hyper = serde_json::to_value(config.forest).expect("params serialize");
            Ok((feature_detector(Classifier::Forest(forest), hyper)?, None))
        }
        BenchmarkModel::Dictionary => {
            let dict = build_dictionary(&prepared.splits.train, config.dictionary_size);
            let hyper = serde_json::json!({"dictionary_size": config.dictionary_size, "sample_size": config.sample_size});
            let classifier = Classifier::Dictionary {
                model: dict,
                sample_size: config.sample_size,
            };
            Ok((Detector::matching(classifier, config.seed, hyper)?, None))
        }
        BenchmarkModel::Regex => {
            let rules = rules.cloned().unwrap_or_else(RegexRuleSet::empty);
            let hyper = serde_json::json!({"sample_size": config.sample_size, "rules": rules.len()});
            let classifier = Classifier::Regex {
                rules,
                sample_size: config.sample_size,
            };
            Ok((Detector::matching(classifier, config.seed, hyper)?, None))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub weighted_f1: f64,
    /// Wall-clock seconds per test column, feature extraction included.
    pub runtime_per_sample_secs: f64,
    pub size_bytes: u64,
}

/// Predicts raw test columns with a detector, timing the whole path.
pub fn timed_predictions(
    detector: &Detector,
    columns: &[Vec<String>],
    words: &WordVectorTable,
) -> Result<(Vec<ColumnPrediction>, f64)> {
    let start = Instant::now();
    let preds = detector.predict_columns(columns, Some(words), None)?;
    let secs = start.elapsed().as_secs_f64() / columns.len().max(1) as f64;
    Ok((preds, secs))
}

/// Trains all five models, saves each as `<out_dir>/<model>.bin`, reloads
/// it and scores it on the raw test columns.
pub fn run_benchmark(
    prepared: &Prepared,
    words: &WordVectorTable,
    rules: Option<&RegexRuleSet>,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<(BenchmarkRow, EvaluationReport)>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let columns: Vec<Vec<String>> = prepared.splits.test.columns.iter().map(|c| c.values.clone()).collect();
    let truth = truths(&prepared.splits.test)?;
    BenchmarkModel::ALL
        .into_iter()
        .map(|model| {
            let (detector, _) = train_model(model, prepared, rules, config)?;
            let path = out_dir.join(format!("{}.bin", model.as_str()));
            detector.save(&path)?;
            let size_bytes = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
            let loaded = Detector::load(&path)?;
            let (preds, runtime) = timed_predictions(&loaded, &columns, words)?;
            let predictions: Vec<Prediction> = preds.iter().map(|p| p.prediction).collect();
            let mut report = evaluate(&predictions, &truth)?;
            report.runtime_per_sample_secs = Some(runtime);
            report.model_size_bytes = Some(size_bytes);
            let row = BenchmarkRow {
                model: model.as_str().to_string(),
                weighted_f1: report.weighted_f1,
                runtime_per_sample_secs: runtime,
                size_bytes,
            };
            Ok((row, report))
        })
        .collect()
}

/// Rows of a benchmark table as CSV.
pub fn write_benchmark_csv(rows: &[BenchmarkRow], writer: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| Error::io("<benchmark>", e))?;
    Ok(())
}
