use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sherlock_core::corpus::{filter_corpus, load_corpus, save_corpus, split, Corpus, FilterConfig, SplitSpec};
use sherlock_core::detector::{load_paragraph_model, save_paragraph_model, Classifier, Detector};
use sherlock_core::eval::{bootstrap_f1, evaluate, rejection_curve};
use sherlock_core::experiment::{prepare, run_benchmark, truths, write_benchmark_csv, ExperimentConfig};
use sherlock_core::features::paragraph::{train_pvdbow, ParagraphConfig};
use sherlock_core::features::words::{load_word_vectors, WordVectorTable};
use sherlock_core::matching::{build_dictionary, RegexRuleSet, DEFAULT_DICTIONARY_SIZE, DEFAULT_SAMPLE_SIZE};
use sherlock_core::nn::{train_sherlock, train_subnet_isolated, Dataset, FeatureFamily, TrainingConfig, TrainingLog};
use sherlock_core::pipeline::{extract_matrix, fit_imputer, load_matrix_csv, save_matrix_csv, FeatureMatrix};
use sherlock_core::synthetic::{generate_corpus, synthetic_regex_rules, synthetic_word_table, SyntheticConfig};
use sherlock_core::trees::{train_decision_tree, train_random_forest, ForestParams, TreeParams};
use sherlock_core::{Prediction, NUM_TYPES};

/// Semantic type detection for table columns.
#[derive(Parser, Debug)]
#[command(name = "sherlock", version)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a labeled JSONL corpus and split it into train/val/test files.
    Ingest(IngestArgs),
    /// Write a synthetic labeled corpus with a matching word-vector table and regex rules.
    Synth(SynthArgs),
    /// Extract the feature matrix of a corpus as CSV.
    Features(FeaturesArgs),
    /// Train a model and save it as a container.
    Train(TrainArgs),
    /// Predict the type of each column of a CSV table or JSONL corpus.
    Predict(PredictArgs),
    /// Score a model on a labeled feature matrix or corpus.
    Evaluate(EvaluateArgs),
    /// Train and compare all models on one corpus.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Input corpus, one JSON object per line.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving train.jsonl, val.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    /// Word vectors used for the coverage filter; without it the filter is skipped.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 15_000)]
    cap: usize,
    #[arg(long, default_value_t = 1_000)]
    min_count: usize,
    #[arg(long, default_value_t = 0.15)]
    coverage_threshold: f64,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.2])]
    ratios: Vec<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output corpus (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Also write the synthetic word-vector table here.
    #[arg(long)]
    embeddings_out: Option<PathBuf>,
    /// Also write regex rules for the synthetic types here.
    #[arg(long)]
    rules_out: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    columns_per_type: usize,
    #[arg(long, default_value_t = 0.1)]
    dirty_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    overlap_rate: f64,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Output matrix (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Existing paragraph model (any container that holds one).
    #[arg(long, conflicts_with = "fit_paragraph", required_unless_present = "fit_paragraph")]
    paragraph: Option<PathBuf>,
    /// Train a paragraph model on this corpus and save it here.
    #[arg(long)]
    fit_paragraph: Option<PathBuf>,
    #[arg(long)]
    paragraph_epochs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelArg {
    Nn,
    Tree,
    Forest,
    Dictionary,
    Regex,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FamilyArg {
    Chars,
    Words,
    Paragraph,
    Stats,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Output container.
    #[arg(long)]
    out: PathBuf,
    /// Training feature matrix (nn, tree, forest).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Validation feature matrix for early stopping (nn).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Paragraph model used to build the matrices (nn, tree, forest).
    #[arg(long)]
    paragraph: Option<PathBuf>,
    /// Training corpus (dictionary).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Regex rules, a JSON map from type name to pattern (regex).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Train one feature family on its own instead of the full network (nn).
    #[arg(long, value_enum)]
    isolated: Option<FamilyArg>,
    /// key=value training configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-epoch metrics as JSON lines (nn).
    #[arg(long)]
    metrics_log: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 50)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    n_trees: usize,
    #[arg(long, default_value_t = DEFAULT_DICTIONARY_SIZE)]
    dictionary_size: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model container.
    #[arg(long)]
    model: PathBuf,
    /// CSV table (first row is a header and is ignored) or a .jsonl corpus.
    #[arg(long)]
    input: PathBuf,
    /// Word vectors; required by feature-based models.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Reject predictions whose top probability is below this value.
    #[arg(long)]
    reject_below: Option<f64>,
    /// Output file; defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled feature matrix (feature-based models).
    #[arg(long, conflicts_with = "corpus")]
    matrix: Option<PathBuf>,
    /// Labeled corpus; feature-based models also need --embeddings.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// JSON report output; defaults to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Rejection curve CSV output (probabilistic models).
    #[arg(long)]
    rejection_curve: Option<PathBuf>,
    /// Bootstrap iterations for a confidence interval on weighted F1.
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Labeled corpus (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Regex rules; without them the regex row abstains everywhere.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Directory for the containers, reports and benchmark.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// key=value training configuration for the network.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    paragraph_epochs: Option<usize>,
}

/// Error in how the command was invoked, as opposed to bad input data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sherlock_core::Error>() {
            return if e.is_data_error() { 2 } else { 3 };
        }
        if cause.is::<io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => ingest(a, seed),
        Command::Synth(a) => synth(a, seed),
        Command::Features(a) => features(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a, seed),
        Command::Benchmark(a) => benchmark(a, seed),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_labeled_corpus(path: &Path) -> Result<Corpus> {
    let (corpus, stats) = load_corpus(path)?;
    if stats.dropped_unlabeled + stats.dropped_empty > 0 {
        eprintln!(
            "{}: skipped {} unlabeled and {} empty columns",
            path.display(),
            stats.dropped_unlabeled,
            stats.dropped_empty
        );
    }
    Ok(corpus)
}

fn ingest(a: IngestArgs, seed: u64) -> Result<()> {
    let ratios: [f64; 3] = a
        .ratios
        .as_slice()
        .try_into()
        .map_err(|_| usage("--ratios takes exactly three comma-separated fractions"))?;
    let corpus = load_labeled_corpus(&a.input)?;
    let words = a.embeddings.as_deref().map(load_word_vectors).transpose()?;
    let filter = FilterConfig {
        cap: a.cap,
        min_count: a.min_count,
        coverage_threshold: a.coverage_threshold,
        seed,
    };
    let filtered = filter_corpus(&corpus, &filter, words.as_ref())?;
    let splits = split(&filtered, &SplitSpec { ratios, seed })?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    for (name, part) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        save_corpus(part, a.out_dir.join(format!("{name}.jsonl")))?;
    }
    println!(
        "kept {} of {} columns over {} types: train {}, val {}, test {}",
        filtered.len(),
        corpus.len(),
        filtered.per_type_counts().len(),
        splits.train.len(),
        splits.val.len(),
        splits.test.len()
    );
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let config = SyntheticConfig {
        columns_per_type: a.columns_per_type,
        dirty_rate: a.dirty_rate,
        overlap_rate: a.overlap_rate,
        seed,
        ..SyntheticConfig::default()
    };
    if !(0.0..=1.0).contains(&config.dirty_rate) || !(0.0..=1.0).contains(&config.overlap_rate) {
        return Err(usage("--dirty-rate and --overlap-rate must lie in [0, 1]"));
    }
    let corpus = generate_corpus(&config);
    save_corpus(&corpus, &a.out)?;
    if let Some(path) = &a.embeddings_out {
        let mut w = create(path)?;
        synthetic_word_table(seed).write_text(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.rules_out {
        let mut w = create(path)?;
        synthetic_regex_rules()?.write(&mut w)?;
        w.flush()?;
    }
    println!("wrote {} columns to {}", corpus.len(), a.out.display());
    Ok(())
}

fn features(a: FeaturesArgs, seed: u64) -> Result<()> {
    let corpus = load_labeled_corpus(&a.corpus)?;
    let words = load_word_vectors(&a.embeddings)?;
    let paragraph = match (&a.paragraph, &a.fit_paragraph) {
        (Some(path), _) => load_paragraph_model(path)?,
        (None, Some(out)) => {
            let mut config = ParagraphConfig { seed, ..ParagraphConfig::default() };
            if let Some(e) = a.paragraph_epochs {
                config.epochs = e;
            }
            let values: Vec<&[String]> = corpus.columns.iter().map(|c| c.values.as_slice()).collect();
            let model = train_pvdbow(&values, &config)?;
            save_paragraph_model(&model, out)?;
            model
        }
        (None, None) => return Err(usage("one of --paragraph or --fit-paragraph is required")),
    };
    let matrix = extract_matrix(&corpus, &words, &paragraph)?;
    save_matrix_csv(&matrix, &a.out)?;
    println!("wrote {} rows to {}", matrix.len(), a.out.display());
    Ok(())
}

fn training_config(path: Option<&Path>, seed: u64) -> Result<TrainingConfig> {
    let mut config = TrainingConfig { seed, ..TrainingConfig::default() };
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        config.apply_config_text(&text)?;
        config.seed = seed;
    }
    Ok(config)
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str, model: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| usage(format!("--{flag} is required for --model {model}")))
}

fn labeled(matrix: &FeatureMatrix, path: &Path) -> Result<Vec<usize>> {
    matrix
        .label_indices()
        .with_context(|| format!("{} must be fully labeled", path.display()))
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let model_name = format!("{:?}", a.model).to_lowercase();
    let detector = match a.model {
        ModelArg::Dictionary => {
            let corpus = load_labeled_corpus(require(&a.corpus, "corpus", &model_name)?)?;
            let classifier = Classifier::Dictionary {
                model: build_dictionary(&corpus, a.dictionary_size),
                sample_size: a.sample_size,
            };
            let hyper = serde_json::json!({"dictionary_size": a.dictionary_size, "sample_size": a.sample_size});
            Detector::matching(classifier, seed, hyper)?
        }
        ModelArg::Regex => {
            let rules = RegexRuleSet::load(require(&a.rules, "rules", &model_name)?)?;
            let hyper = serde_json::json!({"sample_size": a.sample_size, "rules": rules.len()});
            let classifier = Classifier::Regex {
                rules,
                sample_size: a.sample_size,
            };
            Detector::matching(classifier, seed, hyper)?
        }
        ModelArg::Nn | ModelArg::Tree | ModelArg::Forest => {
            let matrix_path = require(&a.matrix, "matrix", &model_name)?;
            let paragraph = load_paragraph_model(require(&a.paragraph, "paragraph", &model_name)?)?;
            let mut train = load_matrix_csv(matrix_path)?;
            let imputer = fit_imputer(train.features.view())?;
            imputer.apply_matrix(&mut train.features)?;
            let y = labeled(&train, matrix_path)?;
            let (classifier, hyper) = match a.model {
                ModelArg::Nn => {
                    let mut config = training_config(a.config.as_deref(), seed)?;
                    let overrides = [
                        ("learning_rate", a.learning_rate.map(|v| v.to_string())),
                        ("epochs", a.epochs.map(|v| v.to_string())),
                        ("batch_size", a.batch_size.map(|v| v.to_string())),
                        ("dropout", a.dropout.map(|v| v.to_string())),
                        ("weight_decay", a.weight_decay.map(|v| v.to_string())),
                        ("patience", a.patience.map(|v| v.to_string())),
                    ];
                    for (key, value) in overrides {
                        if let Some(v) = value {
                            config.set(key, &v)?;
                        }
                    }
                    config.validate()?;
                    let val = match &a.val {
                        Some(p) => {
                            let mut m = load_matrix_csv(p)?;
                            imputer.apply_matrix(&mut m.features)?;
                            let y = labeled(&m, p)?;
                            Some((m, y))
                        }
                        None => None,
                    };
                    let train_set = Dataset::new(train.features.view(), &y)?;
                    let val_set = match &val {
                        Some((m, y)) => Dataset::new(m.features.view(), y)?,
                        None => train_set,
                    };
                    let (classifier, log): (Classifier, TrainingLog) = match a.isolated {
                        None => {
                            let (net, log) = train_sherlock(train_set, val_set, &config)?;
                            (Classifier::Nn(net), log)
                        }
                        Some(family) => {
                            let family = match family {
                                FamilyArg::Chars => FeatureFamily::Chars,
                                FamilyArg::Words => FeatureFamily::Words,
                                FamilyArg::Paragraph => FeatureFamily::Paragraph,
                                FamilyArg::Stats => FeatureFamily::Stats,
                            };
                            let (net, log) = train_subnet_isolated(family, train_set, val_set, &config)?;
                            (Classifier::Isolated(net), log)
                        }
                    };
                    if let Some(path) = &a.metrics_log {
                        std::fs::write(path, log.to_json_lines())
                            .with_context(|| format!("cannot write {}", path.display()))?;
                    }
                    eprintln!("trained {} epochs, best epoch {}", log.epochs.len(), log.best_epoch);
                    (classifier, serde_json::to_value(config)?)
                }
                ModelArg::Tree => {
                    let params = TreeParams {
                        max_depth: a.max_depth,
                        ..TreeParams::default()
                    };
                    let tree = train_decision_tree(train.features.view(), &y, NUM_TYPES, &params, seed)?;
                    (Classifier::Tree(tree), serde_json::to_value(params)?)
                }
                _ => {
                    let params = ForestParams {
                        n_trees: a.n_trees,
                        max_depth: a.max_depth,
                        ..ForestParams::default()
                    };
                    let forest = train_random_forest(train.features.view(), &y, NUM_TYPES, &params, seed)?;
                    (Classifier::Forest(forest), serde_json::to_value(params)?)
                }
            };
            Detector::feature_based(classifier, imputer, paragraph, seed, hyper)?
        }
    };
    let size = detector.save(&a.out)?;
    println!("saved {} model to {} ({size} bytes)", model_name, a.out.display());
    Ok(())
}

/// Columns of a CSV table: cells below the header row, column by column.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    Ok((headers, columns))
}

fn load_words(path: Option<&Path>, detector: &Detector) -> Result<Option<WordVectorTable>> {
    match path {
        Some(p) => Ok(Some(load_word_vectors(p)?)),
        None if detector.classifier.uses_features() => Err(usage("--embeddings is required for feature-based models")),
        None => Ok(None),
    }
}

fn predict(a: PredictArgs) -> Result<()> {
    if let Some(t) = a.reject_below {
        if !(0.0..=1.0).contains(&t) {
            return Err(usage("--reject-below must lie in [0, 1]"));
        }
    }
    let detector = Detector::load(&a.model)?;
    let words = load_words(a.embeddings.as_deref(), &detector)?;
    let (headers, columns) = if a.input.extension().is_some_and(|e| e == "jsonl") {
        let (corpus, _) = sherlock_core::corpus::load_corpus(&a.input)?;
        let headers = corpus
            .columns
            .iter()
            .map(|c| c.source_header.clone().unwrap_or_default())
            .collect();
        (headers, corpus.columns.into_iter().map(|c| c.values).collect())
    } else {
        read_table(&a.input)?
    };
    let predictions = detector.predict_columns(&columns, words.as_ref(), a.reject_below)?;
    let mut out = csv::Writer::from_writer(output(a.out.as_deref())?);
    out.write_record(["column", "header", "prediction", "confidence"])?;
    for (i, (header, p)) in headers.iter().zip(&predictions).enumerate() {
        let label = match p.prediction {
            Prediction::Type(t) => t.name().to_string(),
            Prediction::Abstain => "abstain".to_string(),
            Prediction::Rejected => "rejected".to_string(),
        };
        let confidence = p.confidence.map(|c| format!("{c:.6}")).unwrap_or_default();
        out.write_record([i.to_string(), header.clone(), label, confidence])?;
    }
    out.flush()?;
    Ok(())
}

const REJECTION_FRACTIONS: [f64; 20] = [
    1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05,
];

fn evaluate_cmd(a: EvaluateArgs, seed: u64) -> Result<()> {
    let detector = Detector::load(&a.model)?;
    let (predictions, probabilities, truth) = match (&a.matrix, &a.corpus) {
        (Some(path), _) => {
            let mut matrix = load_matrix_csv(path)?;
            let imputer = detector
                .imputer
                .as_ref()
                .ok_or_else(|| usage("matching models are evaluated with --corpus"))?;
            imputer.apply_matrix(&mut matrix.features)?;
            let truth = labeled(&matrix, path)?
                .into_iter()
                .map(|i| sherlock_core::SemanticType::from_index(i).expect("label index within vocabulary"))
                .collect::<Vec<_>>();
            let preds = detector.predict_features(matrix.features.view(), None)?;
            let probs = detector.probabilities(matrix.features.view())?;
            (preds, Some(probs), truth)
        }
        (None, Some(path)) => {
            let corpus = load_labeled_corpus(path)?;
            let truth = truths(&corpus)?;
            let words = load_words(a.embeddings.as_deref(), &detector)?;
            let columns: Vec<Vec<String>> = corpus.columns.into_iter().map(|c| c.values).collect();
            let probs = match &words {
                Some(w) if detector.classifier.uses_features() => {
                    let x = detector.featurize(&columns, w)?;
                    Some(detector.probabilities(x.view())?)
                }
                _ => None,
            };
            (detector.predict_columns(&columns, words.as_ref(), None)?, probs, truth)
        }
        (None, None) => return Err(usage("one of --matrix or --corpus is required")),
    };
    let preds: Vec<Prediction> = predictions.iter().map(|p| p.prediction).collect();
    let mut report = evaluate(&preds, &truth)?;
    report.model_size_bytes = Some(std::fs::metadata(&a.model)?.len());
    if let Some(n) = a.bootstrap {
        report.bootstrap = Some(bootstrap_f1(&preds, &truth, n, seed)?);
    }
    if let Some(path) = &a.rejection_curve {
        let probs = probabilities.ok_or_else(|| usage("rejection curves need a probabilistic model"))?;
        let curve = rejection_curve(&probs, &truth, &REJECTION_FRACTIONS)?;
        curve.write_csv(create(path)?)?;
    }
    let mut out = output(a.report.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    eprintln!("weighted F1 {:.4} over {} columns", report.weighted_f1, report.n_samples);
    Ok(())
}

fn benchmark(a: BenchmarkArgs, seed: u64) -> Result<()> {
    let corpus = load_labeled_corpus(&a.corpus)?;
    let words = load_word_vectors(&a.embeddings)?;
    let rules = a.rules.as_deref().map(RegexRuleSet::load).transpose()?;
    let mut config = ExperimentConfig::default().with_seed(seed);
    config.training = training_config(a.config.as_deref(), seed)?;
    if let Some(e) = a.epochs {
        config.training.epochs = e;
    }
    if let Some(e) = a.paragraph_epochs {
        config.paragraph.epochs = e;
    }
    config.training.validate()?;
    let prepared = prepare(&corpus, &words, &config)?;
    let results = run_benchmark(&prepared, &words, rules.as_ref(), &config, &a.out_dir)?;
    let rows: Vec<_> = results.iter().map(|(row, _)| row.clone()).collect();
    write_benchmark_csv(&rows, create(&a.out_dir.join("benchmark.csv"))?)?;
    for (row, report) in &results {
        std::fs::write(a.out_dir.join(format!("{}.report.json", row.model)), report.to_json())?;
    }
    println!("{:<12} {:>8} {:>14} {:>12}", "model", "F1", "runtime (s)", "size (MB)");
    for row in &rows {
        println!(
            "{:<12} {:>8.3} {:>14.6} {:>12.3}",
            row.model,
            row.weighted_f1,
            row.runtime_per_sample_secs,
            row.size_bytes as f64 / 1e6
        );
    }
    Ok(())
}
