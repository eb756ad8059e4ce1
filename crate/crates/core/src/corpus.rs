//! Labeled column corpora: ingestion, header normalization, filtering and
//! stratified splitting.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::words::{tokenize, WordVectorTable};
use crate::types::{SemanticType, TYPE_NAMES};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub values: Vec<String>,
    pub label: Option<SemanticType>,
    pub source_header: Option<String>,
}

impl Column {
    pub fn new(values: Vec<String>, label: Option<SemanticType>) -> Self {
        Column {
            values,
            label,
            source_header: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub columns: Vec<Column>,
}

impl Corpus {
    pub fn new(columns: Vec<Column>) -> Self {
        Corpus { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Column count per labeled type. Unlabeled columns are not counted.
    pub fn per_type_counts(&self) -> BTreeMap<SemanticType, usize> {
        let mut counts = BTreeMap::new();
        for label in self.columns.iter().filter_map(|c| c.label) {
            *counts.entry(label).or_insert(0) += 1;
        }
        counts
    }

    /// Indices of the columns of each type, in corpus order.
    fn indices_by_type(&self) -> BTreeMap<SemanticType, Vec<usize>> {
        let mut groups: BTreeMap<SemanticType, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.columns.iter().enumerate() {
            if let Some(label) = c.label {
                groups.entry(label).or_default().push(i);
            }
        }
        groups
    }

    fn select(&self, mut indices: Vec<usize>) -> Corpus {
        indices.sort_unstable();
        Corpus::new(indices.into_iter().map(|i| self.columns[i].clone()).collect())
    }

    pub fn labels(&self) -> Vec<Option<SemanticType>> {
        self.columns.iter().map(|c| c.label).collect()
    }
}

/// Maps a raw column header onto the type vocabulary.
///
/// Case is folded and spaces, underscores and hyphens are dropped, so
/// `NAME`, `Name`, `release_date` and `releaseDate` all compare equal to the
/// concatenated words of the canonical name.
pub fn normalize_header(header: &str) -> Option<SemanticType> {
    let key = squash(header);
    if key.is_empty() {
        return None;
    }
    TYPE_NAMES
        .iter()
        .position(|name| squash(name) == key)
        .and_then(SemanticType::from_index)
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-'))
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Lines without a usable label (no label and no matching header).
    pub dropped_unlabeled: usize,
    /// Lines whose values array was empty.
    pub dropped_empty: usize,
}

/// Reads a JSON Lines corpus. Each line holds `values` plus either `label`
/// (a canonical type name) or `header` (resolved with [`normalize_header`]).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Corpus, LoadStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), &path.display().to_string())
}

pub fn read_corpus(reader: impl BufRead, source: &str) -> Result<(Corpus, LoadStats)> {
    let mut columns = Vec::new();
    let mut stats = LoadStats::default();
    let mut saw_line = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        saw_line = true;
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = match (&parsed.label, &parsed.header) {
            (Some(name), _) => Some(SemanticType::from_name(name).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?),
            (None, Some(header)) => normalize_header(header),
            (None, None) => None,
        };
        let Some(label) = label else {
            stats.dropped_unlabeled += 1;
            continue;
        };
        if parsed.values.is_empty() {
            stats.dropped_empty += 1;
            continue;
        }
        columns.push(Column {
            values: parsed.values,
            label: Some(label),
            source_header: parsed.header,
        });
    }
    if !saw_line {
        return Err(Error::Empty(format!("corpus {source}")));
    }
    Ok((Corpus::new(columns), stats))
}

/// Writes a corpus in the JSON Lines format read by [`load_corpus`].
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for column in &corpus.columns {
        let line = CorpusLine {
            values: column.values.clone(),
            label: column.label.map(|l| l.name().to_string()),
            header: column.source_header.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub cap: usize,
    pub min_count: usize,
    /// Types where at least this fraction of columns has no vocabulary token are dropped.
    pub coverage_threshold: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            cap: 15_000,
            min_count: 1_000,
            coverage_threshold: 0.15,
            seed: 0,
        }
    }
}

/// True when some cell of the column has a token present in the table.
pub fn has_vocab_token(column: &Column, vocab: &WordVectorTable) -> bool {
    column
        .values
        .iter()
        .any(|v| tokenize(v).iter().any(|t| vocab.contains(t)))
}

/// Down-samples over-represented types to `cap`, then removes types with
/// poor vocabulary coverage and types with fewer than `min_count` columns.
///
/// With `vocab = None` the coverage rule is skipped. Retained columns keep
/// their corpus order, which makes the filter a fixed point.
pub fn filter_corpus(
    corpus: &Corpus,
    config: &FilterConfig,
    vocab: Option<&WordVectorTable>,
) -> Result<Corpus> {
    if config.min_count == 0 || config.cap < config.min_count {
        return Err(Error::InvalidArgument(format!(
            "need cap >= min_count >= 1, got cap {} and min_count {}",
            config.cap, config.min_count
        )));
    }
    if !(0.0..=1.0).contains(&config.coverage_threshold) {
        return Err(Error::InvalidArgument(format!(
            "coverage threshold {} outside [0, 1]",
            config.coverage_threshold
        )));
    }
    let mut keep = Vec::new();
    for (label, mut indices) in corpus.indices_by_type() {
        if indices.len() > config.cap {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, label.index() as u64));
            indices.shuffle(&mut rng);
            indices.truncate(config.cap);
        }
        if let Some(vocab) = vocab {
            let uncovered = indices
                .iter()
                .filter(|&&i| !has_vocab_token(&corpus.columns[i], vocab))
                .count();
            if uncovered as f64 >= config.coverage_threshold * indices.len() as f64 {
                continue;
            }
        }
        if indices.len() < config.min_count {
            continue;
        }
        keep.extend(indices);
    }
    if keep.is_empty() {
        return Err(Error::Empty("filtered corpus".into()));
    }
    Ok(corpus.select(keep))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [0.6, 0.2, 0.2],
            seed: 0,
        }
    }
}

pub const MIN_COLUMNS_PER_TYPE_FOR_SPLIT: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

/// Per-type stratified shuffle split. Each part keeps corpus order.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits> {
    let sum: f64 = spec.ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || spec.ratios.iter().any(|r| *r < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratios {:?} must be non-negative and sum to 1",
            spec.ratios
        )));
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (label, mut indices) in corpus.indices_by_type() {
        if indices.len() < MIN_COLUMNS_PER_TYPE_FOR_SPLIT {
            return Err(Error::InvalidArgument(format!(
                "type `{label}` has {} columns, need at least {MIN_COLUMNS_PER_TYPE_FOR_SPLIT} to split",
                indices.len()
            )));
        }
        let n = indices.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, label.index() as u64));
        indices.shuffle(&mut rng);
        let n_train = ((spec.ratios[0] * n as f64).round() as usize).min(n);
        let n_val = ((spec.ratios[1] * n as f64).round() as usize).min(n - n_train);
        parts[0].extend_from_slice(&indices[..n_train]);
        parts[1].extend_from_slice(&indices[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&indices[n_train + n_val..]);
    }
    let [train, val, test] = parts;
    Ok(Splits {
        train: corpus.select(train),
        val: corpus.select(val),
        test: corpus.select(test),
    })
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counts per type, keyed by name, for logging.
pub fn describe_counts(corpus: &Corpus) -> HashMap<String, usize> {
    corpus
        .per_type_counts()
        .into_iter()
        .map(|(t, n)| (t.name().to_string(), n))
        .collect()
}
