//! Assembly of the four feature families into one fixed-order vector, mean
//! imputation, and the feature-matrix CSV format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Column, Corpus};
use crate::error::{Error, Result};
use crate::features::chars::{self, extract_char_features, roster_label, AGGREGATIONS, NUM_CHAR_FEATURES, ROSTER_LEN};
use crate::features::paragraph::{ParagraphVectorModel, PARAGRAPH_DIM};
use crate::features::stats::{extract_global_stats, NUM_STATS, STAT_NAMES};
use crate::features::words::{extract_word_features, is_missing, WordVectorTable, MISSING, WORD_AGGREGATIONS};
use crate::types::SemanticType;

pub const WORD_DIM: usize = 50;
pub const NUM_WORD_FEATURES: usize = 4 * WORD_DIM;
pub const NUM_FEATURES: usize = NUM_STATS + NUM_CHAR_FEATURES + NUM_WORD_FEATURES + 1 + PARAGRAPH_DIM;

pub const STATS_RANGE: Range<usize> = 0..NUM_STATS;
pub const CHARS_RANGE: Range<usize> = NUM_STATS..NUM_STATS + NUM_CHAR_FEATURES;
pub const WORDS_RANGE: Range<usize> = CHARS_RANGE.end..CHARS_RANGE.end + NUM_WORD_FEATURES;
pub const WORD_FLAG_INDEX: usize = WORDS_RANGE.end;
/// Word embeddings plus the extraction flag, as consumed by the word subnetwork.
pub const WORDS_WITH_FLAG_RANGE: Range<usize> = WORDS_RANGE.start..WORD_FLAG_INDEX + 1;
pub const PARAGRAPH_RANGE: Range<usize> = WORD_FLAG_INDEX + 1..NUM_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Stats,
    Chars,
    Words,
    WordsFlag,
    Paragraph,
}

impl FeatureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Stats => "stats",
            FeatureCategory::Chars => "chars",
            FeatureCategory::Words => "words",
            FeatureCategory::WordsFlag => "words_flag",
            FeatureCategory::Paragraph => "paragraph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    names: Vec<String>,
    categories: Vec<FeatureCategory>,
}

impl FeatureSchema {
    /// The canonical 1,588-slot schema. Built once and shared.
    pub fn canonical() -> &'static FeatureSchema {
        static SCHEMA: OnceLock<FeatureSchema> = OnceLock::new();
        SCHEMA.get_or_init(build_schema)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn category(&self, i: usize) -> FeatureCategory {
        self.categories[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Hex SHA-256 over the newline-joined names; stored in model containers.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn build_schema() -> FeatureSchema {
    let mut names = Vec::with_capacity(NUM_FEATURES);
    let mut categories = Vec::with_capacity(NUM_FEATURES);
    let mut push = |name: String, cat| {
        names.push(name);
        categories.push(cat);
    };
    for name in STAT_NAMES {
        push(name.to_string(), FeatureCategory::Stats);
    }
    for slot in 0..ROSTER_LEN {
        let label = roster_label(slot);
        for agg in AGGREGATIONS {
            push(format!("char_{label}_{agg}"), FeatureCategory::Chars);
        }
    }
    for agg in WORD_AGGREGATIONS {
        for d in 0..WORD_DIM {
            push(format!("word_{agg}_{d}"), FeatureCategory::Words);
        }
    }
    push("word_found".to_string(), FeatureCategory::WordsFlag);
    for d in 0..PARAGRAPH_DIM {
        push(format!("par_vec_{d}"), FeatureCategory::Paragraph);
    }
    FeatureSchema { names, categories }
}

/// Extracts the full feature vector of one column in schema order. Slots the
/// word table could not fill hold [`MISSING`].
pub fn assemble_features(
    values: &[String],
    word_table: &WordVectorTable,
    paragraph: &ParagraphVectorModel,
) -> Result<Vec<f64>> {
    if word_table.dimension() != WORD_DIM {
        return Err(Error::DimensionMismatch {
            expected: WORD_DIM,
            found: word_table.dimension(),
        });
    }
    if paragraph.dimension() != PARAGRAPH_DIM {
        return Err(Error::DimensionMismatch {
            expected: PARAGRAPH_DIM,
            found: paragraph.dimension(),
        });
    }
    let mut out = Vec::with_capacity(NUM_FEATURES);
    out.extend_from_slice(&extract_global_stats(values));
    out.extend(extract_char_features(values));
    let words = extract_word_features(values, word_table);
    out.extend(words.values);
    out.push(words.found);
    out.extend(paragraph.infer(values));
    debug_assert_eq!(out.len(), NUM_FEATURES);
    Ok(out)
}

/// Rows of features with optional labels, one row per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Array2<f64>,
    pub labels: Vec<Option<SemanticType>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Label indices, failing if any row is unlabeled.
    pub fn label_indices(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.map(SemanticType::index)
                    .ok_or_else(|| Error::InvalidArgument(format!("row {i} has no label")))
            })
            .collect()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }
}

/// Extracts features for every column in parallel. Row order follows the corpus.
pub fn extract_matrix(
    corpus: &Corpus,
    word_table: &WordVectorTable,
    paragraph: &ParagraphVectorModel,
) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = corpus
        .columns
        .par_iter()
        .map(|c: &Column| assemble_features(&c.values, word_table, paragraph))
        .collect::<Result<_>>()?;
    let mut features = Array2::zeros((rows.len(), NUM_FEATURES));
    for (mut dst, row) in features.axis_iter_mut(Axis(0)).zip(&rows) {
        dst.assign(&ArrayView1::from(row.as_slice()));
    }
    Ok(FeatureMatrix {
        features,
        labels: corpus.labels(),
    })
}

/// Per-feature means of the training matrix, ignoring missing slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub means: Vec<f64>,
}

pub fn fit_imputer(train: ArrayView2<'_, f64>) -> Result<Imputer> {
    if train.nrows() == 0 {
        return Err(Error::Empty("training matrix".into()));
    }
    let means = train
        .axis_iter(Axis(1))
        .map(|col| {
            let (sum, n) = col
                .iter()
                .filter(|v| !is_missing(**v))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    Ok(Imputer { means })
}

impl Imputer {
    pub fn apply(&self, vector: &mut [f64]) -> Result<()> {
        if vector.len() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: vector.len(),
            });
        }
        for (v, m) in vector.iter_mut().zip(&self.means) {
            if is_missing(*v) {
                *v = *m;
            }
        }
        Ok(())
    }

    pub fn apply_matrix(&self, matrix: &mut Array2<f64>) -> Result<()> {
        if matrix.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: matrix.ncols(),
            });
        }
        for mut row in matrix.axis_iter_mut(Axis(0)) {
            for (v, m) in row.iter_mut().zip(&self.means) {
                if is_missing(*v) {
                    *v = *m;
                }
            }
        }
        Ok(())
    }
}

/// Writes the matrix as CSV: schema names then a `label` column. Missing
/// slots become empty fields.
pub fn write_matrix_csv(matrix: &FeatureMatrix, writer: impl Write) -> Result<()> {
    let schema = FeatureSchema::canonical();
    if matrix.features.ncols() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            found: matrix.features.ncols(),
        });
    }
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(schema.names().iter().map(String::as_str).chain(["label"]))?;
    let mut record = Vec::with_capacity(schema.len() + 1);
    for (row, label) in matrix.features.axis_iter(Axis(0)).zip(&matrix.labels) {
        record.clear();
        record.extend(row.iter().map(|v| if is_missing(*v) { String::new() } else { v.to_string() }));
        record.push(label.map(|l| l.name().to_string()).unwrap_or_default());
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io("<feature matrix>", e))?;
    Ok(())
}

pub fn save_matrix_csv(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_csv(matrix, BufWriter::new(file))
}

pub fn read_matrix_csv(reader: impl Read) -> Result<FeatureMatrix> {
    let schema = FeatureSchema::canonical();
    let mut input = csv::Reader::from_reader(reader);
    let header = input.headers()?.clone();
    let expected = schema.names().iter().map(String::as_str).chain(["label"]);
    if header.len() != schema.len() + 1 || !header.iter().eq(expected) {
        return Err(Error::Parse {
            line: 1,
            message: "feature matrix header does not match the feature schema".into(),
        });
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in input.records().enumerate() {
        let line = i + 2;
        let record = record?;
        for field in record.iter().take(schema.len()) {
            let v = if field.is_empty() {
                MISSING
            } else {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse `{field}` as a float"),
                })?
            };
            data.push(v);
        }
        let label = &record[schema.len()];
        labels.push(if label.is_empty() {
            None
        } else {
            Some(SemanticType::from_name(label).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?)
        });
    }
    let features = Array2::from_shape_vec((labels.len(), schema.len()), data)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(FeatureMatrix { features, labels })
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_csv(BufReader::new(file))
}

/// Copy of a feature-family slice of one vector.
pub fn slice_family(vector: &[f64], range: Range<usize>) -> Array1<f64> {
    Array1::from(vector[range].to_vec())
}

// Keeps the char module's public constants and this module's ranges in step.
const _: () = assert!(CHARS_RANGE.end - CHARS_RANGE.start == chars::NUM_CHAR_FEATURES);
const _: () = assert!(NUM_FEATURES == 1588);
