//! Pretrained word-vector table and the word-embedding column features.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::moments::{sort_f64, sorted_median, sorted_mode};

/// Placeholder written into slots that could not be computed. Replaced by
/// the imputer before any model sees the vector.
pub const MISSING: f64 = f64::NAN;

pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Number of per-component aggregations: mean, mode, median, variance.
pub const WORD_AGGREGATIONS: [&str; 4] = ["mean", "mode", "median", "var"];

/// Token to dense vector map. Tokens are stored case-folded.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dimension: usize,
    index: HashMap<String, usize>,
    // Row-major, `dimension` floats per token.
    vectors: Vec<f64>,
}

impl WordVectorTable {
    /// Builds a table from (token, vector) pairs; the first occurrence of a
    /// duplicate token wins.
    pub fn from_entries(dimension: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("word vector dimension must be positive".into()));
        }
        let mut table = WordVectorTable {
            dimension,
            index: HashMap::with_capacity(entries.len()),
            vectors: Vec::with_capacity(entries.len() * dimension),
        };
        for (token, vector) in entries {
            if vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: vector.len(),
                });
            }
            table.insert(token.to_lowercase(), &vector);
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: &[f64]) {
        if token.is_empty() || self.index.contains_key(&token) {
            return;
        }
        self.index.insert(token, self.index.len());
        self.vectors.extend_from_slice(vector);
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dimension..(i + 1) * self.dimension])
    }

    /// Writes the table in the text format read by [`read_word_vectors`],
    /// in insertion order. Floats use the shortest exact representation.
    pub fn write_text(&self, mut writer: impl Write) -> Result<()> {
        let mut tokens: Vec<(&String, &usize)> = self.index.iter().collect();
        tokens.sort_by_key(|(_, &i)| i);
        for (token, &i) in tokens {
            let mut line = token.clone();
            for v in &self.vectors[i * self.dimension..(i + 1) * self.dimension] {
                line.push(' ');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            writer
                .write_all(line.as_bytes())
                .map_err(|e| Error::io("<word vectors>", e))?;
        }
        Ok(())
    }
}

/// Loads a whitespace-separated text table: a token followed by its floats
/// on each line. The dimension is fixed by the first non-empty line.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectorTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file))
}

pub fn read_word_vectors(reader: impl BufRead) -> Result<WordVectorTable> {
    let mut table: Option<WordVectorTable> = None;
    let mut buf = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        buf.clear();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse `{field}` as a float"),
            })?;
            buf.push(v);
        }
        let table = match &mut table {
            Some(t) => t,
            None => {
                if buf.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "word vector has no components".into(),
                    });
                }
                table.insert(WordVectorTable {
                    dimension: buf.len(),
                    index: HashMap::new(),
                    vectors: Vec::new(),
                })
            }
        };
        if buf.len() != table.dimension {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {} components, found {}",
                    table.dimension,
                    buf.len()
                ),
            });
        }
        table.insert(token.to_lowercase(), &buf);
    }
    table.ok_or_else(|| Error::Empty("word vector file".into()))
}

/// Splits a cell into case-folded tokens: whitespace separated, with leading
/// and trailing ASCII punctuation removed. Empty tokens are dropped.
pub fn tokenize(value: &str) -> Vec<String> {
    value
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingFeatures {
    /// `4 * dimension` values: mean, mode, median, variance blocks.
    pub values: Vec<f64>,
    /// 1.0 when at least one cell produced a vector.
    pub found: f64,
}

/// Mean of the distinct in-vocabulary token vectors of one cell, if any.
pub fn value_vector(value: &str, table: &WordVectorTable) -> Option<Vec<f64>> {
    let mut tokens = tokenize(value);
    tokens.sort_unstable();
    tokens.dedup();
    let mut acc = vec![0.0; table.dimension()];
    let mut found = 0usize;
    for token in &tokens {
        if let Some(v) = table.get(token) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        return None;
    }
    for a in &mut acc {
        *a /= found as f64;
    }
    Some(acc)
}

pub fn extract_word_features(values: &[String], table: &WordVectorTable) -> WordEmbeddingFeatures {
    let dim = table.dimension();
    let vectors: Vec<Vec<f64>> = values.iter().filter_map(|v| value_vector(v, table)).collect();
    if vectors.is_empty() {
        return WordEmbeddingFeatures {
            values: vec![MISSING; 4 * dim],
            found: 0.0,
        };
    }
    let n = vectors.len() as f64;
    let mut out = vec![0.0; 4 * dim];
    let mut component = vec![0.0; vectors.len()];
    for d in 0..dim {
        for (c, v) in component.iter_mut().zip(&vectors) {
            *c = v[d];
        }
        let mean = component.iter().sum::<f64>() / n;
        let var = component.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        sort_f64(&mut component);
        out[d] = mean;
        out[dim + d] = sorted_mode(&component);
        out[2 * dim + d] = sorted_median(&component);
        out[3 * dim + d] = var;
    }
    WordEmbeddingFeatures {
        values: out,
        found: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> WordVectorTable {
        read_word_vectors("hat 0.1 0.2\ncat 0.3 0.4".as_bytes()).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "hat 0.1 0.2\ncat 0.3 0.4\n");
        assert_eq!(read_word_vectors(buf.as_slice()).unwrap(), t);
    }

    fn col(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_table() {
        let t = table();
        assert_eq!((t.len(), t.dimension()), (2, 2));
        assert_eq!(t.get("cat"), Some(&[0.3, 0.4][..]));
    }

    #[test]
    fn parse_errors() {
        let err = read_word_vectors("a 1 2\nb 3 4\nc 5 6 7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_word_vectors("a 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(read_word_vectors("".as_bytes()).is_err());
    }

    #[test]
    fn duplicates_keep_first_and_fold_case() {
        let t = read_word_vectors("Hat 1 1\nhat 2 2\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("hat"), Some(&[1.0, 1.0][..]));
    }

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("  New-York, (USA)! "), vec!["new-york", "usa"]);
        assert!(tokenize("... !!").is_empty());
    }

    #[test]
    fn constant_column() {
        let f = extract_word_features(&col(&["hat", "hat"]), &table());
        assert_eq!(f.found, 1.0);
        assert_eq!(f.values, vec![0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn multi_word_value_is_mean_of_distinct_tokens() {
        let v = value_vector("hat cat", &table()).unwrap();
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 0.3).abs() < 1e-15);
        assert_eq!(value_vector("hat hat cat", &table()), value_vector("cat hat", &table()));
    }

    #[test]
    fn out_of_vocabulary() {
        let f = extract_word_features(&col(&["zzqx9"]), &table());
        assert_eq!(f.found, 0.0);
        assert!(f.values.iter().all(|v| is_missing(*v)));
    }

    #[test]
    fn median_within_bounds() {
        let f = extract_word_features(&col(&["hat", "cat", "cat hat", "dog"]), &table());
        // Value vectors: (0.1, 0.2), (0.3, 0.4), (0.2, 0.3); "dog" is skipped.
        assert!((f.values[4] - 0.2).abs() < 1e-15);
        assert!((f.values[5] - 0.3).abs() < 1e-15);
        assert!(f.values.iter().all(|v| v.is_finite()));
    }
}
