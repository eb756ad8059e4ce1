//! Dictionary and regular-expression baselines that classify a column by
//! majority vote over sampled values.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::types::{Prediction, SemanticType, NUM_TYPES};

pub const DEFAULT_DICTIONARY_SIZE: usize = 1000;
pub const DEFAULT_SAMPLE_SIZE: usize = 1000;

/// Most frequent training values per type.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryModel {
    entries: BTreeMap<SemanticType, Vec<(String, u64)>>,
    index: HashMap<String, Vec<SemanticType>>,
}

impl DictionaryModel {
    pub fn from_entries(entries: BTreeMap<SemanticType, Vec<(String, u64)>>) -> Self {
        let mut index: HashMap<String, Vec<SemanticType>> = HashMap::new();
        for (&ty, values) in &entries {
            for (value, _) in values {
                let types = index.entry(value.clone()).or_default();
                if !types.contains(&ty) {
                    types.push(ty);
                }
            }
        }
        DictionaryModel { entries, index }
    }

    pub fn entries(&self) -> &BTreeMap<SemanticType, Vec<(String, u64)>> {
        &self.entries
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn types_of(&self, value: &str) -> &[SemanticType] {
        self.index.get(value).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(ty, values)| (ty.name().to_string(), serde_json::json!(values)))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: BTreeMap<String, Vec<(String, u64)>> = serde_json::from_value(value.clone())?;
        let mut entries = BTreeMap::new();
        for (name, values) in parsed {
            let ty = SemanticType::from_name(&name)?;
            entries.insert(ty, values);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// Counts exact value strings per type over all labeled columns and keeps
/// the `k` most frequent, ties broken lexicographically.
pub fn build_dictionary(corpus: &Corpus, k: usize) -> DictionaryModel {
    let mut counts: BTreeMap<SemanticType, HashMap<&str, u64>> = BTreeMap::new();
    for column in &corpus.columns {
        if let Some(label) = column.label {
            let per_type = counts.entry(label).or_default();
            for value in &column.values {
                *per_type.entry(value.as_str()).or_default() += 1;
            }
        }
    }
    let entries = counts
        .into_iter()
        .map(|(ty, per_type)| {
            let mut values: Vec<(String, u64)> = per_type.into_iter().map(|(v, c)| (v.to_string(), c)).collect();
            values.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            values.truncate(k);
            (ty, values)
        })
        .collect();
    DictionaryModel::from_entries(entries)
}

/// Indices of the values that vote: all of them when the column fits the
/// sample size, otherwise a seeded sample without replacement.
fn sampled(n: usize, sample_size: usize, seed: u64) -> Vec<usize> {
    if n <= sample_size {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, n, sample_size).into_vec()
    }
}

fn tally(votes: &[f64]) -> Prediction {
    let best = argmax(votes);
    if votes[best] == 0.0 {
        Prediction::Abstain
    } else {
        Prediction::Type(SemanticType::from_index(best).expect("vote index within vocabulary"))
    }
}

/// Vote counts per type index, exposed for inspection and testing.
pub fn dictionary_votes(dict: &DictionaryModel, values: &[String], sample_size: usize, seed: u64) -> Vec<f64> {
    let mut votes = vec![0.0; NUM_TYPES];
    for i in sampled(values.len(), sample_size, seed) {
        for ty in dict.types_of(&values[i]) {
            votes[ty.index()] += 1.0;
        }
    }
    votes
}

pub fn predict_dictionary(dict: &DictionaryModel, values: &[String], sample_size: usize, seed: u64) -> Prediction {
    tally(&dictionary_votes(dict, values, sample_size, seed))
}

/// One anchored pattern per type.
#[derive(Debug, Clone)]
pub struct RegexRuleSet {
    patterns: BTreeMap<SemanticType, String>,
    compiled: Vec<(SemanticType, Regex)>,
}

impl RegexRuleSet {
    pub fn new(patterns: BTreeMap<SemanticType, String>) -> Result<Self> {
        let compiled = patterns
            .iter()
            .map(|(&ty, pattern)| {
                Regex::new(&format!("^(?:{pattern})$"))
                    .map(|re| (ty, re))
                    .map_err(|e| Error::InvalidPattern {
                        type_name: ty.name().to_string(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(RegexRuleSet { patterns, compiled })
    }

    pub fn empty() -> Self {
        RegexRuleSet {
            patterns: BTreeMap::new(),
            compiled: Vec::new(),
        }
    }

    pub fn patterns(&self) -> &BTreeMap<SemanticType, String> {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.compiled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compiled.is_empty()
    }

    /// Types whose pattern spans the whole value.
    pub fn matching_types<'a>(&'a self, value: &'a str) -> impl Iterator<Item = SemanticType> + 'a {
        self.compiled.iter().filter(move |(_, re)| re.is_match(value)).map(|(ty, _)| *ty)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, String> = serde_json::from_str(text)?;
        let mut patterns = BTreeMap::new();
        for (name, pattern) in raw {
            let ty = SemanticType::from_name(&name)?;
            patterns.insert(ty, pattern);
        }
        Self::new(patterns)
    }

    pub fn read(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<rules>", e))?;
        Self::from_json_str(&text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let named: BTreeMap<&str, &str> = self.patterns.iter().map(|(t, p)| (t.name(), p.as_str())).collect();
        serde_json::to_string_pretty(&named).expect("string map serializes")
    }

    pub fn write(&self, mut writer: impl Write) -> Result<()> {
        writer
            .write_all(self.to_json_string().as_bytes())
            .map_err(|e| Error::io("<rules>", e))
    }
}

pub fn regex_votes(rules: &RegexRuleSet, values: &[String], sample_size: usize, seed: u64) -> Vec<f64> {
    let mut votes = vec![0.0; NUM_TYPES];
    for i in sampled(values.len(), sample_size, seed) {
        for ty in rules.matching_types(&values[i]) {
            votes[ty.index()] += 1.0;
        }
    }
    votes
}

pub fn predict_regex(rules: &RegexRuleSet, values: &[String], sample_size: usize, seed: u64) -> Prediction {
    tally(&regex_votes(rules, values, sample_size, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Column;

    fn ty(name: &str) -> SemanticType {
        SemanticType::from_name(name).unwrap()
    }

    fn strings(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn top_k_with_lexical_ties() {
        let mut values = vec!["a"; 5];
        values.extend(["b"; 3]);
        values.extend(["c"; 3]);
        let corpus = Corpus {
            columns: vec![Column::new(strings(&values), Some(ty("city")))],
        };
        let dict = build_dictionary(&corpus, 2);
        assert_eq!(dict.entries()[&ty("city")], vec![("a".to_string(), 5), ("b".to_string(), 3)]);
        let all = build_dictionary(&corpus, 1000);
        assert_eq!(all.num_pairs(), 3);
    }

    #[test]
    fn dictionary_votes_and_abstain() {
        let mut entries = BTreeMap::new();
        entries.insert(ty("city"), vec![("paris".to_string(), 1)]);
        entries.insert(ty("country"), vec![("france".to_string(), 1), ("paris".to_string(), 1)]);
        let dict = DictionaryModel::from_entries(entries);
        let col = strings(&["paris", "paris", "france", "france", "france"]);
        let votes = dictionary_votes(&dict, &col, 1000, 0);
        assert_eq!(votes[ty("country").index()], 5.0);
        assert_eq!(votes[ty("city").index()], 2.0);
        assert_eq!(predict_dictionary(&dict, &col, 1000, 0), Prediction::Type(ty("country")));
        assert_eq!(predict_dictionary(&dict, &strings(&["x"]), 1000, 0), Prediction::Abstain);

        let tie = strings(&["paris"]);
        assert_eq!(predict_dictionary(&dict, &tie, 1000, 0), Prediction::Type(ty("city")));
    }

    #[test]
    fn dictionary_json_round_trip() {
        let corpus = Corpus {
            columns: vec![Column::new(strings(&["x", "y", "x"]), Some(ty("name")))],
        };
        let dict = build_dictionary(&corpus, 10);
        assert_eq!(DictionaryModel::from_json(&dict.to_json()).unwrap(), dict);
    }

    #[test]
    fn regex_full_match() {
        let mut p = BTreeMap::new();
        p.insert(ty("year"), "[0-9]{4}".to_string());
        p.insert(ty("code"), "[0-9]+".to_string());
        let rules = RegexRuleSet::new(p).unwrap();
        let votes = regex_votes(&rules, &strings(&["1990", "12345", "x1990"]), 1000, 0);
        assert_eq!(votes[ty("year").index()], 1.0);
        assert_eq!(votes[ty("code").index()], 2.0);
        assert_eq!(
            predict_regex(&rules, &strings(&["1990", "2001"]), 1000, 0),
            Prediction::Type(ty("code"))
        );
        assert_eq!(predict_regex(&RegexRuleSet::empty(), &strings(&["1990"]), 1000, 0), Prediction::Abstain);
    }

    #[test]
    fn invalid_pattern_names_type() {
        let err = RegexRuleSet::from_json_str(r#"{"year": "[0-9"}"#).unwrap_err();
        assert!(err.to_string().contains("year"), "{err}");
    }

    #[test]
    fn sampling_caps_votes() {
        let mut p = BTreeMap::new();
        p.insert(ty("year"), ".*".to_string());
        let rules = RegexRuleSet::new(p).unwrap();
        let col: Vec<String> = (0..50).map(|i| i.to_string()).collect();
        let votes = regex_votes(&rules, &col, 10, 3);
        assert_eq!(votes.iter().sum::<f64>(), 10.0);
        assert_eq!(regex_votes(&rules, &col, 10, 3), votes);
    }
}
