mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sherlock_core::features::chars::extract_char_features;
use sherlock_core::features::stats::{extract_global_stats, STAT_NAMES};
use sherlock_core::pipeline::{FeatureCategory, FeatureSchema, NUM_FEATURES};

use common::{first_mismatch, oracle_chars, oracle_stats, random_column};

const GOLDEN_SCHEMA: &str = include_str!("golden/feature_schema.txt");

#[test]
fn schema_matches_golden_file() {
    let schema = FeatureSchema::canonical();
    let lines: Vec<&str> = GOLDEN_SCHEMA.lines().collect();
    assert_eq!(lines.len(), NUM_FEATURES);
    assert_eq!(schema.len(), NUM_FEATURES);
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), i);
        assert_eq!(fields[1], schema.category(i).as_str(), "category of {i}");
        assert_eq!(fields[2], schema.name(i), "name of {i}");
    }
}

#[test]
fn schema_partition() {
    let schema = FeatureSchema::canonical();
    let mut sizes = Vec::new();
    let mut current = schema.category(0);
    let mut run = 0;
    for i in 0..schema.len() {
        if schema.category(i) != current {
            sizes.push((current, run));
            current = schema.category(i);
            run = 0;
        }
        run += 1;
    }
    sizes.push((current, run));
    assert_eq!(
        sizes,
        [
            (FeatureCategory::Stats, 27),
            (FeatureCategory::Chars, 960),
            (FeatureCategory::Words, 200),
            (FeatureCategory::WordsFlag, 1),
            (FeatureCategory::Paragraph, 400),
        ]
    );
    let names: std::collections::HashSet<&String> = schema.names().iter().collect();
    assert_eq!(names.len(), NUM_FEATURES);
}

#[test]
fn stats_and_chars_match_oracle_on_fuzzed_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let column = random_column(&mut rng);
        let stats = extract_global_stats(&column);
        if let Some((i, got, want)) = first_mismatch(&stats, &oracle_stats(&column)) {
            panic!("case {case}: {} = {got}, oracle {want}, column {column:?}", STAT_NAMES[i]);
        }
        let chars = extract_char_features(&column);
        if let Some((i, got, want)) = first_mismatch(&chars, &oracle_chars(&column)) {
            panic!("case {case}: char feature {i} = {got}, oracle {want}, column {column:?}");
        }
    }
}

fn column_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[ -~éü\t]{0,12}|NULL|n/a|", 1..30)
}

proptest! {
    #[test]
    fn stats_are_permutation_invariant(column in column_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = column.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = extract_global_stats(&column);
        let b = extract_global_stats(&shuffled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(common::close(*x, *y));
        }
        let a = extract_char_features(&column);
        let b = extract_char_features(&shuffled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(common::close(*x, *y));
        }
    }

    #[test]
    fn entropy_bounded_by_log_n(column in column_strategy()) {
        let s = extract_global_stats(&column);
        let n = column.len() as f64;
        let distinct = column.iter().collect::<std::collections::HashSet<_>>().len();
        prop_assert!(s[1] <= n.ln() + 1e-12);
        if distinct == column.len() {
            prop_assert!((s[1] - n.ln()).abs() < 1e-12);
        } else {
            prop_assert!(s[1] < n.ln() - 1e-12);
        }
    }

    #[test]
    fn none_counts_partition_values(column in column_strategy()) {
        let s = extract_global_stats(&column);
        let none_count = s[14];
        prop_assert!(none_count >= 0.0 && none_count <= column.len() as f64);
        prop_assert!((s[13] * column.len() as f64 - none_count).abs() < 1e-9);
        for v in [s[2], s[3], s[4], s[13]] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for v in [s[15], s[16], s[26]] {
            prop_assert!(v == 0.0 || v == 1.0);
        }
    }
}

mod words {
    use std::collections::BTreeSet;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use sherlock_core::features::words::{extract_word_features, WordVectorTable};

    const VOCAB: [&str; 8] = ["hat", "cat", "city", "paris", "rome", "pass", "fail", "blue"];
    const DIM: usize = 3;

    fn table(rng: &mut ChaCha8Rng) -> WordVectorTable {
        let entries = VOCAB
            .iter()
            .map(|t| (t.to_string(), (0..DIM).map(|_| rng.random_range(-4..=4) as f64 / 4.0).collect()))
            .collect();
        WordVectorTable::from_entries(DIM, entries).unwrap()
    }

    fn oracle(values: &[String], table: &WordVectorTable) -> Option<Vec<f64>> {
        let mut vectors = Vec::new();
        for value in values {
            let tokens: BTreeSet<String> = value
                .split_whitespace()
                .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            let found: Vec<&[f64]> = tokens.iter().filter_map(|t| table.get(t)).collect();
            if !found.is_empty() {
                vectors.push((0..DIM).map(|d| found.iter().map(|v| v[d]).sum::<f64>() / found.len() as f64).collect::<Vec<_>>());
            }
        }
        if vectors.is_empty() {
            return None;
        }
        let n = vectors.len() as f64;
        let mut out = vec![0.0; 4 * DIM];
        for d in 0..DIM {
            let xs: Vec<f64> = vectors.iter().map(|v| v[d]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let mode = sorted
                .iter()
                .map(|x| (xs.iter().filter(|y| *y == x).count(), -x))
                .max_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
                .map(|(_, neg)| -neg)
                .unwrap();
            let k = sorted.len();
            let median = if k % 2 == 1 { sorted[k / 2] } else { (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0 };
            out[d] = mean;
            out[DIM + d] = mode;
            out[2 * DIM + d] = median;
            out[3 * DIM + d] = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        }
        Some(out)
    }

    #[test]
    fn word_features_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..300 {
            let t = table(&mut rng);
            let n = rng.random_range(1..12);
            let column: Vec<String> = (0..n)
                .map(|_| {
                    let words = rng.random_range(0..4);
                    (0..words)
                        .map(|_| match rng.random_range(0..5) {
                            0 => "zzqx".to_string(),
                            1 => format!("({}!", VOCAB[rng.random_range(0..VOCAB.len())].to_uppercase()),
                            _ => VOCAB[rng.random_range(0..VOCAB.len())].to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            let got = extract_word_features(&column, &t);
            match oracle(&column, &t) {
                None => {
                    assert_eq!(got.found, 0.0, "case {case}");
                    assert!(got.values.iter().all(|v| v.is_nan()));
                }
                Some(want) => {
                    assert_eq!(got.found, 1.0, "case {case}");
                    if let Some((i, g, w)) = super::common::first_mismatch(&got.values, &want) {
                        panic!("case {case}: slot {i} = {g}, oracle {w}, column {column:?}");
                    }
                }
            }
        }
    }
}
