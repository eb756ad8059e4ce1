//! Global statistical features of a column.
//!
//! The roster is 27 features. The "any/all" pair over value lengths collapses
//! into a single flag (some value has non-zero length), which is why the
//! length block holds ten entries rather than eleven.

use std::collections::HashMap;

use crate::moments::{moments, sort_f64, sorted_median, sorted_mode};

pub const NUM_STATS: usize = 27;

pub const STAT_NAMES: [&str; NUM_STATS] = [
    "n_values",
    "col_entropy",
    "frac_unique",
    "frac_numcells",
    "frac_alphacells",
    "num_char_mean",
    "num_char_std",
    "alpha_char_mean",
    "alpha_char_std",
    "special_char_mean",
    "special_char_std",
    "word_count_mean",
    "word_count_std",
    "none_fraction",
    "none_count",
    "none_only",
    "none_any",
    "length_mean",
    "length_std",
    "length_sum",
    "length_min",
    "length_max",
    "length_median",
    "length_mode",
    "length_kurtosis",
    "length_skewness",
    "length_any_nonzero",
];

/// Cell contents (after trimming and lower-casing) treated as a missing value.
pub const NONE_TOKENS: [&str; 6] = ["", "none", "null", "n/a", "na", "-"];

pub fn is_none_value(value: &str) -> bool {
    let folded = value.trim().to_lowercase();
    NONE_TOKENS.contains(&folded.as_str())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct CharCounts {
    numeric: u32,
    alpha: u32,
    special: u32,
    words: u32,
    length: u32,
}

fn count_chars(value: &str) -> CharCounts {
    let mut counts = CharCounts::default();
    let mut in_word = false;
    for c in value.chars() {
        counts.length += 1;
        if c.is_whitespace() {
            in_word = false;
            continue;
        }
        if !in_word {
            counts.words += 1;
            in_word = true;
        }
        if c.is_ascii_digit() {
            counts.numeric += 1;
        } else if c.is_ascii_alphabetic() {
            counts.alpha += 1;
        } else {
            counts.special += 1;
        }
    }
    counts
}

fn bool_f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Computes the 27 global statistics in [`STAT_NAMES`] order. An empty
/// column yields all zeros.
pub fn extract_global_stats(values: &[String]) -> [f64; NUM_STATS] {
    let mut out = [0.0; NUM_STATS];
    let n = values.len();
    if n == 0 {
        return out;
    }
    let nf = n as f64;

    let mut occurrences: HashMap<&str, usize> = HashMap::with_capacity(n);
    for v in values {
        *occurrences.entry(v.as_str()).or_insert(0) += 1;
    }
    let mut multiplicities: Vec<usize> = occurrences.values().copied().collect();
    multiplicities.sort_unstable();
    let entropy = -multiplicities
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.ln()
        })
        .sum::<f64>();
    let singletons = multiplicities.iter().filter(|&&c| c == 1).count();

    let counts: Vec<CharCounts> = values.iter().map(|v| count_chars(v)).collect();
    let column = |f: fn(&CharCounts) -> u32| -> Vec<f64> { counts.iter().map(|c| f(c) as f64).collect() };
    let numeric = column(|c| c.numeric);
    let alpha = column(|c| c.alpha);
    let special = column(|c| c.special);
    let words = column(|c| c.words);
    let mut lengths = column(|c| c.length);

    let none_count = values.iter().filter(|v| is_none_value(v)).count();

    out[0] = nf;
    out[1] = entropy.max(0.0);
    out[2] = singletons as f64 / nf;
    out[3] = counts.iter().filter(|c| c.numeric > 0).count() as f64 / nf;
    out[4] = counts.iter().filter(|c| c.alpha > 0).count() as f64 / nf;
    for (slot, sample) in [(5, &numeric), (7, &alpha), (9, &special), (11, &words)] {
        let m = moments(sample);
        out[slot] = m.mean;
        out[slot + 1] = m.variance.sqrt();
    }
    out[13] = none_count as f64 / nf;
    out[14] = none_count as f64;
    out[15] = bool_f(none_count == n);
    out[16] = bool_f(none_count > 0);

    let m = moments(&lengths);
    let sum: f64 = lengths.iter().sum();
    sort_f64(&mut lengths);
    out[17] = m.mean;
    out[18] = m.variance.sqrt();
    out[19] = sum;
    out[20] = lengths[0];
    out[21] = lengths[n - 1];
    out[22] = sorted_median(&lengths);
    out[23] = sorted_mode(&lengths);
    out[24] = m.kurtosis;
    out[25] = m.skewness;
    out[26] = bool_f(lengths[n - 1] > 0.0);
    out
}
