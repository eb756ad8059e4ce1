//! Character-distribution features: per-value counts of each roster
//! character, aggregated over the column with ten statistics.

use crate::moments::{moments, sort_f64, sorted_median};

/// Roster is the 96 codepoints 32 (space) through 127 (DEL).
pub const ROSTER_START: u32 = 32;
pub const ROSTER_LEN: usize = 96;
pub const AGGREGATIONS: [&str; 10] = [
    "any", "all", "mean", "var", "min", "max", "median", "sum", "kurtosis", "skewness",
];
pub const NUM_CHAR_FEATURES: usize = ROSTER_LEN * AGGREGATIONS.len();

pub fn roster_char(slot: usize) -> char {
    char::from_u32(ROSTER_START + slot as u32).expect("roster is ASCII")
}

/// Label used in feature names: the character itself for ASCII letters and
/// digits, otherwise `x` plus two hex digits.
pub fn roster_label(slot: usize) -> String {
    let c = roster_char(slot);
    if c.is_ascii_alphanumeric() {
        c.to_string()
    } else {
        format!("x{:02x}", c as u32)
    }
}

/// Returns 960 features, character-major then aggregation in
/// [`AGGREGATIONS`] order. An empty column yields all zeros.
pub fn extract_char_features(values: &[String]) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; NUM_CHAR_FEATURES];
    if n == 0 {
        return out;
    }
    // counts[slot * n + value_index]
    let mut counts = vec![0u32; ROSTER_LEN * n];
    let mut present = [false; ROSTER_LEN];
    for (i, value) in values.iter().enumerate() {
        for b in value.bytes() {
            // Multi-byte UTF-8 sequences only contain bytes >= 0x80.
            let code = b as u32;
            if (ROSTER_START..ROSTER_START + ROSTER_LEN as u32).contains(&code) {
                let slot = (code - ROSTER_START) as usize;
                counts[slot * n + i] += 1;
                present[slot] = true;
            }
        }
    }
    let mut sample = vec![0.0; n];
    for slot in 0..ROSTER_LEN {
        if !present[slot] {
            continue;
        }
        let row = &counts[slot * n..(slot + 1) * n];
        for (s, &c) in sample.iter_mut().zip(row) {
            *s = c as f64;
        }
        let m = moments(&sample);
        let sum: f64 = sample.iter().sum();
        let all = row.iter().all(|&c| c > 0);
        sort_f64(&mut sample);
        let base = slot * AGGREGATIONS.len();
        out[base] = 1.0;
        out[base + 1] = if all { 1.0 } else { 0.0 };
        out[base + 2] = m.mean;
        out[base + 3] = m.variance;
        out[base + 4] = sample[0];
        out[base + 5] = sample[n - 1];
        out[base + 6] = sorted_median(&sample);
        out[base + 7] = sum;
        out[base + 8] = m.kurtosis;
        out[base + 9] = m.skewness;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    fn block(features: &[f64], c: char) -> &[f64] {
        let slot = c as usize - ROSTER_START as usize;
        &features[slot * 10..slot * 10 + 10]
    }

    #[test]
    fn comma_two_point_sample() {
        let f = extract_char_features(&col(&["a,b", "c"]));
        // any, all, mean, var, min, max, median, sum, kurtosis, skewness
        assert_eq!(block(&f, ','), &[1.0, 0.0, 0.5, 0.25, 0.0, 1.0, 0.5, 1.0, -2.0, 0.0]);
    }

    #[test]
    fn constant_counts() {
        let f = extract_char_features(&col(&["--", "--"]));
        assert_eq!(block(&f, '-'), &[1.0, 1.0, 2.0, 0.0, 2.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn absent_character_is_all_zero() {
        let f = extract_char_features(&col(&["abc", "xyz"]));
        assert!(block(&f, 'Z').iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roster_bounds() {
        assert_eq!(roster_char(0), ' ');
        assert_eq!(roster_char(95), '\u{7f}');
        assert_eq!(roster_label(33), "A");
        assert_eq!(roster_label(12), "x2c");
        let f = extract_char_features(&col(&["é ü"]));
        assert_eq!(block(&f, ' ')[7], 1.0);
        assert_eq!(f.iter().filter(|&&v| v != 0.0).count(), 7);
    }
}
