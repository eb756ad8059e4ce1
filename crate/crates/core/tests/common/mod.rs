//! Brute-force reference implementations shared by the integration tests.
//! Written directly from the feature definitions, without reusing any
//! library helper.

#![allow(dead_code, clippy::manual_is_ascii_check)]

use std::collections::BTreeMap;

use rand::Rng;

pub const RELATIVE_TOLERANCE: f64 = 1e-9;

pub fn close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= RELATIVE_TOLERANCE * a.abs().max(b.abs()).max(1e-6)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn central(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    central(xs, 2)
}

fn skewness(xs: &[f64]) -> f64 {
    let v = variance(xs);
    if v == 0.0 {
        0.0
    } else {
        central(xs, 3) / v.powf(1.5)
    }
}

fn kurtosis(xs: &[f64]) -> f64 {
    let v = variance(xs);
    if v == 0.0 {
        0.0
    } else {
        central(xs, 4) / (v * v) - 3.0
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn mode(xs: &[f64]) -> f64 {
    let mut best = (0usize, f64::INFINITY);
    for &x in xs {
        let count = xs.iter().filter(|&&y| y == x).count();
        if count > best.0 || (count == best.0 && x < best.1) {
            best = (count, x);
        }
    }
    best.1
}

fn is_digit(c: char) -> bool {
    ('0'..='9').contains(&c)
}

fn is_alpha(c: char) -> bool {
    ('a'..='z').contains(&c) || ('A'..='Z').contains(&c)
}

fn word_count(v: &str) -> usize {
    v.split_whitespace().count()
}

fn is_none(v: &str) -> bool {
    matches!(v.trim().to_lowercase().as_str(), "" | "none" | "null" | "n/a" | "na" | "-")
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// The 27 global statistics, in schema order.
pub fn oracle_stats(values: &[String]) -> Vec<f64> {
    let n = values.len() as f64;
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *tally.entry(v).or_default() += 1;
    }
    let entropy: f64 = tally
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    let unique = values
        .iter()
        .filter(|v| values.iter().filter(|w| w == v).count() == 1)
        .count() as f64;

    let per_value = |f: &dyn Fn(&str) -> usize| -> Vec<f64> { values.iter().map(|v| f(v) as f64).collect() };
    let numeric = per_value(&|v| v.chars().filter(|&c| is_digit(c)).count());
    let alpha = per_value(&|v| v.chars().filter(|&c| is_alpha(c)).count());
    let special = per_value(&|v| {
        v.chars()
            .filter(|&c| !is_digit(c) && !is_alpha(c) && !c.is_whitespace())
            .count()
    });
    let words = per_value(&word_count);
    let lengths = per_value(&|v| v.chars().count());
    let nones = values.iter().filter(|v| is_none(v)).count() as f64;

    let mut out = vec![
        n,
        entropy,
        unique / n,
        numeric.iter().filter(|&&c| c > 0.0).count() as f64 / n,
        alpha.iter().filter(|&&c| c > 0.0).count() as f64 / n,
    ];
    for xs in [&numeric, &alpha, &special, &words] {
        out.push(mean(xs));
        out.push(variance(xs).sqrt());
    }
    out.extend([nones / n, nones, flag(nones == n), flag(nones > 0.0)]);
    out.extend([
        mean(&lengths),
        variance(&lengths).sqrt(),
        lengths.iter().sum(),
        lengths.iter().cloned().fold(f64::INFINITY, f64::min),
        lengths.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        median(&lengths),
        mode(&lengths),
        kurtosis(&lengths),
        skewness(&lengths),
        flag(lengths.iter().any(|&l| l > 0.0)),
    ]);
    out
}

/// The 960 character-distribution features: for each codepoint 32..=127,
/// any, all, mean, var, min, max, median, sum, kurtosis, skewness of its
/// per-value occurrence count.
pub fn oracle_chars(values: &[String]) -> Vec<f64> {
    let mut out = Vec::with_capacity(960);
    for code in 32u32..128 {
        let target = char::from_u32(code).unwrap();
        let counts: Vec<f64> = values
            .iter()
            .map(|v| v.chars().filter(|&c| c == target).count() as f64)
            .collect();
        if counts.iter().all(|&c| c == 0.0) {
            out.extend([0.0; 10]);
            continue;
        }
        out.extend([
            1.0,
            flag(counts.iter().all(|&c| c > 0.0)),
            mean(&counts),
            variance(&counts),
            counts.iter().cloned().fold(f64::INFINITY, f64::min),
            counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            median(&counts),
            counts.iter().sum(),
            kurtosis(&counts),
            skewness(&counts),
        ]);
    }
    out
}

const FRAGMENTS: [&str; 12] = [
    "NULL", " n/a ", "-", "None", "", "1999", "3.14", "é", "中文", "😀", "\t", "a b  c",
];

/// A fuzzed column: random lengths, printable ASCII, whitespace, non-ASCII,
/// missing-value markers and repeated values.
pub fn random_column(rng: &mut impl Rng) -> Vec<String> {
    let n = rng.random_range(1..=40);
    let mut values: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let roll = rng.random_range(0..10);
        let value = if roll == 0 && !values.is_empty() {
            values[rng.random_range(0..values.len())].clone()
        } else if roll == 1 {
            FRAGMENTS[rng.random_range(0..FRAGMENTS.len())].to_string()
        } else {
            let len = rng.random_range(0..25);
            (0..len)
                .map(|_| match rng.random_range(0..20) {
                    0 => FRAGMENTS[rng.random_range(5..FRAGMENTS.len())].chars().next().unwrap_or(' '),
                    1 => ' ',
                    _ => char::from_u32(rng.random_range(32..128)).unwrap(),
                })
                .collect()
        };
        values.push(value);
    }
    values
}

/// Index and values of the first feature that disagrees with the oracle.
pub fn first_mismatch(got: &[f64], want: &[f64]) -> Option<(usize, f64, f64)> {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .enumerate()
        .find(|(_, (g, w))| !close(**g, **w))
        .map(|(i, (g, w))| (i, *g, *w))
}
