//! Descriptive statistics over small samples, shared by the feature extractors.
//!
//! Conventions: population variance; skewness `m3 / m2^1.5`; excess kurtosis
//! `m4 / m2^2 - 3`; skewness and kurtosis are 0.0 when the variance is 0.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Central moments computed with a two-pass algorithm. `values` must be non-empty.
pub fn moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Moments {
            mean,
            variance: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        };
    }
    Moments {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Median of an already sorted, non-empty slice (mean of the two middle
/// elements for even lengths).
pub fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Most frequent value of an already sorted, non-empty slice; ties go to the
/// smallest value.
pub fn sorted_mode(sorted: &[f64]) -> f64 {
    let mut best = sorted[0];
    let mut best_run = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_run {
            best_run = j - i;
            best = sorted[i];
        }
        i = j;
    }
    best
}

pub fn sort_f64(values: &mut [f64]) {
    values.sort_by(f64::total_cmp);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_sample() {
        let m = moments(&[1.0, 0.0]);
        assert_eq!(m.mean, 0.5);
        assert_eq!(m.variance, 0.25);
        assert_eq!(m.skewness, 0.0);
        assert_eq!(m.kurtosis, -2.0);
    }

    #[test]
    fn constant_sample_has_zero_shape_moments() {
        let m = moments(&[3.0; 5]);
        assert_eq!((m.variance, m.skewness, m.kurtosis), (0.0, 0.0, 0.0));
    }

    #[test]
    fn median_and_mode() {
        assert_eq!(sorted_median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sorted_median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(sorted_mode(&[1.0, 1.0, 2.0, 2.0, 3.0]), 1.0);
        assert_eq!(sorted_mode(&[1.0, 2.0, 2.0]), 2.0);
    }
}
