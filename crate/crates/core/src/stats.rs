//! Small numeric helpers shared across modules.

/// Arithmetic mean. Zero for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero when fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Population standard deviation (n denominator). Zero for an empty slice.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / values.len() as f64).sqrt()
}

/// Percentile with linear interpolation between order statistics.
///
/// `sorted` must be ascending and nonempty; `p` is in percent, clamped to [0, 100].
pub fn percentile_interpolated(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let p = p.clamp(0.0, 100.0);
    let h = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Nearest-rank percentile: smallest value with at least p percent of the
/// sample at or below it. With two values, the 2.5th and 97.5th percentiles
/// return the first and second value, so a 95% interval spans both.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let p = p.clamp(0.0, 100.0);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(n - 1)]
}

/// Median via linear interpolation (average of middle two for even counts).
pub fn median(sorted: &[f64]) -> f64 {
    percentile_interpolated(sorted, 50.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std_basics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[2.0, 4.0]), std::f64::consts::SQRT_2);
        assert_eq!(sample_std(&[5.0]), 0.0);
        assert_eq!(population_std(&[2.0, 4.0]), 1.0);
    }

    #[test]
    fn interpolated_percentile_midpoints() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_interpolated(&v, 0.0), 1.0);
        assert_eq!(percentile_interpolated(&v, 100.0), 4.0);
        assert_eq!(median(&v), 2.5);
        assert_eq!(percentile_interpolated(&v, 50.0), 2.5);
    }

    #[test]
    fn nearest_rank_two_values_spans_both() {
        let v = [3.0, 7.0];
        assert_eq!(percentile_nearest_rank(&v, 2.5), 3.0);
        assert_eq!(percentile_nearest_rank(&v, 97.5), 7.0);
    }

    #[test]
    fn nearest_rank_identical_values_zero_width() {
        let v = [4.0, 4.0, 4.0];
        assert_eq!(percentile_nearest_rank(&v, 2.5), 4.0);
        assert_eq!(percentile_nearest_rank(&v, 97.5), 4.0);
    }
}
