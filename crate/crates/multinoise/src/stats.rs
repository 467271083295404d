//! Small statistical helpers shared by estimators, experiments and tests.

/// log Σ exp(xᵢ), stable against overflow. Returns −∞ for an empty slice or
/// when every term is −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of a correlated series by batch means: the
/// series is cut into `n_batches` contiguous batches and the batch averages
/// are treated as approximately independent.
pub fn batch_means_stderr(series: &[f64], n_batches: usize) -> f64 {
    assert!(n_batches >= 2, "need at least two batches");
    let batch_len = series.len() / n_batches;
    assert!(batch_len >= 1, "series shorter than batch count");
    let batch_avgs: Vec<f64> = (0..n_batches)
        .map(|b| mean(&series[b * batch_len..(b + 1) * batch_len]))
        .collect();
    (variance(&batch_avgs) / n_batches as f64).sqrt()
}

/// Ordinary least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares slope through the origin.
pub fn ls_slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Median (averages the middle pair for even lengths). Input need not be
/// sorted.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_relative_eq!(
            log_sum_exp(&[0.0, 0.0]),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + std::f64::consts::LN_2);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn slope_of_a_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.5, 4.5, 6.5, 8.5];
        assert_relative_eq!(ls_slope(&x, &y), 2.0, epsilon = 1e-12);
        let y0 = [3.0, 6.0, 9.0, 12.0];
        assert_relative_eq!(ls_slope_through_origin(&x, &y0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn batch_means_on_iid_matches_classic_stderr() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let bm = batch_means_stderr(&xs, 50);
        let classic = (variance(&xs) / xs.len() as f64).sqrt();
        assert!((bm / classic) > 0.5 && (bm / classic) < 2.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
