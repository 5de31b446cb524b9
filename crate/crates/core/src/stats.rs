//! Small statistics helpers shared by the Monte-Carlo oracles.

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, count: 0 };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return Self { mean, std_error: 0.0, count: 1 };
        }
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self { mean, std_error: (var / n as f64).sqrt(), count: n }
    }
}

/// Event frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub events: u64,
    pub trials: u64,
}

impl ProbabilityEstimate {
    pub fn from_counts(events: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { probability: 0.0, std_error: 0.0, events, trials };
        }
        let p = events as f64 / trials as f64;
        Self {
            probability: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            events,
            trials,
        }
    }
}

/// Kolmogorov–Smirnov distance between the empirical cdf of `samples` and
/// a reference cdf. Sorts `samples` in place.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((f - lo).abs()).max((hi - f).abs());
    }
    worst
}

/// Empirical cdf of sorted data evaluated at `x` (fraction of samples `<= x`).
pub fn empirical_cdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Quantile of sorted data with nearest-rank interpolation.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    sorted[idx]
}
