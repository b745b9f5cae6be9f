//! Across-trial aggregation of best-epoch results.

use groundlab_core::harness::Metric;
use groundlab_core::sim::MetricsReport;

/// Best-epoch metrics of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestEpoch {
    pub epoch: usize,
    pub real: MetricsReport,
    pub sim: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub metric: Metric,
    pub mean_real: f64,
    /// `None` with a single trial.
    pub std_real: Option<f64>,
    pub mean_gap: f64,
    pub std_gap: Option<f64>,
    pub best_epoch_mean: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); `None` below two samples.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn summarize(method: &str, trials: &[BestEpoch]) -> Vec<SummaryRow> {
    let epoch_mean = mean(&trials.iter().map(|t| t.epoch as f64).collect::<Vec<_>>());
    Metric::ALL
        .iter()
        .map(|&metric| {
            let real: Vec<f64> = trials.iter().map(|t| metric.of(&t.real)).collect();
            let gap: Vec<f64> = trials
                .iter()
                .map(|t| metric.of(&t.real) - metric.of(&t.sim))
                .collect();
            SummaryRow {
                method: method.to_string(),
                metric,
                mean_real: mean(&real),
                std_real: sample_std(&real),
                mean_gap: mean(&gap),
                std_gap: sample_std(&gap),
                best_epoch_mean: epoch_mean,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_matches_hand_values() {
        assert_eq!(sample_std(&[1.0]), None);
        let s = sample_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        // sum of squares 32 over 7
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
