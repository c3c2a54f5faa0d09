use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrialRecord;
use crate::algorithms::Algorithm;

/// Sizes with fewer trials are left out of the spread.
pub const MIN_TRIALS_FOR_SPREAD: u64 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    Quadratic,
    NLogN,
    NLogNOverLogLogN,
}

impl ScalingModel {
    pub const ALL: [ScalingModel; 3] = [
        ScalingModel::Quadratic,
        ScalingModel::NLogN,
        ScalingModel::NLogNOverLogLogN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalingModel::Quadratic => "n^2",
            ScalingModel::NLogN => "n log2 n",
            ScalingModel::NLogNOverLogLogN => "n log2 n / log2 log2 n",
        }
    }

    /// `None` where the model is not positive.
    pub fn eval(self, n: usize) -> Option<f64> {
        let x = n as f64;
        let g = match self {
            ScalingModel::Quadratic => x * x,
            ScalingModel::NLogN => x * x.log2(),
            ScalingModel::NLogNOverLogLogN => x * x.log2() / x.log2().log2(),
        };
        (g.is_finite() && g > 0.0).then_some(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub n: usize,
    pub trials: u64,
    pub truncated: u64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub sd: f64,
    /// 95% normal-approximation confidence interval of the mean.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub n: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: ScalingModel,
    /// `mean(n) / g(n)` for every size where `g` is defined.
    pub ratios: Vec<RatioPoint>,
    /// `max / min - 1` of the ratios over sizes with at least
    /// [`MIN_TRIALS_FOR_SPREAD`] trials; `None` with fewer than two such sizes.
    pub spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    /// Set when every record comes from the same algorithm.
    pub algorithm: Option<Algorithm>,
    pub sizes: Vec<SizeStats>,
    pub models: Vec<ModelFit>,
}

impl ScalingSummary {
    pub fn stats(&self, n: usize) -> Option<&SizeStats> {
        self.sizes.iter().find(|s| s.n == n)
    }

    pub fn fit(&self, model: ScalingModel) -> &ModelFit {
        self.models
            .iter()
            .find(|m| m.model == model)
            .expect("every model is fitted")
    }

    /// Plain-text table of the per-size statistics and model ratios.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(a) = self.algorithm {
            let _ = writeln!(out, "algorithm: {a}");
        }
        let _ = writeln!(
            out,
            "{:>8} {:>7} {:>5} {:>14} {:>12} {:>29}",
            "n", "trials", "trunc", "mean", "sd", "95% CI"
        );
        for s in &self.sizes {
            let _ = writeln!(
                out,
                "{:>8} {:>7} {:>5} {:>14.2} {:>12.2}   [{:>12.2}, {:>12.2}]",
                s.n, s.trials, s.truncated, s.mean, s.sd, s.ci_low, s.ci_high
            );
        }
        for fit in &self.models {
            let ratios: Vec<String> = fit
                .ratios
                .iter()
                .map(|r| format!("{}:{:.5}", r.n, r.ratio))
                .collect();
            let spread = fit
                .spread
                .map_or("n/a".to_string(), |s| format!("{:.2}%", 100.0 * s));
            let _ = writeln!(
                out,
                "mean / ({}): {}  spread {spread}",
                fit.model.name(),
                ratios.join("  ")
            );
        }
        out
    }
}

/// Aggregates records by size. Depends only on the multiset of records, not on
/// their order: sums are taken in exact integer arithmetic.
pub fn summarize(records: &[TrialRecord]) -> ScalingSummary {
    let mut by_n: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r);
    }
    let algorithm = match records.first() {
        Some(first) if records.iter().all(|r| r.algorithm == first.algorithm) => {
            Some(first.algorithm)
        }
        _ => None,
    };

    let sizes: Vec<SizeStats> = by_n
        .iter()
        .map(|(&n, rs)| {
            let m = rs.len() as u128;
            let sum: u128 = rs.iter().map(|r| r.queries as u128).sum();
            let sum_sq: u128 = rs.iter().map(|r| (r.queries as u128).pow(2)).sum();
            let mean = sum as f64 / m as f64;
            let sd = if m > 1 {
                ((m * sum_sq - sum * sum) as f64 / (m * (m - 1)) as f64).sqrt()
            } else {
                0.0
            };
            let half = 1.96 * sd / (m as f64).sqrt();
            SizeStats {
                n,
                trials: m as u64,
                truncated: rs.iter().filter(|r| r.truncated).count() as u64,
                mean,
                sd,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect();

    let models = ScalingModel::ALL
        .iter()
        .map(|&model| {
            let ratios: Vec<RatioPoint> = sizes
                .iter()
                .filter_map(|s| {
                    model.eval(s.n).map(|g| RatioPoint {
                        n: s.n,
                        ratio: s.mean / g,
                    })
                })
                .collect();
            let eligible: Vec<f64> = ratios
                .iter()
                .filter(|r| {
                    sizes
                        .iter()
                        .any(|s| s.n == r.n && s.trials >= MIN_TRIALS_FOR_SPREAD)
                })
                .map(|r| r.ratio)
                .collect();
            let spread = (eligible.len() >= 2).then(|| {
                let max = eligible.iter().copied().fold(f64::MIN, f64::max);
                let min = eligible.iter().copied().fold(f64::MAX, f64::min);
                max / min - 1.0
            });
            ModelFit {
                model,
                ratios,
                spread,
            }
        })
        .collect();

    ScalingSummary {
        algorithm,
        sizes,
        models,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, i: u64, q: u64) -> TrialRecord {
        TrialRecord {
            algorithm: Algorithm::BinarySearch,
            n,
            trial_index: i,
            seed: i,
            queries: q,
            truncated: false,
            wall_time_ms: 0.5,
        }
    }

    #[test]
    fn single_trial_means() {
        let s = summarize(&[rec(16, 0, 40), rec(64, 0, 300)]);
        assert_eq!(s.stats(16).unwrap().mean, 40.0);
        assert_eq!(s.stats(64).unwrap().mean, 300.0);
        assert_eq!(s.stats(64).unwrap().sd, 0.0);
        assert_eq!(s.fit(ScalingModel::NLogN).spread, None);
        assert_eq!(s.algorithm, Some(Algorithm::BinarySearch));
    }

    #[test]
    fn moments_and_interval() {
        let rs: Vec<_> = [2u64, 4, 4, 4, 5, 5, 7, 9]
            .iter()
            .enumerate()
            .map(|(i, &q)| rec(8, i as u64, q))
            .collect();
        let s = summarize(&rs);
        let st = s.stats(8).unwrap();
        assert_eq!(st.mean, 5.0);
        // sum of squared deviations 32, divided by m - 1 = 7
        assert!((st.sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!((st.ci_high - st.mean - 1.96 * st.sd / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spread_uses_only_well_sampled_sizes() {
        let mut rs = Vec::new();
        for i in 0..30 {
            rs.push(rec(16, i, 64));
            rs.push(rec(256, i, 256 * 8 * 2));
        }
        rs.push(rec(1024, 0, 1));
        let s = summarize(&rs);
        let fit = s.fit(ScalingModel::NLogN);
        assert_eq!(fit.ratios.len(), 3);
        // 64 / 64 = 1 and 4096 / 2048 = 2
        assert!((fit.spread.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_independent() {
        let rs: Vec<_> = (0..40)
            .map(|i| rec(32 + 32 * (i as usize % 3), i, 1000 + i * i * 37))
            .collect();
        let mut shuffled = rs.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        assert_eq!(summarize(&rs), summarize(&shuffled));
    }

    #[test]
    fn model_domains() {
        assert_eq!(ScalingModel::NLogN.eval(1), None);
        assert_eq!(ScalingModel::NLogNOverLogLogN.eval(2), None);
        assert_eq!(ScalingModel::NLogNOverLogLogN.eval(16), Some(32.0));
        assert_eq!(ScalingModel::Quadratic.eval(3), Some(9.0));
    }
}
