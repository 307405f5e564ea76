//! Monte Carlo estimation of the joint detection error probability and
//! empirical exponents.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::detect::{exact_map_detect, CloudDetector, EdgeDetector};
use crate::error::{Error, Result};
use crate::exponent::{cloud_exponent, edge_exponent, ExponentReport};
use crate::model::{HypothesisVector, SystemConfig};
use crate::phy::{quantize_block, ReceivedBlock, Sampler};
use crate::quantization::solve_all;
use crate::rng::{Purpose, RngSeed};

pub const MIN_TRIALS: usize = 100;
/// Points with fewer error events are left out of the exponent fit.
pub const MIN_ERROR_EVENTS: u64 = 10;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionMode {
    Edge,
    Cloud,
}

impl DetectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectionMode::Edge => "edge",
            DetectionMode::Cloud => "cloud",
        }
    }
}

impl fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(DetectionMode::Edge),
            "cloud" => Ok(DetectionMode::Cloud),
            other => Err(Error::InvalidArgument(format!(
                "unknown detection mode '{other}' (expected edge or cloud)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProbEstimate {
    pub collections: usize,
    pub trials: usize,
    pub errors: u64,
    pub p_hat: f64,
    /// 95% Wilson score interval.
    pub wilson_interval: (f64, f64),
}

pub fn wilson_interval(errors: u64, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

fn draw_truth(prior: &WeightedIndex<f64>, cells: usize, seed: RngSeed) -> HypothesisVector {
    let idx = prior.sample(&mut seed.stream(Purpose::Truth, 0, 0));
    HypothesisVector::from_index(idx, cells)
}

fn prior_sampler(config: &SystemConfig) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(config.prior.table().iter().copied())
        .map_err(|e| Error::InvalidArgument(format!("prior table: {e}")))
}

enum Detector {
    Edge(Vec<EdgeDetector>),
    Cloud {
        detector: CloudDetector,
        sigma2_q: Vec<f64>,
    },
}

/// Joint error frequency over `trials` independent trials of `collections`
/// intervals each. Trial `t` draws everything from `RngSeed::new(seed, t)`,
/// so runs with different `collections` share their leading intervals.
pub fn estimate_error_prob(
    config: &SystemConfig,
    collections: usize,
    trials: usize,
    mode: DetectionMode,
    seed: u64,
) -> Result<ErrorProbEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if collections == 0 {
        return Err(Error::InvalidArgument(
            "need at least one collection interval".into(),
        ));
    }
    let sampler = Sampler::new(config)?;
    let prior = prior_sampler(config)?;
    let detector = match mode {
        DetectionMode::Edge => Detector::Edge(
            (0..config.cells)
                .map(|c| EdgeDetector::new(config, c))
                .collect::<Result<_>>()?,
        ),
        DetectionMode::Cloud => {
            let sigma2_q: Vec<f64> = solve_all(config)?.iter().map(|s| s.sigma2_q).collect();
            Detector::Cloud {
                detector: CloudDetector::new(config, &sigma2_q)?,
                sigma2_q,
            }
        }
    };

    let errors: u64 = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = RngSeed::new(seed, t);
            let truth = draw_truth(&prior, config.cells, seed);
            let intervals: Vec<Vec<ReceivedBlock>> = (0..collections as u64)
                .map(|l| sampler.interval(&truth, l, seed))
                .collect();
            let wrong = match &detector {
                Detector::Edge(dets) => dets.iter().enumerate().any(|(c, det)| {
                    let blocks: Vec<&ReceivedBlock> = intervals.iter().map(|b| &b[c]).collect();
                    det.detect(&blocks).decision != truth.bit(c) as usize
                }),
                Detector::Cloud { detector, sigma2_q } => {
                    let quantized: Vec<Vec<ReceivedBlock>> = intervals
                        .iter()
                        .map(|blocks| {
                            blocks
                                .iter()
                                .map(|b| {
                                    quantize_block(b, sigma2_q[b.cell], config.signal_field, seed)
                                        .expect("solver returns positive noise")
                                })
                                .collect()
                        })
                        .collect();
                    detector.detect(&quantized).decision != truth.index()
                }
            };
            wrong as u64
        })
        .sum();

    Ok(ErrorProbEstimate {
        collections,
        trials,
        errors,
        p_hat: errors as f64 / trials as f64,
        wilson_interval: wilson_interval(errors, trials),
    })
}

/// Analytical exponent matching a detection mode.
pub fn analytic_exponent(config: &SystemConfig, mode: DetectionMode) -> Result<ExponentReport> {
    match mode {
        DetectionMode::Edge => edge_exponent(config),
        DetectionMode::Cloud => cloud_exponent(config),
    }
}

/// Least-squares slope of `-ln p` against `L` (with intercept) over the
/// points with `p` strictly between 0 and 1.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| *p > 0.0 && *p < 1.0)
        .map(|&(l, p)| (l, -p.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientPoints {
            usable: usable.len(),
            needed: 3,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "fit points share one L value".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// [`fit_exponent`] over simulation results, skipping points with fewer than
/// [`MIN_ERROR_EVENTS`] errors.
pub fn fit_exponent_from_estimates(estimates: &[ErrorProbEstimate]) -> Result<f64> {
    let points: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.errors >= MIN_ERROR_EVENTS)
        .map(|e| (e.collections as f64, e.p_hat))
        .collect();
    fit_exponent(&points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agreement {
    pub agree: usize,
    pub trials: usize,
}

impl Agreement {
    pub fn rate(&self) -> f64 {
        self.agree as f64 / self.trials as f64
    }
}

/// How often the surrogate edge detector and the exact-likelihood detector
/// make the same decision on identical single-cell realizations.
pub fn oracle_agreement(
    config: &SystemConfig,
    collections: usize,
    trials: usize,
    seed: u64,
    n_max: usize,
) -> Result<Agreement> {
    if config.cells != 1 {
        return Err(Error::InvalidArgument(
            "oracle agreement needs K = 1".into(),
        ));
    }
    let sampler = Sampler::new(config)?;
    let prior = prior_sampler(config)?;
    let surrogate = EdgeDetector::new(config, 0)?;
    let agree = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = RngSeed::new(seed, t);
            let truth = draw_truth(&prior, 1, seed);
            let blocks: Vec<ReceivedBlock> = (0..collections as u64)
                .map(|l| sampler.interval(&truth, l, seed).swap_remove(0))
                .collect();
            let refs: Vec<&ReceivedBlock> = blocks.iter().collect();
            let exact = exact_map_detect(&blocks, config, n_max)?;
            Ok((surrogate.detect(&refs).decision == exact.decision) as usize)
        })
        .sum::<Result<usize>>()?;
    Ok(Agreement { agree, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellModel, QoIPrior};
    use crate::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(0, 100), (3, 100), (50, 100), (100, 100), (7, 100_000)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(
                lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0,
                "{e}/{n}: [{lo}, {hi}]"
            );
        }
        let (lo, hi) = wilson_interval(50, 100);
        // textbook value for 50/100
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn exact_exponential_gives_exact_slope() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&l: &f64| (l, (-0.3 * l).exp()))
            .collect();
        assert!((fit_exponent(&pts).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn noisy_exponential_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0]
                .iter()
                .map(|&l: &f64| (l, (-0.3 * l).exp() * rng.random_range(0.9..1.1)))
                .collect();
            let s = fit_exponent(&pts).unwrap();
            assert!((s - 0.3).abs() < 0.05, "{s}");
        }
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(matches!(
            fit_exponent(&[(1.0, 0.1), (2.0, 0.0), (3.0, 1.0), (4.0, 0.01)]),
            Err(Error::InsufficientPoints { usable: 2, .. })
        ));
    }

    #[test]
    fn too_few_trials_rejected() {
        let cfg = presets::separated_single_cell();
        assert!(estimate_error_prob(&cfg, 1, 99, DetectionMode::Edge, 0).is_err());
    }

    #[test]
    fn uninformative_two_cells_fail_three_quarters() {
        let mut cfg = presets::fig2_config(0.0);
        cfg.prior = QoIPrior::from_rho(0.5).unwrap();
        for cm in &mut cfg.measurement {
            *cm = CellModel {
                p0: vec![0.5, 0.5],
                p1: vec![0.5, 0.5],
            };
        }
        let est = estimate_error_prob(&cfg, 3, 4000, DetectionMode::Edge, 1).unwrap();
        let (lo, hi) = est.wilson_interval;
        assert!(lo <= 0.75 && 0.75 <= hi, "{est:?}");
    }

    #[test]
    fn uninformative_single_cell_is_a_coin_flip() {
        let mut cfg = presets::separated_single_cell();
        cfg.measurement[0] = CellModel {
            p0: vec![0.3, 0.7],
            p1: vec![0.3, 0.7],
        };
        let est = estimate_error_prob(&cfg, 2, 4000, DetectionMode::Edge, 2).unwrap();
        let (lo, hi) = est.wilson_interval;
        assert!(lo <= 0.5 && 0.5 <= hi, "{est:?}");
    }

    #[test]
    fn estimates_are_deterministic() {
        let cfg = presets::fig3_config(2.0);
        for mode in [DetectionMode::Edge, DetectionMode::Cloud] {
            let a = estimate_error_prob(&cfg, 2, 300, mode, 17).unwrap();
            let b = estimate_error_prob(&cfg, 2, 300, mode, 17).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn more_collections_do_not_hurt() {
        let cfg = presets::separated_single_cell();
        let mut prev: Option<ErrorProbEstimate> = None;
        for l in [1, 2, 5, 10] {
            let est = estimate_error_prob(&cfg, l, 20_000, DetectionMode::Edge, 3).unwrap();
            if let Some(p) = prev {
                assert!(
                    est.wilson_interval.0 <= p.wilson_interval.1,
                    "{p:?} -> {est:?}"
                );
            }
            prev = Some(est);
        }
    }

    #[test]
    fn separated_model_is_error_free_at_long_horizons() {
        let cfg = presets::separated_single_cell();
        let est = estimate_error_prob(&cfg, 50, 10_000, DetectionMode::Edge, 4).unwrap();
        assert_eq!(est.errors, 0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "edge".parse::<DetectionMode>().unwrap(),
            DetectionMode::Edge
        );
        assert_eq!(
            "cloud".parse::<DetectionMode>().unwrap(),
            DetectionMode::Cloud
        );
        assert!("fog".parse::<DetectionMode>().is_err());
    }
}
