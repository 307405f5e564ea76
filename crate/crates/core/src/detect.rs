//! MAP detectors over the Gaussian surrogates, and an exact-likelihood oracle
//! for single-cell scenarios.
//!
//! The edge detector of cell `c` does not know the other cells' bits; it
//! marginalizes them under the joint prior, which is the Bayes rule for the
//! per-cell test. The cloud detector decides among all `2^K` hypothesis
//! vectors from the quantized blocks of every EN.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chernoff::{cholesky, log_det};
use crate::error::{Error, Result};
use crate::model::{
    cloud_surrogate, GaussianSurrogate, HypothesisVector, SignalField, SystemConfig,
};
use crate::phy::ReceivedBlock;

/// Decision plus normalized log posteriors of every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    /// Edge: the decided bit. Cloud: the decided hypothesis index.
    pub decision: usize,
    pub log_posteriors: Vec<f64>,
}

impl DetectionOutcome {
    fn from_scores(scores: Vec<f64>) -> Self {
        let decision = argmax_lex(&scores);
        let norm = log_sum_exp(&scores);
        let log_posteriors = scores.iter().map(|s| s - norm).collect();
        Self {
            decision,
            log_posteriors,
        }
    }

    pub fn hypothesis(&self, cells: usize) -> HypothesisVector {
        HypothesisVector::from_index(self.decision, cells)
    }
}

/// Index of the largest score; the first one wins ties. NaN never wins.
pub fn argmax_lex(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-density of a Gaussian surrogate in the configured field: real normal
/// in real mode, circularly-symmetric complex normal in complex mode.
#[derive(Debug, Clone)]
pub struct LogDensity {
    mean: DVector<f64>,
    field: SignalField,
    shape: Shape,
    log_det: f64,
}

#[derive(Debug, Clone)]
enum Shape {
    Diagonal(Vec<f64>),
    /// Lower Cholesky factor.
    Dense(DMatrix<f64>),
}

impl LogDensity {
    pub fn new(g: &GaussianSurrogate, field: SignalField) -> Result<Self> {
        let (shape, log_det) = if g.diagonal_only {
            let var: Vec<f64> = g.cov.diagonal().iter().copied().collect();
            if let Some(&bad) = var.iter().find(|v| v.is_nan() || **v <= 0.0) {
                return Err(Error::NotPositiveDefinite {
                    alpha: f64::NAN,
                    dim: var.len(),
                    min_diagonal: bad,
                });
            }
            let ld = var.iter().map(|v| v.ln()).sum();
            (Shape::Diagonal(var), ld)
        } else {
            let chol = cholesky(&g.cov, f64::NAN)?;
            let ld = log_det(&chol);
            (Shape::Dense(chol.unpack()), ld)
        };
        Ok(Self {
            mean: g.mean.clone(),
            field,
            shape,
            log_det,
        })
    }

    fn quad(&self, r: &DVector<f64>) -> f64 {
        match &self.shape {
            Shape::Diagonal(var) => r.iter().zip(var).map(|(x, v)| x * x / v).sum(),
            Shape::Dense(l) => l
                .solve_lower_triangular(r)
                .expect("cholesky factor has a positive diagonal")
                .norm_squared(),
        }
    }

    pub fn log_pdf(&self, y: &[Complex64]) -> f64 {
        let d = self.mean.len() as f64;
        let re = DVector::from_iterator(
            y.len(),
            y.iter().zip(self.mean.iter()).map(|(v, m)| v.re - m),
        );
        match self.field {
            SignalField::Real => -0.5 * (d * (2.0 * PI).ln() + self.log_det + self.quad(&re)),
            SignalField::Complex => {
                let im = DVector::from_iterator(y.len(), y.iter().map(|v| v.im));
                -(d * PI.ln() + self.log_det + self.quad(&re) + self.quad(&im))
            }
        }
    }
}

/// Per-cell MAP detector with the interfering bits marginalized.
#[derive(Debug, Clone)]
pub struct EdgeDetector {
    cell: usize,
    /// For each own bit: `(log Pr(k), density under k)` over every full
    /// hypothesis `k` with that own bit.
    components: [Vec<(f64, LogDensity)>; 2],
}

impl EdgeDetector {
    pub fn new(config: &SystemConfig, cell: usize) -> Result<Self> {
        config.check()?;
        if cell >= config.cells {
            return Err(Error::InvalidArgument(format!(
                "cell index {cell} out of range for K = {}",
                config.cells
            )));
        }
        let mut components: [Vec<(f64, LogDensity)>; 2] = [Vec::new(), Vec::new()];
        for pattern in HypothesisVector::enumerate(config.cells - 1) {
            for bit in 0..2u8 {
                let k = HypothesisVector::splice(&pattern, cell, bit);
                let (mean, var) = config.edge_moments(cell, &k);
                let density =
                    LogDensity::new(&GaussianSurrogate::diagonal(mean, var), config.signal_field)?;
                components[bit as usize].push((config.prior.prob(&k).ln(), density));
            }
        }
        Ok(Self { cell, components })
    }

    pub fn detect(&self, blocks: &[&ReceivedBlock]) -> DetectionOutcome {
        debug_assert!(blocks.iter().all(|b| b.cell == self.cell));
        let scores = self
            .components
            .iter()
            .map(|comps| {
                let terms: Vec<f64> = comps
                    .iter()
                    .map(|(log_prior, density)| {
                        if *log_prior == f64::NEG_INFINITY {
                            return f64::NEG_INFINITY;
                        }
                        log_prior + blocks.iter().map(|b| density.log_pdf(&b.y)).sum::<f64>()
                    })
                    .collect();
                log_sum_exp(&terms)
            })
            .collect();
        DetectionOutcome::from_scores(scores)
    }
}

pub fn edge_map_detect(
    blocks: &[ReceivedBlock],
    config: &SystemConfig,
    cell: usize,
) -> Result<DetectionOutcome> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let refs: Vec<&ReceivedBlock> = blocks.iter().collect();
    if refs
        .iter()
        .any(|b| b.cell != cell || b.y.len() != config.alphabet)
    {
        return Err(Error::InvalidArgument(format!(
            "blocks must all belong to cell {cell} and have length {}",
            config.alphabet
        )));
    }
    Ok(EdgeDetector::new(config, cell)?.detect(&refs))
}

/// Joint MAP detector over all hypothesis vectors at the cloud.
#[derive(Debug, Clone)]
pub struct CloudDetector {
    cells: usize,
    hypotheses: Vec<(f64, LogDensity)>,
}

impl CloudDetector {
    pub fn new(config: &SystemConfig, sigma2_q: &[f64]) -> Result<Self> {
        let hypotheses = config
            .hypotheses()
            .map(|k| {
                let g = cloud_surrogate(config, &k, sigma2_q)?;
                Ok((
                    config.prior.prob(&k).ln(),
                    LogDensity::new(&g, config.signal_field)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            cells: config.cells,
            hypotheses,
        })
    }

    /// `intervals[l]` holds the `K` blocks of interval `l`, ordered by cell.
    pub fn detect(&self, intervals: &[Vec<ReceivedBlock>]) -> DetectionOutcome {
        let stacked: Vec<Vec<Complex64>> = intervals
            .iter()
            .map(|blocks| {
                debug_assert_eq!(blocks.len(), self.cells);
                blocks.iter().flat_map(|b| b.y.iter().copied()).collect()
            })
            .collect();
        let scores = self
            .hypotheses
            .iter()
            .map(|(log_prior, density)| {
                if *log_prior == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                log_prior + stacked.iter().map(|y| density.log_pdf(y)).sum::<f64>()
            })
            .collect();
        DetectionOutcome::from_scores(scores)
    }
}

pub fn cloud_map_detect(
    intervals: &[Vec<ReceivedBlock>],
    config: &SystemConfig,
    sigma2_q: &[f64],
) -> Result<DetectionOutcome> {
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("need at least one interval".into()));
    }
    let detector = CloudDetector::new(config, sigma2_q)?;
    if intervals.iter().any(|blocks| {
        blocks.len() != config.cells
            || blocks
                .iter()
                .enumerate()
                .any(|(c, b)| b.cell != c || b.y.len() != config.alphabet)
    }) {
        return Err(Error::InvalidArgument(
            "each interval needs one block per cell, ordered by cell".into(),
        ));
    }
    Ok(detector.detect(intervals))
}

/// Terms allowed in one exact-likelihood enumeration.
pub const MAX_EXACT_TERMS: u128 = 1_000_000;

/// Truncation leaving a Poisson tail far below 1e-12 for the means used here.
pub fn default_truncation(lambda: f64) -> usize {
    (lambda + 10.0 * lambda.sqrt() + 20.0).ceil() as usize
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn scalar_log_pdf(field: SignalField, y: Complex64, mean: f64, var: f64) -> f64 {
    match field {
        SignalField::Real => -0.5 * ((2.0 * PI * var).ln() + (y.re - mean).powi(2) / var),
        SignalField::Complex => -(PI * var).ln() - (y - mean).norm_sqr() / var,
    }
}

/// Exact log-likelihood of one single-cell block under bit `bit`, enumerating
/// the device count up to `n_max` and every split of it over the alphabet.
pub fn exact_small_lambda_likelihood(
    block: &ReceivedBlock,
    config: &SystemConfig,
    bit: u8,
    n_max: usize,
) -> Result<f64> {
    config.check()?;
    if config.cells != 1 {
        return Err(Error::InvalidArgument(format!(
            "exact likelihood is defined for K = 1, got {}",
            config.cells
        )));
    }
    let m_size = config.alphabet;
    if block.y.len() != m_size {
        return Err(Error::DimensionMismatch {
            left: block.y.len(),
            right: m_size,
        });
    }
    let terms = binomial((n_max + m_size - 1) as u128, (m_size - 1) as u128);
    if terms > MAX_EXACT_TERMS {
        return Err(Error::TooManyTerms {
            terms,
            limit: MAX_EXACT_TERMS,
        });
    }

    let p = config.dist(0, bit);
    let log_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let mut log_fact = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        log_fact[n] = log_fact[n - 1] + (n as f64).ln();
    }
    // log f(y(m) | n_m devices) for each symbol and count
    let noise = config.noise_variance();
    let entry: Vec<Vec<f64>> = (0..m_size)
        .map(|m| {
            (0..=n_max)
                .map(|n| {
                    let nf = n as f64;
                    scalar_log_pdf(
                        config.signal_field,
                        block.y[m],
                        nf * config.mu_h,
                        nf * config.sigma2_h + noise,
                    )
                })
                .collect()
        })
        .collect();

    let lam = config.lambda;
    let mut acc = LogAccumulator::default();
    let mut counts = vec![0usize; m_size];
    for n in 0..=n_max {
        let log_pois = n as f64 * lam.ln() - lam - log_fact[n];
        for_each_composition(n, &mut counts, 0, &mut |counts| {
            let mut t = log_pois + log_fact[n];
            for m in 0..m_size {
                let c = counts[m];
                if c > 0 {
                    if p[m] == 0.0 {
                        return;
                    }
                    t += c as f64 * log_p[m] - log_fact[c];
                }
                t += entry[m][c];
            }
            acc.add(t);
        });
    }
    Ok(acc.value())
}

fn for_each_composition<F: FnMut(&[usize])>(
    remaining: usize,
    counts: &mut [usize],
    pos: usize,
    f: &mut F,
) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        for_each_composition(remaining - c, counts, pos + 1, f);
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct LogAccumulator {
    max: f64,
    sum: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogAccumulator {
    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Single-cell MAP decision with the exact mixture likelihood.
pub fn exact_map_detect(
    blocks: &[ReceivedBlock],
    config: &SystemConfig,
    n_max: usize,
) -> Result<DetectionOutcome> {
    let scores = (0..2u8)
        .map(|bit| {
            let prior = config.prior.table()[bit as usize].ln();
            let ll = blocks
                .iter()
                .map(|b| exact_small_lambda_likelihood(b, config, bit, n_max))
                .sum::<Result<f64>>()?;
            Ok(prior + ll)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DetectionOutcome::from_scores(scores))
}
