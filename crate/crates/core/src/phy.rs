//! Monte Carlo generation of matched-filter outputs.
//!
//! In each collection interval every cell has a Poisson number of active
//! devices. Each device measures a symbol from its cell's distribution and
//! contributes a channel gain to that symbol's entry at every edge node: its
//! own EN through an in-cell channel `H`, the others through independent
//! cross-cell channels `G`. Thermal noise with variance `1/SNR` per entry is
//! added last.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_hypothesis, HypothesisVector, SignalField, SystemConfig};
use crate::rng::{Purpose, RngSeed};

/// One EN's `M`-vector for one interval. In real mode the imaginary parts are
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub cell: usize,
    pub interval: u64,
    pub y: Vec<Complex64>,
}

/// Gaussian draw in the configured field. Complex mode splits the variance
/// evenly between real and imaginary parts and puts the mean on the real axis.
#[derive(Debug, Clone, Copy)]
struct FieldNormal {
    re: Normal<f64>,
    im: Option<Normal<f64>>,
}

impl FieldNormal {
    fn new(field: SignalField, mean: f64, var: f64) -> Result<Self> {
        let bad = |_| Error::InvalidArgument(format!("invalid gaussian (mean {mean}, var {var})"));
        Ok(match field {
            SignalField::Real => Self {
                re: Normal::new(mean, var.sqrt()).map_err(bad)?,
                im: None,
            },
            SignalField::Complex => {
                let sd = (0.5 * var).sqrt();
                Self {
                    re: Normal::new(mean, sd).map_err(bad)?,
                    im: Some(Normal::new(0.0, sd).map_err(bad)?),
                }
            }
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let re = self.re.sample(rng);
        let im = self.im.map_or(0.0, |d| d.sample(rng));
        Complex64::new(re, im)
    }
}

/// Pre-built distributions for repeated sampling from one configuration.
#[derive(Debug, Clone)]
pub struct Sampler {
    cells: usize,
    alphabet: usize,
    activity: Poisson<f64>,
    measurement: Vec<[WeightedIndex<f64>; 2]>,
    in_cell: FieldNormal,
    cross_cell: FieldNormal,
    noise: FieldNormal,
}

impl Sampler {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.check()?;
        let field = config.signal_field;
        let weighted = |p: &[f64]| {
            WeightedIndex::new(p.iter().copied())
                .map_err(|e| Error::InvalidArgument(format!("measurement distribution: {e}")))
        };
        let measurement = config
            .measurement
            .iter()
            .map(|cm| Ok([weighted(&cm.p0)?, weighted(&cm.p1)?]))
            .collect::<Result<_>>()?;
        Ok(Self {
            cells: config.cells,
            alphabet: config.alphabet,
            activity: Poisson::new(config.lambda)
                .map_err(|e| Error::InvalidArgument(format!("poisson mean: {e}")))?,
            measurement,
            in_cell: FieldNormal::new(field, config.mu_h, config.sigma2_h)?,
            cross_cell: FieldNormal::new(field, config.mu_g, config.sigma2_g)?,
            noise: FieldNormal::new(field, 0.0, config.noise_variance())?,
        })
    }

    /// Received blocks of all `K` ENs for interval `interval` of a trial.
    pub fn interval(
        &self,
        truth: &HypothesisVector,
        interval: u64,
        seed: RngSeed,
    ) -> Vec<ReceivedBlock> {
        let mut y = vec![vec![Complex64::new(0.0, 0.0); self.alphabet]; self.cells];
        for origin in 0..self.cells {
            let cell = origin as u64;
            let n = self
                .activity
                .sample(&mut seed.stream(Purpose::Activation, interval, cell))
                as u64;
            let mut symbols = seed.stream(Purpose::Measurement, interval, cell);
            let mut channels = seed.stream(Purpose::Channel, interval, cell);
            let dist = &self.measurement[origin][truth.bit(origin) as usize];
            for _ in 0..n {
                let m = dist.sample(&mut symbols);
                for (en, row) in y.iter_mut().enumerate() {
                    let gain = if en == origin {
                        self.in_cell.sample(&mut channels)
                    } else {
                        self.cross_cell.sample(&mut channels)
                    };
                    row[m] += gain;
                }
            }
        }
        y.into_iter()
            .enumerate()
            .map(|(en, mut row)| {
                let mut rng = seed.stream(Purpose::Noise, interval, en as u64);
                for v in &mut row {
                    *v += self.noise.sample(&mut rng);
                }
                ReceivedBlock {
                    cell: en,
                    interval,
                    y: row,
                }
            })
            .collect()
    }

    /// Per-symbol device counts of one cell in one interval, drawn from the
    /// same streams as [`Sampler::interval`].
    pub fn symbol_counts(
        &self,
        truth: &HypothesisVector,
        origin: usize,
        interval: u64,
        seed: RngSeed,
    ) -> Vec<u64> {
        let cell = origin as u64;
        let n = self
            .activity
            .sample(&mut seed.stream(Purpose::Activation, interval, cell)) as u64;
        let mut symbols = seed.stream(Purpose::Measurement, interval, cell);
        let dist = &self.measurement[origin][truth.bit(origin) as usize];
        let mut counts = vec![0; self.alphabet];
        for _ in 0..n {
            counts[dist.sample(&mut symbols)] += 1;
        }
        counts
    }
}

pub fn sample_interval(
    config: &SystemConfig,
    truth: &HypothesisVector,
    interval: u64,
    seed: RngSeed,
) -> Result<Vec<ReceivedBlock>> {
    check_hypothesis(config, truth)?;
    Ok(Sampler::new(config)?.interval(truth, interval, seed))
}

/// Adds i.i.d. zero-mean quantization noise of variance `sigma2_q` per entry.
pub fn quantize_block(
    block: &ReceivedBlock,
    sigma2_q: f64,
    field: SignalField,
    seed: RngSeed,
) -> Result<ReceivedBlock> {
    if !(sigma2_q > 0.0 && sigma2_q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "quantization noise variance must be positive, got {sigma2_q}"
        )));
    }
    let dist = FieldNormal::new(field, 0.0, sigma2_q)?;
    let mut rng = seed.stream(Purpose::Quantization, block.interval, block.cell as u64);
    Ok(ReceivedBlock {
        cell: block.cell,
        interval: block.interval,
        y: block.y.iter().map(|v| v + dist.sample(&mut rng)).collect(),
    })
}

/// Sample mean and covariance of the stacked `K*M` received vector.
///
/// The covariance is `Re E[(y - mean)(y - mean)^*]`, which is the ordinary
/// covariance in real mode. The reported mean is the real part.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub samples: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl MomentEstimate {
    /// Block of cell `cell`'s mean.
    pub fn cell_mean(&self, cell: usize, alphabet: usize) -> Vec<f64> {
        self.mean
            .rows(cell * alphabet, alphabet)
            .iter()
            .copied()
            .collect()
    }

    /// Standard error of the mean of stacked entry `i`.
    pub fn mean_std_error(&self, i: usize) -> f64 {
        (self.cov[(i, i)] / self.samples as f64).sqrt()
    }
}

struct Accum {
    n: usize,
    mean: Vec<Complex64>,
    m2: DMatrix<f64>,
}

impl Accum {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![Complex64::new(0.0, 0.0); dim],
            m2: DMatrix::zeros(dim, dim),
        }
    }

    fn push(&mut self, y: &[Complex64]) {
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<Complex64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for (i, (yi, mi)) in y.iter().zip(&self.mean).enumerate() {
            let after = yi - mi;
            for (j, dj) in delta.iter().enumerate() {
                self.m2[(i, j)] += (after * dj.conj()).re;
            }
        }
    }

    fn merge(mut self, other: Accum) -> Accum {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<Complex64> = other
            .mean
            .iter()
            .zip(&self.mean)
            .map(|(b, a)| b - a)
            .collect();
        let dim = delta.len();
        for i in 0..dim {
            for j in 0..dim {
                self.m2[(i, j)] += other.m2[(i, j)] + (delta[i] * delta[j].conj()).re * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * (nb / n);
        }
        self.n += other.n;
        self
    }
}

const MOMENT_CHUNK: usize = 4096;

pub fn empirical_moments(
    config: &SystemConfig,
    truth: &HypothesisVector,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    check_hypothesis(config, truth)?;
    let sampler = Sampler::new(config)?;
    let dim = config.cells * config.alphabet;
    let chunks = samples.div_ceil(MOMENT_CHUNK);
    let partial: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = Accum::new(dim);
            let start = chunk * MOMENT_CHUNK;
            let end = (start + MOMENT_CHUNK).min(samples);
            let mut stacked = Vec::with_capacity(dim);
            for l in start..end {
                stacked.clear();
                for block in sampler.interval(truth, l as u64, RngSeed::new(seed, 0)) {
                    stacked.extend_from_slice(&block.y);
                }
                acc.push(&stacked);
            }
            acc
        })
        .collect();
    let acc = partial.into_iter().fold(Accum::new(dim), Accum::merge);
    let n = acc.n as f64;
    Ok(MomentEstimate {
        samples: acc.n,
        mean: DVector::from_iterator(dim, acc.mean.iter().map(|c| c.re)),
        cov: acc.m2 / (n - 1.0),
    })
}

/// Exact mean and covariance of the stacked received vector produced by the
/// sampler (compound Poisson sums), for validating the simulation itself.
pub fn compound_poisson_moments(
    config: &SystemConfig,
    truth: &HypothesisVector,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    config.check()?;
    check_hypothesis(config, truth)?;
    let (k, m_size) = (config.cells, config.alphabet);
    let lam = config.lambda;
    let h2 = config.sigma2_h + config.mu_h * config.mu_h;
    let g2 = config.sigma2_g + config.mu_g * config.mu_g;
    let dim = k * m_size;
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for m in 0..m_size {
        let rate: Vec<f64> = (0..k)
            .map(|c| lam * config.dist(c, truth.bit(c))[m])
            .collect();
        for en in 0..k {
            let i = en * m_size + m;
            for (origin, r) in rate.iter().enumerate() {
                if origin == en {
                    mean[i] += r * config.mu_h;
                    cov[(i, i)] += r * h2;
                } else {
                    mean[i] += r * config.mu_g;
                    cov[(i, i)] += r * g2;
                }
            }
            cov[(i, i)] += config.noise_variance();
            for other in (0..k).filter(|&o| o != en) {
                let j = other * m_size + m;
                cov[(i, j)] = rate
                    .iter()
                    .enumerate()
                    .map(|(origin, r)| {
                        if origin == en || origin == other {
                            r * config.mu_h * config.mu_g
                        } else {
                            r * config.mu_g * config.mu_g
                        }
                    })
                    .sum();
            }
        }
    }
    Ok((mean, cov))
}

/// Debug dump: one CSV row per block with the real parts, followed by the
/// imaginary parts in complex mode.
pub fn write_trace<W: Write>(
    out: &mut csv::Writer<W>,
    trial: u64,
    blocks: &[ReceivedBlock],
    field: SignalField,
) -> Result<()> {
    for b in blocks {
        let mut row = vec![
            trial.to_string(),
            b.interval.to_string(),
            (b.cell + 1).to_string(),
        ];
        row.extend(b.y.iter().map(|v| v.re.to_string()));
        if field == SignalField::Complex {
            row.extend(b.y.iter().map(|v| v.im.to_string()));
        }
        out.write_record(&row)?;
    }
    Ok(())
}

pub fn trace_header(alphabet: usize, field: SignalField) -> Vec<String> {
    let mut h = vec!["trial".to_string(), "interval".into(), "cell".into()];
    h.extend((1..=alphabet).map(|m| format!("y{m}_re")));
    if field == SignalField::Complex {
        h.extend((1..=alphabet).map(|m| format!("y{m}_im")));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::edge_surrogate;
    use crate::presets;

    fn hv(bits: &[u8]) -> HypothesisVector {
        HypothesisVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = presets::fig2_config(1.0);
        let a = sample_interval(&cfg, &hv(&[0, 1]), 5, RngSeed::new(11, 2)).unwrap();
        let b = sample_interval(&cfg, &hv(&[0, 1]), 5, RngSeed::new(11, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_interval(&cfg, &hv(&[0, 1]), 6, RngSeed::new(11, 2)).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 2);
        assert!(a
            .iter()
            .all(|b| b.y.len() == 2 && b.y.iter().all(|v| v.im == 0.0)));
    }

    #[test]
    fn noise_only_when_no_devices() {
        let mut cfg = presets::separated_single_cell();
        cfg.lambda = 1e-12;
        let est = empirical_moments(&cfg, &hv(&[0]), 40_000, 3).unwrap();
        let n = cfg.noise_variance();
        for m in 0..2 {
            assert!(est.mean[m].abs() < 4.0 * est.mean_std_error(m));
            assert!((est.cov[(m, m)] - n).abs() < 0.03 * n);
        }
    }

    #[test]
    fn mean_matches_surrogate_mean() {
        let cfg = presets::separated_single_cell();
        let est = empirical_moments(&cfg, &hv(&[0]), 100_000, 9).unwrap();
        let g = edge_surrogate(&cfg, 0, &hv(&[0])).unwrap();
        for m in 0..2 {
            let se = est.mean_std_error(m);
            assert!(
                (est.mean[m] - g.mean[m]).abs() < 3.0 * se,
                "m={m}: {} vs {}",
                est.mean[m],
                g.mean[m]
            );
        }
    }

    #[test]
    fn moments_match_compound_poisson_in_both_fields() {
        for field in [SignalField::Real, SignalField::Complex] {
            let mut cfg = presets::fig2_config(0.7);
            cfg.mu_g = 0.4;
            cfg.signal_field = field;
            let truth = hv(&[1, 0]);
            let est = empirical_moments(&cfg, &truth, 60_000, 21).unwrap();
            let (mean, cov) = compound_poisson_moments(&cfg, &truth).unwrap();
            for i in 0..4 {
                assert!((est.mean[i] - mean[i]).abs() < 4.0 * est.mean_std_error(i));
                for j in 0..4 {
                    let scale = (cov[(i, i)] * cov[(j, j)]).sqrt();
                    assert!(
                        (est.cov[(i, j)] - cov[(i, j)]).abs() < 0.04 * scale,
                        "{field:?} ({i},{j}): {} vs {}",
                        est.cov[(i, j)],
                        cov[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn rayleigh_surrogate_is_exact_in_second_moments() {
        // with zero-mean in-cell channels the compound-Poisson variance equals
        // the surrogate variance
        let mut cfg = presets::separated_single_cell();
        cfg.mu_h = 0.0;
        cfg.lambda = 50.0;
        let truth = hv(&[1]);
        let est = empirical_moments(&cfg, &truth, 100_000, 4).unwrap();
        let g = edge_surrogate(&cfg, 0, &truth).unwrap();
        for m in 0..2 {
            let rel = (est.cov[(m, m)] - g.cov[(m, m)]).abs() / g.cov[(m, m)];
            assert!(rel < 0.05, "m={m} rel={rel}");
        }
    }

    #[test]
    fn cross_cell_uncorrelated_without_cross_mean() {
        let cfg = presets::fig2_config(2.0);
        let est = empirical_moments(&cfg, &hv(&[0, 1]), 50_000, 5).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                let se = (est.cov[(i, i)] * est.cov[(j, j)] / est.samples as f64).sqrt();
                assert!(
                    est.cov[(i, j)].abs() < 4.0 * se,
                    "({i},{j}) = {}",
                    est.cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn cell_block_independent_of_other_truth_without_cross_channel() {
        let cfg = presets::fig2_config(0.0);
        let a = empirical_moments(&cfg, &hv(&[0, 0]), 40_000, 6).unwrap();
        let b = empirical_moments(&cfg, &hv(&[0, 1]), 40_000, 7).unwrap();
        for m in 0..2 {
            let se = (a.mean_std_error(m).powi(2) + b.mean_std_error(m).powi(2)).sqrt();
            assert!((a.mean[m] - b.mean[m]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn symbol_counts_are_thinned_poisson() {
        let cfg = presets::separated_single_cell();
        let sampler = Sampler::new(&cfg).unwrap();
        let truth = hv(&[0]);
        let n = 50_000;
        let counts: Vec<Vec<u64>> = (0..n)
            .map(|l| sampler.symbol_counts(&truth, 0, l, RngSeed::new(1, 0)))
            .collect();
        for m in 0..2 {
            let xs: Vec<f64> = counts.iter().map(|c| c[m] as f64).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let expect = cfg.lambda * cfg.dist(0, 0)[m];
            assert!((mean - expect).abs() < 4.0 * (expect / n as f64).sqrt());
            // dispersion index of a Poisson count is 1; its sampling sd is about sqrt(2/n)
            assert!(
                (var / mean - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt() + 0.01,
                "m={m} D={}",
                var / mean
            );
        }
    }

    #[test]
    fn quantization_adds_requested_variance() {
        let cfg = presets::separated_single_cell();
        let sampler = Sampler::new(&cfg).unwrap();
        let truth = hv(&[0]);
        let q = 0.7;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for l in 0..n {
            let seed = RngSeed::new(2, l);
            let block = &sampler.interval(&truth, 0, seed)[0];
            let out = quantize_block(block, q, cfg.signal_field, seed).unwrap();
            let d = out.y[0].re - block.y[0].re;
            sum += d;
            sum2 += d * d;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((var - q).abs() < 0.02 * q, "{var}");
    }

    #[test]
    fn quantization_edge_cases() {
        let cfg = presets::separated_single_cell();
        let block = &sample_interval(&cfg, &hv(&[1]), 0, RngSeed::new(3, 0)).unwrap()[0];
        let tiny = quantize_block(block, 1e-12, cfg.signal_field, RngSeed::new(3, 0)).unwrap();
        for (a, b) in tiny.y.iter().zip(&block.y) {
            assert!((a - b).norm() < 1e-5);
        }
        let again = quantize_block(block, 0.5, cfg.signal_field, RngSeed::new(3, 0)).unwrap();
        assert_eq!(
            again,
            quantize_block(block, 0.5, cfg.signal_field, RngSeed::new(3, 0)).unwrap()
        );
        assert!(quantize_block(block, 0.0, cfg.signal_field, RngSeed::new(3, 0)).is_err());
    }

    #[test]
    fn trace_rows_have_header_width() {
        let cfg = presets::fig2_config(0.0);
        let blocks = sample_interval(&cfg, &hv(&[0, 0]), 0, RngSeed::new(1, 0)).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(trace_header(2, SignalField::Real)).unwrap();
        write_trace(&mut w, 0, &blocks, SignalField::Real).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
    }
}
