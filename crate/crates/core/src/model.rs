//! Scenario parameters and the Gaussian surrogates of the matched-filter output.
//!
//! Every cell observes, per collection interval, an `M`-vector whose entry `m`
//! accumulates the channel gains of all active devices that measured `m`, from
//! its own cell and from the interfering cells, plus thermal noise. For a large
//! mean device count this vector is modeled as Gaussian; the surrogates built
//! here are shared by the exponent analytics and by the MAP detectors.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability vectors and prior tables.
pub const PROB_TOL: f64 = 1e-12;

/// Whether channels and noise are drawn as real or circularly-symmetric
/// complex Gaussians. Also selects the density used by the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SignalField {
    #[default]
    Real,
    Complex,
}

/// Assignment of each cell's quantity of interest to `theta_0` (bit 0) or
/// `theta_1` (bit 1).
///
/// Vectors are enumerated lexicographically with cell 1 as the most
/// significant bit, so `index()` of `(0,1)` is 1 and of `(1,0)` is 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HypothesisVector {
    bits: Vec<u8>,
}

impl HypothesisVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "hypothesis bits must be 0 or 1, got {bits:?}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn from_index(index: usize, cells: usize) -> Self {
        debug_assert!(index < 1 << cells);
        let bits = (0..cells)
            .map(|c| ((index >> (cells - 1 - c)) & 1) as u8)
            .collect();
        Self { bits }
    }

    /// All `2^cells` vectors in lexicographic order.
    pub fn enumerate(cells: usize) -> impl Iterator<Item = HypothesisVector> {
        (0..1usize << cells).map(move |i| Self::from_index(i, cells))
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, cell: usize) -> u8 {
        self.bits[cell]
    }

    pub fn with_bit(&self, cell: usize, bit: u8) -> Self {
        let mut bits = self.bits.clone();
        bits[cell] = bit;
        Self { bits }
    }

    /// Inserts `own` at position `cell` into an interference pattern over the
    /// remaining `K-1` cells.
    pub fn splice(pattern: &HypothesisVector, cell: usize, own: u8) -> Self {
        let mut bits = pattern.bits.clone();
        bits.insert(cell, own);
        Self { bits }
    }
}

impl fmt::Display for HypothesisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Joint prior over the `2^K` hypothesis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QoIPrior {
    table: Vec<f64>,
    rho: Option<f64>,
}

impl QoIPrior {
    /// Two-cell correlation model: both cells agree with probability `rho`,
    /// each marginal is uniform.
    pub fn from_rho(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in [0, 1], got {rho}"
            )));
        }
        let same = rho / 2.0;
        let diff = (1.0 - rho) / 2.0;
        Ok(Self {
            table: vec![same, diff, diff, same],
            rho: Some(rho),
        })
    }

    pub fn uniform(cells: usize) -> Self {
        let n = 1usize << cells;
        Self {
            table: vec![1.0 / n as f64; n],
            rho: None,
        }
    }

    /// Arbitrary table; checked by [`SystemConfig::validate`], not here.
    pub fn from_table(table: Vec<f64>) -> Self {
        Self { table, rho: None }
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn prob(&self, k: &HypothesisVector) -> f64 {
        self.table[k.index()]
    }

    /// `Pr(theta^cell = theta_bit)`.
    pub fn marginal(&self, cell: usize, bit: u8) -> f64 {
        let cells = self.cells();
        self.table
            .iter()
            .enumerate()
            .filter(|(i, _)| HypothesisVector::from_index(*i, cells).bit(cell) == bit)
            .map(|(_, p)| p)
            .sum()
    }

    /// Number of cells implied by the table length, if it is a power of two.
    pub fn cells(&self) -> usize {
        self.table.len().trailing_zeros() as usize
    }

    fn violations(&self, cells: usize, out: &mut Vec<Violation>) {
        if self.table.len() != 1usize << cells {
            out.push(Violation::new(
                "prior",
                format!(
                    "table length {} differs from 2^K = {}",
                    self.table.len(),
                    1usize << cells
                ),
            ));
            return;
        }
        if self.table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            out.push(Violation::new("prior", "table entries must be nonnegative"));
        }
        let sum: f64 = self.table.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(Violation::new(
                "prior",
                format!("table does not sum to 1 (sum = {sum})"),
            ));
        }
        if let Some(rho) = self.rho {
            if cells != 2 {
                out.push(Violation::new("prior", "rho correlation model needs K = 2"));
            }
            if !(0.0..=1.0).contains(&rho) {
                out.push(Violation::new("prior", "rho must lie in [0, 1]"));
            }
        }
    }
}

/// Per-cell measurement distributions `p_0^c` and `p_1^c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl CellModel {
    pub fn dist(&self, bit: u8) -> &[f64] {
        if bit == 0 {
            &self.p0
        } else {
            &self.p1
        }
    }
}

/// A single invariant violated by a [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All scenario parameters. SNR is stored linear; capacity in bit/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub cells: usize,
    pub alphabet: usize,
    pub lambda: f64,
    pub snr: f64,
    pub mu_h: f64,
    pub sigma2_h: f64,
    pub mu_g: f64,
    pub sigma2_g: f64,
    pub capacity: f64,
    pub measurement: Vec<CellModel>,
    pub prior: QoIPrior,
    pub signal_field: SignalField,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

impl SystemConfig {
    /// Every violated invariant, in a fixed order. Never mutates `self`.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.cells == 0 {
            out.push(Violation::new("cells", "K must be at least 1"));
        }
        if self.cells > 16 {
            out.push(Violation::new("cells", "K above 16 is not supported"));
        }
        if self.alphabet == 0 {
            out.push(Violation::new("alphabet", "M must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(Violation::new("lambda", "lambda must be positive"));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            out.push(Violation::new("snr", "snr must be positive"));
        }
        if !self.mu_h.is_finite() {
            out.push(Violation::new("mu_h", "mu_h must be finite"));
        }
        if !self.mu_g.is_finite() {
            out.push(Violation::new("mu_g", "mu_g must be finite"));
        }
        if !(self.sigma2_h >= 0.0 && self.sigma2_h.is_finite()) {
            out.push(Violation::new("sigma2_h", "sigma2_h must be nonnegative"));
        }
        if !(self.sigma2_g >= 0.0 && self.sigma2_g.is_finite()) {
            out.push(Violation::new("sigma2_g", "sigma2_g must be nonnegative"));
        }
        if self.capacity.is_nan() || self.capacity < 0.0 {
            out.push(Violation::new("capacity", "capacity must be nonnegative"));
        }
        if self.measurement.len() != self.cells {
            out.push(Violation::new(
                "measurement_model",
                format!(
                    "expected {} cell models, got {}",
                    self.cells,
                    self.measurement.len()
                ),
            ));
        }
        for (c, cm) in self.measurement.iter().enumerate() {
            for (j, p) in [&cm.p0, &cm.p1].into_iter().enumerate() {
                let field = format!("measurement_model[{}].p{}", c + 1, j);
                if p.len() != self.alphabet {
                    out.push(Violation::new(
                        field,
                        format!("length {} differs from M = {}", p.len(), self.alphabet),
                    ));
                    continue;
                }
                if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    out.push(Violation::new(field, "entries must lie in [0, 1]"));
                } else if (p.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                    out.push(Violation::new(field, "distribution does not sum to 1"));
                }
            }
        }
        if self.cells <= 16 {
            self.prior.violations(self.cells, &mut out);
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn noise_variance(&self) -> f64 {
        1.0 / self.snr
    }

    pub fn dist(&self, cell: usize, bit: u8) -> &[f64] {
        self.measurement[cell].dist(bit)
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = HypothesisVector> {
        HypothesisVector::enumerate(self.cells)
    }

    /// Applies the same alphabet relabeling to every distribution.
    /// `perm[m]` is the new position of old symbol `m`.
    pub fn permute_alphabet(&self, perm: &[usize]) -> SystemConfig {
        let permute = |p: &Vec<f64>| {
            let mut q = vec![0.0; p.len()];
            for (m, &v) in p.iter().enumerate() {
                q[perm[m]] = v;
            }
            q
        };
        let mut out = self.clone();
        for cm in &mut out.measurement {
            cm.p0 = permute(&cm.p0);
            cm.p1 = permute(&cm.p1);
        }
        out
    }

    /// Per-entry edge mean and variance of cell `cell` under the full
    /// hypothesis vector `k`.
    pub(crate) fn edge_moments(&self, cell: usize, k: &HypothesisVector) -> (Vec<f64>, Vec<f64>) {
        let own = self.dist(cell, k.bit(cell));
        let mut mean = vec![0.0; self.alphabet];
        let mut var = vec![self.noise_variance(); self.alphabet];
        for m in 0..self.alphabet {
            mean[m] += self.mu_h * self.lambda * own[m];
            var[m] += self.sigma2_h * self.lambda * own[m];
        }
        for other in (0..self.cells).filter(|&o| o != cell) {
            // the interferer's own distribution, selected by its own bit
            let p = self.dist(other, k.bit(other));
            for m in 0..self.alphabet {
                mean[m] += self.mu_g * self.lambda * p[m];
                var[m] += self.sigma2_g * self.lambda * p[m];
            }
        }
        (mean, var)
    }
}

/// Gaussian approximation of a received-signal distribution under one
/// hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSurrogate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub diagonal_only: bool,
}

impl GaussianSurrogate {
    pub fn diagonal(mean: Vec<f64>, var: Vec<f64>) -> Self {
        Self {
            mean: DVector::from_vec(mean),
            cov: DMatrix::from_diagonal(&DVector::from_vec(var)),
            diagonal_only: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Entrywise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .mean
                .iter()
                .zip(other.mean.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .cov
                .iter()
                .zip(other.cov.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

pub fn build_prior_from_rho(rho: f64) -> Result<QoIPrior> {
    QoIPrior::from_rho(rho)
}

/// Surrogate of the `M`-vector observed by edge node `cell` (0-based) under the
/// full hypothesis vector `k`. The covariance is diagonal.
pub fn edge_surrogate(
    config: &SystemConfig,
    cell: usize,
    k: &HypothesisVector,
) -> Result<GaussianSurrogate> {
    config.check()?;
    check_cell(config, cell)?;
    check_hypothesis(config, k)?;
    let (mean, var) = config.edge_moments(cell, k);
    Ok(GaussianSurrogate::diagonal(mean, var))
}

/// Surrogate of the stacked `2M`-vector seen by the cloud after fronthaul
/// quantization with per-EN noise variances `sigma2_q`.
///
/// The cross-cell entries `(m, M+m)` follow the printed closed form
/// `lambda*mu_h*mu_g*[p1(m)(1-p1(m)) + p2(m)(1-p2(m))]`, each `p` being the
/// cell's distribution under its own bit. A compound-Poisson derivation gives
/// `lambda*mu_h*mu_g*[p1(m) + p2(m)]` instead; both vanish when `mu_g = 0`.
pub fn cloud_surrogate(
    config: &SystemConfig,
    k: &HypothesisVector,
    sigma2_q: &[f64],
) -> Result<GaussianSurrogate> {
    config.check()?;
    if config.cells != 2 {
        return Err(Error::UnsupportedCells {
            cells: config.cells,
        });
    }
    check_hypothesis(config, k)?;
    if sigma2_q.len() != config.cells {
        return Err(Error::DimensionMismatch {
            left: sigma2_q.len(),
            right: config.cells,
        });
    }
    if sigma2_q.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "quantization noise variances must be finite and nonnegative, got {sigma2_q:?}"
        )));
    }

    let m_size = config.alphabet;
    let dim = config.cells * m_size;
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for c in 0..config.cells {
        let (mu, var) = config.edge_moments(c, k);
        for m in 0..m_size {
            mean[c * m_size + m] = mu[m];
            cov[(c * m_size + m, c * m_size + m)] = var[m] + sigma2_q[c];
        }
    }
    let p1 = config.dist(0, k.bit(0));
    let p2 = config.dist(1, k.bit(1));
    let scale = config.lambda * config.mu_h * config.mu_g;
    for m in 0..m_size {
        let cross = scale * (p1[m] * (1.0 - p1[m]) + p2[m] * (1.0 - p2[m]));
        cov[(m, m_size + m)] = cross;
        cov[(m_size + m, m)] = cross;
    }
    Ok(GaussianSurrogate {
        mean,
        cov,
        diagonal_only: false,
    })
}

pub fn validate_config(config: &SystemConfig) -> std::result::Result<(), Vec<Violation>> {
    let v = config.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

fn check_cell(config: &SystemConfig, cell: usize) -> Result<()> {
    if cell >= config.cells {
        return Err(Error::InvalidArgument(format!(
            "cell index {cell} out of range for K = {}",
            config.cells
        )));
    }
    Ok(())
}

pub(crate) fn check_hypothesis(config: &SystemConfig, k: &HypothesisVector) -> Result<()> {
    if k.len() != config.cells {
        return Err(Error::DimensionMismatch {
            left: k.len(),
            right: config.cells,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn single_cell() -> SystemConfig {
        SystemConfig {
            cells: 1,
            alphabet: 2,
            lambda: 4.0,
            snr: db_to_linear(-1.0),
            mu_h: 1.0,
            sigma2_h: 1.0,
            mu_g: 0.0,
            sigma2_g: 0.0,
            capacity: 0.0,
            measurement: vec![presets::default_cell_model()],
            prior: QoIPrior::uniform(1),
            signal_field: SignalField::Real,
        }
    }

    #[test]
    fn prior_from_rho_values() {
        let p = build_prior_from_rho(0.5).unwrap();
        assert!(p.table().iter().all(|&x| x == 0.25));
        let p = build_prior_from_rho(1.0).unwrap();
        assert_eq!(p.table(), &[0.5, 0.0, 0.0, 0.5]);
        let p = build_prior_from_rho(0.8).unwrap();
        for (a, b) in p.table().iter().zip([0.4, 0.1, 0.1, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.marginal(0, 0) - 0.5).abs() < 1e-15);
        assert!((p.marginal(1, 1) - 0.5).abs() < 1e-15);
        assert!(build_prior_from_rho(1.2).is_err());
        assert!(build_prior_from_rho(-0.1).is_err());
    }

    #[test]
    fn hypothesis_order_is_lexicographic_cell1_msb() {
        let all: Vec<String> = HypothesisVector::enumerate(2)
            .map(|k| k.to_string())
            .collect();
        assert_eq!(all, ["00", "01", "10", "11"]);
        let k = HypothesisVector::new(vec![1, 0, 1]).unwrap();
        assert_eq!(k.index(), 5);
        assert_eq!(HypothesisVector::from_index(5, 3), k);
        assert!(HypothesisVector::new(vec![2]).is_err());
    }

    #[test]
    fn edge_surrogate_hand_values() {
        let cfg = single_cell();
        let k = HypothesisVector::new(vec![0]).unwrap();
        let g = edge_surrogate(&cfg, 0, &k).unwrap();
        let noise = 10f64.powf(0.1);
        assert!((g.mean[0] - 3.6).abs() < 1e-12);
        assert!((g.mean[1] - 0.4).abs() < 1e-12);
        assert!((g.cov[(0, 0)] - (3.6 + noise)).abs() < 1e-12);
        assert!((g.cov[(1, 1)] - (0.4 + noise)).abs() < 1e-12);
        assert_eq!(g.cov[(0, 1)], 0.0);
        assert!(g.diagonal_only);
    }

    #[test]
    fn edge_surrogate_small_lambda_is_noise_only() {
        let mut cfg = single_cell();
        cfg.lambda = 1e-14;
        let g = edge_surrogate(&cfg, 0, &HypothesisVector::new(vec![1]).unwrap()).unwrap();
        for m in 0..2 {
            assert!(g.mean[m].abs() < 1e-13);
            assert!((g.cov[(m, m)] - cfg.noise_variance()).abs() < 1e-13);
        }
    }

    #[test]
    fn edge_surrogate_ignores_interferers_without_cross_channel() {
        let mut cfg = presets::fig2_config(0.0);
        cfg.measurement[1].p1 = vec![0.3, 0.7];
        let a = edge_surrogate(&cfg, 0, &HypothesisVector::new(vec![0, 0]).unwrap()).unwrap();
        let b = edge_surrogate(&cfg, 0, &HypothesisVector::new(vec![0, 1]).unwrap()).unwrap();
        assert_eq!(a, b);
        cfg.sigma2_g = 1.0;
        let b = edge_surrogate(&cfg, 0, &HypothesisVector::new(vec![0, 1]).unwrap()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn edge_mean_sums_to_total_gain() {
        let mut cfg = presets::fig2_config(2.0);
        cfg.mu_g = 0.3;
        for k in cfg.hypotheses() {
            for c in 0..2 {
                let g = edge_surrogate(&cfg, c, &k).unwrap();
                let expect = cfg.lambda * (cfg.mu_h + cfg.mu_g);
                assert!((g.mean.sum() - expect).abs() < 1e-12);
                for m in 0..cfg.alphabet {
                    assert!(g.cov[(m, m)] >= cfg.noise_variance());
                }
            }
        }
    }

    #[test]
    fn cloud_cross_entry_hand_value() {
        let mut cfg = presets::fig2_config(0.0);
        cfg.mu_g = 1.0;
        let k = HypothesisVector::new(vec![0, 0]).unwrap();
        let g = cloud_surrogate(&cfg, &k, &[0.0, 0.0]).unwrap();
        assert!((g.cov[(0, 2)] - 0.72).abs() < 1e-12);
        assert!((g.cov[(2, 0)] - 0.72).abs() < 1e-12);
        assert!((g.cov[(1, 3)] - 0.72).abs() < 1e-12);
        assert_eq!(g.cov[(0, 3)], 0.0);
        assert_eq!(g.cov[(0, 1)], 0.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn cloud_without_cross_mean_is_block_diagonal_sum_of_edges() {
        let mut cfg = presets::fig2_config(1.5);
        cfg.measurement[1] = CellModel {
            p0: vec![0.7, 0.3],
            p1: vec![0.2, 0.8],
        };
        let q = [0.3, 0.05];
        for k in cfg.hypotheses() {
            let g = cloud_surrogate(&cfg, &k, &q).unwrap();
            for c in 0..2 {
                let e = edge_surrogate(&cfg, c, &k).unwrap();
                for m in 0..2 {
                    for n in 0..2 {
                        let extra = if m == n { q[c] } else { 0.0 };
                        assert_eq!(g.cov[(2 * c + m, 2 * c + n)], e.cov[(m, n)] + extra);
                    }
                    assert_eq!(g.mean[2 * c + m], e.mean[m]);
                }
            }
            assert!(g.cov.view((0, 2), (2, 2)).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn cloud_rejects_other_cell_counts() {
        let cfg = single_cell();
        let err = cloud_surrogate(&cfg, &HypothesisVector::new(vec![0]).unwrap(), &[0.0]);
        assert!(matches!(err, Err(Error::UnsupportedCells { cells: 1 })));
    }

    #[test]
    fn validation_messages() {
        let mut cfg = presets::fig2_config(0.0);
        assert!(validate_config(&cfg).is_ok());
        cfg.measurement[0].p0 = vec![0.5, 0.6];
        cfg.lambda = -1.0;
        let v = validate_config(&cfg).unwrap_err();
        let text: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert!(
            text.iter()
                .any(|t| t.contains("distribution does not sum to 1")),
            "{text:?}"
        );
        assert!(
            text.iter().any(|t| t.contains("lambda must be positive")),
            "{text:?}"
        );
        let before = cfg.clone();
        let _ = cfg.validate();
        assert_eq!(before, cfg);
    }

    #[test]
    fn validation_catches_prior_shape() {
        let mut cfg = presets::fig2_config(0.0);
        cfg.prior = QoIPrior::uniform(3);
        assert!(cfg.validate().iter().any(|v| v.field == "prior"));
        cfg.prior = QoIPrior::from_table(vec![0.5, 0.5, 0.1, -0.1]);
        assert!(cfg
            .validate()
            .iter()
            .any(|v| v.message.contains("nonnegative")));
    }
}
