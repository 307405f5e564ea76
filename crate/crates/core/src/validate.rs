//! Configuration and simulator self-checks.

use crate::error::Result;
use crate::model::{edge_surrogate, HypothesisVector, SignalField, SystemConfig};
use crate::phy::{compound_poisson_moments, empirical_moments};

/// Relative tolerance of the moment checks (widened to 4 standard errors
/// when sampling noise is larger).
pub const MOMENT_REL_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Fourth cumulant of one received entry (real part) for the excess-kurtosis
/// term of the variance standard error.
fn fourth_cumulant(config: &SystemConfig, cell: usize, k: &HypothesisVector, m: usize) -> f64 {
    let scale = match config.signal_field {
        SignalField::Real => 1.0,
        SignalField::Complex => 0.5,
    };
    let gain4 = |mu: f64, s2: f64| {
        let s2 = s2 * scale;
        mu.powi(4) + 6.0 * mu * mu * s2 + 3.0 * s2 * s2
    };
    (0..config.cells)
        .map(|src| {
            let p = config.dist(src, k.bit(src))[m];
            let g4 = if src == cell {
                gain4(config.mu_h, config.sigma2_h)
            } else {
                gain4(config.mu_g, config.sigma2_g)
            };
            config.lambda * p * g4
        })
        .sum()
}

fn within(estimate: f64, exact: f64, std_error: f64) -> (bool, f64) {
    let tol = (MOMENT_REL_TOL * exact.abs()).max(4.0 * std_error);
    ((estimate - exact).abs() <= tol, tol)
}

/// Pass/fail lines: one per configuration violation (or a single pass), then
/// mean and variance checks of the simulator against the exact
/// compound-Poisson moments for every hypothesis, then an informational line
/// with the largest variance gap of the Gaussian surrogate (never failing).
pub fn validation_report(
    config: &SystemConfig,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Ok(violations
            .into_iter()
            .map(|v| CheckLine::new(v.field, false, v.message))
            .collect());
    }
    let mut lines = vec![CheckLine::new("config", true, "all invariants hold")];
    let m_size = config.alphabet;
    let mut surrogate_gap: f64 = 0.0;
    for k in config.hypotheses() {
        let est = empirical_moments(config, &k, samples, seed)?;
        let (mean, cov) = compound_poisson_moments(config, &k)?;
        let n = est.samples as f64;
        let (mut mean_ok, mut var_ok) = (true, true);
        let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
        for c in 0..config.cells {
            let sur = edge_surrogate(config, c, &k)?;
            for m in 0..m_size {
                let i = c * m_size + m;
                let var = cov[(i, i)];
                let (ok, tol) = within(est.mean[i], mean[i], (var / n).sqrt());
                mean_ok &= ok;
                worst_mean = worst_mean.max((est.mean[i] - mean[i]).abs() / tol);

                let re_var = match config.signal_field {
                    SignalField::Real => var,
                    SignalField::Complex => 0.5 * var,
                };
                let excess = fourth_cumulant(config, c, &k, m) / (re_var * re_var);
                let (ok, tol) = within(est.cov[(i, i)], var, var * ((2.0 + excess) / n).sqrt());
                var_ok &= ok;
                worst_var = worst_var.max((est.cov[(i, i)] - var).abs() / tol);

                surrogate_gap = surrogate_gap.max((sur.cov[(m, m)] - var).abs() / var);
            }
        }
        lines.push(CheckLine::new(
            format!("mean[{k}]"),
            mean_ok,
            format!("worst deviation {worst_mean:.3} of tolerance"),
        ));
        lines.push(CheckLine::new(
            format!("variance[{k}]"),
            var_ok,
            format!("worst deviation {worst_var:.3} of tolerance"),
        ));
    }
    lines.push(CheckLine::new(
        "info: surrogate variance gap",
        true,
        format!("largest relative gap to the exact variance {surrogate_gap:.4}"),
    ));
    Ok(lines)
}
