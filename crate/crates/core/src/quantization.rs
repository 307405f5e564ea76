//! Fronthaul quantization noise from the rate constraint.
//!
//! Each edge node forwards its `M` matched-filter outputs over a link carrying
//! `C` bit/s/Hz per resource. Modelling compression as an additive Gaussian
//! test channel with variance `q`, and bounding the rate by the Gaussian one,
//! `q` solves
//!
//! ```text
//! M C = 1/2 sum_m log2((S(m) + q) / q)
//! ```
//!
//! where `S(m)` is the received variance of resource `m` averaged over the
//! hypothesis prior. The right-hand side is strictly decreasing in `q`, and
//! lies between the single-resource curves for `min S` and `max S`, which
//! gives the bracket `[min S, max S] / (2^{2C} - 1)`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::SystemConfig;

pub const RESIDUAL_TOL: f64 = 1e-9;
const MAX_ITER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSolution {
    pub sigma2_q: f64,
    /// Right-hand side minus `M*C` at the returned root, in bits.
    pub residual: f64,
    pub iterations: usize,
}

/// `S(m) = sum_k Pr(k) Sigma^cell_k(m, m)`.
pub fn prior_averaged_variance(config: &SystemConfig, cell: usize) -> Vec<f64> {
    let mut s = vec![0.0; config.alphabet];
    for k in config.hypotheses() {
        let pk = config.prior.prob(&k);
        if pk == 0.0 {
            continue;
        }
        let (_, var) = config.edge_moments(cell, &k);
        for (acc, v) in s.iter_mut().zip(var) {
            *acc += pk * v;
        }
    }
    s
}

pub fn solve_quantization_noise(
    config: &SystemConfig,
    cell: usize,
) -> Result<QuantizationSolution> {
    config.check()?;
    if cell >= config.cells {
        return Err(Error::InvalidArgument(format!(
            "cell index {cell} out of range for K = {}",
            config.cells
        )));
    }
    solve_test_channel(&prior_averaged_variance(config, cell), config.capacity)
}

/// Per-EN solutions for every cell.
pub fn solve_all(config: &SystemConfig) -> Result<Vec<QuantizationSolution>> {
    (0..config.cells)
        .map(|c| solve_quantization_noise(config, c))
        .collect()
}

/// Rate of the Gaussian test channel in bits: `1/2 sum log2(1 + S/q)`.
pub fn test_channel_rate(variances: &[f64], sigma2_q: f64) -> f64 {
    0.5 * variances
        .iter()
        .map(|s| (s / sigma2_q).ln_1p())
        .sum::<f64>()
        / LN_2
}

/// Solves `M*C = test_channel_rate(S, q)` for `q` by bisection on `ln q`.
pub fn solve_test_channel(variances: &[f64], capacity: f64) -> Result<QuantizationSolution> {
    if capacity == 0.0 {
        return Err(Error::InfiniteQuantizationNoise);
    }
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be positive and finite, got {capacity}"
        )));
    }
    if variances.is_empty() || variances.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(
            "received variances must be positive and finite".into(),
        ));
    }
    let target = variances.len() as f64 * capacity;
    let residual = |q: f64| test_channel_rate(variances, q) - target;

    let denom = (2.0 * capacity * LN_2).exp_m1();
    let s_min = variances.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = variances.iter().copied().fold(0.0, f64::max);
    let q_lo = s_min / denom;
    let q_hi = s_max / denom;
    if q_lo.is_nan() || q_lo <= 0.0 || !q_hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} puts the quantization noise outside floating-point range"
        )));
    }

    let (mut lo, mut hi) = (q_lo.ln(), q_hi.ln());
    let mut best = (q_hi, residual(q_hi));
    let r_lo = residual(q_lo);
    if r_lo.abs() < best.1.abs() {
        best = (q_lo, r_lo);
    }
    let mut iterations = 0;
    while best.1.abs() >= 1e-12 && iterations < MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let q = mid.exp();
        let r = residual(q);
        if r.abs() < best.1.abs() {
            best = (q, r);
        }
        // rate decreases in q: positive residual means q is too small
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1.abs() >= RESIDUAL_TOL {
        return Err(Error::SolverDiverged {
            residual: best.1,
            iterations,
        });
    }
    Ok(QuantizationSolution {
        sigma2_q: best.0,
        residual: best.1,
        iterations,
    })
}
