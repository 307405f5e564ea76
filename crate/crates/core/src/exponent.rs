//! Edge and cloud error exponents.
//!
//! Edge: each EN tests its own bit; the exponent is the worst cell, and within
//! a cell the worst interference pattern, of the Chernoff information between
//! the two diagonal surrogates. Cloud: the worst pair of distinct hypothesis
//! vectors under the stacked, quantized surrogate.

use rayon::prelude::*;

use crate::chernoff::{chernoff_information, Chernoff};
use crate::error::{Error, Result};
use crate::model::{cloud_surrogate, GaussianSurrogate, HypothesisVector, SystemConfig};
use crate::quantization::solve_all;

/// Outcome of an exponent evaluation, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub exponent: f64,
    /// Hypothesis pair achieving the minimum, in the order passed to the
    /// Chernoff computation (`alpha_star` weighs the first).
    pub argmin_pair: (HypothesisVector, HypothesisVector),
    pub alpha_star: f64,
    /// Edge mode: `E^c` for each cell. Empty in cloud mode.
    pub per_cell: Vec<f64>,
    /// Cloud mode: quantization noise per EN. Empty in edge mode.
    pub sigma2_q: Vec<f64>,
}

struct Best {
    value: Chernoff,
    pair: (HypothesisVector, HypothesisVector),
}

impl Best {
    fn offer(slot: &mut Option<Best>, value: Chernoff, pair: (HypothesisVector, HypothesisVector)) {
        // strict comparison keeps the lexicographically first minimizer
        if slot.as_ref().is_none_or(|b| value.value < b.value.value) {
            *slot = Some(Best { value, pair });
        }
    }
}

pub fn edge_exponent(config: &SystemConfig) -> Result<ExponentReport> {
    config.check()?;
    let mut per_cell = Vec::with_capacity(config.cells);
    let mut overall: Option<Best> = None;
    for cell in 0..config.cells {
        let mut cell_best: Option<Best> = None;
        for pattern in HypothesisVector::enumerate(config.cells - 1) {
            let k0 = HypothesisVector::splice(&pattern, cell, 0);
            let k1 = HypothesisVector::splice(&pattern, cell, 1);
            let (m0, v0) = config.edge_moments(cell, &k0);
            let (m1, v1) = config.edge_moments(cell, &k1);
            let c = chernoff_information(
                &GaussianSurrogate::diagonal(m0, v0),
                &GaussianSurrogate::diagonal(m1, v1),
            )?;
            Best::offer(&mut cell_best, c, (k0, k1));
        }
        let best = cell_best.expect("at least one interference pattern");
        per_cell.push(best.value.value);
        Best::offer(&mut overall, best.value, best.pair);
    }
    let best = overall.expect("at least one cell");
    Ok(ExponentReport {
        exponent: best.value.value,
        argmin_pair: best.pair,
        alpha_star: best.value.alpha_star,
        per_cell,
        sigma2_q: Vec::new(),
    })
}

/// Cloud exponent with the quantization noise implied by the fronthaul
/// capacity.
pub fn cloud_exponent(config: &SystemConfig) -> Result<ExponentReport> {
    config.check()?;
    if config.cells != 2 {
        return Err(Error::UnsupportedCells {
            cells: config.cells,
        });
    }
    let sigma2_q: Vec<f64> = solve_all(config)?.iter().map(|s| s.sigma2_q).collect();
    cloud_exponent_with_noise(config, &sigma2_q)
}

/// Cloud exponent for explicitly given per-EN quantization noise.
pub fn cloud_exponent_with_noise(
    config: &SystemConfig,
    sigma2_q: &[f64],
) -> Result<ExponentReport> {
    let surrogates = config
        .hypotheses()
        .map(|k| cloud_surrogate(config, &k, sigma2_q).map(|g| (k, g)))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<Best> = None;
    for (i, (ka, ga)) in surrogates.iter().enumerate() {
        for (kb, gb) in &surrogates[i + 1..] {
            let c = chernoff_information(ga, gb)?;
            Best::offer(&mut best, c, (ka.clone(), kb.clone()));
        }
    }
    let best = best.expect("at least two hypotheses");
    Ok(ExponentReport {
        exponent: best.value.value,
        argmin_pair: best.pair,
        alpha_star: best.value.alpha_star,
        per_cell: Vec::new(),
        sigma2_q: sigma2_q.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub sigma2_g: f64,
    pub edge: ExponentReport,
    /// `None` when the cloud exponent is undefined for the configuration
    /// (K != 2 or zero capacity).
    pub cloud: Option<ExponentReport>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sweep grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Both exponents along a cross-channel variance grid.
pub fn cross_gain_probe(config: &SystemConfig, sigma2_g_grid: &[f64]) -> Result<Vec<ProbeRow>> {
    check_grid(sigma2_g_grid)?;
    if sigma2_g_grid[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "sigma2_g must be nonnegative".into(),
        ));
    }
    sigma2_g_grid
        .par_iter()
        .map(|&sigma2_g| {
            let mut cfg = config.clone();
            cfg.sigma2_g = sigma2_g;
            let edge = edge_exponent(&cfg)?;
            let cloud = if cfg.cells == 2 && cfg.capacity > 0.0 {
                Some(cloud_exponent(&cfg)?)
            } else {
                None
            };
            Ok(ProbeRow {
                sigma2_g,
                edge,
                cloud,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellModel;
    use crate::presets;

    #[test]
    fn uninformative_measurements_give_zero() {
        let mut cfg = presets::fig3_config(4.0);
        for cm in &mut cfg.measurement {
            *cm = CellModel {
                p0: vec![0.6, 0.4],
                p1: vec![0.6, 0.4],
            };
        }
        assert_eq!(edge_exponent(&cfg).unwrap().exponent, 0.0);
        assert_eq!(cloud_exponent(&cfg).unwrap().exponent, 0.0);
    }

    #[test]
    fn without_cross_channel_every_pattern_ties() {
        let cfg = presets::fig2_config(0.0);
        let r = edge_exponent(&cfg).unwrap();
        assert_eq!(r.per_cell.len(), 2);
        assert_eq!(r.per_cell[0], r.per_cell[1]);
        // all patterns tie, so the lexicographically first one is reported
        assert_eq!(r.argmin_pair.0.to_string(), "00");
        assert_eq!(r.argmin_pair.1.to_string(), "10");
    }

    #[test]
    fn interference_lowers_edge_exponent() {
        let e0 = edge_exponent(&presets::fig2_config(0.0)).unwrap().exponent;
        let e1 = edge_exponent(&presets::fig2_config(1.0)).unwrap().exponent;
        assert!(e1 < e0, "{e1} !< {e0}");
    }

    #[test]
    fn separated_single_cell_matches_symmetric_closed_form() {
        // symmetric model: alpha* = 1/2, hand evaluation of the diagonal form
        let cfg = presets::separated_single_cell();
        let r = edge_exponent(&cfg).unwrap();
        let n = cfg.noise_variance();
        let (va, vb) = (3.6 + n, 0.4 + n);
        let avg = 0.5 * (va + vb);
        let expect =
            2.0 * (0.5 * (avg.ln() - 0.5 * va.ln() - 0.5 * vb.ln()) + 0.125 * 3.2 * 3.2 / avg);
        assert!(
            (r.exponent - expect).abs() < 1e-12,
            "{} vs {expect}",
            r.exponent
        );
        assert!((r.alpha_star - 0.5).abs() < 1e-7);
    }

    #[test]
    fn cloud_requires_two_cells() {
        let cfg = presets::separated_single_cell();
        assert!(matches!(
            cloud_exponent(&cfg),
            Err(Error::UnsupportedCells { cells: 1 })
        ));
    }

    #[test]
    fn cloud_without_quantization_matches_edge_when_cells_decouple() {
        let cfg = presets::fig3_config(1.0);
        let edge = edge_exponent(&cfg).unwrap().exponent;
        let cloud = cloud_exponent_with_noise(&cfg, &[0.0, 0.0])
            .unwrap()
            .exponent;
        assert!((edge - cloud).abs() < 1e-10, "{edge} vs {cloud}");
    }

    #[test]
    fn probe_rejects_bad_grids() {
        let cfg = presets::fig2_config(0.0);
        assert!(cross_gain_probe(&cfg, &[]).is_err());
        assert!(cross_gain_probe(&cfg, &[1.0, 1.0]).is_err());
        let rows = cross_gain_probe(&cfg, &[0.0, 1.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.cloud.is_some()));
    }
}
