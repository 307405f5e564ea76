//! Parameter sweeps and Monte Carlo runs with stable CSV output.
//!
//! Exponent sweep columns, in order:
//!
//! | column | content |
//! |---|---|
//! | `<axis>` | grid value (`sigma2_G`, `C`, `rho`, `lambda` or `snr_db`) |
//! | `C` | only with a capacity repeat list: capacity of the row |
//! | `E_edge_nats`, `E_cloud_nats` | exponents, empty if not requested or undefined |
//! | `alpha_star_edge`, `alpha_star_cloud` | maximizing α of the worst pair |
//! | `sigma2_q` | per-EN quantization noise joined with `;` |
//! | `mc_slope_edge`, `mc_slope_cloud` | only in `montecarlo` mode: fitted slopes |
//!
//! Simulation columns: `mode,L,trials,errors,p_hat,ci_lo,ci_hi,seed`, then one
//! comment line `# fitted_slope_nats=<x>,analytic_exponent_nats=<y>`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{
    analytic_exponent, estimate_error_prob, fit_exponent_from_estimates, DetectionMode,
    ErrorProbEstimate, MIN_TRIALS,
};
use crate::exponent::{check_grid, cloud_exponent, edge_exponent, ExponentReport};
use crate::model::{db_to_linear, QoIPrior, SystemConfig};
use crate::phy::{trace_header, write_trace, Sampler};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sigma2G,
    Capacity,
    Rho,
    Lambda,
    SnrDb,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sigma2G => "sigma2_G",
            SweepAxis::Capacity => "C",
            SweepAxis::Rho => "rho",
            SweepAxis::Lambda => "lambda",
            SweepAxis::SnrDb => "snr_db",
        }
    }

    pub fn apply(&self, config: &mut SystemConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::Sigma2G => config.sigma2_g = value,
            SweepAxis::Capacity => config.capacity = value,
            SweepAxis::Rho => config.prior = QoIPrior::from_rho(value)?,
            SweepAxis::Lambda => config.lambda = value,
            SweepAxis::SnrDb => config.snr = db_to_linear(value),
        }
        Ok(())
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sigma2_G" | "sigma2_g" => SweepAxis::Sigma2G,
            "C" | "capacity" => SweepAxis::Capacity,
            "rho" => SweepAxis::Rho,
            "lambda" => SweepAxis::Lambda,
            "snr_db" => SweepAxis::SnrDb,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown sweep axis '{other}' (expected sigma2_G, C, rho, lambda or snr_db)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Edge,
    Cloud,
    MonteCarlo,
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(SweepMode::Edge),
            "cloud" => Ok(SweepMode::Cloud),
            "montecarlo" => Ok(SweepMode::MonteCarlo),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep mode '{other}' (expected edge, cloud or montecarlo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub collections: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub modes: Vec<SweepMode>,
    /// Capacity repeat list for `sigma2_G` sweeps: the grid is run once per
    /// entry. Empty means the configured capacity.
    pub capacities: Vec<f64>,
    pub montecarlo: Option<MonteCarloSpec>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, grid: Vec<f64>, modes: Vec<SweepMode>) -> Self {
        Self {
            axis,
            grid,
            modes,
            capacities: Vec::new(),
            montecarlo: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        check_grid(&self.grid)?;
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument("no sweep mode selected".into()));
        }
        if !self.capacities.is_empty() && self.axis != SweepAxis::Sigma2G {
            return Err(Error::InvalidArgument(
                "a capacity list only applies to sigma2_G sweeps".into(),
            ));
        }
        if self.capacities.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "capacities must be nonnegative".into(),
            ));
        }
        match (&self.montecarlo, self.has(SweepMode::MonteCarlo)) {
            (None, true) => Err(Error::InvalidArgument(
                "montecarlo mode needs an L grid and a trial count".into(),
            )),
            (Some(mc), true) => {
                if mc.trials < MIN_TRIALS {
                    return Err(Error::InvalidArgument(format!(
                        "need at least {MIN_TRIALS} trials, got {}",
                        mc.trials
                    )));
                }
                if mc.collections.is_empty() || mc.collections.contains(&0) {
                    return Err(Error::InvalidArgument(
                        "L grid must be nonempty and positive".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn has(&self, mode: SweepMode) -> bool {
        self.modes.contains(&mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub capacity: Option<f64>,
    pub edge: Option<ExponentReport>,
    pub cloud: Option<ExponentReport>,
    pub mc_slope_edge: Option<f64>,
    pub mc_slope_cloud: Option<f64>,
}

fn cloud_defined(config: &SystemConfig) -> bool {
    config.cells == 2 && config.capacity > 0.0
}

fn mc_slope(
    config: &SystemConfig,
    mc: &MonteCarloSpec,
    mode: DetectionMode,
) -> Result<Option<f64>> {
    let estimates = mc
        .collections
        .iter()
        .map(|&l| estimate_error_prob(config, l, mc.trials, mode, mc.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_exponent_from_estimates(&estimates).ok())
}

fn sweep_point(
    base: &SystemConfig,
    spec: &SweepSpec,
    value: f64,
    capacity: Option<f64>,
) -> Result<SweepRow> {
    let mut cfg = base.clone();
    if let Some(c) = capacity {
        cfg.capacity = c;
    }
    spec.axis.apply(&mut cfg, value)?;
    cfg.check()?;
    let edge = spec
        .has(SweepMode::Edge)
        .then(|| edge_exponent(&cfg))
        .transpose()?;
    let cloud = (spec.has(SweepMode::Cloud) && cloud_defined(&cfg))
        .then(|| cloud_exponent(&cfg))
        .transpose()?;
    let (mut mc_slope_edge, mut mc_slope_cloud) = (None, None);
    if let (true, Some(mc)) = (spec.has(SweepMode::MonteCarlo), &spec.montecarlo) {
        mc_slope_edge = mc_slope(&cfg, mc, DetectionMode::Edge)?;
        if cloud_defined(&cfg) {
            mc_slope_cloud = mc_slope(&cfg, mc, DetectionMode::Cloud)?;
        }
    }
    Ok(SweepRow {
        value,
        capacity,
        edge,
        cloud,
        mc_slope_edge,
        mc_slope_cloud,
    })
}

/// One row per grid point (per capacity when a repeat list is given), in grid
/// order. Points are evaluated in parallel.
pub fn run_exponent_sweep(config: &SystemConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.check()?;
    let capacities: Vec<Option<f64>> = if spec.capacities.is_empty() {
        vec![None]
    } else {
        spec.capacities.iter().map(|&c| Some(c)).collect()
    };
    let points: Vec<(f64, Option<f64>)> = capacities
        .iter()
        .flat_map(|&c| spec.grid.iter().map(move |&v| (v, c)))
        .collect();
    points
        .par_iter()
        .map(|&(v, c)| sweep_point(config, spec, v, c))
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_header(spec: &SweepSpec) -> Vec<String> {
    let mut h = vec![spec.axis.name().to_string()];
    if !spec.capacities.is_empty() {
        h.push("C".into());
    }
    h.extend(
        [
            "E_edge_nats",
            "E_cloud_nats",
            "alpha_star_edge",
            "alpha_star_cloud",
            "sigma2_q",
        ]
        .map(String::from),
    );
    if spec.has(SweepMode::MonteCarlo) {
        h.extend(["mc_slope_edge", "mc_slope_cloud"].map(String::from));
    }
    h
}

pub fn write_sweep_csv<W: Write>(out: W, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(spec))?;
    for r in rows {
        let mut rec = vec![r.value.to_string()];
        if !spec.capacities.is_empty() {
            rec.push(opt(r.capacity));
        }
        rec.push(opt(r.edge.as_ref().map(|e| e.exponent)));
        rec.push(opt(r.cloud.as_ref().map(|e| e.exponent)));
        rec.push(opt(r.edge.as_ref().map(|e| e.alpha_star)));
        rec.push(opt(r.cloud.as_ref().map(|e| e.alpha_star)));
        rec.push(
            r.cloud
                .as_ref()
                .map(|e| {
                    e.sigma2_q
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default(),
        );
        if spec.has(SweepMode::MonteCarlo) {
            rec.push(opt(r.mc_slope_edge));
            rec.push(opt(r.mc_slope_cloud));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSpec {
    pub collections: Vec<usize>,
    pub trials: usize,
    pub mode: DetectionMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub mode: DetectionMode,
    pub seed: u64,
    pub estimates: Vec<ErrorProbEstimate>,
    /// `None` when too few points carry enough error events.
    pub fitted_slope: Option<f64>,
    pub analytic_exponent: f64,
}

pub fn run_simulation(config: &SystemConfig, spec: &SimulateSpec) -> Result<SimulationReport> {
    config.check()?;
    if spec.collections.is_empty() || spec.collections.contains(&0) {
        return Err(Error::InvalidArgument(
            "L grid must be nonempty and positive".into(),
        ));
    }
    if spec.trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {}",
            spec.trials
        )));
    }
    let analytic = analytic_exponent(config, spec.mode)?.exponent;
    let estimates = spec
        .collections
        .iter()
        .map(|&l| estimate_error_prob(config, l, spec.trials, spec.mode, spec.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        mode: spec.mode,
        seed: spec.seed,
        fitted_slope: fit_exponent_from_estimates(&estimates).ok(),
        estimates,
        analytic_exponent: analytic,
    })
}

pub fn write_simulation_csv<W: Write>(mut out: W, report: &SimulationReport) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "mode", "L", "trials", "errors", "p_hat", "ci_lo", "ci_hi", "seed",
        ])?;
        for e in &report.estimates {
            w.write_record([
                report.mode.to_string(),
                e.collections.to_string(),
                e.trials.to_string(),
                e.errors.to_string(),
                e.p_hat.to_string(),
                e.wilson_interval.0.to_string(),
                e.wilson_interval.1.to_string(),
                report.seed.to_string(),
            ])?;
        }
        w.flush()?;
    }
    writeln!(
        out,
        "# fitted_slope_nats={},analytic_exponent_nats={}",
        report
            .fitted_slope
            .map_or("NA".to_string(), |s| s.to_string()),
        report.analytic_exponent
    )?;
    Ok(())
}

/// Raw received blocks of the first `trials` trials, drawn exactly as in
/// [`estimate_error_prob`].
pub fn write_simulation_trace<W: Write>(
    out: W,
    config: &SystemConfig,
    collections: usize,
    trials: usize,
    seed: u64,
) -> Result<()> {
    use rand::distr::weighted::WeightedIndex;
    use rand_distr::Distribution;

    let sampler = Sampler::new(config)?;
    let prior = WeightedIndex::new(config.prior.table().iter().copied())
        .map_err(|e| Error::InvalidArgument(format!("prior table: {e}")))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(config.alphabet, config.signal_field))?;
    for t in 0..trials as u64 {
        let s = RngSeed::new(seed, t);
        let idx = prior.sample(&mut s.stream(crate::rng::Purpose::Truth, 0, 0));
        let truth = crate::model::HypothesisVector::from_index(idx, config.cells);
        for l in 0..collections as u64 {
            write_trace(
                &mut w,
                t,
                &sampler.interval(&truth, l, s),
                config.signal_field,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn axis_names_round_trip() {
        for a in [
            SweepAxis::Sigma2G,
            SweepAxis::Capacity,
            SweepAxis::Rho,
            SweepAxis::Lambda,
            SweepAxis::SnrDb,
        ] {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("mu_h".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let spec = SweepSpec::new(SweepAxis::Capacity, vec![], vec![SweepMode::Edge]);
        let err = run_exponent_sweep(&presets::fig3_config(1.0), &spec).unwrap_err();
        assert_eq!(err.to_string(), "invalid argument: empty sweep grid");
    }

    #[test]
    fn capacity_list_expands_rows() {
        let mut spec = SweepSpec::new(
            SweepAxis::Sigma2G,
            vec![0.0, 1.0],
            vec![SweepMode::Edge, SweepMode::Cloud],
        );
        spec.capacities = vec![1.0, 4.0];
        let rows = run_exponent_sweep(&presets::fig2_config(0.0), &spec).unwrap();
        let keys: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.value, r.capacity)).collect();
        assert_eq!(
            keys,
            vec![
                (0.0, Some(1.0)),
                (1.0, Some(1.0)),
                (0.0, Some(4.0)),
                (1.0, Some(4.0))
            ]
        );
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &spec, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "sigma2_G,C,E_edge_nats,E_cloud_nats,alpha_star_edge,alpha_star_cloud,sigma2_q\n"
        ));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn capacity_list_needs_sigma2_axis() {
        let mut spec = SweepSpec::new(SweepAxis::Rho, vec![0.5], vec![SweepMode::Edge]);
        spec.capacities = vec![1.0];
        assert!(spec.check().is_err());
    }

    #[test]
    fn montecarlo_needs_parameters() {
        let spec = SweepSpec::new(SweepAxis::Rho, vec![0.5], vec![SweepMode::MonteCarlo]);
        assert!(spec.check().is_err());
    }

    #[test]
    fn cloud_column_empty_at_zero_capacity() {
        let spec = SweepSpec::new(
            SweepAxis::Capacity,
            vec![0.0, 1.0],
            vec![SweepMode::Edge, SweepMode::Cloud],
        );
        let rows = run_exponent_sweep(&presets::fig3_config(1.0), &spec).unwrap();
        assert!(rows[0].cloud.is_none());
        assert!(rows[1].cloud.is_some());
    }

    #[test]
    fn simulation_csv_shape() {
        let spec = SimulateSpec {
            collections: vec![1, 2],
            trials: 200,
            mode: DetectionMode::Edge,
            seed: 5,
        };
        let report = run_simulation(&presets::separated_single_cell(), &spec).unwrap();
        let mut buf = Vec::new();
        write_simulation_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mode,L,trials,errors,p_hat,ci_lo,ci_hi,seed");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("edge,1,200,"));
        assert!(lines[3].starts_with("# fitted_slope_nats=NA,analytic_exponent_nats="));
    }

    #[test]
    fn trace_rows() {
        let cfg = presets::fig2_config(1.0);
        let mut buf = Vec::new();
        write_simulation_trace(&mut buf, &cfg, 3, 2, 1).unwrap();
        // header + trials * intervals * cells
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            1 + 2 * 3 * 2
        );
    }
}
