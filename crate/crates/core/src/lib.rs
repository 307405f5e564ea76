//! Distributed detection over type-based multiple access in a multi-cell
//! network with edge and cloud processing.
//!
//! Each cell carries a binary quantity of interest. Devices in a cell pick a
//! measurement symbol from a per-hypothesis distribution and transmit the
//! preamble assigned to it; an edge node observes the noisy, faded histogram
//! of symbols from its own cell plus interference from the others. The crate
//! provides:
//!
//! * the Gaussian surrogates of the received vectors ([`edge_surrogate`],
//!   [`cloud_surrogate`]),
//! * Chernoff information and the resulting edge and cloud error exponents,
//! * the fronthaul quantization-noise solver,
//! * a seeded physical-layer simulator, MAP detectors and Monte Carlo error
//!   estimation,
//! * sweep orchestration with CSV output.

pub mod chernoff;
pub mod config_file;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod exponent;
pub mod model;
pub mod phy;
pub mod presets;
pub mod quantization;
pub mod rng;
pub mod sweep;
pub mod validate;

pub use chernoff::{
    alpha_chernoff, alpha_chernoff_diagonal, alpha_chernoff_full, chernoff_information,
    golden_section_max, Chernoff, ALPHA_TOL,
};
pub use config_file::{load_config, ConfigFile, PriorSpec};
pub use detect::{
    argmax_lex, cloud_map_detect, default_truncation, edge_map_detect, exact_map_detect,
    exact_small_lambda_likelihood, log_sum_exp, CloudDetector, DetectionOutcome, EdgeDetector,
    LogDensity, MAX_EXACT_TERMS,
};
pub use error::{Error, Result};
pub use estimate::{
    analytic_exponent, estimate_error_prob, fit_exponent, fit_exponent_from_estimates,
    oracle_agreement, wilson_interval, Agreement, DetectionMode, ErrorProbEstimate, MIN_TRIALS,
};
pub use exponent::{
    cloud_exponent, cloud_exponent_with_noise, cross_gain_probe, edge_exponent, ExponentReport,
    ProbeRow,
};
pub use model::{
    build_prior_from_rho, cloud_surrogate, db_to_linear, edge_surrogate, linear_to_db,
    validate_config, CellModel, GaussianSurrogate, HypothesisVector, QoIPrior, SignalField,
    SystemConfig, Violation,
};
pub use phy::{
    compound_poisson_moments, empirical_moments, quantize_block, sample_interval, MomentEstimate,
    ReceivedBlock, Sampler,
};
pub use quantization::{
    prior_averaged_variance, solve_all, solve_quantization_noise, solve_test_channel,
    test_channel_rate, QuantizationSolution, RESIDUAL_TOL,
};
pub use rng::{Purpose, RngSeed};
pub use sweep::{
    run_exponent_sweep, run_simulation, write_simulation_csv, write_simulation_trace,
    write_sweep_csv, MonteCarloSpec, SimulateSpec, SimulationReport, SweepAxis, SweepMode,
    SweepRow, SweepSpec,
};
pub use validate::{validation_report, CheckLine, MOMENT_REL_TOL};
