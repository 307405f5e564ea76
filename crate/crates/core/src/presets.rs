//! Ready-made scenarios.
//!
//! The measurement distributions used by the figure recipes are a repository
//! default (`p_0 = [0.9, 0.1]`, `p_1 = [0.1, 0.9]` in every cell), not values
//! taken from any publication.

use crate::model::{db_to_linear, CellModel, QoIPrior, SignalField, SystemConfig};

/// Correlation used by both figure recipes.
pub const DEFAULT_RHO: f64 = 0.8;
pub const DEFAULT_SNR_DB: f64 = -1.0;

pub fn default_cell_model() -> CellModel {
    CellModel {
        p0: vec![0.9, 0.1],
        p1: vec![0.1, 0.9],
    }
}

fn two_cell(sigma2_g: f64, capacity: f64) -> SystemConfig {
    SystemConfig {
        cells: 2,
        alphabet: 2,
        lambda: 4.0,
        snr: db_to_linear(DEFAULT_SNR_DB),
        mu_h: 1.0,
        sigma2_h: 1.0,
        mu_g: 0.0,
        sigma2_g,
        capacity,
        measurement: vec![default_cell_model(), default_cell_model()],
        prior: QoIPrior::from_rho(DEFAULT_RHO).expect("constant rho in range"),
        signal_field: SignalField::Real,
    }
}

/// Interference sweep baseline: `mu_h=1, sigma2_h=1, mu_g=0, lambda=4`,
/// SNR -1 dB, fronthaul 2 bit/s/Hz.
pub fn fig2_config(sigma2_g: f64) -> SystemConfig {
    two_cell(sigma2_g, 2.0)
}

/// Capacity sweep baseline: no cross-cell channel (`sigma2_g = 0`).
pub fn fig3_config(capacity: f64) -> SystemConfig {
    two_cell(0.0, capacity)
}

/// Single-cell model with well separated hypotheses, used for simulation
/// checks of the exponent.
pub fn separated_single_cell() -> SystemConfig {
    SystemConfig {
        cells: 1,
        alphabet: 2,
        lambda: 4.0,
        snr: db_to_linear(DEFAULT_SNR_DB),
        mu_h: 1.0,
        sigma2_h: 1.0,
        mu_g: 0.0,
        sigma2_g: 0.0,
        capacity: 0.0,
        measurement: vec![default_cell_model()],
        prior: QoIPrior::uniform(1),
        signal_field: SignalField::Real,
    }
}

pub const FIG2_SIGMA2_G_GRID: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0];
pub const FIG2_CAPACITIES: [f64; 3] = [1.0, 2.0, 4.0];
pub const FIG3_CAPACITY_GRID: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 12.0];
