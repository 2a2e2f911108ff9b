//! Shared workloads for the criterion benches.

use clusterpovm::catalog;
use clusterpovm::experiment::{noise_model, ExperimentConfig, NoiseParams};
use clusterpovm::tomography::{pauli_product_settings, pauli_settings, simulate_counts, CountRecord};
use clusterpovm::DensityMatrix;

/// A generic mixed single-qubit state.
pub fn qubit_state() -> DensityMatrix {
    let a = DensityMatrix::from_ket(&catalog::psi(0.9, 1.3));
    a.mix(&DensityMatrix::maximally_mixed(2).expect("dimension 2"), 0.95).expect("same dimension")
}

pub fn qubit_records(mean: f64) -> Vec<CountRecord> {
    simulate_counts(&qubit_state(), &pauli_settings(), mean, 7)
}

pub fn resource_records(mean: f64) -> Vec<CountRecord> {
    let rho = noise_model(&NoiseParams::calibrated()).expect("calibrated parameters are valid");
    simulate_counts(&rho, &pauli_product_settings(), mean, 7)
}

pub fn small_run(settings_count: usize) -> ExperimentConfig {
    ExperimentConfig { settings_count, ..Default::default() }
}
