//! Desk-scale simulator and analysis toolkit for frequency-bin photonic
//! quantum information: a microring biphoton frequency comb, parallelized
//! electro-optic single-qubit gates, coincidence experiments, two-qubit
//! state tomography, and QKD metrics feeding a fully connected network plan.

pub mod config;
pub mod error;
pub mod gates;
pub mod grid;
pub mod math;
pub mod measurement;
pub mod network;
pub mod qkd;
pub mod resonator;
pub mod sim;
pub mod tomography;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use gates::{
    compose_gate, crosstalk, eom_unitary, extract_qubit_block, gate_fidelity, hadamard,
    identity2, parallel_mask, pf_unitary, success_probability, EomSettings, GateConfig,
    ModeUnitary, ModeWindow, PfMask,
};
pub use grid::FrequencyGrid;
pub use measurement::{
    expected_coincidences, gate_projection_probability, projection_probability,
    sample_coincidences, CoincidenceRecord, DetectorModel, ProjectorLabel,
};
pub use network::{allocate, max_users, usable_pairs, NetworkPlan, PlanLink};
pub use qkd::{
    basis_totals, evaluate_link, qber, raw_rate, sifted_key_rate, BasisCounts, LinkMetrics,
    SiftingParams,
};
pub use resonator::{
    biphoton_state, jsi_diagonal, select_qubit_pair, select_qubit_pair_compensated,
    BiphotonState, QubitPairSelection, ResonatorModel, TwoQubitState,
};
pub use tomography::{
    linear_inversion, monte_carlo_errors, project_to_physical, projector_matrix, reconstruct,
    state_fidelity, DensityMatrix, MonteCarloStats, Normalization, TomographySet,
};
