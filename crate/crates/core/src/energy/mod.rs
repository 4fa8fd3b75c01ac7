//! Compensators, weighted energies and the energy-inequality audit.

mod audit;
mod boundary;
mod functional;
mod gronwall;
mod kawashima;
mod weight;

pub use audit::{audit_linearized, LinearizedAudit, LinearizedAuditOptions};
pub use boundary::{boundary_measure, BoundaryMeasure, TraceSeries};
pub use functional::{derivatives, energy_functional, weighted_sobolev_sq, EnergyParams, EnergyValue};
pub use gronwall::{
    energy_series, gronwall_audit, minimal_constant, write_energy_csv, GronwallOptions, GronwallReport, GronwallSample,
};
pub use kawashima::{compensated_margin, kawashima_family, kawashima_k, KawashimaMatrix};
pub use weight::{weight_alpha, WeightProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("no compensator gives positive dissipation (best margin {theta2:.3e} at xi = {xi:?})")]
    Infeasible { theta2: f64, xi: Vec<f64> },
    #[error("time derivative of order {order} needs {needed} samples, got {available}")]
    InsufficientSampling { order: usize, needed: usize, available: usize },
    #[error("no feasible (C, theta) pair (best C = {best_c:.3e} at theta = {theta:.3e})")]
    NoFeasiblePair { best_c: f64, theta: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
