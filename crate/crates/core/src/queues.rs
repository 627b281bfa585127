//! Queue state and the per-slot queue recursions: data queues `Q`, battery
//! `S`, and the virtual profit queues `Y` and `Z`.

use thiserror::Error;

use crate::scenario::{derive_perturbations, Scenario};
use crate::units::Energy;

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("discharge {discharge} outside [0, {level}]")]
    Discharge { discharge: Energy, level: Energy },
    #[error("charge {charge} outside [0, {limit}]")]
    Charge { charge: Energy, limit: Energy },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    /// `Q_nu`, bits, indexed `[n][u]`.
    pub q_bits: Vec<Vec<f64>>,
    /// Battery level `S_n`.
    pub s_energy: Vec<Energy>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Perturbation `ρ_n`.
    pub rho: Vec<Energy>,
}

impl QueueState {
    /// All queues empty, perturbation from the energy configuration.
    pub fn empty(scenario: &Scenario) -> Self {
        let n = scenario.n_sbs();
        QueueState {
            q_bits: scenario
                .network
                .users_per_sbs
                .iter()
                .map(|&u| vec![0.0; u])
                .collect(),
            s_energy: vec![Energy::ZERO; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
            rho: derive_perturbations(&scenario.energy, n),
        }
    }

    pub fn n_sbs(&self) -> usize {
        self.y.len()
    }

    /// `W_n = Y_n + Z_n`.
    pub fn w(&self, n: usize) -> f64 {
        self.y[n] + self.z[n]
    }

    /// `S_n - ρ_n` in watt·slot.
    pub fn energy_offset(&self, n: usize) -> f64 {
        (self.s_energy[n] - self.rho[n]).as_units()
    }

    pub fn total_backlog_bits(&self) -> f64 {
        self.q_bits.iter().flatten().sum()
    }
}

/// `Q' = [Q - R]^+ + D`.
pub fn update_data_queue(q: f64, served: f64, admitted: f64) -> f64 {
    (q - served).max(0.0) + admitted
}

/// Bounds on one slot's battery action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLimits {
    pub capacity: Energy,
    pub harvest: Energy,
}

/// `S' = [S - F]^+ + J`, rejecting `F > S` and `J > min(S^max - S, E)`.
pub fn update_energy_queue(
    level: Energy,
    discharge: Energy,
    charge: Energy,
    limits: EnergyLimits,
) -> Result<Energy, QueueError> {
    if discharge.is_negative() || discharge > level {
        return Err(QueueError::Discharge { discharge, level });
    }
    let limit = (limits.capacity - level).min(limits.harvest);
    if charge.is_negative() || charge > limit {
        return Err(QueueError::Charge { charge, limit });
    }
    Ok((level - discharge).positive_part() + charge)
}

/// Arrival and departure of the virtual queues for one SBS and slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualFlows {
    pub y_in: f64,
    pub y_out: f64,
    pub z_in: f64,
    pub z_out: f64,
}

impl VirtualFlows {
    /// `y_in = μ + C^min + φG`, `y_out = z_out = ΣD + O`, `z_in = C^min + φG`.
    pub fn new(mu: f64, c_min: f64, grid_cost: f64, admitted_bits: f64, payment: f64) -> Self {
        let out = admitted_bits + payment;
        VirtualFlows {
            y_in: mu + c_min + grid_cost,
            y_out: out,
            z_in: c_min + grid_cost,
            z_out: out,
        }
    }
}

pub fn update_virtual_queues(y: f64, z: f64, flows: &VirtualFlows) -> (f64, f64) {
    (
        (y - flows.y_out).max(0.0) + flows.y_in,
        (z - flows.z_out).max(0.0) + flows.z_in,
    )
}

/// `L = ½ [Σ Q² + Σ (S - ρ)² + Σ Y² + Σ Z²]`.
pub fn lyapunov_value(state: &QueueState) -> f64 {
    let q: f64 = state.q_bits.iter().flatten().map(|q| q * q).sum();
    let s: f64 = (0..state.n_sbs())
        .map(|n| state.energy_offset(n).powi(2))
        .sum();
    let y: f64 = state.y.iter().map(|y| y * y).sum();
    let z: f64 = state.z.iter().map(|z| z * z).sum();
    0.5 * (q + s + y + z)
}

/// Checks `Q'² ≤ Q² + R² + D² + 2Q(D - R)` with relative slack `rel_tol`.
pub fn quadratic_bound_holds(
    q: f64,
    served: f64,
    admitted: f64,
    q_next: f64,
    rel_tol: f64,
) -> bool {
    let lhs = q_next * q_next;
    let rhs = q * q + served * served + admitted * admitted + 2.0 * q * (admitted - served);
    let scale = (q * q + served * served + admitted * admitted).max(1.0);
    lhs <= rhs + rel_tol * scale
}
