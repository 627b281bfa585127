//! Experiment configuration: topology, radio, energy, economics, traffic and
//! solver settings.
//!
//! The on-disk format is TOML. Every physical quantity carries its unit in the
//! key name (`_w`, `_hz`, `_dbm`, `_bits`, `_m`, `_ws` for watt·slot). Omitted
//! keys take the defaults below; per-SBS vectors left empty are expanded from
//! the scalar defaults when the file is loaded, so a loaded scenario always
//! serializes with every vector spelled out.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::Energy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// A 2-D position in meters.
pub type Point = [f64; 2];

pub fn distance_m(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_sbs: usize,
    /// SUEs attached to each SBS.
    pub users_per_sbs: Vec<usize>,
    pub n_subchannels: usize,
    pub total_bandwidth_hz: f64,
    /// Per-subchannel bandwidth; empty means an equal split of the band.
    pub subchannel_bandwidth_hz: Vec<f64>,
    /// Band each SBS contributes to the common pool; empty means equal split.
    pub initial_band_hz: Vec<f64>,
    pub mbs_position_m: Point,
    pub sbs_positions_m: Vec<Point>,
    pub sue_positions_m: Vec<Vec<Point>>,
    /// Radius of the ring the SBSs are placed on when positions are omitted.
    pub sbs_ring_radius_m: f64,
    /// Distance of SUEs from their SBS when positions are omitted.
    pub sue_distance_m: f64,
    /// MUEs are dropped uniformly in a disk of this radius around the MBS.
    pub macro_radius_m: f64,
    /// Slot length; a subchannel carries `τ ϖ log2(1 + γ)` bits per slot.
    pub slot_duration_s: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_sbs: 3,
            users_per_sbs: Vec::new(),
            n_subchannels: 6,
            total_bandwidth_hz: 30e6,
            subchannel_bandwidth_hz: Vec::new(),
            initial_band_hz: Vec::new(),
            mbs_position_m: [0.0, 0.0],
            sbs_positions_m: Vec::new(),
            sue_positions_m: Vec::new(),
            sbs_ring_radius_m: 150.0,
            sue_distance_m: 25.0,
            macro_radius_m: 300.0,
            slot_duration_s: 1e-3,
        }
    }
}

/// Default SUE count of SBS `k`: cycles through 2, 3, 4 so that SBSs differ
/// in load.
pub fn default_users(k: usize) -> usize {
    2 + k % 3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathlossModel {
    /// `PL(dB) = ref_loss_db + 10 * exponent * log10(d / ref_distance_m)`,
    /// with `d` clamped below at `ref_distance_m`.
    LogDistance {
        ref_loss_db: f64,
        ref_distance_m: f64,
        exponent: f64,
    },
}

impl Default for PathlossModel {
    fn default() -> Self {
        PathlossModel::LogDistance {
            ref_loss_db: 37.0,
            ref_distance_m: 1.0,
            exponent: 3.5,
        }
    }
}

impl PathlossModel {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        match *self {
            PathlossModel::LogDistance {
                ref_loss_db,
                ref_distance_m,
                exponent,
            } => {
                let d = distance_m.max(ref_distance_m);
                ref_loss_db + 10.0 * exponent * (d / ref_distance_m).log10()
            }
        }
    }

    /// Linear power gain (`10^(-PL/10)`).
    pub fn gain(&self, distance_m: f64) -> f64 {
        10f64.powf(-self.loss_db(distance_m) / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub p_sbs_max_w: f64,
    pub p_mbs_dbm: f64,
    /// Cross-tier interference cap per subchannel at the MUE.
    pub interference_cap_w: f64,
    pub noise_density_dbm_hz: f64,
    pub static_power_w: f64,
    pub power_slope: f64,
    pub pathloss: PathlossModel,
    pub shadowing_sigma_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            p_sbs_max_w: 0.1,
            p_mbs_dbm: 40.0,
            interference_cap_w: 2e-10,
            noise_density_dbm_hz: -174.0,
            static_power_w: 3.2,
            power_slope: 4.0,
            pathloss: PathlossModel::default(),
            shadowing_sigma_db: 10.0,
        }
    }
}

impl RadioConfig {
    /// `P^max = P^c + Δ p^max`, the largest per-slot draw of one SBS.
    pub fn peak_consumption_w(&self) -> f64 {
        self.static_power_w + self.power_slope * self.p_sbs_max_w
    }

    pub fn mbs_power_w(&self) -> f64 {
        dbm_to_w(self.p_mbs_dbm)
    }

    pub fn noise_density_w_hz(&self) -> f64 {
        dbm_to_w(self.noise_density_dbm_hz)
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    /// Battery capacity `S^max`.
    pub battery_capacity_ws: f64,
    /// Largest per-slot harvest `E^max`.
    pub harvest_max_ws: f64,
    pub harvest_mean_ws: f64,
    /// Harvest is `E^max * min(K, levels) / levels` with `K` Poisson.
    pub harvest_levels: u32,
    /// Grid price `φ` in profit units per watt·slot.
    pub grid_price_phi: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            battery_capacity_ws: 500.0,
            harvest_max_ws: 60.0,
            harvest_mean_ws: 2.0,
            harvest_levels: 10,
            grid_price_phi: 0.1,
        }
    }
}

impl EnergyConfig {
    pub fn capacity(&self) -> Energy {
        Energy::from_units(self.battery_capacity_ws)
    }

    pub fn harvest_max(&self) -> Energy {
        Energy::from_units(self.harvest_max_ws)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicConfig {
    /// `q_n^max`, profit units per Hz; empty means the scalar default.
    pub price_cap_per_hz: Vec<f64>,
    /// `C_n^min`; empty means zero for every SBS.
    pub c_min: Vec<f64>,
    /// `μ_n^max`; empty means `U_n A^max + q_n^max F`.
    pub mu_max: Vec<f64>,
    /// Lyapunov tradeoff `V`.
    pub v_param: f64,
}

impl Default for EconomicConfig {
    fn default() -> Self {
        Self {
            price_cap_per_hz: Vec::new(),
            c_min: Vec::new(),
            mu_max: Vec::new(),
            v_param: 10.0,
        }
    }
}

pub const DEFAULT_PRICE_CAP_PER_HZ: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub arrival_mean_pkts: f64,
    pub packet_size_bits: f64,
    /// Truncation `A^max` of the per-slot arrival.
    pub a_max_bits: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            arrival_mean_pkts: 4.0,
            packet_size_bits: 5000.0,
            a_max_bits: 12.0 * 5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative multiplier change below which the subgradient loop stops.
    pub tolerance: f64,
    /// Iteration budget used when scoring candidate SBS pairs.
    pub benefit_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            benefit_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirtualSbsStats {
    /// Means of the real SBSs' values in the current slot.
    CurrentSlot,
    /// Means over the trailing `virtual_window_slots` slots.
    TrailingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingConfig {
    pub virtual_stats: VirtualSbsStats,
    pub virtual_window_slots: usize,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            virtual_stats: VirtualSbsStats::CurrentSlot,
            virtual_window_slots: 20,
        }
    }
}

/// Complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default = "Scenario::unresolved", deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkConfig,
    pub radio: RadioConfig,
    pub energy: EnergyConfig,
    pub economic: EconomicConfig,
    pub traffic: TrafficConfig,
    pub solver: SolverConfig,
    pub pairing: PairingConfig,
}

impl Default for Scenario {
    /// The resolved default scenario (three SBSs sharing a 30 MHz band).
    fn default() -> Self {
        let mut s = Scenario::unresolved();
        s.resolve();
        s
    }
}

impl Scenario {
    /// Defaults with every derived vector left empty.
    fn unresolved() -> Self {
        Scenario {
            network: NetworkConfig::default(),
            radio: RadioConfig::default(),
            energy: EnergyConfig::default(),
            economic: EconomicConfig::default(),
            traffic: TrafficConfig::default(),
            solver: SolverConfig::default(),
            pairing: PairingConfig::default(),
        }
    }
}

/// Reads, resolves and validates a TOML scenario file. Validation warnings
/// are reported through `log`.
pub fn load_config(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut scenario: Scenario =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        scenario.resolve();
        for warning in scenario.validate()? {
            log::warn!("{warning}");
        }
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    /// Fills every empty per-SBS / per-subchannel vector from its default.
    /// Idempotent.
    pub fn resolve(&mut self) {
        let net = &mut self.network;
        let n = net.n_sbs;
        let m = net.n_subchannels;
        if net.users_per_sbs.is_empty() {
            net.users_per_sbs = (0..n).map(default_users).collect();
        }
        if net.subchannel_bandwidth_hz.is_empty() && m > 0 {
            net.subchannel_bandwidth_hz = vec![net.total_bandwidth_hz / m as f64; m];
        }
        if net.initial_band_hz.is_empty() && n > 0 {
            net.initial_band_hz = vec![net.total_bandwidth_hz / n as f64; n];
        }
        if net.sbs_positions_m.is_empty() {
            net.sbs_positions_m = (0..n)
                .map(|k| {
                    let angle = 2.0 * PI * k as f64 / n.max(1) as f64 + PI / 6.0;
                    [
                        net.mbs_position_m[0] + net.sbs_ring_radius_m * angle.cos(),
                        net.mbs_position_m[1] + net.sbs_ring_radius_m * angle.sin(),
                    ]
                })
                .collect();
        }
        if net.sue_positions_m.is_empty() && net.sbs_positions_m.len() == n {
            net.sue_positions_m = (0..n)
                .map(|k| {
                    let users = net.users_per_sbs.get(k).copied().unwrap_or(0);
                    let centre = net.sbs_positions_m[k];
                    (0..users)
                        .map(|u| {
                            let angle = 2.0 * PI * u as f64 / users.max(1) as f64 + 0.7 * k as f64;
                            [
                                centre[0] + net.sue_distance_m * angle.cos(),
                                centre[1] + net.sue_distance_m * angle.sin(),
                            ]
                        })
                        .collect()
                })
                .collect();
        }

        let traffic_a_max = self.traffic.a_max_bits;
        let econ = &mut self.economic;
        if econ.price_cap_per_hz.is_empty() {
            econ.price_cap_per_hz = vec![DEFAULT_PRICE_CAP_PER_HZ; n];
        }
        if econ.c_min.is_empty() {
            econ.c_min = vec![0.0; n];
        }
        if econ.mu_max.is_empty() && econ.price_cap_per_hz.len() == n {
            econ.mu_max = (0..n)
                .map(|k| {
                    let users = self.network.users_per_sbs.get(k).copied().unwrap_or(0) as f64;
                    users * traffic_a_max
                        + econ.price_cap_per_hz[k] * self.network.total_bandwidth_hz
                })
                .collect();
        }
    }

    /// Checks every invariant. Returns non-fatal warnings on success.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        let net = &self.network;
        let n = net.n_sbs;
        let m = net.n_subchannels;

        if n < 1 {
            return Err(invalid("network.n_sbs", "need at least one SBS"));
        }
        if m < 1 {
            return Err(invalid(
                "network.n_subchannels",
                "need at least one subchannel",
            ));
        }
        if m < n {
            return Err(invalid(
                "network.n_subchannels",
                format!("{m} subchannels cannot give each of {n} SBSs its own band"),
            ));
        }
        check_len("network.users_per_sbs", net.users_per_sbs.len(), n)?;
        if net.users_per_sbs.iter().any(|&u| u < 1) {
            return Err(invalid(
                "network.users_per_sbs",
                "every SBS needs at least one SUE",
            ));
        }
        positive("network.total_bandwidth_hz", net.total_bandwidth_hz)?;
        positive("network.slot_duration_s", net.slot_duration_s)?;
        check_len(
            "network.subchannel_bandwidth_hz",
            net.subchannel_bandwidth_hz.len(),
            m,
        )?;
        for &w in &net.subchannel_bandwidth_hz {
            positive("network.subchannel_bandwidth_hz", w)?;
        }
        let total: f64 = net.subchannel_bandwidth_hz.iter().sum();
        if !close(total, net.total_bandwidth_hz) {
            return Err(invalid(
                "network.subchannel_bandwidth_hz",
                format!("sums to {total} Hz, expected {}", net.total_bandwidth_hz),
            ));
        }
        check_len("network.initial_band_hz", net.initial_band_hz.len(), n)?;
        for &b in &net.initial_band_hz {
            non_negative("network.initial_band_hz", b)?;
        }
        let total: f64 = net.initial_band_hz.iter().sum();
        if !close(total, net.total_bandwidth_hz) {
            return Err(invalid(
                "network.initial_band_hz",
                format!("sums to {total} Hz, expected {}", net.total_bandwidth_hz),
            ));
        }
        check_len("network.sbs_positions_m", net.sbs_positions_m.len(), n)?;
        check_len("network.sue_positions_m", net.sue_positions_m.len(), n)?;
        for (k, sues) in net.sue_positions_m.iter().enumerate() {
            check_len("network.sue_positions_m", sues.len(), net.users_per_sbs[k])?;
        }
        let all_points = net
            .sbs_positions_m
            .iter()
            .chain(net.sue_positions_m.iter().flatten())
            .chain(std::iter::once(&net.mbs_position_m));
        for p in all_points {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(invalid("network positions", "coordinates must be finite"));
            }
        }
        positive("network.macro_radius_m", net.macro_radius_m)?;

        let radio = &self.radio;
        positive("radio.p_sbs_max_w", radio.p_sbs_max_w)?;
        finite("radio.p_mbs_dbm", radio.p_mbs_dbm)?;
        positive("radio.interference_cap_w", radio.interference_cap_w)?;
        finite("radio.noise_density_dbm_hz", radio.noise_density_dbm_hz)?;
        non_negative("radio.static_power_w", radio.static_power_w)?;
        positive("radio.power_slope", radio.power_slope)?;
        non_negative("radio.shadowing_sigma_db", radio.shadowing_sigma_db)?;
        match radio.pathloss {
            PathlossModel::LogDistance {
                ref_loss_db,
                ref_distance_m,
                exponent,
            } => {
                finite("radio.pathloss.ref_loss_db", ref_loss_db)?;
                positive("radio.pathloss.ref_distance_m", ref_distance_m)?;
                positive("radio.pathloss.exponent", exponent)?;
            }
        }

        let energy = &self.energy;
        positive("energy.harvest_max_ws", energy.harvest_max_ws)?;
        positive("energy.battery_capacity_ws", energy.battery_capacity_ws)?;
        if energy.harvest_max_ws > energy.battery_capacity_ws {
            return Err(invalid(
                "energy.harvest_max_ws",
                "must not exceed energy.battery_capacity_ws",
            ));
        }
        non_negative("energy.harvest_mean_ws", energy.harvest_mean_ws)?;
        if energy.harvest_mean_ws > energy.harvest_max_ws {
            return Err(invalid(
                "energy.harvest_mean_ws",
                "must not exceed energy.harvest_max_ws",
            ));
        }
        if energy.harvest_levels < 1 {
            return Err(invalid("energy.harvest_levels", "must be at least 1"));
        }
        non_negative("energy.grid_price_phi", energy.grid_price_phi)?;
        let headroom = energy.battery_capacity_ws - energy.harvest_max_ws;
        if headroom < radio.peak_consumption_w() {
            warnings.push(format!(
                "battery headroom S^max - E^max = {headroom} is below the peak draw {}; \
                 slots above the perturbation level will top up from the grid",
                radio.peak_consumption_w()
            ));
        }

        let econ = &self.economic;
        check_len("economic.price_cap_per_hz", econ.price_cap_per_hz.len(), n)?;
        for &q in &econ.price_cap_per_hz {
            non_negative("economic.price_cap_per_hz", q)?;
        }
        check_len("economic.c_min", econ.c_min.len(), n)?;
        for &c in &econ.c_min {
            non_negative("economic.c_min", c)?;
        }
        check_len("economic.mu_max", econ.mu_max.len(), n)?;
        for &mu in &econ.mu_max {
            positive("economic.mu_max", mu)?;
        }
        non_negative("economic.v_param", econ.v_param)?;

        let traffic = &self.traffic;
        positive("traffic.arrival_mean_pkts", traffic.arrival_mean_pkts)?;
        positive("traffic.packet_size_bits", traffic.packet_size_bits)?;
        finite("traffic.a_max_bits", traffic.a_max_bits)?;
        if traffic.a_max_bits < traffic.arrival_mean_pkts * traffic.packet_size_bits {
            return Err(invalid(
                "traffic.a_max_bits",
                "must be at least arrival_mean_pkts * packet_size_bits",
            ));
        }

        let solver = &self.solver;
        if solver.max_iterations < 1 {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }
        if solver.benefit_iterations < 1 {
            return Err(invalid("solver.benefit_iterations", "must be at least 1"));
        }
        positive("solver.tolerance", solver.tolerance)?;
        if self.pairing.virtual_stats == VirtualSbsStats::TrailingWindow
            && self.pairing.virtual_window_slots < 1
        {
            return Err(invalid(
                "pairing.virtual_window_slots",
                "must be at least 1",
            ));
        }
        Ok(warnings)
    }

    pub fn n_sbs(&self) -> usize {
        self.network.n_sbs
    }

    pub fn n_subchannels(&self) -> usize {
        self.network.n_subchannels
    }

    pub fn users(&self, sbs: usize) -> usize {
        self.network.users_per_sbs[sbs]
    }

    pub fn total_users(&self) -> usize {
        self.network.users_per_sbs.iter().sum()
    }

    /// SBS that owns subchannel `m` in the initial partition (contiguous blocks).
    pub fn band_owner(&self, m: usize) -> usize {
        m * self.n_sbs() / self.n_subchannels()
    }

    /// Subchannels in the initial band `M_n` of SBS `n`.
    pub fn own_subchannels(&self, n: usize) -> Vec<usize> {
        (0..self.n_subchannels())
            .filter(|&m| self.band_owner(m) == n)
            .collect()
    }

    /// Noise power `σ² = ϖ_m N_0` on subchannel `m`.
    pub fn noise_w(&self, m: usize) -> f64 {
        self.network.subchannel_bandwidth_hz[m] * self.radio.noise_density_w_hz()
    }
}

/// Perturbation `ρ_n = S_n^max - E_n^max` for every SBS.
pub fn derive_perturbations(energy: &EnergyConfig, n_sbs: usize) -> Vec<Energy> {
    vec![energy.capacity() - energy.harvest_max(); n_sbs]
}

fn check_len(field: &str, got: usize, want: usize) -> Result<(), ConfigError> {
    if got == want {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("has {got} entries, expected {want}"),
        ))
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative, got {v}")))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_setup() {
        let s = Scenario::default();
        assert!(s.validate().unwrap().is_empty());
        assert_eq!(s.n_sbs(), 3);
        assert_eq!(s.network.total_bandwidth_hz, 30e6);
        let band: f64 = s.network.subchannel_bandwidth_hz.iter().sum();
        assert_eq!(band, 30e6);
        assert_eq!(s.radio.p_sbs_max_w, 0.1);
        assert_eq!(s.radio.noise_density_dbm_hz, -174.0);
        assert_eq!(s.radio.static_power_w, 3.2);
        assert_eq!(s.radio.power_slope, 4.0);
        assert_eq!(s.radio.p_mbs_dbm, 40.0);
        assert_eq!(s.radio.shadowing_sigma_db, 10.0);
        assert_eq!(s.traffic.arrival_mean_pkts, 4.0);
        assert_eq!(s.traffic.packet_size_bits, 5000.0);
        assert_eq!(s.energy.battery_capacity_ws, 500.0);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s, Scenario::default());
    }

    #[test]
    fn omitted_noise_density_is_filled() {
        let s = Scenario::from_toml_str("[radio]\np_sbs_max_w = 0.2\n").unwrap();
        assert_eq!(s.radio.noise_density_dbm_hz, -174.0);
        assert_eq!(s.radio.p_sbs_max_w, 0.2);
    }

    #[test]
    fn unbalanced_initial_band_is_rejected() {
        let text = "[network]\ninitial_band_hz = [10e6, 10e6, 5e6]\n";
        match Scenario::from_toml_str(text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "network.initial_band_hz"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_file_is_a_parse_error() {
        assert!(matches!(
            Scenario::from_toml_str("[network\nn_sbs = 3"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            Scenario::from_toml_str("[network]\nbogus_key = 1\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn changing_sbs_count_regenerates_layout() {
        let s = Scenario::from_toml_str("[network]\nn_sbs = 4\nn_subchannels = 8\n").unwrap();
        assert_eq!(s.network.sbs_positions_m.len(), 4);
        assert_eq!(s.network.initial_band_hz, vec![7.5e6; 4]);
        assert_eq!(s.economic.mu_max.len(), 4);
    }

    #[test]
    fn harvest_above_capacity_is_rejected() {
        let text = "[energy]\nbattery_capacity_ws = 50.0\nharvest_max_ws = 60.0\n";
        assert!(matches!(
            Scenario::from_toml_str(text),
            Err(ConfigError::Invalid { ref field, .. }) if field == "energy.harvest_max_ws"
        ));
    }

    #[test]
    fn small_battery_headroom_warns() {
        let mut s = Scenario::default();
        s.energy.battery_capacity_ws = 62.0;
        let warnings = s.validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn perturbation_is_capacity_minus_harvest_max() {
        let mut e = EnergyConfig::default();
        assert_eq!(
            derive_perturbations(&e, 3),
            vec![Energy::from_units(440.0); 3]
        );
        e.battery_capacity_ws = 60.0;
        assert_eq!(derive_perturbations(&e, 1), vec![Energy::ZERO]);
        e.battery_capacity_ws = 100.0;
        e.harvest_max_ws = 25.0;
        assert_eq!(derive_perturbations(&e, 2)[1], Energy::from_units(75.0));
    }

    #[test]
    fn band_partition_is_contiguous_and_covering() {
        let s = Scenario::default();
        let mut seen = Vec::new();
        for n in 0..s.n_sbs() {
            let own = s.own_subchannels(n);
            assert!(!own.is_empty());
            seen.extend(own);
        }
        assert_eq!(seen, (0..s.n_subchannels()).collect::<Vec<_>>());
    }

    #[test]
    fn pathloss_clamps_short_distances() {
        let pl = PathlossModel::default();
        assert_eq!(pl.loss_db(0.0), 37.0);
        assert!(pl.gain(0.0).is_finite());
        assert!((pl.loss_db(10.0) - 72.0).abs() < 1e-12);
    }
}
