//! The per-slot online control loop: admission, auxiliary variable, pairing
//! and pricing, resource allocation, battery management and queue updates.

use std::collections::VecDeque;

use thiserror::Error;

use crate::allocator::{self, ChannelSpec, Instance, Participant, SolveOptions};
use crate::baselines::PolicyKind;
use crate::channel::{power_consumption, ChannelError};
use crate::pairing::{self, PairMatching, PairingError};
use crate::queues::{
    update_data_queue, update_energy_queue, update_virtual_queues, EnergyLimits, QueueError,
    QueueState, VirtualFlows,
};
use crate::scenario::{Scenario, VirtualSbsStats};
use crate::stochastic::SlotState;
use crate::units::Energy;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("queue update failed for SBS {sbs}: {source}")]
    Queue { sbs: usize, source: QueueError },
    #[error("power model rejected SBS {sbs}: {source}")]
    Power { sbs: usize, source: ChannelError },
    #[error(transparent)]
    Pairing(#[from] PairingError),
}

/// `D = A` when `W ≥ Q`, otherwise `0`.
pub fn admission_control(w: f64, q: f64, arrivals: f64) -> f64 {
    if w >= q {
        arrivals
    } else {
        0.0
    }
}

/// Ratio between the floor and the cap of the auxiliary variable.
pub const MU_FLOOR_RATIO: f64 = 1e-9;

/// Maximizer of `V ln μ - Y μ` on `[μ_floor, μ_max]`.
pub fn auxiliary_decision(v: f64, y: f64, mu_max: f64) -> f64 {
    if y * mu_max <= v {
        mu_max
    } else {
        (v / y).max(MU_FLOOR_RATIO * mu_max)
    }
}

/// Lease and rent prices of the two SBSs of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairPrices {
    pub alpha_i: f64,
    pub beta_i: f64,
    pub alpha_j: f64,
    pub beta_j: f64,
}

/// The SBS with the larger `W` leases at its cap, the other rents at its
/// cap; equal `W` means no trade.
pub fn pricing(w_i: f64, w_j: f64, cap_i: f64, cap_j: f64) -> PairPrices {
    if w_i > w_j {
        PairPrices {
            alpha_i: cap_i,
            beta_j: cap_j,
            ..PairPrices::default()
        }
    } else if w_j > w_i {
        PairPrices {
            beta_i: cap_i,
            alpha_j: cap_j,
            ..PairPrices::default()
        }
    } else {
        PairPrices::default()
    }
}

/// `O = α (B⁰ - B)^+ - β (B - B⁰)^+`.
pub fn sharing_payment(alpha: f64, beta: f64, band_hz: f64, initial_band_hz: f64) -> f64 {
    alpha * (initial_band_hz - band_hz).max(0.0) - beta * (band_hz - initial_band_hz).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatteryCase {
    /// `S > ρ`: discharge only.
    AboveTarget,
    /// `ρ - φW < S ≤ ρ`: charge, no planned grid draw.
    Charging,
    /// `S ≤ ρ - φW`: charge and top up from the grid.
    GridTopUp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDecision {
    /// `F`.
    pub discharge: Energy,
    /// `J`.
    pub charge: Energy,
    /// `G`.
    pub grid: Energy,
    pub case: BatteryCase,
    /// Grid energy drawn in a case that plans none, to keep `F + G = P`.
    pub balance_override: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryInput {
    pub level: Energy,
    pub rho: Energy,
    /// `φ W` in watt·slot.
    pub grid_weight: f64,
    pub demand: Energy,
    pub harvest: Energy,
    pub capacity: Energy,
}

pub fn battery_case(level: Energy, rho: Energy, grid_weight: f64) -> BatteryCase {
    if level > rho {
        BatteryCase::AboveTarget
    } else if level.as_units() > rho.as_units() - grid_weight {
        BatteryCase::Charging
    } else {
        BatteryCase::GridTopUp
    }
}

pub fn battery_management(input: BatteryInput) -> EnergyDecision {
    let case = battery_case(input.level, input.rho, input.grid_weight);
    let discharge = input.demand.min(input.level);
    let charge = match case {
        BatteryCase::AboveTarget => Energy::ZERO,
        _ => (input.capacity - input.level)
            .positive_part()
            .min(input.harvest),
    };
    let deficit = input.demand - discharge;
    let balance_override = case != BatteryCase::GridTopUp && deficit > Energy::ZERO;
    if balance_override {
        log::trace!("grid covers {deficit} in {case:?} to keep power balance");
    }
    EnergyDecision {
        discharge,
        charge,
        grid: deficit.positive_part(),
        case,
        balance_override,
    }
}

/// Per-SBS decisions of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    /// `D_nu`.
    pub admitted_bits: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `O_n`.
    pub sharing_payment: Vec<f64>,
    pub energy: Vec<EnergyDecision>,
}

/// One subchannel in use: `(sbs, sue, power_w)`.
pub type SubchannelUse = Option<(usize, usize, f64)>;

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub decision: ControlDecision,
    /// Network-wide assignment, one entry per subchannel.
    pub assignment: Vec<SubchannelUse>,
    /// `R_nu` in bits.
    pub served_bits: Vec<Vec<f64>>,
    /// `B_n` in Hz.
    pub band_hz: Vec<f64>,
    /// `Σ x p` per SBS.
    pub transmit_w: Vec<f64>,
    /// `P_n` for the slot.
    pub consumption: Vec<Energy>,
    /// Bargaining partner of each SBS, `None` when operating alone.
    pub partner: Vec<Option<usize>>,
    /// Allocator objective summed over groups.
    pub objective: f64,
    pub solver_iterations: usize,
    pub next: QueueState,
}

/// A member of an allocation group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    Real(usize),
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chan {
    Real(usize),
    Virtual(usize),
}

/// Real SBSs sharing a set of subchannels with fixed prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub members: Vec<usize>,
    pub channels: Vec<usize>,
    /// `(α, β)` per member.
    pub prices: Vec<(f64, f64)>,
}

impl Group {
    pub fn solo(n: usize, channels: Vec<usize>) -> Self {
        Group {
            members: vec![n],
            channels,
            prices: vec![(0.0, 0.0)],
        }
    }
}

/// Averaged statistics standing in for the virtual SBS.
#[derive(Debug, Clone, PartialEq)]
struct VirtualStats {
    participant: Participant,
    channel: ChannelSpec,
    /// Gain and MBS interference per virtual SUE on a virtual subchannel.
    gain: Vec<f64>,
    interference: Vec<f64>,
    cross_gain: f64,
}

/// Read-only view of the state an allocation instance is built from.
struct SlotView<'a> {
    scenario: &'a Scenario,
    slot: &'a SlotState,
    queues: &'a QueueState,
    virtual_stats: Option<&'a VirtualStats>,
    virtual_channels: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

impl SlotView<'_> {
    fn participant(&self, n: usize, prices: (f64, f64)) -> Participant {
        let s = self.scenario;
        Participant {
            sbs: Some(n),
            queue_bits: self.queues.q_bits[n].clone(),
            w: self.queues.w(n),
            energy_offset: self.queues.energy_offset(n),
            grid_price: s.energy.grid_price_phi,
            p_max_w: s.radio.p_sbs_max_w,
            static_power_w: s.radio.static_power_w,
            power_slope: s.radio.power_slope,
            alpha: prices.0,
            beta: prices.1,
            initial_band_hz: s.network.initial_band_hz[n],
        }
    }

    fn channel(&self, m: usize) -> ChannelSpec {
        ChannelSpec {
            subchannel: Some(m),
            bandwidth_hz: self.scenario.network.subchannel_bandwidth_hz[m],
            slot_s: self.scenario.network.slot_duration_s,
            noise_w: self.scenario.noise_w(m),
            interference_cap_w: self.scenario.radio.interference_cap_w,
        }
    }

    fn virtual_stats(&self) -> &VirtualStats {
        self.virtual_stats
            .expect("virtual SBS statistics requested without a virtual SBS")
    }

    /// `(gain, interference)` of SUE `u` of `member` on `chan`.
    fn link(&self, member: Member, chan: Chan, u: usize) -> (f64, f64) {
        let slot = self.slot;
        match (member, chan) {
            (Member::Real(n), Chan::Real(m)) => {
                (slot.gain[n][m][u], slot.mbs_interference_w[n][m][u])
            }
            (Member::Real(n), Chan::Virtual(_)) => (
                mean(slot.gain[n].iter().map(|g| g[u])),
                mean(slot.mbs_interference_w[n].iter().map(|g| g[u])),
            ),
            (Member::Virtual, Chan::Real(m)) => {
                let n_sbs = slot.gain.len();
                (
                    mean((0..n_sbs).map(|n| slot.gain[n][m][u % slot.gain[n][m].len()])),
                    mean((0..n_sbs).map(|n| {
                        let i = &slot.mbs_interference_w[n][m];
                        i[u % i.len()]
                    })),
                )
            }
            (Member::Virtual, Chan::Virtual(_)) => {
                let v = self.virtual_stats();
                (v.gain[u], v.interference[u])
            }
        }
    }

    fn cross(&self, member: Member, chan: Chan) -> f64 {
        let slot = self.slot;
        match (member, chan) {
            (Member::Real(n), Chan::Real(m)) => slot.cross_gain[n][m],
            (Member::Real(n), Chan::Virtual(_)) => mean(slot.cross_gain[n].iter().copied()),
            (Member::Virtual, Chan::Real(m)) => mean(slot.cross_gain.iter().map(|row| row[m])),
            (Member::Virtual, Chan::Virtual(_)) => self.virtual_stats().cross_gain,
        }
    }

    fn instance(&self, members: &[(Member, (f64, f64))], channels: &[Chan]) -> Instance {
        let participants: Vec<Participant> = members
            .iter()
            .map(|&(m, prices)| match m {
                Member::Real(n) => self.participant(n, prices),
                Member::Virtual => self.virtual_stats().participant.clone(),
            })
            .collect();
        let specs = channels
            .iter()
            .map(|&c| match c {
                Chan::Real(m) => self.channel(m),
                Chan::Virtual(_) => self.virtual_stats().channel.clone(),
            })
            .collect();
        let mut gain = Vec::new();
        let mut interference = Vec::new();
        let mut cross = Vec::new();
        for (&(member, _), p) in members.iter().zip(&participants) {
            let mut g_k = Vec::new();
            let mut i_k = Vec::new();
            for &c in channels {
                let (g, i): (Vec<f64>, Vec<f64>) =
                    (0..p.users()).map(|u| self.link(member, c, u)).unzip();
                g_k.push(g);
                i_k.push(i);
            }
            gain.push(g_k);
            interference.push(i_k);
            cross.push(channels.iter().map(|&c| self.cross(member, c)).collect());
        }
        Instance {
            participants,
            channels: specs,
            gain,
            mbs_interference_w: interference,
            cross_gain: cross,
        }
    }

    fn own_channels(&self, member: Member) -> Vec<Chan> {
        match member {
            Member::Real(n) => self
                .scenario
                .own_subchannels(n)
                .into_iter()
                .map(Chan::Real)
                .collect(),
            Member::Virtual => (0..self.virtual_channels).map(Chan::Virtual).collect(),
        }
    }

    /// Current-slot mean statistics of all real SBSs.
    fn current_virtual_stats(&self) -> VirtualStats {
        let n_sbs = self.scenario.n_sbs();
        let members: Vec<Participant> = (0..n_sbs)
            .map(|n| self.participant(n, (0.0, 0.0)))
            .collect();
        let refs: Vec<&Participant> = members.iter().collect();
        let participant = pairing::average_participant(&refs);
        let all: Vec<usize> = (0..self.scenario.n_subchannels()).collect();
        let channel = ChannelSpec {
            subchannel: None,
            bandwidth_hz: mean(
                all.iter()
                    .map(|&m| self.scenario.network.subchannel_bandwidth_hz[m]),
            ),
            slot_s: self.scenario.network.slot_duration_s,
            noise_w: mean(all.iter().map(|&m| self.scenario.noise_w(m))),
            interference_cap_w: self.scenario.radio.interference_cap_w,
        };
        let slot = self.slot;
        let own_links = |u: usize, table: &Vec<Vec<Vec<f64>>>| {
            mean((0..n_sbs).flat_map(|n| {
                self.scenario
                    .own_subchannels(n)
                    .into_iter()
                    .map(move |m| table[n][m][u % table[n][m].len()])
            }))
        };
        VirtualStats {
            gain: (0..participant.users())
                .map(|u| own_links(u, &slot.gain))
                .collect(),
            interference: (0..participant.users())
                .map(|u| own_links(u, &slot.mbs_interference_w))
                .collect(),
            cross_gain: mean((0..n_sbs).flat_map(|n| {
                self.scenario
                    .own_subchannels(n)
                    .into_iter()
                    .map(move |m| slot.cross_gain[n][m])
            })),
            participant,
            channel,
        }
    }
}

/// Allocation instance of real SBSs `members` (with their `(α, β)`) over the
/// network subchannels `channels`.
pub fn group_instance(
    scenario: &Scenario,
    slot: &SlotState,
    queues: &QueueState,
    members: &[(usize, (f64, f64))],
    channels: &[usize],
) -> Instance {
    let view = SlotView {
        scenario,
        slot,
        queues,
        virtual_stats: None,
        virtual_channels: 0,
    };
    let members: Vec<(Member, (f64, f64))> =
        members.iter().map(|&(n, p)| (Member::Real(n), p)).collect();
    let chans: Vec<Chan> = channels.iter().map(|&m| Chan::Real(m)).collect();
    view.instance(&members, &chans)
}

fn average_stats(history: &VecDeque<VirtualStats>) -> VirtualStats {
    let last = history.back().expect("history is never empty here").clone();
    let k = history.len() as f64;
    let avg = |f: &dyn Fn(&VirtualStats) -> f64| history.iter().map(f).sum::<f64>() / k;
    let mut out = last.clone();
    out.participant.w = avg(&|v| v.participant.w);
    out.participant.energy_offset = avg(&|v| v.participant.energy_offset);
    for u in 0..out.participant.users() {
        out.participant.queue_bits[u] = avg(&|v| v.participant.queue_bits[u]);
        out.gain[u] = avg(&|v| v.gain[u]);
        out.interference[u] = avg(&|v| v.interference[u]);
    }
    out.cross_gain = avg(&|v| v.cross_gain);
    out
}

/// Runs the control loop for one policy, keeping the little state the
/// policy carries across slots.
#[derive(Debug, Clone)]
pub struct Controller {
    scenario: Scenario,
    policy: PolicyKind,
    history: VecDeque<VirtualStats>,
    last_matching: Option<PairMatching>,
}

impl Controller {
    pub fn new(scenario: &Scenario, policy: PolicyKind) -> Self {
        Controller {
            scenario: scenario.clone(),
            policy,
            history: VecDeque::new(),
            last_matching: None,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    /// Matching chosen in the most recent proposed-policy slot.
    pub fn last_matching(&self) -> Option<&PairMatching> {
        self.last_matching.as_ref()
    }

    fn solve_options(&self, iterations: usize) -> SolveOptions {
        SolveOptions {
            max_iterations: iterations,
            tolerance: self.scenario.solver.tolerance,
        }
    }

    /// Pairs SBSs through the benefit matrix and prices each pair.
    fn proposed_groups(
        &mut self,
        slot: &SlotState,
        queues: &QueueState,
    ) -> Result<Vec<Group>, ControlError> {
        let s = &self.scenario;
        let n = s.n_sbs();
        if n < 2 {
            return Ok((0..n)
                .map(|k| Group::solo(k, s.own_subchannels(k)))
                .collect());
        }
        let has_virtual = n % 2 == 1;
        let virtual_channels = ((s.n_subchannels() as f64 / n as f64).round() as usize).max(1);
        let mut view = SlotView {
            scenario: s,
            slot,
            queues,
            virtual_stats: None,
            virtual_channels,
        };
        let stats = if has_virtual {
            let current = view.current_virtual_stats();
            match s.pairing.virtual_stats {
                VirtualSbsStats::CurrentSlot => Some(current),
                VirtualSbsStats::TrailingWindow => {
                    self.history.push_back(current);
                    while self.history.len() > s.pairing.virtual_window_slots.max(1) {
                        self.history.pop_front();
                    }
                    Some(average_stats(&self.history))
                }
            }
        } else {
            None
        };
        view.virtual_stats = stats.as_ref();
        let member = |i: usize| {
            if i < n {
                Member::Real(i)
            } else {
                Member::Virtual
            }
        };
        let caps = &s.economic.price_cap_per_hz;
        let w = |i: usize| match member(i) {
            Member::Real(k) => queues.w(k),
            Member::Virtual => view.virtual_stats().participant.w,
        };
        let pair_prices = |i: usize, j: usize| -> PairPrices {
            match (member(i), member(j)) {
                (Member::Real(a), Member::Real(b)) => pricing(w(i), w(j), caps[a], caps[b]),
                _ => PairPrices::default(),
            }
        };
        let size = n + usize::from(has_virtual);
        let opts = self.solve_options(s.solver.benefit_iterations);
        let view_ref = &view;
        let benefits = pairing::estimate_benefits(
            size,
            n,
            &opts,
            |i| {
                let m = member(i);
                view_ref.instance(&[(m, (0.0, 0.0))], &view_ref.own_channels(m))
            },
            |i, j| {
                let p = pair_prices(i, j);
                let mut channels = view_ref.own_channels(member(i));
                channels.extend(view_ref.own_channels(member(j)));
                view_ref.instance(
                    &[
                        (member(i), (p.alpha_i, p.beta_i)),
                        (member(j), (p.alpha_j, p.beta_j)),
                    ],
                    &channels,
                )
            },
        );
        let matching = pairing::match_pairs(&benefits)?;
        let mut groups = Vec::new();
        for &(i, j) in &matching.pairs {
            match (member(i), member(j)) {
                (Member::Real(a), Member::Real(b)) => {
                    let p = pair_prices(i, j);
                    if p == PairPrices::default() {
                        groups.push(Group::solo(a, s.own_subchannels(a)));
                        groups.push(Group::solo(b, s.own_subchannels(b)));
                    } else {
                        let mut channels = s.own_subchannels(a);
                        channels.extend(s.own_subchannels(b));
                        groups.push(Group {
                            members: vec![a, b],
                            channels,
                            prices: vec![(p.alpha_i, p.beta_i), (p.alpha_j, p.beta_j)],
                        });
                    }
                }
                (Member::Real(a), Member::Virtual) | (Member::Virtual, Member::Real(a)) => {
                    groups.push(Group::solo(a, s.own_subchannels(a)));
                }
                (Member::Virtual, Member::Virtual) => unreachable!("a single virtual SBS"),
            }
        }
        self.last_matching = Some(matching);
        Ok(groups)
    }

    /// Executes one slot and returns the decisions with the next queue state.
    pub fn run_slot(
        &mut self,
        slot: &SlotState,
        queues: &QueueState,
    ) -> Result<SlotOutcome, ControlError> {
        let n_sbs = self.scenario.n_sbs();
        let v = self.scenario.economic.v_param;

        // Step 1: admission. Step 2: auxiliary variable.
        let admitted_bits: Vec<Vec<f64>> = (0..n_sbs)
            .map(|n| {
                queues.q_bits[n]
                    .iter()
                    .zip(&slot.arrivals_bits[n])
                    .map(|(&q, &a)| admission_control(queues.w(n), q, a))
                    .collect()
            })
            .collect();
        let mu: Vec<f64> = (0..n_sbs)
            .map(|n| auxiliary_decision(v, queues.y[n], self.scenario.economic.mu_max[n]))
            .collect();

        // Step 3: grouping, pricing and allocation.
        let groups = match self.policy {
            PolicyKind::Proposed => self.proposed_groups(slot, queues)?,
            PolicyKind::Nsra => crate::baselines::nsra_groups(&self.scenario),
            PolicyKind::Tdraa => crate::baselines::tdraa_groups(&self.scenario, slot.t),
        };
        let s = &self.scenario;
        let opts = self.solve_options(s.solver.max_iterations);
        let mut alpha = vec![0.0; n_sbs];
        let mut beta = vec![0.0; n_sbs];
        let mut partner = vec![None; n_sbs];
        let mut assignment: Vec<SubchannelUse> = vec![None; s.n_subchannels()];
        let mut served_bits: Vec<Vec<f64>> =
            queues.q_bits.iter().map(|q| vec![0.0; q.len()]).collect();
        let mut band_hz = vec![0.0; n_sbs];
        let mut transmit_w = vec![0.0; n_sbs];
        let mut objective = 0.0;
        let mut solver_iterations = 0;
        let mut covered = vec![false; n_sbs];
        for group in &groups {
            for (k, &n) in group.members.iter().enumerate() {
                (alpha[n], beta[n]) = group.prices[k];
                covered[n] = true;
                if group.members.len() == 2 {
                    partner[n] = Some(group.members[1 - k]);
                }
            }
            if group.channels.is_empty() {
                continue;
            }
            let members: Vec<(usize, (f64, f64))> = group
                .members
                .iter()
                .copied()
                .zip(group.prices.iter().copied())
                .collect();
            let inst = group_instance(s, slot, queues, &members, &group.channels);
            let decision = allocator::solve(&inst, &opts);
            objective += decision.objective_value;
            solver_iterations += decision.iterations;
            let out = allocator::outcome(&inst, &decision.channel_use);
            for (k, &n) in group.members.iter().enumerate() {
                served_bits[n] = out.rate_bits[k].clone();
                band_hz[n] = out.band_hz[k];
                transmit_w[n] = out.transmit_w[k];
            }
            for (c, used) in decision.channel_use.iter().enumerate() {
                if let Some(cu) = used {
                    assignment[group.channels[c]] =
                        Some((group.members[cu.participant], cu.sue, cu.power_w));
                }
            }
        }
        debug_assert!(covered.iter().all(|&c| c), "every SBS belongs to a group");

        let payment: Vec<f64> = (0..n_sbs)
            .map(|n| sharing_payment(alpha[n], beta[n], band_hz[n], s.network.initial_band_hz[n]))
            .collect();

        // Step 4: battery management, then queue updates.
        let mut energy = Vec::with_capacity(n_sbs);
        let mut consumption = Vec::with_capacity(n_sbs);
        let mut next = queues.clone();
        let limits_for = |n: usize| EnergyLimits {
            capacity: s.energy.capacity(),
            harvest: slot.harvest[n],
        };
        for n in 0..n_sbs {
            let powers: Vec<f64> = assignment
                .iter()
                .flatten()
                .filter(|u| u.0 == n)
                .map(|u| u.2)
                .collect();
            let draw = power_consumption(&powers, &s.radio)
                .map_err(|source| ControlError::Power { sbs: n, source })?;
            let demand = Energy::from_units(draw.p_total_w);
            let e = battery_management(BatteryInput {
                level: queues.s_energy[n],
                rho: queues.rho[n],
                grid_weight: s.energy.grid_price_phi * queues.w(n),
                demand,
                harvest: slot.harvest[n],
                capacity: s.energy.capacity(),
            });
            next.s_energy[n] =
                update_energy_queue(queues.s_energy[n], e.discharge, e.charge, limits_for(n))
                    .map_err(|source| ControlError::Queue { sbs: n, source })?;
            for u in 0..queues.q_bits[n].len() {
                next.q_bits[n][u] =
                    update_data_queue(queues.q_bits[n][u], served_bits[n][u], admitted_bits[n][u]);
            }
            let flows = VirtualFlows::new(
                mu[n],
                s.economic.c_min[n],
                s.energy.grid_price_phi * e.grid.as_units(),
                admitted_bits[n].iter().sum(),
                payment[n],
            );
            (next.y[n], next.z[n]) = update_virtual_queues(queues.y[n], queues.z[n], &flows);
            energy.push(e);
            consumption.push(demand);
        }

        Ok(SlotOutcome {
            decision: ControlDecision {
                admitted_bits,
                mu,
                alpha,
                beta,
                sharing_payment: payment,
                energy,
            },
            assignment,
            served_bits,
            band_hz,
            transmit_w,
            consumption,
            partner,
            objective,
            solver_iterations,
            next,
        })
    }
}
