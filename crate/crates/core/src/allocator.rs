//! Joint subchannel assignment and power control for one group of SBSs
//! (a bargaining pair, a lone SBS, or a pooled round-robin slot).
//!
//! The per-slot problem maximizes
//!
//! ```text
//! Σ_n Σ_u Q_nu R_nu + Σ_n W_n O_n + Σ_n (S_n - ρ_n) P_n
//! ```
//!
//! subject to the per-SBS transmit budget, the per-subchannel cross-tier
//! interference cap and subchannel exclusivity. It is solved through its
//! partial Lagrangian: for fixed multipliers every link gets a water-filling
//! power, every subchannel goes to the link with the largest positive
//! Lagrangian score, and the multipliers follow projected subgradient steps
//! with `d0 / sqrt(i)` step sizes. Each primal iterate is repaired into a
//! feasible point and the best one, after a final exact water-filling pass
//! on its assignment, is returned.

use std::f64::consts::LN_2;

/// One SBS taking part in an instance, with the weights it brings.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    /// Index in the network, `None` for the virtual SBS used in pairing.
    pub sbs: Option<usize>,
    /// `Q_nu` per SUE.
    pub queue_bits: Vec<f64>,
    /// `W_n = Y_n + Z_n`.
    pub w: f64,
    /// `S_n - ρ_n`.
    pub energy_offset: f64,
    /// `φ`.
    pub grid_price: f64,
    pub p_max_w: f64,
    pub static_power_w: f64,
    pub power_slope: f64,
    /// Lease price `α_n`.
    pub alpha: f64,
    /// Rent price `β_n`.
    pub beta: f64,
    pub initial_band_hz: f64,
}

impl Participant {
    pub fn users(&self) -> usize {
        self.queue_bits.len()
    }

    /// `η_n = S_n - ρ_n - φ W_n`, the per-watt weight in the relaxed problem.
    pub fn eta(&self) -> f64 {
        self.energy_offset - self.grid_price * self.w
    }

    /// The price this SBS trades at this slot (`α` when leasing, `β` when
    /// renting, zero when not trading).
    pub fn active_price(&self) -> f64 {
        if self.alpha > 0.0 {
            self.alpha
        } else {
            self.beta
        }
    }

    /// `θ_nm = -q_n ϖ_m W_n`.
    pub fn theta(&self, bandwidth_hz: f64) -> f64 {
        -self.active_price() * bandwidth_hz * self.w
    }

    /// `O_n = α (B⁰ - B)^+ - β (B - B⁰)^+`.
    pub fn payment(&self, band_hz: f64) -> f64 {
        self.alpha * (self.initial_band_hz - band_hz).max(0.0)
            - self.beta * (band_hz - self.initial_band_hz).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// Network subchannel index, `None` for a virtual one.
    pub subchannel: Option<usize>,
    pub bandwidth_hz: f64,
    /// Slot length in seconds.
    pub slot_s: f64,
    pub noise_w: f64,
    pub interference_cap_w: f64,
}

impl ChannelSpec {
    /// `τ ϖ`: bits per slot per unit of spectral efficiency.
    pub fn bits_per_slot_hz(&self) -> f64 {
        self.bandwidth_hz * self.slot_s
    }
}

/// A self-contained allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub participants: Vec<Participant>,
    pub channels: Vec<ChannelSpec>,
    /// `h`, indexed `[k][c][u]`.
    pub gain: Vec<Vec<Vec<f64>>>,
    /// MBS interference, indexed `[k][c][u]`.
    pub mbs_interference_w: Vec<Vec<Vec<f64>>>,
    /// `h_nmb`, indexed `[k][c]`.
    pub cross_gain: Vec<Vec<f64>>,
}

impl Instance {
    /// `(I_0 + σ²) / h`: the inverse channel quality of a link.
    pub fn link_cost(&self, k: usize, c: usize, u: usize) -> f64 {
        (self.mbs_interference_w[k][c][u] + self.channels[c].noise_w) / self.gain[k][c][u]
    }

    /// Shannon rate of a link at transmit power `power_w`, in bits per slot.
    pub fn link_rate(&self, k: usize, c: usize, u: usize, power_w: f64) -> f64 {
        self.channels[c].bits_per_slot_hz() * (power_w / self.link_cost(k, c, u)).ln_1p() / LN_2
    }

    /// Largest power a single link may carry: the SBS budget and the
    /// interference cap seen through this SBS's cross gain.
    pub fn link_cap(&self, k: usize, c: usize) -> f64 {
        self.participants[k].p_max_w.min(interference_limited_power(
            self.channels[c].interference_cap_w,
            self.cross_gain[k][c],
        ))
    }

    fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.participants
            .iter()
            .enumerate()
            .flat_map(|(k, p)| (0..p.users()).map(move |u| (k, u)))
    }
}

/// Largest `p` with `p * cross_gain <= cap_w` in floating point.
pub fn interference_limited_power(cap_w: f64, cross_gain: f64) -> f64 {
    let mut p = cap_w / cross_gain;
    while p > 0.0 && p * cross_gain > cap_w {
        p = p.next_down();
    }
    p
}

/// Subchannel `c` carries SUE `sue` of participant `participant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelUse {
    pub participant: usize,
    pub sue: usize,
    pub power_w: f64,
}

/// Binary assignment with powers, one entry per instance channel. At most one
/// SUE per subchannel holds by construction.
pub type Assignment = Vec<Option<ChannelUse>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationDecision {
    pub channel_use: Assignment,
    /// Exact objective of the returned point.
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual function value at each iteration.
    pub dual_history: Vec<f64>,
}

impl AllocationDecision {
    /// Effective transmit power `x·p` of each participant.
    pub fn transmit_sum_w(&self, n_participants: usize) -> Vec<f64> {
        let mut sum = vec![0.0; n_participants];
        for u in self.channel_use.iter().flatten() {
            sum[u.participant] += u.power_w;
        }
        sum
    }
}

/// Per-participant and per-subchannel per-slot rates, bands and power.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `R_nu` per participant and SUE.
    pub rate_bits: Vec<Vec<f64>>,
    /// `B_n` in Hz.
    pub band_hz: Vec<f64>,
    /// `Σ x p` in W.
    pub transmit_w: Vec<f64>,
}

pub fn outcome(inst: &Instance, assignment: &Assignment) -> Outcome {
    let mut rate_bits: Vec<Vec<f64>> = inst
        .participants
        .iter()
        .map(|p| vec![0.0; p.users()])
        .collect();
    let mut band_hz = vec![0.0; inst.participants.len()];
    let mut transmit_w = vec![0.0; inst.participants.len()];
    for (c, used) in assignment.iter().enumerate() {
        if let Some(cu) = used {
            rate_bits[cu.participant][cu.sue] +=
                inst.link_rate(cu.participant, c, cu.sue, cu.power_w);
            band_hz[cu.participant] += inst.channels[c].bandwidth_hz;
            transmit_w[cu.participant] += cu.power_w;
        }
    }
    Outcome {
        rate_bits,
        band_hz,
        transmit_w,
    }
}

/// Exact per-slot objective `Σ Q R + Σ W O + Σ (S - ρ) P` of an assignment.
pub fn objective(inst: &Instance, assignment: &Assignment) -> f64 {
    let mut value = 0.0;
    for (c, used) in assignment.iter().enumerate() {
        if let Some(cu) = used {
            let p = &inst.participants[cu.participant];
            value += p.queue_bits[cu.sue] * inst.link_rate(cu.participant, c, cu.sue, cu.power_w)
                + p.energy_offset * p.power_slope * cu.power_w;
        }
    }
    for (k, p) in inst.participants.iter().enumerate() {
        let band: f64 = assignment
            .iter()
            .zip(&inst.channels)
            .filter(|(u, _)| u.is_some_and(|u| u.participant == k))
            .map(|(_, ch)| ch.bandwidth_hz)
            .sum();
        value += p.w * p.payment(band) + p.energy_offset * p.static_power_w;
    }
    value
}

/// Constraint residuals of an assignment; positive entries are violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `Σ x p - p^max` per participant.
    pub power_w: Vec<f64>,
    /// `Σ x p h_nmb - I^S` per channel.
    pub interference_w: Vec<f64>,
    /// Links with negative or non-finite power, or out-of-range indices.
    pub malformed: usize,
}

impl Residuals {
    pub fn max_power_violation(&self) -> f64 {
        self.power_w.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn max_interference_violation(&self) -> f64 {
        self.interference_w.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.malformed == 0
            && self.max_power_violation() <= tol
            && self.max_interference_violation() <= tol
    }
}

/// Feasibility check shared by the solver and the brute-force reference.
pub fn feasibility(inst: &Instance, assignment: &Assignment) -> Residuals {
    let mut power_w: Vec<f64> = inst.participants.iter().map(|p| -p.p_max_w).collect();
    let mut interference_w: Vec<f64> = inst
        .channels
        .iter()
        .map(|c| -c.interference_cap_w)
        .collect();
    let mut malformed = 0;
    if assignment.len() != inst.channels.len() {
        malformed += 1;
    }
    for (c, used) in assignment.iter().enumerate().take(inst.channels.len()) {
        if let Some(cu) = used {
            let ok_index = cu.participant < inst.participants.len()
                && cu.sue < inst.participants[cu.participant].users();
            if !ok_index || !(cu.power_w >= 0.0 && cu.power_w.is_finite()) {
                malformed += 1;
                continue;
            }
            power_w[cu.participant] += cu.power_w;
            interference_w[c] += cu.power_w * inst.cross_gain[cu.participant][c];
        }
    }
    Residuals {
        power_w,
        interference_w,
        malformed,
    }
}

/// Water-filling power for a link with `x̂ = 1`:
/// `[ϖ Q / (ln2 (ω - η)) - (I_0 + σ²) / h]^+`, with `ω = λ1 + λ2 h_nmb`.
/// When `ω ≤ η` the relaxed problem is unbounded in this direction and the
/// link cap `cap_w` is returned instead.
pub fn power_closed_form(
    queue_bits: f64,
    bandwidth_hz: f64,
    omega: f64,
    eta: f64,
    interference_plus_noise_w: f64,
    gain: f64,
    cap_w: f64,
) -> f64 {
    let denom = omega - eta;
    if denom <= 0.0 {
        return cap_w;
    }
    (bandwidth_hz * queue_bits / (LN_2 * denom) - interference_plus_noise_w / gain).max(0.0)
}

/// For each subchannel (row), the index of the highest positive score, lowest
/// index on ties; `None` when no score is positive.
pub fn assign_subchannels(scores: &[Vec<f64>]) -> Vec<Option<usize>> {
    scores
        .iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (i, &s) in row.iter().enumerate() {
                if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

/// Lagrange multipliers of the power (`λ1`, per participant), interference
/// (`λ2`, per channel) and exclusivity (`λ3`, per channel) constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    /// 1-based iteration counter.
    pub iteration: usize,
    pub step_base1: Vec<f64>,
    pub step_base2: Vec<f64>,
    pub step_base3: Vec<f64>,
}

impl Multipliers {
    pub fn zero(step_base1: Vec<f64>, step_base2: Vec<f64>, step_base3: Vec<f64>) -> Self {
        Multipliers {
            lambda1: vec![0.0; step_base1.len()],
            lambda2: vec![0.0; step_base2.len()],
            lambda3: vec![0.0; step_base3.len()],
            iteration: 1,
            step_base1,
            step_base2,
            step_base3,
        }
    }

    /// Diminishing step factor `1 / sqrt(i)`.
    pub fn step_factor(&self) -> f64 {
        1.0 / (self.iteration as f64).sqrt()
    }

    /// Applies one projected subgradient step in place and returns the
    /// largest relative multiplier change.
    fn advance(&mut self, slack: &Slack) -> f64 {
        let f = self.step_factor();
        let mut change = 0.0f64;
        let families = [
            (&mut self.lambda1, &self.step_base1, &slack.power),
            (&mut self.lambda2, &self.step_base2, &slack.interference),
            (&mut self.lambda3, &self.step_base3, &slack.exclusivity),
        ];
        for (lambda, base, g) in families {
            for ((l, d0), g) in lambda.iter_mut().zip(base).zip(g) {
                let new = (*l - d0 * f * g).max(0.0);
                let diff = (new - *l).abs();
                if diff != 0.0 {
                    change = change.max(diff / l.abs().max(d0 * f64::EPSILON));
                }
                *l = new;
            }
        }
        self.iteration += 1;
        change
    }
}

/// Constraint slacks of a (possibly infeasible) iterate: the subgradients of
/// the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct Slack {
    /// `p^max - Σ s`.
    pub power: Vec<f64>,
    /// `I^S - Σ s h_nmb`.
    pub interference: Vec<f64>,
    /// `1 - Σ x̂`.
    pub exclusivity: Vec<f64>,
}

impl Slack {
    pub fn of(inst: &Instance, assignment: &Assignment) -> Self {
        let mut slack = Slack {
            power: Vec::new(),
            interference: Vec::new(),
            exclusivity: Vec::new(),
        };
        slack.fill(inst, assignment);
        slack
    }

    fn fill(&mut self, inst: &Instance, assignment: &Assignment) {
        self.power.clear();
        self.power
            .extend(inst.participants.iter().map(|p| p.p_max_w));
        self.interference.clear();
        self.interference
            .extend(inst.channels.iter().map(|c| c.interference_cap_w));
        self.exclusivity.clear();
        for (c, used) in assignment.iter().enumerate() {
            match used {
                Some(cu) => {
                    self.power[cu.participant] -= cu.power_w;
                    self.interference[c] -= cu.power_w * inst.cross_gain[cu.participant][c];
                    self.exclusivity.push(0.0);
                }
                None => self.exclusivity.push(1.0),
            }
        }
    }
}

/// `λ' = [λ - d^(i) · slack]^+` for each family, `d^(i) = d0 / sqrt(i)`.
pub fn update_multipliers(mult: &Multipliers, slack: &Slack) -> Multipliers {
    let mut next = mult.clone();
    next.advance(slack);
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 500,
            tolerance: 1e-6,
        }
    }
}

const LOCAL_SEARCH_PASSES: usize = 4;

/// Step bases chosen so that the first subgradient step moves each
/// multiplier to the scale of the marginal utility it has to balance.
fn step_bases(inst: &Instance) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut marginal = vec![0.0f64; inst.participants.len()];
    for (k, p) in inst.participants.iter().enumerate() {
        for c in 0..inst.channels.len() {
            for u in 0..p.users() {
                let a = p.queue_bits[u] * inst.channels[c].bits_per_slot_hz() / LN_2;
                marginal[k] = marginal[k].max(a / (inst.link_cost(k, c, u) + p.p_max_w));
            }
        }
        marginal[k] = marginal[k].max(p.eta().abs()).max(f64::MIN_POSITIVE);
    }
    let overall = marginal.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    let base1 = inst
        .participants
        .iter()
        .zip(&marginal)
        .map(|(p, m)| m / p.p_max_w)
        .collect();
    let base2 = inst
        .channels
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let h = inst
                .cross_gain
                .iter()
                .map(|row| row[c])
                .fold(f64::MIN_POSITIVE, f64::max);
            overall / (h * ch.interference_cap_w)
        })
        .collect();
    let score_scale: f64 = inst
        .participants
        .iter()
        .map(|p| p.p_max_w * overall)
        .fold(f64::MIN_POSITIVE, f64::max);
    let base3 = vec![score_scale; inst.channels.len()];
    (base1, base2, base3)
}

/// One primal step: powers and assignment maximizing the Lagrangian at
/// `mult`, written into `assignment`; returns the dual function value.
/// `scores` and `powers` are scratch buffers of one entry per link.
fn lagrangian_step(
    inst: &Instance,
    mult: &Multipliers,
    links: &[(usize, usize)],
    scores: &mut [f64],
    powers: &mut [f64],
    assignment: &mut Assignment,
) -> f64 {
    assignment.clear();
    let mut dual = 0.0;
    for (c, ch) in inst.channels.iter().enumerate() {
        let bits = ch.bits_per_slot_hz();
        for (i, &(k, u)) in links.iter().enumerate() {
            let p = &inst.participants[k];
            let h_cross = inst.cross_gain[k][c];
            let omega = mult.lambda1[k] + mult.lambda2[c] * h_cross;
            let eta = p.eta();
            let cost = inst.link_cost(k, c, u);
            let cap = inst.link_cap(k, c);
            let s = power_closed_form(p.queue_bits[u], bits, omega, eta, cost, 1.0, cap).min(cap);
            let rate_term = p.queue_bits[u] * bits * (s / cost).ln_1p() / LN_2;
            scores[i] = rate_term + p.theta(ch.bandwidth_hz) + (eta - omega) * s - mult.lambda3[c];
            powers[i] = s;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (i, &s) in scores.iter().enumerate() {
            if s > 0.0 && pick.is_none_or(|(_, b)| s > b) {
                pick = Some((i, s));
            }
        }
        assignment.push(pick.map(|(i, score)| {
            dual += score;
            ChannelUse {
                participant: links[i].0,
                sue: links[i].1,
                power_w: powers[i],
            }
        }));
    }
    dual += inst
        .participants
        .iter()
        .zip(&mult.lambda1)
        .map(|(p, l)| l * p.p_max_w)
        .sum::<f64>();
    dual += inst
        .channels
        .iter()
        .zip(&mult.lambda2)
        .map(|(c, l)| l * c.interference_cap_w)
        .sum::<f64>();
    dual += mult.lambda3.iter().sum::<f64>();
    dual
}

/// Scales powers down so that every interference cap and power budget holds.
pub fn repair(inst: &Instance, assignment: &Assignment) -> Assignment {
    let mut out = assignment.clone();
    repair_in_place(inst, &mut out);
    out
}

fn repair_in_place(inst: &Instance, out: &mut Assignment) {
    for (c, used) in out.iter_mut().enumerate() {
        if let Some(cu) = used {
            let cap = interference_limited_power(
                inst.channels[c].interference_cap_w,
                inst.cross_gain[cu.participant][c],
            );
            cu.power_w = cu.power_w.clamp(0.0, cap);
        }
    }
    for (k, p) in inst.participants.iter().enumerate() {
        let total: f64 = out
            .iter()
            .flatten()
            .filter(|u| u.participant == k)
            .map(|u| u.power_w)
            .sum();
        if total > p.p_max_w {
            // Keep a hair of slack so rounding in the rescaled sum cannot overshoot.
            let scale = p.p_max_w / total * (1.0 - 1e-12);
            for cu in out.iter_mut().flatten().filter(|u| u.participant == k) {
                cu.power_w *= scale;
            }
        }
    }
}

/// Exact water-filling of each participant's budget over a fixed assignment,
/// maximizing the objective's power-dependent part
/// `Σ Q ϖ log2(1 + s/cost) + (S - ρ) Δ s` under the per-link caps.
/// Links left with zero power are released.
pub fn water_fill(inst: &Instance, assignment: &Assignment) -> Assignment {
    let mut out = assignment.clone();
    water_fill_in_place(inst, &mut out, &mut Vec::new());
    out
}

/// Per-link `(channel, a, cost, cap)` scratch for [`water_fill_in_place`].
type FillScratch = Vec<(usize, f64, f64, f64)>;

fn water_fill_in_place(inst: &Instance, out: &mut Assignment, params: &mut FillScratch) {
    for (k, p) in inst.participants.iter().enumerate() {
        params.clear();
        for (c, used) in out.iter().enumerate() {
            if let Some(u) = used.filter(|u| u.participant == k) {
                let a = p.queue_bits[u.sue] * inst.channels[c].bits_per_slot_hz() / LN_2;
                params.push((c, a, inst.link_cost(k, c, u.sue), inst.link_cap(k, c)));
            }
        }
        if params.is_empty() {
            continue;
        }
        let eta = p.energy_offset * p.power_slope;
        let power = |lambda: f64, a: f64, cost: f64, cap: f64| -> f64 {
            if lambda <= eta {
                cap
            } else {
                (a / (lambda - eta) - cost).clamp(0.0, cap)
            }
        };
        let total = |lambda: f64| -> f64 {
            params
                .iter()
                .map(|&(_, a, cost, cap)| power(lambda, a, cost, cap))
                .sum()
        };
        let mut lambda = 0.0;
        if total(0.0) > p.p_max_w {
            let mut lo = eta.max(0.0);
            let mut hi = lo
                + params
                    .iter()
                    .map(|&(_, a, cost, _)| a / cost)
                    .fold(0.0, f64::max)
                + 1.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi {
                    break;
                }
                if total(mid) > p.p_max_w {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lambda = hi;
        }
        for &(c, a, cost, cap) in params.iter() {
            let s = power(lambda, a, cost, cap);
            if s > 0.0 {
                if let Some(cu) = out[c].as_mut() {
                    cu.power_w = s;
                }
            } else {
                out[c] = None;
            }
        }
    }
    repair_in_place(inst, out);
}

/// First-improvement search over single-subchannel reassignments (including
/// release), re-water-filling after each move. Every step strictly increases
/// the exact objective.
pub fn local_search(inst: &Instance, start: &Assignment, max_passes: usize) -> Assignment {
    let mut scratch = FillScratch::new();
    let mut current = start.clone();
    water_fill_in_place(inst, &mut current, &mut scratch);
    let mut value = objective(inst, &current);
    let links: Vec<(usize, usize)> = inst.links().collect();
    let mut trial = current.clone();
    for _ in 0..max_passes {
        let mut improved = false;
        for c in 0..inst.channels.len() {
            let options = std::iter::once(None).chain(links.iter().map(|&(k, u)| {
                Some(ChannelUse {
                    participant: k,
                    sue: u,
                    power_w: inst.link_cap(k, c),
                })
            }));
            for option in options {
                let same = match (current[c], option) {
                    (None, None) => true,
                    (Some(a), Some(b)) => a.participant == b.participant && a.sue == b.sue,
                    _ => false,
                };
                if same {
                    continue;
                }
                trial.clone_from(&current);
                trial[c] = option;
                water_fill_in_place(inst, &mut trial, &mut scratch);
                let v = objective(inst, &trial);
                if v > value + 1e-12 * value.abs().max(1.0) {
                    std::mem::swap(&mut current, &mut trial);
                    value = v;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// Solves one instance.
pub fn solve(inst: &Instance, opts: &SolveOptions) -> AllocationDecision {
    let empty: Assignment = vec![None; inst.channels.len()];
    let mut best = empty.clone();
    let mut best_value = objective(inst, &best);
    let consider = |cand: Assignment, best: &mut Assignment, best_value: &mut f64| {
        if feasibility(inst, &cand).is_feasible(0.0) {
            let v = objective(inst, &cand);
            if v > *best_value {
                *best_value = v;
                *best = cand;
            }
        }
    };

    let (b1, b2, b3) = step_bases(inst);
    let mut mult = Multipliers::zero(b1, b2, b3);
    let mut dual_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut best_iterate: Option<(Assignment, f64)> = None;
    let links: Vec<(usize, usize)> = inst.links().collect();
    let mut scores = vec![0.0; links.len()];
    let mut powers = vec![0.0; links.len()];
    let mut assignment = empty.clone();
    let mut repaired = empty.clone();
    let mut slack = Slack::of(inst, &empty);
    while iterations < opts.max_iterations {
        iterations += 1;
        let dual = lagrangian_step(
            inst,
            &mult,
            &links,
            &mut scores,
            &mut powers,
            &mut assignment,
        );
        dual_history.push(dual);
        repaired.clone_from(&assignment);
        repair_in_place(inst, &mut repaired);
        let value = objective(inst, &repaired);
        match best_iterate.as_mut() {
            Some((a, v)) if value > *v => {
                a.clone_from(&repaired);
                *v = value;
            }
            None => best_iterate = Some((repaired.clone(), value)),
            _ => {}
        }
        slack.fill(inst, &assignment);
        let change = mult.advance(&slack);
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }

    if let Some((iterate, _)) = best_iterate {
        consider(water_fill(inst, &iterate), &mut best, &mut best_value);
        consider(iterate, &mut best, &mut best_value);
    }
    consider(water_fill(inst, &assignment), &mut best, &mut best_value);
    let polished = local_search(inst, &best, LOCAL_SEARCH_PASSES);
    consider(polished, &mut best, &mut best_value);

    AllocationDecision {
        channel_use: best,
        objective_value: best_value,
        iterations,
        converged,
        dual_history,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn participant(queues: Vec<f64>) -> Participant {
        Participant {
            sbs: Some(0),
            queue_bits: queues,
            w: 0.0,
            energy_offset: 0.0,
            grid_price: 0.1,
            p_max_w: 0.1,
            static_power_w: 3.2,
            power_slope: 4.0,
            alpha: 0.0,
            beta: 0.0,
            initial_band_hz: 1e6,
        }
    }

    pub(crate) fn single_link(q: f64, offset: f64) -> Instance {
        let mut p = participant(vec![q]);
        p.energy_offset = offset;
        Instance {
            participants: vec![p],
            channels: vec![ChannelSpec {
                subchannel: Some(0),
                bandwidth_hz: 1e6,
                slot_s: 1.0,
                noise_w: 4e-15,
                interference_cap_w: 1.0,
            }],
            gain: vec![vec![vec![1e-9]]],
            mbs_interference_w: vec![vec![vec![1e-12]]],
            cross_gain: vec![vec![1e-12]],
        }
    }

    #[test]
    fn closed_form_examples() {
        let s = power_closed_form(1.0, 1.0, 1.0 / LN_2, 0.0, 0.4, 1.0, 0.1);
        assert!((s - 0.6).abs() < 1e-12);
        assert_eq!(power_closed_form(1.0, 1.0, 10.0, 0.0, 0.4, 1.0, 0.1), 0.0);
        assert_eq!(power_closed_form(0.0, 1e6, 5.0, -1.0, 1e-4, 1.0, 0.1), 0.0);
        assert_eq!(power_closed_form(1.0, 1.0, 1.0, 2.0, 0.4, 1.0, 0.1), 0.1);
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(assign_subchannels(&[vec![-1.0, 0.0]]), vec![None]);
        assert_eq!(assign_subchannels(&[vec![2.0]]), vec![Some(0)]);
        assert_eq!(assign_subchannels(&[vec![1.0, 3.0, 3.0]]), vec![Some(1)]);
    }

    fn mult(l1: f64, l2: f64) -> Multipliers {
        let mut m = Multipliers::zero(vec![1.0], vec![1.0], vec![1.0]);
        m.lambda1[0] = l1;
        m.lambda2[0] = l2;
        m
    }

    #[test]
    fn multiplier_examples() {
        let slack = Slack {
            power: vec![0.05],
            interference: vec![1e-10],
            exclusivity: vec![1.0],
        };
        let next = update_multipliers(&mult(0.0, 0.0), &slack);
        assert_eq!(
            (next.lambda1[0], next.lambda2[0], next.lambda3[0]),
            (0.0, 0.0, 0.0)
        );

        let over = Slack {
            power: vec![0.0],
            interference: vec![-1e-10],
            exclusivity: vec![0.0],
        };
        let next = update_multipliers(&mult(0.0, 2.0), &over);
        assert!(next.lambda2[0] > 2.0);

        let mut m = mult(0.0, 0.0);
        m.iteration = 4;
        let a = m.step_factor();
        m.iteration = 8;
        assert!((a / m.step_factor() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_queues_give_zero_allocation() {
        let mut inst = single_link(0.0, -440.0);
        inst.participants[0].w = 0.0;
        let d = solve(&inst, &SolveOptions::default());
        assert_eq!(d.channel_use, vec![None]);
        assert!(d.converged);
        assert_eq!(d.objective_value, -440.0 * 3.2);
    }

    #[test]
    fn repair_restores_budget() {
        let mut inst = single_link(1.0, 0.0);
        inst.channels.push(inst.channels[0].clone());
        inst.gain[0].push(vec![1e-9]);
        inst.mbs_interference_w[0].push(vec![1e-12]);
        inst.cross_gain[0].push(1e-12);
        let a: Assignment = vec![
            Some(ChannelUse {
                participant: 0,
                sue: 0,
                power_w: 0.09,
            }),
            Some(ChannelUse {
                participant: 0,
                sue: 0,
                power_w: 0.03,
            }),
        ];
        assert!(!feasibility(&inst, &a).is_feasible(0.0));
        let r = repair(&inst, &a);
        assert!(feasibility(&inst, &r).is_feasible(0.0));
        let ratio = r[0].unwrap().power_w / r[1].unwrap().power_w;
        assert!((ratio - 3.0).abs() < 1e-9);
    }

    #[test]
    fn payment_is_one_signed_term() {
        let mut p = participant(vec![0.0]);
        p.initial_band_hz = 10e6;
        p.alpha = 1e-6;
        assert_eq!(p.payment(10e6), 0.0);
        assert!((p.payment(6e6) - 4.0).abs() < 1e-9);
        p.alpha = 0.0;
        p.beta = 1e-6;
        assert!((p.payment(14e6) + 4.0).abs() < 1e-9);
    }
}
