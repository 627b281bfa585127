//! Slot loop, metrics and experiment sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baselines::PolicyKind;
use crate::controller::{ControlError, Controller, SlotOutcome};
use crate::queues::{lyapunov_value, QueueState};
use crate::scenario::Scenario;
use crate::stochastic::SlotGenerator;
use crate::units::Energy;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("slot {slot}: {source}")]
    Slot { slot: u64, source: ControlError },
    #[error("run needs at least one slot")]
    NoSlots,
    #[error("sweep needs at least one value of V, one policy and one seed")]
    EmptySweep,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Fraction of leading slots dropped from summaries when warm-up exclusion
/// is on.
pub const WARMUP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub policy: PolicyKind,
    pub seed: u64,
    pub slots: u64,
    pub warmup: bool,
}

/// Aggregates of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    /// `Σ_u D_nu` per SBS.
    pub admitted_bits: Vec<f64>,
    pub payment: Vec<f64>,
    pub grid: Vec<Energy>,
    /// `Σ_u D_nu + O_n - φ G_n` per SBS.
    pub profit: Vec<f64>,
    /// `Σ Q` at the start of the slot.
    pub backlog_bits: f64,
    /// `Σ_n ln μ_n`.
    pub log_mu: f64,
    /// Lyapunov value at the start of the slot.
    pub lyapunov: f64,
    /// `L(t+1) - L(t)`.
    pub drift: f64,
    /// Largest `Σ p - p^max` over SBSs.
    pub power_residual_w: f64,
    /// Largest `Σ p h_nmb - I^S` over subchannels.
    pub interference_residual_w: f64,
    /// SBSs whose grid draw came from the power-balance override.
    pub balance_overrides: usize,
}

/// State and decisions of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    /// Queue state at the start of the slot.
    pub state: QueueState,
    pub arrivals_bits: Vec<Vec<f64>>,
    pub harvest: Vec<Energy>,
    pub outcome: SlotOutcome,
    pub metrics: SlotMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub v: f64,
    pub slots: u64,
    /// First slot included in the averages.
    pub first_slot: u64,
    /// `C̄_n`.
    pub avg_profit: Vec<f64>,
    /// `Σ_n C̄_n`.
    pub total_profit: f64,
    /// `(1 / T U) Σ_t Σ_n Σ_u Q_nu(t)`.
    pub avg_backlog_bits: f64,
    /// `Ḡ_n` in watt·slot.
    pub avg_grid: Vec<f64>,
    /// `Ō_n`.
    pub avg_payment: Vec<f64>,
    /// Time average of `Σ_n ln μ_n`.
    pub f_bar: f64,
    pub balance_overrides: usize,
    pub max_power_residual_w: f64,
    pub max_interference_residual_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<SlotRecord>,
}

/// `ΔL = L(next) - L(prev)`.
pub fn drift_diagnostic(prev: &QueueState, next: &QueueState) -> f64 {
    lyapunov_value(next) - lyapunov_value(prev)
}

fn slot_metrics(
    scenario: &Scenario,
    state: &QueueState,
    gen_cross: &[Vec<f64>],
    out: &SlotOutcome,
) -> SlotMetrics {
    let n_sbs = scenario.n_sbs();
    let phi = scenario.energy.grid_price_phi;
    let admitted_bits: Vec<f64> = out
        .decision
        .admitted_bits
        .iter()
        .map(|d| d.iter().sum())
        .collect();
    let grid: Vec<Energy> = out.decision.energy.iter().map(|e| e.grid).collect();
    let payment = out.decision.sharing_payment.clone();
    let profit = (0..n_sbs)
        .map(|n| admitted_bits[n] + payment[n] - phi * grid[n].as_units())
        .collect();
    let mut tx = vec![0.0; n_sbs];
    let mut interference_residual_w = f64::NEG_INFINITY;
    for (m, used) in out.assignment.iter().enumerate() {
        let load = match used {
            Some((n, _, p)) => {
                tx[*n] += p;
                p * gen_cross[*n][m]
            }
            None => 0.0,
        };
        interference_residual_w =
            interference_residual_w.max(load - scenario.radio.interference_cap_w);
    }
    let power_residual_w = tx
        .iter()
        .map(|p| p - scenario.radio.p_sbs_max_w)
        .fold(f64::NEG_INFINITY, f64::max);
    let lyapunov = lyapunov_value(state);
    SlotMetrics {
        admitted_bits,
        payment,
        grid,
        profit,
        backlog_bits: state.total_backlog_bits(),
        log_mu: out.decision.mu.iter().map(|m| m.ln()).sum(),
        lyapunov,
        drift: lyapunov_value(&out.next) - lyapunov,
        power_residual_w,
        interference_residual_w,
        balance_overrides: out
            .decision
            .energy
            .iter()
            .filter(|e| e.balance_override)
            .count(),
    }
}

/// Runs `opts.slots` slots from empty queues.
pub fn run(scenario: &Scenario, opts: RunOptions) -> Result<RunOutput, EngineError> {
    if opts.slots == 0 {
        return Err(EngineError::NoSlots);
    }
    let generator = SlotGenerator::new(scenario, opts.seed);
    let mut controller = Controller::new(scenario, opts.policy);
    let mut state = QueueState::empty(scenario);
    let mut trace = Vec::with_capacity(opts.slots as usize);
    for t in 0..opts.slots {
        let slot = generator.slot(t);
        let outcome = controller
            .run_slot(&slot, &state)
            .map_err(|source| EngineError::Slot { slot: t, source })?;
        let metrics = slot_metrics(scenario, &state, &slot.cross_gain, &outcome);
        let next = outcome.next.clone();
        trace.push(SlotRecord {
            t,
            state,
            arrivals_bits: slot.arrivals_bits,
            harvest: slot.harvest,
            outcome,
            metrics,
        });
        state = next;
    }
    let first_slot = if opts.warmup {
        ((opts.slots as f64 * WARMUP_FRACTION).floor() as u64).min(opts.slots - 1)
    } else {
        0
    };
    let summary = summarize(scenario, opts, first_slot, &trace);
    Ok(RunOutput { summary, trace })
}

fn summarize(
    scenario: &Scenario,
    opts: RunOptions,
    first_slot: u64,
    trace: &[SlotRecord],
) -> RunSummary {
    let window = &trace[first_slot as usize..];
    let count = window.len() as f64;
    let n_sbs = scenario.n_sbs();
    let per_sbs = |f: &dyn Fn(&SlotMetrics, usize) -> f64| -> Vec<f64> {
        (0..n_sbs)
            .map(|n| window.iter().map(|r| f(&r.metrics, n)).sum::<f64>() / count)
            .collect()
    };
    let avg_profit = per_sbs(&|m, n| m.profit[n]);
    RunSummary {
        policy: opts.policy,
        seed: opts.seed,
        v: scenario.economic.v_param,
        slots: opts.slots,
        first_slot,
        total_profit: avg_profit.iter().sum(),
        avg_profit,
        avg_backlog_bits: window.iter().map(|r| r.metrics.backlog_bits).sum::<f64>()
            / (count * scenario.total_users() as f64),
        avg_grid: per_sbs(&|m, n| m.grid[n].as_units()),
        avg_payment: per_sbs(&|m, n| m.payment[n]),
        f_bar: window.iter().map(|r| r.metrics.log_mu).sum::<f64>() / count,
        balance_overrides: trace.iter().map(|r| r.metrics.balance_overrides).sum(),
        max_power_residual_w: trace
            .iter()
            .map(|r| r.metrics.power_residual_w)
            .fold(f64::NEG_INFINITY, f64::max),
        max_interference_residual_w: trace
            .iter()
            .map(|r| r.metrics.interference_residual_w)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// One row of a sweep table. `seed` is `None` on seed-mean rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub v: f64,
    pub policy: PolicyKind,
    pub seed: Option<u64>,
    pub avg_backlog_bits: f64,
    pub total_profit: f64,
    pub f_bar: f64,
    pub avg_grid: f64,
    pub avg_payment: f64,
}

impl SweepRow {
    pub fn from_summary(s: &RunSummary) -> Self {
        SweepRow {
            v: s.v,
            policy: s.policy,
            seed: Some(s.seed),
            avg_backlog_bits: s.avg_backlog_bits,
            total_profit: s.total_profit,
            f_bar: s.f_bar,
            avg_grid: s.avg_grid.iter().sum(),
            avg_payment: s.avg_payment.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub v_list: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub slots: u64,
    pub warmup: bool,
}

/// Runs every `(V, policy, seed)` combination in parallel and returns the
/// per-run rows ordered by `(V, policy, seed)` followed by one seed-mean
/// row per `(V, policy)`.
pub fn sweep_v(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>, EngineError> {
    if spec.v_list.is_empty() || spec.policies.is_empty() || spec.seeds.is_empty() {
        return Err(EngineError::EmptySweep);
    }
    let mut combos = Vec::new();
    for &v in &spec.v_list {
        for &policy in &spec.policies {
            for &seed in &spec.seeds {
                combos.push((v, policy, seed));
            }
        }
    }
    let rows: Vec<SweepRow> = combos
        .par_iter()
        .map(|&(v, policy, seed)| {
            let mut s = scenario.clone();
            s.economic.v_param = v;
            let out = run(
                &s,
                RunOptions {
                    policy,
                    seed,
                    slots: spec.slots,
                    warmup: spec.warmup,
                },
            )?;
            Ok(SweepRow::from_summary(&out.summary))
        })
        .collect::<Result<_, EngineError>>()?;
    let mut table = rows.clone();
    table.extend(seed_means(&rows));
    Ok(table)
}

/// Mean over seeds for each `(V, policy)`, in first-appearance order.
pub fn seed_means(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut keys: Vec<(f64, PolicyKind)> = Vec::new();
    for r in rows.iter().filter(|r| r.seed.is_some()) {
        if !keys.iter().any(|&(v, p)| v == r.v && p == r.policy) {
            keys.push((r.v, r.policy));
        }
    }
    keys.into_iter()
        .map(|(v, policy)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.seed.is_some() && r.v == v && r.policy == policy)
                .collect();
            let k = group.len() as f64;
            let avg = |f: &dyn Fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / k;
            SweepRow {
                v,
                policy,
                seed: None,
                avg_backlog_bits: avg(&|r| r.avg_backlog_bits),
                total_profit: avg(&|r| r.total_profit),
                f_bar: avg(&|r| r.f_bar),
                avg_grid: avg(&|r| r.avg_grid),
                avg_payment: avg(&|r| r.avg_payment),
            }
        })
        .collect()
}

/// Column order of the per-slot CSV.
pub const SLOT_CSV_HEADER: [&str; 21] = [
    "t",
    "n",
    "u",
    "A",
    "D",
    "Q",
    "R_nu",
    "S",
    "Y",
    "Z",
    "W",
    "F",
    "J",
    "G",
    "O",
    "mu",
    "alpha",
    "beta",
    "L",
    "power_residual",
    "interference_residual",
];

/// One row per `(t, n, u)`. Queue columns hold start-of-slot values; energy
/// columns are in watt·slot.
pub fn write_slot_csv<W: Write>(out: W, trace: &[SlotRecord]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SLOT_CSV_HEADER)?;
    for r in trace {
        let d = &r.outcome.decision;
        for n in 0..r.state.n_sbs() {
            let e = &d.energy[n];
            for u in 0..r.state.q_bits[n].len() {
                w.write_record([
                    r.t.to_string(),
                    n.to_string(),
                    u.to_string(),
                    r.arrivals_bits[n][u].to_string(),
                    d.admitted_bits[n][u].to_string(),
                    r.state.q_bits[n][u].to_string(),
                    r.outcome.served_bits[n][u].to_string(),
                    r.state.s_energy[n].to_string(),
                    r.state.y[n].to_string(),
                    r.state.z[n].to_string(),
                    r.state.w(n).to_string(),
                    e.discharge.to_string(),
                    e.charge.to_string(),
                    e.grid.to_string(),
                    d.sharing_payment[n].to_string(),
                    d.mu[n].to_string(),
                    d.alpha[n].to_string(),
                    d.beta[n].to_string(),
                    r.metrics.lyapunov.to_string(),
                    r.metrics.power_residual_w.to_string(),
                    r.metrics.interference_residual_w.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Column order of the summary CSV.
pub const SUMMARY_CSV_HEADER: [&str; 8] = [
    "v",
    "policy",
    "seed",
    "avg_backlog_bits",
    "total_profit",
    "f_bar",
    "avg_grid",
    "avg_payment",
];

/// Seed-mean rows carry `mean` in the seed column.
pub fn write_summary_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.v.to_string(),
            r.policy.to_string(),
            r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            r.avg_backlog_bits.to_string(),
            r.total_profit.to_string(),
            r.f_bar.to_string(),
            r.avg_grid.to_string(),
            r.avg_payment.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Estimates `C_n^min` as the NSRA time-average profit of a calibration run.
pub fn calibrate_c_min(
    scenario: &Scenario,
    seed: u64,
    slots: u64,
) -> Result<Vec<f64>, EngineError> {
    let out = run(
        scenario,
        RunOptions {
            policy: PolicyKind::Nsra,
            seed,
            slots,
            warmup: true,
        },
    )?;
    Ok(out.summary.avg_profit)
}
