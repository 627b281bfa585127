//! Exhaustive reference solvers for tiny instances.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::allocator::{
    feasibility, objective, solve, Assignment, ChannelUse, Instance, SolveOptions,
};
use crate::controller::{group_instance, pricing};
use crate::pairing::{BenefitMatrix, PairMatching};
use crate::queues::QueueState;
use crate::scenario::Scenario;
use crate::stochastic::SlotGenerator;
use crate::units::Energy;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumeration of {size} candidates exceeds the cap {cap}")]
    TooLarge { size: f64, cap: u64 },
    #[error("power grid needs at least two levels, got {0}")]
    TooFewLevels(usize),
    #[error("exhaustive matching supports at most {max} SBSs, got {got}")]
    MatchingSize { got: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Equispaced levels in `[0, p^max]`, endpoints included.
    pub power_levels: usize,
    pub max_enum: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            power_levels: 9,
            max_enum: 50_000_000,
        }
    }
}

/// Denominator floor of the relative gap.
pub const GAP_EPSILON: f64 = 1e-12;

/// `(oracle - candidate) / max(|oracle|, ε0)`.
pub fn relative_gap(oracle: f64, candidate: f64) -> f64 {
    (oracle - candidate) / oracle.abs().max(GAP_EPSILON)
}

/// Best feasible assignment over all binary `x` and gridded powers.
pub fn brute_force_allocation(
    inst: &Instance,
    grid: GridSpec,
) -> Result<(Assignment, f64), OracleError> {
    if grid.power_levels < 2 {
        return Err(OracleError::TooFewLevels(grid.power_levels));
    }
    let links: Vec<(usize, usize)> = inst
        .participants
        .iter()
        .enumerate()
        .flat_map(|(k, p)| (0..p.users()).map(move |u| (k, u)))
        .collect();
    let size = ((1 + links.len() * grid.power_levels) as f64).powi(inst.channels.len() as i32);
    if size > grid.max_enum as f64 {
        return Err(OracleError::TooLarge {
            size,
            cap: grid.max_enum,
        });
    }
    let level = |k: usize, i: usize| {
        inst.participants[k].p_max_w * i as f64 / (grid.power_levels - 1) as f64
    };

    // Each channel independently takes one of `options` values: unused, or
    // a (link, level) combination.
    let options = 1 + links.len() * grid.power_levels;
    let decode = |code: usize| -> Option<ChannelUse> {
        if code == 0 {
            return None;
        }
        let l = (code - 1) / grid.power_levels;
        let i = (code - 1) % grid.power_levels;
        let (k, u) = links[l];
        Some(ChannelUse {
            participant: k,
            sue: u,
            power_w: level(k, i),
        })
    };
    let mut codes = vec![0usize; inst.channels.len()];
    let mut best: Assignment = vec![None; inst.channels.len()];
    let mut best_value = objective(inst, &best);
    loop {
        let candidate: Assignment = codes.iter().map(|&c| decode(c)).collect();
        if feasibility(inst, &candidate).is_feasible(0.0) {
            let v = objective(inst, &candidate);
            if v > best_value {
                best_value = v;
                best = candidate;
            }
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == codes.len() {
                return Ok((best, best_value));
            }
            codes[pos] += 1;
            if codes[pos] < options {
                break;
            }
            codes[pos] = 0;
            pos += 1;
        }
    }
}

pub const MATCHING_MAX: usize = 8;

/// Best perfect pairing by enumeration of all `(n - 1)!!` pairings.
pub fn brute_force_matching(benefits: &BenefitMatrix) -> Result<PairMatching, OracleError> {
    let n = benefits.size();
    if n > MATCHING_MAX || n % 2 == 1 {
        return Err(OracleError::MatchingSize {
            got: n,
            max: MATCHING_MAX,
        });
    }
    fn recurse(
        c: &[Vec<f64>],
        free: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        value: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if free.is_empty() {
            if value > best.0 {
                *best = (value, current.clone());
            }
            return;
        }
        let i = free.remove(0);
        for idx in 0..free.len() {
            let j = free.remove(idx);
            current.push((i, j));
            recurse(c, free, current, value + c[i][j] + c[j][i], best);
            current.pop();
            free.insert(idx, j);
        }
        free.insert(0, i);
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut free: Vec<usize> = (0..n).collect();
    recurse(
        &benefits.c_tilde,
        &mut free,
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    if n == 0 {
        best.0 = 0.0;
    }
    Ok(PairMatching {
        pairs: best.1,
        total_benefit: best.0,
    })
}

/// Upper end of the uniform draw for `Y` and `Z` in sampled states.
pub const VIRTUAL_QUEUE_SPAN: f64 = 2000.0;

/// Allocator and oracle objectives on one sampled state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub state: u64,
    pub oracle: f64,
    pub allocator: f64,
    pub gap: f64,
}

/// Compares the allocator against exhaustive search on `states` random slot
/// states. SBSs 0 and 1 form a priced pair over their own subchannels (SBS 0
/// alone when the network has one SBS). Queues are uniform on
/// `[0, A^max]`, `Y` and `Z` on `[0, VIRTUAL_QUEUE_SPAN]` and battery levels
/// on `[0, S^max]`.
pub fn gap_report(
    scenario: &Scenario,
    states: u64,
    seed: u64,
    grid: GridSpec,
) -> Result<Vec<GapRow>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = scenario.n_sbs().min(2);
    let channels: Vec<usize> = (0..members)
        .flat_map(|n| scenario.own_subchannels(n))
        .collect();
    let caps = &scenario.economic.price_cap_per_hz;
    let mut rows = Vec::with_capacity(states as usize);
    for k in 0..states {
        let slot = SlotGenerator::new(scenario, seed.wrapping_add(k)).slot(0);
        let mut q = QueueState::empty(scenario);
        for n in 0..members {
            for bits in q.q_bits[n].iter_mut() {
                *bits = rng.random_range(0.0..=scenario.traffic.a_max_bits);
            }
            q.y[n] = rng.random_range(0.0..VIRTUAL_QUEUE_SPAN);
            q.z[n] = rng.random_range(0.0..VIRTUAL_QUEUE_SPAN);
            q.s_energy[n] =
                Energy::from_units(rng.random_range(0.0..=scenario.energy.battery_capacity_ws));
        }
        let priced: Vec<(usize, (f64, f64))> = if members == 2 {
            let p = pricing(q.w(0), q.w(1), caps[0], caps[1]);
            vec![(0, (p.alpha_i, p.beta_i)), (1, (p.alpha_j, p.beta_j))]
        } else {
            vec![(0, (0.0, 0.0))]
        };
        let inst = group_instance(scenario, &slot, &q, &priced, &channels);
        let (_, oracle) = brute_force_allocation(&inst, grid)?;
        let opts = SolveOptions {
            max_iterations: scenario.solver.max_iterations,
            tolerance: scenario.solver.tolerance,
        };
        let allocator = solve(&inst, &opts).objective_value;
        rows.push(GapRow {
            state: k,
            oracle,
            allocator,
            gap: relative_gap(oracle, allocator),
        });
    }
    Ok(rows)
}

pub fn write_gap_csv<W: Write>(out: W, rows: &[GapRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
