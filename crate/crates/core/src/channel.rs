//! Link-level formulas: SINR, Shannon rate per subchannel, per-SUE
//! throughput and the linear SBS power model.

use thiserror::Error;

use crate::scenario::RadioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("subchannel {subchannel} of SBS {sbs} is assigned to {count} SUEs")]
    SharedSubchannel {
        sbs: usize,
        subchannel: usize,
        count: usize,
    },
    #[error("transmit power {total_w} W exceeds the budget {budget_w} W")]
    PowerBudget { total_w: f64, budget_w: f64 },
}

/// `γ = p h / (i0 + σ²)`.
pub fn sinr(
    power_w: f64,
    gain: f64,
    interference_w: f64,
    noise_w: f64,
) -> Result<f64, ChannelError> {
    if noise_w <= 0.0 || noise_w.is_nan() {
        return Err(ChannelError::NonPositiveNoise(noise_w));
    }
    Ok(power_w * gain / (interference_w + noise_w))
}

/// `ϖ log2(1 + γ)` bits per slot (unit slot length).
pub fn subchannel_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Rates and SINRs of one SBS, indexed `[m][u]`, for a given power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rate_bits: Vec<Vec<f64>>,
    pub sinr: Vec<Vec<f64>>,
}

impl RateTable {
    /// Builds the table from per-link power, gain, MBS interference and
    /// per-subchannel noise and bandwidth.
    pub fn build(
        power_w: &[Vec<f64>],
        gain: &[Vec<f64>],
        interference_w: &[Vec<f64>],
        noise_w: &[f64],
        bandwidth_hz: &[f64],
    ) -> Result<Self, ChannelError> {
        let mut rate_bits = Vec::with_capacity(power_w.len());
        let mut sinrs = Vec::with_capacity(power_w.len());
        for m in 0..power_w.len() {
            let mut r_m = Vec::with_capacity(power_w[m].len());
            let mut g_m = Vec::with_capacity(power_w[m].len());
            for u in 0..power_w[m].len() {
                let g = sinr(power_w[m][u], gain[m][u], interference_w[m][u], noise_w[m])?;
                g_m.push(g);
                r_m.push(subchannel_rate(bandwidth_hz[m], g));
            }
            rate_bits.push(r_m);
            sinrs.push(g_m);
        }
        Ok(RateTable {
            rate_bits,
            sinr: sinrs,
        })
    }
}

/// `R_nu = Σ_m x_nmu R_nmu`. `assignment` is indexed `[m][u]` for SBS `sbs`.
pub fn sue_throughput(
    sbs: usize,
    assignment: &[Vec<bool>],
    rates: &RateTable,
    sue: usize,
) -> Result<f64, ChannelError> {
    let mut total = 0.0;
    for (m, row) in assignment.iter().enumerate() {
        let count = row.iter().filter(|&&x| x).count();
        if count > 1 {
            return Err(ChannelError::SharedSubchannel {
                sbs,
                subchannel: m,
                count,
            });
        }
        if row[sue] {
            total += rates.rate_bits[m][sue];
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDraw {
    /// `P_n = P^c + Δ Σ x p`.
    pub p_total_w: f64,
    pub transmit_sum_w: f64,
}

/// Relative slack allowed on the transmit budget check.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Linear power consumption of one SBS. `power_w` holds the effective
/// `x·p` per link.
pub fn power_consumption<'a>(
    power_w: impl IntoIterator<Item = &'a f64>,
    radio: &RadioConfig,
) -> Result<PowerDraw, ChannelError> {
    let transmit_sum_w: f64 = power_w.into_iter().sum();
    if transmit_sum_w > radio.p_sbs_max_w * (1.0 + BUDGET_SLACK) {
        return Err(ChannelError::PowerBudget {
            total_w: transmit_sum_w,
            budget_w: radio.p_sbs_max_w,
        });
    }
    Ok(PowerDraw {
        p_total_w: radio.static_power_w + radio.power_slope * transmit_sum_w,
        transmit_sum_w,
    })
}
