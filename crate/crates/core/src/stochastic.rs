//! Seeded per-slot randomness: traffic arrivals, energy harvest, fading,
//! shadowing and macro-cell interference.
//!
//! Every slot draws from its own ChaCha stream keyed by `(seed, t)`, so a slot
//! can be regenerated in isolation and the realization never depends on how
//! many draws a policy made in earlier slots.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};

use crate::scenario::{distance_m, Point, Scenario};
use crate::units::Energy;

/// All random realizations of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub t: u64,
    /// `A_nu(t)` in bits, indexed `[n][u]`.
    pub arrivals_bits: Vec<Vec<f64>>,
    /// `E_n(t)`.
    pub harvest: Vec<Energy>,
    /// `h_nmu(t)`, indexed `[n][m][u]`.
    pub gain: Vec<Vec<Vec<f64>>>,
    /// `I_0mu(t) = p^M_mk h^M_nmu(t)` in watts, indexed `[n][m][u]`.
    pub mbs_interference_w: Vec<Vec<Vec<f64>>>,
    /// `h_nmb(t)` from SBS `n` to the MUE on subchannel `m`, indexed `[n][m]`.
    pub cross_gain: Vec<Vec<f64>>,
}

impl SlotState {
    pub fn n_sbs(&self) -> usize {
        self.arrivals_bits.len()
    }
}

const MUE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct SlotGenerator {
    seed: u64,
    next_t: u64,
    n_sbs: usize,
    n_sub: usize,
    users: Vec<usize>,
    /// Mean (pathloss-only) gains.
    sbs_to_sue: Vec<Vec<f64>>,
    mbs_to_sue: Vec<Vec<f64>>,
    sbs_to_mue: Vec<Vec<f64>>,
    mue_positions: Vec<Point>,
    mbs_power_per_sub_w: f64,
    shadowing: Normal<f64>,
    arrivals: Poisson<f64>,
    packet_size_bits: f64,
    a_max_bits: f64,
    harvest: Option<Poisson<f64>>,
    harvest_levels: f64,
    harvest_max: f64,
}

impl SlotGenerator {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        let net = &scenario.network;
        let radio = &scenario.radio;
        let n_sbs = scenario.n_sbs();
        let n_sub = scenario.n_subchannels();
        let pl = &radio.pathloss;

        let mut placement = ChaCha8Rng::seed_from_u64(seed);
        placement.set_stream(MUE_STREAM);
        let mue_positions: Vec<Point> = (0..n_sub)
            .map(|_| {
                let r = net.macro_radius_m * placement.random::<f64>().sqrt();
                let angle = 2.0 * std::f64::consts::PI * placement.random::<f64>();
                [
                    net.mbs_position_m[0] + r * angle.cos(),
                    net.mbs_position_m[1] + r * angle.sin(),
                ]
            })
            .collect();

        let sbs_to_sue = (0..n_sbs)
            .map(|n| {
                net.sue_positions_m[n]
                    .iter()
                    .map(|&p| pl.gain(distance_m(net.sbs_positions_m[n], p)))
                    .collect()
            })
            .collect();
        let mbs_to_sue = (0..n_sbs)
            .map(|n| {
                net.sue_positions_m[n]
                    .iter()
                    .map(|&p| pl.gain(distance_m(net.mbs_position_m, p)))
                    .collect()
            })
            .collect();
        let sbs_to_mue = (0..n_sbs)
            .map(|n| {
                mue_positions
                    .iter()
                    .map(|&p| pl.gain(distance_m(net.sbs_positions_m[n], p)))
                    .collect()
            })
            .collect();

        let energy = &scenario.energy;
        let levels = f64::from(energy.harvest_levels);
        let harvest_rate = levels * energy.harvest_mean_ws / energy.harvest_max_ws;
        let traffic = &scenario.traffic;

        SlotGenerator {
            seed,
            next_t: 0,
            n_sbs,
            n_sub,
            users: net.users_per_sbs.clone(),
            sbs_to_sue,
            mbs_to_sue,
            sbs_to_mue,
            mue_positions,
            mbs_power_per_sub_w: radio.mbs_power_w() / n_sub as f64,
            shadowing: Normal::new(0.0, radio.shadowing_sigma_db)
                .expect("validated shadowing deviation"),
            arrivals: Poisson::new(traffic.arrival_mean_pkts).expect("validated arrival mean"),
            packet_size_bits: traffic.packet_size_bits,
            a_max_bits: traffic.a_max_bits,
            harvest: (harvest_rate > 0.0)
                .then(|| Poisson::new(harvest_rate).expect("positive harvest rate")),
            harvest_levels: levels,
            harvest_max: energy.harvest_max_ws,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mue_positions(&self) -> &[Point] {
        &self.mue_positions
    }

    /// Realization of slot `t`; pure in `(seed, t)`.
    pub fn slot(&self, t: u64) -> SlotState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);

        let arrivals_bits = self
            .users
            .iter()
            .map(|&u| {
                (0..u)
                    .map(|_| {
                        let packets = self.arrivals.sample(&mut rng);
                        (packets * self.packet_size_bits).min(self.a_max_bits)
                    })
                    .collect()
            })
            .collect();

        let harvest = (0..self.n_sbs)
            .map(|_| {
                let k = self.harvest.map_or(0.0, |d| d.sample(&mut rng));
                let level = k.min(self.harvest_levels) / self.harvest_levels;
                Energy::from_units(self.harvest_max * level)
                    .min(Energy::from_units(self.harvest_max))
            })
            .collect();

        let mut gain = Vec::with_capacity(self.n_sbs);
        let mut mbs_interference_w = Vec::with_capacity(self.n_sbs);
        for n in 0..self.n_sbs {
            let mut g_n = Vec::with_capacity(self.n_sub);
            let mut i_n = Vec::with_capacity(self.n_sub);
            for _m in 0..self.n_sub {
                let mut g_m = Vec::with_capacity(self.users[n]);
                let mut i_m = Vec::with_capacity(self.users[n]);
                for u in 0..self.users[n] {
                    g_m.push(self.sbs_to_sue[n][u] * self.fade(&mut rng));
                    i_m.push(
                        self.mbs_power_per_sub_w * self.mbs_to_sue[n][u] * self.fade(&mut rng),
                    );
                }
                g_n.push(g_m);
                i_n.push(i_m);
            }
            gain.push(g_n);
            mbs_interference_w.push(i_n);
        }
        let cross_gain = (0..self.n_sbs)
            .map(|n| {
                (0..self.n_sub)
                    .map(|m| self.sbs_to_mue[n][m] * self.fade(&mut rng))
                    .collect()
            })
            .collect();

        SlotState {
            t,
            arrivals_bits,
            harvest,
            gain,
            mbs_interference_w,
            cross_gain,
        }
    }

    /// Realization of the next slot in sequence.
    pub fn next_slot_state(&mut self) -> SlotState {
        let state = self.slot(self.next_t);
        self.next_t += 1;
        state
    }

    /// Unit-mean exponential (Rayleigh power) fade times log-normal shadowing.
    fn fade(&self, rng: &mut ChaCha8Rng) -> f64 {
        let rayleigh: f64 = Exp1.sample(rng);
        let shadow_db = self.shadowing.sample(rng);
        // Exp1 can return exactly 0.
        rayleigh.max(f64::MIN_POSITIVE) * 10f64.powf(shadow_db / 10.0)
    }
}

/// `E[min(K * size, A^max)]` for `K ~ Poisson(λ)`, in bits per slot.
pub fn expected_arrival_rate(scenario: &Scenario) -> f64 {
    let t = &scenario.traffic;
    let lambda = t.arrival_mean_pkts;
    let size = t.packet_size_bits;
    // Below `cutoff` packets the arrival is untruncated.
    let cutoff = (t.a_max_bits / size).ceil() as u64;
    let mut pmf = (-lambda).exp();
    let mut below = 0.0;
    let mut mass_below = 0.0;
    for k in 0..cutoff {
        below += k as f64 * size * pmf;
        mass_below += pmf;
        pmf *= lambda / (k + 1) as f64;
    }
    below + t.a_max_bits * (1.0 - mass_below).max(0.0)
}

const TRACE_HEADER: [&str; 9] = [
    "t",
    "n",
    "m",
    "u",
    "arrival_bits",
    "harvest_ws",
    "gain",
    "mbs_interference_w",
    "cross_gain",
];

/// Writes slot states as one CSV row per `(t, n, m, u)`.
pub fn write_trace<W: Write>(out: W, states: &[SlotState]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for s in states {
        for n in 0..s.n_sbs() {
            for m in 0..s.gain[n].len() {
                for u in 0..s.gain[n][m].len() {
                    w.write_record([
                        s.t.to_string(),
                        n.to_string(),
                        m.to_string(),
                        u.to_string(),
                        s.arrivals_bits[n][u].to_string(),
                        s.harvest[n].pico().to_string(),
                        s.gain[n][m][u].to_string(),
                        s.mbs_interference_w[n][m][u].to_string(),
                        s.cross_gain[n][m].to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace`] for the given scenario shape.
pub fn read_trace<R: Read>(input: R, scenario: &Scenario) -> Result<Vec<SlotState>, String> {
    let n_sbs = scenario.n_sbs();
    let n_sub = scenario.n_subchannels();
    let users = &scenario.network.users_per_sbs;
    let blank = |t| SlotState {
        t,
        arrivals_bits: users.iter().map(|&u| vec![0.0; u]).collect(),
        harvest: vec![Energy::ZERO; n_sbs],
        gain: users.iter().map(|&u| vec![vec![0.0; u]; n_sub]).collect(),
        mbs_interference_w: users.iter().map(|&u| vec![vec![0.0; u]; n_sub]).collect(),
        cross_gain: vec![vec![0.0; n_sub]; n_sbs],
    };
    let mut states: Vec<SlotState> = Vec::new();
    let mut r = csv::Reader::from_reader(input);
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| format!("row {line}: missing column {i}"))
        };
        let int = |i: usize| -> Result<usize, String> {
            field(i)?.parse().map_err(|e| format!("row {line}: {e}"))
        };
        let real = |i: usize| -> Result<f64, String> {
            field(i)?.parse().map_err(|e| format!("row {line}: {e}"))
        };
        let t = int(0)? as u64;
        let (n, m, u) = (int(1)?, int(2)?, int(3)?);
        if n >= n_sbs || m >= n_sub || u >= users[n] {
            return Err(format!(
                "row {line}: index ({n}, {m}, {u}) outside scenario"
            ));
        }
        if states.last().is_none_or(|s| s.t != t) {
            states.push(blank(t));
        }
        let s = states.last_mut().expect("pushed above");
        s.arrivals_bits[n][u] = real(4)?;
        s.harvest[n] =
            Energy::from_pico(field(5)?.parse().map_err(|e| format!("row {line}: {e}"))?);
        s.gain[n][m][u] = real(6)?;
        s.mbs_interference_w[n][m][u] = real(7)?;
        s.cross_gain[n][m] = real(8)?;
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_slot_is_identical() {
        let s = Scenario::default();
        let a = SlotGenerator::new(&s, 7);
        let b = SlotGenerator::new(&s, 7);
        assert_eq!(a.slot(12), b.slot(12));
        assert_ne!(a.slot(12), a.slot(13));
        assert_ne!(a.slot(12), SlotGenerator::new(&s, 8).slot(12));
    }

    #[test]
    fn sequential_and_random_access_agree() {
        let s = Scenario::default();
        let mut g = SlotGenerator::new(&s, 3);
        let first = g.next_slot_state();
        let second = g.next_slot_state();
        assert_eq!(first, g.slot(0));
        assert_eq!(second, g.slot(1));
    }

    #[test]
    fn realizations_respect_bounds() {
        let s = Scenario::default();
        let g = SlotGenerator::new(&s, 11);
        let e_max = s.energy.harvest_max();
        for t in 0..200 {
            let st = g.slot(t);
            for row in &st.arrivals_bits {
                for &a in row {
                    assert!((0.0..=s.traffic.a_max_bits).contains(&a));
                }
            }
            for &e in &st.harvest {
                assert!(e >= Energy::ZERO && e <= e_max);
            }
            for n in 0..s.n_sbs() {
                for m in 0..s.n_subchannels() {
                    assert!(st.cross_gain[n][m] > 0.0);
                    for u in 0..s.users(n) {
                        assert!(st.gain[n][m][u] > 0.0 && st.gain[n][m][u].is_finite());
                        assert!(st.mbs_interference_w[n][m][u] >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn colocated_sue_has_finite_gain() {
        let mut s = Scenario::default();
        s.network.sue_positions_m[0][0] = s.network.sbs_positions_m[0];
        let st = SlotGenerator::new(&s, 1).slot(0);
        assert!(st.gain[0][0][0].is_finite() && st.gain[0][0][0] > 0.0);
    }

    #[test]
    fn untruncated_mean_is_poisson_mean_times_size() {
        let mut s = Scenario::default();
        s.traffic.a_max_bits = 1e9;
        assert!((expected_arrival_rate(&s) - 20_000.0).abs() < 1e-6);
        s.traffic.a_max_bits = 5000.0;
        s.traffic.arrival_mean_pkts = 0.5;
        assert!(expected_arrival_rate(&s) < 5000.0);
    }

    #[test]
    fn trace_round_trips() {
        let s = Scenario::default();
        let g = SlotGenerator::new(&s, 5);
        let states: Vec<_> = (0..3).map(|t| g.slot(t)).collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, &states).unwrap();
        let back = read_trace(buf.as_slice(), &s).unwrap();
        assert_eq!(back, states);
    }
}
