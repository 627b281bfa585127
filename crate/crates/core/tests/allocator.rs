use greenshare::allocator::{
    feasibility, interference_limited_power, objective, outcome, solve, update_multipliers,
    ChannelSpec, Instance, Multipliers, Participant, Slack, SolveOptions,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn participant(
    sbs: usize,
    queues: Vec<f64>,
    w: f64,
    offset: f64,
    alpha: f64,
    beta: f64,
) -> Participant {
    Participant {
        sbs: Some(sbs),
        queue_bits: queues,
        w,
        energy_offset: offset,
        grid_price: 0.1,
        p_max_w: 0.1,
        static_power_w: 3.2,
        power_slope: 4.0,
        alpha,
        beta,
        initial_band_hz: 15e6,
    }
}

prop_compose! {
    fn instances()(
        users in prop::collection::vec(1usize..=3, 1..=2),
        n_chan in 1usize..=4,
        seed_vals in prop::collection::vec(0.0f64..1.0, 64),
        queue_scale in prop::sample::select(vec![0.0, 1e3, 3e4, 1e6]),
        w in prop::collection::vec(0.0f64..3000.0, 2),
        offset in prop::collection::vec(-500.0f64..500.0, 2),
        leaser_first in any::<bool>(),
    ) -> Instance {
        let mut it = seed_vals.into_iter().cycle();
        let mut next = move || it.next().unwrap();
        let participants: Vec<Participant> = users
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                let queues = (0..u).map(|_| queue_scale * next()).collect();
                let leases = (k == 0) == leaser_first && users.len() == 2;
                let rents = (k == 0) != leaser_first && users.len() == 2;
                participant(k, queues, w[k], offset[k], if leases { 1e-6 } else { 0.0 }, if rents { 1e-6 } else { 0.0 })
            })
            .collect();
        let channels: Vec<ChannelSpec> = (0..n_chan)
            .map(|m| ChannelSpec {
                subchannel: Some(m),
                bandwidth_hz: 10e6,
                slot_s: 1e-3,
                noise_w: 4e-14,
                interference_cap_w: 2e-10,
            })
            .collect();
        let gain = users
            .iter()
            .map(|&u| (0..n_chan).map(|_| (0..u).map(|_| 1e-11 * 10f64.powf(3.0 * next())).collect()).collect())
            .collect();
        let mbs = users
            .iter()
            .map(|&u| (0..n_chan).map(|_| (0..u).map(|_| 1e-13 * 10f64.powf(3.0 * next())).collect()).collect())
            .collect();
        let cross = users
            .iter()
            .map(|_| (0..n_chan).map(|_| 1e-13 * 10f64.powf(4.5 * next())).collect())
            .collect();
        Instance { participants, channels, gain, mbs_interference_w: mbs, cross_gain: cross }
    }
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decisions_are_feasible(inst in instances()) {
        let d = solve(&inst, &opts());
        prop_assert!(feasibility(&inst, &d.channel_use).is_feasible(0.0));
        prop_assert_eq!(d.objective_value, objective(&inst, &d.channel_use));
        let empty = vec![None; inst.channels.len()];
        prop_assert!(d.objective_value >= objective(&inst, &empty));
        prop_assert_eq!(d.dual_history.len(), d.iterations);
    }

    #[test]
    fn multipliers_stay_nonnegative(
        inst in instances(),
        steps in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 12), 1..30),
    ) {
        let np = inst.participants.len();
        let nc = inst.channels.len();
        let mut m = Multipliers::zero(vec![1.0; np], vec![1e9; nc], vec![1e3; nc]);
        for g in steps {
            let slack = Slack {
                power: g[..np].to_vec(),
                interference: g[2..2 + nc].iter().map(|v| v * 1e-10).collect(),
                exclusivity: g[6..6 + nc].to_vec(),
            };
            m = update_multipliers(&m, &slack);
            prop_assert!(m.lambda1.iter().chain(&m.lambda2).chain(&m.lambda3).all(|&l| l >= 0.0));
        }
    }

    #[test]
    fn dual_trend_is_nonincreasing(inst in instances()) {
        let d = solve(&inst, &opts());
        let h = &d.dual_history;
        // Means of consecutive 20-iteration windows may only rise by noise.
        for pair in h.chunks_exact(20).collect::<Vec<_>>().windows(2) {
            let a = pair[0].iter().sum::<f64>() / 20.0;
            let b = pair[1].iter().sum::<f64>() / 20.0;
            prop_assert!(b <= a + 1e-2 * a.abs().max(1.0), "window mean rose from {} to {}", a, b);
        }
    }

    #[test]
    fn interference_power_is_tight(cap in 1e-12f64..1e-6, gain in 1e-16f64..1e-6) {
        let p = interference_limited_power(cap, gain);
        prop_assert!(p * gain <= cap);
        prop_assert!(p.next_up() * gain > cap || p.next_up() * gain == p * gain);
    }
}

#[test]
fn doubling_a_queue_never_lowers_its_rate() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut checked = 0;
    for _ in 0..64 {
        let inst = instances().new_tree(&mut runner).unwrap().current();
        let base = outcome(&inst, &solve(&inst, &opts()).channel_use);
        for k in 0..inst.participants.len() {
            for u in 0..inst.participants[k].users() {
                let mut bumped = inst.clone();
                bumped.participants[k].queue_bits[u] *= 2.0;
                let after = outcome(&bumped, &solve(&bumped, &opts()).channel_use);
                let before = base.rate_bits[k][u];
                assert!(
                    after.rate_bits[k][u] >= before * (1.0 - 1e-9),
                    "rate of ({k},{u}) fell from {before} to {}",
                    after.rate_bits[k][u]
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}
