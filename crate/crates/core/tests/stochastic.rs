use greenshare::scenario::distance_m;
use greenshare::stochastic::{expected_arrival_rate, SlotGenerator};
use greenshare::Scenario;

struct Moments {
    n: f64,
    mean: f64,
    se: f64,
}

fn moments(samples: impl Iterator<Item = f64>) -> Moments {
    let xs: Vec<f64> = samples.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Moments {
        n,
        mean,
        se: (var / n).sqrt(),
    }
}

fn assert_close(name: &str, m: &Moments, expected: f64) {
    assert!(m.n >= 1e5, "{name}: only {} samples", m.n);
    assert!(
        (m.mean - expected).abs() <= 3.0 * m.se,
        "{name}: mean {} vs expected {expected}, se {}",
        m.mean,
        m.se
    );
}

#[test]
fn arrivals_match_truncated_poisson_mean() {
    let s = Scenario::default();
    let generator = SlotGenerator::new(&s, 11);
    let per_slot = s.total_users() as u64;
    let slots = 100_000 / per_slot + 1;
    let m = moments((0..slots).flat_map(|t| generator.slot(t).arrivals_bits.into_iter().flatten()));
    assert_close("arrivals", &m, expected_arrival_rate(&s));
}

#[test]
fn harvest_matches_configured_mean() {
    let s = Scenario::default();
    let e = &s.energy;
    let levels = e.harvest_levels as u64;
    let lambda = levels as f64 * e.harvest_mean_ws / e.harvest_max_ws;
    // E[min(K, L)] / L * E^max for K ~ Poisson(λ).
    let mut pmf = (-lambda).exp();
    let mut mass = 0.0;
    let mut partial = 0.0;
    for k in 0..levels {
        partial += k as f64 * pmf;
        mass += pmf;
        pmf *= lambda / (k + 1) as f64;
    }
    let expected = (partial + levels as f64 * (1.0 - mass)) / levels as f64 * e.harvest_max_ws;
    // Quantizing to pico units does not move the mean at this resolution.
    let generator = SlotGenerator::new(&s, 5);
    let slots = 100_000 / s.n_sbs() as u64 + 1;
    let m = moments(
        (0..slots).flat_map(|t| generator.slot(t).harvest.into_iter().map(|h| h.as_units())),
    );
    assert_close("harvest", &m, expected);
    assert!((expected - e.harvest_mean_ws).abs() < 0.05 * e.harvest_mean_ws);
}

#[test]
fn fading_matches_rayleigh_times_lognormal() {
    let s = Scenario::default();
    let net = &s.network;
    let generator = SlotGenerator::new(&s, 3);
    let mean_gain: Vec<Vec<f64>> = (0..s.n_sbs())
        .map(|n| {
            net.sue_positions_m[n]
                .iter()
                .map(|&p| s.radio.pathloss.gain(distance_m(net.sbs_positions_m[n], p)))
                .collect()
        })
        .collect();
    let per_slot = (s.total_users() * s.n_subchannels()) as u64;
    let slots = 100_000 / per_slot + 1;
    let fades: Vec<f64> = (0..slots)
        .flat_map(|t| {
            let slot = generator.slot(t);
            let mut out = Vec::new();
            for (n, per_m) in slot.gain.iter().enumerate() {
                for per_u in per_m {
                    for (u, g) in per_u.iter().enumerate() {
                        out.push(g / mean_gain[n][u]);
                    }
                }
            }
            out
        })
        .collect();
    let sigma = s.radio.shadowing_sigma_db * std::f64::consts::LN_10 / 10.0;
    // ln(Exp1) has mean -γ; the shadowing term has mean zero.
    let euler_gamma = 0.577_215_664_901_532_9;
    assert_close(
        "log fade",
        &moments(fades.iter().map(|f| f.ln())),
        -euler_gamma,
    );
    assert_close(
        "fade",
        &moments(fades.iter().copied()),
        (0.5 * sigma * sigma).exp(),
    );
}

#[test]
fn generators_with_different_seeds_differ() {
    let s = Scenario::default();
    let a = SlotGenerator::new(&s, 1).slot(0);
    let b = SlotGenerator::new(&s, 2).slot(0);
    assert_ne!(a, b);
}
