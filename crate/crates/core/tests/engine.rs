use greenshare::controller::BatteryCase;
use greenshare::engine::{
    calibrate_c_min, drift_diagnostic, run, seed_means, sweep_v, write_slot_csv, write_summary_csv,
    EngineError, RunOptions, SweepSpec, SLOT_CSV_HEADER, SUMMARY_CSV_HEADER,
};
use greenshare::{Energy, PolicyKind, Scenario};

fn opts(policy: PolicyKind, seed: u64, slots: u64) -> RunOptions {
    RunOptions {
        policy,
        seed,
        slots,
        warmup: false,
    }
}

#[test]
fn repeated_runs_are_identical() {
    let s = Scenario::default();
    for policy in PolicyKind::ALL {
        let a = run(&s, opts(policy, 4, 60)).unwrap();
        let b = run(&s, opts(policy, 4, 60)).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn drift_averages_out_in_steady_state() {
    let s = Scenario::default();
    let out = run(&s, opts(PolicyKind::Proposed, 1, 1000)).unwrap();
    for r in &out.trace {
        assert_eq!(r.metrics.drift, drift_diagnostic(&r.state, &r.outcome.next));
    }
    let tail = &out.trace[500..];
    let mean = tail.iter().map(|r| r.metrics.drift).sum::<f64>() / tail.len() as f64;
    let mean_abs = tail.iter().map(|r| r.metrics.drift.abs()).sum::<f64>() / tail.len() as f64;
    assert!(
        mean.abs() < 0.01 * mean_abs,
        "mean drift {mean}, mean |drift| {mean_abs}"
    );
}

#[test]
fn grid_is_idle_above_target_unless_balance_needs_it() {
    let s = Scenario::default();
    for policy in PolicyKind::ALL {
        let out = run(&s, opts(policy, 2, 300)).unwrap();
        let mut overrides = 0;
        for r in &out.trace {
            for (n, e) in r.outcome.decision.energy.iter().enumerate() {
                if r.state.s_energy[n] > r.state.rho[n] {
                    assert_eq!(e.case, BatteryCase::AboveTarget);
                    assert!(e.grid == Energy::ZERO || e.balance_override);
                }
                overrides += usize::from(e.balance_override);
            }
        }
        assert_eq!(overrides, out.summary.balance_overrides);
    }
}

#[test]
fn sbs_either_pays_or_receives() {
    let s = Scenario::default();
    let out = run(&s, opts(PolicyKind::Proposed, 3, 300)).unwrap();
    let mut traded = 0;
    for r in &out.trace {
        let d = &r.outcome.decision;
        for n in 0..s.n_sbs() {
            let b0 = s.network.initial_band_hz[n];
            let b = r.outcome.band_hz[n];
            let receipt = d.alpha[n] * (b0 - b).max(0.0);
            let charge = d.beta[n] * (b - b0).max(0.0);
            assert!(receipt == 0.0 || charge == 0.0);
            assert_eq!(d.sharing_payment[n], receipt - charge);
            traded += usize::from(d.sharing_payment[n] != 0.0);
        }
    }
    assert!(traded > 0, "no spectrum changed hands in 300 slots");
}

#[test]
fn baselines_never_trade() {
    let s = Scenario::default();
    for policy in [PolicyKind::Nsra, PolicyKind::Tdraa] {
        let out = run(&s, opts(policy, 1, 100)).unwrap();
        assert!(out.trace.iter().all(|r| r
            .outcome
            .decision
            .sharing_payment
            .iter()
            .all(|&o| o == 0.0)));
    }
}

#[test]
fn warmup_drops_leading_slots() {
    let s = Scenario::default();
    let mut o = opts(PolicyKind::Nsra, 1, 50);
    o.warmup = true;
    let out = run(&s, o).unwrap();
    assert_eq!(out.summary.first_slot, 5);
    let expected = out.trace[5..]
        .iter()
        .map(|r| r.metrics.backlog_bits)
        .sum::<f64>()
        / (45.0 * s.total_users() as f64);
    assert!((out.summary.avg_backlog_bits - expected).abs() <= 1e-9 * expected.max(1.0));
}

#[test]
fn sweep_rows_are_ordered_with_seed_means_last() {
    let s = Scenario::default();
    let spec = SweepSpec {
        v_list: vec![1.0, 20.0],
        policies: vec![PolicyKind::Nsra, PolicyKind::Tdraa],
        seeds: vec![1, 2],
        slots: 30,
        warmup: false,
    };
    let rows = sweep_v(&s, &spec).unwrap();
    assert_eq!(rows.len(), 8 + 4);
    let keys: Vec<(f64, PolicyKind, Option<u64>)> =
        rows.iter().map(|r| (r.v, r.policy, r.seed)).collect();
    assert_eq!(keys[0], (1.0, PolicyKind::Nsra, Some(1)));
    assert_eq!(keys[3], (1.0, PolicyKind::Tdraa, Some(2)));
    assert_eq!(keys[8], (1.0, PolicyKind::Nsra, None));
    assert_eq!(seed_means(&rows[..8]), rows[8..].to_vec());
    let mut at_one = s.clone();
    at_one.economic.v_param = 1.0;
    let single = run(&at_one, opts(PolicyKind::Nsra, 2, 30)).unwrap();
    assert_eq!(rows[1].total_profit, single.summary.total_profit);

    let mut out = Vec::new();
    write_summary_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().last().unwrap().contains(",mean,"));
}

#[test]
fn empty_sweeps_and_runs_are_errors() {
    let s = Scenario::default();
    let spec = SweepSpec {
        v_list: vec![],
        policies: vec![PolicyKind::Nsra],
        seeds: vec![1],
        slots: 10,
        warmup: false,
    };
    assert!(matches!(sweep_v(&s, &spec), Err(EngineError::EmptySweep)));
    assert!(matches!(
        run(&s, opts(PolicyKind::Nsra, 1, 0)),
        Err(EngineError::NoSlots)
    ));
}

#[test]
fn slot_csv_has_one_row_per_sue_and_slot() {
    let s = Scenario::default();
    let out = run(&s, opts(PolicyKind::Proposed, 1, 12)).unwrap();
    let mut bytes = Vec::new();
    write_slot_csv(&mut bytes, &out.trace).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SLOT_CSV_HEADER.join(","));
    assert_eq!(lines.count(), 12 * s.total_users());
}

#[test]
fn calibration_returns_one_floor_per_sbs() {
    let s = Scenario::default();
    let floors = calibrate_c_min(&s, 1, 40).unwrap();
    assert_eq!(floors.len(), s.n_sbs());
    assert!(floors.iter().all(|f| f.is_finite()));
}
