use std::io::Write;

use greenshare::{load_config, ConfigError, Scenario};
use proptest::prelude::*;

fn field_of(err: ConfigError) -> String {
    match err {
        ConfigError::Invalid { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

#[test]
fn default_round_trips_through_file() {
    let s = Scenario::default();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(s.to_toml_string().as_bytes()).unwrap();
    let loaded = load_config(f.path()).unwrap();
    assert_eq!(loaded, s);
    assert_eq!(
        Scenario::from_toml_str(&loaded.to_toml_string()).unwrap(),
        loaded
    );
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config("/nonexistent/greenshare.toml").unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}

#[test]
fn unknown_keys_are_rejected() {
    let err = Scenario::from_toml_str("[network]\nn_sbss = 3\n").unwrap_err();
    assert!(
        matches!(err, ConfigError::Parse(ref m) if m.contains("n_sbss")),
        "{err}"
    );
}

#[test]
fn invalid_values_name_their_field() {
    let cases = [
        ("[economic]\nv_param = -1.0\n", "economic.v_param"),
        (
            "[network]\nusers_per_sbs = [2, 0, 4]\n",
            "network.users_per_sbs",
        ),
        (
            "[energy]\nharvest_mean_ws = 40.0\nharvest_max_ws = 20.0\n",
            "energy.harvest_mean_ws",
        ),
        (
            "[network]\nslot_duration_s = 0.0\n",
            "network.slot_duration_s",
        ),
    ];
    for (text, field) in cases {
        let err = Scenario::from_toml_str(text).unwrap_err();
        assert_eq!(field_of(err), field, "{text}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resolved_configs_round_trip(
        n_sbs in 1usize..=6,
        extra_sub in 0usize..=6,
        v in 0.0f64..100.0,
        harvest in 0.0f64..10.0,
        users in prop::collection::vec(1usize..=5, 6),
        slot_ms in 0.1f64..10.0,
    ) {
        let text = format!(
            "[network]\nn_sbs = {n_sbs}\nn_subchannels = {}\nusers_per_sbs = {:?}\nslot_duration_s = {}\n\
             [energy]\nharvest_mean_ws = {harvest}\n[economic]\nv_param = {v}\n",
            n_sbs + extra_sub,
            &users[..n_sbs],
            slot_ms * 1e-3,
        );
        let s = Scenario::from_toml_str(&text).unwrap();
        prop_assert_eq!(s.n_sbs(), n_sbs);
        prop_assert_eq!(&s.network.users_per_sbs[..], &users[..n_sbs]);
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        prop_assert_eq!(again, s);
    }
}
