use greenshare::oracle::brute_force_matching;
use greenshare::pairing::{match_pairs, BenefitMatrix, PairingError};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[allow(clippy::needless_range_loop)]
fn symmetric(n: usize, vals: &[f64]) -> BenefitMatrix {
    let mut raw = vec![vec![0.0; n]; n];
    let mut it = vals.iter().cycle();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = *it.next().unwrap();
            raw[i][j] = v;
            raw[j][i] = v;
        }
    }
    BenefitMatrix::symmetrized(raw, n, false)
}

fn random_pairing(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
        .chunks(2)
        .map(|c| (c[0].min(c[1]), c[0].max(c[1])))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matching_is_perfect_and_beats_random(
        half in 1usize..=7,
        vals in prop::collection::vec(-1e4f64..1e5, 91),
        seed in any::<u64>(),
    ) {
        let n = 2 * half;
        let bm = symmetric(n, &vals);
        let m = match_pairs(&bm).unwrap();
        let mut seen = vec![0; n];
        for &(i, j) in &m.pairs {
            prop_assert!(i < j);
            seen[i] += 1;
            seen[j] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for i in 0..n {
            let p = m.partner(i).unwrap();
            prop_assert_eq!(m.partner(p), Some(i));
        }
        let total = bm.total(&m.pairs);
        prop_assert!((total - m.total_benefit).abs() <= 1e-9 * total.abs().max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let other = bm.total(&random_pairing(n, &mut rng));
            prop_assert!(m.total_benefit >= other - 1e-9 * other.abs().max(1.0));
        }
    }

    #[test]
    fn agrees_with_enumeration_up_to_eight(half in 1usize..=4, vals in prop::collection::vec(-1e3f64..1e3, 28)) {
        let bm = symmetric(2 * half, &vals);
        let fast = match_pairs(&bm).unwrap();
        let exact = brute_force_matching(&bm).unwrap();
        prop_assert!((fast.total_benefit - exact.total_benefit).abs() <= 1e-9 * exact.total_benefit.abs().max(1.0));
    }
}

#[test]
fn large_networks_still_pair_everyone() {
    let n = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vals: Vec<f64> = (0..n * n)
        .map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0))
        .collect();
    let m = match_pairs(&symmetric(n, &vals)).unwrap();
    assert_eq!(m.pairs.len(), n / 2);
}

#[test]
fn odd_and_non_finite_inputs_are_rejected() {
    let odd = symmetric(3, &[1.0]);
    assert!(matches!(match_pairs(&odd), Err(PairingError::OddSize(3))));
    let mut bad = symmetric(4, &[1.0]);
    bad.c_tilde[0][1] = f64::NAN;
    assert!(matches!(
        match_pairs(&bad),
        Err(PairingError::NonFinite(0, 1))
    ));
}
