use assistlab_core::seeding::rng_from_seed;
use assistlab_learn::gae;
use proptest::prelude::*;
use rand::Rng;

/// Quadratic-time advantage: explicit discounted sum of TD errors up to the
/// end of the current episode.
fn brute_force(r: &[f64], v: &[f64], d: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let live = if d[k] { 0.0 } else { 1.0 };
                sum += w * (r[k] + gamma * v[k + 1] * live - v[k]);
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[test]
fn matches_brute_force_sums() {
    let mut rng = rng_from_seed(1);
    for _ in 0..200 {
        let r: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..10).map(|_| rng.random_bool(0.2)).collect();
        let (g, l) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let (adv, ret) = gae(&r, &v, &d, g, l).unwrap();
        for (t, (a, b)) in adv.iter().zip(brute_force(&r, &v, &d, g, l)).enumerate() {
            assert!((a - b).abs() < 1e-12);
            assert!((ret[t] - (a + v[t])).abs() < 1e-12);
        }
    }
}

#[test]
fn lambda_zero_is_td_error() {
    let r = [1.0, -0.5, 2.0, 0.25];
    let v = [0.3, 0.1, -0.2, 0.4, 0.9];
    let d = [false, false, true, false];
    let (adv, _) = gae(&r, &v, &d, 0.9, 0.0).unwrap();
    let want = [1.0 + 0.9 * 0.1 - 0.3, -0.5 + 0.9 * -0.2 - 0.1, 2.0 + 0.2, 0.25 + 0.9 * 0.9 - 0.4];
    for (a, b) in adv.iter().zip(want) {
        assert_eq!(*a, b);
    }
}

#[test]
fn gamma_zero_is_reward_minus_value() {
    let r = [1.0, -0.5, 2.0];
    let v = [0.3, 0.1, -0.2, 7.0];
    let (adv, _) = gae(&r, &v, &[false; 3], 0.0, 0.95).unwrap();
    assert_eq!(adv, vec![0.7, -0.6, 2.2]);
}

#[test]
fn misaligned_lengths_are_rejected() {
    assert!(gae(&[1.0, 2.0], &[0.0, 0.0], &[false, true], 0.9, 0.9).is_err());
    assert!(gae(&[1.0, 2.0], &[0.0; 3], &[true], 0.9, 0.9).is_err());
}

proptest! {
    #[test]
    fn done_cuts_the_recursion(
        r in prop::collection::vec(-3.0f64..3.0, 1..20),
        tail in prop::collection::vec(-3.0f64..3.0, 1..20),
        g in 0.1f64..1.0, l in 0.1f64..1.0,
    ) {
        // an episode's advantages do not depend on what follows its done flag
        let n = r.len();
        let mut d = vec![false; n];
        d[n - 1] = true;
        let v = vec![0.5; n + 1];
        let (alone, _) = gae(&r, &v, &d, g, l).unwrap();
        let mut r2 = r.clone();
        r2.extend(&tail);
        let mut d2 = d.clone();
        d2.extend(vec![false; tail.len()]);
        let v2 = vec![0.5; r2.len() + 1];
        let (joined, _) = gae(&r2, &v2, &d2, g, l).unwrap();
        prop_assert_eq!(&joined[..n], &alone[..]);
    }
}
