mod common;

use common::{toy_grid_best, toy_options, two_machine};
use destab::attack::{
    evaluate_attack, falsified_case, random_attack, synthesize_attack, trial_rng, AccessMask,
    AttackVector, ChannelRanges, SetpointDeviation, SynthesisOptions,
};
use destab::netmodel::NetworkCase;
use proptest::prelude::*;

#[test]
fn uniform_draws_are_centred_and_bounded() {
    let ranges = vec![
        ChannelRanges {
            p: (-200.0, 200.0),
            q: (-200.0, 200.0)
        };
        3
    ];
    let mask = AccessMask::full(3);
    let mut rng = trial_rng(11, 0);
    let n = 100_000;
    let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..n {
        let a = random_attack(&mut rng, &ranges, &mask);
        let x = a.channels[1].0;
        sum += x;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let sigma = 400.0 / 12f64.sqrt();
    let mean = sum / n as f64;
    assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    assert!(lo >= -200.0 && hi <= 200.0);
    assert!(lo < -199.0 && hi > 199.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_attacks_respect_the_mask(
        p in prop::collection::vec(any::<bool>(), 3),
        q in prop::collection::vec(any::<bool>(), 3),
        seed in any::<u64>(),
        k in 0u64..1000,
    ) {
        let mask = AccessMask { p, q };
        let ranges = vec![ChannelRanges { p: (-50.0, 80.0), q: (-10.0, 30.0) }; 3];
        let a = random_attack(&mut trial_rng(seed, k), &ranges, &mask);
        prop_assert!(a.respects(&mask));
        for (i, &(ap, aq)) in a.channels.iter().enumerate() {
            if !mask.p[i] { prop_assert_eq!(ap, 0.0); }
            if !mask.q[i] { prop_assert_eq!(aq, 0.0); }
        }
    }

    #[test]
    fn zero_attack_is_neutral_for_any_load_level(scale in 0.5..1.3f64) {
        let mut case = NetworkCase::wscc9();
        for l in &mut case.loads {
            l.p_mw *= scale;
            l.q_mvar *= scale;
        }
        let zero = AttackVector::zeros(3);
        let dev = SetpointDeviation::zeros(&case);
        prop_assert_eq!(&falsified_case(&case, &zero, &dev), &case);
        // Neutral whether or not the loaded case still has a solution.
        let base = destab::analyze_case(&case, &Default::default()).map(|a| a.eigen.eigenvalues);
        let attacked = evaluate_attack(&case, &zero, &dev).map(|a| a.eigen.eigenvalues);
        prop_assert_eq!(base.ok(), attacked.ok());
    }
}

#[test]
fn synthesized_attack_verifies_independently() {
    let case = two_machine();
    let res = synthesize_attack(&case, &AccessMask::full(1), &toy_options()).unwrap();
    assert!(res.feasible);
    let an = evaluate_attack(&case, &res.attack, &res.deviation).unwrap();
    assert!(an.eigen.spectral_abscissa >= toy_options().epsilon_unstable);
    assert!(an.bounds_ok());
    assert_eq!(an.eigen.spectral_abscissa, res.spectral_abscissa);
}

#[test]
fn toy_synthesis_is_near_grid_minimum() {
    let (grid, _) = toy_grid_best(0.1).expect("grid has a feasible point");
    let res = synthesize_attack(&two_machine(), &AccessMask::full(1), &toy_options()).unwrap();
    assert!(res.feasible);
    assert!(
        res.objective <= 1.05 * grid,
        "{} vs grid {grid}",
        res.objective
    );
}

#[test]
fn accepted_iterates_never_increase_violation() {
    for (case, mask) in [
        (two_machine(), AccessMask::full(1)),
        (NetworkCase::wscc9(), AccessMask::full(3)),
    ] {
        let opts = SynthesisOptions {
            starts: 4,
            ..Default::default()
        };
        let res = synthesize_attack(&case, &mask, &opts).unwrap();
        for start in 0..opts.starts {
            let accepted: Vec<f64> = res
                .trace
                .iter()
                .filter(|r| r.start == start && r.accepted)
                .map(|r| r.violation)
                .collect();
            for w in accepted.windows(2) {
                assert!(w[1] <= w[0], "start {start}: {accepted:?}");
            }
        }
    }
}

#[test]
fn masked_synthesis_leaves_other_channels_untouched() {
    let case = NetworkCase::wscc9();
    let mask = AccessMask::parse("L1:pq,L3:pq", &case).unwrap();
    let opts = SynthesisOptions {
        starts: 4,
        ..Default::default()
    };
    let res = synthesize_attack(&case, &mask, &opts).unwrap();
    assert!(res.attack.respects(&mask));
    assert_eq!(res.attack.channels[1], (0.0, 0.0));
}

#[test]
fn already_unstable_base_needs_no_attack() {
    let toy = two_machine();
    let grid_attack = AttackVector {
        channels: vec![(-160.0, -90.0)],
    };
    let base = falsified_case(&toy, &grid_attack, &SetpointDeviation::zeros(&toy));
    let an = destab::analyze_case(&base, &Default::default()).unwrap();
    assert!(
        an.eigen.spectral_abscissa >= 0.1 && an.bounds_ok(),
        "fixture is not unstable enough"
    );

    let res = synthesize_attack(&base, &AccessMask::full(1), &toy_options()).unwrap();
    assert!(res.feasible);
    assert!(res.attack.is_zero() && res.deviation.is_zero());
    assert_eq!(res.objective, 0.0);
}
