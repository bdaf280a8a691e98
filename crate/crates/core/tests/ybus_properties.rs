mod common;

use common::{branch_injections, c, XorShift};
use destab::netmodel::{
    augment_load_admittance, build_ybus, partition_ybus, NetworkCase, ShuntLoad,
};
use destab::Complex64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn perturbed(params: &[(f64, f64, f64, f64)], flat: bool) -> NetworkCase {
    let mut case = NetworkCase::wscc9();
    for (br, &(r, x, b, tap)) in case.branches.iter_mut().zip(params) {
        br.r = r;
        br.x = x;
        br.b_sh = if flat { 0.0 } else { b };
        br.tap = if flat { 1.0 } else { tap };
    }
    case
}

fn branch_params() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.0..0.1f64, 0.01..0.5f64, 0.0..0.5f64, 0.9..1.1f64), 9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_matches_branch_physics(params in branch_params(), seed in 1u64..u64::MAX) {
        let case = perturbed(&params, false);
        let y = build_ybus(&case).unwrap();
        let mut rng = XorShift(seed);
        for _ in 0..100 {
            let v: Vec<Complex64> = (0..9).map(|_| c(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2))).collect();
            let want = branch_injections(&case, &v);
            let got = y.apply(&v);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_without_shunts(params in branch_params()) {
        let y = build_ybus(&perturbed(&params, true)).unwrap();
        for i in 0..9 {
            let s: Complex64 = y.y.row(i).iter().sum();
            prop_assert!(s.norm() < 1e-9, "row {i} sums to {s}");
        }
    }

    #[test]
    fn block_form_acts_like_complex(params in branch_params(), seed in 1u64..u64::MAX) {
        let y = build_ybus(&perturbed(&params, false)).unwrap();
        let block = y.to_block();
        let mut rng = XorShift(seed);
        let v: Vec<Complex64> = (0..9).map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect();
        let flat = DVector::from_iterator(18, v.iter().flat_map(|z| [z.re, z.im]));
        let out = &block * flat;
        for (k, z) in y.apply(&v).iter().enumerate() {
            prop_assert!((out[2 * k] - z.re).abs() < 1e-12 && (out[2 * k + 1] - z.im).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_is_a_permutation(params in branch_params()) {
        let case = perturbed(&params, false);
        let y = build_ybus(&case).unwrap();
        let part = partition_ybus(&y, &case).unwrap();
        let order = part.order();
        let full = part.reassemble();
        for (i, &bi) in order.iter().enumerate() {
            for (j, &bj) in order.iter().enumerate() {
                let z = y.y[(bi, bj)];
                prop_assert_eq!(full[(2 * i, 2 * j)], z.re);
                prop_assert_eq!(full[(2 * i + 1, 2 * j)], z.im);
            }
        }
    }

    #[test]
    fn augmentation_is_additive_and_draws_load_current(
        p1 in -3.0..3.0f64, q1 in -3.0..3.0f64, p2 in -3.0..3.0f64, q2 in -3.0..3.0f64,
        vm in 0.8..1.2f64, va in -1.0..1.0f64,
    ) {
        let base = DMatrix::zeros(4, 4);
        let l1 = ShuntLoad { bus: 5, slot: 1, p: p1, q: q1, v_mag: vm };
        let l2 = ShuntLoad { bus: 5, slot: 1, p: p2, q: q2, v_mag: vm };
        let both = augment_load_admittance(&base, &[l1, l2]).unwrap();
        let chained = augment_load_admittance(&augment_load_admittance(&base, &[l1]).unwrap(), &[l2]).unwrap();
        prop_assert!((&both - &chained).abs().max() < 1e-15);

        let single = augment_load_admittance(&base, &[l1]).unwrap();
        let v = Complex64::from_polar(vm, va);
        let i = &single * DVector::from_vec(vec![0.0, 0.0, v.re, v.im]);
        let want = (c(p1, q1) / v).conj();
        prop_assert!((i[2] - want.re).abs() < 1e-12 && (i[3] - want.im).abs() < 1e-12);
        prop_assert_eq!(i[0], 0.0);
    }
}

#[test]
fn bad_slot_and_zero_voltage_rejected() {
    let base = DMatrix::zeros(2, 2);
    let load = ShuntLoad {
        bus: 1,
        slot: 1,
        p: 1.0,
        q: 0.0,
        v_mag: 1.0,
    };
    assert!(augment_load_admittance(&base, &[load]).is_err());
    let load = ShuntLoad {
        slot: 0,
        v_mag: 0.0,
        ..load
    };
    assert!(augment_load_admittance(&base, &[load]).is_err());
}
