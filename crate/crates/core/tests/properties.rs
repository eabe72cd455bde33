//! Property tests for invariants that hold over whole input families
//! rather than at hand-picked points.

use captivity_core::branch_enum::{enumerate_branches, visit_branches};
use captivity_core::captivity::{cone_interval, max_overlap, ConeInterval};
use captivity_core::cocycle::{PerturbationFamily, RoofFunction};
use captivity_core::trig::TrigPoly;
use captivity_core::{CircleMap, Word};
use proptest::prelude::*;

fn small_map_strategy() -> impl Strategy<Value = CircleMap> {
    (2usize..=3, -0.04f64..0.04, -0.03f64..0.03).prop_map(|(degree, a1, a2)| {
        CircleMap::new(degree, TrigPoly::new(0.0, vec![a1, a2], vec![])).unwrap()
    })
}

fn roof_strategy() -> impl Strategy<Value = RoofFunction> {
    (-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5).prop_map(|(a1, b1, a2)| {
        RoofFunction::from_trig(TrigPoly::new(0.0, vec![a1, a2], vec![b1]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_branch_then_eval_roundtrips(
        map in small_map_strategy(),
        x in 0.0f64..1.0,
        j in 0usize..3,
    ) {
        let j = j % map.degree();
        let y = map.inverse_branch(j, x).unwrap();
        prop_assert!((map.eval(y) - x).abs() < 1e-10);
        let (lo, hi) = map.partition().interval(j);
        prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
    }

    #[test]
    fn slopes_stay_inside_theta_tau(
        map in small_map_strategy(),
        tau in roof_strategy(),
        x in 0.0f64..1.0,
        n in 1usize..6,
    ) {
        let (lambda, _) = map.expansion_bounds();
        let theta_tau = tau.sup_deriv() / (lambda - 1.0);
        visit_branches(&map, &tau, x, n, |view| {
            assert!(view.slope.abs() <= theta_tau + 1e-12);
        }).unwrap();
    }

    #[test]
    fn sweep_matches_brute_force_on_random_intervals(
        raw in prop::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 0..40),
    ) {
        let intervals: Vec<ConeInterval> = raw
            .iter()
            .enumerate()
            .map(|(i, &(center, half))| ConeInterval {
                center,
                half_width: half,
                word: Word::new(vec![i as u8]),
                weight: 1.0,
            })
            .collect();
        let (depth, _, words) = max_overlap(&intervals);

        // Oracle: pairwise endpoint maximization.
        let mut brute = 0u64;
        for probe in intervals.iter().flat_map(|iv| [iv.lo(), iv.hi()]) {
            let count = intervals
                .iter()
                .filter(|iv| iv.lo() <= probe && probe <= iv.hi())
                .count() as u64;
            brute = brute.max(count);
        }
        prop_assert_eq!(depth, brute);
        prop_assert_eq!(words.len() as u64, depth);
    }

    #[test]
    fn apply_params_affine_on_grid(
        t1 in -1.0f64..1.0,
        t2 in -1.0f64..1.0,
        s1 in -1.0f64..1.0,
        s2 in -1.0f64..1.0,
    ) {
        let base = RoofFunction::from_trig(TrigPoly::sine(1, 0.4));
        let family = PerturbationFamily::fourier(&base, 1, 1.0).unwrap();
        let f_t = family.apply_params(&[t1, t2]);
        let f_s = family.apply_params(&[s1, s2]);
        let f_sum = family.apply_params(&[t1 + s1, t2 + s2]);
        for i in 0..32 {
            let x = i as f64 / 32.0;
            let lhs = f_t.eval(x) + f_s.eval(x) - base.eval(x);
            prop_assert!((lhs - f_sum.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_states_match_fresh_extension(
        map in small_map_strategy(),
        tau in roof_strategy(),
        x in 0.0f64..1.0,
    ) {
        // The depth-4 stream agrees with manually re-extended states.
        let branches = enumerate_branches(&map, &tau, x, 4).unwrap();
        for b in branches.iter().step_by(5) {
            let mut state = captivity_core::BranchState::root(x);
            for &sym in b.word.symbols() {
                state = captivity_core::branch_enum::extend(&state, sym as usize, &map, &tau).unwrap();
            }
            prop_assert!((state.point - b.point).abs() < 1e-12);
            prop_assert!((state.derivative - b.derivative).abs() / b.derivative < 1e-12);
            prop_assert!((state.slope - b.slope).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_stay_between_one_and_branch_total(
        map in small_map_strategy(),
        tau in roof_strategy(),
        x in 0.0f64..1.0,
        n in 1usize..6,
    ) {
        let r = tau.sup_deriv() + 0.5;
        let at = captivity_core::captivity::ncal_at(&map, &tau, r, n, x).unwrap();
        let total = (map.degree() as u64).pow(n as u32);
        prop_assert!(at.count >= 1 && at.count <= total);
        prop_assert_eq!(at.witness_words.len() as u64, at.count);
    }

    #[test]
    fn cone_intervals_nest_under_extension(
        map in small_map_strategy(),
        tau in roof_strategy(),
        x in 0.0f64..1.0,
    ) {
        // Extending a branch refines its cone interval (cone invariance).
        let r = tau.sup_deriv() + 1.0;
        let (lambda, _) = map.expansion_bounds();
        let theta_r = tau.theta(lambda, r).unwrap().1;
        let parents = enumerate_branches(&map, &tau, x, 3).unwrap();
        let children = enumerate_branches(&map, &tau, x, 4).unwrap();
        let ell = map.degree();
        for (pi, parent) in parents.iter().enumerate() {
            let p_iv = cone_interval(parent, theta_r);
            for ci in 0..ell {
                let child = &children[pi * ell + ci];
                let c_iv = cone_interval(child, theta_r);
                prop_assert!(c_iv.lo() >= p_iv.lo() - 1e-10);
                prop_assert!(c_iv.hi() <= p_iv.hi() + 1e-10);
            }
        }
    }
}
