use latlab_core::counter::{brute_force_count, count_lattice_points_with, CountOptions, ExactMembership};
use latlab_core::poisson::{spline, Mollifier};
use latlab_core::{count_lattice_points, DomainSpec, RawSpec, Scale};
use proptest::prelude::*;

/// Random valid specs with d in 2..=4, ω in {2,4,6,8} and m in 1..=3.
fn specs() -> impl Strategy<Value = DomainSpec> {
    prop::collection::vec((prop::collection::vec(1u32..=4, 1..=2), 1u32..=3), 1..=3)
        .prop_filter("d between 2 and 4", |blocks| {
            let d: usize = blocks.iter().map(|(b, _)| b.len()).sum();
            (2..=4).contains(&d)
        })
        .prop_map(|blocks| {
            let omegas: Vec<Vec<u32>> = blocks.iter().map(|(b, _)| b.iter().map(|w| 2 * w).collect()).collect();
            let refs: Vec<&[u32]> = omegas.iter().map(|b| b.as_slice()).collect();
            let ms: Vec<u32> = blocks.iter().map(|(_, m)| *m).collect();
            DomainSpec::from_raw(&RawSpec::new(&refs, &ms)).expect("generated spec is valid")
        })
}

fn scales() -> impl Strategy<Value = Scale> {
    (1u64..=40, 1u64..=8).prop_map(|(n, d)| Scale::new(n, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn membership_is_sign_symmetric(spec in specs(), t in scales(), k in prop::collection::vec(-6i64..=6, 4), flips in prop::collection::vec(any::<bool>(), 4)) {
        let d = spec.d();
        let m = ExactMembership::new(&spec, t);
        let flipped: Vec<i64> = k[..d].iter().zip(&flips).map(|(v, f)| if *f { -v } else { *v }).collect();
        prop_assert_eq!(m.contains(&k[..d]), m.contains(&flipped));
    }

    #[test]
    fn gauge_grows_along_rays(spec in specs(), x in prop::collection::vec(-1.0f64..1.0, 4), s in 0.0f64..1.0) {
        let d = spec.d();
        let x = &x[..d];
        let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
        prop_assert!(spec.gauge(&scaled) <= spec.gauge(x) + 1e-15);
    }

    #[test]
    fn count_is_monotone_in_scale(spec in specs(), a in scales(), b in scales()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(count_lattice_points(&spec, lo) <= count_lattice_points(&spec, hi));
    }

    #[test]
    fn folded_and_unfolded_counts_agree(spec in specs(), t in scales()) {
        let folded = count_lattice_points_with(&spec, t, CountOptions { fold_signs: true });
        let full = count_lattice_points_with(&spec, t, CountOptions { fold_signs: false });
        prop_assert_eq!(folded, full);
    }

    #[test]
    fn count_matches_rational_oracle(spec in specs(), n in 1u64..=24, den in 1u64..=4) {
        // small scales keep the exact-arithmetic oracle cheap
        let t = Scale::new(n, den).unwrap();
        prop_assume!(t.to_f64() <= 6.0);
        prop_assert_eq!(count_lattice_points(&spec, t), brute_force_count(&spec, t).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences(spec in specs(), x in prop::collection::vec(-0.9f64..0.9, 4)) {
        let d = spec.d();
        let x = &x[..d];
        let g = spec.grad_f(x);
        let h = 1e-6;
        for l in 0..d {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[l] += h;
            m[l] -= h;
            let fd = (spec.eval_f(&p) - spec.eval_f(&m)) / (2.0 * h);
            prop_assert!((fd - g[l]).abs() <= 1e-6 * (1.0 + g[l].abs()), "l={} fd={} grad={}", l, fd, g[l]);
        }
    }

    #[test]
    fn mollifier_is_nonnegative_with_unit_transform_at_zero(spec in specs(), x in prop::collection::vec(-1.0f64..1.0, 4)) {
        let rho = Mollifier::for_domain(&spec, 8).unwrap();
        prop_assert!(rho.density(&x[..spec.d()]) >= 0.0);
        prop_assert_eq!(rho.transform(&vec![0.0; spec.d()]), 1.0);
        prop_assert!(spline(8, x[0] * 5.0) >= 0.0);
    }
}
