use proptest::prelude::*;

use slowbond::bl_metric::{dbl, GridSpec, MeasureRep, Space};
use slowbond::diffusion::{sample_snob, SignedReal, SnobConstruction};
use slowbond::discrete_scheme::{evolve_scheme, parity_split_lattice, LatticeFn};
use slowbond::lattice_walk::{exact_marginal, jump_rate, lump, lump_distribution, reflected_marginal, Beta, SlowBondParams};
use slowbond::lt_analytics::{hitting_time_pmf, takacs_tail};
use slowbond::semigroups::{
    bl_suite, bm_semigroup, reflected_semigroup, snob_semigroup_quad, RealFn,
};
use slowbond::special::bessel_i_scaled;

fn beta() -> impl Strategy<Value = Beta> {
    prop_oneof![
        (0.0f64..3.0).prop_map(Beta::Finite),
        Just(Beta::Finite(1.0)),
        Just(Beta::Infinite),
    ]
}

fn params() -> impl Strategy<Value = SlowBondParams> {
    (0.0f64..5.0, beta(), 2u32..12).prop_map(|(a, b, n)| SlowBondParams::new(a, b, n).unwrap())
}

fn signed() -> impl Strategy<Value = SignedReal> {
    (any::<bool>(), 0.0f64..3.0).prop_map(|(p, m)| if p { SignedReal::plus(m) } else { SignedReal::minus(m) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rates_are_symmetric(p in params(), x in -20i64..20) {
        prop_assert_eq!(jump_rate(&p, x, x + 1), jump_rate(&p, x + 1, x));
    }

    #[test]
    fn lumped_law_is_reflected_law(p in params(), start in -6i64..6, time in 0.0f64..40.0) {
        let lumped = lump_distribution(&exact_marginal(&p, start, time, 1e-12).unwrap());
        let refl = reflected_marginal(p.n, lump(start), time, 1e-12).unwrap();
        for x in 0..60 {
            prop_assert!((lumped.prob(x) - refl.prob(x)).abs() < 1e-9, "site {}", x);
        }
    }

    #[test]
    fn law_is_symmetric_about_minus_half(p in params(), start in -6i64..6, time in 0.0f64..40.0) {
        let a = exact_marginal(&p, start, time, 1e-12).unwrap();
        let b = exact_marginal(&p, -1 - start, time, 1e-12).unwrap();
        for (y, q) in a.sites() {
            prop_assert!((q - b.prob(-1 - y)).abs() < 1e-12);
        }
    }

    #[test]
    fn tails_are_sub_gaussian(p in params(), start in -10i64..10, time in 16.0f64..400.0) {
        let d = exact_marginal(&p, start, time, 1e-12).unwrap();
        prop_assert!(d.mass_outside(start, 6.0 * time.sqrt()) < 1e-6);
    }

    #[test]
    fn kappa_zero_never_changes_side(u in signed(), t in 0.05f64..2.0, seed in any::<u64>(), coin in any::<bool>()) {
        let c = if coin { SnobConstruction::Coin2k } else { SnobConstruction::SwitchK };
        let y = sample_snob(u, t, t / 7.0, 0.0, seed, c).unwrap();
        prop_assert_eq!(y.side, u.side);
    }

    #[test]
    fn takacs_tail_is_monotone(steps in 1u32..200, a in 0i64..30, k in 1u32..40) {
        let v = takacs_tail(steps, a, k).unwrap();
        prop_assert!(takacs_tail(steps, a, k + 1).unwrap() <= v + 1e-15);
        prop_assert!(takacs_tail(steps, a + 1, k).unwrap() <= v + 1e-15);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn hitting_cdf_grows_to_at_most_one(start in 1i64..12, horizon in 1u32..200) {
        let mut cdf = 0.0;
        for ell in 1..=horizon {
            let p = hitting_time_pmf(start, ell).unwrap();
            prop_assert!(p >= 0.0);
            cdf += p;
        }
        prop_assert!(cdf <= 1.0 + 1e-12);
    }

    #[test]
    fn walk_kernel_is_even(x in 0i64..200, t in 0.0f64..500.0) {
        prop_assert_eq!(bessel_i_scaled(x, t).unwrap(), bessel_i_scaled(-x, t).unwrap());
    }

    #[test]
    fn scheme_is_linear_and_contracting(
        p in params(),
        values in prop::collection::vec(-1.0f64..1.0, 1..30),
        lo in -20i64..5,
        t in 0.0f64..1.0,
    ) {
        let (l, r) = (values[0], *values.last().unwrap());
        let f = LatticeFn::new(p.n, lo, values, l, r).unwrap();
        let (even, odd) = parity_split_lattice(&f);
        let whole = evolve_scheme(&f, &p, t).unwrap();
        let e = evolve_scheme(&even, &p, t).unwrap();
        let o = evolve_scheme(&odd, &p, t).unwrap();
        for x in whole.lo..=whole.hi() {
            prop_assert!((whole.value(x) - e.value(x) - o.value(x)).abs() < 1e-10);
        }
        prop_assert!(whole.sup() <= f.sup() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semigroups_contract_and_conserve(u in signed(), t in 0.1f64..3.0, k in 0usize..5, kappa in 0.0f64..6.0) {
        let suite = bl_suite();
        let f = suite[k].f.as_ref();
        let sup = f.sup_norm().unwrap();
        for v in [
            bm_semigroup(f, u.to_real(), t).unwrap(),
            reflected_semigroup(f, u, t).unwrap(),
            snob_semigroup_quad(f, u, t, kappa).unwrap(),
        ] {
            prop_assert!(v.abs() <= sup + 1e-8);
        }
        let one = RealFn::new(|_: f64| 1.0);
        prop_assert!((bm_semigroup(&one, u.to_real(), t).unwrap() - 1.0).abs() < 1e-8);
        prop_assert!((reflected_semigroup(&one, u, t).unwrap() - 1.0).abs() < 1e-8);
        prop_assert!((snob_semigroup_quad(&one, u, t, kappa).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn even_functions_see_brownian_motion(u in -3.0f64..3.0, t in 0.1f64..3.0, c in 0.0f64..2.0, kappa in 0.0f64..6.0) {
        let f = RealFn::new(move |x: f64| (-(x.abs() - c).powi(2)).exp()).with_sup(1.0);
        let snob = snob_semigroup_quad(&f, SignedReal::from_real(u), t, kappa).unwrap();
        prop_assert!((snob - bm_semigroup(&f, u, t).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn semigroup_property(u in 0.0f64..2.0, t in 0.1f64..1.0, s in 0.1f64..1.0) {
        let f = RealFn::new(|x: f64| (-(x - 0.5) * (x - 0.5)).exp()).with_flat_beyond(10.0);
        let inner = RealFn::new(|x: f64| bm_semigroup(&f, x, s).unwrap());
        let lhs = bm_semigroup(&f, u, t + s).unwrap();
        prop_assert!((lhs - bm_semigroup(&inner, u, t).unwrap()).abs() < 1e-6);
        let inner_r = RealFn::new(|x: f64| reflected_semigroup(&f, SignedReal::from_real(x), s).unwrap());
        let lhs_r = reflected_semigroup(&f, SignedReal::plus(u), t + s).unwrap();
        prop_assert!((lhs_r - reflected_semigroup(&inner_r, SignedReal::plus(u), t).unwrap()).abs() < 1e-6);
    }
}

/// Nodes `k / 10` (coarse) or `k / 20` (fine) on `[-2, 2]`, per component.
fn nested_grid(space: Space, fine: bool) -> GridSpec {
    let d = if fine { 20 } else { 10 };
    let side: Vec<f64> = (0..=2 * d).map(|k| k as f64 / d as f64).collect();
    match space {
        Space::Real => GridSpec::new(space, vec![(-2 * d..=2 * d).map(|k| k as f64 / d as f64).collect()]).unwrap(),
        Space::G => GridSpec::new(space, vec![side.clone(), side]).unwrap(),
    }
}

fn atoms_on_coarse(space: Space) -> impl Strategy<Value = MeasureRep> {
    prop::collection::vec((-20i32..=20, 1u32..10), 1..6).prop_map(move |pts| {
        let total: u32 = pts.iter().map(|p| p.1).sum();
        MeasureRep::Atoms(
            pts.into_iter()
                .map(|(k, w)| {
                    let x = k as f64 / 10.0;
                    let at = match space {
                        Space::Real => SignedReal::from_real(x),
                        Space::G if k < 0 || (k == 0 && w % 2 == 0) => SignedReal::minus(x.abs()),
                        Space::G => SignedReal::plus(x),
                    };
                    slowbond::bl_metric::Atom { at, weight: w as f64 / total as f64 }
                })
                .collect(),
        )
    })
}

fn space() -> impl Strategy<Value = Space> {
    prop_oneof![Just(Space::Real), Just(Space::G)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbl_is_a_bounded_symmetric_metric(
        (sp, mu, nu, rho) in space().prop_flat_map(|s| (Just(s), atoms_on_coarse(s), atoms_on_coarse(s), atoms_on_coarse(s)))
    ) {
        let grid = nested_grid(sp, false);
        let mn = dbl(&mu, &nu, &grid).unwrap();
        prop_assert!((mn - dbl(&nu, &mu, &grid).unwrap()).abs() < 1e-9);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&mn));
        let mr = dbl(&mu, &rho, &grid).unwrap();
        let rn = dbl(&rho, &nu, &grid).unwrap();
        prop_assert!(mn <= mr + rn + 1e-9);
    }

    #[test]
    fn refining_the_grid_never_lowers_dbl(
        (sp, mu, nu) in space().prop_flat_map(|s| (Just(s), atoms_on_coarse(s), atoms_on_coarse(s)))
    ) {
        let coarse = dbl(&mu, &nu, &nested_grid(sp, false)).unwrap();
        let fine = dbl(&mu, &nu, &nested_grid(sp, true)).unwrap();
        prop_assert!(fine >= coarse - 1e-9);
    }
}
