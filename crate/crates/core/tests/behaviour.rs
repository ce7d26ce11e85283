use slowbond::diffusion::{snob_endpoint, SignedReal, SnobConstruction};
use slowbond::discrete_scheme::fixed_time_gap;
use slowbond::exec::{map_replicas, replica_rng, set_mode, Mode};
use slowbond::experiments::{rate_experiment, ExperimentConfig};
use slowbond::lattice_walk::{exact_marginal, reflected_marginal, Beta, SlowBondParams};
use slowbond::semigroups::{bl_suite, snob_semigroup_mc};

#[test]
fn side_flips_grow_with_kappa() {
    let u = SignedReal::plus(0.3);
    let n = 20_000;
    let mut prev = (0.0, 0.0);
    for kappa in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let flips = map_replicas(n, |i| {
            // the same uniforms drive the path and the thresholds for every kappa
            let mut path = replica_rng(11, 2 * i as u64);
            let mut kill = replica_rng(11, 2 * i as u64 + 1);
            let y = snob_endpoint(u, 1.0, 0.05, kappa, SnobConstruction::SwitchK, &mut path, &mut kill);
            (y.side != u.side) as u8 as f64
        });
        let p = flips.iter().sum::<f64>() / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(p + 3.0 * se.hypot(prev.1) >= prev.0, "kappa {kappa}: {p} after {}", prev.0);
        prev = (p, se);
    }
    assert!(prev.0 > 0.2);
}

#[test]
fn monte_carlo_is_identical_across_modes() {
    let suite = bl_suite();
    let u = SignedReal::minus(0.4);
    set_mode(Mode::Sequential);
    let a = snob_semigroup_mc(suite[3].f.as_ref(), u, 0.7, 2.0, 3000, 5).unwrap();
    set_mode(Mode::Parallel);
    let b = snob_semigroup_mc(suite[3].f.as_ref(), u, 0.7, 2.0, 3000, 5).unwrap();
    let c = snob_semigroup_mc(suite[3].f.as_ref(), u, 0.7, 2.0, 3000, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(b, c);
}

#[test]
fn exact_laws_repeat_bit_for_bit() {
    let p = SlowBondParams::new(1.5, Beta::Finite(1.0), 12).unwrap();
    assert_eq!(exact_marginal(&p, 3, 50.0, 1e-12).unwrap(), exact_marginal(&p, 3, 50.0, 1e-12).unwrap());
}

#[test]
fn free_walk_rate_is_one_over_n() {
    let cfg = ExperimentConfig { beta: Beta::Finite(0.0), n_list: vec![16, 32, 64], ..Default::default() };
    let tab = rate_experiment(&cfg).unwrap();
    assert!(tab.slope_in(-1.2, -0.8), "{}", tab.slope);
    assert!(tab.nonincreasing());
    assert!(tab.one_sided_bound_holds());
}

#[test]
fn severed_bond_reduces_to_reflection() {
    let p = SlowBondParams::new(1.0, Beta::Infinite, 16).unwrap();
    let a = exact_marginal(&p, 8, 256.0, 1e-12).unwrap();
    let b = reflected_marginal(16, 8, 256.0, 1e-12).unwrap();
    for (x, q) in a.sites() {
        assert!((q - b.prob(x)).abs() < 1e-12);
    }
    let cfg = ExperimentConfig { beta: Beta::Infinite, n_list: vec![16, 32, 64], ..Default::default() };
    let tab = rate_experiment(&cfg).unwrap();
    assert!(tab.slope_in(-1.2, -0.8), "{}", tab.slope);
}

#[test]
fn rate_tables_decrease() {
    for beta in [0.5, 1.0, 4.0] {
        let cfg = ExperimentConfig { beta: Beta::Finite(beta), n_list: vec![16, 32, 64, 128], ..Default::default() };
        let tab = rate_experiment(&cfg).unwrap();
        assert!(tab.nonincreasing(), "beta {beta}: {:?}", tab.rows);
        assert!(tab.rows.iter().all(|r| r.dbl >= 0.0));
    }
}

#[test]
fn fixed_time_gap_shrinks_with_n() {
    let suite = bl_suite();
    for beta in [0.5, 1.0, 2.0] {
        let gaps: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                let p = SlowBondParams::new(1.0, Beta::Finite(beta), n).unwrap();
                fixed_time_gap(suite[0].f.as_ref(), &p, 0.5, 1.0).unwrap()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "beta {beta}: {gaps:?}");
    }
}
