use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slowbond::diffusion::SignedReal;
use slowbond::discrete_scheme::{feynman_kac_odd, parity_split_lattice, LatticeFn};
use slowbond::exec::{set_mode, Mode};
use slowbond::experiments::{rate_experiment, ExperimentConfig};
use slowbond::lattice_walk::{Beta, SlowBondParams};
use slowbond::lt_analytics::localtime_moment_suite;
use slowbond::semigroups::{bl_suite, snob_semigroup_mc};

const MODES: [(Mode, &str); 2] = [(Mode::Sequential, "sequential"), (Mode::Parallel, "parallel")];

fn snob_mc(c: &mut Criterion) {
    let suite = bl_suite();
    let mut g = c.benchmark_group("snob_mc_20k");
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| snob_semigroup_mc(suite[0].f.as_ref(), SignedReal::plus(0.5), 1.0, 2.0, 20_000, 1).unwrap())
        });
    }
    g.finish();
}

fn feynman_kac(c: &mut Criterion) {
    let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 16).unwrap();
    let suite = bl_suite();
    let f = LatticeFn::from_test_fn(suite[0].f.as_ref(), 16, -128, 128).unwrap();
    let (_, odd) = parity_split_lattice(&f);
    let mut g = c.benchmark_group("feynman_kac_10k");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| feynman_kac_odd(&odd, &p, 0.5, &[0, 4, 8, 16], 10_000, 1).unwrap())
        });
    }
    g.finish();
}

fn local_times(c: &mut Criterion) {
    let mut g = c.benchmark_group("local_time_suite_5k");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| localtime_moment_suite(&[8, 16], 1.0, 5_000, 1).unwrap())
        });
    }
    g.finish();
}

fn rates(c: &mut Criterion) {
    let cfg = ExperimentConfig { n_list: vec![16, 32, 64], ..Default::default() };
    let mut g = c.benchmark_group("rate_rows");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| rate_experiment(&cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, snob_mc, feynman_kac, local_times, rates);
criterion_main!(benches);
