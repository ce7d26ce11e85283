//! The acceptance criteria as runnable checks.
//!
//! `Suite::Full` runs all eleven at their stated sizes and tolerances.
//! `Suite::Quick` runs the deterministic ones (exact identities and
//! quadrature/LP oracles) and skips the Monte Carlo ones and the rate bands.

use std::fmt;
use std::time::Instant;

use crate::bl_metric::{dbl_projected, project, reference_lp, two_point_closed_form, two_point_demo, GridSpec, MeasureRep, Space};
use crate::diffusion::{Side, SignedReal};
use crate::discrete_scheme::{evolve_scheme, feynman_kac_odd, parity_split_lattice, LatticeFn};
use crate::error::Result;
use crate::experiments::{moment_condition_check, rate_experiment, ExperimentConfig};
use crate::lattice_walk::{exact_marginal, lump, lump_distribution, reflected_marginal, Beta, SlowBondParams};
use crate::lt_analytics::{hitting_time_dp, hitting_time_pmf, local_time_scaling_ks, localtime_moment_suite, takacs_tail, visit_tail_brute_force, DiscreteWalkSpec};
use crate::semigroups::{bl_suite, default_probes, lipschitz_bound_check, reflected_semigroup, robin_pde_solve, snob_semigroup_mc, snob_semigroup_quad};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quick" => Ok(Suite::Quick),
            "full" => Ok(Suite::Full),
            _ => Err(format!("unknown suite `{s}`, expected quick or full")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub seconds: f64,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "{tag} {:>2} {} ({:.1} s): {}", self.id, self.name, self.seconds, self.detail)
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock budget in seconds.
    pub budget: f64,
    pub quick: bool,
    run: fn() -> Result<(bool, String)>,
}

pub const SEED: u64 = 20_240_601;

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "lumping", budget: 10.0, quick: true, run: lumping },
        Criterion { id: 2, name: "two-point d_BL", budget: 30.0, quick: true, run: two_point },
        Criterion { id: 3, name: "kappa=0 collapse", budget: 30.0, quick: true, run: kappa_zero },
        Criterion { id: 4, name: "quadrature vs construction", budget: 300.0, quick: false, run: quad_vs_mc },
        Criterion { id: 5, name: "Robin PDE", budget: 120.0, quick: true, run: robin_pde },
        Criterion { id: 6, name: "Feynman-Kac", budget: 120.0, quick: false, run: feynman_kac },
        Criterion { id: 7, name: "rate bands", budget: 1200.0, quick: false, run: rate_bands },
        Criterion { id: 8, name: "discrete identities", budget: 60.0, quick: true, run: discrete_identities },
        Criterion { id: 9, name: "local-time suite", budget: 600.0, quick: false, run: local_times },
        Criterion { id: 10, name: "Lipschitz bound", budget: 120.0, quick: true, run: lipschitz },
        Criterion { id: 11, name: "moment condition", budget: 120.0, quick: true, run: moments },
    ]
}

impl Criterion {
    pub fn run(&self, suite: Suite) -> Outcome {
        if suite == Suite::Quick && !self.quick {
            return Outcome {
                id: self.id,
                name: self.name,
                status: Status::Skipped,
                seconds: 0.0,
                detail: "full suite only".into(),
            };
        }
        let clock = Instant::now();
        let res = (self.run)();
        let seconds = clock.elapsed().as_secs_f64();
        let (ok, mut detail) = match res {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = seconds < self.budget;
        if !in_time {
            detail.push_str(&format!("; over the {} s budget", self.budget));
        }
        Outcome {
            id: self.id,
            name: self.name,
            status: if ok && in_time { Status::Pass } else { Status::Fail },
            seconds,
            detail,
        }
    }
}

/// Run every criterion in order, handing each outcome to `report` as soon as
/// it is known.
pub fn run_suite(suite: Suite, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    criteria()
        .iter()
        .map(|c| {
            let o = c.run(suite);
            report(&o);
            o
        })
        .collect()
}

fn lumping() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (alpha, beta) in [(1.0, 0.0), (1.0, 1.0), (5.0, 2.0), (0.0, 1.0)] {
        let p = SlowBondParams::new(alpha, Beta::Finite(beta), 8)?;
        for start in [-1, 0] {
            let lumped = lump_distribution(&exact_marginal(&p, start, 64.0, 1e-12)?);
            let refl = reflected_marginal(8, lump(start), 64.0, 1e-12)?;
            let lo = lumped.sites().chain(refl.sites()).map(|s| s.0).min().unwrap_or(0);
            let hi = lumped.sites().chain(refl.sites()).map(|s| s.0).max().unwrap_or(0);
            for x in lo..=hi {
                worst = worst.max((lumped.prob(x) - refl.prob(x)).abs());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max site gap {worst:.2e} (tol 1e-8)")))
}

fn two_point() -> Result<(bool, String)> {
    let mut closed_gap = 0.0f64;
    let mut lp_gap = 0.0f64;
    for d in [0.1, 1.0, 10.0] {
        closed_gap = closed_gap.max((two_point_demo(d, 1e-3)? - two_point_closed_form(d)).abs());
        let (a, b) = (0f64.min(d), 0f64.max(d));
        let h = (b - a + 2.0) / 100.0;
        let grid = GridSpec::uniform(Space::Real, &[(a - 1.0, b + 1.0)], h, &[vec![0.0, d]])?;
        let mu = project(&MeasureRep::dirac(SignedReal::from_real(0.0)), &grid)?;
        let nu = project(&MeasureRep::dirac(SignedReal::from_real(d)), &grid)?;
        lp_gap = lp_gap.max((dbl_projected(&mu, &nu, &grid).value - reference_lp(&mu, &nu, &grid)?).abs());
    }
    Ok((
        closed_gap <= 1e-4 && lp_gap <= 1e-9,
        format!("closed-form gap {closed_gap:.2e} (tol 1e-4), LP gap {lp_gap:.2e} (tol 1e-9)"),
    ))
}

fn kappa_zero() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for nf in bl_suite() {
        for u in [0.5, 1.0] {
            for t in [0.5, 1.0] {
                let u = SignedReal::plus(u);
                let gap = snob_semigroup_quad(nf.f.as_ref(), u, t, 0.0)? - reflected_semigroup(nf.f.as_ref(), u, t)?;
                worst = worst.max(gap.abs());
            }
        }
    }
    Ok((worst <= 1e-6, format!("max gap {worst:.2e} (tol 1e-6)")))
}

fn quad_vs_mc() -> Result<(bool, String)> {
    let u = SignedReal::plus(0.5);
    let mut ok = true;
    let mut worst = 0.0f64;
    for (k, nf) in bl_suite().iter().enumerate() {
        let q = snob_semigroup_quad(nf.f.as_ref(), u, 1.0, 2.0)?;
        let mc = snob_semigroup_mc(nf.f.as_ref(), u, 1.0, 2.0, 100_000, SEED + k as u64)?;
        ok &= mc.agrees(q, 3.0, 0.0);
        worst = worst.max((mc.mean - q).abs() / mc.stderr);
    }
    Ok((ok, format!("max |mc - quad| / stderr = {worst:.2} (tol 3)")))
}

fn robin_pde() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    // nodes up to this magnitude; farther out both sit at the far values
    let reach = 6.0;
    for nf in bl_suite() {
        let f = nf.f.as_ref();
        let sol = robin_pde_solve(f, 1.0, 2.0, 1e-2, None)?;
        for side in [Side::Plus, Side::Minus] {
            let vals = sol.side(side);
            let last = ((reach / sol.dx).round() as usize).min(vals.len() - 1);
            for (j, v) in vals.iter().enumerate().take(last + 1) {
                let x = SignedReal { side, magnitude: j as f64 * sol.dx };
                worst = worst.max((v - snob_semigroup_quad(f, x, 1.0, 2.0)?).abs());
            }
        }
    }
    Ok((worst <= 1e-3, format!("sup gap {worst:.2e} over |u| <= 6 (tol 1e-3)")))
}

fn feynman_kac() -> Result<(bool, String)> {
    let n = 16;
    let p = SlowBondParams::new(1.0, Beta::Finite(1.0), n)?;
    let suite = bl_suite();
    let f = LatticeFn::from_test_fn(suite[0].f.as_ref(), n, -8 * n as i64, 8 * n as i64)?;
    let (_, f_odd) = parity_split_lattice(&f);
    let (_, evolved_odd) = parity_split_lattice(&evolve_scheme(&f, &p, 0.5)?);
    let probes = [0, 4, 8, 16];
    let est = feynman_kac_odd(&f_odd, &p, 0.5, &probes, 100_000, SEED)?;
    let mut ok = true;
    let mut worst = 0.0f64;
    for (e, &x) in est.iter().zip(&probes) {
        let v = evolved_odd.value(x);
        ok &= e.agrees(v, 3.0, 0.0);
        worst = worst.max((e.mean - v).abs() / e.stderr);
    }
    Ok((ok, format!("max |fk - scheme| / stderr = {worst:.2} (tol 3)")))
}

fn rate_bands() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (beta, lo, hi) in [(0.5, -1.05, -0.35), (1.0, -0.75, -0.30), (4.0, -1.40, -0.70)] {
        let cfg = ExperimentConfig {
            u: 0.5,
            t: 1.0,
            alpha: 1.0,
            beta: Beta::Finite(beta),
            n_list: vec![16, 32, 64, 128, 256],
            ..Default::default()
        };
        let tab = rate_experiment(&cfg)?;
        let band = tab.slope_in(lo, hi);
        let bound = tab.one_sided_bound_holds();
        ok &= band && bound;
        parts.push(format!(
            "beta={beta}: slope {:.3} {} [{lo}, {hi}], bound {}",
            tab.slope,
            if band { "in" } else { "NOT in" },
            if bound { "ok" } else { "violated" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn discrete_identities() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for steps in 1..=14u32 {
        for a in 0..=steps as i64 {
            for k in 1..=steps + 2 {
                let exact = takacs_tail(steps, a, k)?;
                let brute = visit_tail_brute_force(DiscreteWalkSpec { steps, start: 0 }, a, k)?;
                worst = worst.max((exact - brute).abs());
            }
        }
    }
    let takacs = worst;
    worst = 0.0;
    for start in 1..=5 {
        for ell in 1..=21 {
            worst = worst.max((hitting_time_pmf(start, ell)? - hitting_time_dp(start, ell)?).abs());
        }
    }
    Ok((
        takacs <= 1e-12 && worst <= 1e-12,
        format!("takacs gap {takacs:.2e}, hitting-time gap {worst:.2e} (tol 1e-12)"),
    ))
}

fn local_times() -> Result<(bool, String)> {
    let tab = localtime_moment_suite(&[8, 16, 32, 64], 1.0, 100_000, SEED)?;
    let ks = local_time_scaling_ks(0.2, 1.0, 9.0, 200, 100_000, SEED)?;
    let bounded = tab.all_bounded();
    let unbounded: Vec<&str> = tab.bounded.iter().filter(|b| !b.1).map(|b| b.0.as_str()).collect();
    Ok((
        bounded && ks.p_value > 0.01,
        format!(
            "max/min <= 2 for all statistics: {}{}; scaling KS p = {:.3} (need > 0.01)",
            if bounded { "yes" } else { "no" },
            if unbounded.is_empty() { String::new() } else { format!(" (fails: {})", unbounded.join(", ")) },
            ks.p_value
        ),
    ))
}

fn lipschitz() -> Result<(bool, String)> {
    let mut ok = true;
    let mut margin = f64::INFINITY;
    for nf in bl_suite().iter().take(3) {
        for kappa in [0.0, 2.0] {
            let c = lipschitz_bound_check(nf.f.as_ref(), 1.0, kappa, &default_probes(), 1e-3)?;
            ok &= c.passed;
            margin = margin.min(c.bound - c.estimate);
        }
    }
    Ok((ok, format!("smallest bound - derivative = {margin:.3} (need >= -1e-3)")))
}

fn moments() -> Result<(bool, String)> {
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let free = moment_condition_check(
        &ExperimentConfig { beta: Beta::Finite(0.0), n_list: vec![8, 16, 32], ..Default::default() },
        &times,
    )?;
    let slow = moment_condition_check(
        &ExperimentConfig { beta: Beta::Finite(1.0), n_list: vec![8, 16, 32], ..Default::default() },
        &times,
    )?;
    let defect = free.max_free_defect();
    let cs: Vec<String> = slow.constants.iter().map(|(n, c)| format!("{n}:{c:.4}")).collect();
    Ok((
        defect <= 1e-8 && slow.stable(),
        format!("free defect {defect:.2e} (tol 1e-8); C by n {} spread {:.3} (tol 2)", cs.join(" "), slow.spread()),
    ))
}
