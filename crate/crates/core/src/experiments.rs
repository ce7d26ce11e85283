//! Reproduction harness: convergence rates in d_BL, the two-time check and
//! the increment moment bound.

use std::io::Write;
use std::time::Instant;

use crate::bl_metric::{dbl_projected, limit_expectations, project, GridSpec, MeasureRep, Space};
use crate::diffusion::SignedReal;
use crate::error::{Error, Result};
use crate::diffusion::{snob_endpoint, SnobConstruction};
use crate::exec::{map_items, map_replicas, replica_rng};
use crate::lattice_walk::{exact_marginal, sample_positions, Beta, SlowBondParams, Walk};
use crate::quad::integrate;
use crate::semigroups::{Limit, RealFn, TestFn, WINDOW_SD};
use crate::stats::Estimate;

/// Parameters shared by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub u: f64,
    pub t: f64,
    pub alpha: f64,
    pub beta: Beta,
    pub n_list: Vec<u32>,
    pub seed: u64,
    /// Monte Carlo sample size.
    pub replicas: usize,
    /// Truncation tolerance of the lattice laws.
    pub tail_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            u: 0.5,
            t: 1.0,
            alpha: 1.0,
            beta: Beta::Finite(1.0),
            n_list: vec![16, 32, 64, 128, 256],
            seed: 1,
            replicas: 100_000,
            tail_tol: 1e-12,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.u == 0.0 || !self.u.is_finite() {
            return Err(Error::param("u", format!("must be finite and nonzero, got {}", self.u)));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::param("t", format!("must be finite and > 0, got {}", self.t)));
        }
        SlowBondParams::new(self.alpha, self.beta, 1)?;
        if self.n_list.is_empty() {
            return Err(Error::param("n_list", "is empty"));
        }
        if self.n_list[0] == 0 {
            return Err(Error::param("n_list", "entries must be >= 1"));
        }
        if let Some(w) = self.n_list.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::param("n_list", format!("must be strictly increasing, got {} then {}", w[0], w[1])));
        }
        if self.replicas == 0 {
            return Err(Error::param("replicas", "must be >= 1"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::param("tail_tol", format!("must lie in (0, 1), got {}", self.tail_tol)));
        }
        Ok(())
    }

    pub fn params(&self, n: u32) -> Result<SlowBondParams> {
        SlowBondParams::new(self.alpha, self.beta, n)
    }

    pub fn limit(&self) -> Limit {
        Limit::for_walk(self.alpha, self.beta)
    }
}

/// Exponent of the proven bound: `beta - 1` below 1, `-1/2` at 1,
/// `max(-1, 1 - beta)` above.
pub fn predicted_rate(beta: Beta) -> f64 {
    match beta {
        Beta::Finite(b) if b < 1.0 => b - 1.0,
        Beta::Finite(b) if b == 1.0 => -0.5,
        Beta::Finite(b) => (1.0 - b).max(-1.0),
        Beta::Infinite => -1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: u32,
    pub dbl: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub slope: f64,
    pub intercept: f64,
    pub predicted: f64,
    pub limit: Limit,
}

impl RateTable {
    /// CSV rows `n,dbl,seconds`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,dbl,seconds")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:.3}", r.n, r.dbl, r.seconds)?;
        }
        Ok(())
    }

    pub fn slope_in(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }

    /// `d(n) <= C n^{predicted + 0.1}` at every `n`, `C` fixed by the
    /// smallest `n`.
    pub fn one_sided_bound_holds(&self) -> bool {
        let e = self.predicted + 0.1;
        let first = self.rows[0];
        let c = first.dbl / (first.n as f64).powf(e);
        self.rows.iter().all(|r| r.dbl <= c * (r.n as f64).powf(e) * (1.0 + 1e-12))
    }

    /// Nonincreasing in `n`, up to isolated increases of at most 5%.
    pub fn nonincreasing(&self) -> bool {
        let mut previous_up = false;
        for w in self.rows.windows(2) {
            let up = w[1].dbl > w[0].dbl;
            if up && (w[1].dbl > 1.05 * w[0].dbl || previous_up) {
                return false;
            }
            previous_up = up;
        }
        true
    }
}

/// Least-squares fit of `ln y` on `ln x`: `(slope, intercept)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `d_BL` between the law of `X_{t n^2}/n` from `floor(u n)` and the limit law
/// at time `t` from `u`.
pub fn rate_point(cfg: &ExperimentConfig, n: u32) -> Result<RateRow> {
    let clock = Instant::now();
    let params = cfg.params(n)?;
    let start = (cfg.u * n as f64).floor() as i64;
    let nf = n as f64;
    let law = exact_marginal(&params, start, cfg.t * nf * nf, cfg.tail_tol)?;
    let limit = cfg.limit();
    let space = if limit.on_g() { Space::G } else { Space::Real };
    let u = SignedReal::from_real(cfg.u);
    let mu = MeasureRep::from_lattice(&law);
    let grid = GridSpec::policy(space, u, cfg.t, n, mu.atoms())?;
    let a = project(&mu, &grid)?;
    let b = limit_expectations(&limit, u, cfg.t, &grid)?;
    let sol = dbl_projected(&a, &b, &grid);
    Ok(RateRow {
        n,
        dbl: sol.value,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// One row per `n`, rows computed concurrently and reported in `n` order.
pub fn rate_experiment(cfg: &ExperimentConfig) -> Result<RateTable> {
    cfg.validate()?;
    let rows: Vec<RateRow> = map_items(&cfg.n_list, |&n| rate_point(cfg, n))
        .into_iter()
        .collect::<Result<_>>()?;
    if let Some(r) = rows.iter().find(|r| !(r.dbl > 0.0)) {
        return Err(Error::Solver(format!("d_BL = {} at n = {}; cannot fit a log-log slope", r.dbl, r.n)));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.dbl).collect();
    let (slope, intercept) = if rows.len() >= 2 { loglog_fit(&xs, &ys) } else { (f64::NAN, f64::NAN) };
    Ok(RateTable {
        rows,
        slope,
        intercept,
        predicted: predicted_rate(cfg.beta),
        limit: cfg.limit(),
    })
}

/// Outcome of a two-time comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTimeResult {
    pub lattice: Estimate,
    /// Limit value; `stderr` is 0 when it comes from quadrature.
    pub limit: Estimate,
    pub agree: bool,
}

const TWO_TIME_QUAD_TOL: f64 = 1e-8;

/// `E[f(Y_{t1}) g(Y_{t2} - Y_{t1})]` for the limit by nested quadrature.
fn two_time_quadrature(
    limit: &Limit,
    u: SignedReal,
    t1: f64,
    t2: f64,
    f: &dyn TestFn,
    g: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<f64> {
    let lag = t2 - t1;
    let inner = |y: SignedReal| -> Result<f64> {
        let y0 = y.to_real();
        let shifted = RealFn::new(|z: f64| g(z - y0));
        limit.expectation(&shifted, y, lag, 0.1 * TWO_TIME_QUAD_TOL)
    };
    let reach = WINDOW_SD * t1.sqrt();
    let mut failure = None;
    let mut outer = |y: SignedReal| -> f64 {
        let d = limit.density(u, y, t1);
        if d == 0.0 {
            return 0.0;
        }
        match inner(y) {
            Ok(h) => d * f.eval(y) * h,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let value = match limit {
        Limit::Bm => {
            let c = u.to_real();
            integrate(|y| outer(SignedReal::from_real(y)), c - reach, c + reach, &[0.0], TWO_TIME_QUAD_TOL)?.value
        }
        _ => {
            let top = u.magnitude + reach;
            let plus = integrate(|m| outer(SignedReal::plus(m)), 0.0, top, &[u.magnitude], TWO_TIME_QUAD_TOL)?.value;
            let minus = integrate(|m| outer(SignedReal::minus(m)), 0.0, top, &[u.magnitude], TWO_TIME_QUAD_TOL)?.value;
            plus + minus
        }
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Same quantity by sampling the SNOB at `t1` and restarting it for the lag.
fn two_time_snob_mc(
    kappa: f64,
    u: SignedReal,
    t1: f64,
    t2: f64,
    f: &dyn TestFn,
    g: &(dyn Fn(f64) -> f64 + Sync),
    replicas: usize,
    seed: u64,
) -> Estimate {
    // the magnitude is sampled exactly per step, so one step per leg suffices
    let seed = seed ^ 0x5EED_0F_11_A1;
    let xs = map_replicas(replicas, |i| {
        let mut path = replica_rng(seed, 2 * i as u64);
        let mut kill = replica_rng(seed, 2 * i as u64 + 1);
        let y1 = snob_endpoint(u, t1, t1, kappa, SnobConstruction::SwitchK, &mut path, &mut kill);
        let y2 = snob_endpoint(y1, t2 - t1, t2 - t1, kappa, SnobConstruction::SwitchK, &mut path, &mut kill);
        f.eval(y1) * g(y2.to_real() - y1.to_real())
    });
    Estimate::from_samples(&xs)
}

/// Monte Carlo `E[f(X_{t1 n^2}/n) g((X_{t2 n^2} - X_{t1 n^2})/n)]` for the walk
/// from `floor(u n)` against the same functional of the limit. Agreement means
/// within 3 combined standard errors.
#[allow(clippy::too_many_arguments)]
pub fn two_time_check(
    cfg: &ExperimentConfig,
    n: u32,
    t1: f64,
    t2: f64,
    f: &dyn TestFn,
    g: &(dyn Fn(f64) -> f64 + Sync),
    replicas: usize,
    seed: u64,
) -> Result<TwoTimeResult> {
    if !(t1 > 0.0 && t2 > t1 && t2.is_finite()) {
        return Err(Error::param("t1, t2", format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}")));
    }
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least 2"));
    }
    let params = cfg.params(n)?;
    let walk = Walk::SlowBond(params);
    let start = (cfg.u * n as f64).floor() as i64;
    let nf = n as f64;
    let times = [t1 * nf * nf, t2 * nf * nf];
    let xs = map_replicas(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        let x = sample_positions(&walk, start, &times, &mut rng);
        f.eval(SignedReal::from_real(x[0] as f64 / nf)) * g((x[1] - x[0]) as f64 / nf)
    });
    let lattice = Estimate::from_samples(&xs);
    let u = SignedReal::from_real(cfg.u);
    let limit = match cfg.limit() {
        Limit::Snob { kappa } => two_time_snob_mc(kappa, u, t1, t2, f, g, replicas, seed),
        lim => Estimate {
            mean: two_time_quadrature(&lim, u, t1, t2, f, g)?,
            stderr: 0.0,
            samples: 0,
        },
    };
    let spread = lattice.stderr.hypot(limit.stderr);
    let agree = (lattice.mean - limit.mean).abs() <= 3.0 * spread + TWO_TIME_QUAD_TOL;
    Ok(TwoTimeResult { lattice, limit, agree })
}

/// `E[((X_{t n^2} - X_{s n^2}) / n)^2]` for one `(s, t)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub n: u32,
    pub s: f64,
    pub t: f64,
    pub moment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    /// `(n, max over pairs of moment / |t - s|)`.
    pub constants: Vec<(u32, f64)>,
}

impl MomentTable {
    /// Largest fitted constant over the smallest.
    pub fn spread(&self) -> f64 {
        let cs = self.constants.iter().map(|c| c.1);
        let hi = cs.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = cs.fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn stable(&self) -> bool {
        self.spread() <= 2.0
    }

    /// Largest `|moment - |t - s||`, the defect from the free walk.
    pub fn max_free_defect(&self) -> f64 {
        self.rows.iter().map(|r| (r.moment - (r.t - r.s).abs()).abs()).fold(0.0, f64::max)
    }

    /// CSV rows `n,s,t,moment,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,s,t,moment,ratio")?;
        for r in &self.rows {
            let ratio = if r.t > r.s { r.moment / (r.t - r.s) } else { f64::NAN };
            writeln!(w, "{},{},{},{:e},{:e}", r.n, r.s, r.t, r.moment, ratio)?;
        }
        Ok(())
    }
}

// sites this unlikely at time s are dropped from the outer sum
const MOMENT_SITE_FLOOR: f64 = 1e-15;

fn second_moments_from(params: &SlowBondParams, sites: &[i64], lag: f64, tail_tol: f64) -> Result<Vec<f64>> {
    map_items(sites, |&x| {
        let d = exact_marginal(params, x, lag, tail_tol)?;
        Ok(d.sites().map(|(y, p)| ((y - x) as f64).powi(2) * p).sum())
    })
    .into_iter()
    .collect()
}

/// Exact `E[(X_{t n^2} - X_{s n^2})^2] / n^2` from `start`, by the Markov
/// property at machine time `s n^2`.
pub fn increment_second_moment(params: &SlowBondParams, start: i64, s: f64, t: f64, tail_tol: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= s && t.is_finite()) {
        return Err(Error::param("s, t", format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    if t == s {
        return Ok(0.0);
    }
    let nf = params.n as f64;
    let at_s = exact_marginal(params, start, s * nf * nf, tail_tol)?;
    let (sites, probs): (Vec<i64>, Vec<f64>) = at_s.sites().filter(|&(_, p)| p >= MOMENT_SITE_FLOOR).unzip();
    let m2 = second_moments_from(params, &sites, (t - s) * nf * nf, tail_tol)?;
    Ok(probs.iter().zip(&m2).map(|(p, m)| p * m).sum::<f64>() / (nf * nf))
}

/// Increment second moments over all pairs `s < t` of `times` for every `n`
/// in the config, and the constant `max moment / |t - s|` per `n`.
pub fn moment_condition_check(cfg: &ExperimentConfig, times: &[f64]) -> Result<MomentTable> {
    cfg.validate()?;
    if times.len() < 2 {
        return Err(Error::param("times", "need at least two times"));
    }
    if let Some(&bad) = times.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::param("times", format!("must lie in [0, 1], got {bad}")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    let mut rows = Vec::new();
    let mut constants = Vec::new();
    for &n in &cfg.n_list {
        let params = cfg.params(n)?;
        let start = (cfg.u * n as f64).floor() as i64;
        let mut c = 0.0f64;
        for (i, &s) in times.iter().enumerate() {
            for &t in &times[i + 1..] {
                let moment = increment_second_moment(&params, start, s, t, cfg.tail_tol)?;
                c = c.max(moment / (t - s));
                rows.push(MomentRow { n, s, t, moment });
            }
        }
        constants.push((n, c));
    }
    Ok(MomentTable { rows, constants })
}
