//! Exact identities for simple random walk local times and hitting times,
//! the local CLT comparison, and Monte Carlo checks of the scaling of lattice
//! local times.

use std::io::Write;

use crate::diffusion::{local_time_zero, sample_bm_with, GridPath, LocalTimeMethod};
use crate::error::{Error, Result};
use crate::exec::{map_replicas, replica_rng};
use crate::lattice_walk::{sample_endpoint, Beta, SlowBondParams, Walk};
use crate::special::{bessel_i_scaled, heat_kernel, ln_factorial, FRAC_1_SQRT_2PI};
use crate::stats::{ks_two_sample, Estimate, KsResult};

/// Discrete-time simple random walk `S_0 = start, S_1, ..., S_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscreteWalkSpec {
    pub steps: u32,
    pub start: i64,
}

impl DiscreteWalkSpec {
    pub fn new(steps: u32, start: i64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        Ok(DiscreteWalkSpec { steps, start })
    }
}

// exact u128 arithmetic is safe up to here
const EXACT_MAX: u32 = 120;

/// `P[Bin(m, 1/2) >= j]`.
fn binomial_upper_tail(m: u32, j: i64) -> f64 {
    if j <= 0 {
        return 1.0;
    }
    if j > m as i64 {
        return 0.0;
    }
    let j = j as u32;
    if m <= EXACT_MAX {
        let mut c: u128 = 1;
        let mut count: u128 = 0;
        for i in 0..=m {
            if i >= j {
                count += c;
            }
            c = c * (m - i) as u128 / (i + 1) as u128;
        }
        return count as f64 / 2f64.powi(m as i32);
    }
    // terms relative to the central one, by the ratio recurrence both ways
    let mid = m / 2;
    let mut w = vec![0.0f64; m as usize + 1];
    w[mid as usize] = 1.0;
    for i in mid..m {
        w[i as usize + 1] = w[i as usize] * (m - i) as f64 / (i + 1) as f64;
    }
    for i in (1..=mid).rev() {
        w[i as usize - 1] = w[i as usize] * i as f64 / (m - i + 1) as f64;
    }
    let upper: f64 = w[j as usize..].iter().rev().sum();
    let lower: f64 = w[..j as usize].iter().sum();
    upper / (upper + lower)
}

/// `P[S_m >= c]` for the walk from 0.
fn walk_at_least(m: u32, c: i64) -> f64 {
    // S_m = 2U - m with U ~ Bin(m, 1/2)
    binomial_upper_tail(m, (m as i64 + c + 1).div_euclid(2))
}

/// `P[S_m > c]` for the walk from 0.
fn walk_above(m: u32, c: i64) -> f64 {
    binomial_upper_tail(m, (m as i64 + c).div_euclid(2) + 1)
}

/// `P_0[zeta_n(a) >= k]`, the chance that the walk from 0 visits `a` at least
/// `k` times among `S_0, ..., S_n` (time 0 counts as a visit when `a = 0`):
/// `P[S_{n-k+1} >= a+k-1] + P[S_{n-k+1} > a+k-1]`.
pub fn takacs_tail(n_steps: u32, a: i64, k: u32) -> Result<f64> {
    if a < 0 {
        return Err(Error::param("a", format!("must be >= 0, got {a}")));
    }
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if k > n_steps + 1 {
        return Ok(0.0);
    }
    let m = n_steps + 1 - k;
    let c = a + k as i64 - 1;
    Ok(walk_at_least(m, c) + walk_above(m, c))
}

/// Exhaustive oracle: visits to `a` counted over all `2^steps` paths.
pub fn visit_tail_brute_force(spec: DiscreteWalkSpec, a: i64, k: u32) -> Result<f64> {
    if spec.steps > 24 {
        return Err(Error::param("steps", format!("exhaustive enumeration capped at 24, got {}", spec.steps)));
    }
    let total = 1u64 << spec.steps;
    let mut hits = 0u64;
    for bits in 0..total {
        let mut s = spec.start;
        let mut visits = (s == a) as u32;
        for i in 0..spec.steps {
            s += if bits >> i & 1 == 1 { 1 } else { -1 };
            visits += (s == a) as u32;
        }
        hits += (visits >= k) as u64;
    }
    Ok(hits as f64 / total as f64)
}

/// `P_start[S_ell = 0]`.
fn walk_pmf(start: i64, ell: u32, target: i64) -> f64 {
    let d = start - target;
    if (ell as i64 + d) % 2 != 0 || d.abs() > ell as i64 {
        return 0.0;
    }
    let down = ((ell as i64 + d) / 2) as u32;
    if ell <= EXACT_MAX {
        let mut c: u128 = 1;
        for i in 0..down {
            c = c * (ell - i) as u128 / (i + 1) as u128;
        }
        return c as f64 / 2f64.powi(ell as i32);
    }
    (ln_factorial(ell as u64) - ln_factorial(down as u64) - ln_factorial((ell - down) as u64)
        - ell as f64 * std::f64::consts::LN_2)
        .exp()
}

/// First hitting time of 0 from `start >= 1`:
/// `P[T = ell] = (start / ell) P_start[S_ell = 0]`.
pub fn hitting_time_pmf(start: i64, ell: u32) -> Result<f64> {
    if start < 1 {
        return Err(Error::param("start", format!("must be >= 1, got {start}")));
    }
    if ell == 0 {
        return Err(Error::param("ell", "must be >= 1"));
    }
    Ok(start as f64 / ell as f64 * walk_pmf(start, ell, 0))
}

/// Dynamic-programming oracle for [`hitting_time_pmf`]: the law of the walk
/// killed at 0, stepped `ell` times.
pub fn hitting_time_dp(start: i64, ell: u32) -> Result<f64> {
    if start < 1 {
        return Err(Error::param("start", format!("must be >= 1, got {start}")));
    }
    let width = (start + ell as i64 + 2) as usize;
    let mut p = vec![0.0f64; width];
    p[start as usize] = 1.0;
    let mut absorbed = 0.0;
    for _ in 0..ell {
        let mut q = vec![0.0f64; width];
        absorbed = 0.5 * p[1];
        for x in 1..width - 1 {
            if p[x] == 0.0 {
                continue;
            }
            if x > 1 {
                q[x - 1] += 0.5 * p[x];
            }
            q[x + 1] += 0.5 * p[x];
        }
        p = q;
    }
    Ok(absorbed)
}

/// Calibrated constants of the local CLT comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcltConstants {
    /// Bound on `sqrt(t) p_t(x)`; the supremum over `t` is 0.46882, at
    /// `x = 0` and `t = 0.79`.
    pub c0: f64,
    /// Bound on `t^{3/2} |K_t(0) - K_t(1)|`.
    pub c1: f64,
    pub rel_tol: f64,
}

impl Default for LcltConstants {
    fn default() -> Self {
        LcltConstants { c0: 0.47, c1: FRAC_1_SQRT_2PI, rel_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcltRecord {
    pub t: f64,
    pub x: i64,
    /// `P_0[X_t = x]` of the rate-1 continuous-time walk.
    pub p: f64,
    /// Gaussian kernel `K_t(x)`.
    pub k: f64,
    pub ratio: f64,
    pub sqrt_t_p: f64,
    pub kernel_diff_scaled: f64,
    pub bounds_ok: bool,
}

pub fn lclt_compare_with(t: f64, x: i64, c: &LcltConstants) -> Result<LcltRecord> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    let p = bessel_i_scaled(x, t)?;
    let k = heat_kernel(x as f64, t);
    let sqrt_t_p = t.sqrt() * p;
    let kernel_diff_scaled = t.powf(1.5) * (heat_kernel(0.0, t) - heat_kernel(1.0, t)).abs();
    let bounds_ok = sqrt_t_p <= c.c0 * (1.0 + c.rel_tol) && kernel_diff_scaled <= c.c1 * (1.0 + c.rel_tol);
    Ok(LcltRecord {
        t,
        x,
        p,
        k,
        ratio: p / k,
        sqrt_t_p,
        kernel_diff_scaled,
        bounds_ok,
    })
}

pub fn lclt_compare(t: f64, x: i64) -> Result<LcltRecord> {
    lclt_compare_with(t, x, &LcltConstants::default())
}

/// One row of the local-time table.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeRow {
    pub n: u32,
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeTable {
    pub t: f64,
    pub rows: Vec<LocalTimeRow>,
    /// Per statistic: whether `max <= 2 min` across the `n` values.
    pub bounded: Vec<(String, bool)>,
}

impl LocalTimeTable {
    pub fn statistic(&self, name: &str) -> Vec<&LocalTimeRow> {
        self.rows.iter().filter(|r| r.statistic == name).collect()
    }

    pub fn all_bounded(&self) -> bool {
        self.bounded.iter().all(|(_, b)| *b)
    }

    /// CSV rows `n,statistic,value,stderr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,statistic,value,stderr")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:e},{:e}", r.n, r.statistic, r.value, r.stderr)?;
        }
        Ok(())
    }
}

pub const LOCAL_TIME_GAMMA: f64 = 0.5;

/// Names of the statistics, in table order.
pub fn local_time_statistics() -> Vec<String> {
    let mut v = vec!["i".to_string()];
    v.extend((1..=3).map(|p| format!("ii_p{p}")));
    v.extend((0..=2).map(|j| format!("iii_j{j}")));
    v
}

/// Local times `xi(0)`, `xi(-1)` of the rate-1 simple walk from `start` up
/// to `t n^2`, and per `n`:
/// (i) `E[(xi(0) - xi(-1))^2] / n`,
/// (ii) `E[xi(0)^p] / (t^{p/2} n^p)` for `p = 1, 2, 3`,
/// (iii) `n^{1-gamma} P[j n^gamma < xi(0) <= (j+1) n^gamma]` for `j = 0, 1, 2`.
pub fn localtime_moment_suite_from(start: i64, n_list: &[u32], t: f64, replicas: usize, seed: u64) -> Result<LocalTimeTable> {
    if n_list.is_empty() {
        return Err(Error::param("n_list", "is empty"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return Err(Error::param("n_list", format!("entries must be >= 2, got {n}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if replicas < 2 {
        return Err(Error::param("N", "must be >= 2"));
    }
    let names = local_time_statistics();
    let mut rows = Vec::new();
    for &n in n_list {
        let walk = Walk::SlowBond(SlowBondParams::new(1.0, Beta::Finite(0.0), n)?);
        let nf = n as f64;
        let horizon = t * nf * nf;
        let base = (n as u64) << 32;
        let draws = map_replicas(replicas, |i| {
            let mut rng = replica_rng(seed, base + i as u64);
            let e = sample_endpoint(&walk, start, horizon, &mut rng);
            (e.occ_0, e.occ_minus1)
        });
        let band = nf.powf(LOCAL_TIME_GAMMA);
        let scale = nf.powf(1.0 - LOCAL_TIME_GAMMA);
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(replicas); names.len()];
        for &(x0, xm) in &draws {
            columns[0].push((x0 - xm).powi(2) / nf);
            for p in 1..=3 {
                columns[p].push(x0.powi(p as i32) / (t.powf(p as f64 / 2.0) * nf.powi(p as i32)));
            }
            for j in 0..=2 {
                let lo = j as f64 * band;
                let inside = x0 > lo && x0 <= lo + band;
                columns[4 + j].push(if inside { scale } else { 0.0 });
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            let e = Estimate::from_samples(col);
            rows.push(LocalTimeRow {
                n,
                statistic: name.clone(),
                value: e.mean,
                stderr: e.stderr,
            });
        }
    }
    let bounded = names
        .iter()
        .map(|name| {
            let v: Vec<f64> = rows.iter().filter(|r| &r.statistic == name).map(|r| r.value).collect();
            let max = v.iter().cloned().fold(f64::MIN, f64::max);
            let min = v.iter().cloned().fold(f64::MAX, f64::min);
            (name.clone(), max <= 2.0 * min)
        })
        .collect();
    Ok(LocalTimeTable { t, rows, bounded })
}

/// The suite started at site 0.
pub fn localtime_moment_suite(n_list: &[u32], t: f64, replicas: usize, seed: u64) -> Result<LocalTimeTable> {
    localtime_moment_suite_from(0, n_list, t, replicas, seed)
}

fn tanaka_at(path: &GridPath, level: f64) -> f64 {
    let shifted = GridPath {
        dt: path.dt,
        values: path.values.iter().map(|b| b - level).collect(),
    };
    local_time_zero(&shifted, LocalTimeMethod::Tanaka, 0.0).map(|e| e.value).unwrap_or(0.0)
}

/// Two-sample KS test of `L(x, t)` against `L(x sqrt(n), t n) / sqrt(n)`,
/// both from Brownian paths started at 0 with `steps` grid steps and the
/// Tanaka estimator.
pub fn local_time_scaling_ks(x: f64, t: f64, n: f64, steps: usize, replicas: usize, seed: u64) -> Result<KsResult> {
    if !(n > 0.0) || !(t > 0.0) || steps == 0 || replicas == 0 {
        return Err(Error::param("scaling", "need n > 0, t > 0, steps >= 1, N >= 1"));
    }
    let draw = |scale: f64, stream: u64| -> Result<Vec<f64>> {
        let horizon = t * scale;
        let dt = horizon / steps as f64;
        let level = x * scale.sqrt();
        map_replicas(replicas, |i| {
            let mut rng = replica_rng(seed, stream + i as u64);
            sample_bm_with(0.0, horizon, dt, &mut rng).map(|p| tanaka_at(&p, level) / scale.sqrt())
        })
        .into_iter()
        .collect()
    };
    let a = draw(1.0, 0)?;
    let b = draw(n, 1 << 40)?;
    Ok(ks_two_sample(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;

    // frozen outputs of the exhaustive oracle
    #[test]
    fn takacs_small_cases() {
        // n = 4, a = 0: paths with >= 2 visits to 0 (time 0 included)
        assert_eq!(visit_tail_brute_force(DiscreteWalkSpec::new(4, 0).unwrap(), 0, 2).unwrap(), 0.625);
        assert_eq!(takacs_tail(4, 0, 2).unwrap(), 0.625);
        assert_eq!(visit_tail_brute_force(DiscreteWalkSpec::new(12, 0).unwrap(), 3, 2).unwrap(), 29.0 / 128.0);
        assert!((takacs_tail(12, 3, 2).unwrap() - 29.0 / 128.0).abs() <= 1e-12);
        assert_eq!(takacs_tail(5, 6, 1).unwrap(), 0.0);
        assert_eq!(takacs_tail(3, 0, 5).unwrap(), 0.0);
    }

    #[test]
    fn takacs_matches_enumeration() {
        for n in 1..=14u32 {
            for a in 0..=n as i64 + 1 {
                for k in 1..=n + 2 {
                    let brute = visit_tail_brute_force(DiscreteWalkSpec::new(n, 0).unwrap(), a, k).unwrap();
                    let exact = takacs_tail(n, a, k).unwrap();
                    assert!((brute - exact).abs() <= 1e-12, "n={n} a={a} k={k}: {brute} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn large_arguments_use_log_space() {
        // symmetric walk: P[S_m >= 0] + P[S_m > 0] = 1 for odd m
        let v = takacs_tail(301, 0, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-15, "{v}");
        // return to 0 within 400 steps: 1 - C(400, 200) / 2^400
        let w = takacs_tail(400, 0, 2).unwrap();
        assert!((w - 0.960_130_698_036_207_1).abs() < 1e-14, "{w}");
        assert!(takacs_tail(400, 10, 3).unwrap() < takacs_tail(400, 10, 2).unwrap());
    }

    #[test]
    fn hitting_time_examples() {
        assert_eq!(hitting_time_pmf(2, 3).unwrap(), 0.0);
        assert_eq!(hitting_time_pmf(1, 1).unwrap(), 0.5);
        // frozen DP outputs
        assert_eq!(hitting_time_dp(3, 3).unwrap(), 0.125);
        assert_eq!(hitting_time_dp(3, 5).unwrap(), 3.0 / 32.0);
        assert_eq!(hitting_time_dp(1, 3).unwrap(), 0.125);
    }

    #[test]
    fn hitting_time_matches_dp() {
        for start in 1..=5 {
            for ell in 1..=21 {
                let a = hitting_time_pmf(start, ell).unwrap();
                let b = hitting_time_dp(start, ell).unwrap();
                assert!((a - b).abs() <= 1e-12, "start={start} ell={ell}");
            }
        }
    }

    #[test]
    fn lclt_examples() {
        let total: f64 = (-80..=80).map(|x| lclt_compare(5.0, x).unwrap().p).sum();
        assert!((total - 1.0).abs() <= 1e-10);
        let r = lclt_compare(200.0, 0).unwrap();
        assert!((r.ratio - 1.0).abs() <= 0.01);
        for &t in &[1.0, 2.0, 10.0, 1e3] {
            let r = lclt_compare(t, 0).unwrap();
            assert!(r.bounds_ok, "{r:?}");
            assert!(r.kernel_diff_scaled <= FRAC_1_SQRT_2PI);
        }
    }

    #[test]
    fn frozen_walk_has_no_local_time_difference() {
        let tab = localtime_moment_suite_from(500, &[4, 8], 1e-3, 200, 1).unwrap();
        for r in tab.statistic("i") {
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn local_time_mean_tends_to_the_brownian_value() {
        let tab = localtime_moment_suite(&[32], 1.0, 20_000, 7).unwrap();
        let r = tab.statistic("ii_p1")[0];
        let target = (2.0 / std::f64::consts::PI).sqrt();
        assert!((r.value - target).abs() <= 3.0 * r.stderr + 0.5 / 32.0, "{r:?}");
    }

    #[test]
    fn scaling_holds_on_the_grid() {
        let ks = local_time_scaling_ks(0.2, 1.0, 9.0, 200, 4000, 3).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn csv_header() {
        let tab = localtime_moment_suite(&[2], 0.1, 10, 1).unwrap();
        let mut buf = Vec::new();
        tab.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("n,statistic,value,stderr\n2,i,"));
        assert_eq!(s.lines().count(), 8);
    }
}
