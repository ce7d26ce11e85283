//! The slow bond random walk on Z and the reflected walk on {0, 1, 2, ...}.
//!
//! Times here are machine times: the diffusive speed-up `n^2` is already
//! folded in by the caller.

use std::fmt;
use std::io::Write;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::exec::{replica_rng, Rng};
use crate::special::poisson_weights;

/// Exponent of the slow bond, `[0, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "INF" => Ok(Beta::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|e| format!("`{other}` is neither a number nor `inf`: {e}"))
                .and_then(|b| {
                    if b.is_infinite() && b > 0.0 {
                        Ok(Beta::Infinite)
                    } else if b >= 0.0 && b.is_finite() {
                        Ok(Beta::Finite(b))
                    } else {
                        Err(format!("must lie in [0, inf], got {b}"))
                    }
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowBondParams {
    pub alpha: f64,
    pub beta: Beta,
    pub n: u32,
}

impl SlowBondParams {
    pub fn new(alpha: f64, beta: Beta, n: u32) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        if let Beta::Finite(b) = beta {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::param("beta", format!("must lie in [0, inf], got {b}")));
            }
        }
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        Ok(SlowBondParams { alpha, beta, n })
    }

    /// Rate `alpha / (2 n^beta)` across the edge {-1, 0}.
    pub fn slow_rate(&self) -> f64 {
        match self.beta {
            Beta::Infinite => 0.0,
            Beta::Finite(b) => self.alpha / (2.0 * (self.n as f64).powf(b)),
        }
    }
}

/// Jump rate across the edge {x, x+1}, the same in both directions.
pub fn edge_rate(params: &SlowBondParams, x: i64) -> f64 {
    if x == -1 {
        params.slow_rate()
    } else {
        0.5
    }
}

/// Rate of the jump from `x` to the neighbour `y`.
pub fn jump_rate(params: &SlowBondParams, x: i64, y: i64) -> f64 {
    match y - x {
        1 => edge_rate(params, x),
        -1 => edge_rate(params, y),
        _ => 0.0,
    }
}

/// Which chain to run: the slow bond walk on Z or the reflected walk on N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Walk {
    SlowBond(SlowBondParams),
    Reflected,
}

impl Walk {
    #[inline]
    fn edge(&self, x: i64) -> f64 {
        match self {
            Walk::SlowBond(p) => edge_rate(p, x),
            Walk::Reflected => {
                if x < 0 {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }

    fn lowest_site(&self) -> Option<i64> {
        match self {
            Walk::SlowBond(_) => None,
            Walk::Reflected => Some(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub start: i64,
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub positions: Vec<i64>,
    pub occ_minus1: f64,
    pub occ_0: f64,
}

impl WalkPath {
    pub fn position_at(&self, time: f64) -> i64 {
        let k = self.jump_times.partition_point(|&s| s <= time);
        self.positions[k]
    }

    pub fn end(&self) -> i64 {
        *self.positions.last().unwrap()
    }
}

/// Terminal state of a path with the occupation times of sites -1 and 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub position: i64,
    pub occ_minus1: f64,
    pub occ_0: f64,
}

/// Gillespie loop. `on_hold(site, from, to)` sees every holding interval
/// clipped to the horizon, `on_jump(time, site)` every jump.
fn gillespie<H, J>(walk: &Walk, start: i64, horizon: f64, rng: &mut Rng, mut on_hold: H, mut on_jump: J) -> i64
where
    H: FnMut(i64, f64, f64),
    J: FnMut(f64, i64),
{
    let mut x = start;
    let mut t = 0.0;
    loop {
        let left = walk.edge(x - 1);
        let right = walk.edge(x);
        let total = left + right;
        let hold = if total > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / total
        } else {
            f64::INFINITY
        };
        if t + hold >= horizon {
            on_hold(x, t, horizon);
            return x;
        }
        on_hold(x, t, t + hold);
        t += hold;
        x += if rng.random::<f64>() * total < right { 1 } else { -1 };
        on_jump(t, x);
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    Ok(())
}

/// Exact path of the slow bond walk up to `horizon`.
pub fn sample_path(params: &SlowBondParams, start: i64, horizon: f64, seed: u64) -> Result<WalkPath> {
    check_horizon(horizon)?;
    let mut rng = replica_rng(seed, 0);
    let mut jump_times = Vec::new();
    let mut positions = vec![start];
    let (mut occ_m1, mut occ_0) = (0.0, 0.0);
    gillespie(
        &Walk::SlowBond(*params),
        start,
        horizon,
        &mut rng,
        |x, a, b| match x {
            -1 => occ_m1 += b - a,
            0 => occ_0 += b - a,
            _ => {}
        },
        |t, x| {
            jump_times.push(t);
            positions.push(x);
        },
    );
    Ok(WalkPath {
        start,
        horizon,
        jump_times,
        positions,
        occ_minus1: occ_m1,
        occ_0,
    })
}

/// Endpoint and occupation times without storing the path.
pub fn sample_endpoint(walk: &Walk, start: i64, horizon: f64, rng: &mut Rng) -> Endpoint {
    let (mut occ_m1, mut occ_0) = (0.0, 0.0);
    let position = gillespie(
        walk,
        start,
        horizon,
        rng,
        |x, a, b| match x {
            -1 => occ_m1 += b - a,
            0 => occ_0 += b - a,
            _ => {}
        },
        |_, _| {},
    );
    Endpoint {
        position,
        occ_minus1: occ_m1,
        occ_0,
    }
}

/// Positions at the increasing machine times `times`.
pub fn sample_positions(walk: &Walk, start: i64, times: &[f64], rng: &mut Rng) -> Vec<i64> {
    let mut out = Vec::with_capacity(times.len());
    let mut x = start;
    let mut t0 = 0.0;
    for &t in times {
        x = gillespie(walk, x, t - t0, rng, |_, _, _| {}, |_, _| {});
        t0 = t;
        out.push(x);
    }
    out
}

/// Law of the walk on the window `offset .. offset + probs.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    pub n: u32,
    pub offset: i64,
    pub probs: Vec<f64>,
    /// Mass that left the window, and hence is missing from `probs`.
    pub deficit: f64,
}

impl LatticeDistribution {
    pub fn point_mass(n: u32, site: i64) -> Self {
        LatticeDistribution {
            n,
            offset: site,
            probs: vec![1.0],
            deficit: 0.0,
        }
    }

    pub fn prob(&self, site: i64) -> f64 {
        let i = site - self.offset;
        if i < 0 || i as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.offset + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Copy rescaled to total mass one, for reporting.
    pub fn normalized(&self) -> Self {
        let s = self.total();
        LatticeDistribution {
            probs: self.probs.iter().map(|p| p / s).collect(),
            ..self.clone()
        }
    }

    /// Mass at sites with `|x - center| > radius`.
    pub fn mass_outside(&self, center: i64, radius: f64) -> f64 {
        self.sites()
            .filter(|(x, _)| ((x - center) as f64).abs() > radius)
            .map(|(_, p)| p)
            .sum::<f64>()
            + self.deficit
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "site,prob")?;
        for (x, p) in self.sites() {
            writeln!(w, "{x},{p:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MarginalOptions {
    /// Required bound on the escaped mass.
    pub tail_tol: f64,
    /// Largest window half-width tried before giving up.
    pub max_radius: i64,
    /// Relative tail at which the Poisson series is cut.
    pub poisson_tail: f64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        MarginalOptions {
            tail_tol: 1e-10,
            max_radius: 1 << 20,
            poisson_tail: 1e-12,
        }
    }
}

/// Uniformized generator restricted to a window of sites `lo..lo+len`.
pub(crate) struct Window {
    lo: i64,
    /// `edges[i]` is the rate of the edge {lo + i - 1, lo + i}, so
    /// `edges[0]` and `edges[len]` connect to the outside.
    edges: Vec<f64>,
    lambda: f64,
}

impl Window {
    pub(crate) fn new(walk: &Walk, lo: i64, len: usize) -> Self {
        let edges: Vec<f64> = (0..=len as i64).map(|i| walk.edge(lo + i - 1)).collect();
        let max_out = (0..len).map(|i| edges[i] + edges[i + 1]).fold(0.0, f64::max);
        // rates are 1/2 except one edge, so the bound 1 of the all-1/2 chain
        // only needs raising when the slow edge is fast
        let lambda = max_out.max(1.0);
        Window { lo, edges, lambda }
    }

    /// `sum_k Poisson(lambda T)[k] M^k v` with `M = I + Q / lambda`, where the
    /// values outside the window are frozen at `outside`. `v` must vanish
    /// outside the index range `support` (pass the whole window otherwise);
    /// the range grows by one site per step.
    pub(crate) fn evolve(&self, v: &[f64], time: f64, outside: (f64, f64), support: (usize, usize), poisson_tail: f64) -> Vec<f64> {
        let len = v.len();
        let (klo, w) = poisson_weights(self.lambda * time, poisson_tail);
        let khi = klo + w.len() - 1;
        let mut cur = v.to_vec();
        let mut next = v.to_vec();
        let mut acc = vec![0.0; len];
        let (mut a, mut b) = support;
        let inv = 1.0 / self.lambda;
        for k in 0..=khi {
            if k >= klo {
                let wk = w[k - klo];
                for i in a..=b {
                    acc[i] += wk * cur[i];
                }
            }
            if k == khi {
                break;
            }
            let na = a.saturating_sub(1);
            let nb = (b + 1).min(len - 1);
            for i in na..=nb {
                let left = if i == 0 { outside.0 } else { cur[i - 1] };
                let right = if i + 1 == len { outside.1 } else { cur[i + 1] };
                let c = cur[i];
                next[i] = c + inv * (self.edges[i + 1] * (right - c) + self.edges[i] * (left - c));
            }
            cur[na..=nb].copy_from_slice(&next[na..=nb]);
            a = na;
            b = nb;
        }
        acc
    }

    pub(crate) fn lo(&self) -> i64 {
        self.lo
    }
}

fn check_time(time: f64, tail_tol: f64) -> Result<()> {
    if !(time >= 0.0) || !time.is_finite() {
        return Err(Error::param("T", format!("must be finite and >= 0, got {time}")));
    }
    if !(tail_tol > 0.0) {
        return Err(Error::param("tail_tol", format!("must be > 0, got {tail_tol}")));
    }
    Ok(())
}

fn default_radius(time: f64) -> i64 {
    (8.0 * time.sqrt() + 20.0).ceil() as i64
}

/// Forward law of `walk` started at `start` after machine time `time`.
pub fn marginal(walk: &Walk, start: i64, time: f64, opts: &MarginalOptions) -> Result<LatticeDistribution> {
    check_time(time, opts.tail_tol)?;
    let n = match walk {
        Walk::SlowBond(p) => p.n,
        Walk::Reflected => 1,
    };
    if let Some(lowest) = walk.lowest_site() {
        if start < lowest {
            return Err(Error::param("start", format!("must be >= {lowest} for this walk, got {start}")));
        }
    }
    if time == 0.0 {
        return Ok(LatticeDistribution::point_mass(n, start));
    }
    let mut radius = default_radius(time);
    loop {
        let mut lo = start - radius;
        if let Some(lowest) = walk.lowest_site() {
            lo = lo.max(lowest);
        }
        let hi = start + radius;
        let len = (hi - lo + 1) as usize;
        let win = Window::new(walk, lo, len);
        let mut v = vec![0.0; len];
        let s = (start - lo) as usize;
        v[s] = 1.0;
        let probs = win.evolve(&v, time, (0.0, 0.0), (s, s), opts.poisson_tail);
        let deficit = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        if deficit < opts.tail_tol {
            return Ok(LatticeDistribution {
                n,
                offset: win.lo(),
                probs,
                deficit,
            });
        }
        if radius >= opts.max_radius {
            return Err(Error::Truncation {
                radius,
                max_radius: opts.max_radius,
                deficit,
                tail_tol: opts.tail_tol,
            });
        }
        radius = (radius * 2).min(opts.max_radius);
    }
}

/// Law of `X_T` for the slow bond walk started at `start`.
pub fn exact_marginal(params: &SlowBondParams, start: i64, time: f64, tail_tol: f64) -> Result<LatticeDistribution> {
    let opts = MarginalOptions { tail_tol, ..Default::default() };
    marginal(&Walk::SlowBond(*params), start, time, &opts)
}

/// Law of `X_T` for the reflected walk on {0, 1, ...} started at `start >= 0`.
pub fn reflected_marginal(n: u32, start: i64, time: f64, tail_tol: f64) -> Result<LatticeDistribution> {
    let opts = MarginalOptions { tail_tol, ..Default::default() };
    let mut d = marginal(&Walk::Reflected, start, time, &opts)?;
    d.n = n;
    Ok(d)
}

/// Representative of the class {x, -1-x}.
pub fn lump(x: i64) -> i64 {
    if x >= 0 {
        x
    } else {
        -1 - x
    }
}

/// Push-forward of `d` under [`lump`]; the result starts at site 0.
pub fn lump_distribution(d: &LatticeDistribution) -> LatticeDistribution {
    let top = d.sites().map(|(x, _)| lump(x)).max().unwrap_or(0);
    let mut probs = vec![0.0; top as usize + 1];
    for (x, p) in d.sites() {
        probs[lump(x) as usize] += p;
    }
    LatticeDistribution {
        n: d.n,
        offset: 0,
        probs,
        deficit: d.deficit,
    }
}
