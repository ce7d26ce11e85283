//! Dual bounded-Lipschitz distance between probability measures on R or on
//! G, restricted to test functions that are piecewise linear on a grid.
//!
//! The program is
//!
//! `max sum_i f_i (mu_i - nu_i)` over `(f, m, l)` with `m, l >= 0`,
//! `m + l <= 1`, `|f_i| <= m` and `|f_{i+1} - f_i| <= l (x_{i+1} - x_i)`
//! inside each component,
//!
//! where `mu_i`, `nu_i` are the expectations of the hat functions of the grid.
//! For fixed `m` (with `l = 1 - m`) the program splits into one chain problem
//! per component, solved exactly in linear time by tracking the concave value
//! function of the last node. The optimum is concave in `m` and is found by
//! golden section. [`reference_lp`] solves the same program with a dense
//! simplex.

use std::collections::VecDeque;

use crate::diffusion::{Side, SignedReal};
use crate::error::{Error, Result};
use crate::lattice_walk::LatticeDistribution;
use crate::quad::{integrate, GL8_W, GL8_X};
use crate::semigroups::{elastic_survival, Limit, WINDOW_SD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// One component, coordinates are real numbers.
    Real,
    /// Two components, `0` for the plus side and `1` for the minus side,
    /// coordinates are magnitudes.
    G,
}

impl Space {
    pub fn components(self) -> usize {
        match self {
            Space::Real => 1,
            Space::G => 2,
        }
    }

    /// Component index and coordinate of a point.
    pub fn locate(self, x: SignedReal) -> (usize, f64) {
        match self {
            Space::Real => (0, x.to_real()),
            Space::G => match x.side {
                Side::Plus => (0, x.magnitude),
                Side::Minus => (1, x.magnitude),
            },
        }
    }

    pub fn side_of(self, component: usize) -> Side {
        if component == 0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }
}

/// Strictly increasing nodes per component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub space: Space,
    pub nodes: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(space: Space, nodes: Vec<Vec<f64>>) -> Result<Self> {
        if nodes.len() != space.components() {
            return Err(Error::param(
                "grid",
                format!("{:?} needs {} components, got {}", space, space.components(), nodes.len()),
            ));
        }
        for (c, v) in nodes.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::param("grid", format!("component {c} has no nodes")));
            }
            if let Some(i) = v.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::param("grid", format!("component {c} not strictly increasing at node {i}")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("grid", format!("component {c} has a non-finite node")));
            }
            if space == Space::G && v[0] < 0.0 {
                return Err(Error::param("grid", format!("component {c} has a negative magnitude")));
            }
        }
        Ok(GridSpec { space, nodes })
    }

    /// Uniform spacing `h` over `[lo, hi]` per component (multiples of `h`
    /// plus both ends), with the `extra` coordinates merged in.
    pub fn uniform(space: Space, ranges: &[(f64, f64)], h: f64, extra: &[Vec<f64>]) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::param("h", format!("must be > 0, got {h}")));
        }
        if ranges.len() != space.components() {
            return Err(Error::param("ranges", "one range per component"));
        }
        let mut nodes = Vec::with_capacity(ranges.len());
        for (c, &(lo, hi)) in ranges.iter().enumerate() {
            if !(hi >= lo) {
                return Err(Error::param("ranges", format!("empty range {lo}..{hi}")));
            }
            let mut v: Vec<(f64, bool)> = vec![(lo, false), (hi, false)];
            let k0 = (lo / h).ceil() as i64;
            let k1 = (hi / h).floor() as i64;
            v.extend((k0..=k1).map(|k| (k as f64 * h, false)));
            if let Some(e) = extra.get(c) {
                v.extend(e.iter().map(|&x| (x, true)));
            }
            nodes.push(merge_nodes(v));
        }
        GridSpec::new(space, nodes)
    }

    /// Spacing `min(0.01, 0.5/n)` over `u -/+ 10 sqrt(t)` (on G: magnitudes
    /// `[0, |u| + 10 sqrt(t)]` on both sides), stretched to cover and merged
    /// with the atoms.
    pub fn policy(space: Space, u: SignedReal, t: f64, n: u32, atoms: &[Atom]) -> Result<Self> {
        let h = (0.5 / n as f64).min(0.01);
        let w = WINDOW_SD * t.sqrt();
        let comps = space.components();
        let mut extra = vec![Vec::new(); comps];
        for a in atoms {
            let (c, x) = space.locate(a.at);
            extra[c].push(x);
        }
        let mut ranges = Vec::with_capacity(comps);
        for e in &extra {
            let (mut lo, mut hi) = match space {
                Space::Real => (u.to_real() - w, u.to_real() + w),
                Space::G => (0.0, u.magnitude + w),
            };
            for &x in e {
                lo = lo.min(x);
                hi = hi.max(x);
            }
            ranges.push((lo, hi));
        }
        GridSpec::uniform(space, &ranges, h, &extra)
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sort and drop near-duplicates, keeping flagged entries over unflagged ones.
fn merge_nodes(mut v: Vec<(f64, bool)>) -> Vec<f64> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(v.len());
    for (x, keep) in v {
        if let Some(last) = out.last_mut() {
            if x - last.0 <= 1e-12 * (1.0 + x.abs()) {
                if keep && !last.1 {
                    *last = (x, true);
                }
                continue;
            }
        }
        out.push((x, keep));
    }
    out.into_iter().map(|p| p.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub at: SignedReal,
    pub weight: f64,
}

/// Hat-function expectations per component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub weights: Vec<Vec<f64>>,
}

impl GridMeasure {
    pub fn total(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }
}

/// A probability measure, either atomic or already integrated against the
/// hats of a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureRep {
    Atoms(Vec<Atom>),
    Projected(GridMeasure),
}

impl MeasureRep {
    pub fn dirac(at: SignedReal) -> Self {
        MeasureRep::Atoms(vec![Atom { at, weight: 1.0 }])
    }

    /// Law of `X / n` for a lattice law, with `0/n = 0+`.
    pub fn from_lattice(d: &LatticeDistribution) -> Self {
        let nf = d.n as f64;
        MeasureRep::Atoms(
            d.sites()
                .filter(|&(_, p)| p > 0.0)
                .map(|(x, p)| Atom { at: SignedReal::from_real(x as f64 / nf), weight: p })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        match self {
            MeasureRep::Atoms(a) => a,
            MeasureRep::Projected(_) => &[],
        }
    }
}

const MASS_TOL: f64 = 1e-10;

/// Hat expectations of `mu` on `grid`. Atoms are split between the two
/// neighbouring nodes by linear interpolation.
pub fn project(mu: &MeasureRep, grid: &GridSpec) -> Result<GridMeasure> {
    let gm = match mu {
        MeasureRep::Projected(g) => {
            if g.weights.len() != grid.nodes.len() || g.weights.iter().zip(&grid.nodes).any(|(w, x)| w.len() != x.len()) {
                return Err(Error::param("measure", "projected weights do not match the grid"));
            }
            g.clone()
        }
        MeasureRep::Atoms(atoms) => {
            let mut weights: Vec<Vec<f64>> = grid.nodes.iter().map(|v| vec![0.0; v.len()]).collect();
            for a in atoms {
                if !(a.weight >= 0.0) || !a.weight.is_finite() {
                    return Err(Error::param("measure", format!("atom weight {} at {}", a.weight, a.at)));
                }
                let (c, x) = grid.space.locate(a.at);
                let nodes = &grid.nodes[c];
                let (lo, hi) = (nodes[0], *nodes.last().unwrap());
                if x < lo || x > hi {
                    return Err(Error::OutsideGrid { position: x, lo, hi });
                }
                let j = nodes.partition_point(|&y| y <= x);
                if j == nodes.len() {
                    weights[c][j - 1] += a.weight;
                    continue;
                }
                let (x0, x1) = (nodes[j - 1], nodes[j]);
                let s = (x - x0) / (x1 - x0);
                weights[c][j - 1] += a.weight * (1.0 - s);
                weights[c][j] += a.weight * s;
            }
            GridMeasure { weights }
        }
    };
    let total = gm.total();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::NotNormalized { total });
    }
    Ok(gm)
}

/// Concave piecewise-linear value function of the chain recursion.
///
/// `p` is a maximizer and `val` the maximum. `left` holds breakpoints left of
/// `p`, nearest first, with the slope to their left; `right` the same on the
/// right. `s_l`, `s_r` are the slopes of the segments touching `p`. Slopes
/// are stored minus `off_s`, left and right positions minus `off_l`, `off_r`.
struct Chain {
    lo: f64,
    hi: f64,
    p: f64,
    val: f64,
    s_l: f64,
    s_r: f64,
    off_s: f64,
    off_l: f64,
    off_r: f64,
    left: VecDeque<(f64, f64)>,
    right: VecDeque<(f64, f64)>,
}

impl Chain {
    fn new(m: f64) -> Self {
        Chain {
            lo: -m,
            hi: m,
            p: -m,
            val: 0.0,
            s_l: 0.0,
            s_r: 0.0,
            off_s: 0.0,
            off_l: 0.0,
            off_r: 0.0,
            left: VecDeque::new(),
            right: VecDeque::new(),
        }
    }

    fn move_right(&mut self) {
        let (x, next) = match self.right.front() {
            Some(&(r, s)) => (r + self.off_r, Some(s)),
            None => (self.hi, None),
        };
        self.val += (self.s_r + self.off_s) * (x - self.p);
        self.left.push_front((self.p - self.off_l, self.s_l));
        self.s_l = self.s_r;
        self.p = x;
        if let Some(s) = next {
            self.right.pop_front();
            self.s_r = s;
        }
    }

    fn move_left(&mut self) {
        let (x, next) = match self.left.front() {
            Some(&(r, s)) => (r + self.off_l, Some(s)),
            None => (self.lo, None),
        };
        self.val -= (self.s_l + self.off_s) * (self.p - x);
        self.right.push_front((self.p - self.off_r, self.s_r));
        self.s_r = self.s_l;
        self.p = x;
        if let Some(s) = next {
            self.left.pop_front();
            self.s_l = s;
        }
    }

    fn add_linear(&mut self, d: f64) {
        self.val += d * self.p;
        self.off_s += d;
        while self.p < self.hi && self.s_r + self.off_s > 0.0 {
            self.move_right();
        }
        while self.p > self.lo && self.s_l + self.off_s < 0.0 {
            self.move_left();
        }
    }

    /// `F(y) <- max_{|z - y| <= delta} F(z)`.
    fn dilate(&mut self, delta: f64) {
        if delta <= 0.0 {
            return;
        }
        self.off_l -= delta;
        self.off_r += delta;
        if self.p < self.hi {
            self.right.push_front((self.p + delta - self.off_r, self.s_r));
        }
        self.s_r = -self.off_s;
        self.p -= delta;
        self.lo -= delta;
        self.hi += delta;
    }

    fn clip(&mut self, a: f64, b: f64) {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        while matches!(self.left.back(), Some(&(x, _)) if x + self.off_l <= lo) {
            self.left.pop_back();
        }
        while matches!(self.right.back(), Some(&(x, _)) if x + self.off_r >= hi) {
            self.right.pop_back();
        }
        if self.p < lo {
            while let Some(&(r, s)) = self.right.front() {
                let x = r + self.off_r;
                if x > lo {
                    break;
                }
                self.val += (self.s_r + self.off_s) * (x - self.p);
                self.p = x;
                self.s_r = s;
                self.right.pop_front();
            }
            self.val += (self.s_r + self.off_s) * (lo - self.p);
            self.p = lo;
            self.left.clear();
        }
        if self.p > hi {
            while let Some(&(r, s)) = self.left.front() {
                let x = r + self.off_l;
                if x < hi {
                    break;
                }
                self.val -= (self.s_l + self.off_s) * (self.p - x);
                self.p = x;
                self.s_l = s;
                self.left.pop_front();
            }
            self.val -= (self.s_l + self.off_s) * (self.p - hi);
            self.p = hi;
            self.right.clear();
        }
        self.lo = lo;
        self.hi = hi;
    }
}

/// `max sum_i f_i d_i` subject to `|f_i| <= m`, `|f_{i+1} - f_i| <= l dx_i`.
fn chain_value(d: &[f64], x: &[f64], m: f64, l: f64) -> f64 {
    if m <= 0.0 || d.is_empty() {
        return 0.0;
    }
    let mut c = Chain::new(m);
    c.add_linear(d[0]);
    for i in 1..d.len() {
        c.dilate(l * (x[i] - x[i - 1]));
        c.clip(-m, m);
        c.add_linear(d[i]);
    }
    c.val
}

fn split_value(diff: &[Vec<f64>], grid: &GridSpec, m: f64) -> f64 {
    let l = 1.0 - m;
    diff.iter().zip(&grid.nodes).map(|(d, x)| chain_value(d, x, m, l)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DblSolution {
    pub value: f64,
    /// Sup-norm budget `m` of the optimal split; `l = 1 - m`.
    pub m: f64,
}

fn differences(a: &GridMeasure, b: &GridMeasure) -> Vec<Vec<f64>> {
    a.weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// Solve the grid program for two projected measures.
pub fn dbl_projected(a: &GridMeasure, b: &GridMeasure, grid: &GridSpec) -> DblSolution {
    let diff = differences(a, b);
    let v = |m: f64| split_value(&diff, grid, m);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = v(x1);
    let mut f2 = v(x2);
    let mut best = DblSolution { value: 0.0, m: 0.0 };
    for (m, f) in [(x1, f1), (x2, f2), (1.0, v(1.0))] {
        if f > best.value {
            best = DblSolution { value: f, m };
        }
    }
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = v(x2);
            if f2 > best.value {
                best = DblSolution { value: f2, m: x2 };
            }
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = v(x1);
            if f1 > best.value {
                best = DblSolution { value: f1, m: x1 };
            }
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    best
}

/// Grid-restricted `d_BL(mu, nu)`; a lower bound of the true distance that
/// increases under grid refinement.
pub fn dbl(mu: &MeasureRep, nu: &MeasureRep, grid: &GridSpec) -> Result<f64> {
    let a = project(mu, grid)?;
    let b = project(nu, grid)?;
    Ok(dbl_projected(&a, &b, grid).value)
}

/// `max c^T x` subject to `A x <= b`, `x >= 0`, with `b >= 0`, by the
/// tableau simplex with Bland's rule. Pivots smaller than 1e-9 are refused,
/// and the final basic solution is checked against the original rows.
pub fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<f64> {
    const EPS: f64 = 1e-12;
    const PIVOT: f64 = 1e-9;
    let rows = a.len();
    let nv = c.len();
    if b.len() != rows || a.iter().any(|r| r.len() != nv) {
        return Err(Error::Solver("inconsistent dimensions".into()));
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::Solver("right-hand side must be >= 0".into()));
    }
    let cols = nv + rows;
    let width = cols + 1;
    let mut t = vec![0.0; rows * width];
    for (i, r) in a.iter().enumerate() {
        t[i * width..i * width + nv].copy_from_slice(r);
        t[i * width + nv + i] = 1.0;
        t[i * width + cols] = b[i];
    }
    // reduced costs; the last slot holds minus the objective
    let mut z: Vec<f64> = c.to_vec();
    z.resize(width, 0.0);
    let mut basis: Vec<usize> = (nv..cols).collect();
    let mut prow = vec![0.0; width];
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > 200_000 {
            return Err(Error::Solver("iteration limit".into()));
        }
        let Some(e) = (0..cols).find(|&j| z[j] > EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let te = t[i * width + e];
            if te > PIVOT {
                let ratio = t[i * width + cols] / te;
                leave = match leave {
                    Some((k, r)) if !(ratio < r - EPS || (ratio <= r + EPS && basis[i] < basis[k])) => Some((k, r)),
                    _ => Some((i, ratio)),
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Solver("unbounded".into()));
        };
        let piv = t[r * width + e];
        for v in &mut t[r * width..(r + 1) * width] {
            *v /= piv;
        }
        prow.copy_from_slice(&t[r * width..(r + 1) * width]);
        for i in 0..rows {
            let f = t[i * width + e];
            if i != r && f != 0.0 {
                for (x, p) in t[i * width..(i + 1) * width].iter_mut().zip(&prow) {
                    *x -= f * p;
                }
            }
        }
        let f = z[e];
        for (x, p) in z.iter_mut().zip(&prow) {
            *x -= f * p;
        }
        basis[r] = e;
    }
    let mut x = vec![0.0; cols];
    for (i, &j) in basis.iter().enumerate() {
        x[j] = t[i * width + cols];
    }
    let value: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let scale = 1.0 + value.abs();
    let violation = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - bi)
        .fold(0.0f64, f64::max);
    if violation > 1e-8 * scale || (value + z[cols]).abs() > 1e-8 * scale {
        return Err(Error::Solver(format!(
            "tableau lost accuracy: row violation {violation:e}, objective drift {:e}",
            (value + z[cols]).abs()
        )));
    }
    Ok(value)
}

/// The grid program solved as one dense LP; the oracle for [`dbl_projected`].
/// Meant for small grids.
pub fn reference_lp(a: &GridMeasure, b: &GridMeasure, grid: &GridSpec) -> Result<f64> {
    let diff = differences(a, b);
    let n: usize = grid.len();
    if n > 400 {
        return Err(Error::param("grid", format!("reference LP limited to 400 nodes, got {n}")));
    }
    // variables: f_i = p_i - q_i at index 2i, 2i+1; then m, l
    let nv = 2 * n + 2;
    let (im, il) = (2 * n, 2 * n + 1);
    let mut c = vec![0.0; nv];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut k = 0;
    for (d, x) in diff.iter().zip(&grid.nodes) {
        for i in 0..d.len() {
            let j = k + i;
            c[2 * j] = d[i];
            c[2 * j + 1] = -d[i];
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; nv];
                r[2 * j] = s;
                r[2 * j + 1] = -s;
                r[im] = -1.0;
                rows.push(r);
                rhs.push(0.0);
            }
            if i + 1 < d.len() {
                for s in [1.0, -1.0] {
                    let mut r = vec![0.0; nv];
                    r[2 * (j + 1)] = s;
                    r[2 * (j + 1) + 1] = -s;
                    r[2 * j] = -s;
                    r[2 * j + 1] = s;
                    r[il] = -(x[i + 1] - x[i]);
                    rows.push(r);
                    rhs.push(0.0);
                }
            }
        }
        k += d.len();
    }
    let mut r = vec![0.0; nv];
    r[im] = 1.0;
    r[il] = 1.0;
    rows.push(r);
    rhs.push(1.0);
    simplex_max(&c, &rows, &rhs)
}

/// Closed form `2d / (2 + d)` of `d_BL(delta_0, delta_d)` on R.
pub fn two_point_closed_form(d: f64) -> f64 {
    let d = d.abs();
    2.0 * d / (2.0 + d)
}

/// `d_BL(delta_0, delta_d)` on a uniform grid of spacing `h` over
/// `[min(0,d) - 1, max(0,d) + 1]`.
pub fn two_point_demo(d: f64, h: f64) -> Result<f64> {
    let (a, b) = (0f64.min(d), 0f64.max(d));
    let grid = GridSpec::uniform(Space::Real, &[(a - 1.0, b + 1.0)], h, &[vec![0.0, d]])?;
    dbl(
        &MeasureRep::dirac(SignedReal::from_real(0.0)),
        &MeasureRep::dirac(SignedReal::from_real(d)),
        &grid,
    )
}

/// Mass of the limit law on the component `c` of `space`.
fn component_mass(limit: &Limit, u: SignedReal, t: f64, space: Space, c: usize) -> f64 {
    match (space, limit) {
        (Space::Real, _) => 1.0,
        (Space::G, Limit::Bm) => {
            let z = u.to_real() / t.sqrt();
            let plus = crate::special::norm_cdf(z);
            if c == 0 {
                plus
            } else {
                1.0 - plus
            }
        }
        (Space::G, Limit::Reflected) => (space.side_of(c) == u.side) as u8 as f64,
        (Space::G, Limit::Snob { kappa }) => {
            let s = elastic_survival(u.magnitude, t, *kappa);
            if space.side_of(c) == u.side {
                0.5 * (1.0 + s)
            } else {
                0.5 * (1.0 - s)
            }
        }
    }
}

/// `E[h_i(Y_t)]` for the hats `h_i` of `grid`, `Y` the limit started at `u`.
/// The end hats take the mass beyond the end nodes. Gauss-Legendre with 8
/// points per grid segment.
pub fn limit_expectations(limit: &Limit, u: SignedReal, t: f64, grid: &GridSpec) -> Result<GridMeasure> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if grid.space == Space::Real && limit.on_g() {
        return Err(Error::param("grid", format!("{limit} lives on G, grid is on R")));
    }
    let space = grid.space;
    let density = |c: usize, x: f64| -> f64 {
        let y = match space {
            Space::Real => SignedReal::from_real(x),
            Space::G => SignedReal { side: space.side_of(c), magnitude: x },
        };
        match (space, limit) {
            (Space::G, Limit::Bm) => crate::special::heat_kernel(y.to_real() - u.to_real(), t),
            _ => limit.density(u, y, t),
        }
    };
    let sd = t.sqrt();
    let mut weights = Vec::with_capacity(grid.nodes.len());
    for (c, x) in grid.nodes.iter().enumerate() {
        let mut w = vec![0.0; x.len()];
        for i in 0..x.len().saturating_sub(1) {
            let (a, b) = (x[i], x[i + 1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let (mut wa, mut wb) = (0.0, 0.0);
            for k in 0..4 {
                for s in [-1.0, 1.0] {
                    let y = mid + s * half * GL8_X[k];
                    let r = GL8_W[k] * density(c, y);
                    wa += r * (b - y);
                    wb += r * (y - a);
                }
            }
            // half * (weight) / (b - a) with b - a = 2 half
            w[i] += 0.5 * wa;
            w[i + 1] += 0.5 * wb;
        }
        let (first, last) = (x[0], *x.last().unwrap());
        let floor = match space {
            Space::Real => first.min(u.to_real()) - 2.0 * WINDOW_SD * sd,
            Space::G => 0.0,
        };
        let top = last.max(u.magnitude.max(u.to_real())) + 2.0 * WINDOW_SD * sd;
        let below = integrate(|y| density(c, y), floor, first, &[], 1e-15)?;
        let above = integrate(|y| density(c, y), last, top, &[], 1e-15)?;
        w[0] += below.value;
        *w.last_mut().unwrap() += above.value;
        weights.push(w);
    }
    Ok(GridMeasure { weights })
}

/// Expected component masses of the limit law, for checks.
pub fn limit_component_masses(limit: &Limit, u: SignedReal, t: f64, space: Space) -> Vec<f64> {
    (0..space.components()).map(|c| component_mass(limit, u, t, space, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;
    use std::f64::consts::PI;

    fn real_grid(lo: f64, hi: f64, h: f64) -> GridSpec {
        GridSpec::uniform(Space::Real, &[(lo, hi)], h, &[]).unwrap()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let g = real_grid(-1.0, 2.0, 0.01);
        let mu = MeasureRep::Atoms(vec![
            Atom { at: SignedReal::from_real(0.3), weight: 0.4 },
            Atom { at: SignedReal::from_real(1.2), weight: 0.6 },
        ]);
        assert_eq!(dbl(&mu, &mu, &g).unwrap(), 0.0);
    }

    #[test]
    fn two_points_match_the_closed_form() {
        for d in [0.1, 1.0, 10.0] {
            let v = two_point_demo(d, 1e-3).unwrap();
            assert!((v - two_point_closed_form(d)).abs() <= 1e-9, "d={d}: {v}");
        }
    }

    #[test]
    fn two_points_match_the_lp() {
        for d in [0.1, 1.0, 3.0] {
            let g = GridSpec::uniform(Space::Real, &[(-0.5, d + 0.5)], d / 8.0, &[vec![0.0, d]]).unwrap();
            let a = project(&MeasureRep::dirac(SignedReal::from_real(0.0)), &g).unwrap();
            let b = project(&MeasureRep::dirac(SignedReal::from_real(d)), &g).unwrap();
            let lp = reference_lp(&a, &b, &g).unwrap();
            let fast = dbl_projected(&a, &b, &g).value;
            assert!((lp - fast).abs() <= 1e-9, "d={d}: {lp} vs {fast}");
            assert!((lp - two_point_closed_form(d)).abs() <= 1e-9);
        }
    }

    #[test]
    fn opposite_zeros_on_g_are_at_distance_two() {
        let g = GridSpec::uniform(Space::G, &[(0.0, 1.0), (0.0, 1.0)], 0.25, &[]).unwrap();
        let a = project(&MeasureRep::dirac(SignedReal::plus(0.0)), &g).unwrap();
        let b = project(&MeasureRep::dirac(SignedReal::minus(0.0)), &g).unwrap();
        assert!((reference_lp(&a, &b, &g).unwrap() - 2.0).abs() <= 1e-12);
        assert!((dbl_projected(&a, &b, &g).value - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn chain_solver_matches_the_lp_on_random_instances() {
        use rand::{Rng as _, SeedableRng};
        let mut rng = crate::exec::Rng::seed_from_u64(17);
        for case in 0..300 {
            let space = if case % 2 == 0 { Space::Real } else { Space::G };
            let mut nodes = Vec::new();
            for _ in 0..space.components() {
                let k = rng.random_range(1..12);
                let mut x = if space == Space::G { 0.0 } else { rng.random_range(-2.0..0.0) };
                let mut v = vec![x];
                for _ in 1..k {
                    x += rng.random_range(0.01..0.8);
                    v.push(x);
                }
                nodes.push(v);
            }
            let g = GridSpec::new(space, nodes).unwrap();
            let mut draw = || {
                let mut w: Vec<Vec<f64>> = g
                    .nodes
                    .iter()
                    .map(|v| v.iter().map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect())
                    .collect();
                let s: f64 = w.iter().flatten().sum::<f64>() + 1e-300;
                w.iter_mut().flatten().for_each(|x| *x /= s);
                GridMeasure { weights: w }
            };
            let (a, b) = (draw(), draw());
            let lp = reference_lp(&a, &b, &g).unwrap();
            let fast = dbl_projected(&a, &b, &g).value;
            assert!((lp - fast).abs() <= 1e-9, "case {case}: lp {lp} chain {fast}");
        }
    }

    #[test]
    fn simplex_small_problem() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let v = simplex_max(
            &[3.0, 2.0],
            &[vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0, 0.0]],
            &[4.0, 6.0, 3.0],
        )
        .unwrap();
        assert!((v - 11.0).abs() < 1e-12);
    }

    #[test]
    fn atoms_outside_the_grid_are_rejected() {
        let g = real_grid(0.0, 1.0, 0.1);
        let err = project(&MeasureRep::dirac(SignedReal::from_real(2.0)), &g).unwrap_err();
        assert!(matches!(err, Error::OutsideGrid { .. }));
        let bad = MeasureRep::Atoms(vec![Atom { at: SignedReal::from_real(0.5), weight: 0.5 }]);
        assert!(matches!(project(&bad, &g).unwrap_err(), Error::NotNormalized { .. }));
    }

    // closed form of int hat(y) phi((y - u)/sd)/sd dy for the hat on [a, b, c]
    fn gaussian_hat(a: f64, b: f64, c: f64, u: f64, sd: f64) -> f64 {
        // int_lo^hi (y - u) density = sd * (phi(lo') - phi(hi'))
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let seg = |lo: f64, hi: f64, x0: f64, rising: bool| {
            let (zl, zh) = ((lo - u) / sd, (hi - u) / sd);
            let mass = norm_cdf(zh) - norm_cdf(zl);
            let first = sd * (pdf(zl) - pdf(zh)) + (u - x0) * mass;
            if rising {
                first / (hi - lo)
            } else {
                -first / (hi - lo)
            }
        };
        seg(a, b, a, true) + seg(b, c, c, false)
    }

    #[test]
    fn brownian_hats_match_the_error_function() {
        let (u, t) = (0.3f64, 0.7f64);
        let g = real_grid(u - 10.0 * t.sqrt(), u + 10.0 * t.sqrt(), 0.05);
        let w = limit_expectations(&Limit::Bm, SignedReal::from_real(u), t, &g).unwrap();
        let x = &g.nodes[0];
        for i in 1..x.len() - 1 {
            let exact = gaussian_hat(x[i - 1], x[i], x[i + 1], u, t.sqrt());
            assert!((w.weights[0][i] - exact).abs() <= 1e-8, "node {i}");
        }
        assert!((w.total() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn snob_hats_collapse_to_reflected_at_kappa_zero() {
        let u = SignedReal::minus(0.5);
        let g = GridSpec::policy(Space::G, u, 1.0, 16, &[]).unwrap();
        let a = limit_expectations(&Limit::Snob { kappa: 0.0 }, u, 1.0, &g).unwrap();
        let b = limit_expectations(&Limit::Reflected, u, 1.0, &g).unwrap();
        for (x, y) in a.weights.iter().flatten().zip(b.weights.iter().flatten()) {
            assert!((x - y).abs() <= 1e-14);
        }
        assert!((b.total() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn snob_hats_carry_the_side_masses() {
        let u = SignedReal::plus(0.5);
        let g = GridSpec::policy(Space::G, u, 1.0, 16, &[]).unwrap();
        let limit = Limit::Snob { kappa: 2.0 };
        let w = limit_expectations(&limit, u, 1.0, &g).unwrap();
        let masses = limit_component_masses(&limit, u, 1.0, Space::G);
        for c in 0..2 {
            let s: f64 = w.weights[c].iter().sum();
            assert!((s - masses[c]).abs() <= 1e-9, "side {c}: {s} vs {}", masses[c]);
        }
    }

    #[test]
    fn policy_grid_contains_the_atoms() {
        let atoms = vec![
            Atom { at: SignedReal::from_real(0.123), weight: 0.5 },
            Atom { at: SignedReal::from_real(25.0), weight: 0.5 },
        ];
        let g = GridSpec::policy(Space::Real, SignedReal::plus(0.5), 1.0, 16, &atoms).unwrap();
        let x = &g.nodes[0];
        assert!(x.contains(&0.123) && *x.last().unwrap() == 25.0);
        assert!((x[1] - x[0] - 0.01).abs() < 1e-12);
    }
}
