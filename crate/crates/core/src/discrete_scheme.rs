//! Lattice functions on `(1/n) Z`, their parity split about `-1/(2n)`, the
//! semi-discrete evolution `g(t, x/n) = E_x[f(X_{t n^2} / n)]`, and the
//! Feynman-Kac form of its odd part.

use std::io::Write;

use crate::diffusion::{abs_and_local_time, SignedReal};
use crate::error::{Error, Result};
use crate::exec::{map_replicas, replica_rng};
use crate::lattice_walk::{exact_marginal, sample_endpoint, SlowBondParams, Walk, Window};
use crate::semigroups::{Limit, TestFn};
use crate::stats::Estimate;

const POISSON_TAIL: f64 = 1e-13;

/// Values of a function at the sites `lo..=hi` of `(1/n) Z`, extended by
/// constants outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFn {
    pub n: u32,
    pub lo: i64,
    pub values: Vec<f64>,
    pub left_tail: f64,
    pub right_tail: f64,
}

impl LatticeFn {
    pub fn new(n: u32, lo: i64, values: Vec<f64>, left_tail: f64, right_tail: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if values.is_empty() {
            return Err(Error::param("values", "window is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value at site {}", lo + i as i64)));
        }
        if !left_tail.is_finite() || !right_tail.is_finite() {
            return Err(Error::param("tails", "must be finite"));
        }
        Ok(LatticeFn { n, lo, values, left_tail, right_tail })
    }

    /// Sample `site -> f(site)` on `lo..=hi`; the tails copy the end values.
    pub fn from_sites<F: Fn(i64) -> f64>(n: u32, lo: i64, hi: i64, f: F) -> Result<Self> {
        if hi < lo {
            return Err(Error::param("window", format!("empty range {lo}..={hi}")));
        }
        let values: Vec<f64> = (lo..=hi).map(f).collect();
        let (l, r) = (values[0], *values.last().unwrap());
        LatticeFn::new(n, lo, values, l, r)
    }

    /// Sample a test function at `x/n`, with `0/n = 0+`.
    pub fn from_test_fn<F: TestFn + ?Sized>(f: &F, n: u32, lo: i64, hi: i64) -> Result<Self> {
        let nf = n as f64;
        LatticeFn::from_sites(n, lo, hi, |x| f.eval(SignedReal::from_real(x as f64 / nf)))
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn value(&self, site: i64) -> f64 {
        if site < self.lo {
            self.left_tail
        } else if site > self.hi() {
            self.right_tail
        } else {
            self.values[(site - self.lo) as usize]
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.lo + i as i64, v))
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .chain([&self.left_tail, &self.right_tail])
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest `|f(x) + f(-1-x)|` over the window.
    pub fn odd_defect(&self) -> f64 {
        self.sites().map(|(x, v)| (v + self.value(-1 - x)).abs()).fold(0.0, f64::max)
    }

    /// Largest `|f(x) - f(-1-x)|` over the window.
    pub fn even_defect(&self) -> f64 {
        self.sites().map(|(x, v)| (v - self.value(-1 - x)).abs()).fold(0.0, f64::max)
    }

    /// CSV rows `site,x,value` with `x = site / n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "site,x,value")?;
        let nf = self.n as f64;
        for (s, v) in self.sites() {
            writeln!(w, "{s},{},{v:e}", s as f64 / nf)?;
        }
        Ok(())
    }
}

/// Even and odd parts about the axis `-1/(2n)`, on the smallest window that
/// is closed under `x -> -1 - x` and contains `f`'s window.
pub fn parity_split_lattice(f: &LatticeFn) -> (LatticeFn, LatticeFn) {
    let lo = f.lo.min(-1 - f.hi());
    let hi = f.hi().max(-1 - f.lo);
    let mut even = Vec::with_capacity((hi - lo + 1) as usize);
    let mut odd = Vec::with_capacity(even.capacity());
    for x in lo..=hi {
        let (a, b) = (f.value(x), f.value(-1 - x));
        even.push(0.5 * (a + b));
        odd.push(0.5 * (a - b));
    }
    let e_tail = 0.5 * (f.left_tail + f.right_tail);
    let o_tail = 0.5 * (f.right_tail - f.left_tail);
    (
        LatticeFn { n: f.n, lo, values: even, left_tail: e_tail, right_tail: e_tail },
        LatticeFn { n: f.n, lo, values: odd, left_tail: -o_tail, right_tail: o_tail },
    )
}

/// `P^n_t f` on `f`'s window, by backward uniformization on a padded window
/// with the outside frozen at the tails. The padding doubles until the
/// chance of leaving it from the window is below `tail_tol`, which bounds the
/// error by `2 tail_tol sup|f|`.
pub fn evolve_scheme_tol(f: &LatticeFn, params: &SlowBondParams, t: f64, tail_tol: f64) -> Result<LatticeFn> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    if params.n != f.n {
        return Err(Error::param("n", format!("function lives on n = {}, walk on n = {}", f.n, params.n)));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let time = t * (f.n as f64).powi(2);
    let walk = Walk::SlowBond(*params);
    let max_pad: i64 = 1 << 20;
    let mut pad = (8.0 * time.sqrt() + 20.0).ceil() as i64;
    loop {
        let lo = f.lo - pad;
        let len = f.values.len() + 2 * pad as usize;
        let win = Window::new(&walk, lo, len);
        let core = pad as usize..pad as usize + f.values.len();
        let ones = win.evolve(&vec![1.0; len], time, (0.0, 0.0), (0, len - 1), POISSON_TAIL);
        let escape = ones[core.clone()].iter().map(|v| 1.0 - v).fold(0.0, f64::max);
        if escape < tail_tol {
            let v: Vec<f64> = (lo..lo + len as i64).map(|x| f.value(x)).collect();
            let g = win.evolve(&v, time, (f.left_tail, f.right_tail), (0, len - 1), POISSON_TAIL);
            return Ok(LatticeFn {
                n: f.n,
                lo: f.lo,
                values: g[core].to_vec(),
                left_tail: f.left_tail,
                right_tail: f.right_tail,
            });
        }
        if pad >= max_pad {
            return Err(Error::Truncation {
                radius: pad,
                max_radius: max_pad,
                deficit: escape,
                tail_tol,
            });
        }
        pad = (2 * pad).min(max_pad);
    }
}

pub fn evolve_scheme(f: &LatticeFn, params: &SlowBondParams, t: f64) -> Result<LatticeFn> {
    evolve_scheme_tol(f, params, t, 1e-12)
}

/// `E_x[f(X_{t n^2}/n)]` at a single start site, through the forward law.
pub fn scheme_value<F: TestFn + ?Sized>(f: &F, params: &SlowBondParams, start: i64, t: f64) -> Result<f64> {
    let law = exact_marginal(params, start, t * (params.n as f64).powi(2), 1e-12)?;
    let nf = params.n as f64;
    Ok(law
        .sites()
        .map(|(y, p)| p * f.eval(SignedReal::from_real(y as f64 / nf)))
        .sum())
}

/// `|E_{floor(un)}[f(X_{t n^2}/n)] - E_u[f(Y_t)]|` with `Y` the limit
/// selected by `(alpha, beta)`.
pub fn fixed_time_gap<F: TestFn + ?Sized>(f: &F, params: &SlowBondParams, u: f64, t: f64) -> Result<f64> {
    let start = (u * params.n as f64).floor() as i64;
    let lattice = scheme_value(f, params, start, t)?;
    let limit = Limit::for_walk(params.alpha, params.beta).expectation(f, SignedReal::from_real(u), t, 1e-9)?;
    Ok((lattice - limit).abs())
}

/// Default probe sites `{0, ceil(n/4), ceil(n/2), n}`.
pub fn default_probe_sites(n: u32) -> Vec<i64> {
    let n = n as i64;
    let mut v = vec![0, (n + 3) / 4, (n + 1) / 2, n];
    v.dedup();
    v
}

/// Odd part of the scheme at the sites `probes >= 0` by Feynman-Kac: reflected
/// walk paths weighted by `exp(-alpha n^-beta xi(0))`, `xi(0)` the time spent
/// at 0. Replica `i` of probe `j` uses stream `j * N + i`.
pub fn feynman_kac_odd(f_odd: &LatticeFn, params: &SlowBondParams, t: f64, probes: &[i64], replicas: usize, seed: u64) -> Result<Vec<Estimate>> {
    if replicas == 0 {
        return Err(Error::param("N", "must be >= 1"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    let defect = f_odd.odd_defect();
    if defect > 1e-12 * (1.0 + f_odd.sup()) {
        return Err(Error::param("f_odd", format!("not odd about -1/2: defect {defect:e}")));
    }
    if let Some(&p) = probes.iter().find(|&&p| p < 0) {
        return Err(Error::param("probes", format!("sites must be >= 0, got {p}")));
    }
    let time = t * (f_odd.n as f64).powi(2);
    let rate = 2.0 * params.slow_rate();
    let mut out = Vec::with_capacity(probes.len());
    for (j, &x) in probes.iter().enumerate() {
        let base = (j * replicas) as u64;
        let samples = map_replicas(replicas, |i| {
            let mut rng = replica_rng(seed, base + i as u64);
            let e = sample_endpoint(&Walk::Reflected, x, time, &mut rng);
            f_odd.value(e.position) * (-rate * e.occ_0).exp()
        });
        out.push(Estimate::from_samples(&samples));
    }
    Ok(out)
}

/// `Q_t f_odd(u) = E_u[f_odd(|B_t|) exp(-2 alpha L_t(0))]` by exact sampling
/// of `(|B_t|, L_t(0))`.
pub fn q_t_odd<F: Fn(f64) -> f64 + Sync>(f_odd: F, u: f64, t: f64, alpha: f64, replicas: usize, seed: u64) -> Result<Estimate> {
    if !(u > 0.0) {
        return Err(Error::param("u", format!("must be > 0, got {u}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if replicas == 0 {
        return Err(Error::param("N", "must be >= 1"));
    }
    let samples = map_replicas(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        let (y, l) = abs_and_local_time(u, t, &mut rng);
        f_odd(y) * (-2.0 * alpha * l).exp()
    });
    Ok(Estimate::from_samples(&samples))
}

/// Residual of the boundary row of the odd scheme at time `t`,
/// `d/dt g(0) = n^2 [ (g(1) - g(0))/2 - alpha n^-beta g(0) ]`, with the time
/// derivative taken by a central difference of step `h`. Relative to
/// `max(1, |rhs|)`.
pub fn odd_boundary_residual(f_odd: &LatticeFn, params: &SlowBondParams, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || h > t {
        return Err(Error::param("h", format!("must lie in (0, t], got {h}")));
    }
    let g = evolve_scheme(f_odd, params, t)?;
    let gp = evolve_scheme(f_odd, params, t + h)?;
    let gm = evolve_scheme(f_odd, params, t - h)?;
    let n2 = (params.n as f64).powi(2);
    let lhs = (gp.value(0) - gm.value(0)) / (2.0 * h);
    let rhs = n2 * (0.5 * (g.value(1) - g.value(0)) - 2.0 * params.slow_rate() * g.value(0));
    Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::Beta;
    use crate::semigroups::{bm_semigroup, bl_suite, snob_semigroup_quad, RealFn};

    fn bump(n: u32, c: f64) -> LatticeFn {
        let r = 3 * n as i64;
        LatticeFn::from_sites(n, -r, r, |x| {
            let y = x as f64 / n as f64;
            (-(y - c) * (y - c)).exp() + 0.3 * (y - c).tanh()
        })
        .unwrap()
    }

    #[test]
    fn split_reconstructs_exactly() {
        let f = LatticeFn::from_sites(8, -7, 20, |x| ((x * x) % 13) as f64 / 8.0 - 0.75).unwrap();
        let (e, o) = parity_split_lattice(&f);
        for x in e.lo - 3..=e.hi() + 3 {
            assert_eq!(e.value(x) + o.value(x), f.value(x));
        }
        let f = bump(8, 0.3);
        let (e, o) = parity_split_lattice(&f);
        for x in e.lo - 3..=e.hi() + 3 {
            assert!((e.value(x) + o.value(x) - f.value(x)).abs() <= 2.0 * f64::EPSILON * (f.value(x).abs() + f.value(-1 - x).abs()));
        }
        assert_eq!(e.even_defect(), 0.0);
        assert_eq!(o.odd_defect(), 0.0);
    }

    #[test]
    fn constant_has_no_odd_part() {
        let f = LatticeFn::from_sites(4, -5, 9, |_| 2.5).unwrap();
        let (_, o) = parity_split_lattice(&f);
        assert!(o.values.iter().all(|&v| v == 0.0));
        assert_eq!((o.left_tail, o.right_tail), (0.0, 0.0));
    }

    #[test]
    fn lattice_even_part_is_close_to_continuum_even_part() {
        // Lipschitz constant 1
        let g = |y: f64| (y - 0.2).abs().min(1.0);
        for n in [4u32, 16, 64] {
            let f = LatticeFn::from_sites(n, -4 * n as i64, 4 * n as i64, |x| g(x as f64 / n as f64)).unwrap();
            let (e, _) = parity_split_lattice(&f);
            for x in -2 * n as i64..=2 * n as i64 {
                let y = x as f64 / n as f64;
                let cont = 0.5 * (g(y) + g(-y));
                assert!((e.value(x) - cont).abs() <= 0.5 / n as f64 + 1e-15);
            }
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let f = bump(8, 0.1);
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        assert_eq!(evolve_scheme(&f, &p, 0.0).unwrap(), f);
    }

    #[test]
    fn parity_is_preserved() {
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        let (e, o) = parity_split_lattice(&bump(8, 0.4));
        let ge = evolve_scheme(&e, &p, 0.5).unwrap();
        let go = evolve_scheme(&o, &p, 0.5).unwrap();
        assert!(ge.even_defect() <= 1e-8);
        assert!(go.odd_defect() <= 1e-8);
    }

    #[test]
    fn even_part_follows_the_free_walk() {
        let slow = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        let free = SlowBondParams::new(1.0, Beta::Finite(0.0), 8).unwrap();
        let (e, _) = parity_split_lattice(&bump(8, -0.2));
        let a = evolve_scheme(&e, &slow, 0.7).unwrap();
        let b = evolve_scheme(&e, &free, 0.7).unwrap();
        let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8, "gap {gap:e}");
    }

    #[test]
    fn evolution_is_linear_and_contracting() {
        let p = SlowBondParams::new(2.0, Beta::Finite(0.5), 6).unwrap();
        let f = bump(6, 0.5);
        let (e, o) = parity_split_lattice(&f);
        let g = evolve_scheme(&f, &p, 0.4).unwrap();
        let ge = evolve_scheme(&e, &p, 0.4).unwrap();
        let go = evolve_scheme(&o, &p, 0.4).unwrap();
        for (x, v) in g.sites() {
            assert!((v - ge.value(x) - go.value(x)).abs() <= 1e-10);
        }
        assert!(g.sup() <= f.sup() + 1e-10);
    }

    #[test]
    fn agrees_with_forward_marginal() {
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        let f = RealFn::new(|y: f64| (-(y - 0.3) * (y - 0.3)).exp()).with_flat_beyond(8.0);
        let lf = LatticeFn::from_test_fn(&f, 8, -64, 64).unwrap();
        let g = evolve_scheme(&lf, &p, 0.5).unwrap();
        for x in [-3, 0, 5] {
            let v = scheme_value(&f, &p, x, 0.5).unwrap();
            assert!((g.value(x) - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn boundary_row_holds() {
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 16).unwrap();
        let (_, o) = parity_split_lattice(&bump(16, 0.25));
        let r = odd_boundary_residual(&o, &p, 0.3, 1e-4).unwrap();
        assert!(r <= 1e-5, "residual {r:e}");
    }

    #[test]
    fn feynman_kac_without_killing_is_reflection() {
        let p = SlowBondParams::new(0.0, Beta::Finite(1.0), 8).unwrap();
        let (_, o) = parity_split_lattice(&bump(8, 0.3));
        let g = evolve_scheme(&o, &p, 0.5).unwrap();
        let probes = default_probe_sites(8);
        let est = feynman_kac_odd(&o, &p, 0.5, &probes, 20_000, 3).unwrap();
        for (x, e) in probes.iter().zip(&est) {
            assert!(e.agrees(g.value(*x), 3.5, 0.0), "site {x}: {e:?} vs {}", g.value(*x));
        }
    }

    #[test]
    fn feynman_kac_of_zero_is_zero() {
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        let z = LatticeFn::from_sites(8, -10, 9, |_| 0.0).unwrap();
        let est = feynman_kac_odd(&z, &p, 0.5, &[0, 3], 100, 1).unwrap();
        assert!(est.iter().all(|e| e.mean == 0.0 && e.stderr == 0.0));
    }

    #[test]
    fn feynman_kac_rejects_non_odd_input() {
        let p = SlowBondParams::new(1.0, Beta::Finite(1.0), 8).unwrap();
        assert!(feynman_kac_odd(&bump(8, 0.0), &p, 0.5, &[0], 10, 1).is_err());
    }

    #[test]
    fn q_t_completes_the_snob_semigroup() {
        let suite = bl_suite();
        let (u, t, alpha) = (0.5, 1.0, 1.0);
        for nf in &suite[..3] {
            let f = &*nf.f;
            let even = RealFn::new(|y: f64| f.even_part(y.abs()));
            let pe = bm_semigroup(&even, u, t).unwrap();
            let q = q_t_odd(|y| f.odd_part(y), u, t, alpha, 40_000, 11).unwrap();
            let snob = snob_semigroup_quad(f, SignedReal::plus(u), t, 2.0 * alpha).unwrap();
            assert!(q.agrees(snob - pe, 3.5, 1e-6), "{}: {q:?} vs {}", nf.name, snob - pe);
        }
    }

    #[test]
    fn q_t_without_killing_is_folded_gaussian() {
        let g = |y: f64| y.min(1.0);
        let q = q_t_odd(g, 0.3, 0.8, 0.0, 40_000, 5).unwrap();
        let f = RealFn::new(move |y: f64| g(y.abs()));
        let exact = bm_semigroup(&f, 0.3, 0.8).unwrap();
        assert!(q.agrees(exact, 3.5, 1e-8));
        let zero = q_t_odd(|_| 0.0, 0.3, 0.8, 1.0, 10, 5).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn probe_sites() {
        assert_eq!(default_probe_sites(16), vec![0, 4, 8, 16]);
        assert_eq!(default_probe_sites(5), vec![0, 2, 3, 5]);
    }
}
