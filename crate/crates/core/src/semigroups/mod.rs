//! The Brownian, reflected and snapping out semigroups, evaluated by
//! deterministic quadrature, plus a Monte Carlo route for the SNOB and the
//! Lipschitz bound check.

pub mod robin;
pub mod testfn;

use std::f64::consts::PI;

use libm::erfc;

use crate::diffusion::{abs_and_local_time, Side, SignedReal};
use crate::error::{Error, Result};
use crate::exec::{map_replicas, replica_rng};
use crate::quad::{integrate, Quadrature};
use crate::special::{erfcx, heat_kernel};
use crate::stats::Estimate;

pub use robin::{robin_pde_solve, RobinSolution};
pub use testfn::{bl_suite, NamedFn, PiecewiseLinearFn, PiecewiseLinearG, RealFn, SidedFn, TestFn};

/// Half-width, in standard deviations, of the Gaussian integration windows.
pub const WINDOW_SD: f64 = 10.0;

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::param("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    Ok(())
}

/// `E_u[f(B_t)]` with error estimate.
pub fn bm_semigroup_tol<F: TestFn + ?Sized>(f: &F, u: f64, t: f64, abs_tol: f64) -> Result<Quadrature> {
    check_t(t)?;
    let w = WINDOW_SD * t.sqrt();
    let mut breaks: Vec<f64> = f.kinks(Side::Plus);
    breaks.extend(f.kinks(Side::Minus).iter().map(|m| -m));
    breaks.push(u);
    integrate(|y| heat_kernel(u - y, t) * f.at(y), u - w, u + w, &breaks, abs_tol)
}

/// `E_u[f(B_t)]` to absolute tolerance 1e-8.
pub fn bm_semigroup<F: TestFn + ?Sized>(f: &F, u: f64, t: f64) -> Result<f64> {
    Ok(bm_semigroup_tol(f, u, t, 1e-8)?.value)
}

/// `int_0^inf [K(m-y) + K(m+y)] g(y) dy` over the effective window.
fn folded_integral<G: FnMut(f64) -> f64>(g: G, m: f64, t: f64, breaks: &[f64], abs_tol: f64) -> Result<Quadrature> {
    let mut g = g;
    let hi = m + WINDOW_SD * t.sqrt();
    let mut b = breaks.to_vec();
    b.push(m);
    integrate(|y| (heat_kernel(m - y, t) + heat_kernel(m + y, t)) * g(y), 0.0, hi, &b, abs_tol)
}

pub fn reflected_semigroup_tol<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64, abs_tol: f64) -> Result<Quadrature> {
    check_t(t)?;
    let side = u.side;
    folded_integral(
        |y| f.eval(SignedReal { side, magnitude: y }),
        u.magnitude,
        t,
        &f.kinks(side),
        abs_tol,
    )
}

/// `E_u[f(B^ref_t)]`: reflected motion on the half-line of `u`'s side.
pub fn reflected_semigroup<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64) -> Result<f64> {
    Ok(reflected_semigroup_tol(f, u, t, 1e-8)?.value)
}

/// `E_m[exp(-kappa L_t)]` for Brownian motion with `|B_0| = m`.
pub fn elastic_survival(m: f64, t: f64, kappa: f64) -> f64 {
    let s = (2.0 * t).sqrt();
    1.0 - erfc(m / s) + (-m * m / (2.0 * t)).exp() * erfcx((m + kappa * t) / s)
}

/// Kernel of `E_m[g(|B_t|) exp(-kappa L_t)]`, i.e. the half-line heat kernel
/// with Robin condition `g'(0) = kappa g(0)`.
pub fn robin_kernel(m: f64, y: f64, t: f64, kappa: f64) -> f64 {
    let a = m + y;
    let image = if kappa > 0.0 {
        kappa * (-a * a / (2.0 * t)).exp() * erfcx((a + kappa * t) / (2.0 * t).sqrt())
    } else {
        0.0
    };
    heat_kernel(m - y, t) + heat_kernel(a, t) - image
}

/// Transition density of the reflected motion on G.
pub fn reflected_density(u: SignedReal, y: SignedReal, t: f64) -> f64 {
    if u.side != y.side {
        return 0.0;
    }
    heat_kernel(u.magnitude - y.magnitude, t) + heat_kernel(u.magnitude + y.magnitude, t)
}

/// Transition density of the SNOB on G with respect to Lebesgue measure on
/// each side.
pub fn snob_density(u: SignedReal, y: SignedReal, t: f64, kappa: f64) -> f64 {
    let (a, b) = (u.magnitude, y.magnitude);
    let folded = heat_kernel(a - b, t) + heat_kernel(a + b, t);
    let odd = robin_kernel(a, b, t, kappa);
    if u.side == y.side {
        0.5 * (folded + odd)
    } else {
        0.5 * (folded - odd)
    }
}

/// SNOB semigroup by the even/odd split.
///
/// The even part is a whole-line Gaussian integral. The odd part is
///
/// `sgn(u) e^{kappa m} / sqrt(2 pi t) int_m^inf e^{-kappa z} int_0^inf
///   [((z-y+kappa t)/t) e^{-(z-y)^2/2t} + ((z+y-kappa t)/t) e^{-(z+y)^2/2t}]
///   f_odd(y) dy dz`
///
/// with `m = |u|`. The inner-y-first order is only valid for `f_odd` vanishing
/// at infinity, so the limit `c` of `f_odd` is split off first and handled by
/// `c E_m[exp(-kappa L_t)]` in closed form.
pub fn snob_semigroup_quad_tol<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64, kappa: f64, abs_tol: f64) -> Result<Quadrature> {
    check_t(t)?;
    check_kappa(kappa)?;
    let m = u.magnitude;
    let sign = u.side.sign();
    let kinks = f.all_kinks();
    let even = folded_integral(|y| f.even_part(y), m, t, &kinks, 0.25 * abs_tol)?;

    let (fp, fm) = f.far_values();
    let c = 0.5 * (fp - fm);
    let tail = c * elastic_survival(m, t, kappa);

    let sd = t.sqrt();
    let flat = f.flat_beyond();
    let mut zmax = flat.max(m) + WINDOW_SD * sd;
    if kappa > 0.0 {
        zmax = zmax.min(m + 40.0 / kappa);
    }
    let zlen = (zmax - m).max(f64::MIN_POSITIVE);
    let norm = 1.0 / (2.0 * PI * t).sqrt();
    // an error e in the inner integral costs at most e * norm * min(zlen, 1/kappa)
    let weight = if kappa > 0.0 { zlen.min(1.0 / kappa) } else { zlen };
    let inner_tol = 0.25 * abs_tol / (norm * weight.max(1e-300)) * 1e-2;
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let outer = integrate(
        |z| {
            let inner = integrate(
                |y| {
                    let r = f.odd_part(y) - c;
                    if r == 0.0 {
                        return 0.0;
                    }
                    let d = z - y;
                    let s = z + y;
                    ((d + kappa * t) / t * (-d * d / (2.0 * t)).exp() + (s - kappa * t) / t * (-s * s / (2.0 * t)).exp()) * r
                },
                0.0,
                z + WINDOW_SD * sd,
                &{
                    let mut b = kinks.clone();
                    b.push(z);
                    b
                },
                inner_tol,
            );
            match inner {
                Ok(q) => {
                    inner_err = inner_err.max(q.error);
                    (-kappa * (z - m)).exp() * q.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        m,
        zmax,
        &[],
        0.25 * abs_tol / norm,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    let odd = sign * (tail + norm * outer.value);
    Ok(Quadrature {
        value: even.value + odd,
        error: even.error + norm * (outer.error + inner_err * weight),
    })
}

/// SNOB semigroup by quadrature to absolute tolerance 1e-6.
pub fn snob_semigroup_quad<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64, kappa: f64) -> Result<f64> {
    Ok(snob_semigroup_quad_tol(f, u, t, kappa, 1e-6)?.value)
}

/// SNOB semigroup through its transition density on G; used where many
/// evaluations are needed.
pub fn snob_semigroup_kernel<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64, kappa: f64, abs_tol: f64) -> Result<Quadrature> {
    check_t(t)?;
    check_kappa(kappa)?;
    let hi = u.magnitude + WINDOW_SD * t.sqrt();
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for side in [Side::Plus, Side::Minus] {
        let mut b = f.kinks(side);
        b.push(u.magnitude);
        let q = integrate(
            |y| {
                let p = SignedReal { side, magnitude: y };
                snob_density(u, p, t, kappa) * f.eval(p)
            },
            0.0,
            hi,
            &b,
            0.5 * abs_tol,
        )?;
        total.value += q.value;
        total.error += q.error;
    }
    Ok(total)
}

/// Monte Carlo of the SNOB semigroup from exact draws of `(|B_t|, L_t)`.
pub fn snob_semigroup_mc<F: TestFn + ?Sized>(f: &F, u: SignedReal, t: f64, kappa: f64, replicas: usize, seed: u64) -> Result<Estimate> {
    check_t(t)?;
    check_kappa(kappa)?;
    if replicas == 0 {
        return Err(Error::param("replicas", "must be >= 1"));
    }
    let xs = map_replicas(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        let (b, l) = abs_and_local_time(u.magnitude, t, &mut rng);
        let w = 0.5 * (1.0 + (-kappa * l).exp());
        let same = f.eval(SignedReal { side: u.side, magnitude: b });
        let other = f.eval(SignedReal { side: u.side.flip(), magnitude: b });
        w * same + (1.0 - w) * other
    });
    Ok(Estimate::from_samples(&xs))
}

/// Scaling limit of the slow bond walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Bm,
    Reflected,
    Snob { kappa: f64 },
}

impl Limit {
    /// Brownian motion below the critical exponent, the SNOB with
    /// `kappa = 2 alpha` at `beta = 1`, reflection above.
    pub fn for_walk(alpha: f64, beta: crate::lattice_walk::Beta) -> Limit {
        use crate::lattice_walk::Beta;
        match beta {
            Beta::Finite(b) if b < 1.0 => Limit::Bm,
            Beta::Finite(b) if b == 1.0 => Limit::Snob { kappa: 2.0 * alpha },
            _ => Limit::Reflected,
        }
    }

    /// Whether the limit lives on G rather than on R.
    pub fn on_g(&self) -> bool {
        !matches!(self, Limit::Bm)
    }

    /// `E_u[f(Y_t)]`. For the Brownian limit `u` is read as a real number.
    pub fn expectation<F: TestFn + ?Sized>(&self, f: &F, u: SignedReal, t: f64, abs_tol: f64) -> Result<f64> {
        Ok(match *self {
            Limit::Bm => bm_semigroup_tol(f, u.to_real(), t, abs_tol)?.value,
            Limit::Reflected => reflected_semigroup_tol(f, u, t, abs_tol)?.value,
            Limit::Snob { kappa } => snob_semigroup_kernel(f, u, t, kappa, abs_tol)?.value,
        })
    }

    /// Transition density from `u` to `y`; on R the density of `y.to_real()`.
    pub fn density(&self, u: SignedReal, y: SignedReal, t: f64) -> f64 {
        match *self {
            Limit::Bm => heat_kernel(y.to_real() - u.to_real(), t),
            Limit::Reflected => reflected_density(u, y, t),
            Limit::Snob { kappa } => snob_density(u, y, t, kappa),
        }
    }
}

impl std::fmt::Display for Limit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Limit::Bm => write!(f, "bm"),
            Limit::Reflected => write!(f, "reflected"),
            Limit::Snob { kappa } => write!(f, "snob(kappa={kappa})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCheck {
    /// Largest central-difference slope over the probes.
    pub estimate: f64,
    /// `||f||_inf (2 kappa + 3 sqrt(2/pi))`.
    pub bound: f64,
    pub sup_norm: f64,
    pub passed: bool,
}

/// Finite-difference derivative of the SNOB semigroup on both sides, compared
/// with the bound `||f||_inf (2 kappa + 3 sqrt(2/pi))`. `probes` are
/// magnitudes; each must be at least the difference step `1e-2`.
pub fn lipschitz_bound_check<F: TestFn + ?Sized>(f: &F, t: f64, kappa: f64, probes: &[f64], tol: f64) -> Result<LipschitzCheck> {
    let sup = f
        .sup_norm()
        .ok_or_else(|| Error::param("f", "the sup norm must be known for the Lipschitz check"))?;
    let h = 1e-2;
    let mut est = 0.0f64;
    for side in [Side::Plus, Side::Minus] {
        for &m in probes {
            if m < h {
                return Err(Error::param("probes", format!("magnitudes must be >= {h}, got {m}")));
            }
            let a = snob_semigroup_quad_tol(f, SignedReal { side, magnitude: m + h }, t, kappa, 1e-9)?.value;
            let b = snob_semigroup_quad_tol(f, SignedReal { side, magnitude: m - h }, t, kappa, 1e-9)?.value;
            est = est.max(((a - b) / (2.0 * h)).abs());
        }
    }
    let bound = sup * (2.0 * kappa + 3.0 * (2.0 / PI).sqrt());
    Ok(LipschitzCheck {
        estimate: est,
        bound,
        sup_norm: sup,
        passed: est <= bound + tol,
    })
}

/// Default probe magnitudes for the Lipschitz check.
pub fn default_probes() -> Vec<f64> {
    (1..=30).map(|k| 0.1 * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    fn bump() -> impl TestFn {
        RealFn::new(|x: f64| (-(x - 0.5) * (x - 0.5)).exp()).with_flat_beyond(10.0).with_sup(1.0)
    }

    #[test]
    fn bm_constants_and_mean() {
        let one = RealFn::new(|_| 1.0);
        assert!((bm_semigroup(&one, 0.3, 2.0).unwrap() - 1.0).abs() < 1e-10);
        let id = RealFn::new(|x| x);
        assert!((bm_semigroup(&id, 0.3, 2.0).unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn bm_of_indicator_is_normal_cdf() {
        let ind = RealFn::new(|x: f64| if x < 0.2 { 1.0 } else { 0.0 }).with_kinks(&[0.2]);
        let v = bm_semigroup(&ind, -0.4, 1.7).unwrap();
        assert!((v - norm_cdf(0.6 / 1.7f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn reflected_keeps_side() {
        let one = RealFn::new(|_| 1.0);
        assert!((reflected_semigroup(&one, SignedReal::minus(0.2), 0.7).unwrap() - 1.0).abs() < 1e-10);
        let minus_only = SidedFn::new(|_| 0.0, |m: f64| (-m).exp());
        assert_eq!(reflected_semigroup(&minus_only, SignedReal::plus(0.5), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn robin_kernel_limits() {
        let (m, y, t) = (0.4, 0.9, 0.8);
        let refl = heat_kernel(m - y, t) + heat_kernel(m + y, t);
        assert_eq!(robin_kernel(m, y, t, 0.0), refl);
        let absorbed = heat_kernel(m - y, t) - heat_kernel(m + y, t);
        assert!((robin_kernel(m, y, t, 1e8) - absorbed).abs() < 1e-7);
        // total mass of the Robin kernel is the survival weight
        let q = integrate(|y| robin_kernel(m, y, t, 2.0), 0.0, 15.0, &[m], 1e-13).unwrap();
        assert!((q.value - elastic_survival(m, t, 2.0)).abs() < 1e-11);
    }

    #[test]
    fn snob_density_is_a_probability() {
        let u = SignedReal::minus(0.3);
        let mut total = 0.0;
        for side in [Side::Plus, Side::Minus] {
            total += integrate(|y| snob_density(u, SignedReal { side, magnitude: y }, 1.0, 2.0), 0.0, 12.0, &[0.3], 1e-13)
                .unwrap()
                .value;
        }
        assert!((total - 1.0).abs() < 1e-11);
    }

    #[test]
    fn nested_formula_matches_kernel_route() {
        for nf in bl_suite() {
            for &(u, t, k) in &[(SignedReal::plus(0.5), 1.0, 2.0), (SignedReal::minus(0.2), 0.5, 0.7), (SignedReal::plus(0.0), 1.0, 5.0)] {
                let a = snob_semigroup_quad(&*nf.f, u, t, k).unwrap();
                let b = snob_semigroup_kernel(&*nf.f, u, t, k, 1e-10).unwrap().value;
                assert!((a - b).abs() < 1e-6, "{} {u} {t} {k}: {a} vs {b}", nf.name);
            }
        }
    }

    #[test]
    fn kappa_zero_is_reflection() {
        for nf in bl_suite() {
            for &u in &[SignedReal::plus(0.5), SignedReal::minus(1.0)] {
                let a = snob_semigroup_quad(&*nf.f, u, 1.0, 0.0).unwrap();
                let b = reflected_semigroup(&*nf.f, u, 1.0).unwrap();
                assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", nf.name);
            }
        }
    }

    #[test]
    fn large_kappa_is_free_motion() {
        let f = bump();
        for &x in &[0.5, -0.8] {
            let a = snob_semigroup_quad(&f, SignedReal::from_real(x), 1.0, 1e3).unwrap();
            let b = bm_semigroup(&f, x, 1.0).unwrap();
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn mc_of_constant_is_exact() {
        let one = RealFn::new(|_| 1.0);
        let e = snob_semigroup_mc(&one, SignedReal::plus(0.5), 1.0, 2.0, 1000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn mc_agrees_with_quadrature() {
        let f = bump();
        let u = SignedReal::plus(0.5);
        let q = snob_semigroup_quad(&f, u, 1.0, 2.0).unwrap();
        let e = snob_semigroup_mc(&f, u, 1.0, 2.0, 100_000, 17).unwrap();
        assert!(e.agrees(q, 3.0, 1e-6), "{q} vs {e:?}");
        let r = reflected_semigroup(&f, u, 1.0).unwrap();
        let e0 = snob_semigroup_mc(&f, u, 1.0, 0.0, 100_000, 18).unwrap();
        assert!(e0.agrees(r, 3.0, 1e-8), "{r} vs {e0:?}");
    }

    #[test]
    fn even_functions_ignore_the_interface() {
        let f = RealFn::new(|x: f64| (-x * x).exp() + 0.3 * x.abs().min(1.0)).with_kinks(&[-1.0, 0.0, 1.0]).with_flat_beyond(10.0);
        for &x in &[0.1, 0.7, -1.3] {
            let a = snob_semigroup_quad(&f, SignedReal::from_real(x), 0.8, 3.0).unwrap();
            let b = bm_semigroup(&f, x, 0.8).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let c = RealFn::new(|_| 0.7).with_sup(0.7);
        let r = lipschitz_bound_check(&c, 1.0, 2.0, &[0.1, 0.5, 2.0], 1e-3).unwrap();
        assert!(r.estimate < 1e-6, "{r:?}");
        assert!(r.passed);
    }
}
