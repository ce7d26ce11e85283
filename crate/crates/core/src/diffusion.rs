//! Brownian motion with its local time at zero, reflected Brownian motion and
//! the snapping out Brownian motion (SNOB) on G = (-inf, 0-] u [0+, inf).
//!
//! Local time `L` is the symmetric (Tanaka) local time at zero, normalized so
//! that `E_0[L_t] = E|B_t| = sqrt(2t/pi)`.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{replica_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// A point of G. `(Plus, 0)` and `(Minus, 0)` are the distinct points 0+ and 0-.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedReal {
    pub side: Side,
    pub magnitude: f64,
}

impl SignedReal {
    pub fn new(side: Side, magnitude: f64) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::param("magnitude", format!("must be finite and >= 0, got {magnitude}")));
        }
        Ok(SignedReal { side, magnitude })
    }

    pub fn plus(magnitude: f64) -> Self {
        SignedReal { side: Side::Plus, magnitude }
    }

    pub fn minus(magnitude: f64) -> Self {
        SignedReal { side: Side::Minus, magnitude }
    }

    /// Embedding of R into G with 0 sent to 0+.
    pub fn from_real(x: f64) -> Self {
        if x >= 0.0 {
            SignedReal::plus(x)
        } else {
            SignedReal::minus(-x)
        }
    }

    /// Projection G -> R, identifying 0+ and 0-.
    pub fn to_real(self) -> f64 {
        self.side.sign() * self.magnitude
    }
}

impl fmt::Display for SignedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Plus => "+",
            Side::Minus => "-",
        };
        write!(f, "{s}{}", self.magnitude)
    }
}

/// Brownian skeleton `values[k] = B(k dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimeMethod {
    /// `(1/2eps) * time spent in (-eps, eps)`, counted on the grid.
    Window,
    /// `|B_t| - |B_0| - sum sgn(B_k) (B_{k+1} - B_k)`.
    Tanaka,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeEstimate {
    pub value: f64,
    pub method: LocalTimeMethod,
    pub dt: f64,
    pub eps: f64,
}

/// Brownian motion from `u` sampled exactly at `round(t/dt)` equally spaced
/// times; the step is adjusted so the last point sits at `t`.
pub fn sample_bm(u: f64, t: f64, dt: f64, seed: u64) -> Result<GridPath> {
    let mut rng = replica_rng(seed, 0);
    sample_bm_with(u, t, dt, &mut rng)
}

pub fn sample_bm_with(u: f64, t: f64, dt: f64, rng: &mut Rng) -> Result<GridPath> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if !(dt > 0.0 && dt <= t) {
        return Err(Error::param("dt", format!("must lie in (0, t], got {dt}")));
    }
    let steps = ((t / dt).round() as usize).max(1);
    let dt = t / steps as f64;
    let sd = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut b = u;
    values.push(b);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        b += sd * z;
        values.push(b);
    }
    Ok(GridPath { dt, values })
}

/// Local time at zero of a grid path.
pub fn local_time_zero(path: &GridPath, method: LocalTimeMethod, eps: f64) -> Result<LocalTimeEstimate> {
    let value = match method {
        LocalTimeMethod::Window => {
            if !(eps > 0.0) {
                return Err(Error::param("eps", format!("must be > 0, got {eps}")));
            }
            let k = path.values[..path.values.len() - 1].iter().filter(|b| b.abs() < eps).count();
            k as f64 * path.dt / (2.0 * eps)
        }
        LocalTimeMethod::Tanaka => {
            // each summand |b| - |a| - sgn(a)(b - a) is >= 0 by convexity
            path.values
                .windows(2)
                .map(|w| {
                    let s = if w[0] > 0.0 {
                        1.0
                    } else if w[0] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    w[1].abs() - w[0].abs() - s * (w[1] - w[0])
                })
                .sum()
        }
    };
    Ok(LocalTimeEstimate {
        value: value.max(0.0),
        method,
        dt: path.dt,
        eps,
    })
}

/// Exact joint draw of `(|B_s|, L(0, s))` for a Brownian motion with
/// `|B_0| = m`.
///
/// Before the first hit of zero (time `m^2 / Z^2`) the local time is zero and
/// `B` is a Brownian motion killed at 0, sampled by rejection from `N(m, s)`.
/// After the hit, Levy's identity gives `(|B|, L) = (M - W, M)` with `M` the
/// running maximum of a fresh Brownian motion `W`, and `M` given `W_r` is
/// drawn by inverting the bridge maximum law.
pub fn abs_and_local_time(m: f64, s: f64, rng: &mut Rng) -> (f64, f64) {
    let tau = if m > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        m * m / (z * z)
    } else {
        0.0
    };
    if tau >= s {
        let sd = s.sqrt();
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let y = m + sd * z;
            if y > 0.0 && rng.random::<f64>() >= (-2.0 * m * y / s).exp() {
                return (y, 0.0);
            }
        }
    }
    let r = s - tau;
    let z: f64 = StandardNormal.sample(rng);
    let w = r.sqrt() * z;
    let e: f64 = Exp1.sample(rng);
    let max = 0.5 * (w + (w * w + 2.0 * r * e).sqrt());
    ((max - w).max(0.0), max)
}

/// How a SNOB is assembled from elastic pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnobConstruction {
    /// Kill at local-time thresholds of the faster elastic motion, restart on
    /// a fair-coin side.
    Coin2k,
    /// Kill at local-time thresholds of the slower elastic motion, always
    /// restart on the opposite side.
    SwitchK,
}

impl SnobConstruction {
    /// Kill rate per unit of `L`. A `Coin2k` kill flips the side with
    /// probability 1/2, so in both constructions the side changes at rate
    /// `kappa/2` per unit of `L` and `E[sign] = exp(-kappa L)`, as the
    /// semigroup requires.
    fn kill_rate(self, kappa: f64) -> f64 {
        match self {
            SnobConstruction::Coin2k => kappa,
            SnobConstruction::SwitchK => 0.5 * kappa,
        }
    }
}

/// SNOB endpoint with separate streams for the path and for the kill
/// thresholds, so that runs with different `kappa` share the path and the
/// uniforms behind the thresholds.
pub fn snob_endpoint(
    u: SignedReal,
    t: f64,
    dt: f64,
    kappa: f64,
    construction: SnobConstruction,
    path_rng: &mut Rng,
    kill_rng: &mut Rng,
) -> SignedReal {
    let steps = ((t / dt).round() as usize).max(1);
    let h = t / steps as f64;
    let rate = construction.kill_rate(kappa);
    let mut side = u.side;
    let mut m = u.magnitude;
    let mut local = 0.0;
    let mut next_kill = if rate > 0.0 {
        let e: f64 = Exp1.sample(kill_rng);
        e / rate
    } else {
        f64::INFINITY
    };
    for _ in 0..steps {
        let (m1, dl) = abs_and_local_time(m, h, path_rng);
        m = m1;
        local += dl;
        // the flip lands on the grid point after the crossing; only the side
        // is affected, so the endpoint law does not depend on dt
        while local >= next_kill {
            side = match construction {
                SnobConstruction::SwitchK => side.flip(),
                SnobConstruction::Coin2k => {
                    if kill_rng.random::<bool>() {
                        Side::Plus
                    } else {
                        Side::Minus
                    }
                }
            };
            let e: f64 = Exp1.sample(kill_rng);
            next_kill += e / rate;
        }
    }
    SignedReal { side, magnitude: m }
}

/// Terminal state of the SNOB with parameter `kappa` started at `u`.
pub fn sample_snob(u: SignedReal, t: f64, dt: f64, kappa: f64, seed: u64, construction: SnobConstruction) -> Result<SignedReal> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if !(dt > 0.0 && dt <= t) {
        return Err(Error::param("dt", format!("must lie in (0, t], got {dt}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::param("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    let mut path_rng = replica_rng(seed, 0);
    let mut kill_rng = replica_rng(seed, 1);
    Ok(snob_endpoint(u, t, dt, kappa, construction, &mut path_rng, &mut kill_rng))
}

/// CSV rows `side,magnitude`.
pub fn write_endpoints_csv<W: std::io::Write>(points: &[SignedReal], mut w: W) -> std::io::Result<()> {
    writeln!(w, "side,magnitude")?;
    for p in points {
        let s = match p.side {
            Side::Plus => "plus",
            Side::Minus => "minus",
        };
        writeln!(w, "{s},{}", p.magnitude)?;
    }
    Ok(())
}
