//! Explicit finite differences for the heat equation on G with the Robin
//! interface condition `d/du rho(0+) = d/du rho(0-) = (kappa/2)(rho(0+) - rho(0-))`.

use std::io::Write;

use super::testfn::TestFn;
use super::WINDOW_SD;
use crate::diffusion::{Side, SignedReal};
use crate::error::{Error, Result};

/// Solution on the nodes `j dx`, `j = 0..=J`, of each side; index 0 holds the
/// interface values at 0+ and 0-.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinSolution {
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub kappa: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl RobinSolution {
    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    /// Linear interpolation between nodes.
    pub fn value(&self, x: SignedReal) -> f64 {
        let v = self.side(x.side);
        let s = x.magnitude / self.dx;
        let j = s.floor() as usize;
        if j + 1 >= v.len() {
            return *v.last().unwrap();
        }
        let w = s - j as f64;
        v[j] * (1.0 - w) + v[j + 1] * w
    }

    /// `rho(0+) - rho(0-)`.
    pub fn interface_jump(&self) -> f64 {
        self.plus[0] - self.minus[0]
    }

    /// The common boundary derivative imposed at 0+ and 0-.
    pub fn interface_flux(&self) -> f64 {
        0.5 * self.kappa * self.interface_jump()
    }

    /// CSV rows `u,value`, minus side first, with 0- written as `-0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,value")?;
        for (j, v) in self.minus.iter().enumerate().rev() {
            let u = j as f64 * self.dx;
            writeln!(w, "-{u},{v}")?;
        }
        for (j, v) in self.plus.iter().enumerate() {
            let u = j as f64 * self.dx;
            writeln!(w, "{u},{v}")?;
        }
        Ok(())
    }
}

/// Largest stable time step for the explicit scheme.
pub fn stability_limit(dx: f64, kappa: f64) -> f64 {
    1.0 / (1.0 / (dx * dx) + kappa / dx)
}

/// Solve up to time `t` from `rho(0) = f`. `dt` defaults to 90% of the
/// stability limit; a step above the limit is allowed but the run aborts with
/// the limit in the error once the solution blows up. The far field is held
/// at `f`'s values at `flat_beyond + 10 sqrt(t)`.
pub fn robin_pde_solve<F: TestFn + ?Sized>(f: &F, t: f64, kappa: f64, dx: f64, dt: Option<f64>) -> Result<RobinSolution> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and > 0, got {t}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::param("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    if !(dx > 0.0) {
        return Err(Error::param("dx", format!("must be > 0, got {dx}")));
    }
    let limit = stability_limit(dx, kappa);
    let dt_req = dt.unwrap_or(0.9 * limit);
    if !(dt_req > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt_req}")));
    }
    let steps = (t / dt_req).ceil() as usize;
    let dt = t / steps as f64;

    let half_width = f.flat_beyond() + WINDOW_SD * t.sqrt();
    let nodes = (half_width / dx).ceil() as usize + 1;
    let init = |side: Side| -> Vec<f64> {
        (0..nodes)
            .map(|j| f.eval(SignedReal { side, magnitude: j as f64 * dx }))
            .collect()
    };
    let mut p = init(Side::Plus);
    let mut m = init(Side::Minus);
    let scale = p.iter().chain(&m).fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    let mut pn = p.clone();
    let mut mn = m.clone();
    let r = 0.5 * dt / (dx * dx);
    let last = nodes - 1;
    for step in 0..steps {
        let g = 0.5 * kappa * (p[0] - m[0]);
        // ghost nodes from the centred boundary derivative
        pn[0] = p[0] + r * (2.0 * p[1] - 2.0 * p[0] - 2.0 * dx * g);
        mn[0] = m[0] + r * (2.0 * m[1] - 2.0 * m[0] + 2.0 * dx * g);
        for j in 1..last {
            pn[j] = p[j] + r * (p[j + 1] - 2.0 * p[j] + p[j - 1]);
            mn[j] = m[j] + r * (m[j + 1] - 2.0 * m[j] + m[j - 1]);
        }
        std::mem::swap(&mut p, &mut pn);
        std::mem::swap(&mut m, &mut mn);
        if step % 64 == 0 || step + 1 == steps {
            let bad = p.iter().chain(&m).any(|v| !v.is_finite() || v.abs() > 1e3 * scale);
            if bad {
                return Err(Error::Unstable { step, dt, dx, kappa, limit });
            }
        }
    }
    Ok(RobinSolution {
        dx,
        dt,
        steps,
        kappa,
        plus: p,
        minus: m,
    })
}
