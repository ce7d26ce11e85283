//! Bounded test functions on R and on G.

use crate::diffusion::{Side, SignedReal};
use crate::error::{Error, Result};

/// A bounded function on G, evaluated at `(side, magnitude)`.
///
/// A function on R is read on G through `x -> f(x.to_real())`, so it takes the
/// same value at 0+ and 0-.
pub trait TestFn: Sync {
    fn eval(&self, x: SignedReal) -> f64;

    /// Magnitudes on `side` where the function may fail to be smooth.
    fn kinks(&self, _side: Side) -> Vec<f64> {
        Vec::new()
    }

    /// Magnitude beyond which the function sits at its limits at infinity on
    /// both sides (to within quadrature tolerance).
    fn flat_beyond(&self) -> f64 {
        30.0
    }

    /// Limits at infinity on the plus and on the minus side.
    fn far_values(&self) -> (f64, f64) {
        let r = self.flat_beyond() + 1.0;
        (self.eval(SignedReal::plus(r)), self.eval(SignedReal::minus(r)))
    }

    fn sup_norm(&self) -> Option<f64> {
        None
    }

    /// Evaluate at a real point, with 0 read as 0+.
    fn at(&self, x: f64) -> f64 {
        self.eval(SignedReal::from_real(x))
    }

    /// Even part `(f(0+ + y) + f(0- - y)) / 2` at magnitude `y >= 0`.
    fn even_part(&self, y: f64) -> f64 {
        0.5 * (self.eval(SignedReal::plus(y)) + self.eval(SignedReal::minus(y)))
    }

    /// Odd part at magnitude `y >= 0`; the value at `-y` is its negative.
    fn odd_part(&self, y: f64) -> f64 {
        0.5 * (self.eval(SignedReal::plus(y)) - self.eval(SignedReal::minus(y)))
    }

    /// Kinks of both sides merged.
    fn all_kinks(&self) -> Vec<f64> {
        let mut k = self.kinks(Side::Plus);
        k.extend(self.kinks(Side::Minus));
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}

/// Optional metadata shared by the closure wrappers.
#[derive(Debug, Clone, Default)]
struct Meta {
    kinks: Vec<f64>,
    flat_beyond: Option<f64>,
    sup: Option<f64>,
}

/// A function on R.
pub struct RealFn<F> {
    f: F,
    meta: Meta,
}

impl<F: Fn(f64) -> f64 + Sync> RealFn<F> {
    pub fn new(f: F) -> Self {
        RealFn { f, meta: Meta::default() }
    }

    /// Kinks as real positions.
    pub fn with_kinks(mut self, kinks: &[f64]) -> Self {
        self.meta.kinks = kinks.to_vec();
        self
    }

    pub fn with_flat_beyond(mut self, r: f64) -> Self {
        self.meta.flat_beyond = Some(r);
        self
    }

    pub fn with_sup(mut self, s: f64) -> Self {
        self.meta.sup = Some(s);
        self
    }
}

impl<F: Fn(f64) -> f64 + Sync> TestFn for RealFn<F> {
    fn eval(&self, x: SignedReal) -> f64 {
        (self.f)(x.to_real())
    }

    fn kinks(&self, side: Side) -> Vec<f64> {
        let s = side.sign();
        let mut k: Vec<f64> = self.meta.kinks.iter().filter(|&&x| x * s >= 0.0).map(|x| x.abs()).collect();
        k.push(0.0);
        k
    }

    fn flat_beyond(&self) -> f64 {
        self.meta.flat_beyond.unwrap_or(30.0)
    }

    fn sup_norm(&self) -> Option<f64> {
        self.meta.sup
    }
}

/// A function on G given by one function of the magnitude per side.
pub struct SidedFn<P, M> {
    plus: P,
    minus: M,
    meta: Meta,
}

impl<P: Fn(f64) -> f64 + Sync, M: Fn(f64) -> f64 + Sync> SidedFn<P, M> {
    pub fn new(plus: P, minus: M) -> Self {
        SidedFn { plus, minus, meta: Meta::default() }
    }

    /// Kinks as magnitudes, applied to both sides.
    pub fn with_kinks(mut self, kinks: &[f64]) -> Self {
        self.meta.kinks = kinks.to_vec();
        self
    }

    pub fn with_flat_beyond(mut self, r: f64) -> Self {
        self.meta.flat_beyond = Some(r);
        self
    }

    pub fn with_sup(mut self, s: f64) -> Self {
        self.meta.sup = Some(s);
        self
    }
}

impl<P: Fn(f64) -> f64 + Sync, M: Fn(f64) -> f64 + Sync> TestFn for SidedFn<P, M> {
    fn eval(&self, x: SignedReal) -> f64 {
        match x.side {
            Side::Plus => (self.plus)(x.magnitude),
            Side::Minus => (self.minus)(x.magnitude),
        }
    }

    fn kinks(&self, _side: Side) -> Vec<f64> {
        self.meta.kinks.clone()
    }

    fn flat_beyond(&self) -> f64 {
        self.meta.flat_beyond.unwrap_or(30.0)
    }

    fn sup_norm(&self) -> Option<f64> {
        self.meta.sup
    }
}

/// Piecewise linear function on R, constant beyond its end nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFn {
    nodes: Vec<f64>,
    values: Vec<f64>,
    sup: f64,
    lip: f64,
}

impl PiecewiseLinearFn {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() {
            return Err(Error::param("nodes", "need as many values as nodes, and at least one"));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("nodes", "must be strictly increasing"));
        }
        if values.iter().chain(&nodes).any(|v| !v.is_finite()) {
            return Err(Error::param("values", "must be finite"));
        }
        let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lip = nodes
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        Ok(PiecewiseLinearFn { nodes, values, sup, lip })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_tail(&self) -> f64 {
        self.values[0]
    }

    pub fn right_tail(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.nodes.partition_point(|&a| a <= x);
        if k == 0 {
            return self.values[0];
        }
        if k == self.nodes.len() {
            return *self.values.last().unwrap();
        }
        let (a, b) = (self.nodes[k - 1], self.nodes[k]);
        let s = (x - a) / (b - a);
        self.values[k - 1] * (1.0 - s) + self.values[k] * s
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn lip_seminorm(&self) -> f64 {
        self.lip
    }

    pub fn bl_norm(&self) -> f64 {
        self.sup + self.lip
    }
}

impl TestFn for PiecewiseLinearFn {
    fn eval(&self, x: SignedReal) -> f64 {
        self.value(x.to_real())
    }

    fn kinks(&self, side: Side) -> Vec<f64> {
        let s = side.sign();
        let mut k: Vec<f64> = self.nodes.iter().filter(|&&x| x * s >= 0.0).map(|x| x.abs()).collect();
        k.push(0.0);
        k
    }

    fn flat_beyond(&self) -> f64 {
        self.nodes[0].abs().max(self.nodes.last().unwrap().abs())
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(self.sup)
    }
}

/// Piecewise linear function on G: one function of the magnitude per side,
/// with no constraint linking 0+ and 0-.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearG {
    pub plus: PiecewiseLinearFn,
    pub minus: PiecewiseLinearFn,
}

impl PiecewiseLinearG {
    pub fn new(plus: PiecewiseLinearFn, minus: PiecewiseLinearFn) -> Result<Self> {
        if plus.nodes()[0] < 0.0 || minus.nodes()[0] < 0.0 {
            return Err(Error::param("nodes", "magnitudes on G must be >= 0"));
        }
        Ok(PiecewiseLinearG { plus, minus })
    }

    pub fn sup(&self) -> f64 {
        self.plus.sup().max(self.minus.sup())
    }

    pub fn lip_seminorm(&self) -> f64 {
        self.plus.lip_seminorm().max(self.minus.lip_seminorm())
    }

    pub fn bl_norm(&self) -> f64 {
        self.sup() + self.lip_seminorm()
    }
}

impl TestFn for PiecewiseLinearG {
    fn eval(&self, x: SignedReal) -> f64 {
        match x.side {
            Side::Plus => self.plus.value(x.magnitude),
            Side::Minus => self.minus.value(x.magnitude),
        }
    }

    fn kinks(&self, side: Side) -> Vec<f64> {
        match side {
            Side::Plus => self.plus.nodes().to_vec(),
            Side::Minus => self.minus.nodes().to_vec(),
        }
    }

    fn flat_beyond(&self) -> f64 {
        self.plus.nodes().last().unwrap().max(*self.minus.nodes().last().unwrap())
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(self.sup())
    }
}

/// Named test function, as used by the verification suites.
pub struct NamedFn {
    pub name: &'static str,
    pub f: Box<dyn TestFn + Send>,
}

/// Five bounded Lipschitz functions on G: smooth and kinked, continuous across
/// 0 and not.
pub fn bl_suite() -> Vec<NamedFn> {
    let hat_g = PiecewiseLinearG::new(
        PiecewiseLinearFn::new(vec![0.0, 0.5, 1.5], vec![0.2, 1.0, 0.0]).unwrap(),
        PiecewiseLinearFn::new(vec![0.0, 1.0], vec![-0.5, 0.0]).unwrap(),
    )
    .unwrap();
    vec![
        NamedFn {
            name: "gaussian_bump",
            f: Box::new(
                RealFn::new(|x: f64| (-(x - 0.5) * (x - 0.5)).exp())
                    .with_flat_beyond(10.0)
                    .with_sup(1.0),
            ),
        },
        NamedFn {
            name: "clamped_identity",
            f: Box::new(
                RealFn::new(|x: f64| x.clamp(-1.0, 1.0))
                    .with_kinks(&[-1.0, 1.0])
                    .with_flat_beyond(1.0)
                    .with_sup(1.0),
            ),
        },
        NamedFn {
            name: "split_sides",
            f: Box::new(
                SidedFn::new(|m: f64| (m.cos() + 1.0) * (-0.3 * m * m).exp(), |m: f64| -0.5 * (-m).exp())
                    .with_flat_beyond(20.0)
                    .with_sup(2.0),
            ),
        },
        NamedFn { name: "hat_on_g", f: Box::new(hat_g) },
        NamedFn {
            name: "soft_step",
            f: Box::new(RealFn::new(|x: f64| (2.0 * x).tanh()).with_flat_beyond(12.0).with_sup(1.0)),
        },
    ]
}
