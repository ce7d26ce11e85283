//! Special functions that statrs does not cover in the form we need.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Gaussian heat kernel `exp(-x^2 / 2t) / sqrt(2 pi t)`.
pub fn heat_kernel(x: f64, t: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() * FRAC_1_SQRT_2PI / t.sqrt()
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// The product form overflows for large `x`, so above `x = 12`
/// the Laplace continued fraction is used instead.
pub fn erfcx(x: f64) -> f64 {
    if x <= 12.0 {
        (x * x).exp() * erfc(x)
    } else {
        let mut t = x;
        for k in (1..=100).rev() {
            t = x + 0.5 * k as f64 / t;
        }
        1.0 / (PI.sqrt() * t)
    }
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `exp(-t) I_x(t)` for integer order `x` and `t >= 0`.
///
/// This is the transition probability `P_0[X_t = x]` of the continuous-time
/// simple random walk jumping at total rate 1. The series
/// `sum_k (t/2)^(2k+|x|) / (k! (k+|x|)!)` is summed in log space starting at its
/// largest term and walking outwards until the relative contribution drops
/// below `1e-17`.
pub fn bessel_i_scaled(x: i64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    let nu = x.unsigned_abs() as f64;
    if t == 0.0 {
        return Ok(if x == 0 { 1.0 } else { 0.0 });
    }
    let lh = (t / 2.0).ln();
    let log_term = |k: f64| (2.0 * k + nu) * lh - ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0) - t;
    // ratio of consecutive terms is (t/2)^2 / ((k+1)(k+1+nu)); the mode solves
    // (k+1)(k+1+nu) = t^2/4
    let q = t * t / 4.0;
    let kstar = ((-nu + (nu * nu + 4.0 * q).sqrt()) / 2.0 - 1.0).max(0.0).floor();
    let peak = log_term(kstar);
    let mut sum = 1.0;
    let mut k = kstar + 1.0;
    loop {
        let r = (log_term(k) - peak).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
        k += 1.0;
        if k - kstar > 1e7 {
            return Err(Error::Solver(format!("Bessel series did not converge at t = {t}")));
        }
    }
    let mut k = kstar - 1.0;
    while k >= 0.0 {
        let r = (log_term(k) - peak).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
        k -= 1.0;
    }
    Ok((peak + sum.ln()).exp())
}

/// Normalized Poisson(`lambda`) weights `w[k - lo]` for `k` in `lo..=hi`, with
/// the neglected mass on each side below `rel_tail` times the retained mass.
pub fn poisson_weights(lambda: f64, rel_tail: f64) -> (usize, Vec<f64>) {
    if lambda <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = lambda.floor();
    let mut right = vec![1.0];
    let mut w = 1.0;
    let mut k = mode;
    let mut total = 1.0;
    loop {
        k += 1.0;
        w *= lambda / k;
        right.push(w);
        total += w;
        if w < rel_tail * total * 1e-3 && k > lambda + 1.0 {
            break;
        }
    }
    let mut left = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0.0 {
        w *= k / lambda;
        k -= 1.0;
        left.push(w);
        total += w;
        if w < rel_tail * total * 1e-3 {
            break;
        }
    }
    let lo = mode as usize - left.len();
    let mut out: Vec<f64> = left.into_iter().rev().collect();
    out.extend(right);
    for v in &mut out {
        *v /= total;
    }
    (lo, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_reference_values() {
        // 30-digit references
        let cases = [
            (0.0, 1.0),
            (2.0, 0.255_395_676_310_505_743_865),
            (5.0, 0.110_704_637_733_068_626_370),
            (10.0, 0.056_140_992_743_822_585_857_5),
            (25.0, 0.022_549_572_432_641_358_943_6),
        ];
        for (x, v) in cases {
            assert!((erfcx(x) - v).abs() / v < 1e-13, "x = {x}: {}", erfcx(x));
        }
        let below = erfcx(12.0 - 1e-12);
        let above = erfcx(12.0 + 1e-12);
        assert!((below - above).abs() < 1e-14, "{below} {above}");
        assert!(erfcx(1e6) > 0.0);
    }

    #[test]
    fn bessel_small_argument() {
        // e^{-1} I_0(1), I_0(1) = 1.2660658777520082
        let v = bessel_i_scaled(0, 1.0).unwrap();
        assert!((v - 1.266_065_877_752_008_2 * (-1.0f64).exp()).abs() < 1e-15);
        // e^{-2} I_3(2), I_3(2) = 0.21273995923985267
        let v = bessel_i_scaled(-3, 2.0).unwrap();
        assert!((v - 0.212_739_959_239_852_67 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bessel_large_argument_sums_to_one() {
        let t = 400.0;
        let s: f64 = (-300..=300).map(|x| bessel_i_scaled(x, t).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn poisson_weights_mean() {
        let (lo, w) = poisson_weights(1000.0, 1e-12);
        let s: f64 = w.iter().sum();
        let m: f64 = w.iter().enumerate().map(|(i, p)| (lo + i) as f64 * p).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!((m - 1000.0).abs() < 1e-8);
    }
}
