//! Monte Carlo summaries and goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, samples: n }
    }

    /// True if `value` lies within `k` standard errors, with `slack` added to
    /// the allowance to cover deterministic error in `value`.
    pub fn agrees(&self, value: f64, k: f64, slack: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + slack
    }
}

/// Asymptotic Kolmogorov distribution tail `P[K > x]`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges too slowly here and the tail is 1
        // to double precision anyway
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> KsResult {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    // Stephens' small-sample correction
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    KsResult { statistic: d, p_value: p }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsResult {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    KsResult { statistic: d, p_value: p }
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit. Cells whose expected count is below
/// `min_expected` are pooled into one cell.
pub fn chi_square(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> ChiSquareResult {
    let total: u64 = observed.iter().sum();
    let nt = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * nt;
        if e < min_expected {
            pool_o += o as f64;
            pool_e += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    // whatever probability the caller did not list joins the pooled cell
    let listed: f64 = expected_probs.iter().sum();
    pool_e += (1.0 - listed).max(0.0) * nt;
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    ChiSquareResult { statistic: stat, dof, p_value: p }
}
