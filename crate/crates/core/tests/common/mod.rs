//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Kolmogorov–Smirnov 1% critical value for `n` samples (asymptotic).
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// One-sample KS statistic against a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic and its 1% critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    (d, 1.628 * ((n + m) / (n * m)).sqrt())
}

/// Numerical CDF of an unnormalized log density on `[lo, hi]`, tabulated on
/// `m` cells by the midpoint rule and interpolated linearly.
pub struct GridCdf {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> Self {
        let h = (hi - lo) / m as f64;
        let logs: Vec<f64> = (0..m).map(|i| log_density(lo + (i as f64 + 0.5) * h)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = vec![0.0; m + 1];
        for i in 0..m {
            cum[i + 1] = cum[i] + (logs[i] - top).exp();
        }
        let total = cum[m];
        cum.iter_mut().for_each(|c| *c /= total);
        GridCdf { lo, h, cum }
    }

    pub fn from_masses(lo: f64, hi: f64, masses: &[f64]) -> Self {
        let m = masses.len();
        let mut cum = vec![0.0; m + 1];
        for i in 0..m {
            cum[i + 1] = cum[i] + masses[i];
        }
        let total = cum[m];
        cum.iter_mut().for_each(|c| *c /= total);
        GridCdf {
            lo,
            h: (hi - lo) / m as f64,
            cum,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i >= self.cum.len() - 1 {
            return 1.0;
        }
        let f = t - i as f64;
        self.cum[i] + f * (self.cum[i + 1] - self.cum[i])
    }
}

/// Dense log density of `N(0, Σ)` at `y`.
pub fn mvn_ln_pdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let chol = cov.clone().cholesky().expect("covariance must be SPD");
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let q = y.dot(&chol.solve(y));
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet + q)
}

/// Dense orthogonal projector onto the column space of a full-rank `h`.
pub fn dense_projector(h: &DMatrix<f64>) -> DMatrix<f64> {
    let hth = h.tr_mul(h).try_inverse().expect("full column rank");
    h * hth * h.transpose()
}

/// Central finite-difference derivative.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
