//! Generic transition kernels shared by the samplers.

use rand::Rng;

use crate::error::{Error, Result};

/// One univariate slice-sampling transition on a bounded interval using the
/// shrinkage procedure. The initial bracket is the whole interval, so no
/// stepping out is needed. `log_density` may return `-inf` but must be finite
/// at `x0`.
pub fn slice_sample_bounded<R, F>(x0: f64, mut log_density: F, lo: f64, hi: f64, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let g0 = log_density(x0);
    if !g0.is_finite() {
        return Err(Error::numerical(format!(
            "slice sampler: log density at current point {x0} is {g0}"
        )));
    }
    // auxiliary level below the current density, on the log scale
    let level = g0 + (1.0 - rng.random::<f64>()).ln();
    let (mut l, mut r) = (lo, hi);
    for _ in 0..200 {
        let x1 = l + rng.random::<f64>() * (r - l);
        if log_density(x1) > level {
            return Ok(x1);
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
    }
    // the bracket has collapsed onto x0 to machine precision
    Ok(x0)
}

/// Metropolis acceptance test on the log scale.
pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || (1.0 - rng.random::<f64>()).ln() < log_ratio
}

/// Per-parameter acceptance bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct AcceptanceCounter {
    pub proposed: usize,
    pub accepted: usize,
}

impl AcceptanceCounter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += usize::from(accepted);
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Random-walk step sizes tuned during burn-in toward a target acceptance
/// rate, then frozen.
#[derive(Debug, Clone)]
pub struct StepTuner {
    pub scales: Vec<f64>,
    window: Vec<AcceptanceCounter>,
    target: f64,
    batch: usize,
}

impl StepTuner {
    pub fn new(scales: Vec<f64>) -> Self {
        let window = vec![AcceptanceCounter::default(); scales.len()];
        StepTuner {
            scales,
            window,
            target: 0.35,
            batch: 50,
        }
    }

    pub fn record(&mut self, j: usize, accepted: bool, tuning: bool) {
        if !tuning {
            return;
        }
        let w = &mut self.window[j];
        w.record(accepted);
        if w.proposed == self.batch {
            let rate = w.rate();
            let factor = if rate > self.target { 1.25 } else { 0.8 };
            self.scales[j] = (self.scales[j] * factor).clamp(1e-8, 1e3);
            *w = AcceptanceCounter::default();
        }
    }
}
