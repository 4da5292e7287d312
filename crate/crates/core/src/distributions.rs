//! Sampling and log-density primitives used by the Gibbs and MH updates.
//!
//! Every sampler takes an explicit RNG. Reproducible parallel work derives
//! independent ChaCha streams from a base seed with [`child_seed`], so a
//! replicate's draws never depend on which thread ran it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

pub type ChainRng = ChaCha8Rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a seed for a sub-task identified by `path` (scenario index,
/// replicate number, ...). Distinct paths give statistically independent
/// streams; the mapping is a pure function of its inputs.
pub fn child_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0xA5A5_A5A5)))
    })
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate for large `z`.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormalSpec {
    pub mu: f64,
    pub var: f64,
    pub lower: f64,
}

impl TruncNormalSpec {
    pub fn new(mu: f64, var: f64, lower: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) || !mu.is_finite() || lower.is_nan() {
            return Err(Error::invalid(format!(
                "truncated normal needs finite mean and positive variance, got N({mu}, {var})"
            )));
        }
        Ok(TruncNormalSpec { mu, var, lower })
    }

    /// Positive-support normal `N₊(mu, var)`.
    pub fn positive(mu: f64, var: f64) -> Result<Self> {
        Self::new(mu, var, 0.0)
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }

    /// Mass of the untruncated normal above `lower`.
    pub fn upper_mass(&self) -> f64 {
        norm_sf((self.lower - self.mu) / self.sd())
    }

    /// Inverse-CDF draw: with `l = P(X < lower)`, draw `u ~ U[l, 1]` and
    /// return the normal quantile of `u`. The uniform is drawn on the upper
    /// tail scale `1 - u` so that truncation points far in the right tail
    /// keep full precision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let mass = self.upper_mass();
        if !(mass > 1e-300) {
            return Err(Error::DegenerateTruncation {
                mu: self.mu,
                var: self.var,
                lower: self.lower,
            });
        }
        // v ~ U(0, mass]; x = mu + sd * Q(1 - v)
        let v = mass * (1.0 - rng.random::<f64>());
        let x = self.mu - self.sd() * norm_quantile(v);
        Ok(x.max(self.lower))
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lower {
            return f64::NEG_INFINITY;
        }
        normal_ln_pdf(x, self.mu, self.var) - self.upper_mass().ln()
    }

    /// Mean of the truncated distribution.
    pub fn mean(&self) -> f64 {
        let sd = self.sd();
        let alpha = (self.lower - self.mu) / sd;
        let phi = (-0.5 * alpha * alpha).exp() / (2.0 * std::f64::consts::PI).sqrt();
        self.mu + sd * phi / norm_sf(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalSpec {
    pub log_mu: f64,
    pub log_var: f64,
}

impl LogNormalSpec {
    pub fn new(log_mu: f64, log_var: f64) -> Result<Self> {
        if !(log_var > 0.0) || !log_mu.is_finite() {
            return Err(Error::invalid(
                "log-normal needs finite log-mean and positive log-variance",
            ));
        }
        Ok(LogNormalSpec { log_mu, log_var })
    }

    /// Moment matching: the log-normal with the given mean and variance.
    pub fn from_moments(mean: f64, var: f64) -> Self {
        let log_var = (1.0 + var / (mean * mean)).ln();
        LogNormalSpec {
            log_mu: mean.ln() - 0.5 * log_var,
            log_var,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.log_mu + 0.5 * self.log_var).exp()
    }

    pub fn var(&self) -> f64 {
        (self.log_var.exp() - 1.0) * (2.0 * self.log_mu + self.log_var).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        normal_ln_pdf(x.ln(), self.log_mu, self.log_var) - x.ln()
    }
}

/// Prior on one non-linear parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamPrior {
    Normal { mean: f64, var: f64 },
    TruncNormal(TruncNormalSpec),
    LogNormal(LogNormalSpec),
}

impl ParamPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            ParamPrior::Normal { mean, var } => normal_ln_pdf(x, *mean, *var),
            ParamPrior::TruncNormal(t) => t.ln_pdf(x),
            ParamPrior::LogNormal(l) => l.ln_pdf(x),
        }
    }

    pub fn positive_support(&self) -> bool {
        match self {
            ParamPrior::Normal { .. } => false,
            ParamPrior::TruncNormal(t) => t.lower >= 0.0,
            ParamPrior::LogNormal(_) => true,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ParamPrior::Normal { mean, .. } => *mean,
            ParamPrior::TruncNormal(t) => t.mean(),
            ParamPrior::LogNormal(l) => l.mean(),
        }
    }

    /// Variance of the (untruncated) prior; used as the default proposal
    /// variance.
    pub fn var(&self) -> f64 {
        match self {
            ParamPrior::Normal { var, .. } => *var,
            ParamPrior::TruncNormal(t) => t.var,
            ParamPrior::LogNormal(l) => l.var(),
        }
    }
}

/// `IG(shape, scale)` through the reciprocal of a gamma variate. Tiny shapes
/// are drawn on the log scale and clamped to the finite positive range.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && scale > 0.0);
    let ln_g = if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    };
    (scale.ln() - ln_g).exp().clamp(f64::MIN_POSITIVE, f64::MAX)
}

pub fn inverse_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from `N(Q⁻¹ b, Q⁻¹)` for a symmetric positive definite precision `Q`.
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    rhs: &DVector<f64>,
    precision: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = precision.clone().cholesky().ok_or_else(|| {
        let diag_min = precision.diagonal().min();
        let diag_max = precision.diagonal().max();
        Error::numerical(format!(
            "precision matrix ({0}x{0}) is not positive definite; diagonal range [{diag_min:e}, {diag_max:e}]",
            precision.nrows()
        ))
    })?;
    let mean = chol.solve(rhs);
    let z = DVector::from_fn(rhs.len(), |_, _| sample_std_normal(rng));
    // x = mean + L⁻ᵀ z has covariance (L Lᵀ)⁻¹
    let dev = chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::numerical("triangular solve failed"))?;
    let x = mean + dev;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::numerical("non-finite multivariate normal draw"))
    }
}
