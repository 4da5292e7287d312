//! Non-linear functional shrinkage sampler.
//!
//! Model, with `Φ` an intercept-free B-spline design matrix and
//! `A(θ) = Φᵀ(I − P_θ)Φ`:
//!
//! ```text
//! y | β, θ₁, σ²      ~ N(θ₁1 + Φβ, σ²I)
//! β | σ², τ², θ      ~ N(0, σ²τ² A(θ)⁻¹)
//! θ₁ ~ N(μ₁, v₁),  σ² ~ IG(a_σ, b_σ),  ω = 1/(1+τ²) ~ Beta(a, b)
//! ```
//!
//! Each iteration draws β, θ₁ and σ² from their conjugate conditionals,
//! τ² by slice sampling (or the half-Cauchy auxiliary ladder), and the
//! non-linear parameters one at a time by Metropolis-Hastings with β
//! integrated out.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::basis::SplineBasis;
use crate::chain::{default_grid, ChainDraws, Recorder};
use crate::data::Dataset;
use crate::distributions::{
    norm_cdf, sample_inverse_gamma, sample_mvn_precision, sample_std_normal, ParamPrior, TruncNormalSpec,
};
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;
use crate::mcmc::{accept, slice_sample_bounded, AcceptanceCounter};
use crate::spaces::{FunctionSpace, Projection, SpaceKind};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

/// Prior on the global shrinkage parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// `ω ~ Beta(a, b)` updated by slice sampling within the τ² bounds.
    /// `b = None` selects `exp(-k log(n) / 2)` with `k` the number of spline
    /// columns.
    OwnSlice { a: f64, b: Option<f64> },
    /// `τ ~ C⁺(0, 1)`, i.e. `a = b = 1/2`, via the inverse-gamma auxiliary
    /// representation; no bounds on τ².
    HalfCauchy,
}

impl Shrinkage {
    pub fn own_slice() -> Self {
        Shrinkage::OwnSlice { a: 0.5, b: None }
    }

    /// `(a, b)` of the Beta prior on ω for a fit with `k` spline columns
    /// and `n` observations.
    pub fn beta_params(&self, k: usize, n: usize) -> (f64, f64) {
        match *self {
            Shrinkage::OwnSlice { a, b } => (a, b.unwrap_or_else(|| (-(k as f64) * (n as f64).ln() / 2.0).exp())),
            Shrinkage::HalfCauchy => (0.5, 0.5),
        }
    }
}

/// Which response vector the marginal likelihood for θ is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalTarget {
    /// `ỹ = y − θ₁1`, conditioning on the current intercept.
    Centered,
    /// The raw response `y`.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlfsConfig {
    /// Total iterations, including burn-in.
    pub n_draws: usize,
    pub burn_in: usize,
    pub n_internal_knots: usize,
    pub shrinkage: Shrinkage,
    pub tau2_bounds: (f64, f64),
    pub intercept_prior: NormalPrior,
    pub sigma2_prior: InvGammaPrior,
    /// Per non-linear parameter; `None` uses the space's defaults.
    pub nonlinear_priors: Option<Vec<ParamPrior>>,
    /// Proposal variances; `None` uses the prior variances.
    pub proposal_var: Option<Vec<f64>>,
    /// Re-estimate proposal variances from the last 100 draws during burn-in.
    pub adaptive_proposal: bool,
    pub marginal_target: MarginalTarget,
    pub grid: Vec<f64>,
}

impl Default for NlfsConfig {
    fn default() -> Self {
        NlfsConfig {
            n_draws: 10_000,
            burn_in: 2_000,
            n_internal_knots: 15,
            shrinkage: Shrinkage::own_slice(),
            tau2_bounds: (0.001, 10.0),
            intercept_prior: NormalPrior { mean: 0.0, var: 20.0 },
            sigma2_prior: InvGammaPrior {
                shape: 0.001,
                scale: 0.001,
            },
            nonlinear_priors: None,
            proposal_var: None,
            adaptive_proposal: false,
            marginal_target: MarginalTarget::Centered,
            grid: default_grid(),
        }
    }
}

impl NlfsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_draws {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the number of draws ({})",
                self.burn_in, self.n_draws
            )));
        }
        let (lo, hi) = self.tau2_bounds;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!("invalid tau2 bounds [{lo}, {hi}]")));
        }
        if !(self.intercept_prior.var > 0.0) {
            return Err(Error::invalid("intercept prior variance must be positive"));
        }
        if !(self.sigma2_prior.shape > 0.0 && self.sigma2_prior.scale > 0.0) {
            return Err(Error::invalid("sigma2 prior needs positive shape and scale"));
        }
        Ok(())
    }
}

/// Spline design at the observed covariates with its Gram matrix.
///
/// When the covariates leave some spline combination unobserved, `ΦᵀΦ` is
/// singular and so is the penalty in that direction. `ridge` is then a
/// small multiple of the mean eigenvalue of `ΦᵀΦ`, added to the penalty so
/// that the prior stays proper; it is zero for well-posed designs.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: Vec<f64>,
    pub phi: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub ridge: f64,
}

impl Design {
    pub fn new(basis: &SplineBasis, x: &[f64]) -> Result<Self> {
        let phi = basis.design_matrix(x)?;
        Ok(Self::from_matrix(x.to_vec(), phi))
    }

    pub fn from_matrix(x: Vec<f64>, phi: DMatrix<f64>) -> Self {
        let gram = phi.tr_mul(&phi);
        let eig = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let ridge = if lo <= 1e-10 * hi {
            1e-3 * gram.trace() / gram.nrows().max(1) as f64
        } else {
            0.0
        };
        Design { x, phi, gram, ridge }
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn k(&self) -> usize {
        self.phi.ncols()
    }
}

/// The tangent-space projection at a given θ and the induced prior
/// precision kernel `A(θ) = Φᵀ(I − P_θ)Φ`.
///
/// `A` has near-null directions wherever splines approximate the tangent
/// space well, so it is kept through the triangular factor `T` of
/// `(I − P_θ)Φ = QT` (with `A = TᵀT`); its log-determinant comes from the
/// diagonal of `T` rather than a Cholesky factorization of `A`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub theta_nl: Vec<f64>,
    pub projection: Projection,
    pub factor: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
}

impl Linearization {
    pub fn new(space: &FunctionSpace, design: &Design, theta_nl: &[f64]) -> Result<Self> {
        let h = space.jacobian(&design.x, theta_nl)?;
        let projection = Projection::from_matrix(&h)?;
        Ok(Self::from_projection(theta_nl.to_vec(), projection, design))
    }

    pub fn from_projection(theta_nl: Vec<f64>, projection: Projection, design: &Design) -> Self {
        let resid = projection.residual_matrix(&design.phi);
        let mut factor = resid.qr().r();
        let mut penalty = factor.tr_mul(&factor);
        if design.ridge > 0.0 {
            for i in 0..penalty.nrows() {
                penalty[(i, i)] += design.ridge;
            }
            if let Some(c) = penalty.clone().cholesky() {
                factor = c.l().transpose();
            }
        }
        Linearization {
            theta_nl,
            projection,
            factor,
            penalty,
        }
    }

    /// `βᵀ Φᵀ(I − P)Φ β`.
    pub fn quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        (&self.factor * beta).norm_squared()
    }

    /// `log det Φᵀ(I − P)Φ`; fails when the penalty is singular.
    pub fn log_det_penalty(&self) -> Result<f64> {
        let d = self.factor.diagonal();
        if d.iter().any(|v| !(v.abs() > 0.0) || !v.is_finite()) {
            return Err(Error::numerical("penalty matrix is singular"));
        }
        Ok(2.0 * d.iter().map(|v| v.abs().ln()).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcState {
    pub beta: DVector<f64>,
    pub theta1: f64,
    pub sigma2: f64,
    pub tau2: f64,
    /// Auxiliary variable of the half-Cauchy ladder.
    pub tau2_aux: f64,
    pub theta_nl: Vec<f64>,
}

impl McmcState {
    pub fn omega(&self) -> f64 {
        1.0 / (1.0 + self.tau2)
    }
}

/// Precision and mean of the β full conditional: precision
/// `σ⁻²(ΦᵀΦ + τ⁻²A)`, mean `(ΦᵀΦ + τ⁻²A)⁻¹ Φᵀ(y − θ₁1)`.
/// Returns `(precision, rhs)` with mean `precision⁻¹ rhs`.
pub fn beta_conditional(
    state: &McmcState,
    design: &Design,
    lin: &Linearization,
    y: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let s2 = state.sigma2;
    let precision = (&design.gram + &lin.penalty / state.tau2) / s2;
    let ytilde = y.add_scalar(-state.theta1);
    let rhs = design.phi.tr_mul(&ytilde) / s2;
    (precision, rhs)
}

pub fn update_beta<R: Rng + ?Sized>(
    state: &McmcState,
    design: &Design,
    lin: &Linearization,
    y: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (precision, rhs) = beta_conditional(state, design, lin, y);
    sample_mvn_precision(&rhs, &precision, rng)
}

/// Mean and variance of the conjugate normal intercept conditional given
/// `y − Φβ`.
pub fn intercept_conditional(state: &McmcState, design: &Design, y: &DVector<f64>, prior: NormalPrior) -> (f64, f64) {
    let n = y.len() as f64;
    let s2 = state.sigma2;
    let resid_sum = (y - &design.phi * &state.beta).sum();
    let var = s2 * prior.var / (n * prior.var + s2);
    (var * (resid_sum / s2 + prior.mean / prior.var), var)
}

pub fn update_intercept<R: Rng + ?Sized>(
    state: &McmcState,
    design: &Design,
    y: &DVector<f64>,
    prior: NormalPrior,
    rng: &mut R,
) -> f64 {
    let (mean, var) = intercept_conditional(state, design, y, prior);
    mean + var.sqrt() * sample_std_normal(rng)
}

/// Residual sum of squares `‖y − θ₁1 − Φβ‖²`.
pub fn rss(state: &McmcState, design: &Design, y: &DVector<f64>) -> f64 {
    let mut r = y - &design.phi * &state.beta;
    r.add_scalar_mut(-state.theta1);
    r.norm_squared()
}

/// `σ² ~ IG((n + k)/2 + a_σ, (RSS + τ⁻² βᵀAβ)/2 + b_σ)`.
pub fn update_sigma2<R: Rng + ?Sized>(
    state: &McmcState,
    design: &Design,
    lin: &Linearization,
    y: &DVector<f64>,
    prior: InvGammaPrior,
    rng: &mut R,
) -> f64 {
    let (shape, scale) = sigma2_conditional(state, design, lin, y, prior);
    sample_inverse_gamma(shape, scale, rng)
}

/// Shape and scale of the inverse-gamma full conditional of σ².
pub fn sigma2_conditional(
    state: &McmcState,
    design: &Design,
    lin: &Linearization,
    y: &DVector<f64>,
    prior: InvGammaPrior,
) -> (f64, f64) {
    let n = design.n() as f64;
    let k = design.k() as f64;
    let shape = 0.5 * (n + k) + prior.shape;
    let scale = 0.5 * (rss(state, design, y) + lin.quadratic_form(&state.beta) / state.tau2) + prior.scale;
    (shape, scale)
}

/// Log density of `τ` (not τ²) under the Beta prior on ω, conditional on
/// the penalty `q = βᵀAβ / σ²`:
/// `(−k/2 + b − ½) log τ² − (a + b) log(1 + τ²) − q / (2τ²)`.
pub fn tau_log_target(tau: f64, k: usize, a: f64, b: f64, q: f64) -> f64 {
    let t2 = tau * tau;
    (-(k as f64) / 2.0 + b - 0.5) * t2.ln() - (a + b) * (1.0 + t2).ln() - 0.5 * q / t2
}

/// One slice-sampling transition for τ² restricted to `bounds`.
pub fn update_tau2_slice<R: Rng + ?Sized>(
    state: &McmcState,
    k: usize,
    quadratic_form: f64,
    beta_prior: (f64, f64),
    bounds: (f64, f64),
    rng: &mut R,
) -> Result<f64> {
    let (a, b) = beta_prior;
    let q = quadratic_form / state.sigma2;
    let tau0 = state.tau2.clamp(bounds.0, bounds.1).sqrt();
    let tau = slice_sample_bounded(
        tau0,
        |t| tau_log_target(t, k, a, b, q),
        bounds.0.sqrt(),
        bounds.1.sqrt(),
        rng,
    )?;
    Ok((tau * tau).clamp(bounds.0, bounds.1))
}

/// Half-Cauchy update of τ² through `τ² | ξ ~ IG(½, 1/ξ)`,
/// `ξ ~ IG(½, 1)`. Returns `(τ², ξ)`.
pub fn update_tau2_halfcauchy<R: Rng + ?Sized>(
    state: &McmcState,
    k: usize,
    quadratic_form: f64,
    rng: &mut R,
) -> (f64, f64) {
    let q = quadratic_form / state.sigma2;
    let tau2 = sample_inverse_gamma(0.5 * (k as f64 + 1.0), 1.0 / state.tau2_aux + 0.5 * q, rng);
    let xi = sample_inverse_gamma(1.0, 1.0 + 1.0 / tau2, rng);
    (tau2, xi)
}

/// Log density of `ỹ ~ N(0, Σ_y)` with
/// `Σ_y = σ²τ² Φ A⁻¹ Φᵀ + σ²I`, evaluated in `O(nk² + k³)` through the
/// Woodbury identity and the matrix determinant lemma.
pub fn log_marginal_likelihood(
    design: &Design,
    lin: &Linearization,
    ytilde: &DVector<f64>,
    sigma2: f64,
    tau2: f64,
) -> Result<f64> {
    let n = design.n() as f64;
    let k = design.k() as f64;
    let m = &design.gram + &lin.penalty / tau2;
    let chol_m = m
        .cholesky()
        .ok_or_else(|| Error::numerical("marginal covariance factorization failed"))?;
    let logdet_m = 2.0 * chol_m.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let b = design.phi.tr_mul(ytilde);
    let mb = chol_m.solve(&b);
    let quad = (ytilde.norm_squared() - b.dot(&mb)) / sigma2;
    let logdet_sigma = n * sigma2.ln() + k * tau2.ln() + logdet_m - lin.log_det_penalty()?;
    let v = -0.5 * (n * LN_2PI + logdet_sigma + quad);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numerical("non-finite marginal likelihood"))
    }
}

/// Candidate for a non-linear parameter: truncated normal on `(0, ∞)` for
/// positive-support parameters, otherwise a normal random walk.
fn propose<R: Rng + ?Sized>(cur: f64, var: f64, positive: bool, rng: &mut R) -> Result<f64> {
    if positive {
        TruncNormalSpec::positive(cur, var)?.sample(rng)
    } else {
        Ok(cur + var.sqrt() * sample_std_normal(rng))
    }
}

/// State of a running NLFS chain.
pub struct NlfsSampler<'a> {
    space: FunctionSpace,
    config: &'a NlfsConfig,
    design: Design,
    y: DVector<f64>,
    priors: Vec<ParamPrior>,
    positive: Vec<bool>,
    proposal_var: Vec<f64>,
    beta_prior: (f64, f64),
    pub state: McmcState,
    pub lin: Linearization,
    counters: Vec<AcceptanceCounter>,
    history: Vec<Vec<f64>>,
    pub numerical_rejections: usize,
}

impl<'a> NlfsSampler<'a> {
    pub fn new(design: Design, y: &[f64], space: FunctionSpace, config: &'a NlfsConfig) -> Result<Self> {
        config.validate()?;
        let n = design.n();
        let k = design.k();
        if n <= k {
            return Err(Error::UnderDetermined { n, k });
        }
        let priors = match &config.nonlinear_priors {
            Some(p) if p.len() == space.n_nonlinear() => p.clone(),
            Some(p) => {
                return Err(Error::invalid(format!(
                    "space {} has {} non-linear parameters but {} priors were given",
                    space.name(),
                    space.n_nonlinear(),
                    p.len()
                )))
            }
            None => space.default_priors(),
        };
        let proposal_var = match &config.proposal_var {
            Some(v) if v.len() == priors.len() && v.iter().all(|&s| s > 0.0) => v.clone(),
            Some(_) => return Err(Error::invalid("proposal variances must be positive, one per parameter")),
            None => priors.iter().map(|p| p.var()).collect(),
        };
        let has_zero = design.x.contains(&0.0);
        let mut positive = Vec::with_capacity(priors.len());
        for (kind, block) in space.members().iter().map(|&m| (m, m.n_nonlinear())) {
            for j in 0..block {
                let idx = positive.len();
                let forced = kind == SpaceKind::Power && has_zero && j == 0;
                positive.push(priors[idx].positive_support() || forced);
            }
        }
        let y = DVector::from_column_slice(y);
        let theta_nl: Vec<f64> = priors
            .iter()
            .zip(&positive)
            .map(|(p, &pos)| {
                let m = p.mean();
                if pos {
                    m.max(1e-3)
                } else {
                    m
                }
            })
            .collect();
        let lin = Linearization::new(&space, &design, &theta_nl)?;
        let (lo, hi) = config.tau2_bounds;
        let (theta1, beta, sigma2) = least_squares_start(&design, &y)?;
        let tau2_start = match config.shrinkage {
            Shrinkage::OwnSlice { .. } => hi,
            Shrinkage::HalfCauchy => hi.max(lo),
        };
        let state = McmcState {
            beta,
            theta1,
            sigma2,
            tau2: tau2_start,
            tau2_aux: 1.0,
            theta_nl,
        };
        let beta_prior = config.shrinkage.beta_params(k, n);
        let counters = vec![AcceptanceCounter::default(); priors.len()];
        Ok(NlfsSampler {
            space,
            config,
            design,
            y,
            priors,
            positive,
            proposal_var,
            beta_prior,
            state,
            lin,
            counters,
            history: Vec::new(),
            numerical_rejections: 0,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn priors(&self) -> &[ParamPrior] {
        &self.priors
    }

    pub fn proposal_var(&self) -> &[f64] {
        &self.proposal_var
    }

    fn marginal_target(&self) -> DVector<f64> {
        match self.config.marginal_target {
            MarginalTarget::Centered => self.y.add_scalar(-self.state.theta1),
            MarginalTarget::Raw => self.y.clone(),
        }
    }

    /// Log marginal likelihood of the current response target at `lin`.
    pub fn log_marginal(&self, lin: &Linearization) -> Result<f64> {
        log_marginal_likelihood(
            &self.design,
            lin,
            &self.marginal_target(),
            self.state.sigma2,
            self.state.tau2,
        )
    }

    /// Log Hastings ratio for moving non-linear parameter `j` to `cand`
    /// from the current state, with the linearization at the candidate.
    /// `current_lml` is the log marginal likelihood at the current state.
    pub fn log_hastings_ratio(&self, j: usize, cand: f64, current_lml: f64) -> Result<(f64, Linearization, f64)> {
        let cur = self.state.theta_nl[j];
        let prior = self.priors[j];
        let prior_delta = prior.ln_pdf(cand) - prior.ln_pdf(cur);
        let mut theta = self.state.theta_nl.clone();
        theta[j] = cand;
        let lin = Linearization::new(&self.space, &self.design, &theta)?;
        let lml = self.log_marginal(&lin)?;
        let corr = if self.positive[j] {
            // q(a | b) = φ((a − b)/sd) / (sd Φ(b / sd)); the kernels cancel
            let sd = self.proposal_var[j].sqrt();
            norm_cdf(cur / sd).ln() - norm_cdf(cand / sd).ln()
        } else {
            0.0
        };
        Ok((lml - current_lml + prior_delta + corr, lin, lml))
    }

    /// Sequential MH updates of every non-linear parameter. Returns the
    /// acceptance flags.
    pub fn update_theta_mh<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<bool>> {
        let mut current_lml = self.log_marginal(&self.lin)?;
        let mut flags = Vec::with_capacity(self.priors.len());
        for j in 0..self.priors.len() {
            let cur = self.state.theta_nl[j];
            let cand = propose(cur, self.proposal_var[j], self.positive[j], rng)?;
            let mut accepted = false;
            if self.priors[j].ln_pdf(cand).is_finite() {
                match self.log_hastings_ratio(j, cand, current_lml) {
                    Ok((log_hr, lin, lml)) => {
                        if accept(log_hr, rng) {
                            self.state.theta_nl[j] = cand;
                            self.lin = lin;
                            current_lml = lml;
                            accepted = true;
                        }
                    }
                    Err(e) if e.is_numerical() || matches!(e, Error::SingularEvaluation { .. }) => {
                        self.numerical_rejections += 1
                    }
                    Err(e) => return Err(e),
                }
            }
            self.counters[j].record(accepted);
            flags.push(accepted);
        }
        Ok(flags)
    }

    /// One full iteration in the order β, θ₁, σ², τ², θ.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.state.beta = update_beta(&self.state, &self.design, &self.lin, &self.y, rng)?;
        self.state.theta1 = update_intercept(&self.state, &self.design, &self.y, self.config.intercept_prior, rng);
        self.state.sigma2 = update_sigma2(
            &self.state,
            &self.design,
            &self.lin,
            &self.y,
            self.config.sigma2_prior,
            rng,
        );
        let quad = self.lin.quadratic_form(&self.state.beta).max(0.0);
        let k = self.design.k();
        match self.config.shrinkage {
            Shrinkage::OwnSlice { .. } => {
                self.state.tau2 =
                    update_tau2_slice(&self.state, k, quad, self.beta_prior, self.config.tau2_bounds, rng)?;
            }
            Shrinkage::HalfCauchy => {
                let (t2, xi) = update_tau2_halfcauchy(&self.state, k, quad, rng);
                self.state.tau2 = t2;
                self.state.tau2_aux = xi;
            }
        }
        self.update_theta_mh(rng)?;
        Ok(())
    }

    fn adapt_proposals(&mut self) {
        self.history.push(self.state.theta_nl.clone());
        if self.history.len() > 100 {
            self.history.remove(0);
        }
        if self.history.len() < 100 {
            return;
        }
        for j in 0..self.proposal_var.len() {
            let n = self.history.len() as f64;
            let m = self.history.iter().map(|h| h[j]).sum::<f64>() / n;
            let v = self.history.iter().map(|h| (h[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            self.proposal_var[j] = v.max(1e-6);
        }
    }

    pub fn acceptance_rates(&self) -> Vec<(String, f64)> {
        self.space
            .nonlinear_names()
            .into_iter()
            .zip(&self.counters)
            .map(|(n, c)| (n.to_string(), c.rate()))
            .collect()
    }

    fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.design.k()).map(|i| format!("beta_{i}")).collect();
        names.extend(["theta1", "sigma2", "tau2"].map(String::from));
        names.extend(self.space.nonlinear_names().into_iter().map(String::from));
        names.push("omega".into());
        names
    }

    fn row(&self) -> Vec<f64> {
        let s = &self.state;
        let mut row: Vec<f64> = s.beta.iter().copied().collect();
        row.extend([s.theta1, s.sigma2, s.tau2]);
        row.extend(&s.theta_nl);
        row.push(s.omega());
        row
    }
}

/// Unpenalized least-squares fit of `y` on `[1, Φ]`, giving starting values
/// for `(θ₁, β, σ²)` that do not presuppose shrinkage.
pub fn least_squares_start(design: &Design, y: &DVector<f64>) -> Result<(f64, DVector<f64>, f64)> {
    let (n, k) = (design.n(), design.k());
    let mut x = DMatrix::zeros(n, k + 1);
    x.column_mut(0).fill(1.0);
    x.columns_mut(1, k).copy_from(&design.phi);
    let coef = PivotedQr::new(&x).solve(y);
    let resid = y - &x * &coef;
    let dof = (n as f64 - k as f64 - 1.0).max(1.0);
    let sigma2 = (resid.norm_squared() / dof).max(1e-10 * y.variance().max(1e-300));
    let sigma2 = if sigma2 > 0.0 { sigma2 } else { 1e-10 };
    Ok((coef[0], coef.rows(1, k).into_owned(), sigma2))
}

pub fn method_name(space: &FunctionSpace, shrinkage: &Shrinkage) -> String {
    let tag = match shrinkage {
        Shrinkage::OwnSlice { .. } => "os",
        Shrinkage::HalfCauchy => "hc",
    };
    format!("nlfs({}),{tag}", space.name())
}

/// Run the NLFS sampler on data with covariates in `[0, 1]`.
pub fn run_nlfs<R: Rng + ?Sized>(
    data: &Dataset,
    space: &FunctionSpace,
    config: &NlfsConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    let basis = SplineBasis::cubic(config.n_internal_knots, true);
    let design = Design::new(&basis, &data.x)?;
    let grid_design = basis.design_matrix(&config.grid)?;
    let mut sampler = NlfsSampler::new(design, &data.y, space.clone(), config)?;
    let mut rec = Recorder::new(
        method_name(space, &config.shrinkage),
        sampler.column_names(),
        config.grid.clone(),
        grid_design,
        sampler.design.phi.clone(),
        config.burn_in,
        config.n_draws - config.burn_in,
    );
    for it in 0..config.n_draws {
        sampler.step(rng).map_err(|e| e.at_iteration(it + 1))?;
        if it < config.burn_in {
            if config.adaptive_proposal {
                sampler.adapt_proposals();
            }
            continue;
        }
        let row = sampler.row();
        rec.push(row, sampler.state.theta1, &sampler.state.beta, None, None);
    }
    Ok(rec.finish(sampler.acceptance_rates(), sampler.numerical_rejections))
}
