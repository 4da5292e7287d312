//! Comparison fitters: Bayesian B-spline, P-spline, parametric Hill/power
//! and parametric model plus a horseshoe B-spline.
//!
//! Every spline baseline uses the intercept-free cubic basis with a separate
//! intercept, and draws the intercept jointly with the spline coefficients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::basis::SplineBasis;
use crate::chain::{default_grid, ChainDraws, Recorder};
use crate::data::Dataset;
use crate::distributions::{
    sample_inverse_gamma, sample_mvn_precision, sample_std_normal, ParamPrior, TruncNormalSpec,
};
use crate::error::{Error, Result};
use crate::mcmc::{accept, AcceptanceCounter, StepTuner};
use crate::sampler::{InvGammaPrior, NormalPrior};
use crate::spaces::SpaceKind;

/// Settings shared by all baseline fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub n_draws: usize,
    pub burn_in: usize,
    pub n_internal_knots: usize,
    pub intercept_prior: NormalPrior,
    pub sigma2_prior: InvGammaPrior,
    /// Scale prior of the B-spline ridge, `λ² ~ IG`.
    pub ridge_prior: InvGammaPrior,
    /// Smoothing prior of the P-spline, `τ² ~ IG`.
    pub smoothing_prior: InvGammaPrior,
    /// Scaling prior `θ₂` of the parametric fits.
    pub scale_prior: NormalPrior,
    /// `log σ² ~ N` for the fully parametric fits.
    pub log_sigma2_prior: NormalPrior,
    pub grid: Vec<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_draws: 10_000,
            burn_in: 2_000,
            n_internal_knots: 15,
            intercept_prior: NormalPrior { mean: 0.0, var: 1.0 },
            sigma2_prior: InvGammaPrior {
                shape: 0.001,
                scale: 0.001,
            },
            ridge_prior: InvGammaPrior {
                shape: 0.001,
                scale: 0.001,
            },
            smoothing_prior: InvGammaPrior {
                shape: 1.0,
                scale: 0.005,
            },
            scale_prior: NormalPrior { mean: 1.5, var: 2.0 },
            log_sigma2_prior: NormalPrior { mean: -1.75, var: 1.0 },
            grid: default_grid(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_draws {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the number of draws ({})",
                self.burn_in, self.n_draws
            )));
        }
        if !(self.intercept_prior.var > 0.0 && self.scale_prior.var > 0.0 && self.log_sigma2_prior.var > 0.0) {
            return Err(Error::invalid("prior variances must be positive"));
        }
        for p in [self.sigma2_prior, self.ridge_prior, self.smoothing_prior] {
            if !(p.shape > 0.0 && p.scale > 0.0) {
                return Err(Error::invalid("inverse-gamma hyperparameters must be positive"));
            }
        }
        Ok(())
    }
}

/// Second-order difference penalty `K = RᵀR` on `k` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    k: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn second_order(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("a second-order penalty needs at least 3 coefficients"));
        }
        let mut r = DMatrix::zeros(dim - 2, dim);
        for i in 0..dim - 2 {
            r[(i, i)] = 1.0;
            r[(i, i + 1)] = -2.0;
            r[(i, i + 2)] = 1.0;
        }
        Ok(PenaltyMatrix { k: r.tr_mul(&r) })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn rank(&self) -> usize {
        self.dim() - 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        beta.dot(&(&self.k * beta))
    }
}

/// Horseshoe scales with their inverse-gamma auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeLocals {
    pub lambda2: DVector<f64>,
    pub nu: DVector<f64>,
    pub tau2: f64,
    pub xi: f64,
}

impl HorseshoeLocals {
    pub fn new(k: usize) -> Self {
        HorseshoeLocals {
            lambda2: DVector::from_element(k, 1.0),
            nu: DVector::from_element(k, 1.0),
            tau2: 1.0,
            xi: 1.0,
        }
    }

    /// One sweep of the auxiliary-variable ladder given `β` and `σ²`.
    pub fn update<R: Rng + ?Sized>(&mut self, beta: &DVector<f64>, sigma2: f64, rng: &mut R) {
        let k = beta.len();
        for j in 0..k {
            let b2 = beta[j] * beta[j] / (2.0 * sigma2 * self.tau2);
            self.lambda2[j] = sample_inverse_gamma(1.0, 1.0 / self.nu[j] + b2, rng);
            self.nu[j] = sample_inverse_gamma(1.0, 1.0 + 1.0 / self.lambda2[j], rng);
        }
        let s: f64 = beta.iter().zip(self.lambda2.iter()).map(|(b, l)| b * b / l).sum();
        self.tau2 = sample_inverse_gamma(0.5 * (k as f64 + 1.0), 1.0 / self.xi + s / (2.0 * sigma2), rng);
        self.xi = sample_inverse_gamma(1.0, 1.0 + 1.0 / self.tau2, rng);
    }

    /// `Σ β_j² / (τ² λ_j²)`.
    pub fn scaled_norm(&self, beta: &DVector<f64>) -> f64 {
        beta.iter()
            .zip(self.lambda2.iter())
            .map(|(b, l)| b * b / l)
            .sum::<f64>()
            / self.tau2
    }
}

/// Precision `Q = XᵀX/σ² + Λ₀` and right-hand side `r = Xᵀy/σ² + Λ₀μ₀` of
/// a Gaussian coefficient block; the conditional is `N(Q⁻¹r, Q⁻¹)`.
pub fn coefficient_conditional(
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    sigma2: f64,
    prior_precision: &DMatrix<f64>,
    prior_rhs: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    (xtx / sigma2 + prior_precision, xty / sigma2 + prior_rhs)
}

fn gaussian_block<R: Rng + ?Sized>(
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    sigma2: f64,
    prior_precision: &DMatrix<f64>,
    prior_rhs: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (q, r) = coefficient_conditional(xtx, xty, sigma2, prior_precision, prior_rhs);
    sample_mvn_precision(&r, &q, rng)
}

/// Prior precision and right-hand side of `(θ₁, β)` for the B-spline fit:
/// `θ₁ ~ N(μ, v)` and `β ~ N(0, σ²λ²I)`.
pub fn ridge_prior(k: usize, sigma2: f64, lambda2: f64, intercept: NormalPrior) -> (DMatrix<f64>, DVector<f64>) {
    let mut prec = DMatrix::from_diagonal_element(k + 1, k + 1, 1.0 / (sigma2 * lambda2));
    prec[(0, 0)] = 1.0 / intercept.var;
    let mut rhs = DVector::zeros(k + 1);
    rhs[0] = intercept.mean / intercept.var;
    (prec, rhs)
}

/// Prior precision and right-hand side of `(θ₁, β)` for the P-spline fit:
/// `θ₁ ~ N(μ, v)` and `β ~ N(0, σ²τ²K⁻)`.
pub fn difference_prior(
    pen: &PenaltyMatrix,
    sigma2: f64,
    tau2: f64,
    intercept: NormalPrior,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = pen.dim();
    let mut prec = DMatrix::zeros(k + 1, k + 1);
    prec.view_mut((1, 1), (k, k))
        .copy_from(&(pen.matrix() / (sigma2 * tau2)));
    prec[(0, 0)] = 1.0 / intercept.var;
    let mut rhs = DVector::zeros(k + 1);
    rhs[0] = intercept.mean / intercept.var;
    (prec, rhs)
}

/// `(shape, scale)` of the inverse-gamma conditional of σ² when `n`
/// observations leave residual sum of squares `rss` and a Gaussian prior of
/// rank `rank` contributes `penalty = βᵀMβ / s` at scale `s`.
pub fn noise_conditional(n: usize, rss: f64, rank: f64, penalty: f64, prior: InvGammaPrior) -> (f64, f64) {
    (
        0.5 * (n as f64 + rank) + prior.shape,
        0.5 * (rss + penalty) + prior.scale,
    )
}

/// `(shape, scale)` of the inverse-gamma conditional of a prior scale `s`
/// in `β ~ N(0, σ² s M⁻)` with `quad = βᵀMβ` and `rank = rank(M)`.
pub fn scale_conditional(rank: f64, quad: f64, sigma2: f64, prior: InvGammaPrior) -> (f64, f64) {
    (0.5 * rank + prior.shape, 0.5 * quad / sigma2 + prior.scale)
}

/// Design `[1, Φ]` with the intercept-free basis, plus its grid counterpart.
struct SplineSetup {
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    phi: DMatrix<f64>,
    grid_phi: DMatrix<f64>,
    y: DVector<f64>,
}

impl SplineSetup {
    fn new(data: &Dataset, config: &BaselineConfig) -> Result<Self> {
        config.validate()?;
        let basis = SplineBasis::cubic(config.n_internal_knots, true);
        let phi = basis.design_matrix(&data.x)?;
        let k = phi.ncols();
        let n = data.len();
        if n <= k + 1 {
            return Err(Error::UnderDetermined { n, k: k + 1 });
        }
        let x = with_intercept(&phi);
        let y = DVector::from_column_slice(&data.y);
        let grid_phi = basis.design_matrix(&config.grid)?;
        Ok(SplineSetup {
            xtx: x.tr_mul(&x),
            xty: x.tr_mul(&y),
            x,
            phi,
            grid_phi,
            y,
        })
    }

    fn k(&self) -> usize {
        self.phi.ncols()
    }

    fn rss(&self, coef: &DVector<f64>) -> f64 {
        (&self.y - &self.x * coef).norm_squared()
    }

    fn names(&self, extra: &[&str]) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.k()).map(|i| format!("beta_{i}")).collect();
        names.push("theta1".into());
        names.push("sigma2".into());
        names.extend(extra.iter().map(|s| s.to_string()));
        names
    }

    fn recorder(&self, method: &str, names: Vec<String>, config: &BaselineConfig) -> Recorder {
        Recorder::new(
            method,
            names,
            config.grid.clone(),
            self.grid_phi.clone(),
            self.phi.clone(),
            config.burn_in,
            config.n_draws - config.burn_in,
        )
    }
}

fn with_intercept(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = phi.shape();
    let mut x = DMatrix::zeros(n, k + 1);
    x.column_mut(0).fill(1.0);
    x.columns_mut(1, k).copy_from(phi);
    x
}

fn split_coef(coef: &DVector<f64>) -> (f64, DVector<f64>) {
    (coef[0], coef.rows(1, coef.len() - 1).into_owned())
}

fn spline_row(beta: &DVector<f64>, theta1: f64, sigma2: f64, extra: &[f64]) -> Vec<f64> {
    let mut row: Vec<f64> = beta.iter().copied().collect();
    row.push(theta1);
    row.push(sigma2);
    row.extend_from_slice(extra);
    row
}

/// Bayesian B-spline: `β ~ N(0, σ²λ²I)`, `λ² ~ IG`, conjugate Gibbs updates.
pub fn fit_bspline<R: Rng + ?Sized>(data: &Dataset, config: &BaselineConfig, rng: &mut R) -> Result<ChainDraws> {
    let s = SplineSetup::new(data, config)?;
    let k = s.k();
    let n = data.len();
    let mut rec = s.recorder("bspline", s.names(&["lambda2"]), config);
    let (mut sigma2, mut lambda2) = (data_variance(&s.y), 1.0);
    let ip = config.intercept_prior;
    for it in 0..config.n_draws {
        let (prec, rhs) = ridge_prior(k, sigma2, lambda2, ip);
        let coef = gaussian_block(&s.xtx, &s.xty, sigma2, &prec, &rhs, rng).map_err(|e| e.at_iteration(it + 1))?;
        let (theta1, beta) = split_coef(&coef);
        let bb = beta.norm_squared();
        let (shape, scale) = noise_conditional(n, s.rss(&coef), k as f64, bb / lambda2, config.sigma2_prior);
        sigma2 = sample_inverse_gamma(shape, scale, rng);
        let (shape, scale) = scale_conditional(k as f64, bb, sigma2, config.ridge_prior);
        lambda2 = sample_inverse_gamma(shape, scale, rng);
        if it >= config.burn_in {
            rec.push(spline_row(&beta, theta1, sigma2, &[lambda2]), theta1, &beta, None, None);
        }
    }
    Ok(rec.finish(Vec::new(), 0))
}

/// Bayesian P-spline: `β ~ N(0, σ²τ²K⁻)` with a second-order difference
/// penalty and `τ² ~ IG`. The shape increments use `rank(K)`.
pub fn fit_pspline<R: Rng + ?Sized>(data: &Dataset, config: &BaselineConfig, rng: &mut R) -> Result<ChainDraws> {
    let s = SplineSetup::new(data, config)?;
    let k = s.k();
    let n = data.len();
    let pen = PenaltyMatrix::second_order(k)?;
    let rank = pen.rank() as f64;
    let mut rec = s.recorder("pspline", s.names(&["tau2"]), config);
    let (mut sigma2, mut tau2) = (data_variance(&s.y), 1.0);
    let ip = config.intercept_prior;
    for it in 0..config.n_draws {
        let (prec, rhs) = difference_prior(&pen, sigma2, tau2, ip);
        let coef = gaussian_block(&s.xtx, &s.xty, sigma2, &prec, &rhs, rng).map_err(|e| e.at_iteration(it + 1))?;
        let (theta1, beta) = split_coef(&coef);
        let kb = pen.quadratic_form(&beta).max(0.0);
        let (shape, scale) = noise_conditional(n, s.rss(&coef), rank, kb / tau2, config.sigma2_prior);
        sigma2 = sample_inverse_gamma(shape, scale, rng);
        let (shape, scale) = scale_conditional(rank, kb, sigma2, config.smoothing_prior);
        tau2 = sample_inverse_gamma(shape, scale, rng);
        if it >= config.burn_in {
            rec.push(spline_row(&beta, theta1, sigma2, &[tau2]), theta1, &beta, None, None);
        }
    }
    Ok(rec.finish(Vec::new(), 0))
}

fn data_variance(y: &DVector<f64>) -> f64 {
    y.variance().max(1e-6)
}

/// Full parameter vector of a parametric mean: `θ₁, θ₂` then the
/// non-linear parameters of `kind`.
fn parametric_mean(kind: SpaceKind, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let shape = kind.shape(x, &theta[2..])?;
    Ok(shape.iter().map(|q| theta[0] + theta[1] * q).collect())
}

fn parametric_names(kind: SpaceKind) -> Vec<String> {
    let mut names = vec!["theta1".to_string(), "theta2".to_string()];
    names.extend(kind.nonlinear_names().iter().map(|s| s.to_string()));
    names
}

/// The fitted power curve is reported on the grid, so its exponent must stay
/// positive whenever the grid or the data contain `x = 0`.
fn needs_positive_exponent(kind: SpaceKind, data: &Dataset, config: &BaselineConfig) -> bool {
    kind == SpaceKind::Power && (data.x.contains(&0.0) || config.grid.contains(&0.0))
}

/// Proposal for one coordinate: a truncated normal for positive-support
/// parameters, otherwise a symmetric normal step. Returns the candidate and
/// `log q(cur | cand) − log q(cand | cur)`.
fn rw_propose<R: Rng + ?Sized>(cur: f64, sd: f64, positive: bool, rng: &mut R) -> Result<(f64, f64)> {
    if positive {
        let cand = TruncNormalSpec::positive(cur, sd * sd)?.sample(rng)?;
        let corr = TruncNormalSpec::positive(cur, sd * sd)?.upper_mass().ln()
            - TruncNormalSpec::positive(cand, sd * sd)?.upper_mass().ln();
        Ok((cand, corr))
    } else {
        Ok((cur + sd * sample_std_normal(rng), 0.0))
    }
}

/// Fully parametric Bayesian fit of a Hill or power mean with componentwise
/// random-walk Metropolis over `θ` and `log σ²`.
///
/// Step sizes start at a tenth of each prior standard deviation and are
/// tuned toward 35% acceptance during burn-in only.
pub fn fit_parametric<R: Rng + ?Sized>(
    data: &Dataset,
    kind: SpaceKind,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    config.validate()?;
    let y = &data.y;
    let n = data.len() as f64;
    let mut priors = vec![
        ParamPrior::Normal {
            mean: config.intercept_prior.mean,
            var: config.intercept_prior.var,
        },
        ParamPrior::Normal {
            mean: config.scale_prior.mean,
            var: config.scale_prior.var,
        },
    ];
    priors.extend(kind.default_priors());
    let ls = config.log_sigma2_prior;
    priors.push(ParamPrior::Normal {
        mean: ls.mean,
        var: ls.var,
    });
    let d = priors.len();
    let positive: Vec<bool> = priors
        .iter()
        .enumerate()
        .map(|(j, p)| p.positive_support() || (j == 2 && needs_positive_exponent(kind, data, config)))
        .collect();

    let mut state: Vec<f64> = priors.iter().map(|p| p.mean()).collect();
    state[0] = y.iter().copied().fold(f64::INFINITY, f64::min);
    state[1] = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - state[0];
    let log_post = |s: &[f64]| -> Result<f64> {
        let prior: f64 = priors.iter().zip(s).map(|(p, &v)| p.ln_pdf(v)).sum();
        if !prior.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let mean = parametric_mean(kind, &data.x, &s[..d - 1])?;
        let sigma2 = s[d - 1].exp();
        let rss: f64 = mean.iter().zip(y).map(|(m, v)| (v - m).powi(2)).sum();
        Ok(prior - 0.5 * n * sigma2.ln() - 0.5 * rss / sigma2)
    };
    let mut current = log_post(&state)?;
    if !current.is_finite() {
        return Err(Error::numerical(
            "parametric fit has zero posterior density at its start",
        ));
    }
    let mut tuner = StepTuner::new(priors.iter().map(|p| 0.1 * p.var().sqrt()).collect());
    let mut counters = vec![AcceptanceCounter::default(); d];
    let mut rejections = 0;

    let mut names = parametric_names(kind);
    names.push("sigma2".into());
    let method = format!("param({})", kind.name());
    let mut rec = Recorder::new(
        method,
        names,
        config.grid.clone(),
        DMatrix::zeros(config.grid.len(), 0),
        DMatrix::zeros(data.len(), 0),
        config.burn_in,
        config.n_draws - config.burn_in,
    );
    let no_beta = DVector::zeros(0);
    for it in 0..config.n_draws {
        let tuning = it < config.burn_in;
        for j in 0..d {
            let (cand, corr) = rw_propose(state[j], tuner.scales[j], positive[j], rng)?;
            let mut next = state.clone();
            next[j] = cand;
            let accepted = match log_post(&next) {
                Ok(lp) if lp.is_finite() => {
                    if accept(lp - current + corr, rng) {
                        state = next;
                        current = lp;
                        true
                    } else {
                        false
                    }
                }
                Ok(_) => false,
                Err(e) if e.is_numerical() || matches!(e, Error::SingularEvaluation { .. }) => {
                    rejections += 1;
                    false
                }
                Err(e) => return Err(e.at_iteration(it + 1)),
            };
            tuner.record(j, accepted, tuning);
            if !tuning {
                counters[j].record(accepted);
            }
        }
        if !tuning {
            let grid_mean = parametric_mean(kind, &config.grid, &state[..d - 1])?;
            let data_mean = parametric_mean(kind, &data.x, &state[..d - 1])?;
            let mut row = state[..d - 1].to_vec();
            row.push(state[d - 1].exp());
            rec.push(row, 0.0, &no_beta, Some(&grid_mean), Some(&data_mean));
        }
    }
    let mut labels = parametric_names(kind);
    labels.push("log_sigma2".into());
    let acceptance = labels.into_iter().zip(counters.iter().map(|c| c.rate())).collect();
    Ok(rec.finish(acceptance, rejections))
}

/// Parametric mean plus a horseshoe B-spline:
/// `y = θ₁ + θ₂ q_θ(x) + Φβ + ε` with `β ~ N(0, σ²τ² diag(λ²))`.
///
/// The non-linear parameters move by tuned random-walk Metropolis on their
/// marginal with `(θ₁, θ₂, β)` integrated out; `(θ₁, θ₂, β)` are then drawn
/// jointly from their Gaussian conditional. Conditioning θ on β instead
/// freezes θ whenever the spline can absorb the misfit.
pub fn fit_param_plus_hs_spline<R: Rng + ?Sized>(
    data: &Dataset,
    kind: SpaceKind,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    let s = SplineSetup::new(data, config)?;
    let k = s.k();
    let nl_priors = kind.default_priors();
    let m = nl_priors.len();
    let positive: Vec<bool> = nl_priors
        .iter()
        .map(|p| p.positive_support() || needs_positive_exponent(kind, data, config))
        .collect();
    let mut theta_nl: Vec<f64> = nl_priors.iter().map(|p| p.mean()).collect();
    let mut hs = HorseshoeLocals::new(k);
    let mut sigma2 = data_variance(&s.y);
    let (ip, sp) = (config.intercept_prior, config.scale_prior);

    let design_for = |theta_nl: &[f64]| -> Result<(DMatrix<f64>, Vec<f64>)> {
        let q = kind.shape(&data.x, theta_nl)?;
        let mut x = DMatrix::zeros(data.len(), k + 2);
        x.column_mut(0).fill(1.0);
        x.set_column(1, &DVector::from_column_slice(&q));
        x.columns_mut(2, k).copy_from(&s.phi);
        Ok((x, q))
    };
    let (mut x, _) = design_for(&theta_nl)?;
    let mut tuner = StepTuner::new(nl_priors.iter().map(|p| 0.5 * p.var().sqrt()).collect());
    let mut counters = vec![AcceptanceCounter::default(); m];
    let mut rejections = 0;

    let mut names: Vec<String> = (1..=k).map(|i| format!("beta_{i}")).collect();
    names.extend(parametric_names(kind));
    names.extend(["sigma2", "tau2"].map(String::from));
    let mut rec = Recorder::new(
        format!("param({})+bspline", kind.name()),
        names,
        config.grid.clone(),
        s.grid_phi.clone(),
        s.phi.clone(),
        config.burn_in,
        config.n_draws - config.burn_in,
    );

    for it in 0..config.n_draws {
        let mut prec = DMatrix::zeros(k + 2, k + 2);
        prec[(0, 0)] = 1.0 / ip.var;
        prec[(1, 1)] = 1.0 / sp.var;
        for j in 0..k {
            prec[(j + 2, j + 2)] = 1.0 / (sigma2 * hs.tau2 * hs.lambda2[j]);
        }
        let mut rhs = DVector::zeros(k + 2);
        rhs[0] = ip.mean / ip.var;
        rhs[1] = sp.mean / sp.var;

        // non-linear parameters with (θ₁, θ₂, β) integrated out; up to terms
        // free of θ the log marginal is ½ rᵀQ⁻¹r − ½ log|Q|
        let collapsed = |x: &DMatrix<f64>| -> Option<f64> {
            let (q, r) = coefficient_conditional(&x.tr_mul(x), &x.tr_mul(&s.y), sigma2, &prec, &rhs);
            let chol = q.cholesky()?;
            let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let v = 0.5 * (r.dot(&chol.solve(&r)) - logdet);
            v.is_finite().then_some(v)
        };
        let mut current = collapsed(&x)
            .ok_or_else(|| Error::numerical("coefficient precision is not positive definite").at_iteration(it + 1))?;
        let tuning = it < config.burn_in;
        for j in 0..m {
            let (cand, corr) = rw_propose(theta_nl[j], tuner.scales[j], positive[j], rng)?;
            let prior_delta = nl_priors[j].ln_pdf(cand) - nl_priors[j].ln_pdf(theta_nl[j]);
            let mut next = theta_nl.clone();
            next[j] = cand;
            let mut accepted = false;
            if prior_delta.is_finite() {
                match design_for(&next) {
                    Ok((xc, _)) => match collapsed(&xc) {
                        Some(ll) => {
                            if accept(ll - current + prior_delta + corr, rng) {
                                theta_nl = next;
                                x = xc;
                                current = ll;
                                accepted = true;
                            }
                        }
                        None => rejections += 1,
                    },
                    Err(Error::SingularEvaluation { .. }) => rejections += 1,
                    Err(e) => return Err(e.at_iteration(it + 1)),
                }
            }
            tuner.record(j, accepted, tuning);
            if !tuning {
                counters[j].record(accepted);
            }
        }

        let coef = gaussian_block(&x.tr_mul(&x), &x.tr_mul(&s.y), sigma2, &prec, &rhs, rng)
            .map_err(|e| e.at_iteration(it + 1))?;
        let beta = coef.rows(2, k).into_owned();
        hs.update(&beta, sigma2, rng);
        let rss = (&s.y - &x * &coef).norm_squared();
        let (shape, scale) = noise_conditional(data.len(), rss, k as f64, hs.scaled_norm(&beta), config.sigma2_prior);
        sigma2 = sample_inverse_gamma(shape, scale, rng);

        if !tuning {
            let gq = kind.shape(&config.grid, &theta_nl)?;
            let grid_extra: Vec<f64> = gq.iter().map(|q| coef[1] * q).collect();
            let dq = kind.shape(&data.x, &theta_nl)?;
            let data_extra: Vec<f64> = dq.iter().map(|q| coef[1] * q).collect();
            let mut row: Vec<f64> = beta.iter().copied().collect();
            row.extend([coef[0], coef[1]]);
            row.extend(&theta_nl);
            row.extend([sigma2, hs.tau2]);
            rec.push(row, coef[0], &beta, Some(&grid_extra), Some(&data_extra));
        }
    }
    let acceptance = kind
        .nonlinear_names()
        .iter()
        .map(|s| s.to_string())
        .zip(counters.iter().map(|c| c.rate()))
        .collect();
    Ok(rec.finish(acceptance, rejections))
}
