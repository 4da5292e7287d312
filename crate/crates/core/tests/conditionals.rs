//! Every sampler update checked against an independently coded oracle:
//! grid-evaluated densities, dense linear algebra or closed forms.

mod common;

use common::{dense_projector, ks_critical_1pct, ks_statistic, ks_two_sample, mvn_ln_pdf, GridCdf};
use nalgebra::{DMatrix, DVector};
use nlfs::diagnostics::ess;
use nlfs::distributions::{normal_ln_pdf, rng_from_seed, sample_std_normal, ChainRng};
use nlfs::sampler::{
    beta_conditional, intercept_conditional, log_marginal_likelihood, sigma2_conditional, update_beta,
    update_intercept, update_sigma2, update_tau2_halfcauchy, update_tau2_slice, Design, InvGammaPrior, Linearization,
    McmcState, NlfsConfig, NlfsSampler, NormalPrior,
};
use nlfs::simulation::{generate_dataset, run_study, Method, Scenario, StudySettings, TruthSpec};
use nlfs::spaces::{hill_jacobian, power_jacobian, FunctionSpace, Projection};
use nlfs::{run_nlfs, Dataset, SplineBasis};
use statrs::distribution::{Beta, ContinuousCDF};

fn toy_x(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChainRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sample_std_normal(rng))
}

fn state(beta: DVector<f64>, theta1: f64, sigma2: f64, tau2: f64) -> McmcState {
    McmcState {
        beta,
        theta1,
        sigma2,
        tau2,
        tau2_aux: 1.0,
        theta_nl: vec![],
    }
}

/// Dense `A = Φᵀ(I − P)Φ` for the column space of `h`.
fn dense_penalty(phi: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows();
    let r = DMatrix::identity(n, n) - dense_projector(h);
    phi.transpose() * r * phi
}

/// Two-column toy problem with a two-column subspace.
struct Toy {
    design: Design,
    lin: Linearization,
    h: DMatrix<f64>,
    y: DVector<f64>,
}

fn toy_k2() -> Toy {
    let x = toy_x(8);
    let phi = DMatrix::from_fn(8, 2, |i, j| {
        let t = x[i];
        if j == 0 {
            (2.0 * t).sin() + t
        } else {
            (3.0 * t).cos()
        }
    });
    let h = DMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { x[i] * x[i] });
    let y = DVector::from_fn(8, |i, _| 0.4 + 0.8 * x[i] - 0.3 * (5.0 * x[i]).sin());
    let design = Design::from_matrix(x, phi);
    let lin = Linearization::from_projection(vec![], Projection::from_matrix(&h).unwrap(), &design);
    Toy { design, lin, h, y }
}

/// Unnormalized log joint density of `(y, β)` given `(θ₁, σ², τ²)` written
/// directly from the model: Gaussian likelihood times `N(0, σ²τ²A⁻¹)`.
fn log_joint_beta(toy: &Toy, beta: &DVector<f64>, theta1: f64, sigma2: f64, tau2: f64) -> f64 {
    let a = dense_penalty(&toy.design.phi, &toy.h);
    let resid = &toy.y - &toy.design.phi * beta;
    let lik: f64 = resid.iter().map(|r| normal_ln_pdf(*r, theta1, sigma2)).sum();
    lik - 0.5 * (beta.transpose() * a * beta)[0] / (sigma2 * tau2)
}

#[test]
fn beta_draws_match_bivariate_grid_density() {
    let toy = toy_k2();
    let (theta1, sigma2, tau2) = (0.2, 0.05, 2.0);
    let st = state(DVector::zeros(2), theta1, sigma2, tau2);
    let mut rng = rng_from_seed(101);
    let n = 20_000;
    let draws: Vec<DVector<f64>> = (0..n)
        .map(|_| update_beta(&st, &toy.design, &toy.lin, &toy.y, &mut rng).unwrap())
        .collect();

    // grid box from the draws, widened; the density is negligible outside
    let m = 400;
    let bounds: Vec<(f64, f64)> = (0..2)
        .map(|j| {
            let (lo, hi) = draws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), b| {
                (l.min(b[j]), h.max(b[j]))
            });
            let pad = 0.5 * (hi - lo);
            (lo - pad, hi + pad)
        })
        .collect();
    let step = |j: usize| (bounds[j].1 - bounds[j].0) / m as f64;
    let mut logs = DMatrix::zeros(m, m);
    for i in 0..m {
        for l in 0..m {
            let b = DVector::from_vec(vec![
                bounds[0].0 + (i as f64 + 0.5) * step(0),
                bounds[1].0 + (l as f64 + 0.5) * step(1),
            ]);
            logs[(i, l)] = log_joint_beta(&toy, &b, theta1, sigma2, tau2);
        }
    }
    let top = logs.max();
    let dens = logs.map(|v| (v - top).exp());
    let marginals = [
        (0..m).map(|i| dens.row(i).sum()).collect::<Vec<_>>(),
        (0..m).map(|l| dens.column(l).sum()).collect::<Vec<_>>(),
    ];
    for j in 0..2 {
        let cdf = GridCdf::from_masses(bounds[j].0, bounds[j].1, &marginals[j]);
        let sample: Vec<f64> = draws.iter().map(|b| b[j]).collect();
        let d = ks_statistic(&sample, |v| cdf.cdf(v));
        assert!(d < ks_critical_1pct(n), "beta_{j}: KS {d} vs {}", ks_critical_1pct(n));
    }
    // the joint law is checked along the diagonal direction as well
    let mut diag = vec![0.0; 2 * m];
    let dmin = bounds[0].0 + bounds[1].0;
    let dmax = bounds[0].1 + bounds[1].1;
    let dstep = (dmax - dmin) / (2 * m) as f64;
    for i in 0..m {
        for l in 0..m {
            let s = bounds[0].0 + (i as f64 + 0.5) * step(0) + bounds[1].0 + (l as f64 + 0.5) * step(1);
            let cell = (((s - dmin) / dstep) as usize).min(2 * m - 1);
            diag[cell] += dens[(i, l)];
        }
    }
    let cdf = GridCdf::from_masses(dmin, dmax, &diag);
    let sample: Vec<f64> = draws.iter().map(|b| b[0] + b[1]).collect();
    let d = ks_statistic(&sample, |v| cdf.cdf(v));
    assert!(d < ks_critical_1pct(n), "beta_0 + beta_1: KS {d}");
}

fn hill_fixture(n: usize, seed: u64) -> (Design, Dataset, DMatrix<f64>) {
    let data = generate_dataset(&TruthSpec::HILL, n, 0.005, &mut rng_from_seed(seed)).unwrap();
    let design = Design::new(&SplineBasis::cubic(15, true), &data.x).unwrap();
    let h = hill_jacobian(&data.x, 0.3, 6.0).unwrap();
    (design, data, h)
}

#[test]
fn beta_mean_matches_dense_solve_at_upper_bound() {
    let (design, data, h) = hill_fixture(60, 7);
    let lin = Linearization::from_projection(vec![0.3, 6.0], Projection::from_matrix(&h).unwrap(), &design);
    let y = DVector::from_vec(data.y.clone());
    let st = state(DVector::zeros(design.k()), 0.1, 0.005, 10.0);
    let (precision, rhs) = beta_conditional(&st, &design, &lin, &y);
    let mean = precision.clone().cholesky().unwrap().solve(&rhs);

    let a = dense_penalty(&design.phi, &h);
    let lhs = design.phi.transpose() * &design.phi + a / 10.0;
    let dense = lhs.lu().solve(&(design.phi.transpose() * y.add_scalar(-0.1))).unwrap();
    let rel = (&mean - &dense).norm() / dense.norm();
    assert!(rel < 1e-8, "relative error {rel}");

    // and the sampler draws scatter around it
    let mut rng = rng_from_seed(8);
    let n = 4000;
    let mut acc = DVector::zeros(design.k());
    let mut acc2 = DVector::zeros(design.k());
    for _ in 0..n {
        let b = update_beta(&st, &design, &lin, &y, &mut rng).unwrap();
        acc += &b;
        acc2 += b.component_mul(&b);
    }
    for j in 0..design.k() {
        let m = acc[j] / n as f64;
        let sd = (acc2[j] / n as f64 - m * m).sqrt();
        assert!((m - dense[j]).abs() < 4.0 * sd / (n as f64).sqrt(), "coefficient {j}");
    }
}

#[test]
fn beta_mean_collapses_toward_true_space_at_lower_bound() {
    let (design, data, h) = hill_fixture(50, 9);
    let proj = Projection::from_matrix(&h).unwrap();
    let lin = Linearization::from_projection(vec![0.3, 6.0], proj.clone(), &design);
    let y = DVector::from_vec(data.y.clone());
    let off_space = |tau2: f64| {
        let st = state(DVector::zeros(design.k()), 0.0, 0.005, tau2);
        let (precision, rhs) = beta_conditional(&st, &design, &lin, &y);
        let mean = precision.cholesky().unwrap().solve(&rhs);
        proj.residual(&(&design.phi * mean)).norm()
    };
    let (wide, tight) = (off_space(10.0), off_space(0.001));
    assert!(wide >= 10.0 * tight, "‖(I−P)Φβ̄‖: τ²=10 {wide}, τ²=0.001 {tight}");
}

fn intercept_fixture() -> (Design, DVector<f64>, McmcState) {
    let x = toy_x(12);
    let mut rng = rng_from_seed(21);
    let phi = random_matrix(12, 3, &mut rng);
    let y = DVector::from_fn(12, |i, _| 1.5 + x[i] + 0.3 * sample_std_normal(&mut rng));
    let beta = DVector::from_vec(vec![0.2, -0.1, 0.05]);
    (Design::from_matrix(x, phi), y, state(beta, 0.0, 0.09, 1.0))
}

#[test]
fn intercept_flat_prior_limit_is_residual_mean() {
    let (design, y, st) = intercept_fixture();
    let resid = &y - &design.phi * &st.beta;
    let (mean, var) = intercept_conditional(&st, &design, &y, NormalPrior { mean: 3.0, var: 1e8 });
    assert!((mean - resid.mean()).abs() < 1e-4);
    assert!((var - st.sigma2 / 12.0).abs() < 1e-4 * var);
}

#[test]
fn intercept_single_observation_weights_by_precision() {
    let design = Design::from_matrix(vec![0.5], DMatrix::from_element(1, 1, 0.7));
    let st = state(DVector::from_element(1, 2.0), 0.0, 0.5, 1.0);
    let y = DVector::from_element(1, 3.0);
    let prior = NormalPrior { mean: -1.0, var: 2.0 };
    let (mean, var) = intercept_conditional(&st, &design, &y, prior);
    let r = 3.0 - 0.7 * 2.0;
    let (pp, lp) = (1.0 / prior.var, 1.0 / st.sigma2);
    assert!((var - 1.0 / (pp + lp)).abs() < 1e-14);
    assert!((mean - (pp * prior.mean + lp * r) / (pp + lp)).abs() < 1e-14);
}

#[test]
fn intercept_draws_match_grid_density() {
    let (design, y, st) = intercept_fixture();
    let prior = NormalPrior { mean: 0.5, var: 0.2 };
    let resid = &y - &design.phi * &st.beta;
    let log_post = |t: f64| {
        normal_ln_pdf(t, prior.mean, prior.var) + resid.iter().map(|r| normal_ln_pdf(*r, t, st.sigma2)).sum::<f64>()
    };
    let cdf = GridCdf::new(log_post, -1.0, 4.0, 20_000);
    let mut rng = rng_from_seed(22);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| update_intercept(&st, &design, &y, prior, &mut rng))
        .collect();
    let d = ks_statistic(&draws, |v| cdf.cdf(v));
    assert!(d < ks_critical_1pct(n), "KS {d}");
}

#[test]
fn sigma2_scale_with_zero_coefficients() {
    let toy = toy_k2();
    let st = state(DVector::zeros(2), 0.0, 1.0, 1.0);
    let prior = InvGammaPrior { shape: 2.0, scale: 0.3 };
    let (shape, scale) = sigma2_conditional(&st, &toy.design, &toy.lin, &toy.y, prior);
    assert!((scale - (0.5 * toy.y.norm_squared() + 0.3)).abs() < 1e-14);
    assert!((shape - (0.5 * (8.0 + 2.0) + 2.0)).abs() < 1e-14);
}

#[test]
fn sigma2_draws_match_inverse_gamma_mean() {
    let toy = toy_k2();
    let st = state(DVector::from_vec(vec![0.3, -0.2]), 0.1, 1.0, 0.5);
    let prior = InvGammaPrior {
        shape: 1.0,
        scale: 0.01,
    };
    let (shape, scale) = sigma2_conditional(&st, &toy.design, &toy.lin, &toy.y, prior);
    let mut rng = rng_from_seed(31);
    let n = 100_000;
    let mean = (0..n)
        .map(|_| update_sigma2(&st, &toy.design, &toy.lin, &toy.y, prior, &mut rng))
        .sum::<f64>()
        / n as f64;
    let expected = scale / (shape - 1.0);
    assert!((mean - expected).abs() < 0.02 * expected, "{mean} vs {expected}");
}

#[test]
fn sigma2_draws_match_grid_density() {
    let toy = toy_k2();
    let a = dense_penalty(&toy.design.phi, &toy.h);
    let beta = DVector::from_vec(vec![0.3, -0.2]);
    let (theta1, tau2) = (0.1, 0.5);
    let st = state(beta.clone(), theta1, 1.0, tau2);
    let prior = InvGammaPrior {
        shape: 1.0,
        scale: 0.01,
    };
    let resid = &toy.y - &toy.design.phi * &beta;
    let q = (beta.transpose() * &a * &beta)[0];
    // likelihood × N(β; 0, s τ² A⁻¹) × IG(s; a, b), as a function of s
    let log_post = |s: f64| {
        let lik: f64 = resid.iter().map(|r| normal_ln_pdf(*r, theta1, s)).sum();
        let beta_prior = -(beta.len() as f64) / 2.0 * (s * tau2).ln() - 0.5 * q / (s * tau2);
        let ig = -(prior.shape + 1.0) * s.ln() - prior.scale / s;
        lik + beta_prior + ig
    };
    let mut rng = rng_from_seed(32);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| update_sigma2(&st, &toy.design, &toy.lin, &toy.y, prior, &mut rng))
        .collect();
    let hi = draws.iter().copied().fold(0.0, f64::max) * 1.5;
    let cdf = GridCdf::new(log_post, 1e-6, hi, 50_000);
    let d = ks_statistic(&draws, |v| cdf.cdf(v));
    assert!(d < ks_critical_1pct(n), "KS {d}");
}

const BOUNDS: (f64, f64) = (0.001, 10.0);

/// Run `iters` slice transitions at fixed conditioning and keep every
/// `thin`-th τ² after `burn` transitions.
fn slice_chain(
    k: usize,
    quad: f64,
    sigma2: f64,
    ab: (f64, f64),
    bounds: (f64, f64),
    iters: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut st = state(DVector::zeros(0), 0.0, sigma2, bounds.1.min(1.0).max(bounds.0));
    let (burn, thin) = (1000, 10);
    let mut out = Vec::new();
    for it in 0..burn + iters {
        st.tau2 = update_tau2_slice(&st, k, quad, ab, bounds, &mut rng).unwrap();
        if it >= burn && (it - burn) % thin == 0 {
            out.push(st.tau2);
        }
    }
    out
}

#[test]
fn tau_slice_without_penalty_recovers_truncated_beta() {
    let (a, b) = (0.5, 0.8);
    let draws = slice_chain(0, 0.0, 1.0, (a, b), BOUNDS, 100_000, 41);
    let omega: Vec<f64> = draws.iter().map(|t| 1.0 / (1.0 + t)).collect();
    let beta = Beta::new(a, b).unwrap();
    let (w_lo, w_hi) = (1.0 / (1.0 + BOUNDS.1), 1.0 / (1.0 + BOUNDS.0));
    let (f_lo, f_hi) = (beta.cdf(w_lo), beta.cdf(w_hi));
    let d = ks_statistic(&omega, |w| ((beta.cdf(w) - f_lo) / (f_hi - f_lo)).clamp(0.0, 1.0));
    assert!(d < ks_critical_1pct(omega.len()), "KS {d}");
}

#[test]
fn tau_slice_matches_grid_target() {
    // k = 3 coefficients with a fixed penalty, target coded from the model:
    // N(β; 0, σ²τ²A⁻¹) in τ, times the Beta prior on ω carried to τ
    let (k, quad, sigma2, a, b) = (3usize, 0.8, 0.5, 0.5, 0.5);
    let log_tau = |tau: f64| {
        let t2 = tau * tau;
        let beta_prior = -(k as f64) / 2.0 * (sigma2 * t2).ln() - 0.5 * quad / (sigma2 * t2);
        let omega = 1.0 / (1.0 + t2);
        // |dω/dτ| = 2τ ω²
        let prior = (a - 1.0) * omega.ln() + (b - 1.0) * (1.0 - omega).ln() + (2.0 * tau * omega * omega).ln();
        beta_prior + prior
    };
    let cdf = GridCdf::new(log_tau, BOUNDS.0.sqrt(), BOUNDS.1.sqrt(), 50_000);
    let draws = slice_chain(k, quad, sigma2, (a, b), BOUNDS, 100_000, 42);
    let taus: Vec<f64> = draws.iter().map(|t| t.sqrt()).collect();
    let d = ks_statistic(&taus, |v| cdf.cdf(v));
    assert!(d < ks_critical_1pct(taus.len()), "KS {d}");
}

#[test]
fn tau_slice_limits() {
    // a dominant penalty term pushes τ² to the upper bound (weak shrinkage)
    let up = slice_chain(18, 1e6, 1.0, (0.5, 1e-16), BOUNDS, 2000, 43);
    assert!(
        up.iter().all(|t| *t > 0.99 * BOUNDS.1),
        "min {}",
        up.iter().copied().fold(f64::INFINITY, f64::min)
    );
    // no penalty with many coefficients pushes τ² to the lower bound
    let down = slice_chain(18, 0.0, 1.0, (0.5, 1e-16), BOUNDS, 2000, 44);
    let mean = down.iter().sum::<f64>() / down.len() as f64;
    assert!(mean < 1.2 * BOUNDS.0, "mean τ² {mean}");
    assert!(down.iter().all(|t| *t >= BOUNDS.0 && *t <= BOUNDS.1));
}

fn halfcauchy_chain(k: usize, quad: f64, iters: usize, thin: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut st = state(DVector::zeros(0), 0.0, 1.0, 1.0);
    let mut out = Vec::new();
    for it in 0..1000 + iters {
        let (t2, xi) = update_tau2_halfcauchy(&st, k, quad, &mut rng);
        st.tau2 = t2;
        st.tau2_aux = xi;
        if it >= 1000 && (it - 1000) % thin == 0 {
            out.push(1.0 / (1.0 + t2));
        }
    }
    out
}

#[test]
fn halfcauchy_ladder_agrees_with_slice_sampler() {
    let (k, quad) = (3, 0.8);
    let hc = halfcauchy_chain(k, quad, 200_000, 20, 51);
    let wide = (1e-8, 1e8);
    let slice: Vec<f64> = slice_chain(k, quad, 1.0, (0.5, 0.5), wide, 200_000, 52)
        .iter()
        .map(|t| 1.0 / (1.0 + t))
        .collect();
    let (d, crit) = ks_two_sample(&hc, &slice);
    assert!(d < crit, "two-sample KS {d} vs {crit}");
}

#[test]
fn halfcauchy_without_penalty_has_arcsine_moments() {
    let omega = halfcauchy_chain(0, 0.0, 200_000, 1, 53);
    let n = omega.len() as f64;
    let mean = omega.iter().sum::<f64>() / n;
    let var = omega.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let eff = ess(&omega).unwrap().value;
    // Beta(½, ½): mean ½, variance ⅛, fourth central moment 3/128
    let se_mean = (var / eff).sqrt();
    let se_var = ((3.0 / 128.0 - 1.0 / 64.0) / eff).sqrt();
    assert!((mean - 0.5).abs() < 4.0 * se_mean, "mean {mean} ± {se_mean}");
    assert!((var - 0.125).abs() < 4.0 * se_var, "var {var} ± {se_var}");
}

/// n = 20 toy problem with a random spline-like design and a power-model
/// subspace.
fn marginal_fixture(seed: u64) -> (Design, Linearization, DVector<f64>, DMatrix<f64>) {
    let mut rng = rng_from_seed(seed);
    let x = toy_x(20);
    let phi = random_matrix(20, 5, &mut rng);
    let h = power_jacobian(&x, 0.7).unwrap();
    let design = Design::from_matrix(x.clone(), phi);
    let lin = Linearization::from_projection(vec![0.7], Projection::from_matrix(&h).unwrap(), &design);
    let y = DVector::from_fn(20, |i, _| x[i].sqrt() + 0.2 * sample_std_normal(&mut rng));
    (design, lin, y, h)
}

fn dense_marginal(design: &Design, h: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64, tau2: f64) -> f64 {
    let a = dense_penalty(&design.phi, h);
    let a_inv = a.try_inverse().unwrap();
    let n = design.n();
    let cov = &design.phi * a_inv * design.phi.transpose() * (sigma2 * tau2) + DMatrix::identity(n, n) * sigma2;
    mvn_ln_pdf(y, &cov)
}

#[test]
fn marginal_likelihood_matches_dense_gaussian() {
    for (seed, sigma2, tau2) in [(61, 0.04, 2.0), (62, 0.3, 0.001), (63, 1.5, 10.0)] {
        let (design, lin, y, h) = marginal_fixture(seed);
        let fast = log_marginal_likelihood(&design, &lin, &y, sigma2, tau2).unwrap();
        let dense = dense_marginal(&design, &h, &y, sigma2, tau2);
        assert!((fast - dense).abs() < 1e-8, "seed {seed}: {fast} vs {dense}");
    }
}

#[test]
fn marginal_likelihood_satisfies_candidate_identity() {
    // log p(ỹ) = log p(ỹ | β) + log p(β) − log p(β | ỹ) for any β
    let (design, lin, y, h) = marginal_fixture(64);
    let (sigma2, tau2) = (0.1, 3.0);
    let st = state(DVector::zeros(5), 0.0, sigma2, tau2);
    let (precision, rhs) = beta_conditional(&st, &design, &lin, &y);
    let post_cov = precision.clone().try_inverse().unwrap();
    let post_mean = precision.lu().solve(&rhs).unwrap();
    let prior_cov = dense_penalty(&design.phi, &h).try_inverse().unwrap() * (sigma2 * tau2);
    let fast = log_marginal_likelihood(&design, &lin, &y, sigma2, tau2).unwrap();
    for beta in [DVector::zeros(5), post_mean.clone(), DVector::from_element(5, 0.3)] {
        let lik: f64 = (&y - &design.phi * &beta)
            .iter()
            .map(|r| normal_ln_pdf(*r, 0.0, sigma2))
            .sum();
        let chib = lik + mvn_ln_pdf(&beta, &prior_cov) - mvn_ln_pdf(&(&beta - &post_mean), &post_cov);
        assert!((fast - chib).abs() < 1e-8, "{fast} vs {chib}");
    }
}

/// Sampler on the n = 20 power toy with the Gibbs blocks held fixed.
fn power_sampler<'a>(config: &'a NlfsConfig, x: Vec<f64>, seed: u64) -> NlfsSampler<'a> {
    let mut rng = rng_from_seed(seed);
    let n = x.len();
    let phi = random_matrix(n, 4, &mut rng);
    let y: Vec<f64> = x
        .iter()
        .map(|v| 0.3 + v.powf(1.4) + 0.1 * sample_std_normal(&mut rng))
        .collect();
    let mut s = NlfsSampler::new(Design::from_matrix(x, phi), &y, FunctionSpace::power(), config).unwrap();
    s.state.theta1 = 0.3;
    s.state.sigma2 = 0.02;
    s.state.tau2 = 0.5;
    s
}

fn power_log_posterior(s: &NlfsSampler, y: &[f64], theta3: f64) -> f64 {
    let h = power_jacobian(&s.design().x, theta3).unwrap();
    let yt = DVector::from_vec(y.iter().map(|v| v - s.state.theta1).collect());
    dense_marginal(s.design(), &h, &yt, s.state.sigma2, s.state.tau2) + s.priors()[0].ln_pdf(theta3)
}

fn response(s: &NlfsSampler, seed: u64) -> Vec<f64> {
    // regenerate the response exactly as `power_sampler` drew it
    let mut rng = rng_from_seed(seed);
    let n = s.design().n();
    let _ = random_matrix(n, 4, &mut rng);
    s.design()
        .x
        .iter()
        .map(|v| 0.3 + v.powf(1.4) + 0.1 * sample_std_normal(&mut rng))
        .collect()
}

#[test]
fn hastings_ratio_is_zero_for_identical_candidate() {
    let config = NlfsConfig::default();
    let s = power_sampler(&config, toy_x(20), 71);
    let lml = s.log_marginal(&s.lin).unwrap();
    let cur = s.state.theta_nl[0];
    let (log_hr, _, _) = s.log_hastings_ratio(0, cur, lml).unwrap();
    assert!(log_hr.abs() < 1e-12, "{log_hr}");
}

#[test]
fn hastings_ratio_equals_posterior_ratio_for_symmetric_proposals() {
    let config = NlfsConfig::default();
    let s = power_sampler(&config, toy_x(20), 72);
    let y = response(&s, 72);
    let cur = s.state.theta_nl[0];
    let lml = s.log_marginal(&s.lin).unwrap();
    for cand in [-0.4, 0.1, 0.9, 1.4, 2.5] {
        let (log_hr, _, _) = s.log_hastings_ratio(0, cand, lml).unwrap();
        let oracle = power_log_posterior(&s, &y, cand) - power_log_posterior(&s, &y, cur);
        assert!((log_hr - oracle).abs() < 1e-8, "θ₃ = {cand}: {log_hr} vs {oracle}");
    }
}

#[test]
fn power_exponent_chain_matches_grid_posterior_with_truncated_proposals() {
    // x = 0 forces a positive exponent, so proposals are truncated and the
    // Hastings correction is active
    let mut x = toy_x(19);
    x.insert(0, 0.0);
    let config = NlfsConfig::default();
    let mut s = power_sampler(&config, x, 73);
    let y = response(&s, 73);
    let cdf = GridCdf::new(|t| power_log_posterior(&s, &y, t), 1e-4, 6.0, 6000);
    let mut rng = rng_from_seed(74);
    let (burn, iters, thin) = (1000, 40_000, 10);
    let mut draws = Vec::new();
    for it in 0..burn + iters {
        s.update_theta_mh(&mut rng).unwrap();
        if it >= burn && (it - burn) % thin == 0 {
            draws.push(s.state.theta_nl[0]);
        }
    }
    assert!(draws.iter().all(|t| *t > 0.0));
    let d = ks_statistic(&draws, |v| cdf.cdf(v));
    assert!(
        d < ks_critical_1pct(draws.len()),
        "KS {d} vs {}",
        ks_critical_1pct(draws.len())
    );
}

fn short_config() -> NlfsConfig {
    NlfsConfig {
        n_draws: 600,
        burn_in: 200,
        ..NlfsConfig::default()
    }
}

#[test]
fn identical_seed_gives_identical_draws() {
    let data = generate_dataset(&TruthSpec::HILL, 40, 0.005, &mut rng_from_seed(81)).unwrap();
    let config = short_config();
    let run = |seed| run_nlfs(&data, &FunctionSpace::hill(), &config, &mut rng_from_seed(seed)).unwrap();
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a, b);
    assert_ne!(a.params, c.params);
}

#[test]
fn constant_response_gives_flat_mean_curve() {
    let x = toy_x(40);
    let data = Dataset::new(x.clone(), vec![2.5; 40]).unwrap();
    let config = short_config();
    let draws = run_nlfs(&data, &FunctionSpace::hill(), &config, &mut rng_from_seed(82)).unwrap();
    for v in draws.mean_curve() {
        assert!((v - 2.5).abs() < 1e-2, "{v}");
    }
}

#[test]
fn study_results_do_not_depend_on_worker_count() {
    let settings = StudySettings::default().with_chain_length(300, 100);
    let scenarios = Scenario::grid(
        &[TruthSpec::HILL],
        &[30],
        &[0.005],
        &[Method::NlfsHillOs, Method::Bspline, Method::ParamPower],
        3,
        99,
    );
    let serial = run_study(&scenarios, 1, &settings).unwrap();
    let parallel = run_study(&scenarios, 4, &settings).unwrap();
    for (s, p) in serial.iter().zip(&parallel) {
        let bits = |r: &nlfs::simulation::StudyResult| -> Vec<(u64, Option<u64>)> {
            r.replicates
                .iter()
                .map(|o| {
                    let f = o.result.as_ref().unwrap();
                    (f.rmse.to_bits(), f.omega.map(f64::to_bits))
                })
                .collect()
        };
        assert_eq!(bits(s), bits(p));
    }
}
