use nalgebra::DVector;
use nlfs::diagnostics::summarize;
use nlfs::distributions::{child_seed, rng_from_seed};
use nlfs::simulation::{generate_dataset, TruthSpec};
use nlfs::{run_nlfs, FunctionSpace, NlfsConfig, Projection, Shrinkage, SplineBasis};
use serde::Serialize;

const MAX_POINTS: usize = 2_000;
const MAX_N: usize = 1_000;
const MAX_DRAWS: usize = 50_000;
/// Omega draws kept for the trace plot.
const TRACE_POINTS: usize = 400;

type Outcome<T> = Result<T, String>;

fn grid(points: usize) -> Outcome<Vec<f64>> {
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must lie in [2, {MAX_POINTS}]"));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn parse<T: std::str::FromStr<Err = nlfs::Error>>(s: &str) -> Outcome<T> {
    s.parse().map_err(|e: nlfs::Error| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Posterior mean weight on the parametric space.
    pub omega: f64,
    pub omega_trace: Vec<f64>,
    pub rmse: f64,
}

/// Simulate `n` points from a named truth and fit them with NLFS, a quarter
/// of the draws going to burn-in. Intervals are pointwise 95%.
pub fn fit(
    truth: &str,
    space: &str,
    shrinkage: &str,
    n: usize,
    sigma2: f64,
    draws: usize,
    seed: u64,
) -> Outcome<FitReport> {
    let truth: TruthSpec = parse(truth)?;
    let space = FunctionSpace::parse(space).map_err(|e| e.to_string())?;
    let shrinkage = match shrinkage {
        "os" => Shrinkage::own_slice(),
        "hc" => Shrinkage::HalfCauchy,
        other => return Err(format!("unknown shrinkage '{other}'")),
    };
    if n > MAX_N {
        return Err(format!("at most {MAX_N} observations"));
    }
    if !(100..=MAX_DRAWS).contains(&draws) {
        return Err(format!("draws must lie in [100, {MAX_DRAWS}]"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err("sigma2 must be positive".into());
    }
    let data =
        generate_dataset(&truth, n, sigma2, &mut rng_from_seed(child_seed(seed, &[0]))).map_err(|e| e.to_string())?;
    let config = NlfsConfig {
        n_draws: draws,
        burn_in: draws / 4,
        shrinkage,
        ..NlfsConfig::default()
    };
    let chain =
        run_nlfs(&data, &space, &config, &mut rng_from_seed(child_seed(seed, &[1]))).map_err(|e| e.to_string())?;
    let summary = summarize(&chain, 0.95).map_err(|e| e.to_string())?;
    let truth_curve = truth.eval(&summary.grid).map_err(|e| e.to_string())?;
    let rmse = nlfs::simulation::rmse(&summary.mean, &truth_curve).map_err(|e| e.to_string())?;
    let omega = chain.column("omega").unwrap_or_default();
    let step = omega.len().div_ceil(TRACE_POINTS).max(1);
    Ok(FitReport {
        x: data.x,
        y: data.y,
        omega: summary.param("omega").map_or(f64::NAN, |p| p.mean),
        omega_trace: omega.into_iter().step_by(step).collect(),
        grid: summary.grid,
        truth: truth_curve,
        mean: summary.mean,
        lower: summary.lower,
        upper: summary.upper,
        rmse,
    })
}

#[derive(Debug, Serialize)]
pub struct BasisReport {
    pub grid: Vec<f64>,
    pub knots: Vec<f64>,
    /// One vector per basis function, evaluated on `grid`.
    pub functions: Vec<Vec<f64>>,
}

/// The full cubic B-spline basis with evenly spaced interior knots.
pub fn basis(knots: usize, points: usize) -> Outcome<BasisReport> {
    if knots > 60 {
        return Err("at most 60 interior knots".into());
    }
    let grid = grid(points)?;
    let basis = SplineBasis::cubic(knots, false);
    let phi = basis.design_matrix(&grid).map_err(|e| e.to_string())?;
    Ok(BasisReport {
        knots: (1..=knots).map(|i| i as f64 / (knots + 1) as f64).collect(),
        functions: phi.column_iter().map(|c| c.iter().copied().collect()).collect(),
        grid,
    })
}

#[derive(Debug, Serialize)]
pub struct TangentReport {
    pub grid: Vec<f64>,
    pub target: Vec<f64>,
    pub projection: Vec<f64>,
    pub residual: Vec<f64>,
    /// Share of the target's squared norm left outside the span.
    pub residual_share: f64,
    pub rank: usize,
}

/// Orthogonal projection of a truth curve onto the span of the space's
/// Jacobian at `theta_nl`.
pub fn tangent(target: &str, space: &str, theta_nl: &[f64], points: usize) -> Outcome<TangentReport> {
    let truth: TruthSpec = parse(target)?;
    let space = FunctionSpace::parse(space).map_err(|e| e.to_string())?;
    if theta_nl.len() != space.n_nonlinear() {
        return Err(format!(
            "{} expects {} non-linear parameters ({}), got {}",
            space.name(),
            space.n_nonlinear(),
            space.nonlinear_names().join(", "),
            theta_nl.len()
        ));
    }
    let grid = grid(points)?;
    let h = space.jacobian(&grid, theta_nl).map_err(|e| e.to_string())?;
    let proj = Projection::from_matrix(&h).map_err(|e| e.to_string())?;
    let g = DVector::from_vec(truth.eval(&grid).map_err(|e| e.to_string())?);
    let fitted = proj.apply(&g);
    let residual = &g - &fitted;
    Ok(TangentReport {
        residual_share: residual.norm_squared() / g.norm_squared().max(f64::MIN_POSITIVE),
        rank: proj.rank(),
        target: g.iter().copied().collect(),
        projection: fitted.iter().copied().collect(),
        residual: residual.iter().copied().collect(),
        grid,
    })
}
