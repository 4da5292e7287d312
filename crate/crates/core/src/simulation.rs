//! Replicated simulation study: truth generators, the method roster, seeded
//! fan-out of replicates and RMSE aggregation.
//!
//! Seeds are derived from `(base_seed, truth, n, σ², replicate)` for the data
//! and additionally from the method for the fit, so every method sees the
//! same datasets and results do not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::baselines::{fit_bspline, fit_param_plus_hs_spline, fit_parametric, fit_pspline, BaselineConfig};
use crate::chain::ChainDraws;
use crate::data::Dataset;
use crate::distributions::{child_seed, rng_from_seed, sample_std_normal};
use crate::error::{Error, Result};
use crate::sampler::{run_nlfs, NlfsConfig, NormalPrior, Shrinkage};
use crate::spaces::{hill_mean, FunctionSpace, HillParams, SpaceKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSpec {
    Hill {
        theta3: f64,
        theta4: f64,
    },
    Power {
        exponent: f64,
        scale: f64,
    },
    HillDownturn {
        theta3: f64,
        theta4: f64,
        knot: f64,
        coef: f64,
    },
}

impl TruthSpec {
    pub const HILL: TruthSpec = TruthSpec::Hill {
        theta3: 0.3,
        theta4: 6.0,
    };
    pub const POWER: TruthSpec = TruthSpec::Power {
        exponent: 0.5,
        scale: 1.0,
    };
    pub const HILL_DOWNTURN: TruthSpec = TruthSpec::HillDownturn {
        theta3: 0.3,
        theta4: 6.0,
        knot: 0.6,
        coef: -1.5,
    };
    pub const ALL: [TruthSpec; 3] = [Self::HILL, Self::POWER, Self::HILL_DOWNTURN];

    pub fn name(&self) -> &'static str {
        match self {
            TruthSpec::Hill { .. } => "hill",
            TruthSpec::Power { .. } => "power",
            TruthSpec::HillDownturn { .. } => "hill_downturn",
        }
    }

    fn id(&self) -> u64 {
        match self {
            TruthSpec::Hill { .. } => 0,
            TruthSpec::Power { .. } => 1,
            TruthSpec::HillDownturn { .. } => 2,
        }
    }

    /// The true mean function `g` at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            TruthSpec::Hill { theta3, theta4 } => hill_mean(x, &HillParams::new(0.0, 1.0, theta3, theta4)?),
            TruthSpec::Power { exponent, scale } => Ok(x.iter().map(|&v| scale * v.powf(exponent)).collect()),
            TruthSpec::HillDownturn {
                theta3,
                theta4,
                knot,
                coef,
            } => {
                let base = hill_mean(x, &HillParams::new(0.0, 1.0, theta3, theta4)?)?;
                Ok(base
                    .iter()
                    .zip(x)
                    .map(|(h, &v)| if v >= knot { h + coef * (v - knot).powi(2) } else { *h })
                    .collect())
            }
        }
    }
}

impl FromStr for TruthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "hill" => Ok(Self::HILL),
            "power" => Ok(Self::POWER),
            "hill_downturn" | "downturn" | "hill+downturn" => Ok(Self::HILL_DOWNTURN),
            other => Err(Error::invalid(format!("unknown truth '{other}'"))),
        }
    }
}

/// Draw `x ~ U[0, 1]ⁿ` and `y = g(x) + N(0, σ²)`.
pub fn generate_dataset<R: Rng + ?Sized>(truth: &TruthSpec, n: usize, sigma2: f64, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("a dataset needs at least one observation"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let sd = sigma2.sqrt();
    let y = truth
        .eval(&x)?
        .into_iter()
        .map(|g| g + sd * sample_std_normal(rng))
        .collect();
    Dataset::new(x, y)
}

pub fn rmse(fitted: &[f64], truth: &[f64]) -> Result<f64> {
    if fitted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} fitted values against {} true values",
            fitted.len(),
            truth.len()
        )));
    }
    if fitted.is_empty() {
        return Err(Error::invalid("RMSE of empty vectors"));
    }
    let ss: f64 = fitted.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / fitted.len() as f64).sqrt())
}

/// The twelve compared methods, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    NlfsHillOs,
    NlfsPowerOs,
    NlfsHillPowerOs,
    NlfsHillHc,
    NlfsPowerHc,
    NlfsHillPowerHc,
    ParamHill,
    ParamPower,
    Bspline,
    Pspline,
    ParamHillBspline,
    ParamPowerBspline,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::NlfsHillOs,
        Method::NlfsPowerOs,
        Method::NlfsHillPowerOs,
        Method::NlfsHillHc,
        Method::NlfsPowerHc,
        Method::NlfsHillPowerHc,
        Method::ParamHill,
        Method::ParamPower,
        Method::Bspline,
        Method::Pspline,
        Method::ParamHillBspline,
        Method::ParamPowerBspline,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::NlfsHillOs => "nlfs_hill_os",
            Method::NlfsPowerOs => "nlfs_power_os",
            Method::NlfsHillPowerOs => "nlfs_hillpower_os",
            Method::NlfsHillHc => "nlfs_hill_hc",
            Method::NlfsPowerHc => "nlfs_power_hc",
            Method::NlfsHillPowerHc => "nlfs_hillpower_hc",
            Method::ParamHill => "param_hill",
            Method::ParamPower => "param_power",
            Method::Bspline => "bspline",
            Method::Pspline => "pspline",
            Method::ParamHillBspline => "param_hill_bspline",
            Method::ParamPowerBspline => "param_power_bspline",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::NlfsHillOs => "NLFS(Hill), OS",
            Method::NlfsPowerOs => "NLFS(power), OS",
            Method::NlfsHillPowerOs => "NLFS(Hill+power), OS",
            Method::NlfsHillHc => "NLFS(Hill), HC",
            Method::NlfsPowerHc => "NLFS(power), HC",
            Method::NlfsHillPowerHc => "NLFS(Hill+power), HC",
            Method::ParamHill => "param(Hill)",
            Method::ParamPower => "param(power)",
            Method::Bspline => "bspline",
            Method::Pspline => "pspline",
            Method::ParamHillBspline => "param(Hill)+bspline",
            Method::ParamPowerBspline => "param(power)+bspline",
        }
    }

    fn index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }

    /// Space and shrinkage of the NLFS variants.
    pub fn nlfs(self) -> Option<(FunctionSpace, Shrinkage)> {
        use Method::*;
        let space = match self {
            NlfsHillOs | NlfsHillHc => FunctionSpace::hill(),
            NlfsPowerOs | NlfsPowerHc => FunctionSpace::power(),
            NlfsHillPowerOs | NlfsHillPowerHc => FunctionSpace::hill_power(),
            _ => return None,
        };
        let shrink = match self {
            NlfsHillOs | NlfsPowerOs | NlfsHillPowerOs => Shrinkage::own_slice(),
            _ => Shrinkage::HalfCauchy,
        };
        Some((space, shrink))
    }

    pub fn fit<R: Rng + ?Sized>(self, data: &Dataset, settings: &StudySettings, rng: &mut R) -> Result<ChainDraws> {
        if let Some((space, shrinkage)) = self.nlfs() {
            let config = NlfsConfig {
                shrinkage,
                ..settings.nlfs.clone()
            };
            return run_nlfs(data, &space, &config, rng);
        }
        let b = &settings.baseline;
        match self {
            Method::ParamHill => fit_parametric(data, SpaceKind::Hill, b, rng),
            Method::ParamPower => fit_parametric(data, SpaceKind::Power, b, rng),
            Method::Bspline => fit_bspline(data, b, rng),
            Method::Pspline => fit_pspline(data, b, rng),
            Method::ParamHillBspline => fit_param_plus_hs_spline(data, SpaceKind::Hill, b, rng),
            Method::ParamPowerBspline => fit_param_plus_hs_spline(data, SpaceKind::Power, b, rng),
            _ => unreachable!("NLFS variants handled above"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.id() == key)
            .ok_or_else(|| Error::invalid(format!("unknown method id '{s}'")))
    }
}

/// Sampler settings used by every fit in a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySettings {
    pub nlfs: NlfsConfig,
    pub baseline: BaselineConfig,
}

impl Default for StudySettings {
    /// NLFS defaults with the study's intercept prior `θ₁ ~ N(0, 1)`.
    fn default() -> Self {
        StudySettings {
            nlfs: NlfsConfig {
                intercept_prior: NormalPrior { mean: 0.0, var: 1.0 },
                ..NlfsConfig::default()
            },
            baseline: BaselineConfig::default(),
        }
    }
}

impl StudySettings {
    /// Override chain length for every method.
    pub fn with_chain_length(mut self, n_draws: usize, burn_in: usize) -> Self {
        self.nlfs.n_draws = n_draws;
        self.nlfs.burn_in = burn_in;
        self.baseline.n_draws = n_draws;
        self.baseline.burn_in = burn_in;
        self
    }
}

/// One cell of the study grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub truth: TruthSpec,
    pub n: usize,
    pub sigma2: f64,
    pub method: Method,
    pub n_rep: usize,
    pub base_seed: u64,
}

impl Scenario {
    /// Every combination of the given factors.
    pub fn grid(
        truths: &[TruthSpec],
        sizes: &[usize],
        noise: &[f64],
        methods: &[Method],
        n_rep: usize,
        base_seed: u64,
    ) -> Vec<Scenario> {
        let mut out = Vec::with_capacity(truths.len() * sizes.len() * noise.len() * methods.len());
        for &sigma2 in noise {
            for &method in methods {
                for &n in sizes {
                    for &truth in truths {
                        out.push(Scenario {
                            truth,
                            n,
                            sigma2,
                            method,
                            n_rep,
                            base_seed,
                        });
                    }
                }
            }
        }
        out
    }

    fn data_path(&self, rep: usize) -> [u64; 4] {
        [self.truth.id(), self.n as u64, self.sigma2.to_bits(), rep as u64]
    }

    pub fn data_seed(&self, rep: usize) -> u64 {
        child_seed(self.base_seed, &self.data_path(rep))
    }

    pub fn fit_seed(&self, rep: usize) -> u64 {
        let p = self.data_path(rep);
        child_seed(self.base_seed, &[p[0], p[1], p[2], p[3], 1_000 + self.method.index()])
    }

    pub fn dataset(&self, rep: usize) -> Result<Dataset> {
        generate_dataset(
            &self.truth,
            self.n,
            self.sigma2,
            &mut rng_from_seed(self.data_seed(rep)),
        )
    }

    /// Generate, fit and score one replicate.
    pub fn run_replicate(&self, rep: usize, settings: &StudySettings) -> ReplicateOutcome {
        let result = (|| {
            let data = self.dataset(rep)?;
            let draws = self
                .method
                .fit(&data, settings, &mut rng_from_seed(self.fit_seed(rep)))?;
            let truth = self.truth.eval(&data.x)?;
            let value = rmse(&draws.fitted_mean, &truth)?;
            Ok(ReplicateFit {
                rmse: value,
                omega: draws.mean_of("omega"),
                acceptance: draws.acceptance.clone(),
            })
        })();
        ReplicateOutcome { rep, result }
    }

    fn validate(&self) -> Result<()> {
        if self.n_rep == 0 {
            return Err(Error::invalid("scenarios need at least one replicate"));
        }
        if self.n == 0 || !(self.sigma2 >= 0.0) {
            return Err(Error::invalid("scenario needs n ≥ 1 and σ² ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFit {
    pub rmse: f64,
    pub omega: Option<f64>,
    pub acceptance: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub rep: usize,
    pub result: Result<ReplicateFit>,
}

/// Aggregated outcome of one scenario. Failed replicates are kept with their
/// error and left out of every summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub scenario: Scenario,
    pub replicates: Vec<ReplicateOutcome>,
}

impl StudyResult {
    pub fn rmses(&self) -> Vec<f64> {
        self.fits().map(|f| f.rmse).collect()
    }

    fn fits(&self) -> impl Iterator<Item = &ReplicateFit> {
        self.replicates.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn failures(&self) -> Vec<(usize, &Error)> {
        self.replicates
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|e| (r.rep, e)))
            .collect()
    }

    pub fn mean_rmse(&self) -> f64 {
        mean(&self.rmses())
    }

    /// Sample standard deviation of the replicate RMSEs.
    pub fn sd_rmse(&self) -> f64 {
        sd(&self.rmses())
    }

    pub fn mean_omega(&self) -> Option<f64> {
        let w: Vec<f64> = self.fits().filter_map(|f| f.omega).collect();
        (!w.is_empty()).then(|| mean(&w))
    }

    /// Mean acceptance rate per monitored parameter.
    pub fn mean_acceptance(&self) -> Vec<(String, f64)> {
        let fits: Vec<&ReplicateFit> = self.fits().collect();
        let Some(first) = fits.first() else {
            return Vec::new();
        };
        first
            .acceptance
            .iter()
            .enumerate()
            .map(|(j, (name, _))| {
                (
                    name.clone(),
                    mean(&fits.iter().map(|f| f.acceptance[j].1).collect::<Vec<_>>()),
                )
            })
            .collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Run every replicate of every scenario on `parallelism` worker threads.
/// The result is identical for any degree of parallelism.
pub fn run_study(scenarios: &[Scenario], parallelism: usize, settings: &StudySettings) -> Result<Vec<StudyResult>> {
    for s in scenarios {
        s.validate()?;
    }
    settings.nlfs.validate()?;
    settings.baseline.validate()?;
    let tasks: Vec<(usize, usize)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.n_rep).map(move |r| (i, r)))
        .collect();
    let run = |&(i, r): &(usize, usize)| scenarios[i].run_replicate(r, settings);
    let outcomes = execute(&tasks, parallelism.max(1), run)?;

    let mut results: Vec<StudyResult> = scenarios
        .iter()
        .map(|&scenario| StudyResult {
            scenario,
            replicates: Vec::with_capacity(scenario.n_rep),
        })
        .collect();
    for (&(i, _), outcome) in tasks.iter().zip(outcomes) {
        results[i].replicates.push(outcome);
    }
    Ok(results)
}

#[cfg(feature = "parallel")]
fn execute<T, F>(tasks: &[T], parallelism: usize, f: F) -> Result<Vec<ReplicateOutcome>>
where
    T: Sync,
    F: Fn(&T) -> ReplicateOutcome + Sync + Send,
{
    use rayon::prelude::*;
    if parallelism == 1 {
        return Ok(tasks.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| tasks.par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn execute<T, F>(tasks: &[T], _parallelism: usize, f: F) -> Result<Vec<ReplicateOutcome>>
where
    F: Fn(&T) -> ReplicateOutcome,
{
    Ok(tasks.iter().map(f).collect())
}

/// Format a summary cell as `mean (sd)` with three decimals.
pub fn format_cell(result: &StudyResult) -> String {
    let (m, s) = (result.mean_rmse(), result.sd_rmse());
    if m.is_nan() {
        return "NA".into();
    }
    if s.is_nan() {
        format!("{m:.3}")
    } else {
        format!("{m:.3} ({s:.3})")
    }
}

/// Results in table layout: one block per noise level, one row per method
/// and one column per `(n, truth)` pair, each cell `mean (sd)`.
pub fn results_table(results: &[StudyResult]) -> String {
    let mut noise: Vec<f64> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut truths: Vec<TruthSpec> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for r in results {
        let s = &r.scenario;
        if !noise.contains(&s.sigma2) {
            noise.push(s.sigma2);
        }
        if !sizes.contains(&s.n) {
            sizes.push(s.n);
        }
        if !truths.contains(&s.truth) {
            truths.push(s.truth);
        }
        if !methods.contains(&s.method) {
            methods.push(s.method);
        }
    }
    sizes.sort_unstable();
    methods.sort();
    truths.sort_by_key(|t| t.id());

    let mut out = String::from("sigma2,row,method");
    for n in &sizes {
        for t in &truths {
            out.push_str(&format!(",n{n}_{}", t.name()));
        }
    }
    out.push_str(",failures\n");
    for &sigma2 in &noise {
        for &m in &methods {
            out.push_str(&format!("{sigma2},{},{}", m.index() + 1, m.id()));
            let mut failures = 0;
            for &n in &sizes {
                for t in &truths {
                    let cell = results.iter().find(|r| {
                        r.scenario.sigma2 == sigma2
                            && r.scenario.method == m
                            && r.scenario.n == n
                            && r.scenario.truth == *t
                    });
                    match cell {
                        Some(r) => {
                            failures += r.failures().len();
                            out.push_str(&format!(",{}", format_cell(r)));
                        }
                        None => out.push(','),
                    }
                }
            }
            out.push_str(&format!(",{failures}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_data_lies_on_truth() {
        let mut rng = rng_from_seed(4);
        let d = generate_dataset(&TruthSpec::HILL, 40, 0.0, &mut rng).unwrap();
        let g = TruthSpec::HILL.eval(&d.x).unwrap();
        assert_eq!(d.y, g);
        assert!(d.x.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn downturn_is_continuous_at_knot_and_bends_down() {
        let t = TruthSpec::HILL_DOWNTURN;
        let h = TruthSpec::HILL;
        let at_knot = t.eval(&[0.6]).unwrap()[0];
        assert_eq!(at_knot, h.eval(&[0.6]).unwrap()[0]);
        let at_one = t.eval(&[1.0]).unwrap()[0];
        let hill_one = 1.0 / (1.0 + 0.3f64.powi(6));
        assert!((at_one - (hill_one - 0.24)).abs() < 1e-12);
    }

    #[test]
    fn power_truth_is_square_root() {
        assert_eq!(TruthSpec::POWER.eval(&[0.25, 0.0]).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn method_ids_round_trip_in_table_order() {
        for (i, m) in Method::ALL.iter().enumerate() {
            assert_eq!(m.id().parse::<Method>().unwrap(), *m);
            assert_eq!(m.index(), i as u64);
        }
        assert!("nlfs_bogus".parse::<Method>().is_err());
    }

    #[test]
    fn full_grid_has_24_generator_cells_and_12_methods() {
        let g = Scenario::grid(
            &TruthSpec::ALL,
            &[50, 100, 200, 500],
            &[0.005, 0.05],
            &Method::ALL,
            1,
            0,
        );
        assert_eq!(g.len(), 24 * 12);
    }

    #[test]
    fn data_seed_ignores_method_and_fit_seed_does_not() {
        let a = Scenario {
            truth: TruthSpec::HILL,
            n: 50,
            sigma2: 0.005,
            method: Method::Bspline,
            n_rep: 1,
            base_seed: 9,
        };
        let b = Scenario {
            method: Method::Pspline,
            ..a
        };
        assert_eq!(a.data_seed(3), b.data_seed(3));
        assert_ne!(a.fit_seed(3), b.fit_seed(3));
        assert_ne!(a.data_seed(3), a.data_seed(4));
    }

    #[test]
    fn failed_replicates_are_excluded_from_summaries() {
        let s = Scenario {
            truth: TruthSpec::HILL,
            n: 5,
            sigma2: 0.005,
            method: Method::Bspline,
            n_rep: 1,
            base_seed: 0,
        };
        let r = StudyResult {
            scenario: s,
            replicates: vec![
                ReplicateOutcome {
                    rep: 0,
                    result: Ok(ReplicateFit {
                        rmse: 0.1,
                        omega: None,
                        acceptance: vec![],
                    }),
                },
                ReplicateOutcome {
                    rep: 1,
                    result: Err(Error::numerical("boom")),
                },
                ReplicateOutcome {
                    rep: 2,
                    result: Ok(ReplicateFit {
                        rmse: 0.3,
                        omega: None,
                        acceptance: vec![],
                    }),
                },
            ],
        };
        assert_eq!(r.rmses(), vec![0.1, 0.3]);
        assert_eq!(r.failures().len(), 1);
        assert!((r.mean_rmse() - 0.2).abs() < 1e-15);
        assert!((r.sd_rmse() - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(format_cell(&r), "0.200 (0.141)");
    }

    #[test]
    fn zero_replicates_rejected() {
        let s = Scenario {
            truth: TruthSpec::HILL,
            n: 50,
            sigma2: 0.005,
            method: Method::Bspline,
            n_rep: 0,
            base_seed: 0,
        };
        assert!(run_study(&[s], 1, &StudySettings::default()).is_err());
    }
}
