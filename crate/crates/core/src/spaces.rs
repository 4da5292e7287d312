//! Parametric function spaces and their local linearizations.
//!
//! The prior shrinks a spline toward the column space of the Jacobian of a
//! parametric model, evaluated at the current non-linear parameters. The
//! projection onto that space is invariant to rescaling Jacobian columns, so
//! the Hill Jacobian below omits the `θ₂` factor of its last two columns.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{LogNormalSpec, ParamPrior, TruncNormalSpec};
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl HillParams {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64) -> Result<Self> {
        check_hill(theta3, theta4)?;
        Ok(HillParams {
            theta1,
            theta2,
            theta3,
            theta4,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

fn check_hill(theta3: f64, theta4: f64) -> Result<()> {
    if !(theta3 > 0.0 && theta3.is_finite()) || !(theta4 > 0.0 && theta4.is_finite()) {
        return Err(Error::invalid(format!(
            "Hill parameters need theta3 > 0 and theta4 > 0, got ({theta3}, {theta4})"
        )));
    }
    Ok(())
}

fn check_nonnegative(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| !(v >= 0.0)) {
        Some(i) => Err(Error::invalid(format!("covariate x[{i}] = {} is negative", x[i]))),
        None => Ok(()),
    }
}

/// `x^θ₄ / (θ₃^θ₄ + x^θ₄)` as a logistic in `log x`, which stays finite for
/// any positive `x`.
fn hill_fraction(x: f64, theta3: f64, theta4: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let z = theta4 * (x.ln() - theta3.ln());
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn hill_mean(x: &[f64], p: &HillParams) -> Result<Vec<f64>> {
    check_hill(p.theta3, p.theta4)?;
    check_nonnegative(x)?;
    Ok(x.iter()
        .map(|&xi| p.theta1 + p.theta2 * hill_fraction(xi, p.theta3, p.theta4))
        .collect())
}

/// Jacobian of the Hill model with respect to `(θ₁, θ₂, θ₃, θ₄)` at
/// `θ₂ = 1`. Rows at `x = 0` are the analytic limit `(1, 0, 0, 0)`.
pub fn hill_jacobian(x: &[f64], theta3: f64, theta4: f64) -> Result<DMatrix<f64>> {
    check_hill(theta3, theta4)?;
    check_nonnegative(x)?;
    let mut h = DMatrix::zeros(x.len(), 4);
    for (i, &xi) in x.iter().enumerate() {
        h[(i, 0)] = 1.0;
        if xi == 0.0 {
            continue;
        }
        let u = hill_fraction(xi, theta3, theta4);
        let s = u * (1.0 - u);
        h[(i, 1)] = u;
        h[(i, 2)] = -(theta4 / theta3) * s;
        h[(i, 3)] = (xi / theta3).ln() * s;
    }
    Ok(h)
}

pub fn power_mean(x: &[f64], p: &PowerParams) -> Result<Vec<f64>> {
    check_nonnegative(x)?;
    check_power(x, p.theta3)?;
    Ok(x.iter()
        .map(|&xi| p.theta1 + p.theta2 * pow_or_zero(xi, p.theta3))
        .collect())
}

fn check_power(x: &[f64], theta3: f64) -> Result<()> {
    if !theta3.is_finite() {
        return Err(Error::invalid("power exponent must be finite"));
    }
    if theta3 <= 0.0 && x.contains(&0.0) {
        return Err(Error::SingularEvaluation { exponent: theta3 });
    }
    Ok(())
}

fn pow_or_zero(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

/// Jacobian of the power model with respect to `(θ₁, θ₂, θ₃)` at `θ₂ = 1`.
pub fn power_jacobian(x: &[f64], theta3: f64) -> Result<DMatrix<f64>> {
    check_nonnegative(x)?;
    check_power(x, theta3)?;
    let mut h = DMatrix::zeros(x.len(), 3);
    for (i, &xi) in x.iter().enumerate() {
        h[(i, 0)] = 1.0;
        if xi == 0.0 {
            continue;
        }
        let p = xi.powf(theta3);
        h[(i, 1)] = p;
        h[(i, 2)] = xi.ln() * p;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Hill,
    Power,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Hill => "hill",
            SpaceKind::Power => "power",
        }
    }

    pub fn n_nonlinear(self) -> usize {
        match self {
            SpaceKind::Hill => 2,
            SpaceKind::Power => 1,
        }
    }

    pub fn nonlinear_names(self) -> &'static [&'static str] {
        match self {
            SpaceKind::Hill => &["theta3_hill", "theta4_hill"],
            SpaceKind::Power => &["theta3_power"],
        }
    }

    /// Priors on the non-linear parameters for covariates on `[0, 1]`:
    /// `θ₃ ~ N₊(0.5, 0.05)`, `θ₄` log-normal with mean 3 and variance 3 for
    /// Hill; `θ₃ ~ N(0.5, 0.25)` for power.
    pub fn default_priors(self) -> Vec<ParamPrior> {
        match self {
            SpaceKind::Hill => vec![
                ParamPrior::TruncNormal(TruncNormalSpec::positive(0.5, 0.05).expect("valid")),
                ParamPrior::LogNormal(LogNormalSpec::from_moments(3.0, 3.0)),
            ],
            SpaceKind::Power => vec![ParamPrior::Normal { mean: 0.5, var: 0.25 }],
        }
    }

    pub fn jacobian(self, x: &[f64], theta_nl: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            SpaceKind::Hill => hill_jacobian(x, theta_nl[0], theta_nl[1]),
            SpaceKind::Power => power_jacobian(x, theta_nl[0]),
        }
    }

    /// The normalized shape `q(x)` such that the mean is `θ₁ + θ₂ q(x)`.
    pub fn shape(self, x: &[f64], theta_nl: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpaceKind::Hill => hill_mean(x, &HillParams::new(0.0, 1.0, theta_nl[0], theta_nl[1])?),
            SpaceKind::Power => power_mean(
                x,
                &PowerParams {
                    theta1: 0.0,
                    theta2: 1.0,
                    theta3: theta_nl[0],
                },
            ),
        }
    }
}

/// Horizontally stack Jacobian blocks, keeping only the first block's
/// intercept column.
pub fn combined_jacobian(blocks: &[(SpaceKind, &[f64])], x: &[f64]) -> Result<DMatrix<f64>> {
    if blocks.is_empty() {
        return Err(Error::invalid("at least one function space is required"));
    }
    let mats = blocks
        .iter()
        .map(|(kind, theta)| kind.jacobian(x, theta))
        .collect::<Result<Vec<_>>>()?;
    let ncols = 1 + mats.iter().map(|m| m.ncols() - 1).sum::<usize>();
    let mut h = DMatrix::zeros(x.len(), ncols);
    h.column_mut(0).fill(1.0);
    let mut c = 1;
    for m in &mats {
        let w = m.ncols() - 1;
        h.columns_mut(c, w).copy_from(&m.columns(1, w));
        c += w;
    }
    Ok(h)
}

/// A single or combined parametric space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpace {
    members: Vec<SpaceKind>,
}

impl FunctionSpace {
    pub fn single(kind: SpaceKind) -> Self {
        FunctionSpace { members: vec![kind] }
    }

    pub fn hill() -> Self {
        Self::single(SpaceKind::Hill)
    }

    pub fn power() -> Self {
        Self::single(SpaceKind::Power)
    }

    pub fn combined(members: Vec<SpaceKind>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid("a combined space needs at least two members"));
        }
        for (i, a) in members.iter().enumerate() {
            if members[i + 1..].contains(a) {
                return Err(Error::invalid("combined space members must be distinct"));
            }
        }
        Ok(FunctionSpace { members })
    }

    pub fn hill_power() -> Self {
        Self::combined(vec![SpaceKind::Hill, SpaceKind::Power]).expect("distinct members")
    }

    /// Parse `hill`, `power` or a `+`-joined combination such as `hill+power`.
    pub fn parse(s: &str) -> Result<Self> {
        let members = s
            .split('+')
            .map(|p| match p.trim().to_ascii_lowercase().as_str() {
                "hill" => Ok(SpaceKind::Hill),
                "power" => Ok(SpaceKind::Power),
                other => Err(Error::invalid(format!("unknown function space '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        match members.len() {
            1 => Ok(Self::single(members[0])),
            _ => Self::combined(members),
        }
    }

    pub fn members(&self) -> &[SpaceKind] {
        &self.members
    }

    pub fn name(&self) -> String {
        self.members.iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
    }

    pub fn n_nonlinear(&self) -> usize {
        self.members.iter().map(|m| m.n_nonlinear()).sum()
    }

    pub fn nonlinear_names(&self) -> Vec<&'static str> {
        self.members
            .iter()
            .flat_map(|m| m.nonlinear_names().iter().copied())
            .collect()
    }

    pub fn default_priors(&self) -> Vec<ParamPrior> {
        self.members.iter().flat_map(|m| m.default_priors()).collect()
    }

    /// Split a concatenated non-linear parameter vector into member blocks.
    pub fn split<'a>(&self, theta_nl: &'a [f64]) -> Vec<(SpaceKind, &'a [f64])> {
        let mut out = Vec::with_capacity(self.members.len());
        let mut at = 0;
        for &m in &self.members {
            let w = m.n_nonlinear();
            out.push((m, &theta_nl[at..at + w]));
            at += w;
        }
        out
    }

    pub fn jacobian(&self, x: &[f64], theta_nl: &[f64]) -> Result<DMatrix<f64>> {
        if theta_nl.len() != self.n_nonlinear() {
            return Err(Error::invalid(format!(
                "expected {} non-linear parameters, got {}",
                self.n_nonlinear(),
                theta_nl.len()
            )));
        }
        if self.members.len() == 1 {
            return self.members[0].jacobian(x, theta_nl);
        }
        combined_jacobian(&self.split(theta_nl), x)
    }
}

/// Orthogonal projection onto the numerically determined column space of a
/// matrix, stored as an orthonormal basis `Q` so that `P = Q Qᵀ` is never
/// formed.
#[derive(Debug, Clone)]
pub struct Projection {
    q: DMatrix<f64>,
}

impl Projection {
    /// Rank-revealing construction by pivoted orthogonalization of the
    /// unit-norm columns; a column whose remaining norm is at most
    /// `10 · max(n, s) · ε · √s` adds no direction.
    pub fn from_matrix(h: &DMatrix<f64>) -> Result<Self> {
        let (n, s) = h.shape();
        if n <= s {
            return Err(Error::invalid(format!(
                "projection needs more rows than columns, got {n}x{s}"
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite entry in projection matrix"));
        }
        let q = PivotedQr::new(h).q;
        Ok(Projection { q })
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    /// Orthonormal basis of the column space.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.q * (self.q.transpose() * y)
    }

    /// `(I - P) y`.
    pub fn residual(&self, y: &DVector<f64>) -> DVector<f64> {
        y - self.apply(y)
    }

    /// `(I - P) M` for a matrix with `n` rows.
    pub fn residual_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m - &self.q * (self.q.transpose() * m)
    }

    /// `Mᵀ (I - P) M`, formed as `RᵀR` with `R = (I - P) M` so the result is
    /// symmetric positive semi-definite to rounding.
    pub fn complement_gram(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.residual_matrix(m);
        r.tr_mul(&r)
    }

    /// Dense `n × n` projector; intended for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.q * self.q.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::rng_from_seed;
    use rand::Rng;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn hill_mean_examples() {
        let p = HillParams::new(0.2, 1.3, 0.4, 2.5).unwrap();
        let v = hill_mean(&[0.4, 0.0], &p).unwrap();
        assert!((v[0] - (0.2 + 1.3 / 2.0)).abs() < 1e-15);
        assert_eq!(v[1], 0.2);
        let p = HillParams::new(0.0, 1.0, 0.3, 6.0).unwrap();
        let v = hill_mean(&[0.6], &p).unwrap()[0];
        let expect = 0.6f64.powi(6) / (0.3f64.powi(6) + 0.6f64.powi(6));
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.984_615_384_6).abs() < 1e-9);
    }

    #[test]
    fn hill_rejects_bad_params() {
        assert!(HillParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(hill_jacobian(&[0.5], 0.3, -1.0).is_err());
        assert!(hill_jacobian(&[-0.1], 0.3, 1.0).is_err());
    }

    #[test]
    fn hill_jacobian_special_rows() {
        let h = hill_jacobian(&[0.3, 0.0], 0.3, 4.0).unwrap();
        assert!((h[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((h[(0, 2)] + 4.0 / 0.3 * 0.25).abs() < 1e-14);
        assert_eq!(h[(0, 3)], 0.0);
        assert_eq!(h.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn power_examples() {
        let x = [0.0, 0.25, 1.0];
        let v = power_mean(
            &x,
            &PowerParams {
                theta1: 0.0,
                theta2: 1.0,
                theta3: 0.5,
            },
        )
        .unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.5).abs() < 1e-15);
        let v = power_mean(
            &[0.3],
            &PowerParams {
                theta1: 2.0,
                theta2: 3.0,
                theta3: 1.0,
            },
        )
        .unwrap();
        assert!((v[0] - 2.9).abs() < 1e-15);
        let h = power_jacobian(&x, 0.5).unwrap();
        assert_eq!(h.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(h.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert!(matches!(
            power_jacobian(&x, -0.5),
            Err(Error::SingularEvaluation { .. })
        ));
        assert!(power_jacobian(&[0.2, 0.5], -0.5).is_ok());
    }

    #[test]
    fn combined_has_one_intercept() {
        let x = grid(30);
        let h = combined_jacobian(&[(SpaceKind::Hill, &[0.4, 3.0]), (SpaceKind::Power, &[0.5])], &x).unwrap();
        assert_eq!(h.ncols(), 6);
        assert_eq!(FunctionSpace::hill_power().jacobian(&x, &[0.4, 3.0, 0.5]).unwrap(), h);
    }

    #[test]
    fn duplicated_space_collapses() {
        let x = grid(40);
        let single = Projection::from_matrix(&hill_jacobian(&x, 0.4, 3.0).unwrap()).unwrap();
        let twice = combined_jacobian(&[(SpaceKind::Hill, &[0.4, 3.0]), (SpaceKind::Hill, &[0.4, 3.0])], &x).unwrap();
        let doubled = Projection::from_matrix(&twice).unwrap();
        assert_eq!(doubled.rank(), single.rank());
        assert!((doubled.to_dense() - single.to_dense()).amax() < 1e-10);
    }

    #[test]
    fn mean_projection() {
        let n = 25;
        let p = Projection::from_matrix(&DMatrix::from_element(n, 1, 1.0)).unwrap();
        let y = DVector::from_fn(n, |i, _| (i * i) as f64 * 0.1);
        let m = y.mean();
        assert!(p.apply(&y).iter().all(|v| (v - m).abs() < 1e-12));
    }

    #[test]
    fn projection_needs_tall_matrix() {
        assert!(matches!(
            Projection::from_matrix(&DMatrix::zeros(3, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn parse_spaces() {
        assert_eq!(FunctionSpace::parse("hill").unwrap(), FunctionSpace::hill());
        assert_eq!(FunctionSpace::parse("Hill+Power").unwrap(), FunctionSpace::hill_power());
        assert!(FunctionSpace::parse("hill+hill").is_err());
        assert!(FunctionSpace::parse("logistic").is_err());
        assert_eq!(FunctionSpace::hill_power().nonlinear_names().len(), 3);
    }

    #[test]
    fn complement_gram_matches_dense() {
        let mut rng = rng_from_seed(21);
        let x: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let p = Projection::from_matrix(&hill_jacobian(&x, 0.5, 2.0).unwrap()).unwrap();
        let m = DMatrix::from_fn(40, 5, |_, _| rng.random::<f64>());
        let dense = m.transpose() * (DMatrix::identity(40, 40) - p.to_dense()) * &m;
        assert!((p.complement_gram(&m) - dense).amax() < 1e-12);
    }
}
