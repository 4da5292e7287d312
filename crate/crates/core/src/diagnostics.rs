//! Posterior summaries and effective sample size.

use crate::chain::ChainDraws;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when the chain has zero variance; `value` is then the length.
    pub degenerate: bool,
}

/// Effective sample size `N / (1 + 2 Σ ρ̂_t)` with the autocorrelation sum
/// truncated by Geyer's initial monotone sequence rule. Capped at `N`.
pub fn ess(chain: &[f64]) -> Result<Ess> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::invalid(format!("ESS needs at least 10 draws, got {n}")));
    }
    if chain.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("chain contains non-finite values"));
    }
    let nf = n as f64;
    let mean = chain.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = chain.iter().map(|v| v - mean).collect();
    let gamma0 = centered.iter().map(|v| v * v).sum::<f64>() / nf;
    if gamma0.sqrt() <= 1e-14 * mean.abs() || gamma0 == 0.0 {
        return Ok(Ess {
            value: nf,
            degenerate: true,
        });
    }
    let rho = |t: usize| -> f64 {
        let s: f64 = centered[..n - t].iter().zip(&centered[t..]).map(|(a, b)| a * b).sum();
        s / nf / gamma0
    };
    // pair sums Γ_m = ρ_{2m} + ρ_{2m+1}, kept while positive and forced monotone
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        total += pair;
        prev = pair;
        m += 1;
    }
    let tau = (2.0 * total - 1.0).max(1.0 / nf);
    Ok(Ess {
        value: (nf / tau).min(nf),
        degenerate: false,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub ess: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub method: String,
    pub level: f64,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub params: Vec<ParamSummary>,
    pub acceptance: Vec<(String, f64)>,
    pub numerical_rejections: usize,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn summarize_values(name: &str, values: &[f64], level: f64) -> Result<ParamSummary> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    let e = if values.len() >= 10 {
        ess(values)?
    } else {
        Ess {
            value: n,
            degenerate: true,
        }
    };
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        lower: quantile(&sorted, alpha),
        median: quantile(&sorted, 0.5),
        upper: quantile(&sorted, 1.0 - alpha),
        ess: e.value,
        degenerate: e.degenerate,
    })
}

/// Pointwise mean and central `level` interval of the fitted curve on the
/// draws' grid, plus per-parameter summaries.
pub fn summarize(draws: &ChainDraws, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    if draws.is_empty() || draws.curves.is_empty() {
        return Err(Error::invalid("no draws to summarize"));
    }
    let alpha = 0.5 * (1.0 - level);
    let n = draws.curves.len() as f64;
    let g = draws.grid.len();
    let mut mean = vec![0.0; g];
    let mut lower = vec![0.0; g];
    let mut upper = vec![0.0; g];
    let mut column = vec![0.0; draws.curves.len()];
    for j in 0..g {
        for (c, curve) in column.iter_mut().zip(&draws.curves) {
            *c = curve[j];
        }
        mean[j] = column.iter().sum::<f64>() / n;
        column.sort_by(f64::total_cmp);
        lower[j] = quantile(&column, alpha);
        upper[j] = quantile(&column, 1.0 - alpha);
    }
    let params = draws
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = draws.params.iter().map(|row| row[j]).collect();
            summarize_values(name, &values, level)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSummary {
        method: draws.method.clone(),
        level,
        grid: draws.grid.clone(),
        mean,
        lower,
        upper,
        params,
        acceptance: draws.acceptance.clone(),
        numerical_rejections: draws.numerical_rejections,
    })
}

/// `(iteration, value)` pairs of one monitored quantity, numbered from the
/// first post-burn-in iteration.
pub fn trace(draws: &ChainDraws, name: &str) -> Result<Vec<(usize, f64)>> {
    let j = draws
        .column_index(name)
        .ok_or_else(|| Error::invalid(format!("no parameter named '{name}'")))?;
    Ok(draws
        .params
        .iter()
        .enumerate()
        .map(|(i, row)| (draws.burn_in + i + 1, row[j]))
        .collect())
}
