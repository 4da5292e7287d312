use nalgebra::{DMatrix, DVector};

/// Post-burn-in output of one MCMC run.
///
/// `params[i]` holds the named parameter values of stored draw `i`, and
/// `curves[i]` the fitted function on `grid` at that draw. Draws are
/// numbered from `burn_in + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub method: String,
    pub names: Vec<String>,
    pub params: Vec<Vec<f64>>,
    pub grid: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub burn_in: usize,
    /// Posterior mean of the fitted function at the observed covariates.
    pub fitted_mean: Vec<f64>,
    pub acceptance: Vec<(String, f64)>,
    pub numerical_rejections: usize,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.params.iter().map(|row| row[j]).collect())
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        Some(c.iter().sum::<f64>() / c.len() as f64)
    }

    /// Pointwise posterior mean of the fitted function on the grid.
    pub fn mean_curve(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.len()];
        for c in &self.curves {
            for (a, b) in m.iter_mut().zip(c) {
                *a += b;
            }
        }
        let n = self.curves.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn acceptance_rate(&self, name: &str) -> Option<f64> {
        self.acceptance.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }
}

/// Accumulates draws during sampling.
pub(crate) struct Recorder {
    draws: ChainDraws,
    grid_design: DMatrix<f64>,
    data_design: DMatrix<f64>,
    fitted_sum: DVector<f64>,
}

impl Recorder {
    /// `grid_design` and `data_design` are the spline design matrices at the
    /// grid and at the observed covariates.
    pub fn new(
        method: impl Into<String>,
        names: Vec<String>,
        grid: Vec<f64>,
        grid_design: DMatrix<f64>,
        data_design: DMatrix<f64>,
        burn_in: usize,
        capacity: usize,
    ) -> Self {
        let n = data_design.nrows();
        Recorder {
            draws: ChainDraws {
                method: method.into(),
                names,
                params: Vec::with_capacity(capacity),
                grid,
                curves: Vec::with_capacity(capacity),
                burn_in,
                fitted_mean: vec![0.0; n],
                acceptance: Vec::new(),
                numerical_rejections: 0,
            },
            grid_design,
            data_design,
            fitted_sum: DVector::zeros(n),
        }
    }

    /// Record a draw whose fitted function is `offset + parametric + Φ β`,
    /// where `grid_extra` / `data_extra` hold any parametric component on
    /// the grid and at the data.
    pub fn push(
        &mut self,
        row: Vec<f64>,
        offset: f64,
        beta: &DVector<f64>,
        grid_extra: Option<&[f64]>,
        data_extra: Option<&[f64]>,
    ) {
        let mut curve = &self.grid_design * beta;
        curve.add_scalar_mut(offset);
        if let Some(e) = grid_extra {
            curve += DVector::from_column_slice(e);
        }
        let mut fit = &self.data_design * beta;
        fit.add_scalar_mut(offset);
        if let Some(e) = data_extra {
            fit += DVector::from_column_slice(e);
        }
        self.fitted_sum += fit;
        self.draws.params.push(row);
        self.draws.curves.push(curve.iter().copied().collect());
    }

    pub fn finish(mut self, acceptance: Vec<(String, f64)>, numerical_rejections: usize) -> ChainDraws {
        let n = self.draws.params.len().max(1) as f64;
        self.draws.fitted_mean = self.fitted_sum.iter().map(|v| v / n).collect();
        self.draws.acceptance = acceptance;
        self.draws.numerical_rejections = numerical_rejections;
        self.draws
    }
}

/// Default evaluation grid: 101 equally spaced points on `[0, 1]`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}
