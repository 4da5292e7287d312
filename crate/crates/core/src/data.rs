use crate::error::{Error, Result};

/// Paired covariates and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "covariates and responses differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in observation {i}")));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }
}

/// Affine map of covariates onto `[0, 1]`, kept so outputs can be reported
/// on the original scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    pub offset: f64,
    pub scale: f64,
}

impl Rescaling {
    pub const IDENTITY: Rescaling = Rescaling {
        offset: 0.0,
        scale: 1.0,
    };

    /// Identity when the data already lie in `[0, 1]`, otherwise the min-max map.
    pub fn fit(x: &[f64]) -> Result<Self> {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if lo >= 0.0 && hi <= 1.0 {
            return Ok(Self::IDENTITY);
        }
        if !(hi > lo) {
            return Err(Error::invalid("covariates are constant; cannot rescale to [0, 1]"));
        }
        Ok(Rescaling {
            offset: lo,
            scale: hi - lo,
        })
    }

    pub fn forward(&self, v: f64) -> f64 {
        ((v - self.offset) / self.scale).clamp(0.0, 1.0)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.offset + self.scale * u
    }
}
