//! Clamped B-spline bases on a closed interval.
//!
//! A basis of order `j` (degree `j - 1`) on `k*` interior knots has
//! `k = k* + j` functions. The NLFS prior needs a design matrix whose column
//! space excludes the constant function, since the intercept is modelled
//! separately; [`SplineBasis::without_intercept`] drops the first column,
//! which is the only basis function that is non-zero at the left boundary.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    lo: f64,
    hi: f64,
    internal: Vec<f64>,
    order: usize,
}

impl KnotVector {
    /// Equally spaced interior knots on `(lo, hi)` with clamped boundaries.
    pub fn uniform(n_internal: usize, order: usize, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("degenerate domain [{lo}, {hi}]")));
        }
        if order == 0 {
            return Err(Error::invalid("spline order must be at least 1"));
        }
        let width = hi - lo;
        let step = (n_internal + 1) as f64;
        let internal = (1..=n_internal).map(|i| lo + width * i as f64 / step).collect();
        Ok(KnotVector {
            lo,
            hi,
            internal,
            order,
        })
    }

    /// Knot vector from explicit interior knots, which must be strictly
    /// increasing and strictly inside the domain.
    pub fn with_internal(internal: Vec<f64>, order: usize, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("degenerate domain [{lo}, {hi}]")));
        }
        if order == 0 {
            return Err(Error::invalid("spline order must be at least 1"));
        }
        if internal.iter().any(|&t| !(t > lo && t < hi)) {
            return Err(Error::invalid("interior knots must lie strictly inside the domain"));
        }
        if internal.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("interior knots must be strictly increasing"));
        }
        Ok(KnotVector {
            lo,
            hi,
            internal,
            order,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn internal(&self) -> &[f64] {
        &self.internal
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis functions, `k* + order`.
    pub fn n_basis(&self) -> usize {
        self.internal.len() + self.order
    }

    /// The full clamped sequence with `order` copies of each boundary knot.
    pub fn full(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.internal.len() + 2 * self.order);
        t.extend(std::iter::repeat_n(self.lo, self.order));
        t.extend_from_slice(&self.internal);
        t.extend(std::iter::repeat_n(self.hi, self.order));
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    knots: KnotVector,
    full: Vec<f64>,
    drop_intercept: bool,
}

impl SplineBasis {
    pub fn new(knots: KnotVector, drop_intercept: bool) -> Self {
        let full = knots.full();
        SplineBasis {
            knots,
            full,
            drop_intercept,
        }
    }

    /// Cubic (order 4) basis on `[0, 1]` with `n_internal` equally spaced knots.
    pub fn cubic(n_internal: usize, drop_intercept: bool) -> Self {
        let knots = KnotVector::uniform(n_internal, 4, (0.0, 1.0)).expect("unit interval is valid");
        SplineBasis::new(knots, drop_intercept)
    }

    pub fn without_intercept(mut self) -> Self {
        self.drop_intercept = true;
        self
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn drops_intercept(&self) -> bool {
        self.drop_intercept
    }

    /// Full basis dimension `k`, regardless of the intercept flag.
    pub fn dim(&self) -> usize {
        self.knots.n_basis()
    }

    /// Number of design matrix columns.
    pub fn ncols(&self) -> usize {
        self.dim() - usize::from(self.drop_intercept)
    }

    /// Index of the knot span containing `x`; the right boundary belongs to
    /// the last non-degenerate span.
    fn span(&self, x: f64) -> usize {
        let p = self.knots.order - 1;
        let n = self.dim();
        if x >= self.knots.hi {
            return n - 1;
        }
        // first index with t[i] > x, among t[p..=n]
        let t = &self.full[p..=n];
        let pos = t.partition_point(|&ti| ti <= x);
        p + pos - 1
    }

    /// Values of the `order` basis functions that can be non-zero at `x`,
    /// written into `out`; returns the index of the first of them.
    fn nonzero(&self, x: f64, out: &mut [f64], left: &mut [f64], right: &mut [f64]) -> usize {
        let p = self.knots.order - 1;
        let t = &self.full;
        let i = self.span(x);
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[i + 1 - j];
            right[j] = t[i + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        i - p
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        let (lo, hi) = self.knots.domain();
        match x.iter().position(|&v| !(v >= lo && v <= hi)) {
            Some(index) => Err(Error::OutOfDomain {
                index,
                value: x[index],
                lo,
                hi,
            }),
            None => Ok(()),
        }
    }

    /// Evaluate the design matrix at `x`, one row per point.
    pub fn design_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        let order = self.knots.order;
        let shift = usize::from(self.drop_intercept);
        let mut m = DMatrix::zeros(x.len(), self.ncols());
        let mut vals = vec![0.0; order];
        let mut left = vec![0.0; order];
        let mut right = vec![0.0; order];
        for (row, &xi) in x.iter().enumerate() {
            let first = self.nonzero(xi, &mut vals, &mut left, &mut right);
            for (off, &v) in vals.iter().enumerate() {
                let col = first + off;
                if col >= shift {
                    m[(row, col - shift)] = v;
                }
            }
        }
        Ok(m)
    }
}
