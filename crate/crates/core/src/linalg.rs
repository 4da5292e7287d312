//! Rank-revealing orthogonalization.
//!
//! nalgebra's SVD returns mismatched factors for exactly rank-deficient
//! inputs, and its pivoted QR does not keep `|R_ii|` non-increasing, so
//! neither can decide rank. This module scales columns to unit norm, pivots
//! on the largest remaining column norm and orthogonalizes twice, which
//! keeps `QᵀQ = I` to rounding. Rank decisions are therefore unaffected by
//! column scaling, as a column space should be.

use nalgebra::{DMatrix, DVector};

/// `H D⁻¹ P = Q R` truncated at the numerical rank `r`, where `D` holds the
/// column norms of `H`.
#[derive(Debug, Clone)]
pub(crate) struct PivotedQr {
    /// `n × r`, orthonormal columns.
    pub q: DMatrix<f64>,
    /// `r × s`, upper trapezoidal in pivot order.
    pub r: DMatrix<f64>,
    /// `perm[j]` is the original index of the `j`-th pivoted column.
    pub perm: Vec<usize>,
    /// Column norms of `H` in original order; zero columns keep scale 1.
    pub scale: Vec<f64>,
}

impl PivotedQr {
    /// Unit columns whose remaining norm falls to `10 · max(n, s) · ε · √s`
    /// or below are treated as dependent.
    pub fn new(h: &DMatrix<f64>) -> Self {
        let (n, s) = h.shape();
        let scale: Vec<f64> = h
            .column_iter()
            .map(|c| match c.norm() {
                v if v > 0.0 => v,
                _ => 1.0,
            })
            .collect();
        let mut work = DMatrix::from_fn(n, s, |i, j| h[(i, j)] / scale[j]);
        let tol = 10.0 * n.max(s) as f64 * f64::EPSILON * (s as f64).sqrt();
        let mut perm: Vec<usize> = (0..s).collect();
        let mut q = DMatrix::zeros(n, s.min(n));
        let mut r = DMatrix::zeros(s.min(n), s);
        let mut rank = 0;
        while rank < s.min(n) {
            let (best, norm) = (rank..s)
                .map(|j| (j, work.column(j).norm()))
                .fold((rank, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            if !(norm > tol) {
                break;
            }
            work.swap_columns(rank, best);
            r.swap_columns(rank, best);
            perm.swap(rank, best);
            let mut v = work.column(rank).into_owned();
            // second pass removes what rounding left in the span of earlier q
            for _ in 0..2 {
                for i in 0..rank {
                    let c = q.column(i).dot(&v);
                    r[(i, rank)] += c;
                    v.axpy(-c, &q.column(i), 1.0);
                }
            }
            let len = v.norm();
            r[(rank, rank)] = len;
            v /= len;
            for j in rank + 1..s {
                let c = v.dot(&work.column(j));
                r[(rank, j)] = c;
                let mut col = work.column_mut(j);
                col.axpy(-c, &v, 1.0);
            }
            q.set_column(rank, &v);
            rank += 1;
        }
        PivotedQr {
            q: q.columns(0, rank).into_owned(),
            r: r.rows(0, rank).into_owned(),
            perm,
            scale,
        }
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    /// A least-squares solution of `H c = y` that is zero on dependent
    /// columns.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let k = self.rank();
        let mut c = self.q.tr_mul(y);
        for i in (0..k).rev() {
            let tail: f64 = (i + 1..k).map(|j| self.r[(i, j)] * c[j]).sum();
            c[i] = (c[i] - tail) / self.r[(i, i)];
        }
        let mut out = DVector::zeros(self.r.ncols());
        for (j, &orig) in self.perm.iter().take(k).enumerate() {
            out[orig] = c[j] / self.scale[orig];
        }
        out
    }
}
