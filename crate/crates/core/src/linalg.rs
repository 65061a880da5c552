//! Householder QR with column pivoting.
//!
//! Every least-squares subproblem in the crate (active-set refits, span
//! projections, null vectors of dependent edge sets) goes through
//! [`ColPivQr`]. Numerical rank is decided at a relative threshold on the
//! diagonal of `R`, so rank-deficient column sets are routine rather than
//! exceptional.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_kk| / |R_00|` below which a column is dependent.
pub const RANK_TOL: f64 = 1e-10;

/// `A P = Q R` for a `rows x cols` matrix `A`.
#[derive(Debug, Clone)]
pub struct ColPivQr {
    /// Householder vectors below the diagonal, `R` on and above it.
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    /// `perm[k]` is the original column sitting at pivoted position `k`.
    perm: Vec<usize>,
    rank: usize,
}

impl ColPivQr {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut norms: Vec<f64> = (0..cols).map(|j| qr.column(j).norm_squared()).collect();
        let steps = rows.min(cols);
        let mut tau = vec![0.0; steps];
        let mut r00 = 0.0_f64;
        let mut rank = 0;

        for k in 0..steps {
            // Recompute trailing norms exactly; matrices here are tiny.
            for (j, norm) in norms.iter_mut().enumerate().skip(k) {
                *norm = qr.view((k, j), (rows - k, 1)).norm_squared();
            }
            let mut best = k;
            for j in (k + 1)..cols {
                if norms[j] > norms[best] {
                    best = j;
                }
            }
            if best != k {
                qr.swap_columns(k, best);
                norms.swap(k, best);
                perm.swap(k, best);
            }

            let alpha = qr.view((k, k), (rows - k, 1)).norm();
            if k == 0 {
                r00 = alpha;
            }
            if alpha == 0.0 || alpha <= RANK_TOL * r00 {
                break;
            }
            rank += 1;

            let x0 = qr[(k, k)];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - beta;
            for i in (k + 1)..rows {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - x0) / beta;
            qr[(k, k)] = beta;

            for j in (k + 1)..cols {
                let mut s = qr[(k, j)];
                for i in (k + 1)..rows {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in (k + 1)..rows {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
            }
        }

        ColPivQr { qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.qr.ncols()
    }

    /// Apply `Q^T` to `b` in place.
    fn apply_qt(&self, b: &mut DVector<f64>) {
        let rows = self.qr.nrows();
        for k in 0..self.rank {
            let mut s = b[k];
            for i in (k + 1)..rows {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..rows {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Apply `Q` to `b` in place.
    fn apply_q(&self, b: &mut DVector<f64>) {
        let rows = self.qr.nrows();
        for k in (0..self.rank).rev() {
            let mut s = b[k];
            for i in (k + 1)..rows {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..rows {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Basic least-squares solution: coefficients on the independent
    /// columns, zero on the dependent ones.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut qtb = b.clone();
        self.apply_qt(&mut qtb);
        let r = self.rank;
        let mut x = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = qtb[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.qr[(i, j)] * xj;
            }
            x[i] = s / self.qr[(i, i)];
        }
        let mut out = DVector::zeros(self.ncols());
        for (k, &xk) in x.iter().enumerate() {
            out[self.perm[k]] = xk;
        }
        out
    }

    /// Orthogonal projection of `b` onto the column space.
    pub fn project(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut qtb = b.clone();
        self.apply_qt(&mut qtb);
        for i in self.rank..qtb.len() {
            qtb[i] = 0.0;
        }
        self.apply_q(&mut qtb);
        qtb
    }

    /// A nonzero `x` with `A x = 0`, if the columns are dependent. Built
    /// from the first dependent pivoted column: `x = P (-R11^{-1} r12, 1, 0..)`.
    pub fn null_vector(&self) -> Option<DVector<f64>> {
        let r = self.rank;
        if r == self.ncols() {
            return None;
        }
        let mut x = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = -self.qr[(i, r)];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.qr[(i, j)] * xj;
            }
            x[i] = s / self.qr[(i, i)];
        }
        let mut out = DVector::zeros(self.ncols());
        for (k, &xk) in x.iter().enumerate() {
            out[self.perm[k]] = xk;
        }
        out[self.perm[r]] = 1.0;
        Some(out)
    }
}

/// Matrix whose columns are the selected columns of `a`.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])])
}
