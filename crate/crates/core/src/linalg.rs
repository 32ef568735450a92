//! Dense complex helpers on top of faer: streaming QR row reduction and
//! truncated-SVD least squares.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

/// Singular values below `MACHINE_FLOOR · σ_max` are always discarded.
pub const MACHINE_FLOOR: f64 = 1e-13;

/// Singular-value truncation rule for least-squares solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Discard `σ < value`.
    Absolute(f64),
    /// Discard `σ < value · σ_max`.
    Relative(f64),
}

impl Cutoff {
    pub fn none() -> Self {
        Cutoff::Absolute(0.0)
    }

    /// Effective absolute threshold for a spectrum with largest value `sigma_max`.
    pub fn threshold(self, sigma_max: f64) -> f64 {
        let t = match self {
            Cutoff::Absolute(v) => v,
            Cutoff::Relative(v) => v * sigma_max,
        };
        t.max(MACHINE_FLOOR * sigma_max)
    }

    pub fn value(self) -> f64 {
        match self {
            Cutoff::Absolute(v) | Cutoff::Relative(v) => v,
        }
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Self::none()
    }
}

/// Accumulates rows of a tall matrix and keeps only its triangular factor.
///
/// Rows are buffered and periodically folded into the running `R` by a
/// Householder QR of `[R; buffer]`, so memory stays `O(ncols²)` no matter
/// how many rows are pushed.
pub(crate) struct RowReducer {
    ncols: usize,
    buf: Mat<c64>,
    filled: usize,
    triangular: bool,
}

impl RowReducer {
    pub fn new(ncols: usize) -> Self {
        let cap = (8 * ncols).max(64);
        Self {
            ncols,
            buf: Mat::zeros(cap, ncols),
            filled: 0,
            triangular: true,
        }
    }

    pub fn push(&mut self, rows: MatRef<'_, c64>) {
        assert_eq!(rows.ncols(), self.ncols);
        let mut done = 0;
        while done < rows.nrows() {
            if self.filled == self.buf.nrows() {
                self.compress();
            }
            let take = (self.buf.nrows() - self.filled).min(rows.nrows() - done);
            self.buf
                .submatrix_mut(self.filled, 0, take, self.ncols)
                .copy_from(rows.submatrix(done, 0, take, self.ncols));
            self.filled += take;
            self.triangular = false;
            done += take;
        }
    }

    fn compress(&mut self) {
        if self.triangular || self.filled == 0 {
            return;
        }
        let qr = self.buf.submatrix(0, 0, self.filled, self.ncols).qr();
        let r = qr.thin_R();
        let k = r.nrows();
        let mut top = self.buf.submatrix_mut(0, 0, k, self.ncols);
        top.copy_from(r);
        self.filled = k;
        self.triangular = true;
    }

    /// Upper-trapezoidal `R` with `min(rows pushed, ncols)` rows.
    pub fn finish(mut self) -> Mat<c64> {
        self.compress();
        self.buf.submatrix(0, 0, self.filled, self.ncols).to_owned()
    }
}

#[cfg(test)]
fn is_upper(m: MatRef<'_, c64>) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)] == c64::new(0.0, 0.0)))
}

/// Triangular factor of a matrix.
pub(crate) fn r_factor(m: MatRef<'_, c64>) -> Mat<c64> {
    let mut red = RowReducer::new(m.ncols());
    red.push(m);
    red.finish()
}

/// Result of a truncated-SVD least-squares solve.
#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub x: Vec<c64>,
    /// Singular values of the system matrix, nonincreasing.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Absolute threshold that was applied.
    pub threshold: f64,
    /// `‖A x − y‖₂`.
    pub residual: f64,
}

/// Solves `min ‖A x − y‖` given the triangular factor of `[A | y]`.
pub(crate) fn solve_reduced(r: MatRef<'_, c64>, cutoff: Cutoff) -> Result<LsqSolution> {
    let p = r.ncols() - 1;
    let k = r.nrows();
    if k == 0 || p == 0 {
        return Err(Error::EmptySystem);
    }
    let a = r.submatrix(0, 0, k, p);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let threshold = cutoff.threshold(sigma_max);
    let u = svd.U();
    let v = svd.V();
    let mut x = vec![c64::new(0.0, 0.0); p];
    let mut rank = 0;
    for (i, &sigma) in s.iter().enumerate() {
        if !(sigma > 0.0 && sigma >= threshold) {
            continue;
        }
        rank += 1;
        let mut coef = c64::new(0.0, 0.0);
        for row in 0..k {
            coef += u[(row, i)].conj() * r[(row, p)];
        }
        coef /= sigma;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += v[(j, i)] * coef;
        }
    }
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("least-squares solution is not finite".into()));
    }
    let residual = reduced_residual(r, &x);
    let mut singular_values = s;
    singular_values.resize(p.min(singular_values.len()), 0.0);
    Ok(LsqSolution {
        x,
        singular_values,
        rank,
        threshold,
        residual,
    })
}

/// `‖A x − y‖` from the triangular factor of `[A | y]`.
pub(crate) fn reduced_residual(r: MatRef<'_, c64>, x: &[c64]) -> f64 {
    let p = r.ncols() - 1;
    (0..r.nrows())
        .map(|i| {
            let mut s = -r[(i, p)];
            for (j, xj) in x.iter().enumerate() {
                s += r[(i, j)] * xj;
            }
            s.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Appends `y` as an extra column.
pub(crate) fn augment(a: MatRef<'_, c64>, y: &[c64]) -> Mat<c64> {
    let p = a.ncols();
    Mat::from_fn(a.nrows(), p + 1, |i, j| if j < p { a[(i, j)] } else { y[i] })
}

/// Minimum-norm least-squares solution with singular-value truncation.
pub fn lsq_solve_with(a: MatRef<'_, c64>, y: &[c64], cutoff: Cutoff) -> Result<LsqSolution> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::EmptySystem);
    }
    if y.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, right-hand side has {}",
            a.nrows(),
            y.len()
        )));
    }
    let r = r_factor(augment(a, y).as_ref());
    solve_reduced(r.as_ref(), cutoff)
}

/// Largest and smallest singular value (the latter is zero for wide matrices).
pub fn extreme_singular_values(m: MatRef<'_, c64>) -> Result<(f64, f64)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok((0.0, 0.0));
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let max = s.first().copied().unwrap_or(0.0);
    let min = if m.nrows() < m.ncols() { 0.0 } else { s.last().copied().unwrap_or(0.0) };
    Ok((max, min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat<R: Rng>(m: usize, n: usize, rng: &mut R) -> Mat<c64> {
        Mat::from_fn(m, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn streamed_reduction_matches_direct_qr() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_mat(1000, 9, &mut rng);
        let mut red = RowReducer::new(9);
        for chunk in 0..10 {
            red.push(a.submatrix(chunk * 100, 0, 100, 9));
        }
        let r = red.finish();
        // R*R = A*A regardless of the sign/phase of R's rows
        let g1 = r.adjoint() * &r;
        let g2 = a.adjoint() * &a;
        assert!((&g1 - &g2).norm_max() < 1e-10 * g2.norm_max());
        assert_eq!(r.nrows(), 9);
    }

    #[test]
    fn short_systems_keep_all_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_mat(3, 7, &mut rng);
        let r = r_factor(a.as_ref());
        assert_eq!(r.nrows(), 3);
        assert!(is_upper(r.as_ref()));
        let g1 = r.adjoint() * &r;
        let g2 = a.adjoint() * &a;
        assert!((&g1 - &g2).norm_max() < 1e-12);
    }

    #[test]
    fn relative_cutoff_scales_with_spectrum() {
        assert_eq!(Cutoff::Relative(1e-3).threshold(10.0), 1e-2);
        assert_eq!(Cutoff::Absolute(0.0).threshold(1.0), MACHINE_FLOOR);
    }
}
