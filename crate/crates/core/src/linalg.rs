//! Dense square-matrix primitives.
//!
//! The SVD here fixes the gauge freedom that a raw bidiagonal SVD leaves
//! open: singular values are sorted descending (stable with respect to the
//! backend's order on ties) and each left singular vector is flipped so its
//! largest-magnitude entry (lowest index on ties) is non-negative, with the
//! matching right vector flipped in tandem. Principal portfolios and every
//! spectral coordinate downstream depend on this convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// `A = U diag(sigma) Vᵀ` with the sign/order convention described above.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(coeffs) Vᵀ`.
    pub fn lift(&self, coeffs: &[f64]) -> Matrix {
        debug_assert_eq!(coeffs.len(), self.dim());
        let mut scaled = self.u.clone();
        for (j, &c) in coeffs.iter().enumerate() {
            scaled.column_mut(j).scale_mut(c);
        }
        scaled * self.v.transpose()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.lift(&self.sigma)
    }

    /// Rank-one term `u_i v_iᵀ` (zero-based index).
    pub fn rank_one(&self, i: usize) -> Matrix {
        self.u.column(i) * self.v.column(i).transpose()
    }

    /// Diagonal of `Uᵀ A V`: the coordinates of `a` along the pairs `(u_i, v_i)`.
    pub fn coordinates(&self, a: &Matrix) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (self.u.column(i).transpose() * a * self.v.column(i))[(0, 0)])
            .collect()
    }
}

pub fn ensure_square(a: &Matrix, what: &str) -> Result<usize> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::dim(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if let Some(pos) = a.iter().position(|x| !x.is_finite()) {
        let (r, c) = (pos % a.nrows(), pos / a.nrows());
        return Err(Error::domain(format!(
            "{what} has a non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}

pub fn ensure_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

pub fn svd(a: &Matrix) -> Result<SpectralDecomposition> {
    let n = ensure_square(a, "svd input")?;
    ensure_finite(a, "svd input")?;

    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let raw = m
        .svd()
        .map_err(|e| Error::domain(format!("SVD did not converge: {e:?}")))?;
    let (u_raw, s_raw, v_raw) = (raw.U(), raw.S().column_vector(), raw.V());
    let singular_values: Vec<f64> = (0..n).map(|i| s_raw[i]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep the backend's order.
    order.sort_by(|&i, &j| singular_values[j].total_cmp(&singular_values[i]));

    let mut u = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut uc = DVector::from_fn(n, |i, _| u_raw[(i, src)]);
        let mut vc = DVector::from_fn(n, |i, _| v_raw[(i, src)]);
        if leading_entry(&uc) < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        u.set_column(dst, &uc);
        v.set_column(dst, &vc);
        sigma.push(singular_values[src].max(0.0));
    }

    Ok(SpectralDecomposition { u, sigma, v })
}

/// Entry of largest magnitude, first index on ties.
fn leading_entry(col: &DVector<f64>) -> f64 {
    let mut best = 0.0_f64;
    for &x in col.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    best
}

/// `tr(AᵀB)`, the Frobenius inner product.
pub fn trace_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    ensure_same_shape(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Frobenius norm computed on the max-abs-scaled matrix, so tiny entries do
/// not underflow when squared.
pub fn frobenius_norm(a: &Matrix) -> f64 {
    let scale = a.amax();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * (a / scale).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub nuclear: f64,
    pub spectral: f64,
}

pub fn norms(a: &Matrix) -> Result<Norms> {
    let dec = svd(a)?;
    Ok(norms_from_sigma(&dec.sigma))
}

pub fn norms_from_sigma(sigma: &[f64]) -> Norms {
    Norms {
        frobenius: sigma.iter().map(|s| s * s).sum::<f64>().sqrt(),
        nuclear: sigma.iter().sum(),
        spectral: sigma.first().copied().unwrap_or(0.0),
    }
}

pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    norms(a).map(|n| n.nuclear)
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    norms(a).map(|n| n.spectral)
}
