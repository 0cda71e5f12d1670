//! Dense linear algebra on `M(p,q)` and the geometry of the SPD cone `P+(q)`.
//!
//! [`DenseMatrix`] is an unconstrained `p x q` real matrix. [`SpdMatrix`] is a
//! symmetric positive-definite matrix that carries its own eigen-decomposition,
//! so square roots, inverses, logarithms and exponentials are all spectral maps
//! of a single decomposition computed at construction.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative spectral tolerance for membership of the open cone: the smallest
/// eigenvalue must exceed this fraction of the largest.
pub const SPD_RELATIVE_TOLERANCE: f64 = 1e-12;

/// A finite `p x q` real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Dimension("matrix must have at least one row and column".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DenseMatrix(m))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rows, cols))
    }

    /// `[I_q; 0]`, the canonical point of `M(p,q)` whose Gram matrix is `I_q`.
    pub fn stacked_identity(p: usize, q: usize) -> Result<Self> {
        if p < q {
            return Err(Error::Dimension(format!("need p >= q, got p={p}, q={q}")));
        }
        Self::new(DMatrix::identity(p, q))
    }

    /// A matrix of independent standard normals, drawn in row-major order.
    pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.sample(StandardNormal);
            }
        }
        DenseMatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl AsRef<DMatrix<f64>> for DenseMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending
/// order (ties keep their original index order).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Domain("symmetric eigen-decomposition did not converge".into()))?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// `Q f(Λ) Q^T`, symmetrized.
fn spectral_map(values: &DVector<f64>, vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        let fl = f(l);
        scaled.column_mut(j).scale_mut(fl);
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// A symmetric positive-definite matrix together with its spectrum.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    identity: bool,
    log_det: f64,
    sqrt: OnceLock<DMatrix<f64>>,
    inv_sqrt: OnceLock<DMatrix<f64>>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Symmetrizes `m` and checks that it lies in the open cone.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let mat = symmetrize(&m);
        let (values, vectors) = symmetric_eigen(&mat)?;
        Self::check_spectrum(&values)?;
        // Cholesky keeps relative accuracy on graded matrices where the
        // smallest eigenvalue is below the eigensolver's absolute error.
        let log_det = match nalgebra::Cholesky::new(mat.clone()) {
            Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => values.iter().map(|l| l.ln()).sum(),
        };
        Ok(Self::assemble(mat, values, vectors, log_det))
    }

    fn assemble(mat: DMatrix<f64>, values: DVector<f64>, vectors: DMatrix<f64>, log_det: f64) -> Self {
        let identity = mat == DMatrix::identity(mat.nrows(), mat.ncols());
        SpdMatrix { mat, values, vectors, identity, log_det, sqrt: OnceLock::new(), inv_sqrt: OnceLock::new() }
    }

    fn check_spectrum(values: &DVector<f64>) -> Result<()> {
        let min = values[0];
        let max = values[values.len() - 1];
        if !(min > 0.0) || !(min > SPD_RELATIVE_TOLERANCE * max) || !max.is_finite() {
            return Err(Error::NotPositiveDefinite { min, max });
        }
        Ok(())
    }

    /// Builds the matrix `Q diag(values) Q^T` from a known spectrum. The
    /// spectrum is exact, so only positivity and finiteness are required.
    pub(crate) fn from_spectrum(values: DVector<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
        let mut q = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            q.set_column(dst, &vectors.column(src));
        }
        let (min, max) = (sorted[0], sorted[n - 1]);
        if !(min > 0.0) || !max.is_finite() {
            return Err(Error::NotPositiveDefinite { min, max });
        }
        let mat = spectral_map(&sorted, &q, |l| l);
        let log_det = sorted.iter().map(|l| l.ln()).sum();
        Ok(Self::assemble(mat, sorted, q, log_det))
    }

    pub fn identity(q: usize) -> Self {
        Self::assemble(DMatrix::identity(q, q), DVector::from_element(q, 1.0), DMatrix::identity(q, q), 0.0)
    }

    pub fn scaled_identity(q: usize, c: f64) -> Result<Self> {
        Self::from_diagonal(&vec![c; q])
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Dimension("empty diagonal".into()));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    /// Row-major constructor; the input is symmetrized.
    pub fn from_row_slice(q: usize, data: &[f64]) -> Result<Self> {
        if data.len() != q * q {
            return Err(Error::Dimension(format!("{} entries supplied for a {q}x{q} matrix", data.len())));
        }
        Self::new(DMatrix::from_row_slice(q, q, data))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// Orthonormal eigenvectors, columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `Q f(Λ) Q^T` for an arbitrary scalar map.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        spectral_map(&self.values, &self.vectors, f)
    }

    fn map_to_spd(&self, f: impl Fn(f64) -> f64) -> Result<SpdMatrix> {
        let values = self.values.map(f);
        SpdMatrix::from_spectrum(values, self.vectors.clone())
    }

    /// The unique SPD square root.
    pub fn sqrt(&self) -> SpdMatrix {
        self.map_to_spd(f64::sqrt).expect("square root of an SPD matrix is SPD")
    }

    pub fn inverse(&self) -> SpdMatrix {
        self.map_to_spd(|l| 1.0 / l).expect("inverse of an SPD matrix is SPD")
    }

    /// `S^t` for real `t`.
    pub fn powf(&self, t: f64) -> Result<SpdMatrix> {
        self.map_to_spd(|l| l.powf(t))
    }

    /// `S^{1/2}` as a plain matrix, cached.
    pub fn sqrt_matrix(&self) -> &DMatrix<f64> {
        self.sqrt.get_or_init(|| {
            if self.identity {
                self.mat.clone()
            } else {
                self.map_spectrum(f64::sqrt)
            }
        })
    }

    /// `S^{-1/2}` as a plain matrix, cached.
    pub fn inv_sqrt_matrix(&self) -> &DMatrix<f64> {
        self.inv_sqrt.get_or_init(|| {
            if self.identity {
                self.mat.clone()
            } else {
                self.map_spectrum(|l| 1.0 / l.sqrt())
            }
        })
    }

    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| 1.0 / l)
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn scale(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        self.map_to_spd(|l| c * l)
    }

    /// Upper-triangle entries in row-major order: `s11, s12, .., s1q, s22, ..`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let q = self.dim();
        let mut out = Vec::with_capacity(q * (q + 1) / 2);
        for i in 0..q {
            for j in i..q {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }
}

fn same_dim(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.dim(), a.dim(), b.dim(), b.dim())));
    }
    Ok(())
}

/// The SPD square root `B` with `B B = S`.
pub fn spd_sqrt(s: &SpdMatrix) -> SpdMatrix {
    s.sqrt()
}

/// The congruence composition `A ∘ B = B^{1/2} A B^{1/2}`.
pub fn circ(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    same_dim(a, b)?;
    let h = b.sqrt_matrix();
    SpdMatrix::new(h * a.as_matrix() * h)
}

/// Affine-invariant distance `‖log(A ∘ B^{-1})‖_F`.
pub fn spd_metric(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let h = b.inv_sqrt_matrix();
    let m = symmetrize(&(h * a.as_matrix() * h));
    let (values, _) = symmetric_eigen(&m)?;
    Ok(values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Matrix logarithm `U log(Λ) U^T`, a symmetric matrix.
pub fn spd_log(s: &SpdMatrix) -> DMatrix<f64> {
    s.map_spectrum(f64::ln)
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    let (values, vectors) = symmetric_eigen(&symmetrize(m))?;
    SpdMatrix::from_spectrum(values.map(f64::exp), vectors)
}

/// `exp(-A t)` for symmetric positive-definite `A`; `t` may be negative.
/// Fails only when an eigenvalue of the result overflows or underflows.
pub fn spd_exp_scaled(a: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    SpdMatrix::from_spectrum(a.eigenvalues().map(|l| (-l * t).exp()), a.eigenvectors().clone())
}

/// `x^T U^{-1} x`. Fails with [`Error::RankDeficient`] when `x` does not have
/// full column rank (to the cone tolerance).
pub fn gram(x: &DenseMatrix, u: &SpdMatrix) -> Result<SpdMatrix> {
    if u.dim() != x.rows() {
        return Err(Error::Dimension(format!(
            "frame is {}x{} but state has {} rows",
            u.dim(),
            u.dim(),
            x.rows()
        )));
    }
    let m = if u.is_identity() {
        x.as_matrix().tr_mul(x.as_matrix())
    } else {
        let z = u.inv_sqrt_matrix() * x.as_matrix();
        z.tr_mul(&z)
    };
    SpdMatrix::new(m).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::RankDeficient,
        other => other,
    })
}

/// `log Γ_q(a) = q(q-1)/4 log π + Σ_j log Γ(a + (1-j)/2)`.
pub fn multivariate_log_gamma(q: usize, a: f64) -> Result<f64> {
    let qf = q as f64;
    if q == 0 || !(a > (qf - 1.0) / 2.0) {
        return Err(Error::Domain(format!("multivariate gamma needs a > (q-1)/2, got q={q}, a={a}")));
    }
    let mut acc = qf * (qf - 1.0) / 4.0 * PI.ln();
    for j in 1..=q {
        acc += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    Ok(acc)
}

/// A point of the Stiefel manifold: a `p x q` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint(DMatrix<f64>);

impl StiefelPoint {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (p, q) = m.shape();
        if p < q || q == 0 {
            return Err(Error::Dimension(format!("Stiefel point needs p >= q >= 1, got {p}x{q}")));
        }
        let err = (m.tr_mul(&m) - DMatrix::<f64>::identity(q, q)).norm();
        if !(err <= Self::TOLERANCE) {
            return Err(Error::Domain(format!("columns are not orthonormal (error {err:e})")));
        }
        Ok(StiefelPoint(m))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}
