//! Matrix-Normal, Wishart and Inverse-Wishart laws, the uniform law on the
//! Stiefel manifold, and the reference measures densities are written against.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{gram, multivariate_log_gamma, DenseMatrix, SpdMatrix, StiefelPoint};

/// Parameters of `N_{p,q}(M, Σ, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixNormalParams {
    pub mean: DenseMatrix,
    pub row_cov: SpdMatrix,
    pub col_cov: SpdMatrix,
}

impl MatrixNormalParams {
    pub fn new(mean: DenseMatrix, row_cov: SpdMatrix, col_cov: SpdMatrix) -> Result<Self> {
        if row_cov.dim() != mean.rows() || col_cov.dim() != mean.cols() {
            return Err(Error::Dimension(format!(
                "mean is {}x{}, row covariance {}x{}, column covariance {}x{}",
                mean.rows(),
                mean.cols(),
                row_cov.dim(),
                row_cov.dim(),
                col_cov.dim(),
                col_cov.dim()
            )));
        }
        Ok(MatrixNormalParams { mean, row_cov, col_cov })
    }

    /// Zero-mean law with the given covariances.
    pub fn centered(row_cov: SpdMatrix, col_cov: SpdMatrix) -> Self {
        let mean = DenseMatrix::zeros(row_cov.dim(), col_cov.dim()).expect("positive dimensions");
        MatrixNormalParams { mean, row_cov, col_cov }
    }

    /// `N_{p,q}(0, I_p, I_q)`.
    pub fn standard(p: usize, q: usize) -> Self {
        Self::centered(SpdMatrix::identity(p), SpdMatrix::identity(q))
    }

    pub fn rows(&self) -> usize {
        self.mean.rows()
    }

    pub fn cols(&self) -> usize {
        self.mean.cols()
    }
}

/// Parameters of `W_q(r, T)` and of `W_q^{-1}(r, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WishartParams {
    pub dof: f64,
    pub scale: SpdMatrix,
}

impl WishartParams {
    pub fn new(dof: f64, scale: SpdMatrix) -> Result<Self> {
        let q = scale.dim() as f64;
        if !(dof > q - 1.0) || !dof.is_finite() {
            return Err(Error::Domain(format!(
                "degrees of freedom must satisfy r > q - 1 = {}, got r = {dof}",
                q - 1.0
            )));
        }
        Ok(WishartParams { dof, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    /// `r T`, the Wishart mean.
    pub fn wishart_mean(&self) -> SpdMatrix {
        self.scale.scale(self.dof).expect("positive dof")
    }

    /// `T / (r - q - 1)`, the Inverse-Wishart mean, defined for `r > q + 1`.
    pub fn inverse_wishart_mean(&self) -> Result<SpdMatrix> {
        let q = self.dim() as f64;
        if !(self.dof > q + 1.0) {
            return Err(Error::Domain(format!("Inverse-Wishart mean needs r > q + 1, got r = {}", self.dof)));
        }
        self.scale.scale(1.0 / (self.dof - q - 1.0))
    }
}

/// The measure a density is written against.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceTag {
    /// Lebesgue measure on `M(p,q)`.
    Lebesgue,
    /// The right-invariant measure `ν_U` on `M(p,q)`.
    NuU { u: SpdMatrix, p: usize, q: usize },
    /// The Matrix-Normal law `N_{p,q}(M, U, V)`.
    Gaussian(MatrixNormalParams),
    /// The invariant measure `μ(dS) = det(S)^{-(q+1)/2} ∏ dS_ij` on `P+(q)`.
    Mu,
}

impl ReferenceTag {
    pub fn nu(u: SpdMatrix, q: usize) -> Self {
        let p = u.dim();
        ReferenceTag::NuU { u, p, q }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceTag::Lebesgue => "Lebesgue",
            ReferenceTag::NuU { .. } => "nu_U",
            ReferenceTag::Gaussian(_) => "Gaussian",
            ReferenceTag::Mu => "mu",
        }
    }

    /// Same kind and same parameters.
    pub fn matches(&self, other: &ReferenceTag) -> bool {
        match (self, other) {
            (ReferenceTag::NuU { u: a, p: pa, q: qa }, ReferenceTag::NuU { u: b, p: pb, q: qb }) => {
                pa == pb && qa == qb && a.as_matrix() == b.as_matrix()
            }
            _ => self == other,
        }
    }
}

/// `M + Σ^{1/2} Z T^{1/2}` with `Z` standard normal (drawn row-major).
pub fn sample_matrix_normal<R: Rng + ?Sized>(params: &MatrixNormalParams, rng: &mut R) -> DenseMatrix {
    let z = DenseMatrix::standard_normal(params.rows(), params.cols(), rng).into_inner();
    let mut x = z;
    if !params.row_cov.is_identity() {
        x = params.row_cov.sqrt_matrix() * x;
    }
    if !params.col_cov.is_identity() {
        x *= params.col_cov.sqrt_matrix();
    }
    x += params.mean.as_matrix();
    DenseMatrix::new(x).expect("finite draw")
}

/// Lebesgue log-density of `N_{p,q}(M, Σ, T)`.
pub fn logpdf_matrix_normal(x: &DenseMatrix, params: &MatrixNormalParams) -> Result<f64> {
    if x.rows() != params.rows() || x.cols() != params.cols() {
        return Err(Error::Dimension(format!(
            "state is {}x{} but the law is on {}x{}",
            x.rows(),
            x.cols(),
            params.rows(),
            params.cols()
        )));
    }
    let (p, q) = (x.rows() as f64, x.cols() as f64);
    let centered = x.as_matrix() - params.mean.as_matrix();
    let white = params.row_cov.inv_sqrt_matrix() * centered * params.col_cov.inv_sqrt_matrix();
    let quad = white.norm_squared();
    Ok(-0.5 * quad
        - 0.5 * p * q * (2.0 * PI).ln()
        - 0.5 * q * params.row_cov.log_det()
        - 0.5 * p * params.col_cov.log_det())
}

/// Bartlett factor `L` of a `W_q(r, I_q)` draw `L L^T`: `L_ii^2 ~ χ²(r - i + 1)`,
/// strictly lower entries standard normal.
pub(crate) fn bartlett_factor<R: Rng + ?Sized>(dof: f64, q: usize, rng: &mut R) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(dof - i as f64).expect("dof > q - 1");
        l[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            l[(i, j)] = rng.sample(StandardNormal);
        }
    }
    l
}

fn bartlett_identity<R: Rng + ?Sized>(dof: f64, q: usize, rng: &mut R) -> DMatrix<f64> {
    let l = bartlett_factor(dof, q, rng);
    &l * l.transpose()
}

/// Draw from `W_q(r, T)` by the Bartlett construction `T^{1/2} L L^T T^{1/2}`.
pub fn sample_wishart<R: Rng + ?Sized>(params: &WishartParams, rng: &mut R) -> SpdMatrix {
    let a = bartlett_identity(params.dof, params.dim(), rng);
    let m = if params.scale.is_identity() {
        a
    } else {
        let h = params.scale.sqrt_matrix();
        h * a * h
    };
    spd_from_draw(m)
}

/// Draw from `W_q^{-1}(r, T)` as the inverse of a `W_q(r, T^{-1})` draw.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(params: &WishartParams, rng: &mut R) -> SpdMatrix {
    let a = bartlett_identity(params.dof, params.dim(), rng);
    let m = if params.scale.is_identity() {
        a
    } else {
        let h = params.scale.inv_sqrt_matrix();
        h * a * h
    };
    spd_from_draw(m).inverse()
}

// A Wishart draw is positive-definite with probability one; at extreme
// conditioning the relative spectral check can still fail, in which case the
// smallest eigenvalues are lifted to the tolerance floor.
fn spd_from_draw(m: DMatrix<f64>) -> SpdMatrix {
    match SpdMatrix::new(m.clone()) {
        Ok(s) => s,
        Err(_) => {
            let (values, vectors) = crate::linalg::symmetric_eigen(&crate::linalg::symmetrize(&m))
                .expect("finite Wishart draw");
            let max = values.max().max(f64::MIN_POSITIVE);
            let floor = 2.0 * crate::linalg::SPD_RELATIVE_TOLERANCE * max;
            SpdMatrix::from_spectrum(values.map(|l| l.max(floor)), vectors).expect("lifted spectrum")
        }
    }
}

/// Log-density of `W_q(r, T)` with respect to `μ`.
pub fn logpdf_wishart_mu(s: &SpdMatrix, params: &WishartParams) -> Result<f64> {
    check_dim(s, params)?;
    let (r, q) = (params.dof, params.dim() as f64);
    let tr = trace_of_product(&params.scale.inverse_matrix(), s.as_matrix());
    Ok(0.5 * r * s.log_det()
        - 0.5 * tr
        - 0.5 * r * q * 2f64.ln()
        - 0.5 * r * params.scale.log_det()
        - multivariate_log_gamma(params.dim(), r / 2.0)?)
}

/// Log-density of `W_q^{-1}(r, T)` with respect to `μ`.
pub fn logpdf_invwishart_mu(s: &SpdMatrix, params: &WishartParams) -> Result<f64> {
    check_dim(s, params)?;
    let (r, q) = (params.dof, params.dim() as f64);
    let tr = trace_of_product(params.scale.as_matrix(), &s.inverse_matrix());
    Ok(0.5 * r * params.scale.log_det()
        - 0.5 * tr
        - 0.5 * r * q * 2f64.ln()
        - 0.5 * r * s.log_det()
        - multivariate_log_gamma(params.dim(), r / 2.0)?)
}

fn check_dim(s: &SpdMatrix, params: &WishartParams) -> Result<()> {
    if s.dim() != params.dim() {
        return Err(Error::Dimension(format!("state is {0}x{0}, law is on {1}x{1}", s.dim(), params.dim())));
    }
    Ok(())
}

/// `tr(A B)` for symmetric `A`, `B` without forming the product.
pub(crate) fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Haar-uniform point of the Stiefel manifold via a sign-fixed thin QR.
pub fn sample_uniform_stiefel<R: Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> Result<StiefelPoint> {
    if p < q || q == 0 {
        return Err(Error::Dimension(format!("Stiefel sampling needs p >= q >= 1, got p={p}, q={q}")));
    }
    let z = DenseMatrix::standard_normal(p, q, rng).into_inner();
    let qr = z.qr();
    let r = qr.r();
    let mut u = qr.q();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            u.column_mut(j).neg_mut();
        }
    }
    StiefelPoint::new(u)
}

/// Uniform draw from the orthogonal group `O(p)`.
pub fn sample_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    sample_uniform_stiefel(p, p, rng).expect("square case").into_inner()
}

/// `log dν_U/dLeb` at `x`.
pub fn log_nu_u_density(x: &DenseMatrix, u: &SpdMatrix) -> Result<f64> {
    let (p, q) = (x.rows(), x.cols());
    if p < q {
        return Err(Error::Dimension(format!("ν_U needs p >= q, got p={p}, q={q}")));
    }
    let g = gram(x, u)?;
    Ok(log_nu_u_density_from_gram(&g, u, p))
}

/// `log dν_U/dLeb` given the Gram matrix `x^T U^{-1} x`.
pub fn log_nu_u_density_from_gram(g: &SpdMatrix, u: &SpdMatrix, p: usize) -> f64 {
    let (pf, qf) = (p as f64, g.dim() as f64);
    multivariate_log_gamma(g.dim(), pf / 2.0).expect("p >= q")
        - 0.5 * pf * qf * PI.ln()
        - 0.5 * qf * u.log_det()
        - 0.5 * pf * g.log_det()
}
