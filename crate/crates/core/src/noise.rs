//! The multiplicative noise `ε` of the random walk that MpCN induces on `P+(q)`:
//! a proposal from `S` is `ε ∘ S` with `ε` drawn independently of `S` and `U`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelConfig};
use crate::linalg::{circ, gram, DenseMatrix, SpdMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonLawParams {
    pub rho: f64,
    pub p: usize,
    pub q: usize,
}

impl EpsilonLawParams {
    pub fn new(rho: f64, p: usize, q: usize) -> Result<Self> {
        if q == 0 || p < q {
            return Err(Error::Dimension(format!("need p >= q >= 1, got p={p}, q={q}")));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1), got {rho}")));
        }
        Ok(EpsilonLawParams { rho, p, q })
    }
}

/// Reusable sampler of `ε`: the Gram matrix `y^T y` of an MpCN proposal from
/// `[I_q; 0]` with identity frame.
#[derive(Clone, Debug)]
pub struct EpsilonSampler {
    kernel: Kernel,
    x0: DenseMatrix,
    identity: SpdMatrix,
}

impl EpsilonSampler {
    pub fn new(params: EpsilonLawParams) -> Result<Self> {
        let x0 = DenseMatrix::stacked_identity(params.p, params.q)?;
        Self::from_start(params, x0, SpdMatrix::identity(params.p))
    }

    /// Uses an arbitrary start `x0` and frame `U`, which must satisfy
    /// `x0^T U^{-1} x0 = I_q`.
    pub fn from_start(params: EpsilonLawParams, x0: DenseMatrix, u: SpdMatrix) -> Result<Self> {
        let g = gram(&x0, &u)?;
        let err = (g.as_matrix() - nalgebra::DMatrix::<f64>::identity(params.q, params.q)).norm();
        if err > 1e-10 {
            return Err(Error::Domain(format!("start state must have unit Gram matrix (error {err:e})")));
        }
        let kernel = Kernel::new(KernelConfig::mpcn(params.rho, u.clone(), params.q)?)?;
        Ok(EpsilonSampler { kernel, x0, identity: u })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdMatrix {
        loop {
            if let Ok(e) = self.kernel.propose(&self.x0, rng).and_then(|y| gram(&y, &self.identity)) {
                return e;
            }
        }
    }
}

/// One draw of `ε`.
pub fn sample_epsilon<R: Rng + ?Sized>(params: &EpsilonLawParams, rng: &mut R) -> Result<SpdMatrix> {
    Ok(EpsilonSampler::new(*params)?.sample(rng))
}

/// Unnormalized log joint density of the ascending eigenvalues of `ε` at `ρ = 0`:
/// `Σ_i [((p-q-1)/2) log λ_i - p log(1+λ_i)] + Σ_{i<j} log(λ_j - λ_i)`.
pub fn eigen_logdensity_rho0(lambdas: &[f64], p: usize, q: usize) -> Result<f64> {
    if lambdas.len() != q || q == 0 {
        return Err(Error::Dimension(format!("{} eigenvalues supplied for q = {q}", lambdas.len())));
    }
    if p < q {
        return Err(Error::Dimension(format!("need p >= q, got p={p}, q={q}")));
    }
    if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("eigenvalues must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("eigenvalues must be sorted ascending".into()));
    }
    let (pf, qf) = (p as f64, q as f64);
    let mut acc = 0.0;
    for (i, &l) in lambdas.iter().enumerate() {
        acc += 0.5 * (pf - qf - 1.0) * l.ln() - pf * l.ln_1p();
        for &m in &lambdas[i + 1..] {
            acc += (m - l).ln();
        }
    }
    Ok(acc)
}

/// Proposal of the induced random walk: `ε ∘ S`.
pub fn spd_random_walk_step<R: Rng + ?Sized>(s: &SpdMatrix, params: &EpsilonLawParams, rng: &mut R) -> Result<SpdMatrix> {
    let e = sample_epsilon(params, rng)?;
    circ(&e, s)
}
