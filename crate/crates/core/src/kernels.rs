//! Metropolis-Hastings kernels on `M(p,q)`: random-walk Metropolis, pCN and
//! mixed pCN, plus upcasting of `P+(q)` targets and the induced `P+(q)` chain.
//!
//! Every target carries a [`ReferenceTag`]. A kernel only accepts targets
//! written against the measure its proposal is reversible for, so the
//! acceptance ratio is always the plain density ratio.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{
    bartlett_factor, log_nu_u_density, logpdf_matrix_normal, MatrixNormalParams, ReferenceTag,
};
use crate::error::{Error, Result};
use crate::linalg::{gram, multivariate_log_gamma, DenseMatrix, SpdMatrix};
use crate::rng::{self, ChainRng};

/// The state space a density lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Matrix { p: usize, q: usize },
    Spd { q: usize },
}

pub type LogDensity<S> = Arc<dyn Fn(&S) -> f64 + Send + Sync>;

/// A log-density together with the measure it is written against.
#[derive(Clone)]
pub struct TargetDensity<S> {
    logpdf: LogDensity<S>,
    reference: ReferenceTag,
    space: Space,
    upcast: Option<Arc<Upcast>>,
}

/// The `P+(q)` density and frame an `M(p,q)` target was upcast from.
#[derive(Clone)]
pub struct Upcast {
    pub source: TargetDensity<SpdMatrix>,
    pub frame: SpdMatrix,
}

impl<S> fmt::Debug for TargetDensity<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("reference", &self.reference.name())
            .field("space", &self.space)
            .field("upcast", &self.upcast.is_some())
            .finish()
    }
}

impl<S> TargetDensity<S> {
    pub fn reference(&self) -> &ReferenceTag {
        &self.reference
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn log_density(&self, s: &S) -> f64 {
        (self.logpdf)(s)
    }
}

impl TargetDensity<SpdMatrix> {
    /// A density on `P+(q)` with respect to `μ`.
    pub fn on_spd(q: usize, logpdf: impl Fn(&SpdMatrix) -> f64 + Send + Sync + 'static) -> Self {
        TargetDensity { logpdf: Arc::new(logpdf), reference: ReferenceTag::Mu, space: Space::Spd { q }, upcast: None }
    }

    /// `W_q(r, T)` with respect to `μ`.
    pub fn wishart(params: crate::dists::WishartParams) -> Self {
        let q = params.dim();
        Self::on_spd(q, move |s| crate::dists::logpdf_wishart_mu(s, &params).unwrap_or(f64::NEG_INFINITY))
    }

    /// `W_q^{-1}(r, T)` with respect to `μ`.
    pub fn inverse_wishart(params: crate::dists::WishartParams) -> Self {
        let q = params.dim();
        Self::on_spd(q, move |s| crate::dists::logpdf_invwishart_mu(s, &params).unwrap_or(f64::NEG_INFINITY))
    }

    /// The density of the law of `S^{-1}` when `S` follows this target
    /// (well defined because `μ` is inversion invariant).
    pub fn inverted(&self) -> Self {
        let f = self.logpdf.clone();
        let q = match self.space {
            Space::Spd { q } => q,
            Space::Matrix { q, .. } => q,
        };
        Self::on_spd(q, move |s| f(&s.inverse()))
    }
}

impl TargetDensity<DenseMatrix> {
    pub fn on_matrix(
        p: usize,
        q: usize,
        reference: ReferenceTag,
        logpdf: impl Fn(&DenseMatrix) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_reference(&reference, p, q)?;
        Ok(TargetDensity { logpdf: Arc::new(logpdf), reference, space: Space::Matrix { p, q }, upcast: None })
    }

    pub fn upcast(&self) -> Option<&Upcast> {
        self.upcast.as_deref()
    }

    fn dims(&self) -> (usize, usize) {
        match self.space {
            Space::Matrix { p, q } => (p, q),
            Space::Spd { q } => (q, q),
        }
    }
}

fn check_reference(reference: &ReferenceTag, p: usize, q: usize) -> Result<()> {
    match reference {
        ReferenceTag::Lebesgue => Ok(()),
        ReferenceTag::Mu => Err(Error::ReferenceMismatch { expected: "a measure on M(p,q)".into(), found: "mu".into() }),
        ReferenceTag::NuU { u, p: rp, q: rq } => {
            if *rp != p || *rq != q || u.dim() != p || p < q {
                return Err(Error::Dimension(format!("ν_U tagged for {rp}x{rq} on a {p}x{q} space")));
            }
            Ok(())
        }
        ReferenceTag::Gaussian(g) => {
            if g.rows() != p || g.cols() != q {
                return Err(Error::Dimension(format!(
                    "Gaussian reference on {}x{} for a {p}x{q} space",
                    g.rows(),
                    g.cols()
                )));
            }
            Ok(())
        }
    }
}

/// `x ↦ log π̃(x^T U^{-1} x)` with respect to `ν_U`.
pub fn upcast_target(pi_tilde: &TargetDensity<SpdMatrix>, u: &SpdMatrix, p: usize) -> Result<TargetDensity<DenseMatrix>> {
    if pi_tilde.reference != ReferenceTag::Mu {
        return Err(Error::ReferenceMismatch { expected: "mu".into(), found: pi_tilde.reference.name().into() });
    }
    let q = match pi_tilde.space {
        Space::Spd { q } => q,
        Space::Matrix { .. } => return Err(Error::Dimension("upcasting needs a P+(q) target".into())),
    };
    if u.dim() != p || p < q {
        return Err(Error::Dimension(format!("frame is {0}x{0}, need p = {p} >= q = {q}", u.dim())));
    }
    let f = pi_tilde.logpdf.clone();
    let frame = u.clone();
    let logpdf = move |x: &DenseMatrix| match gram(x, &frame) {
        Ok(g) => f(&g),
        Err(_) => f64::NEG_INFINITY,
    };
    Ok(TargetDensity {
        logpdf: Arc::new(logpdf),
        reference: ReferenceTag::nu(u.clone(), q),
        space: Space::Matrix { p, q },
        upcast: Some(Arc::new(Upcast { source: pi_tilde.clone(), frame: u.clone() })),
    })
}

/// Upcasts `pi_tilde` with the kernel's frame `U` and `p`, and rewrites it
/// against the reference measure the kernel requires.
pub fn upcast_for_kernel(pi_tilde: &TargetDensity<SpdMatrix>, cfg: &KernelConfig) -> Result<TargetDensity<DenseMatrix>> {
    let t = upcast_target(pi_tilde, &cfg.u, cfg.p())?;
    match cfg.kind {
        KernelKind::Mpcn => Ok(t),
        _ => convert_reference(&t, cfg.reference()),
    }
}

/// `log dξ/dLeb` for a reference measure on `M(p,q)`.
pub fn log_reference_density(reference: &ReferenceTag, x: &DenseMatrix) -> f64 {
    match reference {
        ReferenceTag::Lebesgue => 0.0,
        ReferenceTag::NuU { u, .. } => log_nu_u_density(x, u).unwrap_or(f64::INFINITY),
        ReferenceTag::Gaussian(g) => logpdf_matrix_normal(x, g).unwrap_or(f64::NAN),
        ReferenceTag::Mu => f64::NAN,
    }
}

/// Rewrites a target against another reference measure:
/// `log dΠ/dξ' = log dΠ/dξ + log dξ/dLeb - log dξ'/dLeb`.
pub fn convert_reference(target: &TargetDensity<DenseMatrix>, to: ReferenceTag) -> Result<TargetDensity<DenseMatrix>> {
    let (p, q) = target.dims();
    check_reference(&to, p, q)?;
    let f = target.logpdf.clone();
    let from = target.reference.clone();
    let dest = to.clone();
    let logpdf = move |x: &DenseMatrix| {
        let v = f(x);
        if v == f64::NEG_INFINITY {
            return v;
        }
        let out = v + log_reference_density(&from, x) - log_reference_density(&dest, x);
        if out.is_nan() {
            f64::NEG_INFINITY
        } else {
            out
        }
    };
    Ok(TargetDensity { logpdf: Arc::new(logpdf), reference: to, space: target.space, upcast: target.upcast.clone() })
}

pub fn to_lebesgue(target: &TargetDensity<DenseMatrix>) -> Result<TargetDensity<DenseMatrix>> {
    convert_reference(target, ReferenceTag::Lebesgue)
}

pub fn to_gaussian_reference(target: &TargetDensity<DenseMatrix>, params: MatrixNormalParams) -> Result<TargetDensity<DenseMatrix>> {
    convert_reference(target, ReferenceTag::Gaussian(params))
}

pub fn to_nu_reference(target: &TargetDensity<DenseMatrix>, u: SpdMatrix) -> Result<TargetDensity<DenseMatrix>> {
    let (_, q) = target.dims();
    convert_reference(target, ReferenceTag::nu(u, q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rwm,
    Pcn,
    Mpcn,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rwm => "rwm",
            KernelKind::Pcn => "pcn",
            KernelKind::Mpcn => "mpcn",
        })
    }
}

/// Kernel parameters. `v` is ignored by MpCN, `sigma` only used by RWM and
/// `rho` only by pCN and MpCN.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub rho: f64,
    pub sigma: f64,
    pub u: SpdMatrix,
    pub v: SpdMatrix,
}

impl KernelConfig {
    pub fn rwm(sigma: f64, u: SpdMatrix, v: SpdMatrix) -> Result<Self> {
        Self::checked(KernelConfig { kind: KernelKind::Rwm, rho: 0.0, sigma, u, v })
    }

    pub fn pcn(rho: f64, u: SpdMatrix, v: SpdMatrix) -> Result<Self> {
        Self::checked(KernelConfig { kind: KernelKind::Pcn, rho, sigma: 1.0, u, v })
    }

    pub fn mpcn(rho: f64, u: SpdMatrix, q: usize) -> Result<Self> {
        Self::checked(KernelConfig { kind: KernelKind::Mpcn, rho, sigma: 1.0, u, v: SpdMatrix::identity(q) })
    }

    /// Identity-frame configuration of the given kind on `M(p,q)`; the scalar
    /// parameter is `sigma` for RWM and `rho` otherwise.
    pub fn standard(kind: KernelKind, p: usize, q: usize, scalar: f64) -> Result<Self> {
        let (u, v) = (SpdMatrix::identity(p), SpdMatrix::identity(q));
        match kind {
            KernelKind::Rwm => Self::rwm(scalar, u, v),
            KernelKind::Pcn => Self::pcn(scalar, u, v),
            KernelKind::Mpcn => Self::mpcn(scalar, u, q),
        }
    }

    pub fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.kind == KernelKind::Mpcn && self.u.dim() < self.v.dim() {
            return Err(Error::Dimension(format!("need p >= q, got p={}, q={}", self.u.dim(), self.v.dim())));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.u.dim()
    }

    pub fn q(&self) -> usize {
        self.v.dim()
    }

    /// The tunable scalar: `sigma` for RWM, `rho` otherwise.
    pub fn scalar(&self) -> f64 {
        match self.kind {
            KernelKind::Rwm => self.sigma,
            _ => self.rho,
        }
    }

    pub fn with_scalar(&self, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match self.kind {
            KernelKind::Rwm => c.sigma = value,
            _ => c.rho = value,
        }
        c.checked()
    }

    /// The reference measure this kernel's proposal is reversible for.
    pub fn reference(&self) -> ReferenceTag {
        match self.kind {
            KernelKind::Rwm => ReferenceTag::Lebesgue,
            KernelKind::Pcn => ReferenceTag::Gaussian(MatrixNormalParams::centered(self.u.clone(), self.v.clone())),
            KernelKind::Mpcn => ReferenceTag::nu(self.u.clone(), self.q()),
        }
    }
}

/// A kernel with its square-root factors precomputed.
#[derive(Clone, Debug)]
pub struct Kernel {
    cfg: KernelConfig,
    reference: ReferenceTag,
    sqrt_rho: f64,
    sqrt_one_minus_rho: f64,
}

impl Kernel {
    pub fn new(cfg: KernelConfig) -> Result<Self> {
        cfg.validate()?;
        // force the cached factors once so clones share them
        cfg.u.sqrt_matrix();
        cfg.u.inv_sqrt_matrix();
        cfg.v.sqrt_matrix();
        let reference = cfg.reference();
        Ok(Kernel { sqrt_rho: cfg.rho.sqrt(), sqrt_one_minus_rho: (1.0 - cfg.rho).sqrt(), reference, cfg })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &ReferenceTag {
        &self.reference
    }

    /// Refuses targets that are not written against this kernel's reference.
    pub fn check_target(&self, target: &TargetDensity<DenseMatrix>) -> Result<()> {
        if !self.reference.matches(&target.reference) {
            return Err(Error::ReferenceMismatch {
                expected: self.reference.name().into(),
                found: target.reference.name().into(),
            });
        }
        let (p, q) = target.dims();
        if p != self.cfg.p() || q != self.cfg.q() {
            return Err(Error::Dimension(format!(
                "kernel acts on {}x{}, target on {p}x{q}",
                self.cfg.p(),
                self.cfg.q()
            )));
        }
        Ok(())
    }

    /// `U^{1/2} Z V^{1/2}` with `Z` standard normal.
    fn gaussian_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut w = DenseMatrix::standard_normal(self.cfg.p(), self.cfg.q(), rng).into_inner();
        if !self.cfg.u.is_identity() {
            w = self.cfg.u.sqrt_matrix() * w;
        }
        if !self.cfg.v.is_identity() {
            w *= self.cfg.v.sqrt_matrix();
        }
        w
    }

    /// Draws a proposal from the current state.
    pub fn propose<R: Rng + ?Sized>(&self, x: &DenseMatrix, rng: &mut R) -> Result<DenseMatrix> {
        if x.rows() != self.cfg.p() || x.cols() != self.cfg.q() {
            return Err(Error::Dimension(format!(
                "state is {}x{}, kernel acts on {}x{}",
                x.rows(),
                x.cols(),
                self.cfg.p(),
                self.cfg.q()
            )));
        }
        let y = match self.cfg.kind {
            KernelKind::Rwm => x.as_matrix() + self.gaussian_noise(rng) * self.cfg.sigma,
            KernelKind::Pcn => x.as_matrix() * self.sqrt_rho + self.gaussian_noise(rng) * self.sqrt_one_minus_rho,
            KernelKind::Mpcn => x.as_matrix() * self.sqrt_rho + self.mpcn_noise(x, rng)? * self.sqrt_one_minus_rho,
        };
        DenseMatrix::new(y)
    }

    // w ~ N(0, U, V) with V ~ W^{-1}(p, G), G = x^T U^{-1} x. Writing G = K K^T
    // (Cholesky) and the Bartlett draw of W(p, I) as L L^T, V = B B^T with
    // B = K L^{-T}, so w = U^{1/2} Z L^{-1} K^T.
    fn mpcn_noise<R: Rng + ?Sized>(&self, x: &DenseMatrix, rng: &mut R) -> Result<DMatrix<f64>> {
        let (p, q) = (self.cfg.p(), self.cfg.q());
        let g = if self.cfg.u.is_identity() {
            x.as_matrix().tr_mul(x.as_matrix())
        } else {
            let z = self.cfg.u.inv_sqrt_matrix() * x.as_matrix();
            z.tr_mul(&z)
        };
        let k = Cholesky::new(crate::linalg::symmetrize(&g)).ok_or(Error::RankDeficient)?.l();
        let l = bartlett_factor(p as f64, q, rng);
        let m = l.solve_lower_triangular(&k.transpose()).ok_or(Error::RankDeficient)?;
        let z = DenseMatrix::standard_normal(p, q, rng).into_inner();
        let mut w = z * m;
        if !self.cfg.u.is_identity() {
            w = self.cfg.u.sqrt_matrix() * w;
        }
        Ok(w)
    }

    /// One Metropolis step from a state whose log-target is known. Exactly one
    /// uniform is drawn after the proposal whatever the outcome, so coupled
    /// chains stay aligned.
    pub fn step<R: Rng + ?Sized>(
        &self,
        x: &DenseMatrix,
        log_target_x: f64,
        target: &TargetDensity<DenseMatrix>,
        rng: &mut R,
    ) -> Step {
        let proposal = self.propose(x, rng);
        let log_u = rng.random::<f64>().ln();
        if let Ok(y) = proposal {
            if self.cfg.kind == KernelKind::Mpcn && gram(&y, &self.cfg.u).is_err() {
                return Step { state: x.clone(), accepted: false, log_target: log_target_x };
            }
            let log_target_y = target.log_density(&y);
            if accept(log_u, log_target_y - log_target_x) && log_target_y.is_finite() {
                return Step { state: y, accepted: true, log_target: log_target_y };
            }
        }
        Step { state: x.clone(), accepted: false, log_target: log_target_x }
    }
}

/// Accepts iff `log u < min(0, Δ)`; NaN never accepts.
pub fn accept(log_u: f64, delta: f64) -> bool {
    log_u < delta.min(0.0)
}

/// Result of a single kernel step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: DenseMatrix,
    pub accepted: bool,
    pub log_target: f64,
}

fn checked_step<R: Rng + ?Sized>(
    kind: KernelKind,
    x: &DenseMatrix,
    target: &TargetDensity<DenseMatrix>,
    cfg: &KernelConfig,
    rng: &mut R,
) -> Result<Step> {
    if cfg.kind != kind {
        return Err(Error::Config(format!("{kind} step called with a {} configuration", cfg.kind)));
    }
    let kernel = Kernel::new(cfg.clone())?;
    kernel.check_target(target)?;
    if kind == KernelKind::Mpcn {
        gram(x, &cfg.u)?;
    }
    let lx = target.log_density(x);
    if !lx.is_finite() {
        return Err(Error::NonFiniteTarget(lx));
    }
    Ok(kernel.step(x, lx, target, rng))
}

/// Random-walk Metropolis step; the target must be written against Lebesgue measure.
pub fn rwm_step<R: Rng + ?Sized>(x: &DenseMatrix, target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, rng: &mut R) -> Result<Step> {
    checked_step(KernelKind::Rwm, x, target, cfg, rng)
}

/// pCN step; the target must be written against `N_{p,q}(0, U, V)`.
pub fn pcn_step<R: Rng + ?Sized>(x: &DenseMatrix, target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, rng: &mut R) -> Result<Step> {
    checked_step(KernelKind::Pcn, x, target, cfg, rng)
}

/// MpCN step; the target must be written against `ν_U`.
pub fn mpcn_step<R: Rng + ?Sized>(x: &DenseMatrix, target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, rng: &mut R) -> Result<Step> {
    checked_step(KernelKind::Mpcn, x, target, cfg, rng)
}

/// Log-density of the MpCN proposal `x → y` with respect to `ν_U(dy)`.
pub fn mpcn_log_proposal_density(x: &DenseMatrix, y: &DenseMatrix, cfg: &KernelConfig) -> Result<f64> {
    let (p, q) = (x.rows(), x.cols());
    let u = &cfg.u;
    let gx = gram(x, u)?;
    let gy = gram(y, u)?;
    let zx = u.inv_sqrt_matrix() * x.as_matrix();
    let zy = u.inv_sqrt_matrix() * y.as_matrix();
    let cross = zx.tr_mul(&zy);
    let r = gx.as_matrix() + gy.as_matrix() - (&cross + cross.transpose()) * cfg.rho.sqrt();
    let r = SpdMatrix::new(r).map_err(|_| Error::Domain("R(x, y) is not positive-definite".into()))?;
    let (pf, qf) = (p as f64, q as f64);
    let log_c = multivariate_log_gamma(q, pf)? - 2.0 * multivariate_log_gamma(q, pf / 2.0)?;
    Ok(0.5 * pf * qf * (1.0 - cfg.rho).ln() + log_c + 0.5 * pf * (gx.log_det() + gy.log_det()) - pf * r.log_det())
}

/// `[I_q; 0]` mapped by `U^{1/2}`, so its Gram matrix is `I_q`.
pub fn default_initial_state(u: &SpdMatrix, q: usize) -> Result<DenseMatrix> {
    let e = DenseMatrix::stacked_identity(u.dim(), q)?;
    if u.is_identity() {
        Ok(e)
    } else {
        DenseMatrix::new(u.sqrt_matrix() * e.as_matrix())
    }
}

/// A running chain that yields states one at a time.
///
/// When MpCN runs on a target upcast with the same frame `U` as the kernel,
/// the chain is advanced in whitened coordinates `z = U^{-1/2} x` with an
/// identity frame (an exact conjugation of the same kernel), which makes the
/// induced `P+(q)` chain bit-for-bit independent of `U`.
pub struct Sampler {
    kernel: Kernel,
    target: TargetDensity<DenseMatrix>,
    state: DenseMatrix,
    log_target: f64,
    unwhiten: Option<SpdMatrix>,
    frame: Option<SpdMatrix>,
    rng: ChainRng,
    steps: usize,
    accepted: usize,
}

impl Sampler {
    pub fn new(target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, initial: &DenseMatrix, rng: ChainRng) -> Result<Self> {
        Self::build(target, cfg, Some(initial), rng)
    }

    /// Starts from the state whose Gram matrix is `I_q`.
    pub fn with_default_start(target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, rng: ChainRng) -> Result<Self> {
        Self::build(target, cfg, None, rng)
    }

    fn build(target: &TargetDensity<DenseMatrix>, cfg: &KernelConfig, initial: Option<&DenseMatrix>, rng: ChainRng) -> Result<Self> {
        let kernel = Kernel::new(cfg.clone())?;
        kernel.check_target(target)?;
        let frame = target.upcast.as_ref().map(|u| u.frame.clone());
        let whiten = cfg.kind == KernelKind::Mpcn
            && !cfg.u.is_identity()
            && target.upcast.as_ref().is_some_and(|up| up.frame.as_matrix() == cfg.u.as_matrix());
        let (p, q) = (cfg.p(), cfg.q());
        let (kernel, internal_target, state, unwhiten) = if whiten {
            let up = target.upcast.as_ref().expect("checked above");
            let identity = SpdMatrix::identity(p);
            let inner = upcast_target(&up.source, &identity, p)?;
            let mut inner_cfg = cfg.clone();
            inner_cfg.u = identity;
            let z = match initial {
                Some(x) => DenseMatrix::new(cfg.u.inv_sqrt_matrix() * x.as_matrix())?,
                None => DenseMatrix::stacked_identity(p, q)?,
            };
            (Kernel::new(inner_cfg)?, inner, z, Some(cfg.u.clone()))
        } else {
            let x = match initial {
                Some(x) => x.clone(),
                None => default_initial_state(frame.as_ref().unwrap_or(&cfg.u), q)?,
            };
            (kernel, target.clone(), x, None)
        };
        if state.rows() != p || state.cols() != q {
            return Err(Error::Dimension(format!("initial state is {}x{}, kernel acts on {p}x{q}", state.rows(), state.cols())));
        }
        let log_target = internal_target.log_density(&state);
        if !log_target.is_finite() {
            return Err(Error::NonFiniteTarget(log_target));
        }
        let frame = if unwhiten.is_some() { Some(SpdMatrix::identity(p)) } else { frame };
        Ok(Sampler { kernel, target: internal_target, state, log_target, unwhiten, frame, rng, steps: 0, accepted: 0 })
    }

    /// Advances one step and reports whether the proposal was accepted.
    pub fn step(&mut self) -> bool {
        let s = self.kernel.step(&self.state, self.log_target, &self.target, &mut self.rng);
        self.steps += 1;
        if s.accepted {
            self.accepted += 1;
            self.state = s.state;
            self.log_target = s.log_target;
        }
        s.accepted
    }

    /// The current state in the caller's coordinates.
    pub fn state(&self) -> DenseMatrix {
        match &self.unwhiten {
            Some(u) => DenseMatrix::new(u.sqrt_matrix() * self.state.as_matrix()).expect("finite state"),
            None => self.state.clone(),
        }
    }

    /// The current state in the coordinates the chain is advanced in.
    pub fn internal_state(&self) -> &DenseMatrix {
        &self.state
    }

    pub fn is_whitened(&self) -> bool {
        self.unwhiten.is_some()
    }

    pub fn log_target(&self) -> f64 {
        self.log_target
    }

    /// `x^T U^{-1} x` for the target's upcast frame (identity if none).
    pub fn current_gram(&self) -> Result<SpdMatrix> {
        match &self.frame {
            Some(f) => gram(&self.state, f),
            None => gram(&self.state, &SpdMatrix::identity(self.state.rows())),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

/// States of a chain advanced in whitened coordinates, with the frame that maps
/// them back (`x = U^{1/2} z`).
#[derive(Clone, Debug, PartialEq)]
pub struct Whitened {
    pub frame: SpdMatrix,
    pub states: Vec<DenseMatrix>,
}

/// A recorded chain: `states` and `log_target` hold the initial state followed
/// by one entry per step; `accepted` holds one flag per step.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace<S> {
    pub states: Vec<S>,
    pub accepted: Vec<bool>,
    pub log_target: Vec<f64>,
    pub seed: u64,
    pub whitened: Option<Whitened>,
}

impl<S> ChainTrace<S> {
    pub fn n_steps(&self) -> usize {
        self.accepted.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }
}

/// Runs `n_steps` of the configured kernel from `initial` using stream 0 of `seed`.
pub fn run_chain(
    initial: &DenseMatrix,
    target: &TargetDensity<DenseMatrix>,
    cfg: &KernelConfig,
    n_steps: usize,
    seed: u64,
) -> Result<ChainTrace<DenseMatrix>> {
    let sampler = Sampler::new(target, cfg, initial, rng::stream(seed, 0))?;
    Ok(record(sampler, n_steps, seed))
}

/// As [`run_chain`], starting from the state whose Gram matrix is `I_q`.
pub fn run_chain_default_start(
    target: &TargetDensity<DenseMatrix>,
    cfg: &KernelConfig,
    n_steps: usize,
    seed: u64,
) -> Result<ChainTrace<DenseMatrix>> {
    let sampler = Sampler::with_default_start(target, cfg, rng::stream(seed, 0))?;
    Ok(record(sampler, n_steps, seed))
}

fn record(mut sampler: Sampler, n_steps: usize, seed: u64) -> ChainTrace<DenseMatrix> {
    let whitened = sampler.is_whitened();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut internal = Vec::new();
    let mut accepted = Vec::with_capacity(n_steps);
    let mut log_target = Vec::with_capacity(n_steps + 1);
    states.push(sampler.state());
    if whitened {
        internal.push(sampler.internal_state().clone());
    }
    log_target.push(sampler.log_target());
    for _ in 0..n_steps {
        accepted.push(sampler.step());
        states.push(sampler.state());
        if whitened {
            internal.push(sampler.internal_state().clone());
        }
        log_target.push(sampler.log_target());
    }
    let whitened = sampler.unwhiten.clone().map(|frame| Whitened { frame, states: internal });
    ChainTrace { states, accepted, log_target, seed, whitened }
}

/// The `P+(q)` chain `S_n = X_n^T U^{-1} X_n`; acceptance flags and log-target
/// values are carried over unchanged.
pub fn induced_spd_chain(trace: &ChainTrace<DenseMatrix>, u: &SpdMatrix) -> Result<ChainTrace<SpdMatrix>> {
    let states = match &trace.whitened {
        Some(w) if w.frame.as_matrix() == u.as_matrix() => {
            let identity = SpdMatrix::identity(u.dim());
            w.states.iter().map(|z| gram(z, &identity)).collect::<Result<Vec<_>>>()?
        }
        _ => trace.states.iter().map(|x| gram(x, u)).collect::<Result<Vec<_>>>()?,
    };
    Ok(ChainTrace {
        states,
        accepted: trace.accepted.clone(),
        log_target: trace.log_target.clone(),
        seed: trace.seed,
        whitened: None,
    })
}
