//! Monte-Carlo evaluation of the relative expected change of the drift function
//! `V(S) = π̃(S)^{-α}` under the MpCN-induced random walk on `P+(q)`, at
//! degenerate states and in the tails.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::{sample_orthogonal, trace_of_product};
use crate::error::{Error, Result};
use crate::kernels::TargetDensity;
use crate::linalg::{circ, symmetric_eigen, symmetrize, SpdMatrix};
use crate::noise::{eigen_logdensity_rho0, EpsilonLawParams, EpsilonSampler};
use crate::rng::{self, ChainRng};

/// A symmetric positive semi-definite matrix; unlike [`SpdMatrix`] it may be
/// singular.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix(DMatrix<f64>);

impl PsdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let m = symmetrize(&m);
        let (values, _) = symmetric_eigen(&m)?;
        let max = values.max().abs().max(1.0);
        if values.min() < -1e-12 * max {
            return Err(Error::NotPositiveDefinite { min: values.min(), max: values.max() });
        }
        Ok(PsdMatrix(m))
    }

    /// `diag(s, 0, ..., 0)`.
    pub fn degenerate_diagonal(q: usize, s: f64) -> Result<Self> {
        if q == 0 || !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("need q >= 1 and s >= 0, got q={q}, s={s}")));
        }
        let mut m = DMatrix::zeros(q, q);
        m[(0, 0)] = s;
        Ok(PsdMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl From<&SpdMatrix> for PsdMatrix {
    fn from(s: &SpdMatrix) -> Self {
        PsdMatrix(s.as_matrix().clone())
    }
}

/// `log η(ε, S) = (r/2) log det ε - tr[(ε - I) S] / 2`, the log ratio
/// `π̃(ε ∘ S) / π̃(S)` for a Wishart target with identity scale.
pub fn eta(epsilon: &SpdMatrix, s: &PsdMatrix, r: f64) -> f64 {
    let tr_es = trace_of_product(epsilon.as_matrix(), s.as_matrix());
    0.5 * r * epsilon.log_det() - 0.5 * (tr_es - s.as_matrix().trace())
}

/// `(η^{-α} - 1) min(1, η)` from `log η`, evaluated without overflow. The value
/// lies in `[-1, 1]`.
pub fn drift_integrand(log_eta: f64, alpha: f64) -> f64 {
    if log_eta.is_nan() {
        return f64::NAN;
    }
    if log_eta >= 0.0 {
        (-alpha * log_eta).exp() - 1.0
    } else {
        ((1.0 - alpha) * log_eta).exp() - log_eta.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMethod {
    Direct,
    ParetoIs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// Wishart degrees of freedom.
    pub r: f64,
    pub p: usize,
    pub q: usize,
    pub alpha: f64,
    pub n_samples: usize,
    pub method: DriftMethod,
    #[serde(default = "default_pareto_shape")]
    pub pareto_shape: f64,
    #[serde(default = "default_pareto_scale")]
    pub pareto_scale: f64,
    /// Correlation of the noise law; Pareto importance sampling needs `rho = 0`.
    #[serde(default)]
    pub rho: f64,
}

fn default_pareto_shape() -> f64 {
    0.5
}

fn default_pareto_scale() -> f64 {
    1.0
}

impl DriftConfig {
    pub fn new(r: f64, p: usize, q: usize, alpha: f64, n_samples: usize, method: DriftMethod) -> Result<Self> {
        let c = DriftConfig {
            r,
            p,
            q,
            alpha,
            n_samples,
            method,
            pareto_shape: default_pareto_shape(),
            pareto_scale: default_pareto_scale(),
            rho: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > self.q as f64 - 1.0) {
            return Err(Error::Domain(format!("r must exceed q - 1 = {}, got {}", self.q as f64 - 1.0, self.r)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be at least 1".into()));
        }
        if !(self.pareto_shape > 0.0) || !(self.pareto_scale > 0.0) {
            return Err(Error::Domain("Pareto shape and scale must be positive".into()));
        }
        if self.method == DriftMethod::ParetoIs && self.rho != 0.0 {
            return Err(Error::Domain("Pareto importance sampling is only available for rho = 0".into()));
        }
        EpsilonLawParams::new(self.rho, self.p, self.q)?;
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut c = self.clone();
        c.alpha = alpha;
        c.validate()?;
        Ok(c)
    }

    fn noise(&self) -> EpsilonLawParams {
        EpsilonLawParams { rho: self.rho, p: self.p, q: self.q }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

fn plain_estimate(values: &[f64]) -> DriftEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    DriftEstimate { estimate: mean, std_error: se, n_samples: n }
}

/// Symmetrized Pareto reference on `(0, ∞)`: with probability 1/2 a
/// Pareto(scale c, shape a) draw, otherwise its reciprocal scaled by `c^2`,
/// so the law is invariant under `λ ↦ c^2/λ`.
#[derive(Clone, Copy, Debug)]
struct ParetoReference {
    shape: f64,
    scale: f64,
}

impl ParetoReference {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        let x = self.scale * u.powf(-1.0 / self.shape);
        if rng.random::<bool>() {
            x
        } else {
            self.scale * self.scale / x
        }
    }

    fn log_density(&self, l: f64) -> f64 {
        let (a, c) = (self.shape, self.scale);
        let base = (0.5 * a).ln() - c.ln();
        let t = l / c;
        if t >= 1.0 {
            base - (a + 1.0) * t.ln()
        } else {
            base + (a - 1.0) * t.ln()
        }
    }
}

fn ln_factorial(q: usize) -> f64 {
    (1..=q).map(|k| (k as f64).ln()).sum()
}

/// Estimates `∫ (η(ε,S)^{-α} - 1) min(1, η(ε,S)) L(dε)`.
pub fn drift_ratio<R: Rng + ?Sized>(s: &PsdMatrix, cfg: &DriftConfig, rng: &mut R) -> Result<DriftEstimate> {
    cfg.validate()?;
    if s.dim() != cfg.q {
        return Err(Error::Dimension(format!("state is {0}x{0}, configuration has q = {1}", s.dim(), cfg.q)));
    }
    match cfg.method {
        DriftMethod::Direct => {
            let sampler = EpsilonSampler::new(cfg.noise())?;
            let values: Vec<f64> = (0..cfg.n_samples)
                .map(|_| drift_integrand(eta(&sampler.sample(rng), s, cfg.r), cfg.alpha))
                .collect();
            Ok(plain_estimate(&values))
        }
        DriftMethod::ParetoIs => pareto_is(s, cfg, rng),
    }
}

fn pareto_is<R: Rng + ?Sized>(s: &PsdMatrix, cfg: &DriftConfig, rng: &mut R) -> Result<DriftEstimate> {
    let reference = ParetoReference { shape: cfg.pareto_shape, scale: cfg.pareto_scale };
    let q = cfg.q;
    let log_qfact = ln_factorial(q);
    let mut log_w = Vec::with_capacity(cfg.n_samples);
    let mut h = Vec::with_capacity(cfg.n_samples);
    let mut lambdas = vec![0.0; q];
    for _ in 0..cfg.n_samples {
        for l in lambdas.iter_mut() {
            *l = reference.sample(rng);
        }
        lambdas.sort_by(f64::total_cmp);
        let o = sample_orthogonal(q, rng);
        let lw = match eigen_logdensity_rho0(&lambdas, cfg.p, q) {
            Ok(v) => v - lambdas.iter().map(|&l| reference.log_density(l)).sum::<f64>() - log_qfact,
            Err(_) => f64::NEG_INFINITY,
        };
        let e = &o * DMatrix::from_diagonal(&DVector::from_column_slice(&lambdas)) * o.transpose();
        let log_det: f64 = lambdas.iter().map(|l| l.ln()).sum();
        let tr = trace_of_product(&symmetrize(&e), s.as_matrix()) - s.as_matrix().trace();
        log_w.push(lw);
        h.push(if lw == f64::NEG_INFINITY { 0.0 } else { drift_integrand(0.5 * cfg.r * log_det - 0.5 * tr, cfg.alpha) });
    }
    Ok(self_normalized(&log_w, &h))
}

fn self_normalized(log_w: &[f64], h: &[f64]) -> DriftEstimate {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let est = w.iter().zip(h).map(|(w, h)| w * h).sum::<f64>() / total;
    let var = w.iter().zip(h).map(|(w, h)| (w / total).powi(2) * (h - est).powi(2)).sum::<f64>();
    DriftEstimate { estimate: est, std_error: var.sqrt(), n_samples: log_w.len() }
}

/// One row of a drift sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub s: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Evaluates [`drift_ratio`] at `diag(s, 0, .., 0)` for every `(s, α)` pair.
/// Each grid point draws from its own stream keyed by `(seed, s, α)`, so the
/// table does not depend on scheduling.
pub fn drift_sweep(s_grid: &[f64], alpha_grid: &[f64], cfg: &DriftConfig, seed: u64) -> Result<Vec<DriftRow>> {
    let points: Vec<(f64, f64)> = s_grid.iter().flat_map(|&s| alpha_grid.iter().map(move |&a| (s, a))).collect();
    points
        .par_iter()
        .map(|&(s, alpha)| {
            let c = cfg.with_alpha(alpha)?;
            let state = PsdMatrix::degenerate_diagonal(cfg.q, s)?;
            let mut r = sweep_stream(seed, s, alpha);
            let e = drift_ratio(&state, &c, &mut r)?;
            Ok(DriftRow { s, alpha, estimate: e.estimate, std_error: e.std_error, n_samples: e.n_samples })
        })
        .collect()
}

/// The stream used for grid point `(s, α)` of a sweep.
pub fn sweep_stream(seed: u64, s: f64, alpha: f64) -> ChainRng {
    rng::keyed(seed, &[rng::float_key(s), rng::float_key(alpha)])
}

pub const SWEEP_CSV_HEADER: &str = "s,alpha,estimate,std_error,n_samples";

pub fn write_sweep_csv<W: Write>(rows: &[DriftRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.s, r.alpha, r.estimate, r.std_error, r.n_samples)?;
    }
    Ok(())
}

/// Estimates `(P̃V - V)/V` for `V = π̃^{-α}` along a sequence of states, using
/// direct draws of `ε` with the configured `ρ` and `p`.
pub fn tail_drift_probe<R: Rng + ?Sized>(
    target: &TargetDensity<SpdMatrix>,
    states: &[SpdMatrix],
    cfg: &DriftConfig,
    rng: &mut R,
) -> Result<Vec<DriftEstimate>> {
    let mut c = cfg.clone();
    c.method = DriftMethod::Direct;
    c.validate()?;
    let sampler = EpsilonSampler::new(c.noise())?;
    states
        .iter()
        .map(|s| {
            let base = target.log_density(s);
            if !base.is_finite() {
                return Err(Error::NonFiniteTarget(base));
            }
            let values: Vec<f64> = (0..c.n_samples)
                .map(|_| {
                    let e = sampler.sample(rng);
                    let log_eta = match circ(&e, s) {
                        Ok(next) => target.log_density(&next) - base,
                        Err(_) => f64::NEG_INFINITY,
                    };
                    drift_integrand(log_eta, c.alpha)
                })
                .collect();
            Ok(plain_estimate(&values))
        })
        .collect()
}
