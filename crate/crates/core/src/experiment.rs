//! JSON-configured experiments. Each experiment is a pure function of its
//! configuration and seed and writes CSV/JSON tables plus a `manifest.json`
//! echoing the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    benchmark_run, cloud_mean_log_eigenvalue, cloud_spread, proposal_cloud, tune_scalar, write_cloud_csv,
    write_distance_csv, BenchmarkReport, TuneOptions, TuningSummary,
};
use crate::dists::{sample_wishart, MatrixNormalParams, ReferenceTag, WishartParams};
use crate::drift::{drift_sweep, write_sweep_csv, DriftConfig};
use crate::error::{Error, Result};
use crate::kernels::{induced_spd_chain, run_chain_default_start, upcast_for_kernel, KernelConfig, KernelKind, TargetDensity};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::rng;
use crate::stats::quantile;
use crate::sv::{ingest_returns, pseudo_marginal_chain, simulate_series, write_trace_csv, ObservationSeries, PfConfig, SvModel};

/// A square matrix given either as rows or as a multiple of the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Identity {
        identity: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MatrixSpec {
    pub fn identity(n: usize) -> Self {
        MatrixSpec::Identity { identity: n, scale: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixSpec::Rows(r) => r.len(),
            MatrixSpec::Identity { identity, .. } => *identity,
        }
    }

    fn dense(&self) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Rows(rows) => {
                let n = rows.len();
                let m = rows.first().map(|r| r.len()).unwrap_or(0);
                if n == 0 || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::Dimension("matrix rows must be nonempty and of equal length".into()));
                }
                Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
            }
            MatrixSpec::Identity { identity, scale } => Ok(DMatrix::identity(*identity, *identity) * *scale),
        }
    }

    pub fn spd(&self) -> Result<SpdMatrix> {
        let m = self.dense()?;
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::Domain("matrix is not symmetric".into()));
        }
        SpdMatrix::new(m)
    }
}

/// Target distribution families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `W_q(r, T)` on `P+(q)`, sampled on `M(p,q)` by upcasting.
    Wishart { dof: f64, scale: MatrixSpec },
    /// `W_q^{-1}(r, T)` on `P+(q)`, sampled on `M(p,q)` by upcasting.
    InverseWishart { dof: f64, scale: MatrixSpec },
    /// `N_{p,q}(M, Σ, T)` on `M(p,q)`.
    MatrixNormal {
        row_cov: MatrixSpec,
        col_cov: MatrixSpec,
        #[serde(default)]
        mean: Option<Vec<Vec<f64>>>,
    },
}

impl TargetSpec {
    /// `(p, q)` implied by the target alone; `p` is `None` for `P+(q)` targets.
    fn dims(&self) -> (Option<usize>, usize) {
        match self {
            TargetSpec::Wishart { scale, .. } | TargetSpec::InverseWishart { scale, .. } => (None, scale.dim()),
            TargetSpec::MatrixNormal { row_cov, col_cov, .. } => (Some(row_cov.dim()), col_cov.dim()),
        }
    }

    fn wishart_params(&self) -> Result<Option<WishartParams>> {
        match self {
            TargetSpec::Wishart { dof, scale } | TargetSpec::InverseWishart { dof, scale } => {
                Ok(Some(WishartParams::new(*dof, field("target.scale", scale.spd())?).map_err(|e| at("target.dof", e))?))
            }
            TargetSpec::MatrixNormal { .. } => Ok(None),
        }
    }

    fn spd_target(&self) -> Result<Option<TargetDensity<SpdMatrix>>> {
        let params = self.wishart_params()?;
        Ok(match (self, params) {
            (TargetSpec::Wishart { .. }, Some(w)) => Some(TargetDensity::wishart(w)),
            (TargetSpec::InverseWishart { .. }, Some(w)) => Some(TargetDensity::inverse_wishart(w)),
            _ => None,
        })
    }

    /// The target on `M(p,q)`, written against the kernel's reference measure.
    pub fn build(&self, cfg: &KernelConfig) -> Result<TargetDensity<DenseMatrix>> {
        if let Some(pi) = self.spd_target()? {
            return upcast_for_kernel(&pi, cfg);
        }
        let TargetSpec::MatrixNormal { row_cov, col_cov, mean } = self else { unreachable!() };
        let row = field("target.row_cov", row_cov.spd())?;
        let col = field("target.col_cov", col_cov.spd())?;
        let (p, q) = (row.dim(), col.dim());
        let m = match mean {
            Some(rows) => field("target.mean", MatrixSpec::Rows(rows.clone()).dense().and_then(DenseMatrix::new))?,
            None => DenseMatrix::zeros(p, q)?,
        };
        let params = field("target.mean", MatrixNormalParams::new(m, row, col))?;
        let law = params.clone();
        let lebesgue = TargetDensity::on_matrix(p, q, ReferenceTag::Lebesgue, move |x| {
            crate::dists::logpdf_matrix_normal(x, &law).unwrap_or(f64::NEG_INFINITY)
        })?;
        crate::kernels::convert_reference(&lebesgue, cfg.reference())
    }
}

/// Kernel settings. `p` defaults to `q` for `P+(q)` targets; `u` and `v`
/// default to identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub u: Option<MatrixSpec>,
    #[serde(default)]
    pub v: Option<MatrixSpec>,
}

impl KernelSpec {
    pub fn build(&self, q: usize, implied_p: Option<usize>) -> Result<KernelConfig> {
        let p = match (self.p, implied_p) {
            (Some(p), Some(t)) if p != t => {
                return Err(Error::Config(format!("kernel.p: {p} conflicts with the target's row dimension {t}")))
            }
            (Some(p), _) => p,
            (None, Some(t)) => t,
            (None, None) => q,
        };
        let u = match &self.u {
            Some(m) => field("kernel.u", m.spd())?,
            None => SpdMatrix::identity(p),
        };
        let v = match &self.v {
            Some(m) => field("kernel.v", m.spd())?,
            None => SpdMatrix::identity(q),
        };
        if u.dim() != p {
            return Err(Error::Config(format!("kernel.u: expected {p}x{p}, got {0}x{0}", u.dim())));
        }
        if v.dim() != q {
            return Err(Error::Config(format!("kernel.v: expected {q}x{q}, got {0}x{0}", v.dim())));
        }
        let cfg = KernelConfig { kind: self.kind, rho: self.rho.unwrap_or(0.5), sigma: self.sigma.unwrap_or(0.5), u, v };
        let name = if self.kind == KernelKind::Rwm { "kernel.sigma" } else { "kernel.rho" };
        field(name, cfg.checked())
    }
}

/// Bisection settings for scalar tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSpec {
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    #[serde(default = "default_pilot")]
    pub pilot_steps: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_sigma")]
    pub initial_sigma: f64,
    #[serde(default = "default_rho")]
    pub initial_rho: f64,
}

fn default_band() -> (f64, f64) {
    (0.2, 0.4)
}
fn default_pilot() -> usize {
    2000
}
fn default_rounds() -> usize {
    20
}
fn default_sigma() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    0.5
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec {
            band: default_band(),
            pilot_steps: default_pilot(),
            max_rounds: default_rounds(),
            initial_sigma: default_sigma(),
            initial_rho: default_rho(),
        }
    }
}

impl TuneSpec {
    pub fn options(&self) -> TuneOptions {
        TuneOptions { band: self.band, pilot_steps: self.pilot_steps, max_rounds: self.max_rounds, ..TuneOptions::default() }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("tune.band: need 0 <= lo < hi <= 1, got ({lo}, {hi})")));
        }
        if self.pilot_steps == 0 || self.max_rounds == 0 {
            return Err(Error::Config("tune: pilot_steps and max_rounds must be positive".into()));
        }
        if !(self.initial_sigma > 0.0) {
            return Err(Error::Config("tune.initial_sigma: must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.initial_rho) {
            return Err(Error::Config("tune.initial_rho: must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Run a kernel on a target and record the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub target: TargetSpec,
    pub kernel: KernelSpec,
    pub n_steps: usize,
}

/// Which target of the benchmark pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkTarget {
    Wishart,
    InverseWishart,
}

impl BenchmarkTarget {
    pub fn label(self) -> &'static str {
        match self {
            BenchmarkTarget::Wishart => "wishart",
            BenchmarkTarget::InverseWishart => "inverse_wishart",
        }
    }
}

/// Running-mean distance comparison of tuned kernels on Wishart and
/// Inverse-Wishart targets with a randomly drawn scale `T ~ W_q(scale_dof, I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub q: usize,
    pub dof: f64,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub scale_dof: Option<f64>,
    #[serde(default = "all_targets")]
    pub targets: Vec<BenchmarkTarget>,
    #[serde(default = "all_kernels")]
    pub kernels: Vec<KernelKind>,
    pub n_steps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub tune: TuneSpec,
}

fn all_targets() -> Vec<BenchmarkTarget> {
    vec![BenchmarkTarget::Wishart, BenchmarkTarget::InverseWishart]
}

fn all_kernels() -> Vec<KernelKind> {
    vec![KernelKind::Rwm, KernelKind::Pcn, KernelKind::Mpcn]
}

/// Drift-ratio table over a grid of `s` and `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSweepConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub drift: DriftConfig,
    pub s_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

/// Log-eigenvalue clouds of proposals from the state with Gram matrix `I_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalCloudConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub q: usize,
    pub p_values: Vec<usize>,
    #[serde(default = "all_kernels")]
    pub kernels: Vec<KernelKind>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_cloud_n")]
    pub n: usize,
}

fn default_cloud_n() -> usize {
    1000
}

/// Parameters of the volatility model other than `Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvModelSpec {
    #[serde(default)]
    pub sigma0: Option<MatrixSpec>,
    #[serde(default = "default_intensity")]
    pub jump_intensity: f64,
    #[serde(default = "default_jump_mean")]
    pub jump_mean: f64,
}

fn default_intensity() -> f64 {
    0.4
}
fn default_jump_mean() -> f64 {
    1.0 / 60.0
}

impl Default for SvModelSpec {
    fn default() -> Self {
        SvModelSpec { sigma0: None, jump_intensity: default_intensity(), jump_mean: default_jump_mean() }
    }
}

impl SvModelSpec {
    fn build(&self, omega: SpdMatrix) -> Result<SvModel> {
        let q = omega.dim();
        let sigma0 = match &self.sigma0 {
            Some(m) => field("model.sigma0", m.spd())?,
            None => SpdMatrix::scaled_identity(q, 0.05)?,
        };
        field("model", SvModel::new(omega, sigma0, self.jump_intensity, self.jump_mean))
    }
}

/// Simulate a return series from the volatility model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvSimulateConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub omega: MatrixSpec,
    #[serde(default)]
    pub model: SvModelSpec,
    pub n_obs: usize,
}

/// Where the returns for a fit come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source", deny_unknown_fields)]
pub enum SvData {
    /// Daily log-returns from a CSV file, detrended and multiplied by `rescale`.
    Csv {
        path: PathBuf,
        #[serde(default = "one")]
        rescale: f64,
    },
    /// A series simulated from the model with the given `Ω` (stream 2 of the seed).
    Synthetic { omega: MatrixSpec, n_obs: usize },
    /// No observations: the chain targets the prior.
    None { q: usize },
}

/// Pseudo-marginal fit of `Ω` with an Inverse-Wishart prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvFitConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: SvData,
    #[serde(default)]
    pub model: SvModelSpec,
    pub prior_dof: f64,
    #[serde(default)]
    pub prior_scale: Option<MatrixSpec>,
    pub kernel: KernelSpec,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_ess_fraction")]
    pub ess_threshold_fraction: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub burn_in: usize,
}

fn default_particles() -> usize {
    1000
}
fn default_ess_fraction() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Sample(SampleConfig),
    Benchmark(BenchmarkConfig),
    DriftSweep(DriftSweepConfig),
    ProposalCloud(ProposalCloudConfig),
    SvFit(SvFitConfig),
    SvSimulate(SvSimulateConfig),
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| at(name, e))
}

fn at(name: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{name}: {other}")),
    }
}

impl ExperimentConfig {
    /// Parses a JSON config; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let ExperimentConfig::SvFit(c) = &mut cfg {
            if let SvData::Csv { path: data, .. } = &mut c.data {
                if data.is_relative() {
                    if let Some(dir) = path.parent() {
                        *data = dir.join(&*data);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Sample(_) => "sample",
            ExperimentConfig::Benchmark(_) => "benchmark",
            ExperimentConfig::DriftSweep(_) => "drift-sweep",
            ExperimentConfig::ProposalCloud(_) => "proposal-cloud",
            ExperimentConfig::SvFit(_) => "sv-fit",
            ExperimentConfig::SvSimulate(_) => "sv-simulate",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Sample(c) => c.seed,
            ExperimentConfig::Benchmark(c) => c.seed,
            ExperimentConfig::DriftSweep(c) => c.seed,
            ExperimentConfig::ProposalCloud(c) => c.seed,
            ExperimentConfig::SvFit(c) => c.seed,
            ExperimentConfig::SvSimulate(c) => c.seed,
        }
    }

    fn seed_mut(&mut self) -> &mut u64 {
        match self {
            ExperimentConfig::Sample(c) => &mut c.seed,
            ExperimentConfig::Benchmark(c) => &mut c.seed,
            ExperimentConfig::DriftSweep(c) => &mut c.seed,
            ExperimentConfig::ProposalCloud(c) => &mut c.seed,
            ExperimentConfig::SvFit(c) => &mut c.seed,
            ExperimentConfig::SvSimulate(c) => &mut c.seed,
        }
    }

    fn output_dir_mut(&mut self) -> &mut Option<PathBuf> {
        match self {
            ExperimentConfig::Sample(c) => &mut c.output_dir,
            ExperimentConfig::Benchmark(c) => &mut c.output_dir,
            ExperimentConfig::DriftSweep(c) => &mut c.output_dir,
            ExperimentConfig::ProposalCloud(c) => &mut c.output_dir,
            ExperimentConfig::SvFit(c) => &mut c.output_dir,
            ExperimentConfig::SvSimulate(c) => &mut c.output_dir,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        *self.seed_mut() = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        *self.output_dir_mut() = Some(dir);
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        let mut c = self.clone();
        c.output_dir_mut().take().unwrap_or_else(|| PathBuf::from(format!("{}-out", self.name())))
    }

    /// Schema and dimension checks without running anything.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Sample(c) => {
                let (p, q) = c.target.dims();
                let k = c.kernel.build(q, p)?;
                c.target.build(&k)?;
                Ok(())
            }
            ExperimentConfig::Benchmark(c) => {
                benchmark_parts(c)?;
                c.tune.validate()?;
                if c.targets.is_empty() || c.kernels.is_empty() {
                    return Err(Error::Config("targets and kernels must be nonempty".into()));
                }
                Ok(())
            }
            ExperimentConfig::DriftSweep(c) => {
                field("drift", c.drift.validate())?;
                if c.s_grid.is_empty() || c.alpha_grid.is_empty() {
                    return Err(Error::Config("s_grid and alpha_grid must be nonempty".into()));
                }
                if c.s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                    return Err(Error::Config("s_grid: values must be finite and nonnegative".into()));
                }
                for &a in &c.alpha_grid {
                    field("alpha_grid", c.drift.with_alpha(a))?;
                }
                Ok(())
            }
            ExperimentConfig::ProposalCloud(c) => {
                if c.q < 2 {
                    return Err(Error::Config(format!("q: a proposal cloud needs q >= 2, got {}", c.q)));
                }
                for &p in &c.p_values {
                    for &k in &c.kernels {
                        cloud_kernel(c, k, p)?;
                    }
                }
                Ok(())
            }
            ExperimentConfig::SvSimulate(c) => {
                c.model.build(field("omega", c.omega.spd())?)?;
                Ok(())
            }
            ExperimentConfig::SvFit(c) => {
                sv_fit_parts(c, false)?;
                Ok(())
            }
        }
    }
}

fn cloud_kernel(c: &ProposalCloudConfig, kind: KernelKind, p: usize) -> Result<KernelConfig> {
    let scalar = if kind == KernelKind::Rwm { c.sigma } else { c.rho };
    field("p_values", KernelConfig::standard(kind, p, c.q, scalar))
}

/// The scale `T ~ W_q(scale_dof, I_q)` drawn from the stream keyed by `(seed, 2)`.
pub fn benchmark_scale(q: usize, scale_dof: f64, seed: u64) -> Result<SpdMatrix> {
    let params = WishartParams::new(scale_dof, SpdMatrix::identity(q))?;
    Ok(sample_wishart(&params, &mut rng::keyed(seed, &[2])))
}

fn benchmark_parts(c: &BenchmarkConfig) -> Result<(WishartParams, usize)> {
    if c.q == 0 {
        return Err(Error::Config("q: must be positive".into()));
    }
    let p = c.p.unwrap_or(c.q);
    if p < c.q {
        return Err(Error::Config(format!("p: need p >= q = {}, got {p}", c.q)));
    }
    let scale_dof = c.scale_dof.unwrap_or(c.q as f64);
    field("scale_dof", WishartParams::new(scale_dof, SpdMatrix::identity(c.q)))?;
    let t = benchmark_scale(c.q, scale_dof, c.seed)?;
    let params = field("dof", WishartParams::new(c.dof, t))?;
    if c.targets.contains(&BenchmarkTarget::InverseWishart) {
        field("dof", params.inverse_wishart_mean())?;
    }
    Ok((params, p))
}

/// Outcome of one (target, kernel) pair of a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub target: BenchmarkTarget,
    pub tuning: TuningSummary,
    pub report: BenchmarkReport,
}

impl BenchmarkCase {
    pub fn final_distance(&self) -> f64 {
        self.report.distances.last().copied().unwrap_or(f64::NAN)
    }
}

/// Tunes each kernel's scalar on each target, then runs it for `n_steps`.
/// Pair `(i, j)` tunes with seed keyed by `(seed, 3, i, j)` and runs with seed
/// keyed by `(seed, 4, i, j)`.
pub fn run_benchmark(c: &BenchmarkConfig) -> Result<Vec<BenchmarkCase>> {
    let (params, p) = benchmark_parts(c)?;
    let pairs: Vec<(usize, BenchmarkTarget, usize, KernelKind)> = c
        .targets
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| c.kernels.iter().enumerate().map(move |(j, &k)| (i, t, j, k)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, target_kind, j, kind)| {
            let (pi, mean) = match target_kind {
                BenchmarkTarget::Wishart => (TargetDensity::wishart(params.clone()), params.wishart_mean()),
                BenchmarkTarget::InverseWishart => {
                    (TargetDensity::inverse_wishart(params.clone()), params.inverse_wishart_mean()?)
                }
            };
            let scalar = if kind == KernelKind::Rwm { c.tune.initial_sigma } else { c.tune.initial_rho };
            let initial = KernelConfig::standard(kind, p, c.q, scalar)?;
            let target = upcast_for_kernel(&pi, &initial)?;
            let tune_seed = rng::keyed(c.seed, &[3, i as u64, j as u64]).next_u64();
            let (tuned, tuning) = tune_scalar(&target, &initial, None, &c.tune.options(), tune_seed)?;
            let run_seed = rng::keyed(c.seed, &[4, i as u64, j as u64]).next_u64();
            let report = benchmark_run(&target, &tuned, &mean, c.n_steps, c.burn_in, run_seed)?;
            Ok(BenchmarkCase { target: target_kind, tuning, report })
        })
        .collect()
}

/// Files written by an experiment, relative to its output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }
}

/// Runs the experiment, writing into its output directory. Returns the manifest.
pub fn run(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let mut out = Outputs::new(config.output_dir())?;
    match config {
        ExperimentConfig::Sample(c) => run_sample(c, &mut out)?,
        ExperimentConfig::Benchmark(c) => {
            let cases = run_benchmark(c)?;
            let mut summary = Vec::new();
            for case in &cases {
                let stem = format!("{}_{}", case.target.label(), case.report.kind);
                out.write(&format!("distance_{stem}.csv"), |w| write_distance_csv(&case.report.distances, w))?;
                out.json(&format!("tuning_{stem}.json"), &case.tuning)?;
                summary.push(serde_json::json!({
                    "target": case.target,
                    "kernel": case.report.kind,
                    "scalar": case.report.scalar,
                    "acceptance_rate": case.report.acceptance_rate,
                    "final_distance": case.final_distance(),
                    "min_ess": case.report.ess.iter().cloned().fold(f64::INFINITY, f64::min),
                }));
            }
            out.json("benchmark.json", &summary)?;
        }
        ExperimentConfig::DriftSweep(c) => {
            let rows = drift_sweep(&c.s_grid, &c.alpha_grid, &c.drift, c.seed)?;
            out.write("drift.csv", |w| write_sweep_csv(&rows, w))?;
        }
        ExperimentConfig::ProposalCloud(c) => {
            let mut summary = Vec::new();
            for (i, &kind) in c.kernels.iter().enumerate() {
                for (j, &p) in c.p_values.iter().enumerate() {
                    let k = cloud_kernel(c, kind, p)?;
                    let cloud = proposal_cloud(&k, c.n, rng::keyed(c.seed, &[i as u64, j as u64]).next_u64())?;
                    out.write(&format!("cloud_{kind}_p{p}.csv"), |w| write_cloud_csv(&cloud, w))?;
                    if !cloud.is_empty() {
                        summary.push(serde_json::json!({
                            "kernel": kind,
                            "p": p,
                            "spread": cloud_spread(&cloud),
                            "mean_log_eigenvalue": cloud_mean_log_eigenvalue(&cloud),
                        }));
                    }
                }
            }
            out.json("cloud_summary.json", &summary)?;
        }
        ExperimentConfig::SvSimulate(c) => {
            let model = c.model.build(c.omega.spd()?)?;
            let (path, data) = simulate_series(&model, c.n_obs, &mut rng::stream(c.seed, 0))?;
            out.write("series.csv", |w| write_series_csv(&data, w))?;
            out.json("path_summary.json", &serde_json::json!({ "n_jumps": path.n_jumps(), "horizon": path.horizon() }))?;
        }
        ExperimentConfig::SvFit(c) => run_sv_fit(c, &mut out)?,
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.name().to_string(),
        config: config.clone(),
        outputs: out.written.clone(),
    };
    out.json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn run_sample(c: &SampleConfig, out: &mut Outputs) -> Result<()> {
    let (p, q) = c.target.dims();
    let k = c.kernel.build(q, p)?;
    let target = c.target.build(&k)?;
    let trace = run_chain_default_start(&target, &k, c.n_steps, c.seed)?;
    let frame = target.upcast().map(|u| u.frame.clone());
    let induced = match &frame {
        Some(u) => Some(induced_spd_chain(&trace, u)?),
        None => None,
    };
    out.write("trace.csv", |w| {
        write!(w, "step,accepted,log_target")?;
        match &induced {
            Some(_) => {
                for i in 1..=q {
                    for j in i..=q {
                        write!(w, ",s_{i}{j}")?;
                    }
                }
            }
            None => {
                for i in 1..=k.p() {
                    for j in 1..=q {
                        write!(w, ",x_{i}{j}")?;
                    }
                }
            }
        }
        writeln!(w)?;
        for step in 0..trace.states.len() {
            let acc = if step == 0 { 1 } else { trace.accepted[step - 1] as u8 };
            write!(w, "{step},{acc},{}", trace.log_target[step])?;
            match &induced {
                Some(s) => {
                    for v in s.states[step].upper_triangle() {
                        write!(w, ",{v}")?;
                    }
                }
                None => {
                    let x = trace.states[step].as_matrix();
                    for i in 0..x.nrows() {
                        for j in 0..x.ncols() {
                            write!(w, ",{}", x[(i, j)])?;
                        }
                    }
                }
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.json("summary.json", &serde_json::json!({ "acceptance_rate": trace.acceptance_rate(), "n_steps": c.n_steps }))
}

fn write_series_csv<W: Write>(data: &ObservationSeries, mut w: W) -> Result<()> {
    let q = data.dim().unwrap_or(0);
    let header: Vec<String> = (1..=q).map(|i| format!("r{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (t, v) in data.times().iter().zip(data.values()) {
        write!(w, "{t}")?;
        for x in v.iter() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

struct SvFitParts {
    data: ObservationSeries,
    model: SvModel,
    prior: TargetDensity<SpdMatrix>,
    kernel: KernelConfig,
    pf: PfConfig,
}

fn sv_fit_parts(c: &SvFitConfig, load: bool) -> Result<SvFitParts> {
    let (q, data, omega_for_model) = match &c.data {
        SvData::Csv { path, rescale } => {
            if !path.exists() {
                return Err(Error::Config(format!("data.path: {} does not exist", path.display())));
            }
            if !(*rescale > 0.0) {
                return Err(Error::Config("data.rescale: must be positive".into()));
            }
            let data = field("data.path", ingest_returns(path, *rescale))?;
            let q = data.dim().unwrap_or(0);
            (q, data, None)
        }
        SvData::Synthetic { omega, n_obs } => {
            let om = field("data.omega", omega.spd())?;
            (om.dim(), ObservationSeries::empty(), Some((om, *n_obs)))
        }
        SvData::None { q } => (*q, ObservationSeries::empty(), None),
    };
    if q == 0 {
        return Err(Error::Config("data: dimension must be positive".into()));
    }
    let prior_scale = match &c.prior_scale {
        Some(m) => field("prior_scale", m.spd())?,
        None => SpdMatrix::identity(q),
    };
    if prior_scale.dim() != q {
        return Err(Error::Config(format!("prior_scale: expected {q}x{q}")));
    }
    let prior = TargetDensity::inverse_wishart(field("prior_dof", WishartParams::new(c.prior_dof, prior_scale))?);
    let kernel = c.kernel.build(q, None)?;
    let pf = field("n_particles", PfConfig::new(c.n_particles, c.ess_threshold_fraction))?;
    let model = c.model.build(SpdMatrix::identity(q))?;
    let data = match omega_for_model {
        Some((om, n)) if load => simulate_series(&model.with_omega(om)?, n, &mut rng::stream(c.seed, 2))?.1,
        Some((om, _)) => {
            model.with_omega(om)?;
            data
        }
        None => data,
    };
    Ok(SvFitParts { data, model, prior, kernel, pf })
}

fn run_sv_fit(c: &SvFitConfig, out: &mut Outputs) -> Result<()> {
    let parts = sv_fit_parts(c, true)?;
    let trace = pseudo_marginal_chain(&parts.data, &parts.model, &parts.prior, &parts.kernel, &parts.pf, c.n_steps, c.seed)?;
    out.write("trace.csv", |w| write_trace_csv(&trace, w))?;
    let kept = &trace.chain.states[c.burn_in.min(trace.chain.states.len() - 1)..];
    let q = parts.kernel.q();
    let n_coords = q * (q + 1) / 2;
    let mut summary = Vec::with_capacity(n_coords);
    for k in 0..n_coords {
        let v: Vec<f64> = kept.iter().map(|s| s.upper_triangle()[k]).collect();
        summary.push(serde_json::json!({
            "mean": v.iter().sum::<f64>() / v.len() as f64,
            "q025": quantile(&v, 0.025),
            "q975": quantile(&v, 0.975),
        }));
    }
    out.json(
        "fit_summary.json",
        &serde_json::json!({
            "acceptance_rate": trace.chain.acceptance_rate(),
            "n_observations": parts.data.len(),
            "omega_upper_triangle": summary,
        }),
    )
}

/// Process exit code for a failure: 2 for configuration errors, 3 for
/// numerical failures, 1 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_names_the_field() {
        let e = ExperimentConfig::from_json(r#"{"experiment": "sv-simulate", "omega": {"identity": 2}, "n_obs": 3}"#)
            .unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = ExperimentConfig::from_json(
            r#"{"experiment": "sv-simulate", "seed": 1, "omega": {"identity": 2}, "n_obs": 3, "extra": 1}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
    }

    #[test]
    fn kernel_and_target_validation() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "sample", "seed": 1, "n_steps": 10,
                "target": {"family": "wishart", "dof": 3, "scale": {"identity": 2}},
                "kernel": {"kind": "mpcn", "rho": 1.0}}"#,
        )
        .unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("kernel.rho"), "{e}");
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "sample", "seed": 1, "n_steps": 10,
                "target": {"family": "wishart", "dof": 1, "scale": {"identity": 2}},
                "kernel": {"kind": "mpcn"}}"#,
        )
        .unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("r > q - 1"), "{e}");
    }

    #[test]
    fn matrix_specs() {
        let m: MatrixSpec = serde_json::from_str("[[2.0, 0.5], [0.5, 1.0]]").unwrap();
        assert_eq!(m.spd().unwrap().dim(), 2);
        let m: MatrixSpec = serde_json::from_str(r#"{"identity": 3, "scale": 2.0}"#).unwrap();
        assert_eq!(m.spd().unwrap().trace(), 6.0);
        let m: MatrixSpec = serde_json::from_str("[[1.0, 0.5], [0.0, 1.0]]").unwrap();
        assert!(m.spd().is_err());
    }
}
