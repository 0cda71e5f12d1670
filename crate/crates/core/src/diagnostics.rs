//! Chain-quality measurements: running-mean distances, acceptance rates,
//! tuning of scale matrices and scalar step parameters, proposal clouds and
//! effective sample sizes.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{default_initial_state, Kernel, KernelConfig, KernelKind, Sampler, TargetDensity};
use crate::linalg::{gram, spd_metric, symmetrize, DenseMatrix, SpdMatrix};
use crate::rng;

/// Arithmetic running mean of `P+(q)` states.
#[derive(Clone, Debug)]
pub struct RunningMean {
    sum: DMatrix<f64>,
    n: usize,
}

impl RunningMean {
    pub fn new(q: usize) -> Self {
        RunningMean { sum: DMatrix::zeros(q, q), n: 0 }
    }

    pub fn push(&mut self, s: &SpdMatrix) {
        self.sum += s.as_matrix();
        self.n += 1;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Result<SpdMatrix> {
        if self.n == 0 {
            return Err(Error::Domain("mean of an empty sequence".into()));
        }
        SpdMatrix::new(&self.sum / self.n as f64)
    }

    /// Distance from the current mean to `target`; `None` if the mean is not
    /// numerically positive-definite.
    pub fn distance(&self, target: &SpdMatrix) -> Option<f64> {
        self.mean().ok().and_then(|m| spd_metric(&m, target).ok())
    }
}

/// `d(mean(S_1..S_n), true_mean)` for every `n`. Entries where the running mean
/// is not positive-definite are NaN and their indices are returned.
pub fn running_mean_distance(trace: &[SpdMatrix], true_mean: &SpdMatrix) -> Result<(Vec<f64>, Vec<usize>)> {
    if trace.is_empty() {
        return Err(Error::Domain("empty trace".into()));
    }
    let mut acc = RunningMean::new(true_mean.dim());
    let mut out = Vec::with_capacity(trace.len());
    let mut skipped = Vec::new();
    for (i, s) in trace.iter().enumerate() {
        if s.dim() != true_mean.dim() {
            return Err(Error::Dimension(format!("state {i} has dimension {}", s.dim())));
        }
        acc.push(s);
        match acc.distance(true_mean) {
            Some(d) => out.push(d),
            None => {
                out.push(f64::NAN);
                skipped.push(i);
            }
        }
    }
    Ok((out, skipped))
}

pub fn write_distance_csv<W: Write>(distances: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "iteration,distance")?;
    for (i, d) in distances.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, d)?;
    }
    Ok(())
}

/// Fraction of accepted steps among the last `window`.
pub fn acceptance_rate(accepted: &[bool], window: usize) -> Result<f64> {
    if window == 0 || window > accepted.len() {
        return Err(Error::Domain(format!("window {window} not in 1..={}", accepted.len())));
    }
    let tail = &accepted[accepted.len() - window..];
    Ok(tail.iter().filter(|&&a| a).count() as f64 / window as f64)
}

/// Estimated scale matrices for RWM and pCN.
#[derive(Clone, Debug, PartialEq)]
pub struct TuningEstimate {
    pub u_hat: SpdMatrix,
    pub v_hat: SpdMatrix,
    /// True when a ridge had to be added to make an estimate positive-definite.
    pub ridged: bool,
}

/// `Û = Ê_1`, `V̂ = Ê_2 / tr(Ê_2)` from centred second moments of the samples.
pub fn estimate_tuning(samples: &[DenseMatrix]) -> Result<TuningEstimate> {
    if samples.len() < 2 {
        return Err(Error::Domain("at least two samples are needed".into()));
    }
    let (p, q) = (samples[0].rows(), samples[0].cols());
    if samples.iter().any(|x| x.rows() != p || x.cols() != q) {
        return Err(Error::Dimension("samples must share one shape".into()));
    }
    let n = samples.len() as f64;
    let mut mean = DMatrix::zeros(p, q);
    for x in samples {
        mean += x.as_matrix();
    }
    mean /= n;
    let mut e1 = DMatrix::zeros(p, p);
    let mut e2 = DMatrix::zeros(q, q);
    for x in samples {
        let c = x.as_matrix() - &mean;
        e1 += &c * c.transpose();
        e2 += c.transpose() * &c;
    }
    e1 /= n - 1.0;
    e2 /= n - 1.0;
    let (u_hat, r1) = ridged_spd(e1)?;
    let (v_raw, r2) = ridged_spd(e2)?;
    let v_hat = SpdMatrix::new(v_raw.as_matrix() / v_raw.trace())?;
    Ok(TuningEstimate { u_hat, v_hat, ridged: r1 || r2 })
}

fn ridged_spd(m: DMatrix<f64>) -> Result<(SpdMatrix, bool)> {
    let m = symmetrize(&m);
    if let Ok(s) = SpdMatrix::new(m.clone()) {
        return Ok((s, false));
    }
    let d = m.nrows();
    let ridge = 1e-8 * (m.trace() / d as f64).max(1.0);
    let mut r = m;
    for i in 0..d {
        r[(i, i)] += ridge;
    }
    Ok((SpdMatrix::new(r)?, true))
}

/// Summary of a scalar tuning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub kind: KernelKind,
    /// Final `sigma` (RWM) or `rho` (pCN, MpCN).
    pub scalar: f64,
    pub acceptance: f64,
    pub rounds: usize,
    /// False when the band was not reached within the round limit.
    pub in_band: bool,
    pub history: Vec<(f64, f64)>,
}

/// Options for [`tune_scalar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuneOptions {
    pub band: (f64, f64),
    pub pilot_steps: usize,
    pub max_rounds: usize,
    /// Half-width of the initial bracket in log (RWM) or logit (pCN, MpCN) scale.
    pub bracket: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { band: (0.2, 0.4), pilot_steps: 2000, max_rounds: 20, bracket: 12.0 }
    }
}

fn to_unbounded(kind: KernelKind, v: f64) -> f64 {
    match kind {
        KernelKind::Rwm => v.ln(),
        _ => {
            let v = v.clamp(1e-12, 1.0 - 1e-12);
            (v / (1.0 - v)).ln()
        }
    }
}

fn from_unbounded(kind: KernelKind, t: f64) -> f64 {
    match kind {
        KernelKind::Rwm => t.exp(),
        _ => (1.0 / (1.0 + (-t).exp())).min(1.0 - 1e-12),
    }
}

/// Bisection on `log σ` (RWM) or `logit ρ` (pCN, MpCN) over pilot runs until
/// the pilot acceptance rate falls in the band. Pilots continue from the last
/// pilot's state; round `k` uses the stream keyed by `(seed, k)`. Returns the
/// tuned configuration and a summary.
pub fn tune_scalar(
    target: &TargetDensity<DenseMatrix>,
    initial_cfg: &KernelConfig,
    initial_state: Option<&DenseMatrix>,
    options: &TuneOptions,
    seed: u64,
) -> Result<(KernelConfig, TuningSummary)> {
    let kind = initial_cfg.kind;
    let centre = to_unbounded(kind, initial_cfg.scalar());
    let (mut lo, mut hi) = (centre - options.bracket, centre + options.bracket);
    let mut theta = centre;
    let mut state = match initial_state {
        Some(x) => x.clone(),
        None => default_initial_state(
            target.upcast().map(|u| &u.frame).unwrap_or(&initial_cfg.u),
            initial_cfg.q(),
        )?,
    };
    let mut history = Vec::new();
    let mut cfg = initial_cfg.clone();
    let mut rate = f64::NAN;
    for round in 0..options.max_rounds {
        cfg = initial_cfg.with_scalar(from_unbounded(kind, theta))?;
        let mut sampler = Sampler::new(target, &cfg, &state, rng::keyed(seed, &[round as u64]))?;
        for _ in 0..options.pilot_steps {
            sampler.step();
        }
        rate = sampler.acceptance_rate();
        state = sampler.state();
        history.push((cfg.scalar(), rate));
        if rate >= options.band.0 && rate <= options.band.1 {
            let summary = TuningSummary { kind, scalar: cfg.scalar(), acceptance: rate, rounds: round + 1, in_band: true, history };
            return Ok((cfg, summary));
        }
        let too_high = rate > options.band.1;
        // acceptance falls as σ grows and as ρ shrinks
        let increase = match kind {
            KernelKind::Rwm => too_high,
            _ => !too_high,
        };
        if increase {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = 0.5 * (lo + hi);
    }
    let summary = TuningSummary {
        kind,
        scalar: cfg.scalar(),
        acceptance: rate,
        rounds: options.max_rounds,
        in_band: false,
        history,
    };
    Ok((cfg, summary))
}

/// Log-eigenvalue pairs of proposals `S* = y^T U^{-1} y` drawn from the state
/// whose Gram matrix is `I_q`. Each draw reports a uniformly chosen pair of
/// distinct eigenvalue indices.
pub fn proposal_cloud(cfg: &KernelConfig, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let q = cfg.q();
    if q < 2 {
        return Err(Error::Dimension("a proposal cloud needs q >= 2".into()));
    }
    let kernel = Kernel::new(cfg.clone())?;
    let x0 = default_initial_state(&cfg.u, q)?;
    let mut r = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let y = kernel.propose(&x0, &mut r)?;
        let pair = sample_indices(&mut r, q, 2);
        let (i, j) = (pair.index(0), pair.index(1));
        if let Ok(s) = gram(&y, &cfg.u) {
            let l = s.eigenvalues();
            out.push((l[i].ln(), l[j].ln()));
        }
    }
    Ok(out)
}

pub fn write_cloud_csv<W: Write>(cloud: &[(f64, f64)], mut out: W) -> Result<()> {
    writeln!(out, "pair_index,logl1,logl2")?;
    for (i, (a, b)) in cloud.iter().enumerate() {
        writeln!(out, "{i},{a},{b}")?;
    }
    Ok(())
}

/// Why an ESS value is unusual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssFlag {
    /// Zero variance; ESS reported as `n`.
    Constant,
    /// Negative autocorrelation made the integrated time small; ESS exceeds `n`.
    Anticorrelated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub ess: f64,
    pub flag: Option<EssFlag>,
}

/// Autocorrelations at lags `0..n` via zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    buf.iter().take(n).map(|c| c.re / c0).collect()
}

/// Effective sample size `n / τ` with `τ = -1 + 2 Σ_k Γ_k`, `Γ_k = ρ_{2k} + ρ_{2k+1}`
/// summed over the initial positive sequence (Γ_0 always included). `τ` is
/// floored at `1 / log10(n)`.
pub fn ess(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Domain(format!("ESS needs at least 10 values, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Ok(Ess { ess: n as f64, flag: Some(EssFlag::Constant) });
    }
    let rho = autocorrelation(series);
    let mut sum = rho[0] + rho[1];
    let mut k = 1;
    while 2 * k + 1 < n {
        let g = rho[2 * k] + rho[2 * k + 1];
        if g <= 0.0 {
            break;
        }
        sum += g;
        k += 1;
    }
    let tau = -1.0 + 2.0 * sum;
    let floor = 1.0 / (n as f64).log10();
    if tau < floor || tau < 1.0 {
        let tau = tau.max(floor);
        return Ok(Ess { ess: n as f64 / tau, flag: if tau < 1.0 { Some(EssFlag::Anticorrelated) } else { None } });
    }
    Ok(Ess { ess: n as f64 / tau, flag: None })
}

/// Per-kernel summary of a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub kind: KernelKind,
    pub scalar: f64,
    /// Distance to the true mean after each step (NaN where skipped).
    pub distances: Vec<f64>,
    pub acceptance_rate: f64,
    /// ESS of each upper-triangle entry of `S`.
    pub ess: Vec<f64>,
    pub seconds_per_step: f64,
}

/// Runs the kernel from the state with Gram matrix `I_q` and records the
/// running-mean distance of the induced `P+(q)` chain after `burn_in` steps.
pub fn benchmark_run(
    target: &TargetDensity<DenseMatrix>,
    cfg: &KernelConfig,
    true_mean: &SpdMatrix,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<BenchmarkReport> {
    let mut sampler = Sampler::with_default_start(target, cfg, rng::stream(seed, 0))?;
    for _ in 0..burn_in {
        sampler.step();
    }
    let q = true_mean.dim();
    let mut acc = RunningMean::new(q);
    let mut distances = Vec::with_capacity(n_steps);
    let mut coords: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); q * (q + 1) / 2];
    let mut accepted = 0usize;
    let start = Instant::now();
    for _ in 0..n_steps {
        if sampler.step() {
            accepted += 1;
        }
        let s = sampler.current_gram()?;
        for (c, v) in coords.iter_mut().zip(s.upper_triangle()) {
            c.push(v);
        }
        acc.push(&s);
        distances.push(acc.distance(true_mean).unwrap_or(f64::NAN));
    }
    let seconds_per_step = start.elapsed().as_secs_f64() / n_steps.max(1) as f64;
    let ess = if n_steps >= 10 {
        coords.iter().map(|c| ess(c).map(|e| e.ess)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(BenchmarkReport {
        kind: cfg.kind,
        scalar: cfg.scalar(),
        distances,
        acceptance_rate: if n_steps == 0 { 0.0 } else { accepted as f64 / n_steps as f64 },
        ess,
        seconds_per_step,
    })
}

/// Mean Euclidean norm of cloud points.
pub fn cloud_spread(cloud: &[(f64, f64)]) -> f64 {
    cloud.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>() / cloud.len() as f64
}

/// Mean of all log-eigenvalues in a cloud.
pub fn cloud_mean_log_eigenvalue(cloud: &[(f64, f64)]) -> f64 {
    cloud.iter().map(|(a, b)| a + b).sum::<f64>() / (2 * cloud.len()) as f64
}
