//! Matrix Ornstein-Uhlenbeck stochastic volatility driven by a compound-Poisson
//! subordinator:
//!
//! `dΣ_t = -(Ω Σ_t + Σ_t Ω) dt + dL_t`, `y_i | Σ_{t_i} ~ N(0, Σ_{t_i})`.
//!
//! Between jumps the flow is `Σ_t = e^{-Ω(t-s)} Σ_s e^{-Ω(t-s)}`; each jump adds
//! `diag(E_1, .., E_q)` with independent exponential entries. The likelihood of
//! `Ω` is estimated by a bootstrap particle filter and explored with
//! pseudo-marginal Metropolis-Hastings.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{accept, upcast_for_kernel, ChainTrace, Kernel, KernelConfig, TargetDensity};
use crate::linalg::{gram, spd_exp_scaled, SpdMatrix};
use crate::rng::{self, ChainRng};

/// Parameters of the volatility model.
#[derive(Clone, Debug, PartialEq)]
pub struct SvModel {
    /// Mean-reversion matrix, per day.
    pub omega: SpdMatrix,
    /// Covariance at time zero.
    pub sigma0: SpdMatrix,
    /// Jumps per day; zero gives deterministic dynamics.
    pub jump_intensity: f64,
    /// Mean of each exponential jump entry.
    pub jump_mean: f64,
}

impl SvModel {
    pub fn new(omega: SpdMatrix, sigma0: SpdMatrix, jump_intensity: f64, jump_mean: f64) -> Result<Self> {
        let m = SvModel { omega, sigma0, jump_intensity, jump_mean };
        m.validate()?;
        Ok(m)
    }

    /// Jump intensity 0.4, jump mean 1/60, `σ0 = 0.05 I`.
    pub fn with_default_jumps(omega: SpdMatrix) -> Result<Self> {
        let q = omega.dim();
        Self::new(omega, SpdMatrix::scaled_identity(q, 0.05)?, 0.4, 1.0 / 60.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.dim() != self.sigma0.dim() {
            return Err(Error::Dimension(format!(
                "Ω is {0}x{0} but σ0 is {1}x{1}",
                self.omega.dim(),
                self.sigma0.dim()
            )));
        }
        if !(self.jump_intensity >= 0.0) || !self.jump_intensity.is_finite() {
            return Err(Error::Domain(format!("jump intensity must be nonnegative, got {}", self.jump_intensity)));
        }
        if !(self.jump_mean > 0.0) || !self.jump_mean.is_finite() {
            return Err(Error::Domain(format!("jump mean must be positive, got {}", self.jump_mean)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn with_omega(&self, omega: SpdMatrix) -> Result<Self> {
        Self::new(omega, self.sigma0.clone(), self.jump_intensity, self.jump_mean)
    }

    fn jump_law(&self) -> Option<(Exp<f64>, Exp<f64>)> {
        if self.jump_intensity > 0.0 {
            Some((
                Exp::new(self.jump_intensity).expect("positive rate"),
                Exp::new(1.0 / self.jump_mean).expect("positive rate"),
            ))
        } else {
            None
        }
    }
}

/// Observation times and vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSeries {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl ObservationSeries {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!("{} times but {} observations", times.len(), values.len())));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("observation times must be nonnegative and strictly increasing".into()));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.len() != first.len() || v.iter().any(|x| !x.is_finite())) {
                return Err(Error::Dimension("observations must be finite vectors of equal length".into()));
            }
        }
        Ok(ObservationSeries { times, values })
    }

    pub fn empty() -> Self {
        ObservationSeries { times: Vec::new(), values: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.values.first().map(|v| v.len())
    }
}

/// A simulated covariance path: the value at time zero and right after each
/// jump. Values in between follow the deterministic flow.
#[derive(Clone, Debug)]
pub struct SvPath {
    omega: SpdMatrix,
    knots: Vec<(f64, SpdMatrix)>,
    horizon: f64,
}

impl SvPath {
    /// `(time, Σ)` at time zero and after each jump.
    pub fn knots(&self) -> &[(f64, SpdMatrix)] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_jumps(&self) -> usize {
        self.knots.len() - 1
    }

    /// `Σ_t` for `0 <= t <= horizon`.
    pub fn at(&self, t: f64) -> Result<SpdMatrix> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let idx = self.knots.partition_point(|(s, _)| *s <= t) - 1;
        let (s, sigma) = &self.knots[idx];
        flow(&self.omega, sigma, t - s)
    }
}

/// `e^{-Ω τ} Σ e^{-Ω τ}`.
pub fn flow(omega: &SpdMatrix, sigma: &SpdMatrix, tau: f64) -> Result<SpdMatrix> {
    let e = spd_exp_scaled(omega, tau)?;
    SpdMatrix::new(e.as_matrix() * sigma.as_matrix() * e.as_matrix())
}

/// Exact simulation on `[0, horizon]`: exponential inter-arrival times, exact
/// flow between jumps, `diag(E_1..E_q)` added at each jump.
pub fn simulate_path<R: Rng + ?Sized>(model: &SvModel, horizon: f64, rng: &mut R) -> Result<SvPath> {
    model.validate()?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be nonnegative, got {horizon}")));
    }
    let q = model.dim();
    let mut knots = vec![(0.0, model.sigma0.clone())];
    if let Some((arrival, size)) = model.jump_law() {
        let mut t = 0.0;
        loop {
            t += arrival.sample(rng);
            if t > horizon {
                break;
            }
            let (s, sigma) = knots.last().expect("nonempty");
            let mut m = flow(&model.omega, sigma, t - s)?.as_matrix().clone();
            for k in 0..q {
                m[(k, k)] += size.sample(rng);
            }
            knots.push((t, SpdMatrix::new(m)?));
        }
    }
    Ok(SvPath { omega: model.omega.clone(), knots, horizon })
}

/// Draws `y_i ~ N(0, Σ_{t_i})` independently at the given times.
pub fn observe_path<R: Rng + ?Sized>(path: &SvPath, times: &[f64], rng: &mut R) -> Result<ObservationSeries> {
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let sigma = path.at(t)?;
        let q = sigma.dim();
        let z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        values.push(sigma.sqrt_matrix() * z);
    }
    ObservationSeries::new(times.to_vec(), values)
}

/// Closed-form log-likelihood when the path is deterministic (no jumps).
pub fn deterministic_loglik(model: &SvModel, data: &ObservationSeries) -> Result<f64> {
    let mut total = 0.0;
    for (t, y) in data.times().iter().zip(data.values()) {
        let sigma = flow(&model.omega, &model.sigma0, *t)?;
        total += gaussian_logpdf(y, &sigma);
    }
    Ok(total)
}

fn gaussian_logpdf(y: &DVector<f64>, sigma: &SpdMatrix) -> f64 {
    let q = y.len() as f64;
    let quad = (sigma.inv_sqrt_matrix() * y).norm_squared();
    -0.5 * quad - 0.5 * sigma.log_det() - 0.5 * q * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    Systematic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfConfig {
    pub n_particles: usize,
    pub ess_threshold_fraction: f64,
    #[serde(default = "default_resampling")]
    pub resampling: Resampling,
}

fn default_resampling() -> Resampling {
    Resampling::Systematic
}

impl PfConfig {
    pub fn new(n_particles: usize, ess_threshold_fraction: f64) -> Result<Self> {
        let c = PfConfig { n_particles, ess_threshold_fraction, resampling: Resampling::Systematic };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Domain("at least one particle is needed".into()));
        }
        if !(self.ess_threshold_fraction > 0.0 && self.ess_threshold_fraction <= 1.0) {
            return Err(Error::Domain(format!(
                "ESS threshold fraction must lie in (0, 1], got {}",
                self.ess_threshold_fraction
            )));
        }
        Ok(())
    }
}

impl Default for PfConfig {
    fn default() -> Self {
        PfConfig { n_particles: 1000, ess_threshold_fraction: 0.25, resampling: Resampling::Systematic }
    }
}

/// Output of one particle-filter run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfEstimate {
    /// Log of the unbiased likelihood estimate; `-inf` if every weight vanished.
    pub loglik: f64,
    /// True when all weights were zero at some observation.
    pub degenerate: bool,
    pub n_resamples: usize,
}

/// Bootstrap particle filter. Particles are stored in the eigenbasis of `Ω`,
/// where the flow acts entrywise: `Σ̃_ij ← Σ̃_ij e^{-(ω_i + ω_j) τ}`.
pub fn pf_loglik<R: Rng + ?Sized>(model: &SvModel, data: &ObservationSeries, cfg: &PfConfig, rng: &mut R) -> Result<PfEstimate> {
    model.validate()?;
    cfg.validate()?;
    let q = model.dim();
    if let Some(d) = data.dim() {
        if d != q {
            return Err(Error::Dimension(format!("observations have length {d}, model has q = {q}")));
        }
    }
    let n = cfg.n_particles;
    let qq = q * q;
    let w_eig: Vec<f64> = model.omega.eigenvalues().iter().copied().collect();
    let basis = model.omega.eigenvectors();
    let rotated0 = basis.transpose() * model.sigma0.as_matrix() * basis;
    let mut particles = vec![0.0; n * qq];
    for chunk in particles.chunks_exact_mut(qq) {
        for (dst, src) in chunk.iter_mut().zip(rotated0.iter()) {
            *dst = *src;
        }
    }
    // J̃ = Q^T diag(E) Q = Σ_k E_k b_k b_k^T with b_k the k-th row of Q
    let rows: Vec<Vec<f64>> = (0..q).map(|k| basis.row(k).iter().copied().collect()).collect();
    let jumps = model.jump_law();

    let mut scratch = vec![0.0; n * qq];
    let mut log_w = vec![0.0; n];
    let mut weights = vec![1.0 / n as f64; n];
    let mut decay = vec![0.0; qq];
    let mut chol = vec![0.0; qq];
    let mut y_rot = vec![0.0; q];
    let mut loglik = 0.0;
    let mut n_resamples = 0;
    let mut prev_t = 0.0;
    let log_norm = -0.5 * q as f64 * (2.0 * std::f64::consts::PI).ln();

    for (t, y) in data.times().iter().zip(data.values()) {
        let dt = t - prev_t;
        prev_t = *t;
        fill_decay(&w_eig, dt, &mut decay);
        let yr = basis.transpose() * y;
        y_rot.copy_from_slice(yr.as_slice());
        let u_resample: f64 = rng.random();

        for (i, sigma) in particles.chunks_exact_mut(qq).enumerate() {
            match &jumps {
                None => apply_decay(sigma, &decay),
                Some((arrival, size)) => {
                    let mut s = 0.0;
                    loop {
                        let next = s + arrival.sample(rng);
                        if next > dt {
                            fill_decay(&w_eig, dt - s, &mut chol);
                            apply_decay(sigma, &chol);
                            break;
                        }
                        fill_decay(&w_eig, next - s, &mut chol);
                        apply_decay(sigma, &chol);
                        for row in &rows {
                            let e = size.sample(rng);
                            for a in 0..q {
                                for b in 0..q {
                                    sigma[a * q + b] += e * row[a] * row[b];
                                }
                            }
                        }
                        s = next;
                    }
                }
            }
            log_w[i] = log_norm + gaussian_log_kernel(sigma, &y_rot, &mut chol, q);
        }

        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Ok(PfEstimate { loglik: f64::NEG_INFINITY, degenerate: true, n_resamples });
        }
        let mut total = 0.0;
        for (w, lw) in weights.iter_mut().zip(&log_w) {
            *w *= (lw - max).exp();
            total += *w;
        }
        loglik += max + total.ln();
        let mut sum_sq = 0.0;
        for w in weights.iter_mut() {
            *w /= total;
            sum_sq += *w * *w;
        }
        let ess = 1.0 / sum_sq;
        if ess < cfg.ess_threshold_fraction * n as f64 {
            systematic_resample(&weights, u_resample, &particles, &mut scratch, qq);
            std::mem::swap(&mut particles, &mut scratch);
            weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
            n_resamples += 1;
        }
    }
    Ok(PfEstimate { loglik, degenerate: false, n_resamples })
}

fn fill_decay(w: &[f64], tau: f64, out: &mut [f64]) {
    let q = w.len();
    for a in 0..q {
        for b in 0..q {
            out[a * q + b] = (-(w[a] + w[b]) * tau).exp();
        }
    }
}

fn apply_decay(sigma: &mut [f64], decay: &[f64]) {
    for (s, d) in sigma.iter_mut().zip(decay) {
        *s *= d;
    }
}

/// `-(1/2) y^T Σ^{-1} y - (1/2) log det Σ` by an in-place Cholesky; `-inf` if
/// `Σ` is not numerically positive-definite.
fn gaussian_log_kernel(sigma: &[f64], y: &[f64], l: &mut [f64], q: usize) -> f64 {
    for i in 0..q {
        for j in 0..=i {
            let mut s = 0.5 * (sigma[i * q + j] + sigma[j * q + i]);
            for k in 0..j {
                s -= l[i * q + k] * l[j * q + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return f64::NEG_INFINITY;
                }
                l[i * q + i] = s.sqrt();
            } else {
                l[i * q + j] = s / l[j * q + j];
            }
        }
    }
    let mut quad = 0.0;
    let mut log_det = 0.0;
    let mut z = [0.0f64; 16];
    let mut z_heap;
    let z: &mut [f64] = if q <= 16 {
        &mut z[..q]
    } else {
        z_heap = vec![0.0; q];
        &mut z_heap
    };
    for i in 0..q {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * q + k] * z[k];
        }
        z[i] = s / l[i * q + i];
        quad += z[i] * z[i];
        log_det += 2.0 * l[i * q + i].ln();
    }
    -0.5 * quad - 0.5 * log_det
}

/// Systematic resampling with a single uniform `u` in `[0, 1)`.
fn systematic_resample(weights: &[f64], u: f64, from: &[f64], to: &mut [f64], stride: usize) {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..n {
        let point = (u + i as f64) * step;
        while point > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        to[i * stride..(i + 1) * stride].copy_from_slice(&from[j * stride..(j + 1) * stride]);
    }
}

/// Output of a pseudo-marginal run. `chain.log_target` holds the log prior
/// (with respect to the kernel's reference) plus the stored log-likelihood
/// estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoMarginalTrace {
    pub chain: ChainTrace<SpdMatrix>,
    pub loglik_hat: Vec<f64>,
}

/// The stream used for the likelihood estimate at a given step (0 is the
/// initial state).
pub fn likelihood_stream(seed: u64, step: u64) -> ChainRng {
    rng::keyed(seed, &[1, step])
}

/// Pseudo-marginal Metropolis-Hastings over `Ω` with a particle-filter
/// likelihood. The prior is upcast with the kernel's frame; proposals and
/// uniforms come from stream 0 of `seed`, the estimate at step `k` from
/// [`likelihood_stream`]`(seed, k)`.
pub fn pseudo_marginal_chain(
    data: &ObservationSeries,
    model: &SvModel,
    prior: &TargetDensity<SpdMatrix>,
    kernel_cfg: &KernelConfig,
    pf_cfg: &PfConfig,
    n_steps: usize,
    seed: u64,
) -> Result<PseudoMarginalTrace> {
    pf_cfg.validate()?;
    let estimate = |omega: &SpdMatrix, step: u64| -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        match model.with_omega(omega.clone()) {
            Ok(m) => pf_loglik(&m, data, pf_cfg, &mut likelihood_stream(seed, step))
                .map(|e| e.loglik)
                .unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    marginal_chain_with(prior, kernel_cfg, n_steps, seed, estimate)
}

/// Metropolis-Hastings over `Ω` with an arbitrary log-likelihood (estimated or
/// exact) called as `loglik(Ω, step)`.
pub fn marginal_chain_with(
    prior: &TargetDensity<SpdMatrix>,
    kernel_cfg: &KernelConfig,
    n_steps: usize,
    seed: u64,
    loglik: impl Fn(&SpdMatrix, u64) -> f64,
) -> Result<PseudoMarginalTrace> {
    let kernel = Kernel::new(kernel_cfg.clone())?;
    let target = upcast_for_kernel(prior, kernel_cfg)?;
    let frame = &kernel_cfg.u;
    let mut rng = rng::stream(seed, 0);
    let mut x = crate::kernels::default_initial_state(frame, kernel_cfg.q())?;
    let mut omega = gram(&x, frame)?;
    let mut log_prior = target.log_density(&x);
    let mut ll = loglik(&omega, 0);
    if !log_prior.is_finite() {
        return Err(Error::NonFiniteTarget(log_prior));
    }
    if !ll.is_finite() {
        return Err(Error::NonFiniteTarget(ll));
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut accepted = Vec::with_capacity(n_steps);
    let mut log_target = Vec::with_capacity(n_steps + 1);
    let mut loglik_hat = Vec::with_capacity(n_steps + 1);
    states.push(omega.clone());
    log_target.push(log_prior + ll);
    loglik_hat.push(ll);
    for step in 1..=n_steps as u64 {
        let proposal = kernel.propose(&x, &mut rng);
        let log_u = rng.random::<f64>().ln();
        let mut moved = false;
        if let Ok(y) = proposal {
            if let Ok(omega_y) = gram(&y, frame) {
                let prior_y = target.log_density(&y);
                if prior_y.is_finite() {
                    let ll_y = loglik(&omega_y, step);
                    if ll_y.is_finite() && accept(log_u, prior_y - log_prior + ll_y - ll) {
                        x = y;
                        omega = omega_y;
                        log_prior = prior_y;
                        ll = ll_y;
                        moved = true;
                    }
                }
            }
        }
        accepted.push(moved);
        states.push(omega.clone());
        log_target.push(log_prior + ll);
        loglik_hat.push(ll);
    }
    Ok(PseudoMarginalTrace { chain: ChainTrace { states, accepted, log_target, seed, whitened: None }, loglik_hat })
}

/// Writes `step,accepted,loglik_hat,omega_11,omega_12,..` (upper triangle).
pub fn write_trace_csv<W: Write>(trace: &PseudoMarginalTrace, mut out: W) -> Result<()> {
    let q = trace.chain.states.first().map(|s| s.dim()).unwrap_or(0);
    let mut header = String::from("step,accepted,loglik_hat");
    for i in 1..=q {
        for j in i..=q {
            header.push_str(&format!(",omega_{i}{j}"));
        }
    }
    writeln!(out, "{header}")?;
    for (k, (s, ll)) in trace.chain.states.iter().zip(&trace.loglik_hat).enumerate() {
        let acc = if k == 0 { 1 } else { trace.chain.accepted[k - 1] as u8 };
        write!(out, "{k},{acc},{ll}")?;
        for v in s.upper_triangle() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads daily log-returns (one row per day, one column per series, header
/// optional), removes an OLS linear trend from each column, multiplies by
/// `rescale` and assigns times `1..n`.
pub fn ingest_returns(csv_path: &Path, rescale: f64) -> Result<ObservationSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("line {}: {e}", line + 1)))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse(format!("line {}: non-finite value", line + 1)));
                }
                if let Some(first) = rows.first() {
                    if first.len() != v.len() {
                        return Err(Error::Parse(format!(
                            "line {}: expected {} columns, found {}",
                            line + 1,
                            first.len(),
                            v.len()
                        )));
                    }
                }
                rows.push(v);
            }
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", line + 1))),
        }
    }
    if rows.len() < 3 {
        return Err(Error::Parse(format!("need at least 3 data rows, found {}", rows.len())));
    }
    let n = rows.len();
    let q = rows[0].len();
    let mut columns = DMatrix::from_fn(n, q, |i, j| rows[i][j]);
    for j in 0..q {
        let col: Vec<f64> = columns.column(j).iter().copied().collect();
        let resid = detrend(&col);
        for i in 0..n {
            columns[(i, j)] = resid[i] * rescale;
        }
    }
    let times = (1..=n).map(|t| t as f64).collect();
    let values = (0..n).map(|i| columns.row(i).transpose()).collect();
    ObservationSeries::new(times, values)
}

/// Residuals of the least-squares line through `(i + 1, y_i)`.
pub fn detrend(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let t_mean = (n + 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in y.iter().enumerate() {
        let dt = (i + 1) as f64 - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(i, v)| v - y_mean - slope * ((i + 1) as f64 - t_mean))
        .collect()
}

/// Simulates a path and observes it at times `1..=n`.
pub fn simulate_series<R: Rng + ?Sized>(model: &SvModel, n: usize, rng: &mut R) -> Result<(SvPath, ObservationSeries)> {
    let path = simulate_path(model, n as f64, rng)?;
    let times: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let obs = observe_path(&path, &times, rng)?;
    Ok((path, obs))
}
