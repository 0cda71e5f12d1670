//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//! Run with `cargo test --release --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::random_spd;
use common::sv_oracle::ScalarSv;
use matmcmc::dists::{
    log_nu_u_density, logpdf_invwishart_mu, logpdf_wishart_mu, sample_inverse_wishart, sample_uniform_stiefel,
    sample_wishart, WishartParams,
};
use matmcmc::diagnostics::{cloud_mean_log_eigenvalue, cloud_spread, proposal_cloud};
use matmcmc::drift::{drift_sweep, DriftConfig, DriftMethod, DriftRow};
use matmcmc::experiment::{run, run_benchmark, BenchmarkTarget, ExperimentConfig};
use matmcmc::kernels::{
    induced_spd_chain, mpcn_log_proposal_density, run_chain_default_start, upcast_target, KernelConfig, KernelKind,
    Sampler, TargetDensity,
};
use matmcmc::linalg::{gram, DenseMatrix, SpdMatrix};
use matmcmc::noise::{EpsilonLawParams, EpsilonSampler};
use matmcmc::rng;
use matmcmc::stats::{chi_square_gof, ks_two_sample, mean, quantile, std_error};
use matmcmc::sv::{pf_loglik, pseudo_marginal_chain, simulate_series, ObservationSeries, PfConfig, SvModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;

struct Line {
    id: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: impl Into<String>) {
        let line = Line { id: id.to_string(), pass, detail: detail.into() };
        println!("{} {}: {}", if line.pass { "PASS" } else { "FAIL" }, line.id, line.detail);
        self.lines.push(line);
    }

    fn runtime(&mut self, id: &str, elapsed: Duration, budget_secs: u64) {
        let s = elapsed.as_secs_f64();
        self.check(&format!("{id} runtime"), s < budget_secs as f64, format!("{s:.1} s (budget {budget_secs} s)"));
    }
}

fn z_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0) / (a.1 * a.1 + b.1 * b.1).sqrt()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    (mean(v), std_error(v))
}

fn log_gaussian_iid(x: &DMatrix<f64>, var: f64) -> f64 {
    -0.5 * x.norm_squared() / var - 0.5 * x.len() as f64 * (2.0 * PI * var).ln()
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let (p, q, n) = (3usize, 2usize, 100_000usize);
    // g(S) = det(S)^{3/2} e^{-tr S}; against μ this is ∫ e^{-tr S} dS = Γ_2(3/2) = √π Γ(3/2) Γ(1) = π/2
    let closed = PI / 2.0;
    let log_g = |s: &SpdMatrix| 0.5 * p as f64 * s.log_det() - s.trace();

    let proposal = WishartParams::new(4.0, SpdMatrix::scaled_identity(q, 0.4).unwrap()).unwrap();
    let mut r = rng::stream(101, 0);
    let mu_side: Vec<f64> = (0..n)
        .map(|_| {
            let s = sample_wishart(&proposal, &mut r);
            (log_g(&s) - logpdf_wishart_mu(&s, &proposal).unwrap()).exp()
        })
        .collect();
    let mu_route = mean_and_se(&mu_side);

    let nu_route = |u: &SpdMatrix, var: f64, seed: u64| {
        let mut r = rng::stream(seed, 0);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                let x = DMatrix::from_fn(p, q, |_, _| var.sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal));
                let xd = DenseMatrix::new(x.clone()).unwrap();
                let s = gram(&xd, u).unwrap();
                (log_g(&s) + log_nu_u_density(&xd, u).unwrap() - log_gaussian_iid(&x, var)).exp()
            })
            .collect();
        mean_and_se(&w)
    };
    let plain = nu_route(&SpdMatrix::identity(p), 0.7, 102);
    let frame = SpdMatrix::from_row_slice(3, &[1.5, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.6]).unwrap();
    let framed = nu_route(&frame, 1.0, 103);

    let z_routes = z_between(mu_route, plain);
    let z_frame = z_between(framed, plain);
    let z_closed = [mu_route, plain, framed].map(|m| (m.0 - closed) / m.1);
    rep.check(
        "C1 change of variables",
        z_routes.abs() < 3.0 && z_frame.abs() < 3.0 && z_closed.iter().all(|z| z.abs() < 3.0),
        format!(
            "mu route {:.5}±{:.5}, nu route {:.5}±{:.5}, nu_U route {:.5}±{:.5}, closed form {closed:.5}; z(mu,nu) {z_routes:.2}, z(nu_U,nu) {z_frame:.2}, z vs closed {:.2?}",
            mu_route.0, mu_route.1, plain.0, plain.1, framed.0, framed.1, z_closed
        ),
    );

    let mut r = rng::stream(104, 0);
    let mut worst: f64 = 0.0;
    for q in 1..=4 {
        for _ in 0..25 {
            let s = random_spd(q, &mut r);
            let t = random_spd(q, &mut r);
            let dof = q as f64 + r.random_range(0.0..4.0);
            let a = logpdf_wishart_mu(&s, &WishartParams::new(dof, t.clone()).unwrap()).unwrap();
            let b = logpdf_invwishart_mu(&s.inverse(), &WishartParams::new(dof, t.inverse()).unwrap()).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    rep.check("C1 mu-duality", worst < 1e-10, format!("max |log W(S) - log IW(S^-1)| = {worst:.2e} over 100 pairs"));

    let is_mean = |target: WishartParams, proposal: WishartParams, inverse: bool, seed: u64| {
        let mut r = rng::stream(seed, 0);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if inverse {
                    let s = sample_inverse_wishart(&proposal, &mut r);
                    (logpdf_invwishart_mu(&s, &target).unwrap() - logpdf_invwishart_mu(&s, &proposal).unwrap()).exp()
                } else {
                    let s = sample_wishart(&proposal, &mut r);
                    (logpdf_wishart_mu(&s, &target).unwrap() - logpdf_wishart_mu(&s, &proposal).unwrap()).exp()
                }
            })
            .collect();
        mean(&w)
    };
    let spd = |d: &[f64]| SpdMatrix::from_row_slice(2, d).unwrap();
    let w = is_mean(
        WishartParams::new(5.0, spd(&[1.0, 0.3, 0.3, 0.8])).unwrap(),
        WishartParams::new(4.0, spd(&[1.5, 0.3, 0.3, 1.2])).unwrap(),
        false,
        105,
    );
    let iw = is_mean(
        WishartParams::new(6.0, spd(&[1.0, 0.2, 0.2, 2.0])).unwrap(),
        WishartParams::new(4.0, spd(&[0.8, 0.1, 0.1, 1.5])).unwrap(),
        true,
        106,
    );
    rep.check(
        "C1 self-normalization",
        (w - 1.0).abs() < 0.02 && (iw - 1.0).abs() < 0.02,
        format!("Wishart {w:.4}, Inverse-Wishart {iw:.4} (target 1 ± 0.02)"),
    );
    rep.runtime("C1", start.elapsed(), 60);
}

fn random_dense<R: Rng + ?Sized>(p: usize, q: usize, r: &mut R) -> DenseMatrix {
    common::random_dense(p, q, r)
}

/// Draw from the upcast of `W_q(r, T)` with frame `I_p`: `x = O S^{1/2}`.
fn exact_upcast_draw<R: Rng + ?Sized>(params: &WishartParams, p: usize, r: &mut R) -> DenseMatrix {
    let s = sample_wishart(params, r);
    let o = sample_uniform_stiefel(p, params.dim(), r).unwrap();
    DenseMatrix::new(o.as_matrix() * s.sqrt_matrix()).unwrap()
}

fn criterion_2(rep: &mut Report) {
    let start = Instant::now();
    let mut r = rng::stream(201, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = r.random_range(1..=2usize);
        let p = r.random_range(q..=5usize);
        let rho = r.random_range(0.0..0.99);
        let cfg = KernelConfig::mpcn(rho, random_spd(p, &mut r), q).unwrap();
        let x = random_dense(p, q, &mut r);
        let y = random_dense(p, q, &mut r);
        let a = mpcn_log_proposal_density(&x, &y, &cfg).unwrap();
        let b = mpcn_log_proposal_density(&y, &x, &cfg).unwrap();
        worst = worst.max((a - b).abs());
    }
    rep.check("C2 proposal symmetry", worst < 1e-10, format!("max |log q(x,y) - log q(y,x)| = {worst:.2e} over 1000 pairs"));

    let mut r = rng::stream(202, 0);
    let (mut literal_violations, mut corrected_violations) = (0usize, 0usize);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..1000 {
        let q = r.random_range(1..=2usize);
        let p = r.random_range(q..=4usize);
        let rho = r.random_range(0.0..0.999);
        let u = random_spd(p, &mut r);
        let x = random_dense(p, q, &mut r);
        let y = random_dense(p, q, &mut r);
        let at = |rho: f64| mpcn_log_proposal_density(&x, &y, &KernelConfig::mpcn(rho, u.clone(), q).unwrap()).unwrap();
        let pq = (p * q) as f64;
        let (lr, l0) = (at(rho), at(0.0));
        let literal_gap = lr - (l0 - pq * 2f64.ln());
        worst_gap = worst_gap.min(literal_gap);
        literal_violations += (literal_gap < -1e-10) as usize;
        corrected_violations += (lr < l0 - pq * 2f64.ln() + 0.5 * pq * (1.0 - rho).ln() - 1e-10) as usize;
    }
    let one = |v: f64| DenseMatrix::from_row_slice(1, 1, &[v]).unwrap();
    let example = |rho: f64| {
        mpcn_log_proposal_density(&one(1.0), &one(-1.0), &KernelConfig::mpcn(rho, SpdMatrix::identity(1), 1).unwrap())
            .unwrap()
            .exp()
    };
    rep.check(
        "C2 bound q_rho >= 2^{-pq} q_0",
        literal_violations == 0,
        format!(
            "{literal_violations} of 1000 triples violate it (worst log gap {worst_gap:.3}); p=q=1, x=1, y=-1, rho=0.99: q_rho = {:.5}, 2^-1 q_0 = {:.5}",
            example(0.99),
            0.5 * example(0.0)
        ),
    );
    rep.check(
        "C2 bound with (1-rho)^{pq/2} factor",
        corrected_violations == 0,
        format!("{corrected_violations} of 1000 triples violate q_rho >= (1-rho)^(pq/2) 2^(-pq) q_0"),
    );

    let (p, q) = (3, 2);
    let params = WishartParams::new(4.0, SpdMatrix::from_row_slice(q, &[1.0, 0.3, 0.3, 0.6]).unwrap()).unwrap();
    let target = upcast_target(&TargetDensity::wishart(params.clone()), &SpdMatrix::identity(p), p).unwrap();
    let cfg = KernelConfig::mpcn(0.5, SpdMatrix::identity(p), q).unwrap();
    let n_chains = 10_000u64;
    let moved: Vec<(SpdMatrix, usize)> = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let x0 = exact_upcast_draw(&params, p, &mut rng::keyed(203, &[1, c]));
            let mut sampler = Sampler::new(&target, &cfg, &x0, rng::keyed(203, &[2, c])).unwrap();
            let acc = (0..10).filter(|_| sampler.step()).count();
            (sampler.current_gram().unwrap(), acc)
        })
        .collect();
    let mut fresh_rng = rng::stream(203, 3);
    let fresh: Vec<SpdMatrix> = (0..n_chains).map(|_| sample_wishart(&params, &mut fresh_rng)).collect();
    let rate = moved.iter().map(|m| m.1).sum::<usize>() as f64 / (10 * n_chains) as f64;
    let stat_p = |f: fn(&SpdMatrix) -> f64| {
        let a: Vec<f64> = moved.iter().map(|m| f(&m.0)).collect();
        let b: Vec<f64> = fresh.iter().map(f).collect();
        ks_two_sample(&a, &b).p_value
    };
    let (p_tr, p_ld) = (stat_p(SpdMatrix::trace), stat_p(SpdMatrix::log_det));
    rep.check(
        "C2 MpCN exact invariance",
        p_tr > 0.01 && p_ld > 0.01,
        format!("10^4 chains x 10 steps, acceptance {rate:.3}; KS p (tr S) = {p_tr:.3}, KS p (log det S) = {p_ld:.3}"),
    );
    rep.runtime("C2", start.elapsed(), 300);
}

/// Probability mass of `∝ sin²θ₂ − sin²θ₁` on `0 < θ₁ < θ₂ < π/2` in each cell of
/// an `m × m` grid (zero below the diagonal), by a midpoint rule.
fn angle_cell_masses(m: usize, sub: usize) -> Vec<Vec<f64>> {
    let h = PI / 2.0 / m as f64;
    let k = h / sub as f64;
    let mut mass = vec![vec![0.0; m]; m];
    for (i, row) in mass.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate().skip(i) {
            let mut acc = 0.0;
            for a in 0..sub {
                let t1 = i as f64 * h + (a as f64 + 0.5) * k;
                for b in 0..sub {
                    let t2 = j as f64 * h + (b as f64 + 0.5) * k;
                    if t1 < t2 {
                        acc += t2.sin().powi(2) - t1.sin().powi(2);
                    }
                }
            }
            *cell = acc;
        }
    }
    let total: f64 = mass.iter().flatten().sum();
    mass.iter_mut().flatten().for_each(|v| *v /= total);
    mass
}

fn criterion_3(rep: &mut Report) {
    let start = Instant::now();
    let n = 100_000;
    let cases: Vec<(f64, usize, usize)> =
        [0.0, 0.5, 0.9].iter().flat_map(|&rho| [2, 5].into_iter().flat_map(move |p| [1, 2].map(|q| (rho, p, q)))).collect();
    let results: Vec<((f64, usize, usize), f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, &(rho, p, q))| {
            let sampler = EpsilonSampler::new(EpsilonLawParams::new(rho, p, q).unwrap()).unwrap();
            let draw = |stream: u64| {
                let mut r = rng::keyed(301, &[k as u64, stream]);
                (0..n).map(|_| sampler.sample(&mut r).log_det()).collect::<Vec<f64>>()
            };
            let a = draw(0);
            let b: Vec<f64> = draw(1).into_iter().map(|v| -v).collect();
            ((rho, p, q), ks_two_sample(&a, &b).p_value)
        })
        .collect();
    let min_p = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let listing: Vec<String> = results.iter().map(|((rho, p, q), pv)| format!("({rho},{p},{q}) {pv:.3}")).collect();
    rep.check("C3 eps =_d eps^-1", min_p > 0.01, format!("KS p on log det per (rho,p,q): {}", listing.join(", ")));

    // λ = tan²θ maps the ρ = 0, p = q = 2 eigenvalue density to ∝ sin²θ₂ − sin²θ₁
    let m = 12;
    let masses = angle_cell_masses(m, 40);
    let sampler = EpsilonSampler::new(EpsilonLawParams::new(0.0, 2, 2).unwrap()).unwrap();
    let mut r = rng::stream(302, 0);
    let h = PI / 2.0 / m as f64;
    let mut counts = vec![vec![0.0; m]; m];
    for _ in 0..n {
        let e = sampler.sample(&mut r);
        let l = e.eigenvalues();
        let (t1, t2) = (l[0].sqrt().atan(), l[1].sqrt().atan());
        counts[((t1 / h) as usize).min(m - 1)][((t2 / h) as usize).min(m - 1)] += 1.0;
    }
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for i in 0..m {
        for j in i..m {
            let e = masses[i][j] * n as f64;
            if e >= 5.0 {
                obs.push(counts[i][j]);
                exp.push(e);
            } else {
                pool_o += counts[i][j];
                pool_e += e;
            }
        }
    }
    if pool_e > 0.0 {
        obs.push(pool_o);
        exp.push(pool_e);
    }
    let res = chi_square_gof(&obs, &exp, 1);
    rep.check(
        "C3 rho=0 eigenvalue density",
        res.p_value > 0.01,
        format!("chi-square {:.1} on {} cells, p = {:.3}", res.statistic, obs.len(), res.p_value),
    );
    rep.runtime("C3", start.elapsed(), 120);
}

fn criterion_4(rep: &mut Report) {
    let start = Instant::now();
    let pi = TargetDensity::inverse_wishart(WishartParams::new(4.0, SpdMatrix::from_row_slice(2, &[1.0, 0.4, 0.4, 2.0]).unwrap()).unwrap());
    let induced_bits = |u: SpdMatrix| {
        let target = upcast_target(&pi, &u, 3).unwrap();
        let cfg = KernelConfig::mpcn(0.7, u.clone(), 2).unwrap();
        let trace = run_chain_default_start(&target, &cfg, 10_000, 401).unwrap();
        let spd = induced_spd_chain(&trace, &u).unwrap();
        spd.states.iter().flat_map(|s| s.upper_triangle()).map(f64::to_bits).collect::<Vec<u64>>()
    };
    let base = induced_bits(SpdMatrix::identity(3));
    let frames = [
        SpdMatrix::scaled_identity(3, 5.0).unwrap(),
        SpdMatrix::from_row_slice(3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.7]).unwrap(),
        SpdMatrix::from_diagonal(&[1e-3, 1.0, 1e3]).unwrap(),
    ];
    let identical = frames.iter().filter(|u| induced_bits((*u).clone()) == base).count();
    rep.check(
        "C4 U-invariance",
        identical == frames.len(),
        format!("{identical} of {} frames give a byte-identical P+(2) trace (10^4 steps)", frames.len()),
    );

    let (p, q) = (3, 2);
    let pi = TargetDensity::wishart(WishartParams::new(4.0, SpdMatrix::from_row_slice(q, &[1.0, 0.3, 0.3, 0.6]).unwrap()).unwrap());
    let pi_inv = pi.inverted();
    let u = SpdMatrix::identity(p);
    let cfg = KernelConfig::mpcn(0.5, u.clone(), q).unwrap();
    let s0 = SpdMatrix::from_row_slice(q, &[2.0, 0.5, 0.5, 1.0]).unwrap();
    let start_at = |s: &SpdMatrix| {
        let mut x = DMatrix::zeros(p, q);
        x.view_mut((0, 0), (q, q)).copy_from(s.sqrt_matrix());
        DenseMatrix::new(x).unwrap()
    };
    let finals = |t: &TargetDensity<SpdMatrix>, s: &SpdMatrix, key: u64| -> Vec<SpdMatrix> {
        let target = upcast_target(t, &u, p).unwrap();
        let x0 = start_at(s);
        (0..5000u64)
            .into_par_iter()
            .map(|c| {
                let mut sampler = Sampler::new(&target, &cfg, &x0, rng::keyed(402, &[key, c])).unwrap();
                for _ in 0..20 {
                    sampler.step();
                }
                sampler.current_gram().unwrap()
            })
            .collect()
    };
    let inverted_a: Vec<SpdMatrix> = finals(&pi, &s0, 0).iter().map(SpdMatrix::inverse).collect();
    let b = finals(&pi_inv, &s0.inverse(), 1);
    let stat_p = |f: fn(&SpdMatrix) -> f64| {
        let x: Vec<f64> = inverted_a.iter().map(f).collect();
        let y: Vec<f64> = b.iter().map(f).collect();
        ks_two_sample(&x, &y).p_value
    };
    let (p_ld, p_tr) = (stat_p(SpdMatrix::log_det), stat_p(SpdMatrix::trace));
    rep.check(
        "C4 inverse-chain duality",
        p_ld > 0.01 && p_tr > 0.01,
        format!("5000 chains x 20 steps; KS p (log det) = {p_ld:.3}, KS p (tr) = {p_tr:.3}"),
    );
    rep.runtime("C4", start.elapsed(), 120);
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let s_grid = [1.0, 10.0, 100.0, 1000.0];
    let alpha_grid = [0.1, 0.3, 0.5];
    for (r, p) in [(2.0, 2usize), (4.0, 5usize)] {
        let run_method = |method: DriftMethod, seed: u64| -> Vec<DriftRow> {
            let cfg = DriftConfig::new(r, p, 2, 0.1, 100_000, method).unwrap();
            drift_sweep(&s_grid, &alpha_grid, &cfg, seed).unwrap()
        };
        let direct = run_method(DriftMethod::Direct, 501);
        let is = run_method(DriftMethod::ParetoIs, 502);
        let significant = |rows: &[DriftRow]| rows.iter().filter(|e| e.estimate < -3.0 * e.std_error).count();
        let (nd, ni) = (significant(&direct), significant(&is));
        let worst_direct = direct.iter().map(|e| e.estimate / e.std_error).fold(f64::NEG_INFINITY, f64::max);
        let worst_is = is.iter().map(|e| e.estimate / e.std_error).fold(f64::NEG_INFINITY, f64::max);
        rep.check(
            &format!("C5 drift negative (r={r}, p={p})"),
            nd == direct.len() && ni == is.len(),
            format!(
                "direct {nd}/{} and Pareto-IS {ni}/{} points below -3 SE (largest estimate/SE: direct {worst_direct:.1}, IS {worst_is:.1})",
                direct.len(),
                is.len()
            ),
        );
        let zs: Vec<f64> = direct
            .iter()
            .zip(&is)
            .map(|(a, b)| {
                assert_eq!((a.s, a.alpha), (b.s, b.alpha));
                z_between((a.estimate, a.std_error), (b.estimate, b.std_error))
            })
            .collect();
        let worst_z = zs.iter().map(|z| z.abs()).fold(0.0, f64::max);
        rep.check(
            &format!("C5 direct vs Pareto-IS (r={r}, p={p})"),
            worst_z < 3.0,
            format!("max |z| = {worst_z:.2} over {} grid points", zs.len()),
        );
    }
    rep.runtime("C5", start.elapsed(), 600);
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn criterion_6(rep: &mut Report) {
    let start = Instant::now();
    let cfg = match ExperimentConfig::from_path(&configs_dir().join("bench_wishart.json")).unwrap() {
        ExperimentConfig::Benchmark(c) => c,
        other => panic!("bench_wishart.json is {}", other.name()),
    };
    let cases = run_benchmark(&cfg).unwrap();
    let dist = |t: BenchmarkTarget, k: KernelKind| {
        cases.iter().find(|c| c.target == t && c.report.kind == k).map(|c| c.final_distance()).unwrap()
    };
    let tuned = cases.iter().filter(|c| c.tuning.in_band).count();
    let summary: Vec<String> = cases
        .iter()
        .map(|c| {
            format!(
                "{}/{} scalar {:.4} pilot {:.2} run {:.2} dist {:.3}",
                c.target.label(),
                c.report.kind,
                c.report.scalar,
                c.tuning.acceptance,
                c.report.acceptance_rate,
                c.final_distance()
            )
        })
        .collect();
    println!("     {}", summary.join("\n     "));
    rep.check("C6 tuning in band", tuned == cases.len(), format!("{tuned} of {} pairs tuned into [0.2, 0.4]", cases.len()));
    for t in [BenchmarkTarget::Wishart, BenchmarkTarget::InverseWishart] {
        let (rwm, pcn, mpcn) = (dist(t, KernelKind::Rwm), dist(t, KernelKind::Pcn), dist(t, KernelKind::Mpcn));
        rep.check(
            &format!("C6 MpCN best on {}", t.label()),
            mpcn < rwm && mpcn < pcn,
            format!("final distance RWM {rwm:.3}, pCN {pcn:.3}, MpCN {mpcn:.3}"),
        );
    }
    let (rwm, pcn, mpcn) =
        (dist(BenchmarkTarget::Wishart, KernelKind::Rwm), dist(BenchmarkTarget::Wishart, KernelKind::Pcn), dist(BenchmarkTarget::Wishart, KernelKind::Mpcn));
    rep.check("C6 pCN worst on wishart", pcn > rwm && pcn > mpcn, format!("pCN {pcn:.3} vs RWM {rwm:.3}, MpCN {mpcn:.3}"));
    rep.runtime("C6", start.elapsed(), 1200);
}

fn criterion_7(rep: &mut Report) {
    let start = Instant::now();
    let c = match ExperimentConfig::from_path(&configs_dir().join("proposal_cloud.json")).unwrap() {
        ExperimentConfig::ProposalCloud(c) => c,
        other => panic!("proposal_cloud.json is {}", other.name()),
    };
    let cloud = |kind: KernelKind, p: usize, key: u64| {
        let scalar = if kind == KernelKind::Rwm { c.sigma } else { c.rho };
        let cfg = KernelConfig::standard(kind, p, c.q, scalar).unwrap();
        proposal_cloud(&cfg, c.n, rng::keyed(701, &[key, p as u64]).next_u64()).unwrap()
    };
    for (key, kind) in [KernelKind::Rwm, KernelKind::Pcn].into_iter().enumerate() {
        let (a, b) = (cloud_mean_log_eigenvalue(&cloud(kind, 4, key as u64)), cloud_mean_log_eigenvalue(&cloud(kind, 16, key as u64)));
        rep.check(&format!("C7 {kind} mean log-eigenvalue rises"), b > a, format!("p=4: {a:.3}, p=16: {b:.3}"));
    }
    let spreads: Vec<f64> = [4, 16, 64].iter().map(|&p| cloud_spread(&cloud(KernelKind::Mpcn, p, 2))).collect();
    rep.check(
        "C7 mpcn spread shrinks",
        spreads.windows(2).all(|w| w[1] < w[0]),
        format!("spread at p=4, 16, 64: {:.3?}", spreads),
    );
    rep.runtime("C7", start.elapsed(), 60);
}

fn gaussian_logpdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().unwrap();
    let z = chol.l().solve_lower_triangular(y).unwrap();
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * z.norm_squared() - 0.5 * log_det - 0.5 * y.len() as f64 * (2.0 * PI).ln()
}

/// Seed, 10-90% intervals of `Ω_11` and `Ω_22`, acceptance rate.
type Fit = (u64, [(f64, f64); 2], f64);

fn criterion_8(rep: &mut Report) {
    let start = Instant::now();
    let omega = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.15]);
    let sigma0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
    let model = SvModel::new(SpdMatrix::new(omega.clone()).unwrap(), SpdMatrix::new(sigma0.clone()).unwrap(), 0.0, 1.0).unwrap();
    let times = vec![0.5, 1.0, 2.0, 3.5, 6.0];
    let values: Vec<DVector<f64>> = (0..5).map(|i| DVector::from_vec(vec![0.3 * i as f64 - 0.4, 0.2 - 0.1 * i as f64])).collect();
    let eig = omega.clone().symmetric_eigen();
    let oracle: f64 = times
        .iter()
        .zip(&values)
        .map(|(&t, y)| {
            let e = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|w| (-w * t).exp())) * eig.eigenvectors.transpose();
            gaussian_logpdf(y, &(&e * &sigma0 * &e))
        })
        .sum();
    let data = ObservationSeries::new(times, values).unwrap();
    let est = pf_loglik(&model, &data, &PfConfig::new(100, 0.25).unwrap(), &mut rng::stream(801, 0)).unwrap();
    let err = (est.loglik - oracle).abs();
    rep.check("C8 jump-free filter", err < 1e-8, format!("|estimate - Gaussian log-likelihood| = {err:.2e}"));

    let case = ScalarSv { omega: 0.2, sigma0: 0.3, lambda: 0.03, m: 0.5, times: vec![1.0, 2.0, 3.0], y: vec![0.4, -0.9, 0.3] };
    let (lik_oracle, remainder) = case.likelihood(16, 24);
    let scalar = SvModel::new(
        SpdMatrix::from_diagonal(&[case.omega]).unwrap(),
        SpdMatrix::from_diagonal(&[case.sigma0]).unwrap(),
        case.lambda,
        case.m,
    )
    .unwrap();
    let data = ObservationSeries::new(case.times.clone(), case.y.iter().map(|&v| DVector::from_vec(vec![v])).collect()).unwrap();
    let pf = PfConfig::new(50, 0.25).unwrap();
    let lik: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| pf_loglik(&scalar, &data, &pf, &mut rng::keyed(802, &[i])).unwrap().loglik.exp())
        .collect();
    let (m, se) = mean_and_se(&lik);
    rep.check(
        "C8 unbiasedness",
        (m - lik_oracle).abs() < 3.0 * se + remainder,
        format!("mean {m:.6} ± {se:.1e} vs quadrature {lik_oracle:.6} (truncation bound {remainder:.1e})"),
    );

    let truth = SpdMatrix::from_diagonal(&[0.1, 0.2]).unwrap();
    let sv = SvModel::new(truth.clone(), SpdMatrix::scaled_identity(2, 0.05).unwrap(), 0.4, 1.0 / 60.0).unwrap();
    let prior = TargetDensity::inverse_wishart(WishartParams::new(2.0, SpdMatrix::identity(2)).unwrap());
    let kernel = KernelConfig::mpcn(0.99, SpdMatrix::identity(2), 2).unwrap();
    let pf = PfConfig::new(200, 0.25).unwrap();
    let (n_steps, burn_in) = (20_000, 2_000);
    let fits: Vec<Fit> = (1..=5u64)
        .into_par_iter()
        .map(|seed| {
            let (_, data) = simulate_series(&sv, 50, &mut rng::stream(seed, 2)).unwrap();
            let trace = pseudo_marginal_chain(&data, &sv, &prior, &kernel, &pf, n_steps, seed).unwrap();
            let kept = &trace.chain.states[burn_in..];
            let interval = |i: usize| {
                let v: Vec<f64> = kept.iter().map(|s| s.as_matrix()[(i, i)]).collect();
                (quantile(&v, 0.1), quantile(&v, 0.9))
            };
            (seed, [interval(0), interval(1)], trace.chain.acceptance_rate())
        })
        .collect();
    let covered = |iv: &[(f64, f64); 2]| (0..2).all(|i| iv[i].0 <= truth.as_matrix()[(i, i)] && truth.as_matrix()[(i, i)] <= iv[i].1);
    let hits = fits.iter().filter(|f| covered(&f.1)).count();
    let listing: Vec<String> = fits
        .iter()
        .map(|(s, iv, acc)| format!("seed {s}: O11 [{:.3}, {:.3}], O22 [{:.3}, {:.3}], acc {acc:.2}", iv[0].0, iv[0].1, iv[1].0, iv[1].1))
        .collect();
    rep.check(
        "C8 synthetic recovery",
        hits >= 4,
        format!("{hits} of 5 seeds cover O11 = 0.1 and O22 = 0.2 with 10-90% intervals; {}", listing.join("; ")),
    );

    let cfg = KernelConfig::mpcn(0.5, SpdMatrix::identity(2), 2).unwrap();
    let trace = pseudo_marginal_chain(&ObservationSeries::empty(), &sv, &prior, &cfg, &pf, 300_000, 803).unwrap();
    let chain: Vec<&SpdMatrix> = trace.chain.states[1000..].iter().step_by(100).collect();
    let params = WishartParams::new(2.0, SpdMatrix::identity(2)).unwrap();
    let mut r = rng::stream(804, 0);
    let direct: Vec<SpdMatrix> = (0..chain.len()).map(|_| sample_inverse_wishart(&params, &mut r)).collect();
    let stat_p = |f: fn(&SpdMatrix) -> f64| {
        let a: Vec<f64> = chain.iter().map(|s| f(s)).collect();
        let b: Vec<f64> = direct.iter().map(f).collect();
        ks_two_sample(&a, &b).p_value
    };
    let (p_ld, p_tr) = (stat_p(SpdMatrix::log_det), stat_p(SpdMatrix::trace));
    rep.check(
        "C8 prior-only reduction",
        p_ld > 0.01 && p_tr > 0.01,
        format!("{} thinned states vs direct IW_2(2, I); KS p (log det) = {p_ld:.3}, KS p (tr) = {p_tr:.3}", chain.len()),
    );
    rep.runtime("C8", start.elapsed(), 1800);
}

fn strip_volatile(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("seconds_per_step");
            map.remove("output_dir");
            map.values_mut().for_each(strip_volatile);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let bytes = std::fs::read(&path).unwrap();
        let bytes = if name.ends_with(".json") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            strip_volatile(&mut v);
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        files.insert(name, bytes);
    }
    files
}

fn criterion_9(rep: &mut Report) {
    let start = Instant::now();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let scratch = tempfile::tempdir().unwrap();
    for path in paths.iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let cfg = ExperimentConfig::from_path(path).unwrap();
        let once = |k: usize| {
            let dir = scratch.path().join(format!("{stem}-{k}"));
            run(&cfg.clone().with_output_dir(dir.clone())).unwrap();
            snapshot(&dir)
        };
        let (a, b) = (once(0), once(1));
        let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
        rep.check(
            &format!("C9 determinism {stem}"),
            a.len() == b.len() && differing.is_empty(),
            format!("{} files, differing: {:?}", a.len(), differing),
        );
    }
    rep.runtime("C9", start.elapsed(), 1800);
}

fn main() -> ExitCode {
    let mut rep = Report::default();
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep);
    criterion_9(&mut rep);
    let failed: Vec<&str> = rep.lines.iter().filter(|l| !l.pass).map(|l| l.id.as_str()).collect();
    println!("\n{} of {} checks passed", rep.lines.len() - failed.len(), rep.lines.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
