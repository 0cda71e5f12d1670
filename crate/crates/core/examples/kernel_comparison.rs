//! Tunes RWM, pCN and MpCN into the 20-40% acceptance band on a Wishart target
//! and compares how fast their running means approach the true mean.

use matmcmc::diagnostics::{benchmark_run, tune_scalar, TuneOptions};
use matmcmc::dists::WishartParams;
use matmcmc::experiment::benchmark_scale;
use matmcmc::kernels::{upcast_for_kernel, KernelConfig, KernelKind, TargetDensity};

fn main() -> matmcmc::Result<()> {
    let q = 4;
    let params = WishartParams::new(8.0, benchmark_scale(q, q as f64, 1)?)?;
    let pi = TargetDensity::wishart(params.clone());
    let mean = params.wishart_mean();
    for (i, kind) in [KernelKind::Rwm, KernelKind::Pcn, KernelKind::Mpcn].into_iter().enumerate() {
        let initial = KernelConfig::standard(kind, q, q, 0.5)?;
        let target = upcast_for_kernel(&pi, &initial)?;
        let (cfg, summary) = tune_scalar(&target, &initial, None, &TuneOptions::default(), 10 + i as u64)?;
        let report = benchmark_run(&target, &cfg, &mean, 20_000, 0, 20 + i as u64)?;
        println!(
            "{kind:>4}: scalar {:.5} (tuned in {} rounds), acceptance {:.3}, final distance {:.4}, {:.2} us/step",
            summary.scalar,
            summary.rounds,
            report.acceptance_rate,
            report.distances.last().unwrap(),
            report.seconds_per_step * 1e6
        );
    }
    Ok(())
}
