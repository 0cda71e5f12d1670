//! Samples a Wishart law on P+(q) by running MpCN on M(p,q) against the upcast
//! target and mapping states back with `S = x^T U^{-1} x`.

use matmcmc::diagnostics::running_mean_distance;
use matmcmc::dists::WishartParams;
use matmcmc::kernels::{induced_spd_chain, run_chain_default_start, upcast_target, KernelConfig, TargetDensity};
use matmcmc::linalg::SpdMatrix;

fn main() -> matmcmc::Result<()> {
    let (q, p) = (3, 5);
    let scale = SpdMatrix::from_row_slice(3, &[1.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5])?;
    let params = WishartParams::new(6.0, scale)?;
    let pi = TargetDensity::wishart(params.clone());

    let u = SpdMatrix::from_diagonal(&[1.0, 2.0, 0.5, 1.0, 3.0])?;
    let cfg = KernelConfig::mpcn(0.9, u.clone(), q)?;
    let target = upcast_target(&pi, &u, p)?;
    let trace = run_chain_default_start(&target, &cfg, 50_000, 42)?;
    let spd = induced_spd_chain(&trace, &u)?;

    let (dist, _) = running_mean_distance(&spd.states[1..], &params.wishart_mean())?;
    println!("acceptance rate {:.3}", trace.acceptance_rate());
    for n in [100, 1_000, 10_000, 50_000] {
        println!("distance of running mean to r T after {n:>6} steps: {:.4}", dist[n - 1]);
    }
    Ok(())
}
