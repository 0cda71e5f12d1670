//! Log-eigenvalue clouds of proposals from the state with Gram matrix I_q:
//! RWM and pCN proposals grow with p, MpCN proposals collapse onto I_q.

use matmcmc::diagnostics::{cloud_mean_log_eigenvalue, cloud_spread, proposal_cloud, write_cloud_csv};
use matmcmc::kernels::{KernelConfig, KernelKind};

fn main() -> matmcmc::Result<()> {
    let q = 4;
    for kind in [KernelKind::Rwm, KernelKind::Pcn, KernelKind::Mpcn] {
        for p in [4, 16, 64] {
            let cfg = KernelConfig::standard(kind, p, q, 0.5)?;
            let cloud = proposal_cloud(&cfg, 1000, 5)?;
            println!(
                "{kind:>4} p={p:>2}: mean log λ {:+.3}, mean |(log λi, log λj)| {:.3}",
                cloud_mean_log_eigenvalue(&cloud),
                cloud_spread(&cloud)
            );
        }
    }
    let cloud = proposal_cloud(&KernelConfig::standard(KernelKind::Mpcn, 4, q, 0.5)?, 5, 5)?;
    write_cloud_csv(&cloud, std::io::stdout())?;
    Ok(())
}
