//! Pseudo-marginal MpCN fit of the mean-reversion matrix Ω from a simulated
//! return series, with an Inverse-Wishart prior.

use matmcmc::dists::WishartParams;
use matmcmc::kernels::{KernelConfig, TargetDensity};
use matmcmc::linalg::SpdMatrix;
use matmcmc::rng;
use matmcmc::stats::quantile;
use matmcmc::sv::{pseudo_marginal_chain, simulate_series, PfConfig, SvModel};

fn main() -> matmcmc::Result<()> {
    let truth = SpdMatrix::from_diagonal(&[0.1, 0.2])?;
    let model = SvModel::with_default_jumps(truth)?;
    let (_, data) = simulate_series(&model, 50, &mut rng::stream(4, 0))?;

    let prior = TargetDensity::inverse_wishart(WishartParams::new(2.0, SpdMatrix::identity(2))?);
    let kernel = KernelConfig::mpcn(0.9, SpdMatrix::identity(2), 2)?;
    let trace = pseudo_marginal_chain(&data, &model, &prior, &kernel, &PfConfig::new(200, 0.25)?, 4000, 11)?;
    println!("acceptance rate {:.3}", trace.chain.acceptance_rate());

    let kept = &trace.chain.states[1000..];
    for (name, (i, j), true_value) in [("Ω11", (0, 0), 0.1), ("Ω22", (1, 1), 0.2)] {
        let v: Vec<f64> = kept.iter().map(|s| s.as_matrix()[(i, j)]).collect();
        println!(
            "{name}: 95% interval [{:.3}, {:.3}], true {true_value}",
            quantile(&v, 0.025),
            quantile(&v, 0.975)
        );
    }
    Ok(())
}
