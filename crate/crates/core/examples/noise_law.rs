//! The multiplicative noise ε of the random walk MpCN induces on P+(q): its
//! law is invariant under inversion, and at ρ = 0 its eigenvalues have a
//! closed-form joint density.

use matmcmc::noise::{eigen_logdensity_rho0, EpsilonLawParams, EpsilonSampler};
use matmcmc::rng;
use matmcmc::stats::ks_two_sample;

fn main() -> matmcmc::Result<()> {
    for (rho, p, q) in [(0.0, 2, 2), (0.5, 5, 2), (0.9, 5, 1)] {
        let sampler = EpsilonSampler::new(EpsilonLawParams::new(rho, p, q)?)?;
        let mut r = rng::stream(3, 0);
        let log_det: Vec<f64> = (0..20_000).map(|_| sampler.sample(&mut r).log_det()).collect();
        let neg: Vec<f64> = log_det.iter().map(|v| -v).collect();
        let ks = ks_two_sample(&log_det, &neg);
        println!("rho={rho} p={p} q={q}: KS(log det ε, -log det ε) p-value {:.3}", ks.p_value);
    }
    let e = EpsilonSampler::new(EpsilonLawParams::new(0.0, 4, 2)?)?.sample(&mut rng::stream(4, 0));
    let l = e.eigenvalues();
    println!("ρ=0 eigenvalues {:?}, log density {:.4}", l.as_slice(), eigen_logdensity_rho0(l.as_slice(), 4, 2)?);
    Ok(())
}
