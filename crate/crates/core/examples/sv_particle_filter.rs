//! Simulates the matrix OU volatility model with compound-Poisson jumps and
//! estimates the log-likelihood with the particle filter.

use matmcmc::linalg::SpdMatrix;
use matmcmc::rng;
use matmcmc::stats::{mean, std_error};
use matmcmc::sv::{deterministic_loglik, pf_loglik, simulate_series, PfConfig, SvModel};

fn main() -> matmcmc::Result<()> {
    let omega = SpdMatrix::from_row_slice(2, &[0.1, 0.02, 0.02, 0.2])?;
    let model = SvModel::with_default_jumps(omega)?;
    let (path, data) = simulate_series(&model, 100, &mut rng::stream(1, 0))?;
    println!("simulated {} observations, {} jumps", data.len(), path.n_jumps());

    for n in [100, 500, 2000] {
        let cfg = PfConfig::new(n, 0.25)?;
        let est: Vec<f64> =
            (0..20).map(|k| pf_loglik(&model, &data, &cfg, &mut rng::stream(2, k)).map(|e| e.loglik)).collect::<Result<_, _>>()?;
        println!("{n:>5} particles: log-likelihood {:.3} ± {:.3}", mean(&est), std_error(&est));
    }

    // without jumps the filter is exact
    let smooth = SvModel::new(model.omega.clone(), SpdMatrix::identity(2), 0.0, model.jump_mean)?;
    let (_, data) = simulate_series(&smooth, 20, &mut rng::stream(1, 1))?;
    let pf = pf_loglik(&smooth, &data, &PfConfig::new(10, 0.25)?, &mut rng::stream(3, 0))?;
    println!("no jumps: filter {:.10}, closed form {:.10}", pf.loglik, deterministic_loglik(&smooth, &data)?);
    Ok(())
}
