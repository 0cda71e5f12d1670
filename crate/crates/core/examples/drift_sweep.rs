//! Estimates the drift ratio `(P̃V - V)/V` at `diag(s, 0)` for several `s` and
//! `α`, with direct sampling and with Pareto importance sampling.

use matmcmc::drift::{drift_sweep, write_sweep_csv, DriftConfig, DriftMethod};

fn main() -> matmcmc::Result<()> {
    let s_grid = [1.0, 10.0, 100.0, 1000.0];
    let alpha_grid = [0.1, 0.3, 0.5];
    for method in [DriftMethod::Direct, DriftMethod::ParetoIs] {
        let cfg = DriftConfig::new(2.0, 2, 2, 0.1, 20_000, method)?;
        let rows = drift_sweep(&s_grid, &alpha_grid, &cfg, 7)?;
        println!("{method:?} (r = p = q = 2)");
        write_sweep_csv(&rows, std::io::stdout())?;
    }
    Ok(())
}
