//! Learns the scale matrices U and V from preliminary samples and tunes the
//! scalar step parameter by bisection on pilot runs.

use matmcmc::diagnostics::{estimate_tuning, tune_scalar, TuneOptions};
use matmcmc::dists::{sample_matrix_normal, MatrixNormalParams, ReferenceTag, WishartParams};
use matmcmc::kernels::{upcast_for_kernel, KernelConfig, TargetDensity};
use matmcmc::linalg::SpdMatrix;
use matmcmc::rng;

fn main() -> matmcmc::Result<()> {
    let sigma = SpdMatrix::from_row_slice(3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.5])?;
    let t = SpdMatrix::from_row_slice(2, &[1.0, -0.3, -0.3, 0.5])?;
    let law = MatrixNormalParams::centered(sigma, t);
    let mut r = rng::stream(1, 0);
    let samples: Vec<_> = (0..5000).map(|_| sample_matrix_normal(&law, &mut r)).collect();
    let est = estimate_tuning(&samples)?;
    println!("U hat\n{}V hat (unit trace)\n{}", est.u_hat.as_matrix(), est.v_hat.as_matrix());

    let density = law.clone();
    let target = TargetDensity::on_matrix(3, 2, ReferenceTag::Lebesgue, move |x| {
        matmcmc::dists::logpdf_matrix_normal(x, &density).unwrap_or(f64::NEG_INFINITY)
    })?;
    let initial = KernelConfig::rwm(0.5, est.u_hat.clone(), est.v_hat.clone())?;
    let (cfg, summary) = tune_scalar(&target, &initial, None, &TuneOptions::default(), 2)?;
    println!("RWM with learned U, V: sigma {:.4}, acceptance {:.3}, rounds {}", cfg.scalar(), summary.acceptance, summary.rounds);

    // MpCN on an upcast Wishart target; acceptance rises with rho
    let pi = TargetDensity::wishart(WishartParams::new(5.0, SpdMatrix::identity(3))?);
    let initial = KernelConfig::mpcn(0.2, SpdMatrix::identity(4), 3)?;
    let target = upcast_for_kernel(&pi, &initial)?;
    let (cfg, summary) = tune_scalar(&target, &initial, None, &TuneOptions::default(), 3)?;
    for (rho, rate) in &summary.history {
        println!("  pilot rho {rho:.4} -> acceptance {rate:.3}");
    }
    println!("MpCN: rho {:.4}, in band: {}", cfg.scalar(), summary.in_band);
    Ok(())
}
