//! Sampling and evaluating the matrix normal, Wishart and Inverse-Wishart laws.

use matmcmc::dists::{
    logpdf_invwishart_mu, logpdf_matrix_normal, logpdf_wishart_mu, sample_inverse_wishart, sample_matrix_normal,
    sample_uniform_stiefel, sample_wishart, MatrixNormalParams, WishartParams,
};
use matmcmc::linalg::SpdMatrix;
use matmcmc::rng;
use nalgebra::DMatrix;

fn main() -> matmcmc::Result<()> {
    let mut r = rng::stream(1, 0);
    let t = SpdMatrix::from_row_slice(2, &[1.0, 0.4, 0.4, 2.0])?;
    let params = WishartParams::new(6.0, t)?;
    let n = 20_000;

    let mut mean_w = DMatrix::zeros(2, 2);
    let mut mean_iw = DMatrix::zeros(2, 2);
    for _ in 0..n {
        mean_w += sample_wishart(&params, &mut r).as_matrix();
        mean_iw += sample_inverse_wishart(&params, &mut r).as_matrix();
    }
    println!("Wishart mean (MC)\n{}expected r T\n{}", mean_w / n as f64, params.wishart_mean().as_matrix());
    println!(
        "Inverse-Wishart mean (MC)\n{}expected T/(r-q-1)\n{}",
        mean_iw / n as f64,
        params.inverse_wishart_mean()?.as_matrix()
    );

    let s = sample_wishart(&params, &mut r);
    println!("log W density at a draw      = {:.6}", logpdf_wishart_mu(&s, &params)?);
    println!("log W^-1 density at its inverse = {:.6}", logpdf_invwishart_mu(&s.inverse(), &params)?);

    let mn = MatrixNormalParams::centered(SpdMatrix::identity(3), SpdMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, 1.0])?);
    let x = sample_matrix_normal(&mn, &mut r);
    println!("matrix normal draw\n{}log density = {:.6}", x.as_matrix(), logpdf_matrix_normal(&x, &mn)?);

    let o = sample_uniform_stiefel(4, 2, &mut r)?;
    println!("Stiefel point O^T O =\n{}", o.as_matrix().transpose() * o.as_matrix());
    Ok(())
}
