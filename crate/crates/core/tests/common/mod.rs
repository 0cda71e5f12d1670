#![allow(dead_code)]

pub mod sv_oracle;

use matmcmc::linalg::{DenseMatrix, SpdMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// `G G^T / q + 0.5 I` with `G` standard normal: well conditioned SPD test input.
pub fn random_spd<R: Rng + ?Sized>(q: usize, rng: &mut R) -> SpdMatrix {
    let g = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    SpdMatrix::new(&g * g.transpose() / q as f64 + DMatrix::identity(q, q) * 0.5).unwrap()
}

pub fn random_dense<R: Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::new(DMatrix::from_fn(p, q, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Mean of `f` and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    (matmcmc::stats::mean(x), matmcmc::stats::std_error(x))
}

/// Every `k`-th element.
pub fn thin<T: Clone>(x: &[T], k: usize) -> Vec<T> {
    x.iter().step_by(k).cloned().collect()
}
