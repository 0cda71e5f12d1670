//! Likelihood of the scalar volatility model by quadrature over jump
//! configurations with at most two jumps, plus a bound on the rest.

use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on `[a, b]` (Golub-Welsch).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            (0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w)
        })
        .collect()
}

/// Gauss-Laguerre nodes and weights for `∫_0^∞ f(x) e^{-x} dx` (Golub-Welsch).
pub fn gauss_laguerre(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0
        } else if i + 1 == j || j + 1 == i {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect()
}

fn normal_pdf(y: f64, var: f64) -> f64 {
    (-0.5 * y * y / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// One-dimensional model: `dΣ = -2ωΣ dt + dL`, jumps of rate `lambda` with
/// Exponential sizes of mean `m`, observations `y_i ~ N(0, Σ_{t_i})`.
pub struct ScalarSv {
    pub omega: f64,
    pub sigma0: f64,
    pub lambda: f64,
    pub m: f64,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
}

impl ScalarSv {
    fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn product(&self, jumps: &[(f64, f64)]) -> f64 {
        self.times
            .iter()
            .zip(&self.y)
            .map(|(&t, &y)| {
                let mut var = (-2.0 * self.omega * t).exp() * self.sigma0;
                for &(s, e) in jumps {
                    if s <= t {
                        var += e * (-2.0 * self.omega * (t - s)).exp();
                    }
                }
                normal_pdf(y, var)
            })
            .product()
    }

    /// Likelihood restricted to configurations with at most two jumps, and an
    /// upper bound on the contribution of three or more.
    pub fn likelihood(&self, time_nodes: usize, size_nodes: usize) -> (f64, f64) {
        let h = self.horizon();
        let mu = self.lambda * h;
        let p = |k: i32| (-mu).exp() * mu.powi(k) / (1..=k).map(f64::from).product::<f64>();
        // jump times are uniform on [0, h] given the count; split at observation times
        let mut edges = vec![0.0];
        edges.extend(self.times.iter().copied());
        let times: Vec<(f64, f64)> = edges
            .windows(2)
            .flat_map(|w| gauss_legendre(time_nodes, w[0], w[1]))
            .map(|(s, w)| (s, w / h))
            .collect();
        let sizes: Vec<(f64, f64)> = gauss_laguerre(size_nodes).into_iter().map(|(x, w)| (x * self.m, w)).collect();

        let none = self.product(&[]);
        let mut one = 0.0;
        for &(s, ws) in &times {
            for &(e, we) in &sizes {
                one += ws * we * self.product(&[(s, e)]);
            }
        }
        let mut two = 0.0;
        for &(s1, w1) in &times {
            for &(s2, w2) in &times {
                for &(e1, v1) in &sizes {
                    for &(e2, v2) in &sizes {
                        two += w1 * w2 * v1 * v2 * self.product(&[(s1, e1), (s2, e2)]);
                    }
                }
            }
        }
        let value = p(0) * none + p(1) * one + p(2) * two;

        // each factor is at most its maximum over variances above the jump-free floor
        let sup: f64 = self
            .times
            .iter()
            .zip(&self.y)
            .map(|(&t, &y)| {
                let floor = (-2.0 * self.omega * t).exp() * self.sigma0;
                normal_pdf(y, floor.max(y * y))
            })
            .product();
        let rest = 1.0 - p(0) - p(1) - p(2);
        (value, rest * sup)
    }
}
