//! Slow, direct reference computations for checking the simulator.
//!
//! Nothing here is shared with the `fairfl` crate: kernels, noise samplers and
//! sums are written out again in their most literal form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefKernel {
    Gaussian(f64),
    Laplacian(f64),
    Distance,
}

impl RefKernel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            RefKernel::Gaussian(g) => (-(x - y).powi(2) / (2.0 * g.powi(2))).exp(),
            RefKernel::Laplacian(s) => (-(x - y).abs() / s).exp(),
            RefKernel::Distance => -(x - y).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefNoise {
    Gaussian(f64),
    Laplacian(f64),
}

impl RefNoise {
    /// Gaussian by `rand_distr`, Laplacian by inverting its CDF.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            RefNoise::Gaussian(s) => Normal::new(0.0, s).unwrap().sample(rng),
            RefNoise::Laplacian(b) => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

/// `mean k(x,x') + mean k(y,y') - 2 mean k(x,y)` with plain double loops.
pub fn naive_mmd_squared(sample0: &[f64], sample1: &[f64], kernel: RefKernel) -> f64 {
    let mut xx = 0.0;
    for a in sample0 {
        for b in sample0 {
            xx += kernel.eval(*a, *b);
        }
    }
    let mut yy = 0.0;
    for a in sample1 {
        for b in sample1 {
            yy += kernel.eval(*a, *b);
        }
    }
    let mut xy = 0.0;
    for a in sample0 {
        for b in sample1 {
            xy += kernel.eval(*a, *b);
        }
    }
    let n0 = sample0.len() as f64;
    let n1 = sample1.len() as f64;
    xx / (n0 * n0) + yy / (n1 * n1) - 2.0 * xy / (n0 * n1)
}

/// Central differences, one coordinate at a time.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let up = f(&probe);
        probe[i] = theta[i] - step;
        let down = f(&probe);
        probe[i] = theta[i];
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of `E[k(x, y + xi)]`.
pub fn mc_convolution(kernel: RefKernel, noise: RefNoise, x: f64, y: f64, n_mc: usize, seed: u64) -> (f64, f64) {
    let degenerate = match noise {
        RefNoise::Gaussian(s) | RefNoise::Laplacian(s) => s == 0.0,
    };
    if degenerate {
        return (kernel.eval(x, y), 0.0);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..n_mc).map(|_| kernel.eval(x, y + noise.sample(&mut rng))).collect();
    mean_and_se(&draws)
}

/// `C(z) = mean_y0 k(z, y) - mean_y1 k(z, y)`.
pub fn naive_c(z: f64, group0: &[f64], group1: &[f64], kernel: RefKernel) -> f64 {
    let m0: f64 = group0.iter().map(|y| kernel.eval(z, *y)).sum::<f64>() / group0.len() as f64;
    let m1: f64 = group1.iter().map(|y| kernel.eval(z, *y)).sum::<f64>() / group1.len() as f64;
    m0 - m1
}

/// `1 / (1 + e^-z)`.
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Half-width of a `z`-sigma binomial interval for a proportion `p` over `n`
/// trials.
pub fn binomial_halfwidth(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_eigenvalue(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}
