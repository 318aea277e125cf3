//! Scalar kernels on prediction scores, their first-argument derivatives, and
//! kernels convolved with additive privacy noise.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// A symmetric kernel on scalars together with d/dx of its first argument.
pub trait ScalarKernel: Sync {
    fn eval(&self, x: f64, y: f64) -> f64;
    fn grad1(&self, x: f64, y: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-(x - y)^2 / (2 bandwidth^2))`
    Gaussian { bandwidth: f64 },
    /// `exp(-|x - y| / scale)`
    Laplacian { scale: f64 },
    /// `-|x - y|`; conditionally positive definite, and the resulting MMD^2
    /// is the energy distance.
    DistanceInduced,
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { bandwidth: p } | Kernel::Laplacian { scale: p } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::Config(format!("kernel parameter must be positive, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Shift-invariant and bounded, i.e. eligible for noise convolution.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Kernel::DistanceInduced)
    }
}

impl ScalarKernel for Kernel {
    #[inline]
    fn eval(&self, x: f64, y: f64) -> f64 {
        let r = x - y;
        match *self {
            Kernel::Gaussian { bandwidth } => (-(r * r) / (2.0 * bandwidth * bandwidth)).exp(),
            Kernel::Laplacian { scale } => (-r.abs() / scale).exp(),
            Kernel::DistanceInduced => -r.abs(),
        }
    }

    /// Non-smooth kernels return the subgradient 0 at `x == y`.
    #[inline]
    fn grad1(&self, x: f64, y: f64) -> f64 {
        let r = x - y;
        match *self {
            Kernel::Gaussian { bandwidth } => {
                let b2 = bandwidth * bandwidth;
                -(r / b2) * (-(r * r) / (2.0 * b2)).exp()
            }
            Kernel::Laplacian { scale } => {
                if r == 0.0 {
                    0.0
                } else {
                    -r.signum() / scale * (-r.abs() / scale).exp()
                }
            }
            Kernel::DistanceInduced => {
                if r == 0.0 {
                    0.0
                } else {
                    -r.signum()
                }
            }
        }
    }
}

/// Additive noise distribution of a privacy mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Gaussian { sigma: f64 },
    Laplacian { scale: f64 },
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            // Difference of two i.i.d. exponentials with mean `scale`.
            Noise::Laplacian { scale } => {
                let exp = Exp::new(1.0 / scale).expect("positive scale");
                exp.sample(rng) - exp.sample(rng)
            }
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => sigma,
            Noise::Laplacian { scale } => scale,
        }
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum DpEval {
    /// Gaussian base with Gaussian noise.
    ClosedForm,
    /// Fixed noise draws shared by every evaluation.
    MonteCarlo { draws: Vec<f64> },
}

/// The expectation `E[k(x, y + xi)]` of a base kernel under privacy noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DpKernel {
    pub base: Kernel,
    pub noise: Noise,
    pub mode: DpEval,
}

/// Convolves `base` with `noise`, in closed form where available and
/// otherwise by Monte Carlo with [`DEFAULT_MC_SAMPLES`] draws.
pub fn dp_convolve(base: Kernel, noise: Noise) -> Result<DpKernel> {
    dp_convolve_with(base, noise, DEFAULT_MC_SAMPLES, 0)
}

pub fn dp_convolve_with(base: Kernel, noise: Noise, n_mc: usize, seed: u64) -> Result<DpKernel> {
    if !base.is_bounded() {
        return Err(Error::UnsupportedKernel(
            "distance-induced kernel is unbounded and cannot be convolved with privacy noise".into(),
        ));
    }
    base.validate()?;
    if !(noise.scale() >= 0.0) {
        return Err(Error::Config("noise scale must be non-negative".into()));
    }
    let mode = match (base, noise) {
        (Kernel::Gaussian { .. }, Noise::Gaussian { .. }) => DpEval::ClosedForm,
        _ => {
            if n_mc == 0 {
                return Err(Error::Config("Monte Carlo kernel needs at least one draw".into()));
            }
            let mut rng = stream_rng(seed, Stream::DpNoise, u64::MAX, 0);
            DpEval::MonteCarlo {
                draws: (0..n_mc).map(|_| noise.sample(&mut rng)).collect(),
            }
        }
    };
    Ok(DpKernel { base, noise, mode })
}

impl DpKernel {
    /// For the closed form: the equivalent Gaussian bandwidth and amplitude.
    pub fn gaussian_equivalent(&self) -> Option<(f64, f64)> {
        match (self.base, self.noise, &self.mode) {
            (Kernel::Gaussian { bandwidth }, Noise::Gaussian { sigma }, DpEval::ClosedForm) => {
                let widened = (bandwidth * bandwidth + sigma * sigma).sqrt();
                Some((widened, bandwidth / widened))
            }
            _ => None,
        }
    }
}

impl ScalarKernel for DpKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.mode {
            DpEval::ClosedForm => {
                let (bw, amp) = self.gaussian_equivalent().expect("closed form");
                let r = x - y;
                amp * (-(r * r) / (2.0 * bw * bw)).exp()
            }
            DpEval::MonteCarlo { draws } => {
                let total: f64 = draws
                    .iter()
                    .map(|xi| 0.5 * (self.base.eval(x, y + xi) + self.base.eval(y, x + xi)))
                    .sum();
                total / draws.len() as f64
            }
        }
    }

    fn grad1(&self, x: f64, y: f64) -> f64 {
        match &self.mode {
            DpEval::ClosedForm => {
                let (bw, amp) = self.gaussian_equivalent().expect("closed form");
                amp * Kernel::Gaussian { bandwidth: bw }.grad1(x, y)
            }
            DpEval::MonteCarlo { draws } => {
                // d/dx of k(y, x + xi) is the derivative in the second argument,
                // which is -grad1 at the swapped point for shift-invariant kernels.
                let total: f64 = draws
                    .iter()
                    .map(|xi| {
                        0.5 * (self.base.grad1(x, y + xi) - self.base.grad1(y, x + xi))
                    })
                    .sum();
                total / draws.len() as f64
            }
        }
    }
}
