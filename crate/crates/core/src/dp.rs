//! Additive privacy noise on the broadcast prediction sets.
//!
//! Averaging `C` over noisy sets is the same as evaluating `C` on the clean
//! (clipped) sets with the noise-convolved kernel; [`dp_expected_c`] computes
//! the latter directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{c_function, PredictionSets, ScoreSets};
use crate::kernels::{dp_convolve_with, Kernel, Noise, DEFAULT_MC_SAMPLES};
use crate::rng::{stream_rng, Stream};

fn default_clip() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_mc_draws() -> usize {
    DEFAULT_MC_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpMechanism {
    /// `None` disables the mechanism.
    #[serde(default)]
    pub noise: Option<Noise>,
    /// Scores are clipped into `[lo, hi]` before noise is added.
    #[serde(default = "default_clip")]
    pub clip: (f64, f64),
    #[serde(default)]
    pub seed: u64,
    /// Noise draws behind the convolved kernel when it has no closed form.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
}

impl Default for DpMechanism {
    fn default() -> Self {
        DpMechanism::none()
    }
}

impl DpMechanism {
    pub fn none() -> Self {
        DpMechanism {
            noise: None,
            clip: default_clip(),
            seed: 0,
            mc_draws: DEFAULT_MC_SAMPLES,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        DpMechanism {
            noise: Some(Noise::Gaussian { sigma }),
            seed,
            ..DpMechanism::none()
        }
    }

    pub fn laplacian(scale: f64, seed: u64) -> Self {
        DpMechanism {
            noise: Some(Noise::Laplacian { scale }),
            seed,
            ..DpMechanism::none()
        }
    }

    pub fn is_active(&self) -> bool {
        self.noise.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(noise) = self.noise {
            if !(noise.scale() > 0.0 && noise.scale().is_finite()) {
                return Err(Error::Config(format!(
                    "DP noise scale must be positive, got {}",
                    noise.scale()
                )));
            }
            if !(self.clip.0 < self.clip.1) {
                return Err(Error::Config(format!(
                    "DP clip range must satisfy lo < hi, got {:?}",
                    self.clip
                )));
            }
        }
        Ok(())
    }

    fn clip_set(&self, sets: &ScoreSets) -> ScoreSets {
        let (lo, hi) = self.clip;
        ScoreSets {
            group0: sets.group0.iter().map(|v| v.clamp(lo, hi)).collect(),
            group1: sets.group1.iter().map(|v| v.clamp(lo, hi)).collect(),
        }
    }
}

/// Clips every score and adds independent noise drawn from the mechanism's
/// stream for `sets.round`. An inactive mechanism returns the input unchanged.
pub fn protect(sets: &PredictionSets, mech: &DpMechanism) -> PredictionSets {
    let Some(noise) = mech.noise else {
        return sets.clone();
    };
    let mut rng = stream_rng(mech.seed, Stream::DpNoise, sets.round as u64, 0);
    let protected = sets
        .sets
        .iter()
        .map(|s| {
            s.as_ref().map(|s| {
                let mut clipped = mech.clip_set(s);
                for v in clipped.group0.iter_mut().chain(clipped.group1.iter_mut()) {
                    *v += noise.sample(&mut rng);
                }
                clipped
            })
        })
        .collect();
    PredictionSets {
        round: sets.round,
        sets: protected,
    }
}

/// Expected value of `C(z)` over the mechanism's noise, given the clean sets.
pub fn dp_expected_c(z: f64, sets: &ScoreSets, mech: &DpMechanism, base: &Kernel) -> Result<f64> {
    match mech.noise {
        None => c_function(z, sets, base),
        Some(noise) => {
            let dk = dp_convolve_with(*base, noise, mech.mc_draws, mech.seed)?;
            c_function(z, &mech.clip_set(sets), &dk)
        }
    }
}
