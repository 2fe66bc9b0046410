//! Adjacency, sensitivity and the Laplace mechanism for the nodal gas demand.

use crate::markets::SensitiveDemand;
use crate::rng::SeededRng;
use thiserror::Error;

/// Noise is rounded to this grid so that `values − noise` recovers grid-aligned
/// inputs bit for bit.
pub const NOISE_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("alpha and epsilon must be positive and finite")]
    BadParams,
    #[error("vectors of lengths {0} and {1}")]
    LengthMismatch(usize, usize),
}

/// α: indistinguishability radius in MWh. ε: privacy loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    pub alpha: f64,
    pub epsilon: f64,
}

impl PrivacyParams {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self, PrivacyError> {
        let p = Self { alpha, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(alpha: f64) -> Result<Self, PrivacyError> {
        Self::new(alpha, 1.0)
    }

    pub fn validate(&self) -> Result<(), PrivacyError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.alpha) && ok(self.epsilon) {
            Ok(())
        } else {
            Err(PrivacyError::BadParams)
        }
    }

    /// Laplace scale `Δ/ε`.
    pub fn scale(&self) -> f64 {
        identity_sensitivity(self) / self.epsilon
    }
}

/// The released demand D̃ and the noise that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ObfuscatedDemand {
    values: Vec<f64>,
    noise: Vec<f64>,
    pub params: PrivacyParams,
    pub seed_record: u64,
}

impl ObfuscatedDemand {
    /// Wraps an already released vector with zero recorded noise.
    pub fn from_release(values: Vec<f64>, params: PrivacyParams, seed_record: u64) -> Self {
        let noise = vec![0.0; values.len()];
        Self {
            values,
            noise,
            params,
            seed_record,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Whether `d1` and `d2` differ in at most one coordinate, by at most α.
pub fn adjacent(d1: &[f64], d2: &[f64], alpha: f64) -> Result<bool, PrivacyError> {
    if d1.len() != d2.len() {
        return Err(PrivacyError::LengthMismatch(d1.len(), d2.len()));
    }
    let diffs: Vec<f64> = d1.iter().zip(d2).map(|(a, b)| (a - b).abs()).filter(|&v| v != 0.0).collect();
    Ok(diffs.len() <= 1 && diffs.iter().all(|&v| v <= alpha))
}

/// L1 sensitivity of the identity query under α-adjacency.
pub fn identity_sensitivity(params: &PrivacyParams) -> f64 {
    params.alpha
}

/// Adds i.i.d. Laplace(0, α/ε) noise to every entry. No clipping.
pub fn obfuscate(demand: &SensitiveDemand, params: &PrivacyParams, rng: &mut SeededRng) -> ObfuscatedDemand {
    let b = params.scale();
    let noise: Vec<f64> = demand
        .values()
        .iter()
        .map(|_| (rng.laplace(b) / NOISE_QUANTUM).round() * NOISE_QUANTUM)
        .collect();
    let values = demand.values().iter().zip(&noise).map(|(d, n)| d + n).collect();
    ObfuscatedDemand {
        values,
        noise,
        params: *params,
        seed_record: rng.seed(),
    }
}
