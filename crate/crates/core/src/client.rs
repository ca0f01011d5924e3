// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! User-side pipeline: feature extraction, obfuscation and encryption.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpnoise::{sample_symmetric_geometric, NoiseParams};
use crate::group::{GroupElement, GroupParams, Scalar};
use crate::{Error, Result};

/// Integer attribute with domain `[min, max]` and a unit price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    /// 1-based position in the attribute list.
    #[serde(default, skip_serializing)]
    pub id: usize,
    pub name: String,
    pub min: i64,
    pub max: i64,
    #[serde(default = "unit_price")]
    pub price: f64,
}

fn unit_price() -> f64 {
    1.0
}

impl AttributeSpec {
    pub fn new(id: usize, name: impl Into<String>, min: i64, max: i64, price: f64) -> Result<Self> {
        let spec = AttributeSpec {
            id,
            name: name.into(),
            min,
            max,
            price,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::Validation {
            attribute: self.name.clone(),
            reason: reason.into(),
        };
        if self.name.is_empty() {
            return Err(Error::argument("attribute name must be nonempty"));
        }
        if self.min >= self.max {
            return Err(fail("min must be below max"));
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            return Err(fail("price must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn contains(&self, x: i64) -> bool {
        (self.min..=self.max).contains(&x)
    }

    /// Number of support points, `max - min + 1`.
    pub fn support_len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    /// Largest `x²` over the domain.
    pub fn max_square(&self) -> i64 {
        self.min.pow(2).max(self.max.pow(2))
    }

    /// Smallest `x²` over the domain.
    pub fn min_square(&self) -> i64 {
        if self.min <= 0 && self.max >= 0 {
            0
        } else {
            self.min.pow(2).min(self.max.pow(2))
        }
    }

    /// Sensitivity of the first-moment channel.
    pub fn first_sensitivity(&self) -> u64 {
        (self.max - self.min) as u64
    }

    /// Worst-case change of `x²` over the domain.
    pub fn second_sensitivity(&self) -> u64 {
        ((self.max_square() - self.min_square()) as u64).max(1)
    }
}

/// Assigns 1-based ids by position and validates a parsed attribute list.
pub fn index_specs(mut specs: Vec<AttributeSpec>) -> Result<Vec<AttributeSpec>> {
    if specs.is_empty() {
        return Err(Error::argument("at least one attribute is required"));
    }
    for (i, spec) in specs.iter_mut().enumerate() {
        spec.id = i + 1;
        spec.validate()?;
    }
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::argument("attribute names must be unique"));
    }
    Ok(specs)
}

/// Profile of one user: attribute values and privacy sensitivities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: u64,
    pub values: Vec<i64>,
    pub sensitivities: Vec<f64>,
}

impl Profile {
    pub fn validate(&self, specs: &[AttributeSpec]) -> Result<()> {
        if self.values.len() != specs.len() || self.sensitivities.len() != specs.len() {
            return Err(Error::argument(format!(
                "user {} has {} values and {} sensitivities for {} attributes",
                self.user_id,
                self.values.len(),
                self.sensitivities.len(),
                specs.len()
            )));
        }
        for ((spec, &x), &lambda) in specs.iter().zip(&self.values).zip(&self.sensitivities) {
            if !spec.contains(x) {
                return Err(Error::Validation {
                    attribute: spec.name.clone(),
                    reason: format!("value {x} outside [{}, {}]", spec.min, spec.max),
                });
            }
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::Validation {
                    attribute: spec.name.clone(),
                    reason: format!("sensitivity {lambda} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// `f(x) = (x, x²)` per attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    pub first_moments: Vec<i64>,
    pub second_moments: Vec<i64>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.first_moments.len() + self.second_moments.len()
    }
}

/// Signed-encoded noisy features in `Z_q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoisyFeatureVector {
    pub first_moments: Vec<Scalar>,
    pub second_moments: Vec<Scalar>,
}

/// Noise added by [`obfuscate_recorded`], kept for simulator oracles only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AppliedNoise {
    pub first: Vec<i64>,
    pub second: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CipherPair {
    pub c: GroupElement,
    pub b: GroupElement,
}

pub fn extract_features(profile: &Profile, specs: &[AttributeSpec]) -> Result<FeatureVector> {
    if profile.values.len() != specs.len() {
        return Err(Error::argument(format!(
            "user {} has {} values for {} attributes",
            profile.user_id,
            profile.values.len(),
            specs.len()
        )));
    }
    for (spec, &x) in specs.iter().zip(&profile.values) {
        if !spec.contains(x) {
            return Err(Error::Validation {
                attribute: spec.name.clone(),
                reason: format!("value {x} outside [{}, {}]", spec.min, spec.max),
            });
        }
    }
    Ok(FeatureVector {
        first_moments: profile.values.clone(),
        second_moments: profile.values.iter().map(|x| x * x).collect(),
    })
}

/// Adds independent noise to every feature and encodes the result.
pub fn obfuscate<R: Rng + ?Sized>(
    params: &GroupParams,
    features: &FeatureVector,
    noise_first: &[NoiseParams],
    noise_second: &[NoiseParams],
    rng: &mut R,
) -> Result<NoisyFeatureVector> {
    obfuscate_recorded(params, features, noise_first, noise_second, rng).map(|(nfv, _)| nfv)
}

/// As [`obfuscate`], also returning the noise drawn.
pub fn obfuscate_recorded<R: Rng + ?Sized>(
    params: &GroupParams,
    features: &FeatureVector,
    noise_first: &[NoiseParams],
    noise_second: &[NoiseParams],
    rng: &mut R,
) -> Result<(NoisyFeatureVector, AppliedNoise)> {
    let k = features.first_moments.len();
    if noise_first.len() != k || noise_second.len() != k || features.second_moments.len() != k {
        return Err(Error::argument(format!(
            "need one noise configuration per attribute and channel ({k} attributes)"
        )));
    }
    let mut applied = AppliedNoise::default();
    let mut noisy = NoisyFeatureVector {
        first_moments: Vec::with_capacity(k),
        second_moments: Vec::with_capacity(k),
    };
    for j in 0..k {
        let r = sample_symmetric_geometric(&noise_first[j], rng);
        let o = sample_symmetric_geometric(&noise_second[j], rng);
        noisy
            .first_moments
            .push(encode_noisy(params, features.first_moments[j], r)?);
        noisy
            .second_moments
            .push(encode_noisy(params, features.second_moments[j], o)?);
        applied.first.push(r);
        applied.second.push(o);
    }
    Ok((noisy, applied))
}

fn encode_noisy(params: &GroupParams, x: i64, noise: i64) -> Result<Scalar> {
    let v = x.checked_add(noise).ok_or_else(|| Error::Range {
        value: x as i128 + noise as i128,
        reason: "noisy value overflows i64".into(),
    })?;
    params.encode_signed(v).map_err(|_| Error::Range {
        value: v.into(),
        reason: "group order too small for the configured domain and noise".into(),
    })
}

/// `c_j = g^{x̂_j}·H(t)^{s_i}` and `b_j = g^{x̂⁽²⁾_j}·H(t)^{s_i}`.
pub fn encrypt(
    params: &GroupParams,
    user_key: &Scalar,
    tag: &[u8],
    noisy: &NoisyFeatureVector,
) -> Result<Vec<CipherPair>> {
    let h = params.hash_to_group(tag)?;
    Ok(encrypt_with_blinding(params, &params.pow(&h, user_key), noisy))
}

/// Encryption with a precomputed blinding factor `H(t)^{s_i}`.
///
/// All of a user's ciphertexts in one round share the same blinding factor.
pub fn encrypt_with_blinding(
    params: &GroupParams,
    blinding: &GroupElement,
    noisy: &NoisyFeatureVector,
) -> Vec<CipherPair> {
    noisy
        .first_moments
        .iter()
        .zip(&noisy.second_moments)
        .map(|(x, x2)| CipherPair {
            c: params.mul(&params.pow_g(x), blinding),
            b: params.mul(&params.pow_g(x2), blinding),
        })
        .collect()
}
