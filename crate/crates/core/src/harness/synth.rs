// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Census-like synthetic profiles.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::client::{index_specs, AttributeSpec, Profile};
use crate::rng;
use crate::{Error, Result};

/// Below this probability of landing in the support, generation is refused.
const MIN_SUPPORT_MASS: f64 = 1e-6;

/// One Gaussian component, rounded to the nearest integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: f64,
    pub std_dev: f64,
}

impl Component {
    /// Mass of the rounded component on `[m, M]`.
    fn support_mass(&self, m: i64, big_m: i64) -> f64 {
        let z = |x: f64| (x - self.mean) / (self.std_dev * std::f64::consts::SQRT_2);
        0.5 * (erfc(z(m as f64 - 0.5)) - erfc(z(big_m as f64 + 0.5)))
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.mean.is_finite() || !(self.std_dev.is_finite() && self.std_dev > 0.0) {
            return Err(Error::argument(format!(
                "{name}: component N({}, {}²) needs a finite mean and positive deviation",
                self.mean, self.std_dev
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    TruncatedNormal(Component),
    TwoComponentMixture {
        /// Probability of drawing from `first`.
        weight: f64,
        first: Component,
        second: Component,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAttribute {
    #[serde(flatten)]
    pub spec: AttributeSpec,
    pub distribution: Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub attributes: Vec<SyntheticAttribute>,
}

impl SyntheticSpec {
    /// Income, education and age stand-ins.
    pub fn census_like() -> Self {
        SyntheticSpec {
            attributes: vec![income(), education(), age()],
        }
    }

    pub fn new(attributes: Vec<SyntheticAttribute>) -> Result<Self> {
        let spec = SyntheticSpec { attributes };
        spec.validate()?;
        Ok(spec)
    }

    /// Attribute specs with ids assigned.
    pub fn specs(&self) -> Result<Vec<AttributeSpec>> {
        index_specs(self.attributes.iter().map(|a| a.spec.clone()).collect())
    }

    /// Keeps only the named attributes, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let attributes = names
            .iter()
            .map(|n| {
                self.attributes
                    .iter()
                    .find(|a| &a.spec.name == n)
                    .cloned()
                    .ok_or_else(|| Error::argument(format!("no synthetic attribute `{n}`")))
            })
            .collect::<Result<_>>()?;
        SyntheticSpec::new(attributes)
    }

    pub fn validate(&self) -> Result<()> {
        self.specs()?;
        for a in &self.attributes {
            let (m, big_m, name) = (a.spec.min, a.spec.max, a.spec.name.as_str());
            let mass = match &a.distribution {
                Family::Uniform => 1.0,
                Family::TruncatedNormal(c) => {
                    c.validate(name)?;
                    c.support_mass(m, big_m)
                }
                Family::TwoComponentMixture { weight, first, second } => {
                    if !(*weight > 0.0 && *weight < 1.0) {
                        return Err(Error::argument(format!(
                            "{name}: mixture weight {weight} outside (0, 1)"
                        )));
                    }
                    first.validate(name)?;
                    second.validate(name)?;
                    weight * first.support_mass(m, big_m) + (1.0 - weight) * second.support_mass(m, big_m)
                }
            };
            if mass < MIN_SUPPORT_MASS {
                return Err(Error::argument(format!(
                    "{name}: distribution puts mass {mass:e} on [{m}, {big_m}]"
                )));
            }
        }
        Ok(())
    }
}

/// Right-skewed: the mode sits near the bottom of the range.
pub fn income() -> SyntheticAttribute {
    SyntheticAttribute {
        spec: AttributeSpec::new(0, "income", 1, 100, 1.0).expect("static spec"),
        distribution: Family::TruncatedNormal(Component {
            mean: 20.0,
            std_dev: 25.0,
        }),
    }
}

/// Bimodal: school leavers and graduates.
pub fn education() -> SyntheticAttribute {
    SyntheticAttribute {
        spec: AttributeSpec::new(0, "education", 1, 16, 1.0).expect("static spec"),
        distribution: Family::TwoComponentMixture {
            weight: 0.55,
            first: Component {
                mean: 9.0,
                std_dev: 1.0,
            },
            second: Component {
                mean: 13.0,
                std_dev: 1.0,
            },
        },
    }
}

/// Close to uniform over the adult range.
pub fn age() -> SyntheticAttribute {
    SyntheticAttribute {
        spec: AttributeSpec::new(0, "age", 15, 90, 1.0).expect("static spec"),
        distribution: Family::TruncatedNormal(Component {
            mean: 50.0,
            std_dev: 40.0,
        }),
    }
}

fn draw<R: Rng + ?Sized>(c: &Component, m: i64, big_m: i64, rng: &mut R) -> i64 {
    let normal = Normal::new(c.mean, c.std_dev).expect("validated component");
    loop {
        let x = normal.sample(rng).round();
        if x >= m as f64 && x <= big_m as f64 {
            return x as i64;
        }
    }
}

fn sample_value<R: Rng + ?Sized>(a: &SyntheticAttribute, rng: &mut R) -> i64 {
    let (m, big_m) = (a.spec.min, a.spec.max);
    match &a.distribution {
        Family::Uniform => rng.random_range(m..=big_m),
        Family::TruncatedNormal(c) => draw(c, m, big_m, rng),
        Family::TwoComponentMixture { weight, first, second } => {
            // Each component is truncated to the support on its own.
            let c = if rng.random::<f64>() < *weight { first } else { second };
            if c.support_mass(m, big_m) < MIN_SUPPORT_MASS {
                let other = if std::ptr::eq(c, first) { second } else { first };
                draw(other, m, big_m, rng)
            } else {
                draw(c, m, big_m, rng)
            }
        }
    }
}

/// Users `1..=n_users`, each drawn from its own stream of `seed`.
///
/// Sensitivities are all zero.
pub fn gen_synthetic(spec: &SyntheticSpec, n_users: usize, seed: &[u8]) -> Result<Vec<Profile>> {
    if n_users == 0 {
        return Err(Error::argument("n_users must be at least 1"));
    }
    spec.validate()?;
    let k = spec.attributes.len();
    Ok((1..=n_users as u64)
        .map(|user_id| {
            let mut rng = rng::derive(seed, "synth", user_id);
            Profile {
                user_id,
                values: spec.attributes.iter().map(|a| sample_value(a, &mut rng)).collect(),
                sensitivities: vec![0.0; k],
            }
        })
        .collect())
}
