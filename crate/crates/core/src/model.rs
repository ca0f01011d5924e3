// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Gaussian models, discretization and information-leakage scores.
//!
//! All entropies and divergences use base-2 logarithms, so Jensen-Shannon
//! divergence lies in `[0, 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::aggregator::MomentEstimate;
use crate::{Error, Result};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianModel {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::argument(format!("invalid Gaussian N({mu}, {sigma2})")));
        }
        Ok(GaussianModel { mu, sigma2 })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.mu;
        (-z * z / (2.0 * self.sigma2)).exp() / (2.0 * PI * self.sigma2).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        0.5 * erfc(-(x - self.mu) / (2.0 * self.sigma2).sqrt())
    }
}

/// The fitted model is `N(μ̂, σ̂²)` verbatim.
pub fn fit_gaussian(est: &MomentEstimate) -> Result<GaussianModel> {
    GaussianModel::new(est.mu_hat, est.sigma2_hat)
}

/// Probability mass over the integers `support_min..=support_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    support_min: i64,
    support_max: i64,
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(support_min: i64, support_max: i64, probs: Vec<f64>) -> Result<Self> {
        if support_max < support_min {
            return Err(Error::argument("pmf support is empty"));
        }
        if probs.len() as i128 != support_max as i128 - support_min as i128 + 1 {
            return Err(Error::argument(format!(
                "pmf has {} entries for support [{support_min}, {support_max}]",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::argument("pmf entries must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::argument(format!("pmf sums to {total}, not 1")));
        }
        Ok(DiscretePmf {
            support_min,
            support_max,
            probs,
        })
    }

    /// Normalizes nonnegative weights into a pmf.
    pub fn from_weights(support_min: i64, support_max: i64, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::argument("weights have no positive finite mass"));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        DiscretePmf::new(support_min, support_max, probs)
    }

    pub fn support_min(&self) -> i64 {
        self.support_min
    }

    pub fn support_max(&self) -> i64 {
        self.support_max
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, x: i64) -> f64 {
        if x < self.support_min || x > self.support_max {
            0.0
        } else {
            self.probs[(x - self.support_min) as usize]
        }
    }

    fn same_support(&self, other: &DiscretePmf) -> Result<()> {
        if self.support_min != other.support_min || self.support_max != other.support_max {
            return Err(Error::argument(format!(
                "pmf supports differ: [{}, {}] vs [{}, {}]",
                self.support_min, self.support_max, other.support_min, other.support_max
            )));
        }
        Ok(())
    }
}

/// How a density is turned into per-integer masses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Density at `k − ½` for each support point `k`, renormalized.
    #[default]
    CenteredSum,
    /// Exact mass of `[k − 1, k]` from the CDF, renormalized.
    CdfBins,
}

pub fn discretize_gaussian(model: &GaussianModel, m: i64, big_m: i64) -> Result<DiscretePmf> {
    discretize_gaussian_with(model, m, big_m, Discretization::CenteredSum)
}

pub fn discretize_gaussian_with(
    model: &GaussianModel,
    m: i64,
    big_m: i64,
    rule: Discretization,
) -> Result<DiscretePmf> {
    if m >= big_m {
        return Err(Error::argument(format!("support [{m}, {big_m}] needs m < M")));
    }
    let centered = || {
        // Log-density at k − ½, shifted so the largest weight is 1.
        let logs: Vec<f64> = (m..=big_m)
            .map(|k| {
                let z = k as f64 - 0.5 - model.mu;
                -z * z / (2.0 * model.sigma2)
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        logs.into_iter().map(|l| (l - top).exp()).collect::<Vec<f64>>()
    };
    let mut weights = match rule {
        Discretization::CenteredSum => centered(),
        Discretization::CdfBins => (m..=big_m)
            .map(|k| model.cdf(k as f64) - model.cdf(k as f64 - 1.0))
            .collect(),
    };
    let cdf_total: f64 = weights.iter().sum();
    if rule == Discretization::CdfBins && (cdf_total.is_nan() || cdf_total <= 0.0) {
        // Every bin underflows in the far tail.
        weights = centered();
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateModel(format!(
            "N({}, {}) has no representable mass on [{m}, {big_m}]",
            model.mu, model.sigma2
        )));
    }
    DiscretePmf::from_weights(m, big_m, weights)
}

/// Equal mass on each of the `M − m + 1` support points.
pub fn uniform_pmf(m: i64, big_m: i64) -> Result<DiscretePmf> {
    if m >= big_m {
        return Err(Error::argument(format!("support [{m}, {big_m}] needs m < M")));
    }
    let n = (big_m - m + 1) as usize;
    DiscretePmf::new(m, big_m, vec![1.0 / n as f64; n])
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn shannon_entropy(p: &DiscretePmf) -> f64 {
    -p.probs.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// `KL(p ‖ q)` in bits; requires `q > 0` wherever `p > 0`.
pub fn kl_divergence(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    p.same_support(q)?;
    kl_terms(&p.probs, &q.probs)
}

fn kl_terms(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::Divergence(
                    "KL(p‖q) is infinite: q vanishes where p does not".into(),
                ));
            }
            total += pi * (pi / qi).log2();
        }
    }
    Ok(total)
}

/// `JS(u, q) = ½KL(u ‖ m) + ½KL(q ‖ m)` with `m = (u + q)/2`.
pub fn js_divergence(u: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    u.same_support(q)?;
    // `a·log2(a/m) = a·(log2(a/(a+b)) + 1)`; `(a+b)/2` can underflow for subnormal `a`.
    let half_kl = |a: f64, b: f64| if a > 0.0 { a * ((a / (a + b)).log2() + 1.0) } else { 0.0 };
    let js: f64 = u
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| 0.5 * (half_kl(a, b) + half_kl(b, a)))
        .sum();
    Ok(js.clamp(0.0, 1.0))
}

/// `H((u + q)/2) − ½H(u) − ½H(q)`, the entropy form of [`js_divergence`].
pub fn js_divergence_entropy_form(u: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    u.same_support(q)?;
    let mix: f64 = u
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| plogp(0.5 * a + 0.5 * b))
        .sum();
    Ok(-mix - 0.5 * shannon_entropy(u) - 0.5 * shannon_entropy(q))
}

/// Attributes ordered by increasing leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageRanking {
    /// `d_j` indexed by attribute position.
    pub distances: Vec<f64>,
    /// 1-based attribute ids, least leaky first.
    pub order: Vec<usize>,
}

impl LeakageRanking {
    /// 1-based rank of attribute `id`.
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.order.iter().position(|&a| a == id).map(|p| p + 1)
    }
}

/// Stable ascending sort of distances; ties keep attribute-id order.
pub fn rank_attributes(distances: &[f64]) -> Result<LeakageRanking> {
    if let Some(bad) = distances.iter().find(|d| !d.is_finite() || !(0.0..=1.0).contains(*d)) {
        return Err(Error::argument(format!(
            "distance {bad} is not a finite value in [0, 1]"
        )));
    }
    let mut order: Vec<usize> = (1..=distances.len()).collect();
    order.sort_by(|&a, &b| distances[a - 1].total_cmp(&distances[b - 1]));
    Ok(LeakageRanking {
        distances: distances.to_vec(),
        order,
    })
}

/// Normalized unit-bin histogram of `values` over `[m, M]`.
pub fn empirical_pmf(values: &[i64], m: i64, big_m: i64) -> Result<DiscretePmf> {
    if values.is_empty() {
        return Err(Error::argument("empirical pmf of no values"));
    }
    if m > big_m {
        return Err(Error::argument("empirical pmf support is empty"));
    }
    let mut counts = vec![0u64; (big_m - m + 1) as usize];
    for &v in values {
        if v < m || v > big_m {
            return Err(Error::argument(format!("value {v} outside [{m}, {big_m}]")));
        }
        counts[(v - m) as usize] += 1;
    }
    let n = values.len() as f64;
    DiscretePmf::new(m, big_m, counts.into_iter().map(|c| c as f64 / n).collect())
}
