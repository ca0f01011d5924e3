// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Truncated symmetric geometric noise.
//!
//! A raw sample has pmf `Pr[k] = (α-1)/(α+1) · α^{-|k|}` over all integers,
//! with `α = exp(ε/Δ)`. Samples beyond `±B` are rejected and redrawn so the
//! aggregate noise, and with it the discrete-log window, stays bounded. The
//! rejected tail mass is charged to δ.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest per-user magnitude bound accepted; keeps `N·B` well inside `i64`.
const MAX_TRUNCATION: u64 = 1 << 40;

/// Tail mass per user never exceeds this, whatever δ is.
const MAX_TAIL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub epsilon: f64,
    pub delta: f64,
    pub sensitivity: u64,
    pub alpha: f64,
    /// Per-draw magnitude bound `B`; zero means noise is disabled.
    pub truncation: u64,
}

impl NoiseParams {
    /// Noise for `n_users` contributors to one channel of one attribute.
    pub fn new(epsilon: f64, delta: f64, sensitivity: u64, n_users: usize) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::argument(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::argument(format!("delta must lie in (0, 1), got {delta}")));
        }
        if sensitivity == 0 {
            return Err(Error::argument("sensitivity must be at least 1"));
        }
        if n_users == 0 {
            return Err(Error::argument("noise needs at least one user"));
        }
        let n = n_users as f64;
        let log_alpha = epsilon / sensitivity as f64;
        let tail = delta.min(MAX_TAIL) / n;
        let bound = ((2.0 * n / tail).ln() / log_alpha).ceil();
        if !bound.is_finite() || bound > MAX_TRUNCATION as f64 {
            return Err(Error::argument(format!(
                "noise truncation bound {bound} too large; raise epsilon"
            )));
        }
        Ok(NoiseParams {
            epsilon,
            delta,
            sensitivity,
            alpha: log_alpha.exp(),
            truncation: (bound as u64).max(1),
        })
    }

    /// The zero distribution, standing in for ε = ∞.
    pub fn disabled() -> Self {
        NoiseParams {
            epsilon: f64::INFINITY,
            delta: 0.0,
            sensitivity: 1,
            alpha: f64::INFINITY,
            truncation: 0,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.truncation > 0
    }

    fn ln_alpha(&self) -> f64 {
        self.epsilon / self.sensitivity as f64
    }

    /// Untruncated two-sided geometric pmf.
    pub fn raw_pmf(&self, k: i64) -> f64 {
        if !self.is_enabled() {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let a = self.ln_alpha();
        // (α-1)/(α+1) = tanh(ln α / 2)
        (a / 2.0).tanh() * (-a * k.unsigned_abs() as f64).exp()
    }

    /// Probability that one raw draw lands outside `±B`.
    pub fn tail_mass(&self) -> f64 {
        if !self.is_enabled() {
            return 0.0;
        }
        let a = self.ln_alpha();
        // Σ_{|k|>B} = 2/(α+1) · α^{-B}
        2.0 / (self.alpha + 1.0) * (-a * self.truncation as f64).exp()
    }

    /// Pmf of the truncated distribution actually sampled.
    pub fn pmf(&self, k: i64) -> f64 {
        if k.unsigned_abs() > self.truncation {
            0.0
        } else {
            self.raw_pmf(k) / (1.0 - self.tail_mass())
        }
    }

    /// Variance of the truncated distribution.
    pub fn variance(&self) -> f64 {
        if !self.is_enabled() {
            return 0.0;
        }
        // Untruncated variance 2α/(α-1)^2; the truncated tail is negligible.
        let a = self.ln_alpha();
        let am1 = a.exp_m1();
        2.0 * self.alpha / (am1 * am1)
    }
}

/// One truncated draw.
pub fn sample_symmetric_geometric<R: Rng + ?Sized>(params: &NoiseParams, rng: &mut R) -> i64 {
    sample_counting_rejections(params, rng).0
}

/// One truncated draw together with the number of rejected raw draws.
pub fn sample_counting_rejections<R: Rng + ?Sized>(params: &NoiseParams, rng: &mut R) -> (i64, u32) {
    if !params.is_enabled() {
        return (0, 0);
    }
    // Difference of two iid Geometric(1 - 1/α) variables.
    let success = -(-params.ln_alpha()).exp_m1();
    let geometric = Geometric::new(success).expect("success probability lies in (0, 1]");
    let bound = params.truncation;
    let mut rejections = 0;
    loop {
        let (a, b) = (geometric.sample(rng), geometric.sample(rng));
        let magnitude = a.abs_diff(b);
        if magnitude <= bound {
            let m = magnitude as i64;
            return (if a >= b { m } else { -m }, rejections);
        }
        rejections += 1;
    }
}

/// Absolute bound on the sum of `n_users` independent draws.
pub fn noise_sum_bound(params: &NoiseParams, n_users: usize) -> u64 {
    params.truncation * n_users as u64
}
