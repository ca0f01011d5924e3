// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Privacy-preserving aggregation and monetization of user attributes.
//!
//! A population of simulated users encrypts differentially-private first
//! and second moments of their integer attributes under zero-sum blinding
//! keys. An untrusted aggregator multiplies the ciphertexts together, which
//! cancels the blinding and leaves `g^(sum)` for each attribute. Bounded
//! discrete logarithms recover the noisy sums, from which the aggregator
//! fits one Gaussian per attribute. Each attribute is then scored by the
//! Jensen-Shannon divergence between its discretized Gaussian and the
//! uniform distribution over its domain, gated by user sensitivities,
//! priced and sold. Revenue is split between the aggregator and users.
//!
//! The modules follow the protocol's data flow:
//!
//! - [`group`]: Schnorr group, hash-to-group and zero-sum key shares.
//! - [`dpnoise`]: truncated symmetric geometric noise.
//! - [`client`]: feature extraction, obfuscation and encryption.
//! - [`aggregator`]: ciphertext combination and bounded discrete logs.
//! - [`model`]: Gaussian fit, discretization and divergences.
//! - [`market`]: sharing decisions, pricing, quotes and settlement.
//! - [`harness`]: data ingestion, synthetic data, orchestration, reports
//!   and benchmarks.

pub mod aggregator;
pub mod client;
pub mod dpnoise;
mod error;
pub mod group;
pub mod harness;
pub mod market;
pub mod model;
pub(crate) mod rng;

pub use error::{Error, Result};
