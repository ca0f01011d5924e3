// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic rng streams derived from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derives an independent ChaCha stream for `(seed, domain, index)`.
///
/// Streams depend only on their inputs, so parallel consumers stay
/// reproducible regardless of scheduling.
pub(crate) fn derive(seed: &[u8], domain: &str, index: u64) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update((seed.len() as u64).to_be_bytes());
    hasher.update(seed);
    hasher.update((domain.len() as u64).to_be_bytes());
    hasher.update(domain.as_bytes());
    hasher.update(index.to_be_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}
