// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Schnorr group arithmetic and zero-sum key shares.
//!
//! Plaintexts and keys live in `Z_q`; ciphertexts live in the order-`q`
//! subgroup of `Z_P^*` where `P = c·q + 1`. Working in the prime-order
//! subgroup rather than all of `Z_P^*` keeps DDH plausible.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_prime::{nt_funcs::is_prime, PrimalityTestConfig};
use num_traits::{One, Zero};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{rng, Error, Result};

/// Upper bound on hash-to-group retries. Each retry succeeds with
/// probability about `1 - 1/q`, so this is unreachable in practice.
const HASH_COUNTER_LIMIT: u64 = 1 << 56;

const PRIME_SEARCH_ATTEMPTS: usize = 4096;

/// Exponent in `Z_q`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

/// Member of the order-`q` subgroup of `Z_P^*`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GroupElement(BigUint);

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_one()
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

/// Public parameters of a Schnorr group.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupParams {
    modulus: BigUint,
    order: BigUint,
    generator: GroupElement,
    cofactor: BigUint,
    half_order: BigUint,
}

/// Serialized form of [`GroupParams`]: lowercase hex without prefix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GroupParamsDoc {
    pub modulus_hex: String,
    pub order_hex: String,
    pub generator_hex: String,
    pub cofactor_hex: String,
}

fn probably_prime(n: &BigUint) -> bool {
    // 40 strong-probable-prime rounds plus a strong Lucas test bound the
    // error well below 2^-80.
    let mut config = PrimalityTestConfig::bpsw();
    config.sprp_random_trials = 39;
    is_prime(n, Some(config)).probably()
}

/// Uniform integer in `[0, bound)`.
pub(crate) fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    debug_assert!(!bound.is_zero());
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let excess = (bytes as u64) * 8 - bits;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xff >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Uniform integer with exactly `bits` bits.
fn random_exact_bits<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    let top = BigUint::one() << (bits - 1);
    top.clone() + random_below(rng, &top)
}

fn parse_hex(field: &str, s: &str) -> Result<BigUint> {
    BigUint::parse_bytes(s.trim_start_matches("0x").as_bytes(), 16)
        .ok_or_else(|| Error::Format(format!("{field} is not valid hex")))
}

impl GroupParams {
    /// Builds and validates parameters from explicit values.
    pub fn new(modulus: BigUint, order: BigUint, generator: BigUint) -> Result<Self> {
        if modulus <= BigUint::from(3u8) || order < BigUint::from(2u8) {
            return Err(Error::InvalidGroup("modulus and order too small".into()));
        }
        let p_minus_one = &modulus - 1u8;
        let (cofactor, rem) = p_minus_one.div_rem(&order);
        if !rem.is_zero() {
            return Err(Error::InvalidGroup("order does not divide P - 1".into()));
        }
        let params = GroupParams {
            half_order: &order >> 1,
            modulus,
            order,
            generator: GroupElement(generator),
            cofactor,
        };
        params.validate()?;
        Ok(params)
    }

    /// Deterministically searches for a group with a `modulus_bits`-bit
    /// prime modulus and an `order_bits`-bit prime subgroup order.
    pub fn setup(modulus_bits: u64, order_bits: u64, seed: &[u8]) -> Result<Self> {
        if order_bits < 8 {
            return Err(Error::argument("order_bits must be at least 8"));
        }
        if modulus_bits < order_bits + 8 {
            return Err(Error::argument("modulus_bits must be at least order_bits + 8"));
        }
        let mut rng = rng::derive(seed, "group-setup", modulus_bits << 32 | order_bits);
        let c_lo = (BigUint::one() << (modulus_bits - 1)) - 1u8;
        let c_hi = (BigUint::one() << modulus_bits) - 1u8;

        for _ in 0..PRIME_SEARCH_ATTEMPTS {
            let order = random_exact_bits(&mut rng, order_bits) | BigUint::one();
            if !probably_prime(&order) {
                continue;
            }
            // P - 1 = c·q must land in [2^(b-1), 2^b - 1); c even keeps P odd.
            let c_min = c_lo.div_ceil(&order);
            let c_max = &c_hi / &order;
            if c_max <= c_min {
                continue;
            }
            let span = &c_max - &c_min;
            for _ in 0..(32 * modulus_bits) {
                let mut cofactor = &c_min + random_below(&mut rng, &span);
                if cofactor.is_odd() {
                    cofactor += 1u8;
                }
                let modulus = &cofactor * &order + 1u8;
                if modulus.bits() != modulus_bits || !probably_prime(&modulus) {
                    continue;
                }
                let generator = loop {
                    let h = BigUint::from(2u8) + random_below(&mut rng, &(&modulus - 3u8));
                    let g = h.modpow(&cofactor, &modulus);
                    if !g.is_one() {
                        break g;
                    }
                };
                return Ok(GroupParams {
                    half_order: &order >> 1,
                    modulus,
                    order,
                    generator: GroupElement(generator),
                    cofactor,
                });
            }
        }
        Err(Error::Setup(format!(
            "no ({modulus_bits}, {order_bits})-bit Schnorr group found after {PRIME_SEARCH_ATTEMPTS} attempts"
        )))
    }

    /// Re-checks every parameter invariant.
    pub fn validate(&self) -> Result<()> {
        if !probably_prime(&self.modulus) {
            return Err(Error::InvalidGroup("modulus is not prime".into()));
        }
        if !probably_prime(&self.order) {
            return Err(Error::InvalidGroup("order is not prime".into()));
        }
        if &self.cofactor * &self.order + 1u8 != self.modulus {
            return Err(Error::InvalidGroup("P != c·q + 1".into()));
        }
        let g = self.generator.value();
        if g.is_zero() || g >= &self.modulus {
            return Err(Error::InvalidGroup("generator outside [1, P)".into()));
        }
        if g.is_one() {
            return Err(Error::InvalidGroup("generator is the identity".into()));
        }
        if !g.modpow(&self.order, &self.modulus).is_one() {
            return Err(Error::InvalidGroup("generator order is not q".into()));
        }
        Ok(())
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    pub fn cofactor(&self) -> &BigUint {
        &self.cofactor
    }

    pub fn generator(&self) -> &GroupElement {
        &self.generator
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    /// Reduces an integer into `Z_q`.
    pub fn scalar(&self, value: BigUint) -> Scalar {
        Scalar(value % &self.order)
    }

    pub fn scalar_from_u64(&self, value: u64) -> Scalar {
        self.scalar(BigUint::from(value))
    }

    /// Reduces a signed integer into `Z_q` (Euclidean residue).
    pub fn scalar_from_i64(&self, value: i64) -> Scalar {
        let r = BigUint::from(value.unsigned_abs()) % &self.order;
        if value < 0 {
            self.scalar_neg(&Scalar(r))
        } else {
            Scalar(r)
        }
    }

    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(random_below(rng, &self.order))
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.order)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        if a.0.is_zero() {
            a.clone()
        } else {
            Scalar(&self.order - &a.0)
        }
    }

    /// Checks subgroup membership of an externally supplied value.
    pub fn element(&self, value: BigUint) -> Result<GroupElement> {
        if value.is_zero() || value >= self.modulus {
            return Err(Error::InvalidGroup("element outside [1, P)".into()));
        }
        if !value.modpow(&self.order, &self.modulus).is_one() {
            return Err(Error::InvalidGroup("element is not in the order-q subgroup".into()));
        }
        Ok(GroupElement(value))
    }

    pub fn contains(&self, element: &GroupElement) -> bool {
        self.element(element.0.clone()).is_ok()
    }

    pub fn pow(&self, base: &GroupElement, exponent: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&exponent.0, &self.modulus))
    }

    /// `g^exponent`.
    pub fn pow_g(&self, exponent: &Scalar) -> GroupElement {
        self.pow(&self.generator, exponent)
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.modulus)
    }

    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        GroupElement(a.0.modpow(&(&self.order - 1u8), &self.modulus))
    }

    /// Maps a signed integer into `Z_q`, negatives to `q - |v|`.
    ///
    /// Rejects `|v| >= q/2` since those would decode ambiguously.
    pub fn encode_signed(&self, v: i64) -> Result<Scalar> {
        let magnitude = BigUint::from(v.unsigned_abs());
        if &magnitude << 1 >= self.order {
            return Err(Error::Range {
                value: v.into(),
                reason: "|v| must be below q/2 for signed encoding".into(),
            });
        }
        Ok(if v < 0 {
            Scalar(&self.order - magnitude)
        } else {
            Scalar(magnitude)
        })
    }

    /// Inverse of [`encode_signed`](Self::encode_signed); `None` when the
    /// value does not fit an `i64`.
    pub fn decode_signed(&self, s: &Scalar) -> Option<i64> {
        if s.0 <= self.half_order {
            i64::try_from(&s.0).ok()
        } else {
            i64::try_from(&(&self.order - &s.0)).ok().map(|m| -m)
        }
    }

    /// Largest magnitude accepted by [`encode_signed`](Self::encode_signed).
    pub fn max_signed(&self) -> i64 {
        let limit = (&self.order - 1u8) >> 1;
        i64::try_from(&limit).unwrap_or(i64::MAX)
    }

    /// Hashes a nonempty tag into the subgroup.
    ///
    /// `h = (digest(tag ‖ ctr) mod P)^c mod P`, incrementing `ctr` until `h`
    /// is neither 0 nor 1. The digest is SHA-256 in counter mode, expanded
    /// to 16 bytes beyond the modulus width so the reduction is near-uniform.
    pub fn hash_to_group(&self, tag: &[u8]) -> Result<GroupElement> {
        if tag.is_empty() {
            return Err(Error::argument("hash_to_group tag must be nonempty"));
        }
        let width = self.modulus.bits().div_ceil(8) as usize + 16;
        for counter in 0..HASH_COUNTER_LIMIT {
            let digest = expand_digest(tag, counter, width);
            let reduced = BigUint::from_bytes_be(&digest) % &self.modulus;
            let h = reduced.modpow(&self.cofactor, &self.modulus);
            if !h.is_zero() && !h.is_one() {
                return Ok(GroupElement(h));
            }
        }
        Err(Error::Internal("hash_to_group counter exhausted".into()))
    }

    pub fn to_doc(&self) -> GroupParamsDoc {
        GroupParamsDoc {
            modulus_hex: format!("{:x}", self.modulus),
            order_hex: format!("{:x}", self.order),
            generator_hex: format!("{:x}", self.generator.0),
            cofactor_hex: format!("{:x}", self.cofactor),
        }
    }

    pub fn from_doc(doc: &GroupParamsDoc) -> Result<Self> {
        let params = GroupParams::new(
            parse_hex("modulus_hex", &doc.modulus_hex)?,
            parse_hex("order_hex", &doc.order_hex)?,
            parse_hex("generator_hex", &doc.generator_hex)?,
        )?;
        if params.cofactor != parse_hex("cofactor_hex", &doc.cofactor_hex)? {
            return Err(Error::InvalidGroup("cofactor does not match (P-1)/q".into()));
        }
        Ok(params)
    }
}

impl Serialize for GroupParams {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GroupParamsDoc::deserialize(deserializer)?;
        GroupParams::from_doc(&doc).map_err(serde::de::Error::custom)
    }
}

fn expand_digest(tag: &[u8], counter: u64, width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(width + 32);
    let mut block: u32 = 0;
    while out.len() < width {
        let mut hasher = Sha256::new();
        hasher.update(tag);
        hasher.update(counter.to_be_bytes());
        hasher.update(block.to_be_bytes());
        out.extend_from_slice(&hasher.finalize());
        block += 1;
    }
    out.truncate(width);
    out
}

/// Zero-sum key shares `s_0, s_1, …, s_N` with `Σ s_k ≡ 0 (mod q)`.
///
/// `s_0` belongs to the aggregator and `s_i` to user `i`. The ring is
/// produced by a trusted dealer. Its JSON form exposes every secret and
/// exists only for the simulator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyRing {
    shares: Vec<Scalar>,
}

#[derive(Serialize, Deserialize)]
struct KeyRingDoc {
    shares_hex: Vec<String>,
}

impl KeyRing {
    /// Deals shares for `n_users` users plus the aggregator.
    pub fn generate<R: Rng + ?Sized>(params: &GroupParams, n_users: usize, rng: &mut R) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::argument("keygen needs at least one user"));
        }
        let users: Vec<Scalar> = (0..n_users).map(|_| params.random_scalar(rng)).collect();
        let total = users
            .iter()
            .fold(params.scalar_from_u64(0), |acc, s| params.scalar_add(&acc, s));
        let mut shares = Vec::with_capacity(n_users + 1);
        shares.push(params.scalar_neg(&total));
        shares.extend(users);
        Ok(KeyRing { shares })
    }

    /// Wraps explicit shares, checking the zero-sum invariant.
    pub fn from_shares(params: &GroupParams, shares: Vec<Scalar>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::argument("key ring needs s_0 and at least one user share"));
        }
        let total = shares
            .iter()
            .fold(params.scalar_from_u64(0), |acc, s| params.scalar_add(&acc, s));
        if !total.is_zero() {
            return Err(Error::argument("key shares do not sum to zero mod q"));
        }
        Ok(KeyRing { shares })
    }

    pub fn n_users(&self) -> usize {
        self.shares.len() - 1
    }

    pub fn aggregator_share(&self) -> &Scalar {
        &self.shares[0]
    }

    /// Share of user `i`, 1-based.
    pub fn user_share(&self, i: usize) -> Option<&Scalar> {
        if i == 0 {
            None
        } else {
            self.shares.get(i)
        }
    }

    pub fn shares(&self) -> &[Scalar] {
        &self.shares
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = KeyRingDoc {
            shares_hex: self.shares.iter().map(|s| s.to_string()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(params: &GroupParams, json: &str) -> Result<Self> {
        let doc: KeyRingDoc = serde_json::from_str(json)?;
        let shares = doc
            .shares_hex
            .iter()
            .map(|h| parse_hex("shares_hex", h).map(|v| params.scalar(v)))
            .collect::<Result<Vec<_>>>()?;
        KeyRing::from_shares(params, shares)
    }
}

/// Trusted-dealer key generation for `n_users` users.
pub fn keygen<R: Rng + ?Sized>(params: &GroupParams, n_users: usize, rng: &mut R) -> Result<KeyRing> {
    KeyRing::generate(params, n_users, rng)
}
