// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Ciphertext combination, bounded discrete logarithms and moment recovery.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::client::{AttributeSpec, CipherPair};
use crate::group::{GroupElement, GroupParams, Scalar};
use crate::{Error, Result};

pub const DEFAULT_MAX_WINDOW: u64 = 1 << 32;

/// Kangaroo restarts with fresh jump hashing before falling back to BSGS.
const KANGAROO_ATTEMPTS: u64 = 4;

/// Windows this small go straight to BSGS.
const KANGAROO_MIN_WIDTH: u64 = 1 << 10;

/// Per-attribute products `V_j` and `W_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateCiphers {
    pub first: Vec<GroupElement>,
    pub second: Vec<GroupElement>,
    pub n_users: usize,
    pub tag: Vec<u8>,
}

/// Recovered moments of one attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    /// `Σ x̂_{i,j}`
    pub raw_sum: i64,
    /// `Σ x̂⁽²⁾_{i,j}`
    pub raw_sum_sq: i64,
    pub n_users: usize,
    /// Whether `sigma2_hat` was raised to the variance floor.
    pub clamped: bool,
}

impl MomentEstimate {
    pub fn from_sums(raw_sum: i64, raw_sum_sq: i64, n_users: usize, spec: &AttributeSpec) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::argument("moments need at least one user"));
        }
        let mut est = MomentEstimate {
            mu_hat: 0.0,
            sigma2_hat: 0.0,
            raw_sum,
            raw_sum_sq,
            n_users,
            clamped: false,
        };
        est.mu_hat = ratio_to_f64(&est.exact_mean());
        let variance = ratio_to_f64(&est.exact_variance());
        let floor = variance_floor(spec);
        if variance < floor {
            est.sigma2_hat = floor;
            est.clamped = true;
        } else {
            est.sigma2_hat = variance;
        }
        Ok(est)
    }

    /// `Σx̂ / N` as an exact rational.
    pub fn exact_mean(&self) -> Ratio<i128> {
        Ratio::new(self.raw_sum as i128, self.n_users as i128)
    }

    /// `Σx̂⁽²⁾/N − μ̂²` as an exact rational, before clamping.
    pub fn exact_variance(&self) -> Ratio<i128> {
        let n = self.n_users as i128;
        let s = self.raw_sum as i128;
        Ratio::new(n * self.raw_sum_sq as i128 - s * s, n * n)
    }
}

fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Smallest variance handed to the Gaussian fit: `10⁻⁶·(M − m)²`.
pub fn variance_floor(spec: &AttributeSpec) -> f64 {
    1e-6 * ((spec.max - spec.min) as f64).powi(2)
}

/// Inclusive range of candidate exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlogWindow {
    pub lo: i64,
    pub hi: i64,
}

impl DlogWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::argument(format!("empty dlog window [{lo}, {hi}]")));
        }
        if (hi as i128 - lo as i128) >= u64::MAX as i128 {
            return Err(Error::argument("dlog window too wide"));
        }
        Ok(DlogWindow { lo, hi })
    }

    pub fn width(&self) -> u64 {
        (self.hi as i128 - self.lo as i128 + 1) as u64
    }

    pub fn contains(&self, e: i64) -> bool {
        (self.lo..=self.hi).contains(&e)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlogAlgorithm {
    /// Baby-step giant-step: exact, `O(√W)` time and memory.
    #[default]
    Bsgs,
    /// Pollard's kangaroo (the interval form of rho): `O(√W)` time,
    /// constant memory, probabilistic with BSGS fallback.
    #[serde(rename = "rho")]
    PollardRho,
}

impl fmt::Display for DlogAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DlogAlgorithm::Bsgs => "bsgs",
            DlogAlgorithm::PollardRho => "rho",
        })
    }
}

impl FromStr for DlogAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bsgs" => Ok(DlogAlgorithm::Bsgs),
            "rho" | "pollard_rho" | "pollard-rho" => Ok(DlogAlgorithm::PollardRho),
            other => Err(Error::argument(format!("unknown dlog algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlogConfig {
    pub algorithm: DlogAlgorithm,
    pub max_window: u64,
}

impl Default for DlogConfig {
    fn default() -> Self {
        DlogConfig {
            algorithm: DlogAlgorithm::Bsgs,
            max_window: DEFAULT_MAX_WINDOW,
        }
    }
}

/// Baby steps `g^j ↦ j` for `j < stride`, plus the giant step `g^{-stride}`.
///
/// Any window can be searched with any stride; the number of giant steps
/// is `⌈W / stride⌉`.
#[derive(Clone, Debug)]
pub struct BsgsTable {
    stride: u64,
    baby: HashMap<BigUint, u64>,
    giant: GroupElement,
}

impl BsgsTable {
    pub fn new(params: &GroupParams, stride: u64) -> Self {
        let stride = stride.max(1);
        let g = params.generator();
        let mut baby = HashMap::with_capacity(stride as usize);
        let mut acc = params.identity();
        for j in 0..stride {
            baby.entry(acc.value().clone()).or_insert(j);
            acc = params.mul(&acc, g);
        }
        // acc = g^stride
        BsgsTable {
            stride,
            baby,
            giant: params.inverse(&acc),
        }
    }

    /// Table balanced for windows of the given width.
    pub fn for_width(params: &GroupParams, width: u64) -> Self {
        BsgsTable::new(params, ceil_sqrt(width))
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    /// Finds `t ∈ [0, width)` with `g^t = target`.
    fn search(&self, params: &GroupParams, target: &GroupElement, width: u64) -> Option<u64> {
        let giants = width.div_ceil(self.stride);
        let mut gamma = target.clone();
        for i in 0..giants {
            if let Some(&j) = self.baby.get(gamma.value()) {
                let t = i * self.stride + j;
                return (t < width).then_some(t);
            }
            gamma = params.mul(&gamma, &self.giant);
        }
        None
    }
}

fn ceil_sqrt(w: u64) -> u64 {
    let mut r = (w as f64).sqrt() as u64;
    while r.saturating_mul(r) < w {
        r += 1;
    }
    while r > 1 && (r - 1).saturating_mul(r - 1) >= w {
        r -= 1;
    }
    r.max(1)
}

/// Discrete-log solver bound to one group, optionally holding a shared
/// baby-step table.
#[derive(Debug)]
pub struct DlogSolver<'a> {
    params: &'a GroupParams,
    config: DlogConfig,
    table: Option<BsgsTable>,
}

impl<'a> DlogSolver<'a> {
    pub fn new(params: &'a GroupParams, config: DlogConfig) -> Self {
        DlogSolver {
            params,
            config,
            table: None,
        }
    }

    /// Prebuilds one table balanced for the widest window to be searched.
    pub fn with_table(params: &'a GroupParams, config: DlogConfig, widest: u64) -> Self {
        DlogSolver {
            params,
            config,
            table: Some(BsgsTable::for_width(params, widest)),
        }
    }

    pub fn config(&self) -> &DlogConfig {
        &self.config
    }

    /// Returns the unique `e ∈ window` with `g^e = element`, exponents taken
    /// mod `q`.
    pub fn solve(&self, element: &GroupElement, window: DlogWindow) -> Result<i64> {
        let params = self.params;
        let width = window.width();
        if width > self.config.max_window {
            return Err(Error::argument(format!(
                "dlog window width {width} exceeds configured maximum {}",
                self.config.max_window
            )));
        }
        // Exponents are unique only modulo q.
        if BigUint::from(width) > *params.order() {
            return Err(Error::Range {
                value: width.into(),
                reason: "dlog window is wider than the group order".into(),
            });
        }
        let decode = || Error::Decode {
            lo: window.lo,
            hi: window.hi,
            attribute: None,
        };
        // target = element · g^{-lo}, so the answer is lo + dlog(target).
        let shift = params.pow_g(&params.scalar_from_i64(window.lo.wrapping_neg()));
        let target = params.mul(element, &shift);

        if self.config.algorithm == DlogAlgorithm::PollardRho && width >= KANGAROO_MIN_WIDTH {
            for attempt in 0..KANGAROO_ATTEMPTS {
                if let Some(t) = kangaroo(params, &target, width, attempt) {
                    return Ok(window.lo + t as i64);
                }
            }
            log::debug!("kangaroo failed on width {width}; falling back to bsgs");
        }
        let t = match &self.table {
            Some(table) => table.search(params, &target, width),
            None => BsgsTable::for_width(params, width).search(params, &target, width),
        };
        t.map(|t| window.lo + t as i64).ok_or_else(decode)
    }
}

/// One-shot discrete log with the default window cap.
pub fn discrete_log(
    params: &GroupParams,
    element: &GroupElement,
    window: DlogWindow,
    algorithm: DlogAlgorithm,
) -> Result<i64> {
    let config = DlogConfig {
        algorithm,
        ..DlogConfig::default()
    };
    DlogSolver::new(params, config).solve(element, window)
}

fn jump_index(element: &GroupElement, salt: u64, k: usize) -> usize {
    let low = element.value().iter_u64_digits().next().unwrap_or(0);
    let mixed = (low ^ salt.wrapping_mul(0xa076_1d64_78bd_642f)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    ((mixed >> 32) % k as u64) as usize
}

/// Pollard's kangaroo for `t ∈ [0, width)` with `g^t = target`.
fn kangaroo(params: &GroupParams, target: &GroupElement, width: u64, salt: u64) -> Option<u64> {
    let root = (width as f64).sqrt();
    // Jumps 2^0..2^(k-1) with mean (2^k - 1)/k close to √W / 2.
    let mut k = 2usize;
    while k < 62 && (((1u64 << k) - 1) as f64 / k as f64) < root / 2.0 {
        k += 1;
    }
    let jumps: Vec<(u64, GroupElement)> = (0..k)
        .map(|i| {
            let d = 1u64 << i;
            (d, params.pow_g(&params.scalar_from_u64(d)))
        })
        .collect();

    // Tame kangaroo from the top of the window lays a trap ~W further on.
    let tame_jumps = (2.0 * root).ceil() as u64;
    let mut tame = params.pow_g(&params.scalar_from_u64(width - 1));
    let mut tame_dist: u64 = 0;
    for _ in 0..tame_jumps {
        let (d, step) = &jumps[jump_index(&tame, salt, k)];
        tame = params.mul(&tame, step);
        tame_dist += d;
    }
    let trap_pos = (width - 1) as u128 + tame_dist as u128;

    let mut wild = target.clone();
    let mut wild_dist: u128 = 0;
    while wild_dist <= trap_pos {
        if wild == tame {
            let t = trap_pos - wild_dist;
            if t < width as u128 {
                let t = t as u64;
                if &params.pow_g(&params.scalar_from_u64(t)) == target {
                    return Some(t);
                }
            }
            return None;
        }
        let (d, step) = &jumps[jump_index(&wild, salt, k)];
        wild = params.mul(&wild, step);
        wild_dist += *d as u128;
    }
    None
}

/// Product of all contributions per attribute, without blinding removal.
pub fn fold_ciphertexts(
    params: &GroupParams,
    contributions: &[Vec<CipherPair>],
) -> Result<(Vec<GroupElement>, Vec<GroupElement>)> {
    let k = contributions
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::protocol("no contributions to combine"))?;
    if let Some(pos) = contributions.iter().position(|c| c.len() != k) {
        return Err(Error::protocol(format!(
            "contribution {pos} carries {} attributes, expected {k}",
            contributions[pos].len()
        )));
    }
    let identity = || (vec![params.identity(); k], vec![params.identity(); k]);
    let product = contributions
        .par_iter()
        .fold(identity, |(mut v, mut w), pairs| {
            for (j, pair) in pairs.iter().enumerate() {
                v[j] = params.mul(&v[j], &pair.c);
                w[j] = params.mul(&w[j], &pair.b);
            }
            (v, w)
        })
        .reduce(identity, |(v1, w1), (v2, w2)| {
            let mul_all = |a: Vec<GroupElement>, b: Vec<GroupElement>| {
                a.iter().zip(&b).map(|(x, y)| params.mul(x, y)).collect::<Vec<_>>()
            };
            (mul_all(v1, v2), mul_all(w1, w2))
        });
    Ok(product)
}

/// `V_j = H(t)^{s_0}·Π c_{i,j}` and `W_j = H(t)^{s_0}·Π b_{i,j}`.
///
/// Requires one contribution from each of the `expected_users` registered
/// users; there is no dropout tolerance.
pub fn combine(
    params: &GroupParams,
    aggregator_key: &Scalar,
    tag: &[u8],
    contributions: &[Vec<CipherPair>],
    expected_users: usize,
) -> Result<AggregateCiphers> {
    if contributions.len() != expected_users {
        return Err(Error::protocol(format!(
            "expected {expected_users} contributions, received {}",
            contributions.len()
        )));
    }
    let (first, second) = fold_ciphertexts(params, contributions)?;
    let blinding = params.pow(&params.hash_to_group(tag)?, aggregator_key);
    Ok(AggregateCiphers {
        first: first.iter().map(|v| params.mul(v, &blinding)).collect(),
        second: second.iter().map(|w| params.mul(w, &blinding)).collect(),
        n_users: expected_users,
        tag: tag.to_vec(),
    })
}

/// Noise-sum bounds for the two channels of one attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBounds {
    pub first: u64,
    pub second: u64,
}

/// Search windows `[N·m − b, N·M + b]` and `[−b⁽²⁾, N·max x² + b⁽²⁾]`.
pub fn moment_windows(spec: &AttributeSpec, n_users: usize, bounds: ChannelBounds) -> Result<(DlogWindow, DlogWindow)> {
    let n = n_users as i128;
    let clamp = |v: i128| -> Result<i64> {
        i64::try_from(v).map_err(|_| Error::Range {
            value: v,
            reason: "dlog window bound overflows i64".into(),
        })
    };
    let (b1, b2) = (bounds.first as i128, bounds.second as i128);
    let first = DlogWindow::new(clamp(n * spec.min as i128 - b1)?, clamp(n * spec.max as i128 + b1)?)?;
    let second = DlogWindow::new(clamp(-b2)?, clamp(n * spec.max_square() as i128 + b2)?)?;
    Ok((first, second))
}

/// Timing and window sizes of one attribute's decryption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecryptionTelemetry {
    pub attribute: String,
    pub algorithm: DlogAlgorithm,
    pub window_width_first: u64,
    pub window_width_second: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Decrypts both channels of every attribute and derives `(μ̂, σ̂²)`.
pub fn recover_moments(
    params: &GroupParams,
    agg: &AggregateCiphers,
    specs: &[AttributeSpec],
    bounds: &[ChannelBounds],
    solver: &DlogSolver<'_>,
) -> Result<Vec<MomentEstimate>> {
    recover_moments_timed(params, agg, specs, bounds, solver).map(|v| v.into_iter().map(|(est, _)| est).collect())
}

pub fn recover_moments_timed(
    params: &GroupParams,
    agg: &AggregateCiphers,
    specs: &[AttributeSpec],
    bounds: &[ChannelBounds],
    solver: &DlogSolver<'_>,
) -> Result<Vec<(MomentEstimate, DecryptionTelemetry)>> {
    let k = specs.len();
    if agg.first.len() != k || agg.second.len() != k || bounds.len() != k {
        return Err(Error::argument(format!(
            "aggregate has {} attributes, specs {k}, bounds {}",
            agg.first.len(),
            bounds.len()
        )));
    }
    debug_assert!(agg.first.iter().all(|v| params.contains(v)));
    (0..k)
        .into_par_iter()
        .map(|j| {
            let spec = &specs[j];
            let start = Instant::now();
            let (w1, w2) = moment_windows(spec, agg.n_users, bounds[j])?;
            let label = |e: Error| match e {
                Error::Decode { lo, hi, .. } => Error::Decode {
                    lo,
                    hi,
                    attribute: Some(spec.name.clone()),
                },
                other => other,
            };
            let sum = solver.solve(&agg.first[j], w1).map_err(label)?;
            let sum_sq = solver.solve(&agg.second[j], w2).map_err(label)?;
            let estimate = MomentEstimate::from_sums(sum, sum_sq, agg.n_users, spec)?;
            let telemetry = DecryptionTelemetry {
                attribute: spec.name.clone(),
                algorithm: solver.config().algorithm,
                window_width_first: w1.width(),
                window_width_second: w2.width(),
                elapsed: start.elapsed(),
            };
            Ok((estimate, telemetry))
        })
        .collect()
}
