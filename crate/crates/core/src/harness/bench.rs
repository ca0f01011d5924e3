// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Repeated runs with per-stage median and p95 timings.

use serde::{Deserialize, Serialize};

use super::protocol::{round_tag, RunConfig, Session};
use super::report::ProtocolReport;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples: usize,
}

impl StageStats {
    /// Lower median and nearest-rank p95.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return StageStats {
                median_ms: 0.0,
                p95_ms: 0.0,
                samples: 0,
            };
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        StageStats {
            median_ms: samples[(n - 1) / 2],
            p95_ms: samples[rank - 1],
            samples: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedStats {
    pub name: String,
    #[serde(flatten)]
    pub stats: StageStats,
}

/// Client stages are sampled once per user per repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientBench {
    pub extract: StageStats,
    pub noise: StageStats,
    pub encrypt: StageStats,
    pub total: StageStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokerBench {
    pub keygen: StageStats,
    pub combine: StageStats,
    pub recover: StageStats,
    pub model: StageStats,
    pub market: StageStats,
    pub total: StageStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub n_users: usize,
    pub modulus_bits: u64,
    pub order_bits: u64,
    pub setup_ms: f64,
    pub tag_hash: StageStats,
    pub client_per_user: ClientBench,
    pub broker: BrokerBench,
    pub dlog: Vec<NamedStats>,
    pub round_total: StageStats,
}

/// Runs `repetitions` consecutive rounds of one session.
pub fn bench(config: RunConfig, repetitions: usize) -> Result<BenchReport> {
    bench_with_reports(config, repetitions).map(|(b, _)| b)
}

pub fn bench_with_reports(config: RunConfig, repetitions: usize) -> Result<(BenchReport, Vec<ProtocolReport>)> {
    if repetitions == 0 {
        return Err(Error::argument("repetitions must be at least 1"));
    }
    let first_round = config.round;
    let seed = config.seed.clone();
    let mut session = Session::new(config)?;
    let mut reports = Vec::with_capacity(repetitions);
    let mut client = Vec::new();
    for rep in 0..repetitions as u64 {
        let round = first_round + rep;
        let (report, _, samples) = session.run_with_tag(round, round_tag(&seed, round))?;
        client.extend(samples.client);
        reports.push(report);
    }

    let timings: Vec<_> = reports.iter().filter_map(|r| r.timing.clone()).collect();
    let stat =
        |f: &dyn Fn(&super::report::TimingReport) -> f64| StageStats::from_samples(timings.iter().map(f).collect());
    let client_stat =
        |f: &dyn Fn(&super::report::ClientStageTimes) -> f64| StageStats::from_samples(client.iter().map(f).collect());
    let first = &reports[0];
    let dlog = first
        .attributes
        .iter()
        .enumerate()
        .map(|(j, a)| NamedStats {
            name: a.attribute.clone(),
            stats: stat(&|t| t.dlog[j].ms),
        })
        .collect();
    let report = BenchReport {
        repetitions,
        n_users: first.n_users,
        modulus_bits: first.group.modulus_bits,
        order_bits: first.group.order_bits,
        setup_ms: timings[0].setup_ms,
        tag_hash: stat(&|t| t.tag_hash_ms),
        client_per_user: ClientBench {
            extract: client_stat(&|c| c.extract_ms),
            noise: client_stat(&|c| c.noise_ms),
            encrypt: client_stat(&|c| c.encrypt_ms),
            total: client_stat(&|c| c.total_ms),
        },
        broker: BrokerBench {
            keygen: stat(&|t| t.keygen_ms),
            combine: stat(&|t| t.combine_ms),
            recover: stat(&|t| t.recover_ms),
            model: stat(&|t| t.model_ms),
            market: stat(&|t| t.market_ms),
            total: stat(&|t| t.broker_ms),
        },
        dlog,
        round_total: stat(&|t| t.total_ms),
    };
    Ok((report, reports))
}
