// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Run reports: JSON document, per-attribute CSV table and invariant checks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregator::{DecryptionTelemetry, DlogAlgorithm};
use crate::client::AttributeSpec;
use crate::market::{price, RevenueReport, Scenario, SharingRule, CONSERVATION_TOLERANCE};
use crate::model::Discretization;
use crate::{Error, Result};

use super::protocol::Query;

pub const SCHEMA_VERSION: &str = "aggmarket.report/1";

/// Relative slack when re-deriving floats parsed back from JSON.
const REPARSE_TOLERANCE: f64 = 1e-12;

/// Inputs of the run, echoed for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n_users: Option<usize>,
    pub profile_source: String,
    pub attributes: Vec<AttributeSpec>,
    pub sensitivities: Option<String>,
    pub scenario: Scenario,
    pub modulus_bits: u64,
    pub order_bits: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub noise_enabled: bool,
    pub omega: f64,
    pub seed_hex: String,
    pub dlog_algorithm: DlogAlgorithm,
    pub max_window: u64,
    pub purchase_policy: String,
    pub sharing_rule: SharingRule,
    pub discretization: Discretization,
    pub query: Query,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub modulus_bits: u64,
    pub order_bits: u64,
    /// SHA-256 of the hex parameter document.
    pub fingerprint: String,
}

/// One row of the per-attribute table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: String,
    pub id: usize,
    pub min: i64,
    pub max: i64,
    pub price: f64,
    pub raw_sum: i64,
    pub raw_sum_sq: i64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub clamped: bool,
    /// Per-draw truncation of the first-moment noise; zero when disabled.
    pub noise_bound_first: u64,
    pub noise_bound_second: u64,
    pub d_js: f64,
    pub rank: usize,
    pub s_count: usize,
    pub gamma: f64,
    pub sellable: bool,
    pub cost: f64,
    /// JS distance between the discretized fit and the participants' histogram.
    pub fit_quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteLine {
    pub attribute: String,
    pub d_js: f64,
    pub cost: f64,
}

/// Medians over users of the client stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientStageTimes {
    pub extract_ms: f64,
    pub noise_ms: f64,
    pub encrypt_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeTime {
    pub attribute: String,
    pub ms: f64,
}

/// Wall-clock timings, excluded from determinism comparisons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub setup_ms: f64,
    pub keygen_ms: f64,
    pub tag_hash_ms: f64,
    pub client_per_user: ClientStageTimes,
    pub client_wall_ms: f64,
    pub combine_ms: f64,
    pub dlog: Vec<AttributeTime>,
    pub recover_ms: f64,
    pub model_ms: f64,
    pub market_ms: f64,
    pub broker_ms: f64,
    pub total_ms: f64,
}

impl TimingReport {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let c = &self.client_per_user;
        [
            self.setup_ms,
            self.keygen_ms,
            self.tag_hash_ms,
            c.extract_ms,
            c.noise_ms,
            c.encrypt_ms,
            c.total_ms,
            self.client_wall_ms,
            self.combine_ms,
            self.recover_ms,
            self.model_ms,
            self.market_ms,
            self.broker_ms,
            self.total_ms,
        ]
        .into_iter()
        .chain(self.dlog.iter().map(|d| d.ms))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub schema_version: String,
    pub config: ConfigEcho,
    pub group: GroupSummary,
    pub round: u64,
    pub tag_hex: String,
    /// Users that passed ingestion and the query filter.
    pub n_users: usize,
    pub dropped_rows: usize,
    pub attributes: Vec<AttributeReport>,
    /// Attribute names, least leaky first.
    pub ranking: Vec<String>,
    pub quote: Vec<QuoteLine>,
    pub purchase: Vec<String>,
    pub revenue: RevenueReport,
    pub decryption: Vec<DecryptionTelemetry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingReport>,
}

impl ProtocolReport {
    /// The report with wall-clock fields removed.
    pub fn without_timing(&self) -> ProtocolReport {
        ProtocolReport {
            timing: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON without timing; identical configurations give identical bytes.
    pub fn to_deterministic_json(&self) -> Result<String> {
        self.without_timing().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeReport> {
        self.attributes.iter().find(|a| a.attribute == name)
    }

    /// Writes the per-attribute table as CSV.
    pub fn write_attribute_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for a in &self.attributes {
            csv.serialize(a)?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Re-checks the invariants of a report; returns every violation found.
pub fn validate_report(report: &ProtocolReport) -> Vec<String> {
    let mut bad = Vec::new();
    let mut fail = |msg: String| bad.push(msg);
    if report.schema_version != SCHEMA_VERSION {
        fail(format!(
            "schema version `{}`, expected `{SCHEMA_VERSION}`",
            report.schema_version
        ));
    }
    let n = report.n_users;
    if n == 0 {
        fail("no users".into());
    }

    let expected: Vec<&str> = report.config.attributes.iter().map(|a| a.name.as_str()).collect();
    let listed: Vec<&str> = report.attributes.iter().map(|a| a.attribute.as_str()).collect();
    if expected != listed {
        fail(format!(
            "attributes [{}] differ from configured [{}]",
            listed.join(","),
            expected.join(",")
        ));
    }

    let k = report.attributes.len();
    let mut ranks: Vec<usize> = report.attributes.iter().map(|a| a.rank).collect();
    ranks.sort_unstable();
    if ranks != (1..=k).collect::<Vec<_>>() {
        fail(format!("ranks {ranks:?} are not a permutation of 1..={k}"));
    }
    let mut by_rank: Vec<&AttributeReport> = report.attributes.iter().collect();
    by_rank.sort_by_key(|a| a.rank);
    if by_rank.windows(2).any(|w| w[0].d_js > w[1].d_js) {
        fail("ranks do not follow increasing d_js".into());
    }
    let ranking: Vec<&str> = by_rank.iter().map(|a| a.attribute.as_str()).collect();
    if report.ranking.iter().map(String::as_str).collect::<Vec<_>>() != ranking {
        fail("ranking list disagrees with per-attribute ranks".into());
    }

    for a in &report.attributes {
        let name = &a.attribute;
        if !(0.0..=1.0).contains(&a.d_js) {
            fail(format!("{name}: d_js {} outside [0, 1]", a.d_js));
        }
        if !(0.0..=1.0).contains(&a.fit_quality) {
            fail(format!("{name}: fit_quality {} outside [0, 1]", a.fit_quality));
        }
        if !(a.sigma2_hat > 0.0 && a.sigma2_hat.is_finite()) {
            fail(format!("{name}: sigma2_hat {} not positive", a.sigma2_hat));
        }
        if a.s_count > n || !close(a.gamma, a.s_count as f64 / n.max(1) as f64, REPARSE_TOLERANCE) {
            fail(format!("{name}: gamma {} inconsistent with {}/{n}", a.gamma, a.s_count));
        }
        let sellable = match report.config.sharing_rule {
            SharingRule::Majority => 2 * a.s_count > n,
            SharingRule::All => a.s_count == n,
        };
        if sellable != a.sellable {
            fail(format!("{name}: sellable flag disagrees with the sharing rule"));
        }
        if !close(a.cost, price(a.d_js, n, a.price), REPARSE_TOLERANCE) {
            fail(format!("{name}: cost {} != price·d·N", a.cost));
        }
    }

    let quoted: Vec<&str> = report.quote.iter().map(|q| q.attribute.as_str()).collect();
    let sellable: Vec<&str> = ranking
        .iter()
        .copied()
        .filter(|name| report.attribute(name).is_some_and(|a| a.sellable))
        .collect();
    if quoted != sellable {
        fail(format!(
            "quote [{}] is not the sellable attributes in rank order",
            quoted.join(",")
        ));
    }
    for q in &report.quote {
        if let Some(a) = report.attribute(&q.attribute) {
            if q.cost != a.cost || q.d_js != a.d_js {
                fail(format!("{}: quote line disagrees with attribute row", q.attribute));
            }
        }
    }
    if let Some(p) = report.purchase.iter().find(|p| !quoted.contains(&p.as_str())) {
        fail(format!("purchased `{p}` was not on offer"));
    }

    let r = &report.revenue;
    let total: f64 = report
        .purchase
        .iter()
        .filter_map(|p| report.attribute(p))
        .map(|a| a.cost)
        .sum();
    if !close(r.total, total, REPARSE_TOLERANCE) {
        fail(format!("revenue total {} != purchased cost {total}", r.total));
    }
    if r.conservation_error() > CONSERVATION_TOLERANCE {
        fail(format!(
            "revenue not conserved (relative error {:e})",
            r.conservation_error()
        ));
    }
    if r.n_users != n {
        fail(format!("revenue split over {} users, report has {n}", r.n_users));
    }

    if report.decryption.len() != k
        || report
            .decryption
            .iter()
            .zip(&report.attributes)
            .any(|(d, a)| d.attribute != a.attribute)
    {
        fail("decryption telemetry does not cover every attribute once".into());
    }
    if let Some(t) = &report.timing {
        if t.values().any(|v| !(v >= 0.0 && v.is_finite())) {
            fail("negative or non-finite timing".into());
        }
        if t.dlog.len() != k {
            fail("dlog timing does not cover every attribute".into());
        }
    }
    bad
}
