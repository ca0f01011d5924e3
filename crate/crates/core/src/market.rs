// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Sharing decisions, pricing, quotes and revenue settlement.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::LeakageRanking;
use crate::{Error, Result};

/// Relative tolerance of the revenue conservation check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingRule {
    /// Sellable when strictly more than half of the users agree.
    #[default]
    Majority,
    /// Sellable only when every user agrees.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingDecision {
    pub attribute_id: usize,
    /// Number of users with `d_j ≤ 1 − λ_{i,j}`.
    pub s_count: usize,
    pub gamma: f64,
    pub sellable: bool,
}

/// Counts, per attribute, the users willing to share it at leakage `d_j`.
///
/// `sensitivities` is indexed `[user][attribute]`.
pub fn gate_attributes(
    distances: &[f64],
    sensitivities: &[Vec<f64>],
    rule: SharingRule,
) -> Result<Vec<SharingDecision>> {
    let k = distances.len();
    if sensitivities.is_empty() {
        return Err(Error::argument("gating needs at least one user"));
    }
    if let Some(i) = sensitivities.iter().position(|row| row.len() != k) {
        return Err(Error::argument(format!(
            "user {i} has {} sensitivities for {k} attributes",
            sensitivities[i].len()
        )));
    }
    if distances.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::argument("distances must lie in [0, 1]"));
    }
    if sensitivities.iter().flatten().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::argument("sensitivities must lie in [0, 1]"));
    }
    let n = sensitivities.len();
    Ok(distances
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let s_count = sensitivities.iter().filter(|row| d <= 1.0 - row[j]).count();
            let gamma = s_count as f64 / n as f64;
            let sellable = match rule {
                SharingRule::Majority => 2 * s_count > n,
                SharingRule::All => s_count == n,
            };
            SharingDecision {
                attribute_id: j + 1,
                s_count,
                gamma,
                sellable,
            }
        })
        .collect())
}

/// `Cost(j) = Price(j) · d_j · N`.
pub fn price(d: f64, n_users: usize, unit_price: f64) -> f64 {
    unit_price * d * n_users as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteEntry {
    pub attribute_id: usize,
    pub d: f64,
    pub cost: f64,
}

/// `(d, Cost)` offers for sellable attributes in ranking order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub entries: Vec<QuoteEntry>,
}

impl Quote {
    pub fn contains(&self, attribute_id: usize) -> bool {
        self.entries.iter().any(|e| e.attribute_id == attribute_id)
    }
}

/// `costs` and `decisions` are indexed by attribute position.
pub fn build_quote(ranking: &LeakageRanking, decisions: &[SharingDecision], costs: &[f64]) -> Quote {
    let entries = ranking
        .order
        .iter()
        .filter(|&&id| decisions.get(id - 1).is_some_and(|d| d.sellable))
        .map(|&id| QuoteEntry {
            attribute_id: id,
            d: ranking.distances[id - 1],
            cost: costs[id - 1],
        })
        .collect();
    Quote { entries }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseOrder {
    pub attribute_ids: BTreeSet<usize>,
}

/// How the simulated customer picks from a quote.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurchasePolicy {
    /// Buy everything offered.
    #[default]
    All,
    /// Buy nothing.
    Nothing,
    /// Buy the `n` most informative offers.
    TopLeakage(usize),
    /// Buy the listed attribute names that are on offer.
    Only(Vec<String>),
}

impl PurchasePolicy {
    /// `names` maps attribute positions to names, for [`PurchasePolicy::Only`].
    pub fn select(&self, quote: &Quote, names: &[String]) -> PurchaseOrder {
        let attribute_ids = match self {
            PurchasePolicy::All => quote.entries.iter().map(|e| e.attribute_id).collect(),
            PurchasePolicy::Nothing => BTreeSet::new(),
            PurchasePolicy::TopLeakage(n) => quote.entries.iter().rev().take(*n).map(|e| e.attribute_id).collect(),
            PurchasePolicy::Only(wanted) => quote
                .entries
                .iter()
                .filter(|e| wanted.iter().any(|w| names.get(e.attribute_id - 1) == Some(w)))
                .map(|e| e.attribute_id)
                .collect(),
        };
        PurchaseOrder { attribute_ids }
    }
}

impl fmt::Display for PurchasePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PurchasePolicy::All => f.write_str("all"),
            PurchasePolicy::Nothing => f.write_str("none"),
            PurchasePolicy::TopLeakage(n) => write!(f, "top:{n}"),
            PurchasePolicy::Only(names) => write!(f, "only:{}", names.join(",")),
        }
    }
}

impl FromStr for PurchasePolicy {
    type Err = Error;

    /// `all`, `none`, `top:<n>` or `only:<name>,<name>,…`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "all" => Ok(PurchasePolicy::All),
            None if s == "none" => Ok(PurchasePolicy::Nothing),
            Some(("top", n)) => n
                .parse()
                .map(PurchasePolicy::TopLeakage)
                .map_err(|_| Error::argument(format!("bad purchase count `{n}`"))),
            Some(("only", names)) => Ok(PurchasePolicy::Only(
                names.split(',').filter(|n| !n.is_empty()).map(str::to_owned).collect(),
            )),
            _ => Err(Error::argument(format!("unknown purchase policy `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    /// `R(𝔸)`
    pub aggregator_revenue: f64,
    /// `R(i)`, identical for every user.
    pub per_user_revenue: f64,
    pub omega: f64,
    pub total: f64,
    pub n_users: usize,
}

impl RevenueReport {
    /// `|R(𝔸) + N·R(i) − total|` relative to the total.
    pub fn conservation_error(&self) -> f64 {
        let split = self.aggregator_revenue + self.n_users as f64 * self.per_user_revenue;
        (split - self.total).abs() / self.total.abs().max(f64::MIN_POSITIVE)
    }
}

/// Splits the purchase total: `ω` to the aggregator, the rest equally to
/// the `n_users` users. `costs` is indexed by attribute position.
pub fn settle(purchase: &PurchaseOrder, costs: &[f64], n_users: usize, omega: f64) -> Result<RevenueReport> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::argument(format!("omega {omega} outside [0, 1]")));
    }
    if n_users == 0 {
        return Err(Error::argument("settlement needs at least one user"));
    }
    let mut total = 0.0;
    for &id in &purchase.attribute_ids {
        let cost = id
            .checked_sub(1)
            .and_then(|j| costs.get(j))
            .ok_or_else(|| Error::argument(format!("unknown attribute id {id} in purchase")))?;
        total += cost;
    }
    let aggregator_revenue = omega * total;
    Ok(RevenueReport {
        aggregator_revenue,
        per_user_revenue: (total - aggregator_revenue) / n_users as f64,
        omega,
        total,
        n_users,
    })
}

/// Built-in sensitivity generators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `λ = 0`: everybody shares everything.
    #[default]
    AllShare,
    /// One uniform `λ_i` per user, applied to all attributes.
    PerUser,
    /// Independent uniform `λ_{i,j}`.
    PerAttribute,
}

impl Scenario {
    pub fn sensitivities<R: Rng + ?Sized>(&self, n_users: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n_users)
            .map(|_| match self {
                Scenario::AllShare => vec![0.0; k],
                Scenario::PerUser => vec![rng.random::<f64>(); k],
                Scenario::PerAttribute => (0..k).map(|_| rng.random::<f64>()).collect(),
            })
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::AllShare => "all-share",
            Scenario::PerUser => "per-user",
            Scenario::PerAttribute => "per-attribute",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-share" => Ok(Scenario::AllShare),
            "per-user" => Ok(Scenario::PerUser),
            "per-attribute" => Ok(Scenario::PerAttribute),
            other => Err(Error::argument(format!("unknown scenario `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rank_attributes;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn all_share_everyone_counts() {
        let lambdas = vec![vec![0.0; 3]; 5];
        let d = gate_attributes(&[0.2, 0.9, 1.0], &lambdas, SharingRule::Majority).unwrap();
        assert!(d.iter().all(|x| x.gamma == 1.0 && x.sellable && x.s_count == 5));
    }

    #[test]
    fn boundary_is_inclusive() {
        let d = gate_attributes(&[0.5], &[vec![0.5]], SharingRule::All).unwrap();
        assert_eq!(d[0].s_count, 1);
    }

    #[test]
    fn exact_half_is_not_a_majority() {
        let lambdas = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let d = gate_attributes(&[0.3], &lambdas, SharingRule::Majority).unwrap();
        assert_eq!((d[0].s_count, d[0].gamma, d[0].sellable), (2, 0.5, false));
        let all = gate_attributes(&[0.3], &lambdas, SharingRule::All).unwrap();
        assert!(!all[0].sellable);
    }

    #[test]
    fn gating_rejects_bad_shapes() {
        assert!(gate_attributes(&[0.3, 0.2], &[vec![0.1]], SharingRule::Majority).is_err());
        assert!(gate_attributes(&[0.3], &[], SharingRule::Majority).is_err());
        assert!(gate_attributes(&[1.3], &[vec![0.1]], SharingRule::Majority).is_err());
        assert!(gate_attributes(&[0.3], &[vec![-0.1]], SharingRule::Majority).is_err());
    }

    #[test]
    fn pricing() {
        assert_eq!(price(0.5, 100, 1.0), 50.0);
        assert_eq!(price(0.0, 100, 1.0), 0.0);
        assert_eq!(price(0.25, 1000, 1.0), 250.0);
    }

    #[test]
    fn quotes() {
        let ranking = rank_attributes(&[0.3, 0.1, 0.2]).unwrap();
        let decide = |sellable: [bool; 3]| -> Vec<SharingDecision> {
            sellable
                .iter()
                .enumerate()
                .map(|(j, &s)| SharingDecision {
                    attribute_id: j + 1,
                    s_count: 0,
                    gamma: 0.0,
                    sellable: s,
                })
                .collect()
        };
        let costs = [30.0, 10.0, 20.0];
        assert!(build_quote(&ranking, &decide([false; 3]), &costs).entries.is_empty());
        let all = build_quote(&ranking, &decide([true; 3]), &costs);
        let ids: Vec<_> = all.entries.iter().map(|e| e.attribute_id).collect();
        assert_eq!(ids, vec![2, 3, 1]);
        let mixed = build_quote(&ranking, &decide([true, false, true]), &costs);
        let ids: Vec<_> = mixed.entries.iter().map(|e| e.attribute_id).collect();
        assert_eq!(ids, vec![3, 1]);
        assert_eq!(mixed.entries[0].d, 0.2);
        assert_eq!(mixed.entries[0].cost, 20.0);
    }

    #[test]
    fn purchase_policies() {
        let quote = Quote {
            entries: vec![
                QuoteEntry {
                    attribute_id: 2,
                    d: 0.1,
                    cost: 1.0,
                },
                QuoteEntry {
                    attribute_id: 3,
                    d: 0.2,
                    cost: 2.0,
                },
                QuoteEntry {
                    attribute_id: 1,
                    d: 0.3,
                    cost: 3.0,
                },
            ],
        };
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let ids = |p: PurchasePolicy| p.select(&quote, &names).attribute_ids.into_iter().collect::<Vec<_>>();
        assert_eq!(ids(PurchasePolicy::All), vec![1, 2, 3]);
        assert_eq!(ids(PurchasePolicy::Nothing), Vec::<usize>::new());
        assert_eq!(ids(PurchasePolicy::TopLeakage(2)), vec![1, 3]);
        assert_eq!(ids(PurchasePolicy::Only(vec!["b".into(), "z".into()])), vec![2]);
        for s in ["all", "none", "top:2", "only:a,b"] {
            assert_eq!(s.parse::<PurchasePolicy>().unwrap().to_string(), s);
        }
        assert!("top:x".parse::<PurchasePolicy>().is_err());
        assert!("some".parse::<PurchasePolicy>().is_err());
    }

    #[test]
    fn settlement_examples() {
        let one = PurchaseOrder {
            attribute_ids: [1].into(),
        };
        let r = settle(&one, &[50.0], 100, 0.1).unwrap();
        assert!((r.aggregator_revenue - 5.0).abs() < 1e-12);
        assert!((r.per_user_revenue - 0.45).abs() < 1e-12);
        let r = settle(&one, &[50.0], 100, 1.0).unwrap();
        assert_eq!(r.per_user_revenue, 0.0);
        let r = settle(&one, &[50.0], 100, 0.0).unwrap();
        assert_eq!(r.aggregator_revenue, 0.0);
        assert!((100.0 * r.per_user_revenue - r.total).abs() < 1e-12);

        let empty = settle(&PurchaseOrder::default(), &[50.0], 100, 0.1).unwrap();
        assert_eq!(
            (empty.total, empty.aggregator_revenue, empty.per_user_revenue),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(empty.conservation_error(), 0.0);

        let unknown = PurchaseOrder {
            attribute_ids: [2].into(),
        };
        assert!(settle(&unknown, &[50.0], 100, 0.1).is_err());
        let zero = PurchaseOrder {
            attribute_ids: [0].into(),
        };
        assert!(settle(&zero, &[50.0], 100, 0.1).is_err());
        assert!(settle(&one, &[50.0], 100, 1.1).is_err());
    }

    #[test]
    fn revenue_scales_with_participants() {
        let order = PurchaseOrder {
            attribute_ids: [1].into(),
        };
        let d = 0.3;
        let mut last = 0.0;
        for n in [10, 100, 1000, 10_000] {
            let r = settle(&order, &[price(d, n, 1.0)], n, 0.1).unwrap();
            assert!(r.aggregator_revenue >= last);
            last = r.aggregator_revenue;
            assert!((r.per_user_revenue - 0.9 * d).abs() < 1e-12);
        }
    }

    #[test]
    fn scenarios() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let all = Scenario::AllShare.sensitivities(4, 3, &mut rng);
        assert!(all.iter().flatten().all(|&l| l == 0.0));
        let per_user = Scenario::PerUser.sensitivities(50, 3, &mut rng);
        assert!(per_user.iter().all(|row| row.iter().all(|&l| l == row[0])));
        let per_attr = Scenario::PerAttribute.sensitivities(50, 3, &mut rng);
        assert!(per_attr.iter().any(|row| row[0] != row[1]));
        assert!(per_attr.iter().flatten().all(|l| (0.0..1.0).contains(l)));
        for s in ["all-share", "per-user", "per-attribute"] {
            assert_eq!(s.parse::<Scenario>().unwrap().to_string(), s);
        }
    }

    proptest! {
        #[test]
        fn revenue_is_conserved(
            costs in proptest::collection::vec(0.0..1e6f64, 1..8),
            mask in any::<u8>(),
            omega in 0.0..=1.0f64,
            n in 1usize..100_000,
        ) {
            let ids: BTreeSet<usize> = (1..=costs.len()).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let r = settle(&PurchaseOrder { attribute_ids: ids.clone() }, &costs, n, omega).unwrap();
            let expected: f64 = ids.iter().map(|i| costs[i - 1]).sum();
            prop_assert!((r.total - expected).abs() <= 1e-9 * expected.max(1.0));
            prop_assert!(r.conservation_error() <= CONSERVATION_TOLERANCE);
        }

        #[test]
        fn raising_sensitivity_never_adds_sharers(
            lambdas in proptest::collection::vec(0.0..=1.0f64, 1..40),
            d in 0.0..=1.0f64,
            who in any::<prop::sample::Index>(),
            bump in 0.0..=1.0f64,
        ) {
            let rows: Vec<Vec<f64>> = lambdas.iter().map(|&l| vec![l]).collect();
            let before = gate_attributes(&[d], &rows, SharingRule::Majority).unwrap()[0].s_count;
            let mut raised = rows.clone();
            let i = who.index(raised.len());
            raised[i][0] = (raised[i][0] + bump).min(1.0);
            let after = gate_attributes(&[d], &raised, SharingRule::Majority).unwrap()[0].s_count;
            prop_assert!(after <= before);
        }
    }
}
