// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

use std::sync::OnceLock;

use aggmarket::client::{AttributeSpec, Profile};
use aggmarket::group::{keygen, GroupParams};
use aggmarket::harness::{run_protocol, run_protocol_traced, validate_report, GroupSource, ProfileSource, RunConfig};
use aggmarket::market::{PurchasePolicy, Scenario, SharingRule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn group() -> GroupParams {
    static G: OnceLock<GroupParams> = OnceLock::new();
    G.get_or_init(|| GroupParams::setup(64, 48, b"properties").unwrap())
        .clone()
}

#[derive(Clone, Debug)]
struct Population {
    attributes: Vec<AttributeSpec>,
    profiles: Vec<Profile>,
}

fn population() -> impl Strategy<Value = Population> {
    (1usize..=3, 1usize..=40)
        .prop_flat_map(|(k, n)| {
            let domains = prop::collection::vec((-30i64..60, 1i64..60), k);
            (domains, Just(n))
        })
        .prop_flat_map(|(domains, n)| {
            let attributes: Vec<AttributeSpec> = domains
                .iter()
                .enumerate()
                .map(|(j, &(min, len))| AttributeSpec::new(0, format!("a{j}"), min, min + len, 1.5).unwrap())
                .collect();
            let row: Vec<_> = attributes.iter().map(|a| (a.min..=a.max).boxed()).collect();
            let lambdas = prop::collection::vec(0.0..=1.0f64, attributes.len());
            let rows = prop::collection::vec((row, lambdas), n);
            (Just(attributes), rows)
        })
        .prop_map(|(attributes, rows)| Population {
            profiles: rows
                .into_iter()
                .enumerate()
                .map(|(i, (values, sensitivities))| Profile {
                    user_id: i as u64 + 1,
                    values,
                    sensitivities,
                })
                .collect(),
            attributes,
        })
}

fn config(pop: &Population, noise: bool, seed: u64) -> RunConfig {
    RunConfig {
        n_users: None,
        profiles: ProfileSource::Inline {
            attributes: pop.attributes.clone(),
            profiles: pop.profiles.clone(),
        },
        group: GroupSource::Params { params: group() },
        noise_enabled: noise,
        seed: seed.to_be_bytes().to_vec(),
        ..RunConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_sums_are_exact(pop in population(), seed in any::<u64>()) {
        let (report, trace) = run_protocol_traced(config(&pop, false, seed)).unwrap();
        for (j, a) in report.attributes.iter().enumerate() {
            let s: i64 = pop.profiles.iter().map(|p| p.values[j]).sum();
            let s2: i64 = pop.profiles.iter().map(|p| p.values[j] * p.values[j]).sum();
            prop_assert_eq!((a.raw_sum, a.raw_sum_sq), (s, s2));
            prop_assert_eq!(trace.noise_sums_first[j], 0);
        }
    }

    #[test]
    fn noisy_sums_decompose(pop in population(), seed in any::<u64>()) {
        let (report, trace) = run_protocol_traced(config(&pop, true, seed)).unwrap();
        for (j, a) in report.attributes.iter().enumerate() {
            prop_assert_eq!(a.raw_sum, trace.plaintext_sums[j] + trace.noise_sums_first[j]);
            prop_assert_eq!(a.raw_sum_sq, trace.plaintext_sums_sq[j] + trace.noise_sums_second[j]);
            prop_assert!(trace.noise_sums_first[j].unsigned_abs() <= trace.bounds[j].first);
            prop_assert!(trace.noise_sums_second[j].unsigned_abs() <= trace.bounds[j].second);
        }
    }

    #[test]
    fn reports_always_validate(
        pop in population(),
        seed in any::<u64>(),
        omega in 0.0..=1.0f64,
        all_rule in any::<bool>(),
        top in 0usize..4,
    ) {
        let mut cfg = config(&pop, true, seed);
        cfg.omega = omega;
        cfg.sharing_rule = if all_rule { SharingRule::All } else { SharingRule::Majority };
        cfg.purchase_policy = PurchasePolicy::TopLeakage(top);
        let report = run_protocol(cfg).unwrap();
        prop_assert_eq!(validate_report(&report), Vec::<String>::new());
        prop_assert_eq!(report.attributes.len(), pop.attributes.len());
    }

    #[test]
    fn same_seed_same_report(pop in population(), seed in any::<u64>()) {
        let a = run_protocol(config(&pop, true, seed)).unwrap();
        let b = run_protocol(config(&pop, true, seed)).unwrap();
        prop_assert_eq!(a.to_deterministic_json().unwrap(), b.to_deterministic_json().unwrap());
    }

    #[test]
    fn blinding_factors_cancel(n in 1usize..64, seed in any::<u64>(), tag in prop::collection::vec(any::<u8>(), 1..32)) {
        let params = group();
        let ring = keygen(&params, n, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let h = params.hash_to_group(&tag).unwrap();
        let product = ring
            .shares()
            .iter()
            .fold(params.identity(), |acc, s| params.mul(&acc, &params.pow(&h, s)));
        prop_assert!(product.is_identity());
    }
}

#[test]
fn scenarios_shape_sharing() {
    let pop = Population {
        attributes: vec![AttributeSpec::new(0, "a", 1, 10, 1.0).unwrap()],
        profiles: (1..=200)
            .map(|i| Profile {
                user_id: i,
                values: vec![(i % 10 + 1) as i64],
                sensitivities: vec![0.0],
            })
            .collect(),
    };
    let synthetic = |scenario| {
        let cfg = RunConfig {
            n_users: Some(200),
            scenario,
            group: GroupSource::Params { params: group() },
            ..RunConfig::default()
        };
        run_protocol(cfg).unwrap()
    };
    let all = synthetic(Scenario::AllShare);
    assert!(all.attributes.iter().all(|a| a.gamma == 1.0));
    let per_user = synthetic(Scenario::PerUser);
    assert!(per_user.attributes.iter().all(|a| a.gamma < 1.0));
    assert!(validate_report(&synthetic(Scenario::PerAttribute)).is_empty());
    let inline = run_protocol(config(&pop, false, 1)).unwrap();
    assert_eq!(inline.attributes[0].s_count, 200);
}
