// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end protocol runs.
//!
//! A [`Session`] loads the population and the group once and then executes
//! rounds. Each round derives its tag from the seed and the round number;
//! a tag is never accepted twice by the same session.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregator::{combine, moment_windows, recover_moments_timed, ChannelBounds, DlogConfig, DlogSolver};
use crate::client::{
    encrypt_with_blinding, extract_features, index_specs, obfuscate_recorded, AttributeSpec, CipherPair, Profile,
};
use crate::dpnoise::{noise_sum_bound, NoiseParams};
use crate::group::{keygen, GroupParams};
use crate::market::{build_quote, gate_attributes, price, settle, PurchasePolicy, Scenario, SharingRule};
use crate::model::{
    discretize_gaussian_with, empirical_pmf, fit_gaussian, js_divergence, rank_attributes, uniform_pmf, Discretization,
};
use crate::rng;
use crate::{Error, Result};

use super::data::{attach_sensitivities, load_profiles, load_sensitivities};
use super::report::{
    AttributeReport, AttributeTime, ClientStageTimes, ConfigEcho, GroupSummary, ProtocolReport, QuoteLine,
    TimingReport, SCHEMA_VERSION,
};
use super::synth::{gen_synthetic, SyntheticSpec};

/// Where the population comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        attributes: Vec<AttributeSpec>,
    },
    Inline {
        attributes: Vec<AttributeSpec>,
        profiles: Vec<Profile>,
    },
}

impl ProfileSource {
    fn describe(&self) -> String {
        match self {
            ProfileSource::Synthetic(_) => "synthetic".into(),
            ProfileSource::Csv { path, .. } => format!("csv:{}", path.display()),
            ProfileSource::Inline { .. } => "inline".into(),
        }
    }

    fn specs(&self) -> Result<Vec<AttributeSpec>> {
        match self {
            ProfileSource::Synthetic(s) => s.specs(),
            ProfileSource::Csv { attributes, .. } | ProfileSource::Inline { attributes, .. } => {
                index_specs(attributes.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroupSource {
    /// Fresh parameters derived from the run seed.
    Generate {
        modulus_bits: u64,
        order_bits: u64,
    },
    /// A parameter document written by `setup`.
    File {
        path: PathBuf,
    },
    Params {
        params: GroupParams,
    },
}

/// Keeps users whose `attribute` lies in `[min, max]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeFilter {
    pub attribute: String,
    pub min: i64,
    pub max: i64,
}

/// Customer query: attributes to aggregate and a user selection.
///
/// An empty attribute list asks for every attribute.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub attributes: Vec<String>,
    pub filters: Vec<RangeFilter>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Users to take from the source; `None` takes all of a file or inline list.
    pub n_users: Option<usize>,
    pub profiles: ProfileSource,
    /// CSV of `λ` values; overrides `scenario` when present.
    pub sensitivities: Option<PathBuf>,
    pub scenario: Scenario,
    pub group: GroupSource,
    pub epsilon: f64,
    pub delta: f64,
    pub noise_enabled: bool,
    pub omega: f64,
    pub seed: Vec<u8>,
    pub dlog: DlogConfig,
    pub purchase_policy: PurchasePolicy,
    pub sharing_rule: SharingRule,
    pub discretization: Discretization,
    pub query: Query,
    pub round: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_users: Some(100),
            profiles: ProfileSource::Synthetic(SyntheticSpec::census_like()),
            sensitivities: None,
            scenario: Scenario::AllShare,
            group: GroupSource::Generate {
                modulus_bits: 1024,
                order_bits: 160,
            },
            epsilon: 1.0,
            delta: 1e-5,
            noise_enabled: true,
            omega: 0.1,
            seed: b"aggmarket".to_vec(),
            dlog: DlogConfig::default(),
            purchase_policy: PurchasePolicy::All,
            sharing_rule: SharingRule::Majority,
            discretization: Discretization::CenteredSum,
            query: Query::default(),
            round: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == Some(0) {
            return Err(Error::argument("n_users must be at least 1"));
        }
        if matches!(self.profiles, ProfileSource::Synthetic(_)) && self.n_users.is_none() {
            return Err(Error::argument("synthetic profiles need n_users"));
        }
        if self.seed.is_empty() {
            return Err(Error::argument("seed must be nonempty"));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::argument(format!("omega {} outside [0, 1]", self.omega)));
        }
        if self.noise_enabled {
            if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
                return Err(Error::argument(format!(
                    "epsilon must be positive, got {}",
                    self.epsilon
                )));
            }
            if !(self.delta > 0.0 && self.delta < 1.0) {
                return Err(Error::argument(format!("delta must lie in (0, 1), got {}", self.delta)));
            }
        }
        let mut paths: Vec<&PathBuf> = self.sensitivities.iter().collect();
        match &self.profiles {
            ProfileSource::Csv { path, .. } => paths.push(path),
            ProfileSource::Synthetic(s) => s.validate()?,
            ProfileSource::Inline { .. } => {}
        }
        if let GroupSource::File { path } = &self.group {
            paths.push(path);
        }
        if let Some(missing) = paths.iter().find(|p| !p.exists()) {
            return Err(Error::argument(format!("{} does not exist", missing.display())));
        }
        self.profiles.specs()?;
        Ok(())
    }
}

/// `SHA-256("aggmarket/tag" ‖ seed ‖ round)`.
pub fn round_tag(seed: &[u8], round: u64) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"aggmarket/tag");
    h.update((seed.len() as u64).to_be_bytes());
    h.update(seed);
    h.update(round.to_be_bytes());
    h.finalize().to_vec()
}

/// Simulator-side record of a round, for oracle checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTrace {
    pub tag: Vec<u8>,
    /// Aggregated attributes in report order.
    pub specs: Vec<AttributeSpec>,
    /// Selected users, restricted to the aggregated attributes.
    pub participants: Vec<Profile>,
    pub plaintext_sums: Vec<i64>,
    pub plaintext_sums_sq: Vec<i64>,
    pub noise_sums_first: Vec<i64>,
    pub noise_sums_second: Vec<i64>,
    pub noise_first: Vec<NoiseParams>,
    pub noise_second: Vec<NoiseParams>,
    pub bounds: Vec<ChannelBounds>,
}

/// Per-user client timings of one round.
#[derive(Clone, Debug, Default)]
pub(crate) struct RoundSamples {
    pub client: Vec<ClientStageTimes>,
}

struct ClientOutput {
    pairs: Vec<CipherPair>,
    noise_first: Vec<i64>,
    noise_second: Vec<i64>,
    times: ClientStageTimes,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

/// A loaded population and group, ready to run rounds.
#[derive(Debug)]
pub struct Session {
    config: RunConfig,
    specs: Vec<AttributeSpec>,
    profiles: Vec<Profile>,
    dropped_rows: usize,
    group: GroupParams,
    setup_time: Duration,
    used_tags: HashSet<Vec<u8>>,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate().map_err(|e| e.in_stage("config"))?;
        let (specs, profiles, dropped_rows) = load_population(&config).map_err(|e| e.in_stage("ingest"))?;
        let start = Instant::now();
        let group = match &config.group {
            GroupSource::Generate {
                modulus_bits,
                order_bits,
            } => GroupParams::setup(
                *modulus_bits,
                *order_bits,
                &[b"group/".as_slice(), &config.seed].concat(),
            ),
            GroupSource::File { path } => std::fs::read_to_string(path)
                .map_err(Error::from)
                .and_then(|text| serde_json::from_str::<GroupParams>(&text).map_err(Error::from)),
            GroupSource::Params { params } => Ok(params.clone()),
        }
        .map_err(|e| e.in_stage("setup"))?;
        Ok(Session {
            config,
            specs,
            profiles,
            dropped_rows,
            group,
            setup_time: start.elapsed(),
            used_tags: HashSet::new(),
        })
    }

    pub fn group(&self) -> &GroupParams {
        &self.group
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// All loaded users, before the query filter.
    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn run_round(&mut self, round: u64) -> Result<ProtocolReport> {
        self.run_round_traced(round).map(|(r, _)| r)
    }

    pub fn run_round_traced(&mut self, round: u64) -> Result<(ProtocolReport, ProtocolTrace)> {
        let tag = round_tag(&self.config.seed, round);
        self.run_with_tag(round, tag).map(|(r, t, _)| (r, t))
    }

    pub(crate) fn run_with_tag(
        &mut self,
        round: u64,
        tag: Vec<u8>,
    ) -> Result<(ProtocolReport, ProtocolTrace, RoundSamples)> {
        if !self.used_tags.insert(tag.clone()) {
            return Err(
                Error::protocol(format!("tag {} already used in this session", hex::encode(&tag))).in_stage("select"),
            );
        }
        self.execute(round, tag)
    }

    fn execute(&self, round: u64, tag: Vec<u8>) -> Result<(ProtocolReport, ProtocolTrace, RoundSamples)> {
        let cfg = &self.config;
        let params = &self.group;
        let total_start = Instant::now();

        let (specs, participants) =
            select(&self.specs, &self.profiles, &cfg.query).map_err(|e| e.in_stage("select"))?;
        let n = participants.len();
        let k = specs.len();

        let start = Instant::now();
        let ring = keygen(params, n, &mut rng::derive(&tag, "keygen", 0)).map_err(|e| e.in_stage("keygen"))?;
        let keygen_ms = ms(start.elapsed());

        let (noise_first, noise_second) = noise_params(cfg, &specs, n).map_err(|e| e.in_stage("client"))?;

        let start = Instant::now();
        let h = params.hash_to_group(&tag).map_err(|e| e.in_stage("client"))?;
        let tag_hash_ms = ms(start.elapsed());

        let start = Instant::now();
        let outputs: Vec<ClientOutput> = participants
            .par_iter()
            .enumerate()
            .map(|(i, user)| {
                let mut rng = rng::derive(&tag, "user", user.user_id);
                let t0 = Instant::now();
                let features = extract_features(user, &specs)?;
                let t1 = Instant::now();
                let (noisy, applied) = obfuscate_recorded(params, &features, &noise_first, &noise_second, &mut rng)?;
                let t2 = Instant::now();
                let share = ring
                    .user_share(i + 1)
                    .ok_or_else(|| Error::Internal(format!("no key share for participant {}", i + 1)))?;
                let pairs = encrypt_with_blinding(params, &params.pow(&h, share), &noisy);
                let t3 = Instant::now();
                Ok(ClientOutput {
                    pairs,
                    noise_first: applied.first,
                    noise_second: applied.second,
                    times: ClientStageTimes {
                        extract_ms: ms(t1 - t0),
                        noise_ms: ms(t2 - t1),
                        encrypt_ms: ms(t3 - t2),
                        total_ms: ms(t3 - t0),
                    },
                })
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("client"))?;
        let client_wall_ms = ms(start.elapsed());

        let broker_start = Instant::now();
        let contributions: Vec<Vec<CipherPair>> = outputs.iter().map(|o| o.pairs.clone()).collect();
        let agg =
            combine(params, ring.aggregator_share(), &tag, &contributions, n).map_err(|e| e.in_stage("combine"))?;
        let combine_ms = ms(broker_start.elapsed());

        let start = Instant::now();
        let bounds: Vec<ChannelBounds> = noise_first
            .iter()
            .zip(&noise_second)
            .map(|(a, b)| ChannelBounds {
                first: noise_sum_bound(a, n),
                second: noise_sum_bound(b, n),
            })
            .collect();
        let widest = specs
            .iter()
            .zip(&bounds)
            .map(|(s, b)| moment_windows(s, n, *b).map(|(w1, w2)| w1.width().max(w2.width())))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("recover"))?
            .into_iter()
            .max()
            .unwrap_or(1)
            .min(cfg.dlog.max_window);
        let solver = DlogSolver::with_table(params, cfg.dlog, widest);
        let recovered =
            recover_moments_timed(params, &agg, &specs, &bounds, &solver).map_err(|e| e.in_stage("recover"))?;
        let recover_ms = ms(start.elapsed());

        let start = Instant::now();
        let mut distances = Vec::with_capacity(k);
        let mut fit_quality = Vec::with_capacity(k);
        for (j, (spec, (est, _))) in specs.iter().zip(&recovered).enumerate() {
            let fitted =
                fit_gaussian(est).and_then(|g| discretize_gaussian_with(&g, spec.min, spec.max, cfg.discretization));
            let fitted = fitted.map_err(|e| e.in_stage("model"))?;
            let uniform = uniform_pmf(spec.min, spec.max).map_err(|e| e.in_stage("model"))?;
            distances.push(js_divergence(&uniform, &fitted).map_err(|e| e.in_stage("model"))?);
            let values: Vec<i64> = participants.iter().map(|p| p.values[j]).collect();
            let empirical = empirical_pmf(&values, spec.min, spec.max).map_err(|e| e.in_stage("model"))?;
            fit_quality.push(js_divergence(&fitted, &empirical).map_err(|e| e.in_stage("model"))?);
        }
        let ranking = rank_attributes(&distances).map_err(|e| e.in_stage("model"))?;
        let model_ms = ms(start.elapsed());

        let start = Instant::now();
        let lambdas: Vec<Vec<f64>> = participants.iter().map(|p| p.sensitivities.clone()).collect();
        let decisions = gate_attributes(&distances, &lambdas, cfg.sharing_rule).map_err(|e| e.in_stage("market"))?;
        let costs: Vec<f64> = specs
            .iter()
            .zip(&distances)
            .map(|(s, &d)| price(d, n, s.price))
            .collect();
        let quote = build_quote(&ranking, &decisions, &costs);
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        let purchase = cfg.purchase_policy.select(&quote, &names);
        let revenue = settle(&purchase, &costs, n, cfg.omega).map_err(|e| e.in_stage("market"))?;
        let market_ms = ms(start.elapsed());
        let broker_ms = ms(broker_start.elapsed());

        let attributes = specs
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let est = &recovered[j].0;
                AttributeReport {
                    attribute: spec.name.clone(),
                    id: spec.id,
                    min: spec.min,
                    max: spec.max,
                    price: spec.price,
                    raw_sum: est.raw_sum,
                    raw_sum_sq: est.raw_sum_sq,
                    mu_hat: est.mu_hat,
                    sigma2_hat: est.sigma2_hat,
                    clamped: est.clamped,
                    noise_bound_first: noise_first[j].truncation,
                    noise_bound_second: noise_second[j].truncation,
                    d_js: distances[j],
                    rank: ranking.rank_of(spec.id).unwrap_or(0),
                    s_count: decisions[j].s_count,
                    gamma: decisions[j].gamma,
                    sellable: decisions[j].sellable,
                    cost: costs[j],
                    fit_quality: fit_quality[j],
                }
            })
            .collect();
        let name_of = |id: usize| names[id - 1].clone();

        let client_times: Vec<ClientStageTimes> = outputs.iter().map(|o| o.times).collect();
        let pick = |f: fn(&ClientStageTimes) -> f64| median(client_times.iter().map(f).collect());
        let timing = TimingReport {
            setup_ms: ms(self.setup_time),
            keygen_ms,
            tag_hash_ms,
            client_per_user: ClientStageTimes {
                extract_ms: pick(|t| t.extract_ms),
                noise_ms: pick(|t| t.noise_ms),
                encrypt_ms: pick(|t| t.encrypt_ms),
                total_ms: pick(|t| t.total_ms),
            },
            client_wall_ms,
            combine_ms,
            dlog: recovered
                .iter()
                .map(|(_, t)| AttributeTime {
                    attribute: t.attribute.clone(),
                    ms: ms(t.elapsed),
                })
                .collect(),
            recover_ms,
            model_ms,
            market_ms,
            broker_ms,
            total_ms: ms(total_start.elapsed()),
        };

        let report = ProtocolReport {
            schema_version: SCHEMA_VERSION.into(),
            config: self.echo(&specs),
            group: GroupSummary {
                modulus_bits: params.modulus().bits(),
                order_bits: params.order().bits(),
                fingerprint: hex::encode(Sha256::digest(serde_json::to_vec(&params.to_doc())?)),
            },
            round,
            tag_hex: hex::encode(&tag),
            n_users: n,
            dropped_rows: self.dropped_rows,
            attributes,
            ranking: ranking.order.iter().map(|&id| name_of(id)).collect(),
            quote: quote
                .entries
                .iter()
                .map(|e| QuoteLine {
                    attribute: name_of(e.attribute_id),
                    d_js: e.d,
                    cost: e.cost,
                })
                .collect(),
            purchase: purchase.attribute_ids.iter().map(|&id| name_of(id)).collect(),
            revenue,
            decryption: recovered.into_iter().map(|(_, t)| t).collect(),
            timing: Some(timing),
        };

        let column_sum = |f: &dyn Fn(&ClientOutput, usize) -> i64| -> Vec<i64> {
            (0..k).map(|j| outputs.iter().map(|o| f(o, j)).sum()).collect()
        };
        let trace = ProtocolTrace {
            tag,
            plaintext_sums: (0..k).map(|j| participants.iter().map(|p| p.values[j]).sum()).collect(),
            plaintext_sums_sq: (0..k)
                .map(|j| participants.iter().map(|p| p.values[j] * p.values[j]).sum())
                .collect(),
            noise_sums_first: column_sum(&|o, j| o.noise_first[j]),
            noise_sums_second: column_sum(&|o, j| o.noise_second[j]),
            specs,
            participants,
            noise_first,
            noise_second,
            bounds,
        };
        Ok((report, trace, RoundSamples { client: client_times }))
    }

    fn echo(&self, specs: &[AttributeSpec]) -> ConfigEcho {
        let cfg = &self.config;
        ConfigEcho {
            n_users: cfg.n_users,
            profile_source: cfg.profiles.describe(),
            attributes: specs.to_vec(),
            sensitivities: cfg.sensitivities.as_ref().map(|p| p.display().to_string()),
            scenario: cfg.scenario,
            modulus_bits: self.group.modulus().bits(),
            order_bits: self.group.order().bits(),
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            noise_enabled: cfg.noise_enabled,
            omega: cfg.omega,
            seed_hex: hex::encode(&cfg.seed),
            dlog_algorithm: cfg.dlog.algorithm,
            max_window: cfg.dlog.max_window,
            purchase_policy: cfg.purchase_policy.to_string(),
            sharing_rule: cfg.sharing_rule,
            discretization: cfg.discretization,
            query: cfg.query.clone(),
        }
    }
}

/// Per-attribute noise for both channels; `ε` and `δ` are split evenly.
fn noise_params(cfg: &RunConfig, specs: &[AttributeSpec], n: usize) -> Result<(Vec<NoiseParams>, Vec<NoiseParams>)> {
    if !cfg.noise_enabled {
        return Ok((
            vec![NoiseParams::disabled(); specs.len()],
            vec![NoiseParams::disabled(); specs.len()],
        ));
    }
    let (eps, delta) = (cfg.epsilon / 2.0, cfg.delta / 2.0);
    let first = specs
        .iter()
        .map(|s| NoiseParams::new(eps, delta, s.first_sensitivity(), n))
        .collect::<Result<_>>()?;
    let second = specs
        .iter()
        .map(|s| NoiseParams::new(eps, delta, s.second_sensitivity(), n))
        .collect::<Result<_>>()?;
    Ok((first, second))
}

fn load_population(cfg: &RunConfig) -> Result<(Vec<AttributeSpec>, Vec<Profile>, usize)> {
    let specs = cfg.profiles.specs()?;
    let (mut profiles, dropped) = match &cfg.profiles {
        ProfileSource::Synthetic(s) => (gen_synthetic(s, cfg.n_users.unwrap_or(0), &cfg.seed)?, 0),
        ProfileSource::Csv { path, .. } => {
            let loaded = load_profiles(path, &specs)?;
            let dropped = loaded.drop_count();
            (loaded.profiles, dropped)
        }
        ProfileSource::Inline { profiles, .. } => {
            let mut seen = HashSet::new();
            for p in profiles {
                p.validate(&specs)?;
                if !seen.insert(p.user_id) {
                    return Err(Error::argument(format!("duplicate user_id {}", p.user_id)));
                }
            }
            (profiles.clone(), 0)
        }
    };
    if let Some(n) = cfg.n_users {
        if profiles.len() < n {
            return Err(Error::argument(format!(
                "{n} users requested, {} available",
                profiles.len()
            )));
        }
        profiles.truncate(n);
    }
    match &cfg.sensitivities {
        Some(path) => attach_sensitivities(&mut profiles, &load_sensitivities(path, &specs)?)?,
        None if !matches!(cfg.profiles, ProfileSource::Inline { .. }) => {
            assign_scenario(&mut profiles, specs.len(), cfg.scenario, &cfg.seed)
        }
        None => {}
    }
    Ok((specs, profiles, dropped))
}

/// Overwrites sensitivities with draws from `scenario`, as a run with `seed` would.
pub fn assign_scenario(profiles: &mut [Profile], k: usize, scenario: Scenario, seed: &[u8]) {
    let table = scenario.sensitivities(profiles.len(), k, &mut rng::derive(seed, "scenario", 0));
    for (p, lambdas) in profiles.iter_mut().zip(table) {
        p.sensitivities = lambdas;
    }
}

/// Applies the query: filters users, then projects onto the requested attributes.
fn select(specs: &[AttributeSpec], profiles: &[Profile], query: &Query) -> Result<(Vec<AttributeSpec>, Vec<Profile>)> {
    let position = |name: &str| {
        specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::argument(format!("query names unknown attribute `{name}`")))
    };
    let filters = query
        .filters
        .iter()
        .map(|f| position(&f.attribute).map(|j| (j, f.min, f.max)))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<usize> = if query.attributes.is_empty() {
        (0..specs.len()).collect()
    } else {
        query.attributes.iter().map(|a| position(a)).collect::<Result<_>>()?
    };
    let selected = index_specs(columns.iter().map(|&j| specs[j].clone()).collect())?;
    let participants: Vec<Profile> = profiles
        .iter()
        .filter(|p| filters.iter().all(|&(j, lo, hi)| (lo..=hi).contains(&p.values[j])))
        .map(|p| Profile {
            user_id: p.user_id,
            values: columns.iter().map(|&j| p.values[j]).collect(),
            sensitivities: columns.iter().map(|&j| p.sensitivities[j]).collect(),
        })
        .collect();
    if participants.is_empty() {
        return Err(Error::protocol("no users match the query"));
    }
    Ok((selected, participants))
}

/// Runs round `config.round` in a fresh session.
pub fn run_protocol(config: RunConfig) -> Result<ProtocolReport> {
    run_protocol_traced(config).map(|(r, _)| r)
}

pub fn run_protocol_traced(config: RunConfig) -> Result<(ProtocolReport, ProtocolTrace)> {
    let round = config.round;
    Session::new(config)?.run_round_traced(round)
}
