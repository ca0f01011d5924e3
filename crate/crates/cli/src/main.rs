// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for the aggregation and monetization simulator.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggmarket::aggregator::{DlogAlgorithm, DlogConfig, DEFAULT_MAX_WINDOW};
use aggmarket::group::GroupParams;
use aggmarket::harness::data::{load_attribute_specs, write_attribute_specs, write_profiles, write_sensitivities};
use aggmarket::harness::{
    assign_scenario, bench, gen_synthetic, run_protocol, validate_report, GroupSource, ProfileSource, ProtocolReport,
    Query, RangeFilter, RunConfig, SyntheticSpec,
};
use aggmarket::market::{PurchasePolicy, Scenario, SharingRule};
use aggmarket::model::Discretization;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "aggmarket",
    version,
    about = "Privacy-preserving aggregation and monetization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Schnorr group parameters.
    Setup {
        #[arg(long, default_value_t = 1024)]
        modulus_bits: u64,
        #[arg(long, default_value_t = 160)]
        order_bits: u64,
        #[arg(long, default_value = "aggmarket")]
        seed: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic census-like profiles as CSV.
    GenData {
        #[arg(long, default_value_t = 1000)]
        n_users: usize,
        #[arg(long, default_value = "aggmarket")]
        seed: String,
        /// Synthetic spec JSON; defaults to income, education and age.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the attribute list as JSON.
        #[arg(long)]
        attrs_out: Option<PathBuf>,
        /// Also write sensitivities drawn from `--scenario`.
        #[arg(long)]
        sensitivities_out: Option<PathBuf>,
        #[arg(long, default_value = "all-share")]
        scenario: Scenario,
    },
    /// Run the full protocol once and write a report.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Report JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-attribute table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Repeat the protocol and report per-stage median and p95 timings.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the invariants of a saved report.
    Validate { report: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    n_users: Option<usize>,
    /// Profile CSV; requires `--attrs`. Synthetic profiles are used otherwise.
    #[arg(long, requires = "attrs")]
    profiles: Option<PathBuf>,
    /// Attribute list JSON of {name, min, max, price}.
    #[arg(long, requires = "profiles")]
    attrs: Option<PathBuf>,
    /// Synthetic spec JSON, used when no profile CSV is given.
    #[arg(long, conflicts_with = "profiles")]
    spec: Option<PathBuf>,
    /// Sensitivity CSV; overrides `--scenario`.
    #[arg(long)]
    sensitivities: Option<PathBuf>,
    /// Group parameter file from `setup`; overrides the bit sizes.
    #[arg(long)]
    group: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    modulus_bits: u64,
    #[arg(long, default_value_t = 160)]
    order_bits: u64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    no_noise: bool,
    #[arg(long, default_value_t = 0.1)]
    omega: f64,
    #[arg(long, default_value = "all-share")]
    scenario: Scenario,
    #[arg(long, default_value = "aggmarket")]
    seed: String,
    #[arg(long, default_value = "bsgs")]
    dlog: DlogAlgorithm,
    #[arg(long, default_value_t = DEFAULT_MAX_WINDOW)]
    max_window: u64,
    /// `all`, `none`, `top:<n>` or `only:<name>,...`.
    #[arg(long, default_value = "all")]
    purchase: PurchasePolicy,
    /// `majority` or `all`.
    #[arg(long, default_value = "majority", value_parser = serde_name::<SharingRule>)]
    sharing_rule: SharingRule,
    /// `centered-sum` or `cdf-bins`.
    #[arg(long, default_value = "centered-sum", value_parser = serde_name::<Discretization>)]
    discretization: Discretization,
    /// Attributes to aggregate, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    query: Vec<String>,
    /// User selection `<attribute>=<min>:<max>`; repeatable.
    #[arg(long = "filter", value_parser = parse_filter)]
    filters: Vec<RangeFilter>,
    #[arg(long, default_value_t = 0)]
    round: u64,
}

/// Parses a unit enum variant by its serialized name.
fn serde_name<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_filter(s: &str) -> std::result::Result<RangeFilter, String> {
    let bad = || format!("expected <attribute>=<min>:<max>, got `{s}`");
    let (attribute, range) = s.split_once('=').ok_or_else(bad)?;
    let (min, max) = range.split_once(':').ok_or_else(bad)?;
    Ok(RangeFilter {
        attribute: attribute.to_owned(),
        min: min.trim().parse().map_err(|_| bad())?,
        max: max.trim().parse().map_err(|_| bad())?,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn synthetic_spec(path: Option<&Path>) -> Result<SyntheticSpec> {
    match path {
        Some(p) => {
            let spec: SyntheticSpec = read_json(p)?;
            spec.validate()?;
            Ok(spec)
        }
        None => Ok(SyntheticSpec::census_like()),
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let profiles = match (self.profiles, self.attrs) {
            (Some(path), Some(attrs)) => ProfileSource::Csv {
                path,
                attributes: load_attribute_specs(&attrs)?,
            },
            _ => ProfileSource::Synthetic(synthetic_spec(self.spec.as_deref())?),
        };
        let n_users = match (&profiles, self.n_users) {
            (ProfileSource::Synthetic(_), None) => Some(100),
            (_, n) => n,
        };
        let group = match self.group {
            Some(path) => GroupSource::File { path },
            None => GroupSource::Generate {
                modulus_bits: self.modulus_bits,
                order_bits: self.order_bits,
            },
        };
        Ok(RunConfig {
            n_users,
            profiles,
            sensitivities: self.sensitivities,
            scenario: self.scenario,
            group,
            epsilon: self.epsilon,
            delta: self.delta,
            noise_enabled: !self.no_noise,
            omega: self.omega,
            seed: self.seed.into_bytes(),
            dlog: DlogConfig {
                algorithm: self.dlog,
                max_window: self.max_window,
            },
            purchase_policy: self.purchase,
            sharing_rule: self.sharing_rule,
            discretization: self.discretization,
            query: Query {
                attributes: self.query,
                filters: self.filters,
            },
            round: self.round,
        })
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
            info!("wrote {}", p.display());
        }
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn summarize(report: &ProtocolReport) {
    eprintln!(
        "{} users, {} attributes, revenue {:.6} (aggregator {:.6}, per user {:.6})",
        report.n_users,
        report.attributes.len(),
        report.revenue.total,
        report.revenue.aggregator_revenue,
        report.revenue.per_user_revenue
    );
    for a in &report.attributes {
        eprintln!(
            "  {:<12} rank {} mu {:.4} sigma2 {:.4} d_js {:.6} gamma {:.3} cost {:.6}{}",
            a.attribute,
            a.rank,
            a.mu_hat,
            a.sigma2_hat,
            a.d_js,
            a.gamma,
            a.cost,
            if a.sellable { "" } else { " (withheld)" }
        );
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Setup {
            modulus_bits,
            order_bits,
            seed,
            out,
        } => {
            let params = GroupParams::setup(modulus_bits, order_bits, seed.as_bytes())?;
            write_output(Some(&out), &serde_json::to_string_pretty(&params)?)?;
        }
        Command::GenData {
            n_users,
            seed,
            spec,
            out,
            attrs_out,
            sensitivities_out,
            scenario,
        } => {
            let spec = synthetic_spec(spec.as_deref())?;
            let specs = spec.specs()?;
            let mut profiles = gen_synthetic(&spec, n_users, seed.as_bytes())?;
            write_profiles(BufWriter::new(File::create(&out)?), &specs, &profiles)?;
            if let Some(path) = attrs_out {
                write_attribute_specs(&path, &specs)?;
            }
            if let Some(path) = sensitivities_out {
                assign_scenario(&mut profiles, specs.len(), scenario, seed.as_bytes());
                write_sensitivities(BufWriter::new(File::create(&path)?), &specs, &profiles)?;
            }
            info!("wrote {n_users} profiles to {}", out.display());
        }
        Command::Run { run, out, csv } => {
            let report = run_protocol(run.into_config()?)?;
            summarize(&report);
            if let Some(path) = csv {
                report.write_attribute_csv(BufWriter::new(File::create(&path)?))?;
            }
            write_output(out.as_deref(), &report.to_json()?)?;
        }
        Command::Bench { run, reps, out } => {
            let report = bench(run.into_config()?, reps)?;
            let c = &report.client_per_user.total;
            eprintln!(
                "client per user: median {:.3} ms, p95 {:.3} ms; broker: median {:.3} ms, p95 {:.3} ms",
                c.median_ms, c.p95_ms, report.broker.total.median_ms, report.broker.total.p95_ms
            );
            write_output(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Validate { report } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let parsed = ProtocolReport::from_json(&text)?;
            let violations = validate_report(&parsed);
            if violations.is_empty() {
                println!("{}: ok", report.display());
            } else {
                for v in &violations {
                    println!("{}: {v}", report.display());
                }
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
