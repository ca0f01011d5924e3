// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation harness: ingestion, synthetic data, protocol runs, reports
//! and benchmarks.

pub mod bench;
pub mod data;
pub mod protocol;
pub mod report;
pub mod synth;

pub use bench::{bench, BenchReport, StageStats};
pub use data::{load_attribute_specs, load_profiles, load_sensitivities, LoadedProfiles};
pub use protocol::{
    assign_scenario, round_tag, run_protocol, run_protocol_traced, GroupSource, ProfileSource, ProtocolTrace, Query,
    RangeFilter, RunConfig, Session,
};
pub use report::{validate_report, ProtocolReport, SCHEMA_VERSION};
pub use synth::{gen_synthetic, Family, SyntheticAttribute, SyntheticSpec};
